use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng as _, SeedableRng};

use super::{stationary_distribution, FiniteMdp, TabularPolicy};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Expert demonstrations for one task: `(state, action)` index pairs.
///
/// Text form: a header record `task_id,seed,n` followed by one
/// `state_index,action_index` line per pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoSet {
    pub task_id: String,
    pub seed: u64,
    pub pairs: Vec<(usize, usize)>,
}

impl DemoSet {
    pub fn new(task_id: impl Into<String>, seed: u64, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let task_id = task_id.into();
        if task_id.is_empty() || task_id.contains([',', '\n', '\r']) {
            return Err(Error::invalid(format!("task id {task_id:?} must be non-empty without commas or newlines")));
        }
        Ok(Self { task_id, seed, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// First `n` pairs as a new set; demos for smaller sample sizes are
    /// prefixes of the largest draw.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.pairs.len() {
            return Err(Error::invalid(format!(
                "requested {n} demonstrations but only {} were drawn",
                self.pairs.len()
            )));
        }
        Ok(Self {
            task_id: self.task_id.clone(),
            seed: self.seed,
            pairs: self.pairs[..n].to_vec(),
        })
    }

    pub fn check_ranges(&self, num_states: usize, num_actions: usize) -> Result<()> {
        match self
            .pairs
            .iter()
            .find(|&&(s, a)| s >= num_states || a >= num_actions)
        {
            Some(&(s, a)) => Err(Error::invalid(format!(
                "demo pair ({s}, {a}) out of range for {num_states} states / {num_actions} actions"
            ))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{},{},{}\n", self.task_id, self.seed, self.pairs.len());
        for (s, a) in &self.pairs {
            writeln!(out, "{s},{a}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must be task_id,seed,n; got {header:?}"),
            });
        }
        let parse_err = |line: usize, what: &str, raw: &str| Error::Parse {
            line,
            message: format!("bad {what} {raw:?}"),
        };
        let seed = fields[1].parse().map_err(|_| parse_err(1, "seed", fields[1]))?;
        let n: usize = fields[2].parse().map_err(|_| parse_err(1, "count", fields[2]))?;
        let mut pairs = Vec::with_capacity(n);
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (s, a) = line.split_once(',').ok_or_else(|| parse_err(i + 1, "pair", line))?;
            pairs.push((
                s.parse().map_err(|_| parse_err(i + 1, "state", s))?,
                a.parse().map_err(|_| parse_err(i + 1, "action", a))?,
            ));
        }
        if pairs.len() != n {
            return Err(Error::Parse {
                line: 1,
                message: format!("header announces {n} pairs, found {}", pairs.len()),
            });
        }
        Self::new(fields[0], seed, pairs)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn validate(mdp: &FiniteMdp, expert: &TabularPolicy, n: usize) -> Result<()> {
    expert.check_against(mdp)?;
    if n == 0 {
        return Err(Error::invalid("at least one demonstration must be requested"));
    }
    Ok(())
}

/// Draws `n` pairs i.i.d. from the expert's exact discounted occupancy `mu`.
pub fn sample_demos_exact(
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    task_id: &str,
    n: usize,
    seed: u64,
) -> Result<DemoSet> {
    validate(mdp, expert, n)?;
    let dist = stationary_distribution(mdp, expert)?;
    let num_actions = mdp.num_actions();
    let weights = dist.state_action_dist.iter().flatten().copied();
    let index = WeightedIndex::new(weights).map_err(|e| Error::invalid(format!("occupancy measure: {e}")))?;
    let mut rng = Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let k = index.sample(&mut rng);
            (k / num_actions, k % num_actions)
        })
        .collect();
    DemoSet::new(task_id, seed, pairs)
}

fn sample_row(rng: &mut Rng, row: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(t, p) in row {
        acc += p;
        if u < acc {
            return t;
        }
    }
    row.last().map_or(0, |&(t, _)| t)
}

/// Collects `ceil(n / horizon)` expert episodes of length `horizon`, acting
/// with the highest-probability action, and trims the concatenation to `n`.
pub fn sample_demos_rollout(
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    task_id: &str,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<DemoSet> {
    validate(mdp, expert, n)?;
    if horizon == 0 {
        return Err(Error::invalid("episode timeout must be at least 1"));
    }
    let start: Vec<(usize, f64)> = mdp.initial_dist().iter().copied().enumerate().collect();
    let episodes = n.div_ceil(horizon);
    let mut rng = Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(episodes * horizon);
    for _ in 0..episodes {
        let mut s = sample_row(&mut rng, &start);
        for _ in 0..horizon {
            let a = expert.argmax(s);
            pairs.push((s, a));
            s = sample_row(&mut rng, mdp.transition_row(s, a));
        }
    }
    pairs.truncate(n);
    DemoSet::new(task_id, seed, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn absorbing() -> FiniteMdp {
        FiniteMdp::from_dense(
            &[vec![0.2, 0.9]],
            &[vec![vec![1.0], vec![1.0]]],
            vec![1.0],
            0.9,
            vec![vec![1.0]],
        )
        .unwrap()
    }

    #[test]
    fn rollout_counts_and_trims() {
        let mdp = absorbing();
        let expert = TabularPolicy::new(vec![vec![0.3, 0.7]]).unwrap();
        let demos = sample_demos_rollout(&mdp, &expert, "t", 7, 3, 1).unwrap();
        assert_eq!(demos.len(), 7);
        assert!(demos.pairs.iter().all(|&p| p == (0, 1)));
    }

    #[test]
    fn exact_sampling_is_seeded() {
        let mdp = absorbing();
        let expert = TabularPolicy::deterministic(&[1], 2).unwrap();
        let a = sample_demos_exact(&mdp, &expert, "t", 50, 9).unwrap();
        let b = sample_demos_exact(&mdp, &expert, "t", 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.pairs.iter().all(|&p| p == (0, 1)));
    }

    #[test]
    fn zero_demos_rejected() {
        let mdp = absorbing();
        let expert = TabularPolicy::deterministic(&[1], 2).unwrap();
        assert!(sample_demos_exact(&mdp, &expert, "t", 0, 9).is_err());
        assert!(sample_demos_rollout(&mdp, &expert, "t", 3, 0, 9).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let d = DemoSet::new("target", 42, vec![(0, 1), (3, 2)]).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("target,42,2\n0,1\n3,2\n"));
        assert_eq!(DemoSet::from_text(&text).unwrap(), d);
        assert!(DemoSet::from_text("t,1,3\n0,1\n").is_err());
        assert!(DemoSet::from_text("t,x,1\n0,1\n").is_err());
        assert!(DemoSet::new("a,b", 0, vec![]).is_err());
    }
}
