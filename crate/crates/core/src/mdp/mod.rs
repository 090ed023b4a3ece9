//! Exact tabular MDP machinery: the MDP and policy containers, linear-system
//! policy evaluation, value iteration, discounted occupancy measures, and
//! demonstration sampling.

mod demos;
mod solve;

pub use demos::{sample_demos_exact, sample_demos_rollout, DemoSet};
pub use solve::{
    bellman_residual, greedy_policy, policy_evaluation, q_values, stationary_distribution,
    value_iteration, StationaryDist,
};

use crate::error::{check_dim, Error, Result};

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-9;

/// A sparse transition row: `(next_state, probability)` sorted by next state.
pub type TransitionRow = Vec<(usize, f64)>;

/// Infinite-horizon discounted MDP with per-state observation features.
///
/// Transitions are stored sparsely (one row per state-action pair) since
/// every environment in this crate has only a handful of successors per
/// pair. `transition_prob` exposes the dense `S x A x S` view.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    reward: Vec<f64>,
    transitions: Vec<TransitionRow>,
    initial_dist: Vec<f64>,
    gamma: f64,
    observations: Vec<Vec<f64>>,
}

fn check_distribution(what: &str, probs: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid(format!("{what}: entry {p} is not a probability")));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("{what}: sums to {total}, not 1")));
    }
    Ok(())
}

fn normalize_row(num_states: usize, row: TransitionRow) -> Result<TransitionRow> {
    let mut row: TransitionRow = row.into_iter().filter(|&(_, p)| p != 0.0).collect();
    row.sort_by_key(|&(s, _)| s);
    let mut merged: TransitionRow = Vec::with_capacity(row.len());
    for (s, p) in row {
        if s >= num_states {
            return Err(Error::invalid(format!(
                "transition to state {s} out of range (num_states = {num_states})"
            )));
        }
        match merged.last_mut() {
            Some((last, q)) if *last == s => *q += p,
            _ => merged.push((s, p)),
        }
    }
    Ok(merged)
}

impl FiniteMdp {
    /// Builds an MDP from sparse transition rows indexed by `s * num_actions + a`.
    /// Duplicate successors in a row are merged and zero entries dropped.
    pub fn from_sparse(
        num_actions: usize,
        reward: Vec<f64>,
        transitions: Vec<TransitionRow>,
        initial_dist: Vec<f64>,
        gamma: f64,
        observations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let num_states = initial_dist.len();
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid("an MDP needs at least one state and one action"));
        }
        check_dim("reward table", num_states * num_actions, reward.len())?;
        check_dim("transition rows", num_states * num_actions, transitions.len())?;
        check_dim("observation map", num_states, observations.len())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if let Some(r) = reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid(format!("reward {r} outside [0, 1]")));
        }
        let obs_dim = observations[0].len();
        for (s, o) in observations.iter().enumerate() {
            check_dim("observation dimension", obs_dim, o.len())?;
            if o.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("observation of state {s} is not finite")));
            }
        }
        check_distribution("initial distribution", initial_dist.iter().copied())?;
        let transitions = transitions
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let row = normalize_row(num_states, row)?;
                check_distribution(
                    &format!(
                        "transition row (s={}, a={})",
                        i / num_actions,
                        i % num_actions
                    ),
                    row.iter().map(|&(_, p)| p),
                )?;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_states,
            num_actions,
            reward,
            transitions,
            initial_dist,
            gamma,
            observations,
        })
    }

    /// Builds an MDP from dense tables: `reward[s][a]`, `transition[s][a][s']`.
    pub fn from_dense(
        reward: &[Vec<f64>],
        transition: &[Vec<Vec<f64>>],
        initial_dist: Vec<f64>,
        gamma: f64,
        observations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let num_states = initial_dist.len();
        check_dim("reward rows", num_states, reward.len())?;
        check_dim("transition rows", num_states, transition.len())?;
        let num_actions = reward.first().map_or(0, Vec::len);
        let mut flat_reward = Vec::with_capacity(num_states * num_actions);
        let mut rows = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            check_dim("reward columns", num_actions, reward[s].len())?;
            check_dim("transition actions", num_actions, transition[s].len())?;
            flat_reward.extend_from_slice(&reward[s]);
            for a in 0..num_actions {
                check_dim("transition successors", num_states, transition[s][a].len())?;
                rows.push(transition[s][a].iter().copied().enumerate().collect());
            }
        }
        Self::from_sparse(num_actions, flat_reward, rows, initial_dist, gamma, observations)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.num_actions + a]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        let row = self.transition_row(s, a);
        row.binary_search_by_key(&next, |&(t, _)| t)
            .map_or(0.0, |i| row[i].1)
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn observation(&self, s: usize) -> &[f64] {
        &self.observations[s]
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].len()
    }

    /// Same MDP with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    /// `(num_states, num_actions, obs_dim)`; tasks in a family must agree on it.
    pub fn space_signature(&self) -> (usize, usize, usize) {
        (self.num_states, self.num_actions, self.obs_dim())
    }
}

/// Stationary Markovian policy stored as an `S x A` row-stochastic table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if num_actions == 0 {
            return Err(Error::invalid("policy needs at least one state and action"));
        }
        let mut probs = Vec::with_capacity(rows.len() * num_actions);
        for (s, row) in rows.iter().enumerate() {
            check_dim("policy row", num_actions, row.len())?;
            check_distribution(&format!("policy row {s}"), row.iter().copied())?;
            probs.extend_from_slice(row);
        }
        Ok(Self { num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// One-hot policy taking `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::invalid(format!("action {a} out of range in state {s}")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self { num_actions, probs })
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Highest-probability action; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states()).all(|s| self.row(s).iter().all(|&p| p == 0.0 || p == 1.0))
    }

    pub(crate) fn check_against(&self, mdp: &FiniteMdp) -> Result<()> {
        check_dim("policy states", mdp.num_states(), self.num_states())?;
        check_dim("policy actions", mdp.num_actions(), self.num_actions())
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `max_i |v1_i - v2_i|`.
pub fn value_gap(v1: &[f64], v2: &[f64]) -> Result<f64> {
    check_dim("value vectors", v1.len(), v2.len())?;
    Ok(v1
        .iter()
        .zip(v2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> FiniteMdp {
        FiniteMdp::from_dense(
            &[vec![0.0, 1.0], vec![0.5, 0.5]],
            &[
                vec![vec![1.0, 0.0], vec![0.3, 0.7]],
                vec![vec![0.0, 1.0], vec![0.5, 0.5]],
            ],
            vec![1.0, 0.0],
            0.9,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn dense_and_sparse_views_agree() {
        let mdp = two_state();
        assert_eq!(mdp.transition_prob(0, 1, 1), 0.7);
        assert_eq!(mdp.transition_prob(0, 0, 1), 0.0);
        assert_eq!(mdp.transition_row(0, 0), &[(0, 1.0)]);
        assert_eq!(mdp.space_signature(), (2, 2, 2));
    }

    #[test]
    fn rejects_broken_invariants() {
        let obs = vec![vec![0.0]];
        assert!(FiniteMdp::from_dense(&[vec![1.5]], &[vec![vec![1.0]]], vec![1.0], 0.5, obs.clone()).is_err());
        assert!(FiniteMdp::from_dense(&[vec![0.5]], &[vec![vec![0.9]]], vec![1.0], 0.5, obs.clone()).is_err());
        assert!(FiniteMdp::from_dense(&[vec![0.5]], &[vec![vec![1.0]]], vec![0.8], 0.5, obs.clone()).is_err());
        assert!(FiniteMdp::from_dense(&[vec![0.5]], &[vec![vec![1.0]]], vec![1.0], 1.0, obs).is_err());
    }

    #[test]
    fn policy_rows_must_be_distributions() {
        assert!(TabularPolicy::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(TabularPolicy::new(vec![vec![-0.1, 1.1]]).is_err());
        let p = TabularPolicy::deterministic(&[1, 0], 3).unwrap();
        assert!(p.is_deterministic());
        assert_eq!(p.argmax(0), 1);
        assert!(!TabularPolicy::uniform(2, 3).is_deterministic());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn value_gap_cases() {
        assert_eq!(value_gap(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(value_gap(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(value_gap(&[0.0], &[0.0, 1.0]).is_err());
    }
}
