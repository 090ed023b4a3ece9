//! Parameterized task families sharing state and action spaces.

pub mod frozen_lake;
pub mod pendulum;
pub mod planted;

pub use frozen_lake::{make_frozen_lake, Cell, FrozenLakeParams};
pub use pendulum::{make_discrete_pendulum, pendulum_torques, PendulumGrid, PendulumParams};
pub use planted::{make_planted_family, min_logit_gap, PlantedConfig, PlantedGroundTruth};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{value_iteration, FiniteMdp, TabularPolicy};
use crate::rng::{stream_rng, Rng, Stream};

/// Tolerance used when solving for experts.
pub const EXPERT_TOL: f64 = 1e-10;
const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    FrozenLake = 0,
    Pendulum = 1,
    Planted = 2,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::FrozenLake => "frozen_lake",
            FamilyKind::Pendulum => "pendulum",
            FamilyKind::Planted => "planted",
        }
    }

    /// Demonstrations BC needs for near-expert performance.
    pub fn default_demos_per_task(self) -> usize {
        match self {
            FamilyKind::FrozenLake => 500,
            FamilyKind::Pendulum => 1000,
            FamilyKind::Planted => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskParams {
    FrozenLake(FrozenLakeParams),
    Pendulum(PendulumParams),
    Planted { task_index: usize },
}

/// Inclusive bounds for frozen-lake task parameters. Start and goal cells
/// are drawn uniformly from their rectangles, slip uniformly from its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrozenLakeRanges {
    pub start_rows: [usize; 2],
    pub start_cols: [usize; 2],
    pub goal_rows: [usize; 2],
    pub goal_cols: [usize; 2],
    pub slip: [f64; 2],
}

impl Default for FrozenLakeRanges {
    fn default() -> Self {
        Self {
            start_rows: [0, 7],
            start_cols: [0, 7],
            goal_rows: [0, 7],
            goal_cols: [0, 7],
            slip: [0.0, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumRanges {
    pub max_torque: [f64; 2],
    pub angle_bins: usize,
    pub velocity_bins: usize,
}

impl Default for PendulumRanges {
    fn default() -> Self {
        Self {
            max_torque: [1.5, 2.5],
            angle_bins: 64,
            velocity_bins: 64,
        }
    }
}

/// Generator ranges for each family kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyRanges {
    FrozenLake(FrozenLakeRanges),
    Pendulum(PendulumRanges),
    Planted(PlantedConfig),
}

impl FamilyRanges {
    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilyRanges::FrozenLake(_) => FamilyKind::FrozenLake,
            FamilyRanges::Pendulum(_) => FamilyKind::Pendulum,
            FamilyRanges::Planted(_) => FamilyKind::Planted,
        }
    }
}

/// `T` source tasks and one target task over identical spaces.
#[derive(Debug, Clone)]
pub struct TaskFamily {
    pub kind: FamilyKind,
    pub source_tasks: Vec<FiniteMdp>,
    pub target_task: FiniteMdp,
    /// Parameters of each source task followed by the target's.
    pub params_per_task: Vec<TaskParams>,
    pub seed: u64,
    pub ground_truth: Option<PlantedGroundTruth>,
}

impl TaskFamily {
    pub fn num_sources(&self) -> usize {
        self.source_tasks.len()
    }

    pub fn check_shared_spaces(&self) -> Result<()> {
        let sig = self.target_task.space_signature();
        if self.source_tasks.is_empty() {
            return Err(Error::invalid("a family needs at least one source task"));
        }
        match self.source_tasks.iter().position(|m| m.space_signature() != sig) {
            Some(i) => Err(Error::invalid(format!(
                "source task {i} has spaces {:?}, target has {sig:?}",
                self.source_tasks[i].space_signature()
            ))),
            None => Ok(()),
        }
    }

    /// The same family restricted to its first `t` source tasks. Families are
    /// generated so that this equals a fresh family drawn with `t` sources.
    pub fn with_sources(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.num_sources() {
            return Err(Error::invalid(format!("cannot keep {t} of {} source tasks", self.num_sources())));
        }
        let mut params = self.params_per_task[..t].to_vec();
        params.push(self.params_per_task.last().expect("target params").clone());
        let ground_truth = self.ground_truth.as_ref().map(|g| {
            let mut g = g.clone();
            let target = g.heads.pop().expect("target head");
            g.heads.truncate(t);
            g.heads.push(target);
            g
        });
        Ok(Self {
            kind: self.kind,
            source_tasks: self.source_tasks[..t].to_vec(),
            target_task: self.target_task.clone(),
            params_per_task: params,
            seed: self.seed,
            ground_truth,
        })
    }

    /// Value-iteration experts for every source task, then the target.
    pub fn experts(&self) -> Result<Vec<TabularPolicy>> {
        self.source_tasks
            .iter()
            .chain(std::iter::once(&self.target_task))
            .map(|m| value_iteration(m, EXPERT_TOL).map(|(_, pi)| pi))
            .collect()
    }
}

fn draw_usize(rng: &mut Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.gen_range(lo..=hi)
}

fn draw_f64(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, [lo, hi]: [T; 2]) -> Result<()> {
    if lo <= hi {
        Ok(())
    } else {
        Err(Error::invalid(format!("range {name} = [{lo:?}, {hi:?}] is empty")))
    }
}

impl FrozenLakeRanges {
    fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("start_rows", self.start_rows),
            ("start_cols", self.start_cols),
            ("goal_rows", self.goal_rows),
            ("goal_cols", self.goal_cols),
        ] {
            check_range(name, r)?;
            if r[1] >= frozen_lake::SIDE {
                return Err(Error::invalid(format!("range {name} leaves the 8x8 grid")));
            }
        }
        check_range("slip", self.slip)?;
        if self.slip[0] < 0.0 || self.slip[1] > 1.0 {
            return Err(Error::invalid("slip range must lie in [0, 1]"));
        }
        Ok(())
    }

    fn is_point(&self) -> bool {
        self.start_rows[0] == self.start_rows[1]
            && self.start_cols[0] == self.start_cols[1]
            && self.goal_rows[0] == self.goal_rows[1]
            && self.goal_cols[0] == self.goal_cols[1]
            && self.slip[0] == self.slip[1]
    }

    fn draw(&self, rng: &mut Rng) -> Result<FrozenLakeParams> {
        for _ in 0..MAX_REDRAWS {
            let start = Cell::new(draw_usize(rng, self.start_rows), draw_usize(rng, self.start_cols));
            let goal = Cell::new(draw_usize(rng, self.goal_rows), draw_usize(rng, self.goal_cols));
            if start != goal {
                return Ok(FrozenLakeParams {
                    start,
                    goal,
                    slip: draw_f64(rng, self.slip),
                });
            }
        }
        Err(Error::invalid("start and goal ranges only admit start == goal"))
    }
}

impl PendulumRanges {
    fn validate(&self) -> Result<()> {
        check_range("max_torque", self.max_torque)?;
        if !(self.max_torque[0] > 0.0) {
            return Err(Error::invalid("max torque range must be positive"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut Rng) -> PendulumParams {
        PendulumParams {
            max_torque: draw_f64(rng, self.max_torque),
            angle_bins: self.angle_bins,
            velocity_bins: self.velocity_bins,
        }
    }
}

/// Draws parameters for `t` sources and a target. The target is drawn first;
/// sources are redrawn whenever they coincide with the target or with an
/// earlier source. A range admitting a single parameterization yields a
/// family of identical tasks instead.
fn draw_distinct<P: PartialEq + Clone>(
    t: usize,
    is_point: bool,
    mut draw: impl FnMut() -> Result<P>,
) -> Result<(Vec<P>, P)> {
    let target = draw()?;
    if is_point {
        return Ok((vec![target.clone(); t], target));
    }
    let mut sources: Vec<P> = Vec::with_capacity(t);
    while sources.len() < t {
        let mut accepted = None;
        for _ in 0..MAX_REDRAWS {
            let p = draw()?;
            if p != target && !sources.contains(&p) {
                accepted = Some(p);
                break;
            }
        }
        match accepted {
            Some(p) => sources.push(p),
            None => {
                return Err(Error::invalid(format!(
                    "ranges admit fewer than {} distinct parameterizations besides the target",
                    t
                )))
            }
        }
    }
    Ok((sources, target))
}

pub fn sample_task_family(ranges: &FamilyRanges, t: usize, gamma: f64, seed: u64) -> Result<TaskFamily> {
    if t == 0 {
        return Err(Error::invalid("a family needs at least one source task"));
    }
    let kind = ranges.kind();
    let mut rng = stream_rng(seed, Stream::EnvGen, &[kind as u64]);
    let family = match ranges {
        FamilyRanges::FrozenLake(r) => {
            r.validate()?;
            let (sources, target) = draw_distinct(t, r.is_point(), || r.draw(&mut rng))?;
            let build = |p: &FrozenLakeParams| make_frozen_lake(p, gamma);
            TaskFamily {
                kind,
                source_tasks: sources.iter().map(build).collect::<Result<_>>()?,
                target_task: build(&target)?,
                params_per_task: sources
                    .into_iter()
                    .chain(std::iter::once(target))
                    .map(TaskParams::FrozenLake)
                    .collect(),
                seed,
                ground_truth: None,
            }
        }
        FamilyRanges::Pendulum(r) => {
            r.validate()?;
            let point = r.max_torque[0] == r.max_torque[1];
            let (sources, target) = draw_distinct(t, point, || Ok(r.draw(&mut rng)))?;
            let build = |p: &PendulumParams| make_discrete_pendulum(p, gamma);
            TaskFamily {
                kind,
                source_tasks: sources.iter().map(build).collect::<Result<_>>()?,
                target_task: build(&target)?,
                params_per_task: sources
                    .into_iter()
                    .chain(std::iter::once(target))
                    .map(TaskParams::Pendulum)
                    .collect(),
                seed,
                ground_truth: None,
            }
        }
        FamilyRanges::Planted(cfg) => {
            let cfg = PlantedConfig {
                gamma,
                ..cfg.clone()
            };
            make_planted_family(&cfg, t, seed)?.0
        }
    };
    family.check_shared_spaces()?;
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_range_family_repeats_the_parameterization() {
        let r = FrozenLakeRanges {
            start_rows: [1, 1],
            start_cols: [2, 2],
            goal_rows: [5, 5],
            goal_cols: [6, 6],
            slip: [0.1, 0.1],
        };
        let fam = sample_task_family(&FamilyRanges::FrozenLake(r), 1, 0.99, 3).unwrap();
        let expected = FrozenLakeParams {
            start: Cell::new(1, 2),
            goal: Cell::new(5, 6),
            slip: 0.1,
        };
        assert_eq!(fam.params_per_task, vec![TaskParams::FrozenLake(expected); 2]);
    }

    #[test]
    fn degenerate_ranges_rejected() {
        let same_cell = FrozenLakeRanges {
            start_rows: [2, 2],
            start_cols: [2, 2],
            goal_rows: [2, 2],
            goal_cols: [2, 2],
            slip: [0.0, 0.3],
        };
        assert!(sample_task_family(&FamilyRanges::FrozenLake(same_cell), 2, 0.9, 0).is_err());
        // two cells, zero slip: only two parameterizations exist
        let tiny = FrozenLakeRanges {
            start_rows: [0, 0],
            start_cols: [0, 0],
            goal_rows: [0, 0],
            goal_cols: [1, 2],
            slip: [0.0, 0.0],
        };
        assert!(sample_task_family(&FamilyRanges::FrozenLake(tiny.clone()), 1, 0.9, 0).is_ok());
        assert!(sample_task_family(&FamilyRanges::FrozenLake(tiny), 2, 0.9, 0).is_err());
        let bad = PendulumRanges {
            max_torque: [2.0, 1.0],
            ..PendulumRanges::default()
        };
        assert!(sample_task_family(&FamilyRanges::Pendulum(bad), 2, 0.9, 0).is_err());
        assert!(sample_task_family(&FamilyRanges::FrozenLake(FrozenLakeRanges::default()), 0, 0.9, 0).is_err());
    }
}
