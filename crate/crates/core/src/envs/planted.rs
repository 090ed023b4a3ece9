//! Synthetic families with a known shared representation: every expert is
//! the argmax of `f*_t o phi*`, so realizability holds by construction and
//! the representation-difference quantities can be measured against the
//! truth.

use rand::distributions::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{FamilyKind, TaskFamily, TaskParams};
use crate::error::{Error, Result};
use crate::mdp::{argmax, FiniteMdp, TransitionRow};
use crate::policy::{HeadParams, ReprArch, ReprParams};
use crate::rng::{stream_rng, Rng, Stream};
use crate::theory::minimax_polish;

/// Margin below which a random head's argmax counts as tied.
const UNIQUE_ARGMAX_GAP: f64 = 1e-3;
const POLISH_STEPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub repr_dim: usize,
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub c_phi: f64,
    pub c_f: f64,
    /// Required gap between the top two logits of `f*_t o phi*` at every state.
    pub min_margin: f64,
    pub successors: usize,
    pub max_retries: usize,
    pub gamma: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            num_states: 32,
            num_actions: 4,
            repr_dim: 4,
            obs_dim: 8,
            hidden: vec![16],
            c_phi: 10.0,
            c_f: 40.0,
            min_margin: 10.0,
            successors: 3,
            max_retries: 1000,
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGroundTruth {
    pub repr: ReprParams,
    /// One head per source task followed by the target head.
    pub heads: Vec<HeadParams>,
    pub c_phi: f64,
    pub c_f: f64,
}

impl PlantedGroundTruth {
    pub fn source_heads(&self) -> &[HeadParams] {
        &self.heads[..self.heads.len() - 1]
    }

    pub fn target_head(&self) -> &HeadParams {
        self.heads.last().expect("at least one head")
    }
}

/// Smallest top-1 minus top-2 logit gap over the given features.
pub fn min_logit_gap(head: &HeadParams, features: &[Vec<f64>]) -> f64 {
    features
        .iter()
        .map(|phi| {
            let mut logits = head.logits(phi);
            logits.sort_by(|a, b| b.total_cmp(a));
            if logits.len() < 2 {
                f64::INFINITY
            } else {
                logits[0] - logits[1]
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// A random head on the `C_F` sphere with a strictly unique argmax at every
/// state, then pushed towards the max-margin head for the same expert actions.
/// Redrawn until the polished head keeps the actions and meets `min_margin`.
fn draw_head(cfg: &PlantedConfig, features: &[Vec<f64>], rng: &mut Rng) -> Result<HeadParams> {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    for _ in 0..cfg.max_retries {
        let mut head = HeadParams::zeros(cfg.num_actions, cfg.repr_dim, cfg.c_f);
        head.weight = (0..cfg.num_actions * cfg.repr_dim).map(|_| dist.sample(rng)).collect();
        let n = head.frobenius_norm();
        if n == 0.0 {
            continue;
        }
        head.weight.iter_mut().for_each(|w| *w *= cfg.c_f / n);
        if min_logit_gap(&head, features) < UNIQUE_ARGMAX_GAP {
            continue;
        }
        let actions: Vec<usize> = features.iter().map(|phi| argmax(&head.logits(phi))).collect();
        let polished = minimax_polish(head, features, &actions, POLISH_STEPS, 1e-2);
        let kept = features.iter().zip(&actions).all(|(phi, &a)| argmax(&polished.logits(phi)) == a);
        if kept && min_logit_gap(&polished, features) >= cfg.min_margin {
            return Ok(polished);
        }
    }
    Err(Error::invalid(format!(
        "no head with logit margin >= {} found in {} draws ({} states, {} actions, D = {})",
        cfg.min_margin, cfg.max_retries, cfg.num_states, cfg.num_actions, cfg.repr_dim
    )))
}

fn task_mdp(
    cfg: &PlantedConfig,
    expert_actions: &[usize],
    observations: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<FiniteMdp> {
    let n = cfg.num_states;
    let k = cfg.successors.clamp(1, n);
    let mut rows: Vec<TransitionRow> = Vec::with_capacity(n * cfg.num_actions);
    let mut reward = Vec::with_capacity(n * cfg.num_actions);
    for &best in expert_actions {
        for a in 0..cfg.num_actions {
            let targets = sample(rng, n, k);
            let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let z: f64 = w.iter().sum();
            rows.push(targets.iter().zip(&w).map(|(t, wi)| (t, wi / z)).collect());
            // paying only for the expert action makes the expert optimal
            reward.push(if a == best { 1.0 } else { 0.0 });
        }
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let z: f64 = w.iter().sum();
    let initial = w.iter().map(|x| x / z).collect();
    FiniteMdp::from_sparse(cfg.num_actions, reward, rows, initial, cfg.gamma, observations.to_vec())
}

/// `t` source tasks plus one target task sharing random observations and a
/// random bounded representation `phi*`; each task has its own head (scaled
/// to `|W|_F = C_F`, redrawn until the logit margin holds), random sparse
/// dynamics, and reward 1 exactly for the expert action.
pub fn make_planted_family(cfg: &PlantedConfig, t: usize, seed: u64) -> Result<(TaskFamily, PlantedGroundTruth)> {
    if cfg.repr_dim < 2 {
        return Err(Error::invalid("planted representation dimension must be at least 2"));
    }
    if t == 0 || cfg.num_states == 0 || cfg.num_actions < 2 || cfg.obs_dim == 0 {
        return Err(Error::invalid("planted family needs t >= 1, states, >= 2 actions, observations"));
    }
    let mut rng = stream_rng(seed, Stream::EnvGen, &[FamilyKind::Planted as u64]);
    let obs_dist = Uniform::new_inclusive(-1.0, 1.0);
    let observations: Vec<Vec<f64>> = (0..cfg.num_states)
        .map(|_| (0..cfg.obs_dim).map(|_| obs_dist.sample(&mut rng)).collect())
        .collect();
    let arch = ReprArch {
        obs_dim: cfg.obs_dim,
        hidden: cfg.hidden.clone(),
        out_dim: cfg.repr_dim,
        c_phi: cfg.c_phi,
    };
    let mut repr = ReprParams::init(&arch, &mut rng)?;
    // Blow up the last layer so that most raw outputs leave the unit ball
    // and phi* sits on (or near) the C_phi sphere.
    if let Some(last) = repr.layers.last_mut() {
        last.weight.iter_mut().for_each(|w| *w *= 10.0);
        last.bias.iter_mut().for_each(|b| *b *= 10.0);
    }
    let features: Vec<Vec<f64>> = observations.iter().map(|o| repr.forward(o)).collect();
    // target first, then sources, each head followed by its dynamics, so a
    // family with fewer sources is a prefix of one with more
    let mut heads = Vec::with_capacity(t + 1);
    let mut mdps = Vec::with_capacity(t + 1);
    for _ in 0..=t {
        let h = draw_head(cfg, &features, &mut rng)?;
        let actions: Vec<usize> = features.iter().map(|phi| argmax(&h.logits(phi))).collect();
        mdps.push(task_mdp(cfg, &actions, &observations, &mut rng)?);
        heads.push(h);
    }
    heads.rotate_left(1);
    mdps.rotate_left(1);
    let truth = PlantedGroundTruth {
        repr,
        heads,
        c_phi: cfg.c_phi,
        c_f: cfg.c_f,
    };
    let mut source_tasks = mdps;
    let target_task = source_tasks.pop().expect("t + 1 tasks");
    let family = TaskFamily {
        kind: FamilyKind::Planted,
        source_tasks,
        target_task,
        params_per_task: (1..=t).chain([0]).map(|i| TaskParams::Planted { task_index: i }).collect(),
        seed,
        ground_truth: Some(truth.clone()),
    };
    family.check_shared_spaces()?;
    Ok((family, truth))
}
