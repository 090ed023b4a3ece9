use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::HeadParams;
use crate::rng::{stream_rng, Stream};

use super::risk::FeatureRisk;

/// Settings for the multi-restart projected descents used to approximate
/// infima and suprema over norm-bounded heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentOptions {
    pub restarts: usize,
    pub steps: usize,
    /// Initial step size; adapted by backtracking.
    pub lr: f64,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            steps: 2000,
            lr: 1e-2,
            seed: 0,
        }
    }
}

impl DescentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.steps == 0 || !(self.lr > 0.0) {
            return Err(Error::invalid("descent needs positive restarts, steps and lr"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Best head found and its objective value.
#[derive(Debug, Clone)]
pub struct HeadFit {
    pub head: HeadParams,
    pub value: f64,
    /// Some restart produced a non-finite objective and was discarded.
    pub flagged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient descent with backtracking on the quadratic upper model
/// and a growing step after every accepted move. Returns `None` when the
/// objective turns non-finite.
pub(crate) fn projected_descent<F>(mut head: HeadParams, objective: &F, steps: usize, lr: f64) -> Option<(HeadParams, f64)>
where
    F: Fn(&HeadParams) -> (f64, Vec<f64>),
{
    head.project();
    let (mut f, mut g) = objective(&head);
    if !f.is_finite() {
        return None;
    }
    let mut step = lr;
    let max_step = lr * 1e6;
    for _ in 0..steps {
        let mut moved = false;
        while step > 1e-16 {
            let mut cand = head.clone();
            cand.weight.iter_mut().zip(&g).for_each(|(w, d)| *w -= step * d);
            cand.project();
            let d: Vec<f64> = cand.weight.iter().zip(&head.weight).map(|(a, b)| a - b).collect();
            let dd = dot(&d, &d);
            if dd == 0.0 {
                return Some((head, f));
            }
            let (fc, gc) = objective(&cand);
            if fc.is_finite() && fc <= f + dot(&g, &d) + dd / (2.0 * step) {
                moved = fc < f;
                head = cand;
                f = fc;
                g = gc;
                step = (step * 2.0).min(max_step);
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Some((head, f))
}

/// Multi-restart minimization over `{ W : |W|_F <= C_F }`. Restart 0 starts
/// from the zero head, the others from random heads.
pub(crate) fn minimize_head<F>(
    num_actions: usize,
    dim: usize,
    c_f: f64,
    objective: &F,
    opts: &DescentOptions,
    path: &[u64],
) -> Result<HeadFit>
where
    F: Fn(&HeadParams) -> (f64, Vec<f64>),
{
    opts.validate()?;
    let mut rng = stream_rng(opts.seed, Stream::Metric, path);
    let mut best: Option<(HeadParams, f64)> = None;
    let mut flagged = false;
    for r in 0..opts.restarts {
        let start = if r == 0 {
            HeadParams::zeros(num_actions, dim, c_f)
        } else {
            let mut h = HeadParams::init(num_actions, dim, c_f, &mut rng)?;
            // spread restarts across the ball, not just near the origin
            let n = h.frobenius_norm();
            if n > 0.0 {
                let s = c_f / n * (r as f64 / opts.restarts as f64);
                h.weight.iter_mut().for_each(|w| *w *= s);
            }
            h
        };
        match projected_descent(start, objective, opts.steps, opts.lr) {
            Some((h, v)) => {
                if best.as_ref().is_none_or(|(_, b)| v < *b) {
                    best = Some((h, v));
                }
            }
            None => flagged = true,
        }
    }
    let (head, value) = best.ok_or_else(|| Error::NonConvergence {
        solver: "head descent",
        iterations: opts.steps,
        residual: f64::NAN,
    })?;
    Ok(HeadFit { head, value, flagged })
}

/// Approximates `inf_W R(W)` for an occupancy-weighted feature risk.
pub fn fit_head(risk: &FeatureRisk, c_f: f64, opts: &DescentOptions) -> Result<HeadFit> {
    fit_head_at(risk, c_f, opts, &[])
}

pub(crate) fn fit_head_at(risk: &FeatureRisk, c_f: f64, opts: &DescentOptions, path: &[u64]) -> Result<HeadFit> {
    minimize_head(risk.num_actions(), risk.dim(), c_f, &|h: &HeadParams| risk.value_and_grad(h), opts, path)
}
