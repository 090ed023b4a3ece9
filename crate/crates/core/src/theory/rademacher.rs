use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mtbc::optim::OptimState;
use crate::mtbc::Optimizer;
use crate::policy::{norm, HeadParams, ReprArch, ReprParams};
use crate::rng::{stream_rng, Stream};

/// Projected-ascent settings for classes whose supremum has no closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentOptions {
    pub restarts: usize,
    pub steps: usize,
    pub lr: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 2,
            steps: 200,
            lr: 1e-2,
        }
    }
}

/// Function classes with `K`-dimensional outputs.
#[derive(Debug, Clone)]
pub enum FunctionClass {
    /// The single function `x -> c`.
    Constant(Vec<f64>),
    /// `{ x -> W x : |W|_F <= C_F }` with `num_outputs` rows.
    LinearHeads { c_f: f64, num_outputs: usize },
    /// All representations of a fixed architecture.
    Repr { arch: ReprArch, search: AscentOptions },
    /// Linear heads on top of representations of a fixed architecture.
    Composed {
        arch: ReprArch,
        c_f: f64,
        num_outputs: usize,
        search: AscentOptions,
    },
}

impl FunctionClass {
    pub fn num_outputs(&self) -> usize {
        match self {
            FunctionClass::Constant(c) => c.len(),
            FunctionClass::LinearHeads { num_outputs, .. } | FunctionClass::Composed { num_outputs, .. } => *num_outputs,
            FunctionClass::Repr { arch, .. } => arch.out_dim,
        }
    }

    /// Whether per-draw suprema come from a local search.
    pub fn is_searched(&self) -> bool {
        matches!(self, FunctionClass::Repr { .. } | FunctionClass::Composed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct RademacherEstimate {
    pub mean: f64,
    /// Standard error of the Monte-Carlo mean.
    pub stderr: f64,
    pub draws: Vec<f64>,
    /// Suprema were found by local search, so the mean underestimates.
    pub lower_estimate: bool,
}

/// `(C_F / N) |sum_n eps_n x_n^T|_F`: the supremum of
/// `(1/N) sum_n <eps_n, W x_n>` over `|W|_F <= C_F`.
pub fn linear_class_sup(c_f: f64, data: &[Vec<f64>], signs: &[Vec<f64>]) -> f64 {
    let g = sign_feature_product(data, signs);
    c_f * norm(&g) / data.len() as f64
}

/// The head attaining `linear_class_sup`.
pub fn linear_class_maximizer(c_f: f64, data: &[Vec<f64>], signs: &[Vec<f64>]) -> HeadParams {
    let k = signs[0].len();
    let d = data[0].len();
    let g = sign_feature_product(data, signs);
    let n = norm(&g);
    let mut head = HeadParams::zeros(k, d, c_f);
    if n > 0.0 {
        head.weight = g.iter().map(|x| c_f * x / n).collect();
    }
    head
}

/// `(1/N) sum_n <eps_n, W x_n>`.
pub fn linear_class_objective(head: &HeadParams, data: &[Vec<f64>], signs: &[Vec<f64>]) -> f64 {
    let total: f64 = data
        .iter()
        .zip(signs)
        .map(|(x, e)| head.logits(x).iter().zip(e).map(|(z, s)| z * s).sum::<f64>())
        .sum();
    total / data.len() as f64
}

// sum_n eps_n x_n^T, row-major K x D
fn sign_feature_product(data: &[Vec<f64>], signs: &[Vec<f64>]) -> Vec<f64> {
    let k = signs[0].len();
    let d = data[0].len();
    let mut g = vec![0.0; k * d];
    for (x, e) in data.iter().zip(signs) {
        for (a, s) in e.iter().enumerate() {
            g[a * d..(a + 1) * d].iter_mut().zip(x).for_each(|(gi, xi)| *gi += s * xi);
        }
    }
    g
}

fn draw_signs(rng: &mut crate::rng::Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// Distinct inputs and, per draw, the summed signs of their copies.
struct Grouped {
    points: Vec<Vec<f64>>,
    index: Vec<usize>,
}

impl Grouped {
    fn new(data: &[Vec<f64>]) -> Self {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut points = Vec::new();
        let index = data
            .iter()
            .map(|x| {
                let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                *seen.entry(key).or_insert_with(|| {
                    points.push(x.clone());
                    points.len() - 1
                })
            })
            .collect();
        Self { points, index }
    }

    fn sum_signs(&self, signs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = signs[0].len();
        let mut out = vec![vec![0.0; k]; self.points.len()];
        for (u, e) in self.index.iter().zip(signs) {
            out[*u].iter_mut().zip(e).for_each(|(o, s)| *o += s);
        }
        out
    }
}

/// Objective value and gradient w.r.t. each point's features.
type FeatureObjective<'a> = dyn Fn(&[Vec<f64>]) -> (f64, Vec<Vec<f64>>) + 'a;

/// Adam ascent over representation parameters; returns the best value seen.
fn repr_ascent(
    arch: &ReprArch,
    points: &[Vec<f64>],
    objective: &FeatureObjective<'_>,
    search: &AscentOptions,
    rng: &mut crate::rng::Rng,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for _ in 0..search.restarts {
        let mut repr = ReprParams::init(arch, rng)?;
        let sizes: Vec<usize> = repr.param_slices().iter().map(|s| s.len()).collect();
        let mut opt = OptimState::new(Optimizer::default(), &sizes);
        for step in 0..=search.steps {
            let traces: Vec<_> = points.iter().map(|x| repr.forward_trace(x)).collect();
            let phis: Vec<Vec<f64>> = traces.iter().map(|t| t.phi.clone()).collect();
            let (value, dphi) = objective(&phis);
            if value.is_finite() {
                best = best.max(value);
            }
            if step == search.steps {
                break;
            }
            let mut grads = repr.zero_grads();
            for (t, g) in traces.iter().zip(&dphi) {
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                repr.backward(t, &neg, &mut grads);
            }
            let gslices: Vec<&[f64]> = grads.iter().flat_map(|l| [&l.weight[..], &l.bias[..]]).collect();
            opt.step(repr.param_slices_mut(), gslices, search.lr);
        }
    }
    Ok(best)
}

/// Monte-Carlo estimate of `E_eps sup_f (1/N) sum_n sum_k eps_{n,k} f_k(x_n)`.
pub fn empirical_rademacher(
    class: &FunctionClass,
    data: &[Vec<f64>],
    num_draws: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if num_draws == 0 {
        return Err(Error::invalid("need at least one sign draw"));
    }
    if data.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let dim = data[0].len();
    for x in data {
        check_dim("sample", dim, x.len())?;
    }
    let k = class.num_outputs();
    if k == 0 {
        return Err(Error::invalid("function class without outputs"));
    }
    if let FunctionClass::Repr { arch, .. } | FunctionClass::Composed { arch, .. } = class {
        check_dim("architecture input", arch.obs_dim, dim)?;
    }
    let n = data.len() as f64;
    let grouped = Grouped::new(data);
    let mut sign_rng = stream_rng(seed, Stream::Metric, &[0]);
    let mut search_rng = stream_rng(seed, Stream::Metric, &[1]);
    let mut draws = Vec::with_capacity(num_draws);
    for _ in 0..num_draws {
        let signs = draw_signs(&mut sign_rng, data.len(), k);
        let value = match class {
            FunctionClass::Constant(c) => {
                signs.iter().map(|e| e.iter().zip(c).map(|(s, v)| s * v).sum::<f64>()).sum::<f64>() / n
            }
            FunctionClass::LinearHeads { c_f, .. } => linear_class_sup(*c_f, data, &signs),
            FunctionClass::Repr { arch, search } => {
                let sums = grouped.sum_signs(&signs);
                let objective = |phis: &[Vec<f64>]| {
                    let v: f64 = phis.iter().zip(&sums).map(|(p, e)| p.iter().zip(e).map(|(a, b)| a * b).sum::<f64>()).sum();
                    (v / n, sums.iter().map(|e| e.iter().map(|x| x / n).collect()).collect())
                };
                repr_ascent(arch, &grouped.points, &objective, search, &mut search_rng)?
            }
            FunctionClass::Composed { arch, c_f, search, .. } => {
                let sums = grouped.sum_signs(&signs);
                let d = arch.out_dim;
                let objective = |phis: &[Vec<f64>]| {
                    let g = sign_feature_product(phis, &sums);
                    let gn = norm(&g);
                    let grads = sums
                        .iter()
                        .map(|e| {
                            let mut out = vec![0.0; d];
                            if gn > 0.0 {
                                for (a, s) in e.iter().enumerate() {
                                    for j in 0..d {
                                        out[j] += s * g[a * d + j];
                                    }
                                }
                                out.iter_mut().for_each(|x| *x *= c_f / (n * gn));
                            }
                            out
                        })
                        .collect();
                    (c_f * gn / n, grads)
                };
                repr_ascent(arch, &grouped.points, &objective, search, &mut search_rng)?
            }
        };
        draws.push(value);
    }
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let stderr = if draws.len() > 1 {
        (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        mean,
        stderr,
        draws,
        lower_estimate: class.is_searched(),
    })
}

/// `C_F C_Phi sqrt(|A| / m)`.
pub fn linear_rademacher_bound(c_f: f64, c_phi: f64, num_actions: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    Ok(c_f * c_phi * (num_actions as f64 / m as f64).sqrt())
}
