//! Softmax policies `softmax(W phi(s))`: a tanh MLP representation whose
//! output is projected into the `C_phi` ball, a linear task head with
//! Frobenius bound `C_F`, the log-softmax loss, and hand-written backprop.

mod io;
mod loss;

pub use io::{NamedTensor, TensorFile};
pub use loss::{log_softmax, log_softmax_loss, logsumexp, softmax};

use rand::distributions::{Distribution, Uniform};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

/// Fully connected layer. `weight` is stored input-major: entry `(i, j)`
/// (input `i`, output `j`) lives at `i * out_dim + j`, so sparse inputs
/// such as one-hot observations only touch the rows they activate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        Self {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect(),
            bias: (0..out_dim).map(|_| dist.sample(rng)).collect(),
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weight[i * self.out_dim..(i + 1) * self.out_dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

/// Shape of a representation network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprArch {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    pub c_phi: f64,
}

/// Representation `phi(s) = C_phi * u / max(1, |u|)` where `u` is a tanh MLP
/// (tanh after every layer except the last).
#[derive(Debug, Clone, PartialEq)]
pub struct ReprParams {
    pub layers: Vec<Dense>,
    pub c_phi: f64,
}

/// Intermediate values of one representation forward pass.
#[derive(Debug, Clone)]
pub struct ReprTrace {
    /// Input to each layer; entry 0 is the observation.
    inputs: Vec<Vec<f64>>,
    raw: Vec<f64>,
    raw_norm: f64,
    pub phi: Vec<f64>,
}

impl ReprParams {
    pub fn init(arch: &ReprArch, rng: &mut Rng) -> Result<Self> {
        if arch.obs_dim == 0 || arch.out_dim == 0 || arch.hidden.contains(&0) {
            return Err(Error::invalid("representation layers must have positive width"));
        }
        if !(arch.c_phi > 0.0) {
            return Err(Error::invalid(format!("C_phi must be positive, got {}", arch.c_phi)));
        }
        let mut dims = vec![arch.obs_dim];
        dims.extend_from_slice(&arch.hidden);
        dims.push(arch.out_dim);
        let layers = dims.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Ok(Self {
            layers,
            c_phi: arch.c_phi,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward_trace(&self, obs: &[f64]) -> ReprTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = obs.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward_into(&current, &mut out);
            if l != last {
                out.iter_mut().for_each(|x| *x = x.tanh());
            }
            inputs.push(std::mem::replace(&mut current, out));
        }
        let raw = current;
        let raw_norm = norm(&raw);
        let scale = self.c_phi / raw_norm.max(1.0);
        let phi = raw.iter().map(|x| scale * x).collect();
        ReprTrace {
            inputs,
            raw,
            raw_norm,
            phi,
        }
    }

    pub fn forward(&self, obs: &[f64]) -> Vec<f64> {
        self.forward_trace(obs).phi
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d phi`.
    pub fn backward(&self, trace: &ReprTrace, dphi: &[f64], grads: &mut [Dense]) {
        let c = self.c_phi;
        let mut delta: Vec<f64> = if trace.raw_norm <= 1.0 {
            dphi.iter().map(|g| c * g).collect()
        } else {
            let n = trace.raw_norm;
            let dot: f64 = trace.raw.iter().zip(dphi).map(|(u, g)| u * g).sum();
            trace
                .raw
                .iter()
                .zip(dphi)
                .map(|(u, g)| c / n * (g - u * dot / (n * n)))
                .collect()
        };
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let grad = &mut grads[l];
            let input = &trace.inputs[l];
            for (gb, d) in grad.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            for (i, &x) in input.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &mut grad.weight[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (g, d) in row.iter_mut().zip(&delta) {
                    *g += x * d;
                }
            }
            if l == 0 {
                break;
            }
            // input of layer l is tanh output of layer l - 1
            delta = input
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    let row = &layer.weight[i * layer.out_dim..(i + 1) * layer.out_dim];
                    let back: f64 = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                    back * (1.0 - a * a)
                })
                .collect();
        }
    }

    pub fn zero_grads(&self) -> Vec<Dense> {
        self.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect()
    }

    /// Parameter slices in a fixed order (per layer: weight, bias).
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }
}

/// Linear task head `x -> W x`, `W` stored row-major `num_actions x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub num_actions: usize,
    pub in_dim: usize,
    pub weight: Vec<f64>,
    pub c_f: f64,
}

impl HeadParams {
    pub fn zeros(num_actions: usize, in_dim: usize, c_f: f64) -> Self {
        Self {
            num_actions,
            in_dim,
            weight: vec![0.0; num_actions * in_dim],
            c_f,
        }
    }

    /// Uniform(-1/sqrt(D), 1/sqrt(D)) entries, projected onto the `C_F` ball.
    pub fn init(num_actions: usize, in_dim: usize, c_f: f64, rng: &mut Rng) -> Result<Self> {
        if num_actions == 0 || in_dim == 0 {
            return Err(Error::invalid("head dimensions must be positive"));
        }
        if !(c_f > 0.0) {
            return Err(Error::invalid(format!("C_F must be positive, got {c_f}")));
        }
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut head = Self {
            num_actions,
            in_dim,
            weight: (0..num_actions * in_dim).map(|_| dist.sample(rng)).collect(),
            c_f,
        };
        head.project();
        Ok(head)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.weight)
    }

    /// Radial projection onto `{ W : |W|_F <= C_F }`.
    pub fn project(&mut self) {
        let n = self.frobenius_norm();
        if n > self.c_f {
            let s = self.c_f / n;
            self.weight.iter_mut().for_each(|w| *w *= s);
        }
    }

    pub fn logits(&self, phi: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(phi).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// Given `g = d loss / d logits`, accumulates `g phi^T` into `grad` and
    /// returns `d loss / d phi = W^T g`.
    pub fn backward(&self, phi: &[f64], g: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut dphi = vec![0.0; self.in_dim];
        for (a, &ga) in g.iter().enumerate() {
            let row = &self.weight[a * self.in_dim..(a + 1) * self.in_dim];
            let grow = &mut grad[a * self.in_dim..(a + 1) * self.in_dim];
            for d in 0..self.in_dim {
                grow[d] += ga * phi[d];
                dphi[d] += ga * row[d];
            }
        }
        dphi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub repr: ReprParams,
    pub head: HeadParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub repr: Vec<Dense>,
    pub head: Vec<f64>,
}

impl PolicyParams {
    pub fn new(repr: ReprParams, head: HeadParams) -> Result<Self> {
        check_dim("head input vs representation output", repr.out_dim(), head.in_dim)?;
        Ok(Self { repr, head })
    }

    pub fn init(arch: &ReprArch, num_actions: usize, c_f: f64, rng: &mut Rng) -> Result<Self> {
        let repr = ReprParams::init(arch, rng)?;
        let head = HeadParams::init(num_actions, arch.out_dim, c_f, rng)?;
        Ok(Self { repr, head })
    }

    pub fn num_actions(&self) -> usize {
        self.head.num_actions
    }

    pub fn logits(&self, obs: &[f64]) -> Vec<f64> {
        self.head.logits(&self.repr.forward(obs))
    }
}

/// `(logits, probs)` of the policy at one observation.
pub fn forward(policy: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim("observation", policy.repr.obs_dim(), obs.len())?;
    if obs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("observation contains non-finite entries"));
    }
    let logits = policy.logits(obs);
    let probs = softmax(&logits);
    Ok((logits, probs))
}

/// Mean log-softmax loss over `batch` and its exact gradient.
pub fn loss_and_grads(policy: &PolicyParams, batch: &[(&[f64], usize)]) -> Result<(f64, PolicyGrads)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let mut grads = PolicyGrads {
        repr: policy.repr.zero_grads(),
        head: vec![0.0; policy.head.weight.len()],
    };
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &(obs, action) in batch {
        check_dim("observation", policy.repr.obs_dim(), obs.len())?;
        if action >= policy.num_actions() {
            return Err(Error::invalid(format!("action {action} out of range")));
        }
        let trace = policy.repr.forward_trace(obs);
        let logits = policy.head.logits(&trace.phi);
        let (loss, mut g) = loss::loss_with_logit_grad(&logits, action);
        total += loss;
        g.iter_mut().for_each(|x| *x *= scale);
        let dphi = policy.head.backward(&trace.phi, &g, &mut grads.head);
        policy.repr.backward(&trace, &dphi, &mut grads.repr);
    }
    Ok((total * scale, grads))
}

/// Rescales the head onto the `C_F` ball; the representation bound is
/// architectural and needs no projection.
pub fn project_constraints(mut policy: PolicyParams) -> PolicyParams {
    policy.head.project();
    policy
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
