use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::mdp::{stationary_distribution, FiniteMdp, TabularPolicy};
use crate::mtbc::optim::OptimState;
use crate::mtbc::Optimizer;
use crate::policy::{logsumexp, HeadParams, PolicyParams, ReprArch, ReprParams};
use crate::rng::{stream_rng, Stream};

/// Full-batch training settings for the surrogate reference policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceOptions {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            steps: 3000,
            lr: 1e-2,
            seed: 0,
        }
    }
}

/// Lowest-risk policy found by full-batch Adam on the exact population risk
/// of `mdp` under `expert`, over the whole constrained policy class. Stands
/// in for the true pair when no planted ground truth exists.
pub fn fit_reference_policy(
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    arch: &ReprArch,
    c_f: f64,
    opts: &ReferenceOptions,
) -> Result<(PolicyParams, f64)> {
    check_dim("architecture input", mdp.obs_dim(), arch.obs_dim)?;
    let occ = stationary_distribution(mdp, expert)?;
    let visited: Vec<usize> = (0..mdp.num_states()).filter(|&s| occ.state_dist[s] > 0.0).collect();
    let mut rng = stream_rng(opts.seed, Stream::Metric, &[3]);
    let repr = ReprParams::init(arch, &mut rng)?;
    let head = HeadParams::init(mdp.num_actions(), arch.out_dim, c_f, &mut rng)?;
    let mut policy = PolicyParams::new(repr, head)?;
    let mut sizes: Vec<usize> = policy.repr.param_slices().iter().map(|s| s.len()).collect();
    sizes.push(policy.head.weight.len());
    let mut opt = OptimState::new(Optimizer::default(), &sizes);
    let mut best = (policy.clone(), f64::INFINITY);
    for step in 0..=opts.steps {
        let mut grads = policy.repr.zero_grads();
        let mut head_grad = vec![0.0; policy.head.weight.len()];
        let mut risk = 0.0;
        for &s in &visited {
            let trace = policy.repr.forward_trace(mdp.observation(s));
            let z = policy.head.logits(&trace.phi);
            let lse = logsumexp(&z);
            let nu = occ.state_dist[s];
            let mu = &occ.state_action_dist[s];
            risk += nu * lse - mu.iter().zip(&z).map(|(m, x)| m * x).sum::<f64>();
            let g: Vec<f64> = z.iter().zip(mu).map(|(x, m)| nu * (x - lse).exp() - m).collect();
            let dphi = policy.head.backward(&trace.phi, &g, &mut head_grad);
            policy.repr.backward(&trace, &dphi, &mut grads);
        }
        if risk < best.1 {
            best = (policy.clone(), risk);
        }
        if step == opts.steps {
            break;
        }
        let mut gslices: Vec<&[f64]> = grads.iter().flat_map(|l| [&l.weight[..], &l.bias[..]]).collect();
        gslices.push(&head_grad);
        let mut params = policy.repr.param_slices_mut();
        params.push(&mut policy.head.weight);
        opt.step(params, gslices, opts.lr);
        policy.head.project();
    }
    Ok(best)
}
