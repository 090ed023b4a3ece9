use crate::error::{check_dim, Error, Result};
use crate::mdp::{stationary_distribution, FiniteMdp, StationaryDist, TabularPolicy};
use crate::policy::{log_softmax, HeadParams, PolicyParams, ReprParams};

/// A policy given either by parameters or by an explicit table.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a> {
    Params(&'a PolicyParams),
    Tabular(&'a TabularPolicy),
}

impl<'a> From<&'a PolicyParams> for PolicyRef<'a> {
    fn from(p: &'a PolicyParams) -> Self {
        PolicyRef::Params(p)
    }
}

impl<'a> From<&'a TabularPolicy> for PolicyRef<'a> {
    fn from(p: &'a TabularPolicy) -> Self {
        PolicyRef::Tabular(p)
    }
}

impl PolicyRef<'_> {
    fn log_probs(&self, mdp: &FiniteMdp) -> Result<Vec<Vec<f64>>> {
        match self {
            PolicyRef::Params(p) => {
                check_dim("policy actions", mdp.num_actions(), p.num_actions())?;
                check_dim("policy observation", mdp.obs_dim(), p.repr.obs_dim())?;
                Ok(mdp.observations().iter().map(|o| log_softmax(&p.logits(o))).collect())
            }
            PolicyRef::Tabular(p) => {
                p.check_against(mdp)?;
                Ok((0..p.num_states()).map(|s| p.row(s).iter().map(|x| x.ln()).collect()).collect())
            }
        }
    }
}

/// Expected log-loss of a linear head on fixed per-state features, weighted by
/// an expert's state-action occupancy. Only visited states are kept.
#[derive(Debug, Clone)]
pub struct FeatureRisk {
    num_actions: usize,
    dim: usize,
    // (features, nu(s), mu(s, .))
    rows: Vec<(Vec<f64>, f64, Vec<f64>)>,
}

impl FeatureRisk {
    pub fn new(features: &[Vec<f64>], occupancy: &StationaryDist) -> Result<Self> {
        check_dim("feature rows", occupancy.num_states(), features.len())?;
        let dim = features.first().map_or(0, Vec::len);
        let num_actions = occupancy.state_action_dist.first().map_or(0, Vec::len);
        if dim == 0 || num_actions == 0 {
            return Err(Error::invalid("empty features or action set"));
        }
        let mut rows = Vec::new();
        for (s, phi) in features.iter().enumerate() {
            check_dim("feature", dim, phi.len())?;
            let nu = occupancy.state_dist[s];
            if nu > 0.0 {
                rows.push((phi.clone(), nu, occupancy.state_action_dist[s].clone()));
            }
        }
        Ok(Self { num_actions, dim, rows })
    }

    /// Features `repr(obs(s))` on `mdp`, weighted by the occupancy of `expert`.
    pub fn for_repr(mdp: &FiniteMdp, expert: &TabularPolicy, repr: &ReprParams) -> Result<Self> {
        check_dim("representation input", mdp.obs_dim(), repr.obs_dim())?;
        let occ = stationary_distribution(mdp, expert)?;
        let features: Vec<Vec<f64>> = mdp.observations().iter().map(|o| repr.forward(o)).collect();
        Self::new(&features, &occ)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, head: &HeadParams) -> f64 {
        self.rows
            .iter()
            .map(|(phi, nu, mu)| {
                let z = head.logits(phi);
                let lse = crate::policy::logsumexp(&z);
                nu * lse - mu.iter().zip(&z).map(|(m, x)| m * x).sum::<f64>()
            })
            .sum()
    }

    /// Risk and its gradient w.r.t. the head weights (row-major, like `head.weight`).
    pub fn value_and_grad(&self, head: &HeadParams) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; head.weight.len()];
        let mut total = 0.0;
        for (phi, nu, mu) in &self.rows {
            let z = head.logits(phi);
            let lse = crate::policy::logsumexp(&z);
            total += nu * lse - mu.iter().zip(&z).map(|(m, x)| m * x).sum::<f64>();
            for (a, za) in z.iter().enumerate() {
                let g = nu * (za - lse).exp() - mu[a];
                if g != 0.0 {
                    let row = &mut grad[a * self.dim..(a + 1) * self.dim];
                    row.iter_mut().zip(phi).for_each(|(r, x)| *r += g * x);
                }
            }
        }
        (total, grad)
    }
}

/// Exact `sum_{s,a} mu*(s,a) * loss(logits(s), a)` under the expert's occupancy.
pub fn population_risk(mdp: &FiniteMdp, expert: &TabularPolicy, policy: &PolicyParams) -> Result<f64> {
    check_dim("policy actions", mdp.num_actions(), policy.num_actions())?;
    Ok(FeatureRisk::for_repr(mdp, expert, &policy.repr)?.value(&policy.head))
}

/// `sum_s nu*(s) KL(expert(s) || policy(s))`; infinite when the policy puts
/// zero mass on an action the expert takes at a visited state.
pub fn expected_kl<'a>(mdp: &FiniteMdp, expert: &TabularPolicy, policy: impl Into<PolicyRef<'a>>) -> Result<f64> {
    let log_probs = policy.into().log_probs(mdp)?;
    let occ = stationary_distribution(mdp, expert)?;
    let mut total = 0.0;
    for (s, lp) in log_probs.iter().enumerate() {
        let nu = occ.state_dist[s];
        if nu == 0.0 {
            continue;
        }
        let kl: f64 = expert
            .row(s)
            .iter()
            .zip(lp)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| p * (p.ln() - q))
            .sum();
        total += nu * kl;
    }
    Ok(total)
}

/// Population risk of `learned` minus that of `reference` on the target task.
pub fn transfer_risk(
    target: &FiniteMdp,
    expert: &TabularPolicy,
    learned: &PolicyParams,
    reference: &PolicyParams,
) -> Result<f64> {
    Ok(population_risk(target, expert, learned)? - population_risk(target, expert, reference)?)
}
