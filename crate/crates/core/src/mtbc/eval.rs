use crate::error::{check_dim, Result};
use crate::mdp::{policy_evaluation, value_gap, FiniteMdp, TabularPolicy};
use crate::policy::{softmax, PolicyParams};

/// Softmax probabilities of `policy` at every state's observation.
pub fn tabularize(policy: &PolicyParams, observations: &[Vec<f64>]) -> Result<TabularPolicy> {
    let rows = observations
        .iter()
        .map(|o| {
            check_dim("observation", policy.repr.obs_dim(), o.len())?;
            let mut p = softmax(&policy.logits(o));
            // re-normalize so rows pass the distribution check after round-off
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= z);
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    TabularPolicy::new(rows)
}

/// Expert and uniform-random values used to normalize returns.
#[derive(Debug, Clone)]
pub struct ReturnAnchors {
    pub expert_values: Vec<f64>,
    pub expert_return: f64,
    pub random_return: f64,
}

fn initial_return(mdp: &FiniteMdp, v: &[f64]) -> f64 {
    mdp.initial_dist().iter().zip(v).map(|(p, x)| p * x).sum()
}

impl ReturnAnchors {
    pub fn new(mdp: &FiniteMdp, expert: &TabularPolicy) -> Result<Self> {
        let expert_values = policy_evaluation(mdp, expert)?;
        let random = policy_evaluation(mdp, &TabularPolicy::uniform(mdp.num_states(), mdp.num_actions()))?;
        Ok(Self {
            expert_return: initial_return(mdp, &expert_values),
            random_return: initial_return(mdp, &random),
            expert_values,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    pub values: Vec<f64>,
    /// `rho^T v`.
    pub raw_return: f64,
    /// `(rho^T v - random) / (expert - random)`; `None` when expert and
    /// random returns coincide.
    pub normalized_return: Option<f64>,
    /// `|v_expert - v|_inf`.
    pub value_gap_inf: f64,
}

pub fn evaluate_policy(mdp: &FiniteMdp, policy: &TabularPolicy, anchors: &ReturnAnchors) -> Result<PolicyEvaluation> {
    let values = policy_evaluation(mdp, policy)?;
    let raw_return = initial_return(mdp, &values);
    let span = anchors.expert_return - anchors.random_return;
    let normalized_return = if span.abs() > 1e-12 {
        Some((raw_return - anchors.random_return) / span)
    } else {
        None
    };
    Ok(PolicyEvaluation {
        value_gap_inf: value_gap(&anchors.expert_values, &values)?,
        values,
        raw_return,
        normalized_return,
    })
}
