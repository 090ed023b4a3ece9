use crate::error::{check_dim, Error, Result};
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::policy::{HeadParams, ReprParams};

use super::head_fit::{fit_head_at, DescentOptions};
use super::risk::FeatureRisk;

/// Slack below zero still treated as optimizer noise.
pub const NEGATIVE_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TaskAvgDifference {
    /// Mean over tasks; raw, may be negative.
    pub value: f64,
    pub per_task: Vec<f64>,
    /// Best head risk with `phi_prime`, per task.
    pub fitted_risk: Vec<f64>,
    /// Risk of the reference pair `(f*_t, phi_star)`, per task.
    pub reference_risk: Vec<f64>,
    /// A restart diverged, or the value fell below `-NEGATIVE_TOL`.
    pub flagged: bool,
}

/// `(1/T) sum_t [ inf_f R_t(f o phi') - R_t(f*_t o phi*) ]`, with each infimum
/// approximated by multi-restart projected descent over heads of norm
/// `<= C_F` (the bound carried by the reference heads).
pub fn task_avg_rep_difference(
    phi_prime: &ReprParams,
    phi_star: &ReprParams,
    heads_star: &[HeadParams],
    tasks: &[FiniteMdp],
    experts: &[TabularPolicy],
    opts: &DescentOptions,
) -> Result<TaskAvgDifference> {
    if tasks.is_empty() {
        return Err(Error::invalid("no tasks"));
    }
    check_dim("reference heads", tasks.len(), heads_star.len())?;
    check_dim("experts", tasks.len(), experts.len())?;
    let mut out = TaskAvgDifference {
        value: 0.0,
        per_task: Vec::new(),
        fitted_risk: Vec::new(),
        reference_risk: Vec::new(),
        flagged: false,
    };
    for (t, ((mdp, expert), head)) in tasks.iter().zip(experts).zip(heads_star).enumerate() {
        let reference = FeatureRisk::for_repr(mdp, expert, phi_star)?.value(head);
        let fit = fit_head_at(&FeatureRisk::for_repr(mdp, expert, phi_prime)?, head.c_f, opts, &[0, t as u64])?;
        out.flagged |= fit.flagged;
        out.per_task.push(fit.value - reference);
        out.fitted_risk.push(fit.value);
        out.reference_risk.push(reference);
    }
    out.value = out.per_task.iter().sum::<f64>() / tasks.len() as f64;
    out.flagged |= out.value < -NEGATIVE_TOL;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WorstCaseDifference {
    pub value: f64,
    /// `inf_f' R(f' o phi')`.
    pub inf_prime: f64,
    /// `inf_f R(f o phi*)`.
    pub inf_star: f64,
    pub flagged: bool,
}

/// `sup_f inf_f' [ R(f' o phi') - R(f o phi*) ]` on the target task.
///
/// The inner objective separates: its first term does not depend on `f`, so
/// the sup-inf equals `inf_f' R(f' o phi') - inf_f R(f o phi*)`, and both
/// infima are approximated by the same head descent. The value is a
/// one-sided estimate in so far as the second infimum is not attained.
pub fn worst_case_rep_difference(
    phi_prime: &ReprParams,
    phi_star: &ReprParams,
    target: &FiniteMdp,
    expert: &TabularPolicy,
    c_f: f64,
    opts: &DescentOptions,
) -> Result<WorstCaseDifference> {
    let prime = fit_head_at(&FeatureRisk::for_repr(target, expert, phi_prime)?, c_f, opts, &[1, 0])?;
    let star = fit_head_at(&FeatureRisk::for_repr(target, expert, phi_star)?, c_f, opts, &[1, 1])?;
    let value = prime.value - star.value;
    Ok(WorstCaseDifference {
        value,
        inf_prime: prime.value,
        inf_star: star.value,
        flagged: prime.flagged || star.flagged || value < -NEGATIVE_TOL,
    })
}

/// Measured diversity `sigma = d_bar / d_worst`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diversity {
    /// Non-negative ratio; zero when `d_bar` vanishes (within tolerance)
    /// while `d_worst` does not.
    Finite(f64),
    /// `d_worst` is zero: the diversity inequality holds for every sigma.
    Infinite,
    /// A difference is negative beyond tolerance.
    Undefined,
}

impl Diversity {
    pub fn is_defined(&self) -> bool {
        !matches!(self, Diversity::Undefined)
    }

    /// `1 / sigma`, the factor on the source-side error terms; infinite at
    /// `sigma = 0`.
    pub fn inverse(&self) -> Option<f64> {
        match *self {
            Diversity::Finite(s) => Some(1.0 / s),
            Diversity::Infinite => Some(0.0),
            Diversity::Undefined => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            Diversity::Finite(s) => s,
            Diversity::Infinite => f64::INFINITY,
            Diversity::Undefined => f64::NAN,
        }
    }
}

pub fn diversity_estimate(d_bar: f64, d_worst: f64) -> Diversity {
    if !(d_bar >= -NEGATIVE_TOL) || !(d_worst >= -NEGATIVE_TOL) {
        return Diversity::Undefined;
    }
    if d_worst <= 1e-9 {
        return Diversity::Infinite;
    }
    Diversity::Finite(d_bar.max(0.0) / d_worst)
}
