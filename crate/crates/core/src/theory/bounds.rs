use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{policy_evaluation, value_gap, FiniteMdp, TabularPolicy};
use crate::mtbc::tabularize;

use super::repr_diff::{diversity_estimate, Diversity};
use super::risk::{expected_kl, PolicyRef};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("discount must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

/// `2 sqrt(2) sqrt(epsilon) / (1 - gamma)^2`.
pub fn policy_error_bound(epsilon: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be non-negative, got {epsilon}")));
    }
    Ok(2.0 * 2f64.sqrt() * epsilon.sqrt() / (1.0 - gamma).powi(2))
}

/// The policy-error bound at `epsilon_gen + 2 zeta`.
pub fn transfer_policy_error_bound(epsilon_gen: f64, zeta: f64, gamma: f64) -> Result<f64> {
    policy_error_bound(epsilon_gen + 2.0 * zeta, gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyErrorCheck {
    /// `|v_expert - v_policy|_inf`, exact.
    pub lhs: f64,
    pub rhs: f64,
    pub kl: f64,
    pub holds: bool,
    /// KL was infinite; the check holds vacuously.
    pub infinite_kl: bool,
}

/// Compares the exact value gap with the bound at `epsilon = E_nu KL`.
pub fn verify_theorem5<'a>(
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    policy: impl Into<PolicyRef<'a>>,
) -> Result<PolicyErrorCheck> {
    let policy = policy.into();
    let table = match policy {
        PolicyRef::Params(p) => tabularize(p, mdp.observations())?,
        PolicyRef::Tabular(p) => p.clone(),
    };
    let lhs = value_gap(&policy_evaluation(mdp, expert)?, &policy_evaluation(mdp, &table)?)?;
    let kl = expected_kl(mdp, expert, policy)?;
    if kl.is_infinite() {
        return Ok(PolicyErrorCheck {
            lhs,
            rhs: f64::INFINITY,
            kl,
            holds: true,
            infinite_kl: true,
        });
    }
    let rhs = policy_error_bound(kl.max(0.0), mdp.gamma())?;
    Ok(PolicyErrorCheck {
        lhs,
        rhs,
        kl,
        holds: lhs <= rhs + 1e-9,
        infinite_kl: false,
    })
}

/// Measured quantities entering the transfer bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub transfer_risk: f64,
    pub d_bar: f64,
    pub d_worst: f64,
    pub zeta_hat: f64,
    /// Estimate of the representation-class Rademacher complexity on the
    /// `N T` source inputs.
    pub rademacher_repr: f64,
    pub kl_expected: f64,
    /// `|v_expert - v_learned|_inf` on the target task.
    pub policy_error_lhs: f64,
    pub c_phi: f64,
    pub c_f: f64,
    pub num_actions: usize,
    pub gamma: f64,
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub sigma_hat: Diversity,
    /// `log|A| + 2 C_Phi C_F`.
    pub b: f64,
    /// `C_F C_Phi sqrt(|A| / M)`.
    pub rademacher_linear_bound: f64,
    /// `8 C_F C_Phi sqrt(|A| / M)`.
    pub target_complexity: f64,
    /// `2 B sqrt(log(2/delta) / (2M))`.
    pub target_concentration: f64,
    /// `8 sqrt(2) C_F R_NT`.
    pub source_complexity: f64,
    /// `2 B sqrt(log(2/delta) / (2NT))`.
    pub source_concentration: f64,
    /// Target terms plus source terms over sigma; `None` when sigma is
    /// undefined, infinite when sigma is zero.
    pub epsilon_gen: Option<f64>,
    pub policy_error_rhs: Option<f64>,
}

pub fn compose_bound_report(inputs: BoundInputs) -> Result<BoundReport> {
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", inputs.delta)));
    }
    if inputs.n == 0 || inputs.t == 0 || inputs.m == 0 || inputs.num_actions == 0 {
        return Err(Error::invalid("N, T, M and |A| must be positive"));
    }
    check_gamma(inputs.gamma)?;
    let (cf, cp) = (inputs.c_f, inputs.c_phi);
    let a = inputs.num_actions as f64;
    let m = inputs.m as f64;
    let nt = (inputs.n * inputs.t) as f64;
    let log_term = (2.0 / inputs.delta).ln();
    let b = a.ln() + 2.0 * cp * cf;
    let rademacher_linear_bound = cf * cp * (a / m).sqrt();
    let target_complexity = 8.0 * rademacher_linear_bound;
    let target_concentration = 2.0 * b * (log_term / (2.0 * m)).sqrt();
    let source_complexity = 8.0 * 2f64.sqrt() * cf * inputs.rademacher_repr;
    let source_concentration = 2.0 * b * (log_term / (2.0 * nt)).sqrt();
    let sigma_hat = diversity_estimate(inputs.d_bar, inputs.d_worst);
    let epsilon_gen = sigma_hat
        .inverse()
        .map(|inv| target_complexity + target_concentration + inv * (source_complexity + source_concentration));
    let policy_error_rhs = match epsilon_gen {
        Some(e) => Some(transfer_policy_error_bound(e, inputs.zeta_hat, inputs.gamma)?),
        None => None,
    };
    Ok(BoundReport {
        inputs,
        sigma_hat,
        b,
        rademacher_linear_bound,
        target_complexity,
        target_concentration,
        source_complexity,
        source_concentration,
        epsilon_gen,
        policy_error_rhs,
    })
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_f64)
}

impl BoundReport {
    /// Column order of `values`, `csv_row` and `to_key_values`.
    pub const FIELDS: [&'static str; 28] = [
        "n",
        "t",
        "m",
        "num_actions",
        "gamma",
        "delta",
        "c_phi",
        "c_f",
        "b",
        "transfer_risk",
        "d_bar",
        "d_worst",
        "sigma_hat",
        "zeta_hat",
        "rademacher_repr",
        "rademacher_linear_bound",
        "target_complexity",
        "target_concentration",
        "source_complexity",
        "source_concentration",
        "epsilon_gen",
        "kl_expected",
        "policy_error_lhs",
        "policy_error_rhs",
        "bound_holds",
        "kl_bound_rhs",
        "kl_bound_holds",
        "bound_complete",
    ];

    /// Whether the composed bound is available and finite.
    pub fn is_complete(&self) -> bool {
        self.policy_error_rhs.is_some_and(f64::is_finite)
    }

    /// Whether the measured value gap is within the composed bound.
    pub fn holds(&self) -> Option<bool> {
        self.policy_error_rhs.map(|r| self.inputs.policy_error_lhs <= r + 1e-9)
    }

    /// The same bound evaluated at the measured expected KL instead of
    /// `epsilon_gen + 2 zeta`.
    pub fn kl_bound_rhs(&self) -> Option<f64> {
        if self.inputs.kl_expected.is_finite() {
            policy_error_bound(self.inputs.kl_expected.max(0.0), self.inputs.gamma).ok()
        } else {
            None
        }
    }

    pub fn values(&self) -> Vec<String> {
        let i = &self.inputs;
        let kl_rhs = self.kl_bound_rhs();
        let flag = |b: Option<bool>| b.map_or_else(|| "NA".to_string(), |b| b.to_string());
        vec![
            i.n.to_string(),
            i.t.to_string(),
            i.m.to_string(),
            i.num_actions.to_string(),
            fmt_f64(i.gamma),
            fmt_f64(i.delta),
            fmt_f64(i.c_phi),
            fmt_f64(i.c_f),
            fmt_f64(self.b),
            fmt_f64(i.transfer_risk),
            fmt_f64(i.d_bar),
            fmt_f64(i.d_worst),
            fmt_f64(self.sigma_hat.to_f64()),
            fmt_f64(i.zeta_hat),
            fmt_f64(i.rademacher_repr),
            fmt_f64(self.rademacher_linear_bound),
            fmt_f64(self.target_complexity),
            fmt_f64(self.target_concentration),
            fmt_f64(self.source_complexity),
            fmt_f64(self.source_concentration),
            fmt_opt(self.epsilon_gen),
            fmt_f64(i.kl_expected),
            fmt_f64(i.policy_error_lhs),
            fmt_opt(self.policy_error_rhs),
            flag(self.holds()),
            fmt_opt(kl_rhs),
            flag(kl_rhs.map(|r| i.policy_error_lhs <= r + 1e-9)),
            self.is_complete().to_string(),
        ]
    }

    /// One `key=value` line per field.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in Self::FIELDS.iter().zip(self.values()) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn csv_header() -> String {
        Self::FIELDS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }
}
