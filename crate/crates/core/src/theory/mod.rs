//! Exact tabular computation of the quantities in the transfer bounds:
//! population risks and expected KL under expert occupancies, representation
//! differences and diversity, empirical Rademacher complexities, the
//! realizability slack, and the assembled bound report.

mod bounds;
mod head_fit;
mod rademacher;
mod reference;
mod repr_diff;
mod risk;
mod zeta;

pub use bounds::{
    compose_bound_report, policy_error_bound, transfer_policy_error_bound, verify_theorem5, BoundInputs, BoundReport,
    PolicyErrorCheck,
};
pub use head_fit::{fit_head, DescentOptions, HeadFit};
pub use rademacher::{
    empirical_rademacher, linear_class_maximizer, linear_class_objective, linear_class_sup, linear_rademacher_bound,
    AscentOptions, FunctionClass, RademacherEstimate,
};
pub use reference::{fit_reference_policy, ReferenceOptions};
pub use repr_diff::{
    diversity_estimate, task_avg_rep_difference, worst_case_rep_difference, Diversity, TaskAvgDifference,
    WorstCaseDifference, NEGATIVE_TOL,
};
pub use risk::{expected_kl, population_risk, transfer_risk, FeatureRisk, PolicyRef};
pub(crate) use zeta::minimax_polish;
pub use zeta::{realizability_zeta, zeta_for_head, ZetaEstimate};
