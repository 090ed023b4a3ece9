mod common;

use mtil::envs::{make_frozen_lake, make_planted_family, Cell, FrozenLakeParams, PlantedConfig};
use mtil::mdp::{sample_demos_exact, value_iteration, FiniteMdp, TabularPolicy};
use mtil::mtbc::tabularize;
use mtil::policy::{log_softmax_loss, Dense, HeadParams, PolicyParams, ReprArch, ReprParams};
use mtil::theory::{
    compose_bound_report, diversity_estimate, empirical_rademacher, expected_kl, fit_head, linear_class_maximizer,
    linear_class_objective, linear_class_sup, linear_rademacher_bound, policy_error_bound, population_risk,
    realizability_zeta, task_avg_rep_difference, transfer_risk, verify_theorem5, worst_case_rep_difference,
    BoundInputs, DescentOptions, Diversity, FeatureRisk, FunctionClass,
};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Representation with one linear layer and no hidden units.
fn affine_repr(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>, c_phi: f64) -> ReprParams {
    ReprParams {
        layers: vec![Dense {
            in_dim,
            out_dim,
            weight,
            bias,
        }],
        c_phi,
    }
}

/// `phi(s) = value` on a one-dimensional observation.
fn constant_repr(value: f64) -> ReprParams {
    affine_repr(1, 1, vec![0.0], vec![value], 1.0)
}

fn one_state(num_actions: usize) -> FiniteMdp {
    FiniteMdp::from_dense(
        &[vec![0.0; num_actions]],
        &[vec![vec![1.0]; num_actions]],
        vec![1.0],
        0.9,
        vec![vec![1.0]],
    )
    .unwrap()
}

fn lake() -> (FiniteMdp, TabularPolicy) {
    let params = FrozenLakeParams {
        start: Cell::new(0, 0),
        goal: Cell::new(7, 7),
        slip: 0.1,
    };
    let mdp = make_frozen_lake(&params, 0.99).unwrap();
    let expert = value_iteration(&mdp, 1e-10).unwrap().1;
    (mdp, expert)
}

fn random_softmax(mdp: &FiniteMdp, seed: u64, hidden: usize) -> PolicyParams {
    let arch = ReprArch {
        obs_dim: mdp.obs_dim(),
        hidden: vec![hidden],
        out_dim: 4,
        c_phi: 10.0,
    };
    PolicyParams::init(&arch, mdp.num_actions(), 10.0, &mut common::rng(seed)).unwrap()
}

fn random_repr(obs_dim: usize, seed: u64) -> ReprParams {
    let arch = ReprArch {
        obs_dim,
        hidden: vec![8],
        out_dim: 3,
        c_phi: 10.0,
    };
    ReprParams::init(&arch, &mut common::rng(seed)).unwrap()
}

fn quick_descent() -> DescentOptions {
    DescentOptions {
        restarts: 3,
        steps: 1500,
        ..DescentOptions::default()
    }
}

#[test]
fn uniform_policy_risk_is_log_actions() {
    let (mdp, expert) = lake();
    let mut zero = random_softmax(&mdp, 0, 4);
    zero.head.weight.iter_mut().for_each(|w| *w = 0.0);
    let k = mdp.num_actions();
    let risk = population_risk(&mdp, &expert, &zero).unwrap();
    assert!(close(risk, (k as f64).ln(), 1e-12));
    assert!(close(expected_kl(&mdp, &expert, &zero).unwrap(), (k as f64).ln(), 1e-12));
    let uniform = TabularPolicy::uniform(mdp.num_states(), k);
    assert!(close(expected_kl(&mdp, &expert, &uniform).unwrap(), (k as f64).ln(), 1e-12));
    let bound = policy_error_bound((k as f64).ln(), mdp.gamma()).unwrap();
    let check = verify_theorem5(&mdp, &expert, &uniform).unwrap();
    assert!(check.holds && check.lhs <= bound);
}

#[test]
fn risk_matches_sampled_demonstrations() {
    let (mdp, expert) = lake();
    let policy = random_softmax(&mdp, 3, 8);
    let exact = population_risk(&mdp, &expert, &policy).unwrap();
    let demos = sample_demos_exact(&mdp, &expert, "mc", 100_000, 17).unwrap();
    let mc = demos
        .pairs
        .iter()
        .map(|&(s, a)| log_softmax_loss(&policy.logits(mdp.observation(s)), a))
        .sum::<f64>()
        / demos.len() as f64;
    assert!(close(exact, mc, 0.01), "{exact} vs {mc}");
}

#[test]
fn large_margin_policy_has_tiny_risk() {
    let mut r = common::rng(2);
    let mdp = common::random_mdp(&mut r, 6, 3, 0.9);
    let expert = value_iteration(&mdp, 1e-12).unwrap().1;
    let mut id = vec![0.0; 36];
    (0..6).for_each(|i| id[i * 7] = 1.0);
    let repr = affine_repr(6, 6, id, vec![0.0; 6], 1.0);
    let mut head = HeadParams::zeros(3, 6, 1000.0);
    for s in 0..6 {
        head.weight[expert.argmax(s) * 6 + s] = 20.0;
    }
    let policy = PolicyParams::new(repr, head).unwrap();
    let risk = population_risk(&mdp, &expert, &policy).unwrap();
    assert!(risk < 1e-3);
    // for deterministic experts the KL and the risk coincide
    assert!(close(expected_kl(&mdp, &expert, &policy).unwrap(), risk, 1e-12));
    assert!(close(transfer_risk(&mdp, &expert, &policy, &policy).unwrap(), 0.0, 0.0));
}

#[test]
fn kl_edge_cases() {
    let (mdp, expert) = lake();
    assert_eq!(expected_kl(&mdp, &expert, &expert).unwrap(), 0.0);
    let check = verify_theorem5(&mdp, &expert, &expert).unwrap();
    assert!(check.holds && check.lhs == 0.0 && check.rhs == 0.0);
    let start = mdp.initial_dist().iter().position(|&p| p > 0.0).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..mdp.num_states()).map(|s| expert.row(s).to_vec()).collect();
    let k = mdp.num_actions();
    rows[start] = vec![0.0; k];
    rows[start][(expert.argmax(start) + 1) % k] = 1.0;
    let wrong = TabularPolicy::new(rows).unwrap();
    assert!(expected_kl(&mdp, &expert, &wrong).unwrap().is_infinite());
    let check = verify_theorem5(&mdp, &expert, &wrong).unwrap();
    assert!(check.holds && check.infinite_kl);
    let five = one_state(5);
    let expert5 = TabularPolicy::deterministic(&[2], 5).unwrap();
    let uniform = TabularPolicy::uniform(1, 5);
    assert!(close(expected_kl(&five, &expert5, &uniform).unwrap(), 5f64.ln(), 1e-12));
}

#[test]
fn random_softmax_policies_satisfy_the_value_bound() {
    let (mdp, expert) = lake();
    for seed in 0..20 {
        let policy = random_softmax(&mdp, seed, 8);
        let check = verify_theorem5(&mdp, &expert, &policy).unwrap();
        assert!(check.holds, "seed {seed}: {check:?}");
        // the tabularized policy gives the same answer
        let table = tabularize(&policy, mdp.observations()).unwrap();
        let again = verify_theorem5(&mdp, &expert, &table).unwrap();
        assert!(close(check.lhs, again.lhs, 1e-9) && close(check.rhs, again.rhs, 1e-9));
    }
}

#[test]
fn bound_arithmetic() {
    assert!(close(policy_error_bound(0.02, 0.9).unwrap(), 40.0, 1e-9));
    assert_eq!(policy_error_bound(0.0, 0.5).unwrap(), 0.0);
    assert!(policy_error_bound(0.1, 0.95).unwrap() > policy_error_bound(0.1, 0.9).unwrap());
    assert!(policy_error_bound(-0.1, 0.9).is_err());
    assert!(policy_error_bound(0.1, 1.0).is_err());
    assert!(close(linear_rademacher_bound(1.0, 1.0, 4, 400).unwrap(), 0.1, 1e-15));
    assert!(close(linear_rademacher_bound(1.0, 1.0, 4, 100).unwrap(), 0.2, 1e-15));
    let ratio = linear_rademacher_bound(2.0, 3.0, 5, 70).unwrap() / linear_rademacher_bound(2.0, 3.0, 5, 140).unwrap();
    assert!(close(ratio, 2f64.sqrt(), 1e-12));
    assert!(linear_rademacher_bound(1.0, 1.0, 4, 0).is_err());
}

#[test]
fn diversity_rules() {
    assert_eq!(diversity_estimate(0.2, 0.1), Diversity::Finite(2.0));
    assert_eq!(diversity_estimate(0.2, 0.0), Diversity::Infinite);
    assert_eq!(diversity_estimate(0.0, 0.0), Diversity::Infinite);
    assert_eq!(diversity_estimate(-0.5, 0.1), Diversity::Undefined);
    assert_eq!(diversity_estimate(0.1, -0.5), Diversity::Undefined);
    // small negative values are optimizer noise and clamp to zero
    assert_eq!(diversity_estimate(-1e-4, 0.1), Diversity::Finite(0.0));
    assert_eq!(Diversity::Finite(0.0).inverse(), Some(f64::INFINITY));
    assert_eq!(Diversity::Infinite.inverse(), Some(0.0));
    assert_eq!(Diversity::Undefined.inverse(), None);
}

fn inputs() -> BoundInputs {
    BoundInputs {
        transfer_risk: 0.05,
        d_bar: 0.3,
        d_worst: 0.1,
        zeta_hat: 0.01,
        rademacher_repr: 0.02,
        kl_expected: 0.04,
        policy_error_lhs: 1.0,
        c_phi: 2.0,
        c_f: 3.0,
        num_actions: 4,
        gamma: 0.9,
        n: 100,
        t: 4,
        m: 50,
        delta: 0.1,
    }
}

#[test]
fn bound_report_by_hand() {
    let r = compose_bound_report(inputs()).unwrap();
    let b = 4f64.ln() + 12.0;
    let l = 20f64.ln();
    let target = 8.0 * 6.0 * (4.0f64 / 50.0).sqrt() + 2.0 * b * (l / 100.0).sqrt();
    let source = 8.0 * 2f64.sqrt() * 3.0 * 0.02 + 2.0 * b * (l / 800.0).sqrt();
    let eps = target + source / 3.0;
    assert!(close(r.b, b, 1e-12));
    assert!(close(r.rademacher_linear_bound, 6.0 * (0.08f64).sqrt(), 1e-12));
    assert!(close(r.sigma_hat.to_f64(), 3.0, 1e-12));
    assert!(close(r.epsilon_gen.unwrap(), eps, 1e-9));
    let rhs = 2.0 * 2f64.sqrt() * (eps + 0.02).sqrt() / 0.01;
    assert!(close(r.policy_error_rhs.unwrap(), rhs, 1e-6));
    assert!(r.is_complete() && r.holds() == Some(true));
    assert_eq!(r.values().len(), mtil::theory::BoundReport::FIELDS.len());

    let zero_sigma = compose_bound_report(BoundInputs { d_bar: 0.0, ..inputs() }).unwrap();
    assert_eq!(zero_sigma.epsilon_gen, Some(f64::INFINITY));
    assert!(!zero_sigma.is_complete());
    let undefined = compose_bound_report(BoundInputs { d_bar: -1.0, ..inputs() }).unwrap();
    assert_eq!(undefined.policy_error_rhs, None);
    assert_eq!(undefined.holds(), None);
    assert!(compose_bound_report(BoundInputs { delta: 1.0, ..inputs() }).is_err());
    assert!(compose_bound_report(BoundInputs { m: 0, ..inputs() }).is_err());
}

#[test]
fn constant_class_has_no_complexity() {
    let data: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
    let est = empirical_rademacher(&FunctionClass::Constant(vec![0.7, -2.0]), &data, 500, 3).unwrap();
    assert!(est.mean.abs() <= 3.0 * est.stderr, "{} {}", est.mean, est.stderr);
    assert!(!est.lower_estimate);
}

#[test]
fn three_points_match_sign_enumeration() {
    let data = vec![vec![0.4], vec![-1.0], vec![0.9]];
    let mut exact = 0.0;
    for pattern in 0..8u32 {
        let s: f64 = (0..3).map(|i| if pattern >> i & 1 == 1 { data[i][0] } else { -data[i][0] }).sum();
        exact += s.abs() / 3.0 / 8.0;
    }
    let class = FunctionClass::LinearHeads { c_f: 1.0, num_outputs: 1 };
    let est = empirical_rademacher(&class, &data, 4000, 5).unwrap();
    assert!(close(est.mean, exact, 3.0 * est.stderr), "{} vs {exact} ({})", est.mean, est.stderr);
}

#[test]
fn linear_estimate_respects_the_norm_bound() {
    let mut r = common::rng(8);
    let (c_phi, c_f, k, n) = (2.0, 1.5, 3, 50);
    let data: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x * c_phi / len).collect()
        })
        .collect();
    let class = FunctionClass::LinearHeads { c_f, num_outputs: k };
    let est = empirical_rademacher(&class, &data, 300, 1).unwrap();
    let bound = linear_rademacher_bound(c_f, c_phi, k, n).unwrap();
    assert!(est.mean <= bound + 3.0 * est.stderr);
    assert!(est.mean > 0.0);
}

#[test]
fn searched_classes_are_marked_as_lower_estimates() {
    let arch = ReprArch {
        obs_dim: 2,
        hidden: vec![4],
        out_dim: 2,
        c_phi: 1.0,
    };
    let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, 1.0]).collect();
    let class = FunctionClass::Repr {
        arch,
        search: Default::default(),
    };
    let est = empirical_rademacher(&class, &data, 5, 0).unwrap();
    assert!(est.lower_estimate && est.mean >= 0.0);
    // every representation is bounded by C_phi, so is its complexity
    assert!(est.draws.iter().all(|&d| d <= 2f64.sqrt() + 1e-9));
    assert!(empirical_rademacher(&class, &data, 0, 0).is_err());
    assert!(empirical_rademacher(&class, &[vec![1.0]], 3, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn linear_sup_dominates_any_head_in_the_ball(seed in 0u64..10_000, n in 1usize..6, d in 1usize..4, k in 1usize..4) {
        let mut r = common::rng(seed);
        let data: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let signs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| if r.gen() { 1.0 } else { -1.0 }).collect()).collect();
        let sup = linear_class_sup(1.3, &data, &signs);
        let best = linear_class_maximizer(1.3, &data, &signs);
        prop_assert!(best.frobenius_norm() <= 1.3 + 1e-9);
        prop_assert!((linear_class_objective(&best, &data, &signs) - sup).abs() < 1e-9);
        for _ in 0..200 {
            let mut h = HeadParams::zeros(k, d, 1.3);
            h.weight = (0..k * d).map(|_| r.gen_range(-2.0..2.0)).collect();
            h.project();
            prop_assert!(linear_class_objective(&h, &data, &signs) <= sup + 1e-9);
        }
    }
}

/// Grid over `[-c, c]^2` restricted to the ball, resolution `step`; returns
/// the smallest risk of the one-state toy with expert action 0.
fn toy_grid_inf(phi: f64, c: f64, step: f64) -> f64 {
    let n = (2.0 * c / step).round() as i64;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let w0 = -c + i as f64 * step;
        for j in 0..=n {
            let w1 = -c + j as f64 * step;
            if w0 * w0 + w1 * w1 <= c * c {
                best = best.min(log_softmax_loss(&[w0 * phi, w1 * phi], 0));
            }
        }
    }
    best
}

#[test]
fn toy_differences_match_grid_search() {
    let mdp = one_state(2);
    let expert = TabularPolicy::deterministic(&[0], 2).unwrap();
    let (phi_prime, phi_star) = (0.3, 0.8);
    let mut head_star = HeadParams::zeros(2, 1, 1.0);
    head_star.weight = vec![0.5, -0.2];
    let opts = DescentOptions::default();
    let d_bar = task_avg_rep_difference(
        &constant_repr(phi_prime),
        &constant_repr(phi_star),
        std::slice::from_ref(&head_star),
        std::slice::from_ref(&mdp),
        std::slice::from_ref(&expert),
        &opts,
    )
    .unwrap();
    let inf_prime = toy_grid_inf(phi_prime, 1.0, 1e-3);
    let inf_star = toy_grid_inf(phi_star, 1.0, 1e-3);
    let reference = log_softmax_loss(&[0.5 * phi_star, -0.2 * phi_star], 0);
    assert!(close(d_bar.value, inf_prime - reference, 2e-3), "{} vs {}", d_bar.value, inf_prime - reference);
    // nested grid: sup over f of (inf over f' of R(f' phi') - R(f phi*))
    let d_worst = worst_case_rep_difference(&constant_repr(phi_prime), &constant_repr(phi_star), &mdp, &expert, 1.0, &opts)
        .unwrap();
    assert!(close(d_worst.value, inf_prime - inf_star, 2e-3), "{} vs {}", d_worst.value, inf_prime - inf_star);
    assert!(d_worst.value >= d_worst.inf_prime - d_worst.inf_star - 1e-3);
    assert!(!d_worst.flagged && !d_bar.flagged);
}

#[test]
fn representation_compared_with_itself() {
    let (mdp, expert) = lake();
    for seed in 0..3 {
        let phi = random_repr(mdp.obs_dim(), seed);
        let d = worst_case_rep_difference(&phi, &phi, &mdp, &expert, 10.0, &quick_descent()).unwrap();
        assert!(d.value.abs() <= 1e-3, "{}", d.value);
    }
    // with minimizing reference heads the task average also vanishes
    let cfg = PlantedConfig::default();
    let (family, truth) = make_planted_family(&cfg, 2, 3).unwrap();
    let experts = family.experts().unwrap();
    let tasks = &family.source_tasks;
    let heads: Vec<HeadParams> = tasks
        .iter()
        .zip(&experts)
        .map(|(mdp, ex)| {
            let risk = FeatureRisk::for_repr(mdp, ex, &truth.repr).unwrap();
            fit_head(&risk, cfg.c_f, &DescentOptions::default()).unwrap().head
        })
        .collect();
    let d = task_avg_rep_difference(&truth.repr, &truth.repr, &heads, tasks, &experts[..2], &quick_descent()).unwrap();
    assert!(d.value.abs() <= 1e-3, "{}", d.value);
}

#[test]
fn zeta_oracles() {
    let expert = TabularPolicy::deterministic(&[0], 2).unwrap();
    let mdp = one_state(2);
    let c_f = 1.5;
    let phi = 0.6;
    let z = realizability_zeta(&constant_repr(phi), std::slice::from_ref(&mdp), std::slice::from_ref(&expert), c_f, &DescentOptions::default())
        .unwrap();
    // 1-D grid over the margin w0 - w1, which is at most sqrt(2) C_F
    let best_mass = (0..=10_000)
        .map(|i| {
            let margin = 2f64.sqrt() * c_f * (-1.0 + 2.0 * i as f64 / 10_000.0);
            1.0 / (1.0 + (-margin * phi).exp())
        })
        .fold(0.0, f64::max);
    assert!(close(z.value, 1.0 - best_mass, 1e-3), "{} vs {}", z.value, 1.0 - best_mass);

    let five = one_state(5);
    let expert5 = TabularPolicy::deterministic(&[3], 5).unwrap();
    let z = realizability_zeta(&constant_repr(0.0), std::slice::from_ref(&five), std::slice::from_ref(&expert5), 2.0, &DescentOptions::default())
        .unwrap();
    assert!(close(z.value, 0.8, 1e-12));

    let cfg = PlantedConfig::default();
    let (family, truth) = make_planted_family(&cfg, 2, 0).unwrap();
    let experts = family.experts().unwrap();
    let tasks: Vec<FiniteMdp> = family.source_tasks.iter().chain([&family.target_task]).cloned().collect();
    let z = realizability_zeta(&truth.repr, &tasks, &experts, cfg.c_f, &quick_descent()).unwrap();
    assert!(z.value < 0.5);
    assert_eq!(z.per_task.len(), 3);
}
