mod common;

use mtil::policy::{
    forward, log_softmax_loss, loss_and_grads, project_constraints, softmax, HeadParams, PolicyParams, ReprArch,
    TensorFile,
};
use proptest::prelude::*;
use rand::Rng;

fn l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn random_policy(seed: u64, obs_dim: usize, hidden: Vec<usize>, out_dim: usize, k: usize) -> PolicyParams {
    let arch = ReprArch {
        obs_dim,
        hidden,
        out_dim,
        c_phi: 3.0,
    };
    let mut policy = PolicyParams::init(&arch, k, 4.0, &mut common::rng(seed)).unwrap();
    // spread the head so logits are not all near zero
    policy.head.weight.iter_mut().for_each(|w| *w *= 5.0);
    project_constraints(policy)
}

/// Relative error. Partials below 1e-4 are compared absolutely, since central
/// differences at h=1e-5 cannot resolve them to five digits.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn analytic_partials_match_central_differences(
        seed in 0u64..100_000,
        obs_dim in 1usize..4,
        width in 1usize..5,
        depth in 0usize..3,
        out_dim in 1usize..4,
        k in 2usize..5,
        batch in 1usize..5,
    ) {
        let policy = random_policy(seed, obs_dim, vec![width; depth], out_dim, k);
        let mut r = common::rng(seed ^ 0xabc);
        let obs: Vec<Vec<f64>> = (0..batch).map(|_| (0..obs_dim).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let pairs: Vec<(&[f64], usize)> = obs.iter().map(|o| (o.as_slice(), r.gen_range(0..k))).collect();
        let (_, grads) = loss_and_grads(&policy, &pairs).unwrap();
        let loss = |p: &PolicyParams| loss_and_grads(p, &pairs).unwrap().0;
        let h = 1e-5;
        for i in 0..policy.head.weight.len() {
            let (mut a, mut b) = (policy.clone(), policy.clone());
            a.head.weight[i] += h;
            b.head.weight[i] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            prop_assert!(rel_err(grads.head[i], fd) <= 1e-5, "head {i}: {} vs {fd}", grads.head[i]);
        }
        for l in 0..policy.repr.layers.len() {
            for i in 0..policy.repr.layers[l].weight.len() {
                let (mut a, mut b) = (policy.clone(), policy.clone());
                a.repr.layers[l].weight[i] += h;
                b.repr.layers[l].weight[i] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                prop_assert!(rel_err(grads.repr[l].weight[i], fd) <= 1e-5);
            }
            for i in 0..policy.repr.layers[l].bias.len() {
                let (mut a, mut b) = (policy.clone(), policy.clone());
                a.repr.layers[l].bias[i] += h;
                b.repr.layers[l].bias[i] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                prop_assert!(rel_err(grads.repr[l].bias[i], fd) <= 1e-5);
            }
        }
    }

    #[test]
    fn loss_is_lipschitz_in_the_logits(
        x in prop::collection::vec(-20.0f64..20.0, 2..12),
        shift in prop::collection::vec(-5.0f64..5.0, 12),
        a in 0usize..12,
    ) {
        let a = a % x.len();
        let y: Vec<f64> = x.iter().zip(&shift).map(|(u, d)| u + d).collect();
        let gap = (log_softmax_loss(&x, a) - log_softmax_loss(&y, a)).abs();
        prop_assert!(gap <= 2f64.sqrt() * l2(&x, &y) + 1e-9);
    }

    #[test]
    fn projected_policies_have_bounded_loss(seed in 0u64..100_000, k in 2usize..8) {
        let policy = random_policy(seed, 3, vec![4], 3, k);
        let bound = (k as f64).ln() + 2.0 * policy.repr.c_phi * policy.head.c_f;
        let mut r = common::rng(seed);
        for _ in 0..10 {
            let obs: Vec<f64> = (0..3).map(|_| r.gen_range(-10.0..10.0)).collect();
            let (logits, probs) = forward(&policy, &obs).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for a in 0..k {
                let l = log_softmax_loss(&logits, a);
                prop_assert!((0.0..=bound).contains(&l));
            }
        }
    }

    #[test]
    fn head_is_lipschitz_in_the_features(
        seed in 0u64..100_000,
        k in 2usize..6,
        d in 1usize..6,
        c_f in 0.1f64..20.0,
    ) {
        let mut r = common::rng(seed);
        let mut head = HeadParams::zeros(k, d, c_f);
        head.weight = (0..k * d).map(|_| r.gen_range(-10.0..10.0)).collect();
        head.project();
        prop_assert!(head.frobenius_norm() <= c_f + 1e-9);
        let p1: Vec<f64> = (0..d).map(|_| r.gen_range(-3.0..3.0)).collect();
        let p2: Vec<f64> = (0..d).map(|_| r.gen_range(-3.0..3.0)).collect();
        let a = r.gen_range(0..k);
        let gap = (log_softmax_loss(&head.logits(&p1), a) - log_softmax_loss(&head.logits(&p2), a)).abs();
        prop_assert!(gap <= 2.0 * c_f * l2(&p1, &p2) + 1e-9);
    }
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let p = softmax(&[3.0; 5]);
    assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
    assert!((log_softmax_loss(&[0.0; 5], 2) - 5f64.ln()).abs() < 1e-15);
}

#[test]
fn policies_round_trip_through_text() {
    let policy = random_policy(4, 3, vec![5, 2], 3, 4);
    let text = policy.to_tensor_file().to_text();
    let back = PolicyParams::from_tensor_file(&TensorFile::from_text(&text).unwrap()).unwrap();
    assert_eq!(back, policy);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.txt");
    policy.to_tensor_file().write(&path).unwrap();
    assert_eq!(PolicyParams::from_tensor_file(&TensorFile::read(&path).unwrap()).unwrap(), policy);
}

#[test]
fn repeated_pairs_give_the_single_pair_gradient() {
    let policy = random_policy(9, 2, vec![3], 2, 3);
    let obs: &[f64] = &[0.3, -1.2];
    let (l1, g1) = loss_and_grads(&policy, &[(obs, 1)]).unwrap();
    let (l4, g4) = loss_and_grads(&policy, &[(obs, 1); 4]).unwrap();
    assert!((l1 - l4).abs() < 1e-14);
    for (a, b) in g1.head.iter().zip(&g4.head) {
        assert!((a - b).abs() < 1e-14);
    }
    for (a, b) in g1.repr.iter().zip(&g4.repr) {
        for (x, y) in a.weight.iter().zip(&b.weight).chain(a.bias.iter().zip(&b.bias)) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
