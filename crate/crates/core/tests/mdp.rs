mod common;

use common::*;
use mtil::envs::{make_frozen_lake, Cell, FrozenLakeParams};
use mtil::mdp::{
    bellman_residual, greedy_policy, policy_evaluation, q_values, sample_demos_exact, sample_demos_rollout,
    stationary_distribution, value_iteration, FiniteMdp, TabularPolicy,
};
use proptest::prelude::*;
use rand::Rng;

fn lake(start: (usize, usize), goal: (usize, usize), slip: f64) -> FiniteMdp {
    make_frozen_lake(
        &FrozenLakeParams {
            start: Cell::new(start.0, start.1),
            goal: Cell::new(goal.0, goal.1),
            slip,
        },
        0.99,
    )
    .unwrap()
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    let mut r = rng(1);
    for _ in 0..50 {
        let mdp = random_mdp(&mut r, 4, 3, 0.9);
        let (v, pi) = value_iteration(&mdp, 1e-12).unwrap();
        let oracle = brute_force_optimal_values(&mdp);
        for (x, y) in v.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
        assert!(pi.is_deterministic());
        let v_pi = policy_evaluation(&mdp, &pi).unwrap();
        for (x, y) in v_pi.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn policy_evaluation_matches_monte_carlo() {
    let mut r = rng(2);
    let mdp = random_mdp(&mut r, 4, 3, 0.9);
    let pi = random_policy(&mut r, 4, 3);
    let v = policy_evaluation(&mdp, &pi).unwrap();
    let episodes = 100_000;
    let horizon = 200; // 0.9^200 is negligible
    let mut total = 0.0;
    let start = 2;
    for _ in 0..episodes {
        let (mut s, mut disc, mut ret) = (start, 1.0, 0.0);
        for _ in 0..horizon {
            let a = act(&mut r, &pi, s);
            ret += disc * mdp.reward(s, a);
            disc *= mdp.gamma();
            s = step(&mut r, &mdp, s, a);
        }
        total += ret;
    }
    assert!((total / episodes as f64 - v[start]).abs() <= 0.01);
}

#[test]
fn policy_evaluation_matches_bellman_iteration() {
    let mut r = rng(3);
    for _ in 0..20 {
        let mdp = random_mdp(&mut r, 6, 3, 0.95);
        let pi = random_policy(&mut r, 6, 3);
        let v = policy_evaluation(&mdp, &pi).unwrap();
        for (x, y) in v.iter().zip(evaluate_by_iteration(&mdp, &pi)) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(bellman_residual(&mdp, &pi, &v) < 1e-10);
    }
}

#[test]
fn greedy_policy_of_optimal_values_is_optimal() {
    let mut r = rng(4);
    let mdp = random_mdp(&mut r, 5, 4, 0.9);
    let (v, pi) = value_iteration(&mdp, 1e-12).unwrap();
    assert_eq!(greedy_policy(&mdp, &v), pi);
    for s in 0..5 {
        let q = q_values(&mdp, &v, s);
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((best - v[s]).abs() < 1e-8);
    }
}

#[test]
fn occupancy_matches_geometric_rollouts() {
    let mdp = lake((0, 0), (7, 7), 0.1);
    let (_, expert) = value_iteration(&mdp, 1e-10).unwrap();
    let occ = stationary_distribution(&mdp, &expert).unwrap();
    let mut r = rng(5);
    let n = 100_000;
    let mut counts = vec![0.0; mdp.num_states()];
    let rho: Vec<(usize, f64)> = mdp.initial_dist().iter().copied().enumerate().collect();
    // the state at a Geometric(1 - gamma) stopping time is distributed as nu
    for _ in 0..n {
        let mut s = sample_index(&mut r, rho.iter().copied());
        while r.gen::<f64>() < mdp.gamma() {
            let a = act(&mut r, &expert, s);
            s = step(&mut r, &mdp, s, a);
        }
        counts[s] += 1.0 / n as f64;
    }
    assert!(tv(&counts, &occ.state_dist) <= 0.02);
}

#[test]
fn occupancy_solves_the_flow_equation() {
    let mut r = rng(6);
    let mdp = random_mdp(&mut r, 7, 3, 0.8);
    let pi = random_policy(&mut r, 7, 3);
    let occ = stationary_distribution(&mdp, &pi).unwrap();
    for t in 0..7 {
        let inflow: f64 = (0..7)
            .map(|s| (0..3).map(|a| occ.mu(s, a) * mdp.transition_prob(s, a, t)).sum::<f64>())
            .sum();
        let rhs = (1.0 - mdp.gamma()) * mdp.initial_dist()[t] + mdp.gamma() * inflow;
        assert!((occ.state_dist[t] - rhs).abs() < 1e-12);
    }
    let total: f64 = occ.state_action_dist.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn exact_demos_match_occupancy() {
    let mdp = lake((2, 1), (5, 6), 0.15);
    let (_, expert) = value_iteration(&mdp, 1e-10).unwrap();
    let occ = stationary_distribution(&mdp, &expert).unwrap();
    let demos = sample_demos_exact(&mdp, &expert, "lake", 100_000, 9).unwrap();
    let k = mdp.num_actions();
    let mut freq = vec![0.0; mdp.num_states() * k];
    for &(s, a) in &demos.pairs {
        freq[s * k + a] += 1e-5;
    }
    let mu: Vec<f64> = occ.state_action_dist.iter().flatten().copied().collect();
    assert!(tv(&freq, &mu) <= 0.02);
}

#[test]
fn rollout_demos_match_truncated_occupancy() {
    let mdp = lake((0, 4), (6, 2), 0.2);
    let (_, expert) = value_iteration(&mdp, 1e-10).unwrap();
    let h = 100;
    let demos = sample_demos_rollout(&mdp, &expert, "lake", 100_000, h, 4).unwrap();
    let n = mdp.num_states();
    // forward recursion of the greedy expert chain over one episode
    let mut d = mdp.initial_dist().to_vec();
    let mut visits = vec![0.0; n];
    for _ in 0..h {
        let mut next = vec![0.0; n];
        for s in 0..n {
            visits[s] += d[s] / h as f64;
            for &(t, p) in mdp.transition_row(s, expert.argmax(s)) {
                next[t] += d[s] * p;
            }
        }
        d = next;
    }
    let mut freq = vec![0.0; n];
    for &(s, a) in &demos.pairs {
        assert_eq!(a, expert.argmax(s));
        freq[s] += 1e-5;
    }
    assert!(tv(&freq, &visits) <= 0.05);
}

#[test]
fn sparse_sweeps_used_for_large_chains() {
    // a ring of 1500 states exceeds the dense limit
    let n = 1500;
    let reward: Vec<f64> = (0..n).map(|s| if s == 0 { 1.0 } else { 0.0 }).collect();
    let rows = (0..n).map(|s| vec![((s + 1) % n, 1.0)]).collect();
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let obs = (0..n).map(|s| vec![s as f64]).collect();
    let mdp = FiniteMdp::from_sparse(1, reward, rows, rho, 0.9, obs).unwrap();
    let pi = TabularPolicy::uniform(n, 1);
    let v = policy_evaluation(&mdp, &pi).unwrap();
    let g: f64 = 0.9;
    let expected = 1.0 / (1.0 - g.powi(n as i32));
    assert!((v[0] - expected).abs() < 1e-9);
    let occ = stationary_distribution(&mdp, &pi).unwrap();
    assert!((occ.state_dist[3] - (1.0 - g) * g.powi(3) / (1.0 - g.powi(n as i32))).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn occupancy_is_a_distribution(seed in 0u64..10_000, s in 2usize..8, a in 1usize..4, gamma in 0.0f64..0.99) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, s, a, gamma);
        let pi = random_policy(&mut r, s, a);
        let occ = stationary_distribution(&mdp, &pi).unwrap();
        let total: f64 = occ.state_dist.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(occ.state_dist.iter().all(|&x| x >= -1e-12));
        for st in 0..s {
            let row: f64 = occ.state_action_dist[st].iter().sum();
            prop_assert!((row - occ.state_dist[st]).abs() < 1e-12);
        }
    }

    #[test]
    fn values_are_bounded_by_the_horizon(seed in 0u64..10_000, gamma in 0.0f64..0.99) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, 5, 3, gamma);
        let (v, _) = value_iteration(&mdp, 1e-10).unwrap();
        prop_assert!(v.iter().all(|&x| (-1e-9..=1.0 / (1.0 - gamma) + 1e-6).contains(&x)));
    }
}
