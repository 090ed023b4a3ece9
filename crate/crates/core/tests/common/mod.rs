#![allow(dead_code)]

use mtil::mdp::{FiniteMdp, TabularPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random MDP with rewards in [0, 1] and strictly positive transitions.
pub fn random_mdp(rng: &mut ChaCha8Rng, s: usize, a: usize, gamma: f64) -> FiniteMdp {
    let reward: Vec<Vec<f64>> = (0..s).map(|_| (0..a).map(|_| rng.gen()).collect()).collect();
    let transition: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|_| {
            (0..a)
                .map(|_| {
                    let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 0.01).collect();
                    let z: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / z).collect()
                })
                .collect()
        })
        .collect();
    let rho: Vec<f64> = {
        let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 0.01).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    };
    let obs = (0..s).map(|i| (0..s).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    FiniteMdp::from_dense(&reward, &transition, rho, gamma, obs).unwrap()
}

pub fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize) -> TabularPolicy {
    TabularPolicy::new(
        (0..s)
            .map(|_| {
                let w: Vec<f64> = (0..a).map(|_| rng.gen::<f64>() + 0.01).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            })
            .collect(),
    )
    .unwrap()
}

pub fn sample_index(rng: &mut ChaCha8Rng, probs: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn step(rng: &mut ChaCha8Rng, mdp: &FiniteMdp, s: usize, a: usize) -> usize {
    sample_index(rng, mdp.transition_row(s, a).iter().copied())
}

pub fn act(rng: &mut ChaCha8Rng, policy: &TabularPolicy, s: usize) -> usize {
    sample_index(rng, policy.row(s).iter().copied().enumerate())
}

/// Value of every deterministic policy by brute force: the pointwise max over
/// all |A|^|S| of them is the optimal value.
pub fn brute_force_optimal_values(mdp: &FiniteMdp) -> Vec<f64> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let mut best = vec![f64::NEG_INFINITY; s];
    for code in 0..a.pow(s as u32) {
        let actions: Vec<usize> = (0..s).map(|i| code / a.pow(i as u32) % a).collect();
        let v = evaluate_by_iteration(mdp, &TabularPolicy::deterministic(&actions, a).unwrap());
        for (b, x) in best.iter_mut().zip(v) {
            *b = b.max(x);
        }
    }
    best
}

/// Policy evaluation by plain Bellman iteration, independent of the library
/// solvers.
pub fn evaluate_by_iteration(mdp: &FiniteMdp, policy: &TabularPolicy) -> Vec<f64> {
    let (s, a, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let mut v = vec![0.0; s];
    let iters = ((1e-14f64).ln() / g.ln()).ceil() as usize + 10;
    for _ in 0..iters {
        v = (0..s)
            .map(|x| {
                (0..a)
                    .map(|u| {
                        policy.prob(x, u)
                            * (mdp.reward(x, u)
                                + g * mdp.transition_row(x, u).iter().map(|&(y, p)| p * v[y]).sum::<f64>())
                    })
                    .sum()
            })
            .collect();
    }
    v
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
