use nalgebra::{DMatrix, DVector};

use super::{argmax, FiniteMdp, TabularPolicy, TransitionRow};
use crate::error::{Error, Result};

/// Above this many states the discounted linear systems are solved by
/// sparse fixed-point sweeps instead of a dense LU factorization.
const DENSE_STATE_LIMIT: usize = 1024;
const SWEEP_TOL: f64 = 1e-12;
const VALUE_ITERATION_CAP: usize = 2_000_000;

/// Discounted state distribution `nu` and state-action distribution `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDist {
    pub state_dist: Vec<f64>,
    pub state_action_dist: Vec<Vec<f64>>,
}

impl StationaryDist {
    pub fn num_states(&self) -> usize {
        self.state_dist.len()
    }

    pub fn mu(&self, s: usize, a: usize) -> f64 {
        self.state_action_dist[s][a]
    }
}

/// Policy-averaged reward `r_pi` and sparse transition rows of `P_pi`.
fn induced_chain(mdp: &FiniteMdp, policy: &TabularPolicy) -> (Vec<f64>, Vec<TransitionRow>) {
    let n = mdp.num_states();
    let mut r = vec![0.0; n];
    let mut rows = Vec::with_capacity(n);
    let mut dense = vec![0.0; n];
    let mut touched = Vec::new();
    for (s, r_s) in r.iter_mut().enumerate() {
        for (a, &p) in policy.row(s).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            *r_s += p * mdp.reward(s, a);
            for &(t, q) in mdp.transition_row(s, a) {
                if dense[t] == 0.0 {
                    touched.push(t);
                }
                dense[t] += p * q;
            }
        }
        touched.sort_unstable();
        rows.push(touched.iter().map(|&t| (t, dense[t])).collect());
        for &t in &touched {
            dense[t] = 0.0;
        }
        touched.clear();
    }
    (r, rows)
}

/// Solves `x = b + gamma * P x` (or with `P^T` when `transpose`).
fn solve_discounted(rows: &[TransitionRow], b: &[f64], gamma: f64, transpose: bool) -> Result<Vec<f64>> {
    let n = b.len();
    if n <= DENSE_STATE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                if transpose {
                    m[(t, s)] -= gamma * p;
                } else {
                    m[(s, t)] -= gamma * p;
                }
            }
        }
        let rhs = DVector::from_column_slice(b);
        let x = m.lu().solve(&rhs).ok_or(Error::NonConvergence {
            solver: "dense LU",
            iterations: 0,
            residual: f64::INFINITY,
        })?;
        return Ok(x.iter().copied().collect());
    }
    // Contraction with modulus gamma; each sweep shrinks the error by gamma.
    let scale = b.iter().fold(1.0_f64, |m, x| m.max(x.abs())) / (1.0 - gamma);
    let mut x = b.to_vec();
    let mut next = vec![0.0; n];
    let max_iter = ((SWEEP_TOL / scale).ln() / gamma.max(1e-300).ln()).ceil().max(1.0) as usize + 10;
    for it in 0..max_iter.min(VALUE_ITERATION_CAP) {
        next.copy_from_slice(b);
        if transpose {
            for (s, row) in rows.iter().enumerate() {
                for &(t, p) in row {
                    next[t] += gamma * p * x[s];
                }
            }
        } else {
            for (s, row) in rows.iter().enumerate() {
                next[s] += gamma * row.iter().map(|&(t, p)| p * x[t]).sum::<f64>();
            }
        }
        let delta = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if delta <= SWEEP_TOL * (1.0 - gamma) || it + 1 == max_iter {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        solver: "fixed-point sweep",
        iterations: VALUE_ITERATION_CAP,
        residual: f64::NAN,
    })
}

/// Exact value function `v = (I - gamma P_pi)^{-1} r_pi`.
pub fn policy_evaluation(mdp: &FiniteMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    policy.check_against(mdp)?;
    let (r, rows) = induced_chain(mdp, policy);
    solve_discounted(&rows, &r, mdp.gamma(), false)
}

/// `|| v - (r_pi + gamma P_pi v) ||_inf`.
pub fn bellman_residual(mdp: &FiniteMdp, policy: &TabularPolicy, v: &[f64]) -> f64 {
    let (r, rows) = induced_chain(mdp, policy);
    rows.iter()
        .enumerate()
        .map(|(s, row)| {
            let backup = r[s] + mdp.gamma() * row.iter().map(|&(t, p)| p * v[t]).sum::<f64>();
            (v[s] - backup).abs()
        })
        .fold(0.0, f64::max)
}

pub fn q_values(mdp: &FiniteMdp, v: &[f64], s: usize) -> Vec<f64> {
    (0..mdp.num_actions())
        .map(|a| {
            mdp.reward(s, a)
                + mdp.gamma()
                    * mdp
                        .transition_row(s, a)
                        .iter()
                        .map(|&(t, p)| p * v[t])
                        .sum::<f64>()
        })
        .collect()
}

/// Deterministic greedy policy w.r.t. `v`. Actions whose Q-value is within
/// round-off of the maximum count as tied; the lowest index wins.
pub fn greedy_policy(mdp: &FiniteMdp, v: &[f64]) -> TabularPolicy {
    let actions: Vec<usize> = (0..mdp.num_states())
        .map(|s| {
            let q = q_values(mdp, v, s);
            let best = q[argmax(&q)];
            let slack = 1e-12 * best.abs().max(1.0);
            q.iter().position(|&x| x >= best - slack).unwrap_or(0)
        })
        .collect();
    TabularPolicy::deterministic(&actions, mdp.num_actions()).expect("greedy actions are in range")
}

/// Optimal values and a deterministic optimal policy. Iterates the Bellman
/// optimality operator until successive iterates differ by at most `tol`
/// in sup-norm, which bounds the returned iterate's Bellman residual by
/// `gamma * tol`.
pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<(Vec<f64>, TabularPolicy)> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("value iteration tolerance must be positive, got {tol}")));
    }
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..VALUE_ITERATION_CAP {
        delta = 0.0;
        for (s, slot) in next.iter_mut().enumerate() {
            let best = q_values(mdp, &v, s).into_iter().fold(f64::NEG_INFINITY, f64::max);
            delta = f64::max(delta, (best - v[s]).abs());
            *slot = best;
        }
        std::mem::swap(&mut v, &mut next);
        if delta <= tol {
            let policy = greedy_policy(mdp, &v);
            return Ok((v, policy));
        }
    }
    Err(Error::NonConvergence {
        solver: "value iteration",
        iterations: VALUE_ITERATION_CAP,
        residual: delta,
    })
}

/// Discounted occupancy: solves `nu = (1 - gamma) rho + gamma P_pi^T nu`
/// and sets `mu(s, a) = nu(s) pi(a | s)`.
pub fn stationary_distribution(mdp: &FiniteMdp, policy: &TabularPolicy) -> Result<StationaryDist> {
    policy.check_against(mdp)?;
    let (_, rows) = induced_chain(mdp, policy);
    let gamma = mdp.gamma();
    let b: Vec<f64> = mdp.initial_dist().iter().map(|p| (1.0 - gamma) * p).collect();
    let mut nu = solve_discounted(&rows, &b, gamma, true)?;
    // Round-off can leave entries like -1e-18 on unreachable states.
    for x in &mut nu {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let mu = nu
        .iter()
        .enumerate()
        .map(|(s, &w)| policy.row(s).iter().map(|p| w * p).collect())
        .collect();
    Ok(StationaryDist {
        state_dist: nu,
        state_action_dist: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(rewards: Vec<f64>, gamma: f64) -> FiniteMdp {
        let a = rewards.len();
        FiniteMdp::from_dense(
            &[rewards],
            &[vec![vec![1.0]; a]],
            vec![1.0],
            gamma,
            vec![vec![1.0]],
        )
        .unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let mdp = single_state(vec![1.0], 0.9);
        let v = policy_evaluation(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_zero_value() {
        let mdp = single_state(vec![0.0, 0.0], 0.99);
        let v = policy_evaluation(&mdp, &TabularPolicy::uniform(1, 2)).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn dominant_action_is_chosen() {
        let mdp = single_state(vec![1.0, 0.0], 0.5);
        let (v, pi) = value_iteration(&mdp, 1e-12).unwrap();
        assert_eq!(pi.argmax(0), 0);
        assert!((v[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let mdp = single_state(vec![0.5, 0.5, 0.5], 0.9);
        let (_, pi) = value_iteration(&mdp, 1e-12).unwrap();
        assert_eq!(pi.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let mdp = single_state(vec![1.0], 0.5);
        assert!(value_iteration(&mdp, 0.0).is_err());
    }

    #[test]
    fn absorbing_chain_occupancy() {
        let mdp = FiniteMdp::from_dense(
            &[vec![0.0], vec![0.0]],
            &[vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![1.0, 0.0],
            0.5,
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        let d = stationary_distribution(&mdp, &TabularPolicy::uniform(2, 1)).unwrap();
        assert!((d.state_dist[0] - 0.5).abs() < 1e-12);
        assert!((d.state_dist[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mdp = single_state(vec![1.0, 0.0], 0.5);
        assert!(policy_evaluation(&mdp, &TabularPolicy::uniform(2, 2)).is_err());
        assert!(policy_evaluation(&mdp, &TabularPolicy::uniform(1, 3)).is_err());
    }

    #[test]
    fn sweep_solver_matches_dense_solver() {
        // Ring of 1500 states forces the sparse path; compare one row with
        // the closed form for a deterministic cycle.
        let n = 1500;
        let rows: Vec<TransitionRow> = (0..n).map(|s| vec![((s + 1) % n, 1.0)]).collect();
        let b: Vec<f64> = (0..n).map(|s| if s == 0 { 1.0 } else { 0.0 }).collect();
        let gamma = 0.99_f64;
        let x = solve_discounted(&rows, &b, gamma, false).unwrap();
        let expected = 1.0 / (1.0 - gamma.powi(n as i32));
        assert!((x[0] - expected).abs() < 1e-9);
        let y = solve_discounted(&rows, &b, gamma, true).unwrap();
        assert!((y[1] - gamma * expected).abs() < 1e-9);
    }
}
