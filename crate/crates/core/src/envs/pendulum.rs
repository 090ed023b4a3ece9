use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, TransitionRow};

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
pub const NUM_ACTIONS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub max_torque: f64,
    pub angle_bins: usize,
    pub velocity_bins: usize,
}

/// `{0, +-2^-3, ..., +-2^1}` rescaled so the extremes are `+-max_torque`,
/// in increasing order.
pub fn pendulum_torques(max_torque: f64) -> [f64; NUM_ACTIONS] {
    let scale = max_torque / 2.0;
    let mut out = [0.0; NUM_ACTIONS];
    for k in 0..5 {
        let mag = 2f64.powi(1 - k as i32) * scale;
        out[k] = -mag;
        out[NUM_ACTIONS - 1 - k] = mag;
    }
    out
}

/// Uniform grid over `(theta, theta_dot)`. Angles `-pi + i * 2pi / n` wrap;
/// velocities are `(j - n/2) * 8 / (n/2)` so that zero is always a grid point.
#[derive(Debug, Clone, Copy)]
pub struct PendulumGrid {
    pub angle_bins: usize,
    pub velocity_bins: usize,
}

impl PendulumGrid {
    fn angle_step(&self) -> f64 {
        2.0 * PI / self.angle_bins as f64
    }

    fn velocity_step(&self) -> f64 {
        MAX_SPEED / (self.velocity_bins / 2) as f64
    }

    pub fn num_states(&self) -> usize {
        self.angle_bins * self.velocity_bins
    }

    pub fn state(&self, angle_idx: usize, vel_idx: usize) -> usize {
        angle_idx * self.velocity_bins + vel_idx
    }

    pub fn coords(&self, s: usize) -> (f64, f64) {
        let (i, j) = (s / self.velocity_bins, s % self.velocity_bins);
        (
            -PI + i as f64 * self.angle_step(),
            (j as f64 - (self.velocity_bins / 2) as f64) * self.velocity_step(),
        )
    }

    /// Nearest grid cell.
    pub fn snap(&self, theta: f64, theta_dot: f64) -> usize {
        let n = self.angle_bins as i64;
        let i = (((theta + PI) / self.angle_step()).round() as i64).rem_euclid(n) as usize;
        let c = (self.velocity_bins / 2) as f64;
        let j = (theta_dot / self.velocity_step() + c)
            .round()
            .clamp(0.0, (self.velocity_bins - 1) as f64) as usize;
        self.state(i, j)
    }

    pub fn upright(&self) -> usize {
        self.snap(0.0, 0.0)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// One step of the torque-limited pendulum (theta = 0 is upright).
fn step(theta: f64, theta_dot: f64, torque: f64) -> (f64, f64) {
    let acc = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * torque;
    let new_dot = (theta_dot + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
    (wrap_angle(theta + new_dot * DT), new_dot)
}

/// State-discretized swing-up pendulum. Transitions are deterministic
/// (integrated state snapped to the nearest cell); the conventional
/// quadratic cost is mapped affinely onto a reward in `[0, 1]`; episodes
/// start uniformly over cells with `|theta_dot| <= 1`. Observations are
/// `(cos theta, sin theta, theta_dot / 8)`.
pub fn make_discrete_pendulum(params: &PendulumParams, gamma: f64) -> Result<FiniteMdp> {
    let PendulumParams {
        max_torque,
        angle_bins,
        velocity_bins,
    } = *params;
    if angle_bins < 8 || velocity_bins < 8 {
        return Err(Error::invalid("pendulum grids need at least 8 bins per axis"));
    }
    if angle_bins % 2 != 0 {
        return Err(Error::invalid("angle bins must be even so the upright angle is a grid point"));
    }
    if !(max_torque > 0.0) || !max_torque.is_finite() {
        return Err(Error::invalid(format!("max torque must be positive, got {max_torque}")));
    }
    let grid = PendulumGrid {
        angle_bins,
        velocity_bins,
    };
    let torques = pendulum_torques(max_torque);
    let max_cost = PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * max_torque * max_torque;
    let n = grid.num_states();
    let mut reward = Vec::with_capacity(n * NUM_ACTIONS);
    let mut rows: Vec<TransitionRow> = Vec::with_capacity(n * NUM_ACTIONS);
    let mut observations = Vec::with_capacity(n);
    let mut initial = vec![0.0; n];
    for s in 0..n {
        let (theta, theta_dot) = grid.coords(s);
        observations.push(vec![theta.cos(), theta.sin(), theta_dot / MAX_SPEED]);
        if theta_dot.abs() <= 1.0 {
            initial[s] = 1.0;
        }
        for &u in &torques {
            let cost = theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * u * u;
            reward.push((1.0 - cost / max_cost).clamp(0.0, 1.0));
            let (nt, nd) = step(theta, theta_dot, u);
            rows.push(vec![(grid.snap(nt, nd), 1.0)]);
        }
    }
    let total: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|p| *p /= total);
    FiniteMdp::from_sparse(NUM_ACTIONS, reward, rows, initial, gamma, observations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torque_set_is_symmetric() {
        let t = pendulum_torques(2.0);
        assert_eq!(t.len(), 11);
        assert_eq!(t[5], 0.0);
        assert_eq!(t[10], 2.0);
        assert_eq!(t[6], 0.125);
        for k in 0..11 {
            assert_eq!(t[k], -t[10 - k]);
        }
        assert_eq!(pendulum_torques(3.0)[0], -3.0);
    }

    #[test]
    fn upright_rest_is_an_equilibrium() {
        let params = PendulumParams {
            max_torque: 2.0,
            angle_bins: 16,
            velocity_bins: 16,
        };
        let mdp = make_discrete_pendulum(&params, 0.99).unwrap();
        let grid = PendulumGrid {
            angle_bins: 16,
            velocity_bins: 16,
        };
        let up = grid.upright();
        assert_eq!(grid.coords(up), (0.0, 0.0));
        assert_eq!(mdp.transition_row(up, 5), &[(up, 1.0)]);
        assert_eq!(mdp.reward(up, 5), 1.0);
        assert_eq!(mdp.observation(up), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn validation() {
        let ok = PendulumParams {
            max_torque: 2.0,
            angle_bins: 8,
            velocity_bins: 8,
        };
        assert!(make_discrete_pendulum(&ok, 0.9).is_ok());
        assert!(make_discrete_pendulum(&PendulumParams { angle_bins: 6, ..ok }, 0.9).is_err());
        assert!(make_discrete_pendulum(&PendulumParams { angle_bins: 9, ..ok }, 0.9).is_err());
        assert!(make_discrete_pendulum(&PendulumParams { max_torque: 0.0, ..ok }, 0.9).is_err());
    }
}
