//! Draws expert demonstrations two ways: i.i.d. from the exact occupancy and
//! from timed-out rollouts, then compares their state histograms.

use mtil::envs::{make_frozen_lake, Cell, FrozenLakeParams};
use mtil::mdp::{sample_demos_exact, sample_demos_rollout, stationary_distribution, value_iteration, DemoSet};

fn histogram(demos: &DemoSet, num_states: usize) -> Vec<f64> {
    let mut h = vec![0.0; num_states];
    for &(s, _) in &demos.pairs {
        h[s] += 1.0 / demos.len() as f64;
    }
    h
}

fn main() -> mtil::Result<()> {
    let mdp = make_frozen_lake(
        &FrozenLakeParams {
            start: Cell::new(1, 2),
            goal: Cell::new(6, 5),
            slip: 0.2,
        },
        0.99,
    )?;
    let (_, expert) = value_iteration(&mdp, 1e-10)?;
    let nu = stationary_distribution(&mdp, &expert)?.state_dist;

    let exact = sample_demos_exact(&mdp, &expert, "lake", 20_000, 7)?;
    let rollout = sample_demos_rollout(&mdp, &expert, "lake", 20_000, 100, 7)?;
    let tv = |h: &[f64]| 0.5 * h.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
    println!("TV(exact demos, nu)   = {:.4}", tv(&histogram(&exact, mdp.num_states())));
    println!("TV(rollout demos, nu) = {:.4}  (undiscounted, truncated)", tv(&histogram(&rollout, mdp.num_states())));

    let text = exact.prefix(5)?.to_text();
    print!("first pairs as text:\n{text}");
    assert_eq!(DemoSet::from_text(&text)?, exact.prefix(5)?);
    Ok(())
}
