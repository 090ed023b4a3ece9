//! Solves one frozen-lake task exactly: optimal values, the expert policy and
//! its discounted occupancy.

use mtil::envs::frozen_lake::TERMINAL;
use mtil::envs::{make_frozen_lake, Cell, FrozenLakeParams};
use mtil::mdp::{bellman_residual, policy_evaluation, stationary_distribution, value_iteration};

fn main() -> mtil::Result<()> {
    let params = FrozenLakeParams {
        start: Cell::new(0, 0),
        goal: Cell::new(7, 7),
        slip: 0.1,
    };
    let mdp = make_frozen_lake(&params, 0.99)?;
    let (v_star, expert) = value_iteration(&mdp, 1e-10)?;
    let v = policy_evaluation(&mdp, &expert)?;
    println!("states {} actions {}", mdp.num_states(), mdp.num_actions());
    println!("v*(start) = {:.6}", v_star[params.start.index()]);
    println!("bellman residual of the expert: {:.2e}", bellman_residual(&mdp, &expert, &v));

    let occ = stationary_distribution(&mdp, &expert)?;
    let mut top: Vec<(usize, f64)> = occ.state_dist.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("terminal state mass: {:.4}", occ.state_dist[TERMINAL]);
    println!("most visited cells under the expert:");
    for (s, p) in top.iter().filter(|(s, _)| *s != TERMINAL).take(5) {
        let c = Cell::from_index(*s);
        println!("  ({}, {})  nu = {p:.4}  action {}", c.row, c.col, expert.argmax(*s));
    }
    Ok(())
}
