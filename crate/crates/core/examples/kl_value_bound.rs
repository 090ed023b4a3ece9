//! Compares the exact value gap of random softmax policies with the bound
//! driven by their expected KL to the expert.

use mtil::envs::{make_frozen_lake, Cell, FrozenLakeParams};
use mtil::mdp::value_iteration;
use mtil::policy::{PolicyParams, ReprArch};
use mtil::rng::{stream_rng, Stream};
use mtil::theory::verify_theorem5;

fn main() -> mtil::Result<()> {
    let mdp = make_frozen_lake(
        &FrozenLakeParams {
            start: Cell::new(0, 3),
            goal: Cell::new(6, 1),
            slip: 0.05,
        },
        0.99,
    )?;
    let (_, expert) = value_iteration(&mdp, 1e-10)?;
    let arch = ReprArch {
        obs_dim: mdp.obs_dim(),
        hidden: vec![32],
        out_dim: 16,
        c_phi: 10.0,
    };
    println!("{:>10} {:>12} {:>14}", "E KL", "value gap", "bound");
    for i in 0..8 {
        let policy = PolicyParams::init(&arch, mdp.num_actions(), 10.0, &mut stream_rng(i, Stream::Init, &[]))?;
        let check = verify_theorem5(&mdp, &expert, &policy)?;
        println!("{:>10.4} {:>12.4} {:>14.1} {}", check.kl, check.lhs, check.rhs, if check.holds { "ok" } else { "VIOLATED" });
    }
    Ok(())
}
