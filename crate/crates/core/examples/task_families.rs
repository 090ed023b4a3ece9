//! Samples one family of each kind and prints what varies across tasks.

use mtil::envs::{sample_task_family, FamilyRanges, FrozenLakeRanges, PendulumRanges, PlantedConfig};

fn main() -> mtil::Result<()> {
    let families = [
        FamilyRanges::FrozenLake(FrozenLakeRanges::default()),
        FamilyRanges::Pendulum(PendulumRanges {
            angle_bins: 16,
            velocity_bins: 16,
            ..PendulumRanges::default()
        }),
        FamilyRanges::Planted(PlantedConfig::default()),
    ];
    for ranges in &families {
        let family = sample_task_family(ranges, 3, 0.99, 11)?;
        family.check_shared_spaces()?;
        let (s, a, d) = family.target_task.space_signature();
        println!("{}: {s} states, {a} actions, obs dim {d}", family.kind.name());
        for (i, p) in family.params_per_task.iter().enumerate() {
            let role = if i < family.num_sources() { "source" } else { "target" };
            println!("  {role} {p:?}");
        }
        if let Some(truth) = &family.ground_truth {
            println!("  planted heads: {} (norm bound {})", truth.heads.len(), truth.c_f);
        }
    }
    Ok(())
}
