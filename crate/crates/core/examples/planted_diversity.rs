//! On a planted family with known representation and heads, measures the
//! representation differences and diversity of a perturbed representation,
//! and the realizability slack of the true one.

use mtil::envs::{sample_task_family, FamilyRanges, PlantedConfig};
use mtil::theory::{
    diversity_estimate, realizability_zeta, task_avg_rep_difference, worst_case_rep_difference, DescentOptions,
};

fn main() -> mtil::Result<()> {
    let cfg = PlantedConfig::default();
    let family = sample_task_family(&FamilyRanges::Planted(cfg.clone()), 3, 0.99, 1)?;
    let truth = family.ground_truth.clone().expect("planted families carry their truth");
    let experts = family.experts()?;
    let opts = DescentOptions::default();

    let mut perturbed = truth.repr.clone();
    for w in perturbed.layers[0].weight.iter_mut().step_by(3) {
        *w *= 0.5;
    }
    for (name, phi) in [("phi*", &truth.repr), ("perturbed", &perturbed)] {
        let d_bar = task_avg_rep_difference(
            phi,
            &truth.repr,
            truth.source_heads(),
            &family.source_tasks,
            &experts[..3],
            &opts,
        )?;
        let d_worst = worst_case_rep_difference(phi, &truth.repr, &family.target_task, &experts[3], cfg.c_f, &opts)?;
        println!(
            "{name:10} d_bar {:.3e}  d_worst {:.3e}  sigma {:?}",
            d_bar.value,
            d_worst.value,
            diversity_estimate(d_bar.value, d_worst.value)
        );
    }
    let tasks: Vec<_> = family.source_tasks.iter().chain([&family.target_task]).cloned().collect();
    let zeta = realizability_zeta(&truth.repr, &tasks, &experts, cfg.c_f, &opts)?;
    let per_task: Vec<String> = zeta.per_task.iter().map(|z| format!("{z:.1e}")).collect();
    println!("realizability slack of phi*: {:.3e} (per task {})", zeta.value, per_task.join(" "));
    Ok(())
}
