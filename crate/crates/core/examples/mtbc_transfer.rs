//! Pretrains a shared representation on several frozen-lake sources,
//! transfers it to a target with few demonstrations, and compares with BC.

use mtil::envs::{sample_task_family, FamilyRanges, FrozenLakeRanges};
use mtil::mdp::{sample_demos_exact, DemoSet};
use mtil::mtbc::{
    evaluate_policy, final_losses, tabularize, train_bc, train_multitask, transfer, ModelConfig, ReturnAnchors,
    TrainConfig,
};
use mtil::policy::PolicyParams;

fn main() -> mtil::Result<()> {
    let t = 8;
    let family = sample_task_family(&FamilyRanges::FrozenLake(FrozenLakeRanges::default()), t, 0.99, 3)?;
    let experts = family.experts()?;
    let target = &family.target_task;
    let obs = target.observations();
    let sources: Vec<DemoSet> = family
        .source_tasks
        .iter()
        .zip(&experts)
        .enumerate()
        .map(|(i, (mdp, ex))| sample_demos_exact(mdp, ex, &format!("source{i}"), 2000, i as u64))
        .collect::<mtil::Result<_>>()?;
    let target_demos = sample_demos_exact(target, &experts[t], "target", 500, 99)?;

    let model = ModelConfig::default();
    let pretrain = TrainConfig {
        epochs: 200,
        lr_head: 1e-2,
        ..TrainConfig::default()
    };
    let (mt, trace) = train_multitask(&sources, obs, target.num_actions(), &model, &pretrain)?;
    let losses: Vec<String> = final_losses(&trace).iter().map(|l| format!("{l:.2e}")).collect();
    println!("pretraining losses per source: {}", losses.join(" "));
    // with one-hot observations the representation only learns about states
    // that some source visits
    let seen: std::collections::HashSet<usize> = sources.iter().flat_map(|d| d.pairs.iter().map(|p| p.0)).collect();
    let covered = target_demos.pairs.iter().filter(|p| seen.contains(&p.0)).count();
    println!("target demos in source-visited states: {covered}/{}", target_demos.len());
    let (head, transfer_trace) = transfer(&mt.repr, &target_demos, obs, target.num_actions(), &model, &pretrain)?;
    println!("transfer loss {:.3e}", final_losses(&transfer_trace)[0]);
    let mtbc = PolicyParams::new(mt.repr, head)?;
    let (bc, _) = train_bc(&target_demos, obs, target.num_actions(), &model, &TrainConfig::default())?;

    let anchors = ReturnAnchors::new(target, &experts[t])?;
    for (name, policy) in [("MTBC", &mtbc), ("BC", &bc)] {
        let eval = evaluate_policy(target, &tabularize(policy, obs)?, &anchors)?;
        println!(
            "{name:5} normalized return {:.3}  value gap {:.3}",
            eval.normalized_return.unwrap_or(f64::NAN),
            eval.value_gap_inf
        );
    }
    Ok(())
}
