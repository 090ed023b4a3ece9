use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::grid::draw_demos;
use crate::envs::{sample_task_family, FamilyKind, PlantedGroundTruth, TaskFamily};
use crate::error::{Error, Result};
use crate::mdp::{DemoSet, TabularPolicy};
use crate::mtbc::{tabularize, train_multitask, transfer, MultitaskModel};
use crate::policy::PolicyParams;
use crate::rng::{derive_seed, Stream};
use crate::theory::{
    compose_bound_report, empirical_rademacher, population_risk, realizability_zeta, task_avg_rep_difference,
    verify_theorem5, worst_case_rep_difference, BoundInputs, BoundReport, FunctionClass, ZetaEstimate,
};

/// One composed bound with the cell it belongs to.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub family_kind: FamilyKind,
    pub seed: u64,
    pub report: BoundReport,
}

/// Checks that only need the planted truth, one per seed.
#[derive(Debug, Clone)]
pub struct TruthCheck {
    pub seed: u64,
    /// `d_bar(phi*; phi*, f*)` over all sources.
    pub d_bar_truth: f64,
    /// Realizability slack of `phi*` over every task of the seed's family.
    pub zeta: ZetaEstimate,
}

#[derive(Debug, Clone, Default)]
pub struct BoundSweep {
    pub rows: Vec<BoundRow>,
    pub truth: Vec<TruthCheck>,
    /// Cells whose computation failed, with the error.
    pub failures: Vec<((u64, usize, usize, usize), String)>,
}

pub fn bounds_csv_header() -> String {
    format!("family_kind,seed,{}", BoundReport::csv_header())
}

pub fn write_bound_rows<W: Write>(rows: &[BoundRow], mut out: W) -> Result<()> {
    let io = |e| Error::io("<bounds>", e);
    writeln!(out, "{}", bounds_csv_header()).map_err(io)?;
    for r in rows {
        writeln!(out, "{},{},{}", r.family_kind.name(), r.seed, r.report.csv_row()).map_err(io)?;
    }
    out.flush().map_err(io)
}

struct SeedData {
    family: TaskFamily,
    truth: PlantedGroundTruth,
    experts: Vec<TabularPolicy>,
    source_demos: Vec<DemoSet>,
    target_demos: DemoSet,
    zeta: ZetaEstimate,
}

fn seed_data(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let t_max = *cfg.t_values().iter().max().expect("validated grid");
    let n_max = *cfg.n_values().iter().max().expect("validated grid");
    let m_max = *cfg.m_values().iter().max().expect("validated grid");
    let family = sample_task_family(&cfg.family, t_max, cfg.gamma, seed)?;
    let truth = family
        .ground_truth
        .clone()
        .ok_or_else(|| Error::invalid("bound reports need a planted family"))?;
    let experts = family.experts()?;
    let source_demos = family
        .source_tasks
        .iter()
        .zip(&experts)
        .enumerate()
        .map(|(i, (mdp, ex))| {
            let s = derive_seed(seed, Stream::Demo, &[0, i as u64]);
            draw_demos(cfg, mdp, ex, &format!("source{i}"), n_max, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let target_demos = draw_demos(
        cfg,
        &family.target_task,
        &experts[t_max],
        "target",
        m_max,
        derive_seed(seed, Stream::Demo, &[1]),
    )?;
    let tasks: Vec<_> = family.source_tasks.iter().chain([&family.target_task]).cloned().collect();
    let descent = cfg.bounds.descent.with_seed(derive_seed(seed, Stream::Metric, &[cfg.bounds.descent.seed]));
    let zeta = realizability_zeta(&truth.repr, &tasks, &experts, truth.c_f, &descent)?;
    Ok(SeedData {
        family,
        truth,
        experts,
        source_demos,
        target_demos,
        zeta,
    })
}

fn truth_check(cfg: &ExperimentConfig, seed: u64, data: &SeedData) -> Result<TruthCheck> {
    let t = data.family.num_sources();
    let descent = cfg.bounds.descent.with_seed(derive_seed(seed, Stream::Metric, &[cfg.bounds.descent.seed, 1]));
    let d = task_avg_rep_difference(
        &data.truth.repr,
        &data.truth.repr,
        data.truth.source_heads(),
        &data.family.source_tasks,
        &data.experts[..t],
        &descent,
    )?;
    Ok(TruthCheck {
        seed,
        d_bar_truth: d.value,
        zeta: data.zeta.clone(),
    })
}

/// Slack of the first `t` sources plus the target.
fn zeta_subset(zeta: &ZetaEstimate, t: usize) -> f64 {
    let target = *zeta.per_task.last().expect("target slack");
    zeta.per_task[..t].iter().copied().fold(target, f64::max)
}

fn pretrain(cfg: &ExperimentConfig, data: &SeedData, seed: u64, n: usize, t: usize) -> Result<MultitaskModel> {
    let demos: Vec<DemoSet> = data.source_demos[..t].iter().map(|d| d.prefix(n)).collect::<Result<_>>()?;
    let train = cfg.mtbc.with_seed(derive_seed(seed, Stream::Init, &[cfg.mtbc.seed, 0]));
    let target = &data.family.target_task;
    Ok(train_multitask(&demos, target.observations(), target.num_actions(), &cfg.model, &train)?.0)
}

struct ReprTerms {
    d_bar: f64,
    d_worst: f64,
    rademacher_repr: f64,
}

fn repr_terms(cfg: &ExperimentConfig, data: &SeedData, seed: u64, n: usize, t: usize, model: &MultitaskModel) -> Result<ReprTerms> {
    let target = &data.family.target_task;
    let descent = cfg.bounds.descent.with_seed(derive_seed(seed, Stream::Metric, &[cfg.bounds.descent.seed, 2]));
    let heads_star = &data.truth.source_heads()[..t];
    let d_bar = task_avg_rep_difference(
        &model.repr,
        &data.truth.repr,
        heads_star,
        &data.family.source_tasks[..t],
        &data.experts[..t],
        &descent,
    )?
    .value;
    let d_worst = worst_case_rep_difference(
        &model.repr,
        &data.truth.repr,
        target,
        data.experts.last().expect("target expert"),
        cfg.model.c_f,
        &descent,
    )?
    .value;
    let obs = target.observations();
    let points: Vec<Vec<f64>> = data.source_demos[..t]
        .iter()
        .flat_map(|d| d.pairs[..n].iter().map(|&(s, _)| obs[s].clone()))
        .collect();
    let class = FunctionClass::Repr {
        arch: cfg.model.arch(target.obs_dim()),
        search: cfg.bounds.ascent.clone(),
    };
    let rademacher = empirical_rademacher(
        &class,
        &points,
        cfg.bounds.rademacher_draws,
        derive_seed(seed, Stream::Metric, &[4, n as u64, t as u64]),
    )?;
    Ok(ReprTerms {
        d_bar,
        d_worst,
        rademacher_repr: rademacher.mean,
    })
}

#[allow(clippy::too_many_arguments)]
fn report(
    cfg: &ExperimentConfig,
    data: &SeedData,
    seed: u64,
    (n, t, m): (usize, usize, usize),
    model: &MultitaskModel,
    terms: &ReprTerms,
) -> Result<BoundReport> {
    let target = &data.family.target_task;
    let expert = data.experts.last().expect("target expert");
    let demos = data.target_demos.prefix(m)?;
    let train = cfg.mtbc.with_seed(derive_seed(seed, Stream::Init, &[cfg.mtbc.seed, 1]));
    let (head, _) = transfer(&model.repr, &demos, target.observations(), target.num_actions(), &cfg.model, &train)?;
    let learned = PolicyParams::new(model.repr.clone(), head)?;
    let reference = PolicyParams::new(data.truth.repr.clone(), data.truth.target_head().clone())?;
    let risk = population_risk(target, expert, &learned)? - population_risk(target, expert, &reference)?;
    let check = verify_theorem5(target, expert, &tabularize(&learned, target.observations())?)?;
    compose_bound_report(BoundInputs {
        transfer_risk: risk,
        d_bar: terms.d_bar,
        d_worst: terms.d_worst,
        zeta_hat: zeta_subset(&data.zeta, t),
        rademacher_repr: terms.rademacher_repr,
        kl_expected: check.kl,
        policy_error_lhs: check.lhs,
        c_phi: cfg.model.c_phi,
        c_f: cfg.model.c_f,
        num_actions: target.num_actions(),
        gamma: target.gamma(),
        n,
        t,
        m,
        delta: cfg.bounds.delta,
    })
}

/// Bound reports for every (seed, N, T, M) cell of a planted family. Per
/// seed, the family, demonstrations and realizability slack are computed once
/// at the largest grid values; representation terms once per (seed, N, T).
pub fn run_bound_sweep(cfg: &ExperimentConfig) -> Result<BoundSweep> {
    cfg.validate()?;
    if cfg.kind() != FamilyKind::Planted {
        return Err(Error::Config {
            location: "family.kind".into(),
            message: "bound reports need the planted family".into(),
        });
    }
    let kind = cfg.kind();
    let seeds: BTreeMap<u64, Result<SeedData>> = cfg.seeds.par_iter().map(|&s| (s, seed_data(cfg, s))).collect();
    let mut sweep = BoundSweep::default();
    let mut jobs = Vec::new();
    for (&s, data) in &seeds {
        match data {
            Ok(data) => {
                sweep.truth.push(truth_check(cfg, s, data)?);
                for &n in cfg.n_values() {
                    for &t in cfg.t_values() {
                        jobs.push((s, n, t));
                    }
                }
            }
            Err(e) => sweep.failures.push(((s, 0, 0, 0), e.to_string())),
        }
    }
    let results: Vec<Vec<std::result::Result<BoundRow, ((u64, usize, usize, usize), String)>>> = jobs
        .par_iter()
        .map(|&(s, n, t)| {
            let data = seeds[&s].as_ref().expect("seed data");
            let fail = |m: usize, e: String| ((s, n, t, m), e);
            let prepared = pretrain(cfg, data, s, n, t).and_then(|model| {
                let terms = repr_terms(cfg, data, s, n, t, &model)?;
                Ok((model, terms))
            });
            match prepared {
                Err(e) => cfg.m_values().iter().map(|&m| Err(fail(m, e.to_string()))).collect(),
                Ok((model, terms)) => cfg
                    .m_values()
                    .iter()
                    .map(|&m| {
                        report(cfg, data, s, (n, t, m), &model, &terms)
                            .map(|report| BoundRow {
                                family_kind: kind,
                                seed: s,
                                report,
                            })
                            .map_err(|e| fail(m, e.to_string()))
                    })
                    .collect(),
            }
        })
        .collect();
    for r in results.into_iter().flatten() {
        match r {
            Ok(row) => sweep.rows.push(row),
            Err(f) => sweep.failures.push(f),
        }
    }
    sweep
        .rows
        .sort_by_key(|r| (r.seed, r.report.inputs.n, r.report.inputs.t, r.report.inputs.m));
    Ok(sweep)
}

/// Runs the sweep and writes `bounds.csv` into the output directory.
pub fn run_bound_sweep_to_dir(cfg: &ExperimentConfig) -> Result<(BoundSweep, PathBuf)> {
    let sweep = run_bound_sweep(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("bounds.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_bound_rows(&sweep.rows, std::io::BufWriter::new(file))?;
    Ok((sweep, path))
}
