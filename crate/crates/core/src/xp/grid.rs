use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{DemoSampling, ExperimentConfig};
use crate::envs::{sample_task_family, FamilyKind, TaskFamily};
use crate::error::{Error, Result};
use crate::mdp::{sample_demos_exact, sample_demos_rollout, DemoSet, FiniteMdp, TabularPolicy};
use crate::mtbc::{
    evaluate_policy, final_losses, tabularize, train_bc, train_multitask, transfer, ReturnAnchors, TrainConfig,
};
use crate::policy::{PolicyParams, ReprParams};
use crate::rng::{derive_seed, Stream};
use crate::theory::{fit_reference_policy, linear_rademacher_bound, population_risk, verify_theorem5};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Bc,
    Mtbc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bc => "BC",
            Method::Mtbc => "MTBC",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "BC" => Ok(Method::Bc),
            "MTBC" => Ok(Method::Mtbc),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// One row of the results table. Numeric fields are `None` (written `NA`)
/// when the cell failed or the quantity does not apply: BC has no source
/// phase, so its `final_train_loss` is always `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub family_kind: FamilyKind,
    pub seed: u64,
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub method: Method,
    pub normalized_return: Option<f64>,
    pub raw_return: Option<f64>,
    pub value_gap_inf: Option<f64>,
    /// Mean over source tasks of the last pretraining epoch's loss.
    pub final_train_loss: Option<f64>,
    /// Last epoch's loss on the target demonstrations.
    pub final_test_loss: Option<f64>,
    /// Target population risk minus that of the reference policy.
    pub transfer_risk: Option<f64>,
    pub kl_expected: Option<f64>,
    /// Value-gap bound evaluated at `kl_expected`.
    pub kl_bound_rhs: Option<f64>,
    pub kl_bound_holds: Option<bool>,
    pub rademacher_linear_bound: Option<f64>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v}"))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| Error::invalid(format!("bad integer {s:?}: {e}")))
}

impl ExperimentRecord {
    pub const COLUMNS: [&'static str; 16] = [
        "family_kind",
        "seed",
        "N",
        "T",
        "M",
        "method",
        "normalized_return",
        "raw_return",
        "value_gap_inf",
        "final_train_loss",
        "final_test_loss",
        "transfer_risk",
        "kl_expected",
        "kl_bound_rhs",
        "kl_bound_holds",
        "rademacher_linear_bound",
    ];

    fn empty(kind: FamilyKind, seed: u64, (n, t, m): (usize, usize, usize), method: Method) -> Self {
        Self {
            family_kind: kind,
            seed,
            n,
            t,
            m,
            method,
            normalized_return: None,
            raw_return: None,
            value_gap_inf: None,
            final_train_loss: None,
            final_test_loss: None,
            transfer_risk: None,
            kl_expected: None,
            kl_bound_rhs: None,
            kl_bound_holds: None,
            rademacher_linear_bound: None,
        }
    }

    /// Column index of a numeric field, for `metric`.
    pub fn metric_index(name: &str) -> Result<usize> {
        match Self::COLUMNS.iter().position(|&c| c == name) {
            Some(i) if i >= 6 => Ok(i),
            _ => Err(Error::invalid(format!("{name:?} is not a numeric record column"))),
        }
    }

    /// Value of the numeric column at `index`; flags read as 0 or 1.
    pub fn metric(&self, index: usize) -> Option<f64> {
        match index {
            6 => self.normalized_return,
            7 => self.raw_return,
            8 => self.value_gap_inf,
            9 => self.final_train_loss,
            10 => self.final_test_loss,
            11 => self.transfer_risk,
            12 => self.kl_expected,
            13 => self.kl_bound_rhs,
            14 => self.kl_bound_holds.map(|b| f64::from(u8::from(b))),
            15 => self.rademacher_linear_bound,
            _ => None,
        }
    }

    fn sort_key(&self) -> (u64, usize, usize, usize, Method) {
        (self.seed, self.n, self.t, self.m, self.method)
    }

    pub fn values(&self) -> Vec<String> {
        vec![
            self.family_kind.name().to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            self.t.to_string(),
            self.m.to_string(),
            self.method.name().to_string(),
            fmt_opt(self.normalized_return),
            fmt_opt(self.raw_return),
            fmt_opt(self.value_gap_inf),
            fmt_opt(self.final_train_loss),
            fmt_opt(self.final_test_loss),
            fmt_opt(self.transfer_risk),
            fmt_opt(self.kl_expected),
            fmt_opt(self.kl_bound_rhs),
            self.kl_bound_holds.map_or_else(|| "NA".into(), |b| b.to_string()),
            fmt_opt(self.rademacher_linear_bound),
        ]
    }

    pub fn from_values(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != Self::COLUMNS.len() {
            return Err(Error::invalid(format!(
                "record has {} fields, expected {}",
                row.len(),
                Self::COLUMNS.len()
            )));
        }
        let kind = match &row[0] {
            "frozen_lake" => FamilyKind::FrozenLake,
            "pendulum" => FamilyKind::Pendulum,
            "planted" => FamilyKind::Planted,
            other => return Err(Error::invalid(format!("unknown family {other:?}"))),
        };
        let mut rec = Self::empty(
            kind,
            parse_num(&row[1])?,
            (parse_num(&row[2])?, parse_num(&row[3])?, parse_num(&row[4])?),
            Method::parse(&row[5])?,
        );
        rec.normalized_return = parse_opt(&row[6])?;
        rec.raw_return = parse_opt(&row[7])?;
        rec.value_gap_inf = parse_opt(&row[8])?;
        rec.final_train_loss = parse_opt(&row[9])?;
        rec.final_test_loss = parse_opt(&row[10])?;
        rec.transfer_risk = parse_opt(&row[11])?;
        rec.kl_expected = parse_opt(&row[12])?;
        rec.kl_bound_rhs = parse_opt(&row[13])?;
        rec.kl_bound_holds = match &row[14] {
            "NA" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(Error::invalid(format!("bad flag {other:?}"))),
        };
        rec.rademacher_linear_bound = parse_opt(&row[15])?;
        Ok(rec)
    }
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ExperimentRecord::COLUMNS)?;
    for r in records {
        w.write_record(r.values())?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().ne(ExperimentRecord::COLUMNS.iter().copied()) {
        return Err(Error::Config {
            location: path.display().to_string(),
            message: "header does not match the experiment record columns".into(),
        });
    }
    reader
        .records()
        .map(|r| ExperimentRecord::from_values(&r?))
        .collect()
}

/// Everything a seed's cells share.
struct SeedContext {
    family: TaskFamily,
    experts: Vec<TabularPolicy>,
    anchors: ReturnAnchors,
    /// Largest requested source sets; smaller ones are prefixes.
    source_demos: Vec<DemoSet>,
    target_demos: DemoSet,
    reference: PolicyParams,
}

impl SeedContext {
    fn target(&self) -> &FiniteMdp {
        &self.family.target_task
    }

    fn target_expert(&self) -> &TabularPolicy {
        self.experts.last().expect("target expert")
    }

    fn observations(&self) -> &[Vec<f64>] {
        self.target().observations()
    }
}

pub(super) fn draw_demos(
    cfg: &ExperimentConfig,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    id: &str,
    n: usize,
    seed: u64,
) -> Result<DemoSet> {
    match cfg.demos {
        DemoSampling::Exact => sample_demos_exact(mdp, expert, id, n, seed),
        DemoSampling::Rollout { horizon } => sample_demos_rollout(mdp, expert, id, n, horizon, seed),
    }
}

fn train_seed(base: &TrainConfig, seed: u64, role: u64) -> TrainConfig {
    base.with_seed(derive_seed(seed, Stream::Init, &[base.seed, role]))
}

fn build_context(cfg: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let t_max = *cfg.t_values().iter().max().expect("validated grid");
    let n_max = *cfg.n_values().iter().max().expect("validated grid");
    let m_max = *cfg.m_values().iter().max().expect("validated grid");
    let family = sample_task_family(&cfg.family, t_max, cfg.gamma, seed)?;
    let experts = family.experts()?;
    let anchors = ReturnAnchors::new(&family.target_task, &experts[t_max])?;
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
    let reference = match &family.ground_truth {
        Some(truth) => PolicyParams::new(truth.repr.clone(), truth.target_head().clone())?,
        None => {
            let arch = cfg.model.arch(family.target_task.obs_dim());
            let opts = crate::theory::ReferenceOptions {
                seed: derive_seed(seed, Stream::Metric, &[cfg.bounds.reference.seed]),
                ..cfg.bounds.reference.clone()
            };
            fit_reference_policy(&family.target_task, &experts[t_max], &arch, cfg.model.c_f, &opts)?.0
        }
    };
    Ok(SeedContext {
        family,
        experts,
        anchors,
        source_demos,
        target_demos,
        reference,
    })
}

/// Exact target-task metrics of a learned policy.
fn fill_metrics(rec: &mut ExperimentRecord, ctx: &SeedContext, policy: &PolicyParams, cfg: &ExperimentConfig) -> Result<()> {
    let mdp = ctx.target();
    let expert = ctx.target_expert();
    let table = tabularize(policy, ctx.observations())?;
    let eval = evaluate_policy(mdp, &table, &ctx.anchors)?;
    let risk = population_risk(mdp, expert, policy)?;
    let reference_risk = population_risk(mdp, expert, &ctx.reference)?;
    let check = verify_theorem5(mdp, expert, policy)?;
    rec.normalized_return = eval.normalized_return;
    rec.raw_return = Some(eval.raw_return);
    rec.value_gap_inf = Some(eval.value_gap_inf);
    rec.transfer_risk = Some(risk - reference_risk);
    rec.kl_expected = Some(check.kl);
    rec.kl_bound_rhs = Some(check.rhs);
    rec.kl_bound_holds = Some(check.holds);
    rec.rademacher_linear_bound = Some(linear_rademacher_bound(
        cfg.model.c_f,
        cfg.model.c_phi,
        mdp.num_actions(),
        rec.m,
    )?);
    Ok(())
}

type Pretrained = (ReprParams, f64);
type Finetuned = (PolicyParams, f64);

fn pretrain(cfg: &ExperimentConfig, ctx: &SeedContext, seed: u64, n: usize, t: usize) -> Result<Pretrained> {
    let demos: Vec<DemoSet> = ctx.source_demos[..t].iter().map(|d| d.prefix(n)).collect::<Result<_>>()?;
    let train = train_seed(&cfg.mtbc, seed, 0);
    let (model, trace) = train_multitask(&demos, ctx.observations(), ctx.target().num_actions(), &cfg.model, &train)?;
    let losses = final_losses(&trace);
    Ok((model.repr, losses.iter().sum::<f64>() / losses.len() as f64))
}

fn finetune(cfg: &ExperimentConfig, ctx: &SeedContext, seed: u64, repr: &ReprParams, m: usize) -> Result<Finetuned> {
    let demos = ctx.target_demos.prefix(m)?;
    let train = train_seed(&cfg.mtbc, seed, 1);
    let (head, trace) = transfer(repr, &demos, ctx.observations(), ctx.target().num_actions(), &cfg.model, &train)?;
    Ok((PolicyParams::new(repr.clone(), head)?, final_losses(&trace)[0]))
}

fn baseline(cfg: &ExperimentConfig, ctx: &SeedContext, seed: u64, m: usize) -> Result<Finetuned> {
    let demos = ctx.target_demos.prefix(m)?;
    let train = train_seed(&cfg.bc, seed, 2);
    let (policy, trace) = train_bc(&demos, ctx.observations(), ctx.target().num_actions(), &cfg.model, &train)?;
    Ok((policy, final_losses(&trace)[0]))
}

/// Total number of records `run_grid` produces.
pub fn record_count(cfg: &ExperimentConfig) -> usize {
    cfg.seeds.len() * cfg.n_values().len() * cfg.t_values().len() * cfg.m_values().len() * 2
}

/// Runs every (seed, N, T, M) cell with both methods. Per seed, the family is
/// generated once with the largest T and demonstrations once at the largest
/// N and M; smaller cells use prefixes. Representations are pretrained once
/// per (seed, N, T) and BC once per (seed, M). Failures become `NA` rows.
/// Records are sorted by (seed, N, T, M, method).
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let kind = cfg.kind();
    let contexts: BTreeMap<u64, std::result::Result<SeedContext, String>> = cfg
        .seeds
        .par_iter()
        .map(|&s| (s, build_context(cfg, s).map_err(|e| e.to_string())))
        .collect();

    let mut pre_jobs = Vec::new();
    let mut bc_jobs = Vec::new();
    for (&s, ctx) in &contexts {
        if ctx.is_err() {
            continue;
        }
        for &n in cfg.n_values() {
            for &t in cfg.t_values() {
                pre_jobs.push((s, n, t));
            }
        }
        for &m in cfg.m_values() {
            bc_jobs.push((s, m));
        }
    }
    let pretrained: BTreeMap<(u64, usize, usize), std::result::Result<Pretrained, String>> = pre_jobs
        .par_iter()
        .map(|&(s, n, t)| {
            let ctx = contexts[&s].as_ref().expect("context built");
            ((s, n, t), pretrain(cfg, ctx, s, n, t).map_err(|e| e.to_string()))
        })
        .collect();
    let baselines: BTreeMap<(u64, usize), std::result::Result<Finetuned, String>> = bc_jobs
        .par_iter()
        .map(|&(s, m)| {
            let ctx = contexts[&s].as_ref().expect("context built");
            ((s, m), baseline(cfg, ctx, s, m).map_err(|e| e.to_string()))
        })
        .collect();

    let cells: Vec<(u64, usize, usize, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| {
            cfg.n_values().iter().flat_map(move |&n| {
                cfg.t_values()
                    .iter()
                    .flat_map(move |&t| cfg.m_values().iter().map(move |&m| (s, n, t, m)))
            })
        })
        .collect();
    let mut records: Vec<ExperimentRecord> = cells
        .par_iter()
        .flat_map_iter(|&(s, n, t, m)| {
            let empty = |method| ExperimentRecord::empty(kind, s, (n, t, m), method);
            let (mut mtbc, mut bc) = (empty(Method::Mtbc), empty(Method::Bc));
            if let Ok(ctx) = &contexts[&s] {
                let lost = |e: &String| Error::invalid(e.clone());
                let filled = pretrained[&(s, n, t)].as_ref().map_err(lost).and_then(|(repr, train_loss)| {
                    mtbc.final_train_loss = Some(*train_loss);
                    let (policy, test_loss) = finetune(cfg, ctx, s, repr, m)?;
                    mtbc.final_test_loss = Some(test_loss);
                    fill_metrics(&mut mtbc, ctx, &policy, cfg)
                });
                if filled.is_err() {
                    mtbc = empty(Method::Mtbc);
                }
                let filled = baselines[&(s, m)].as_ref().map_err(lost).and_then(|(policy, loss)| {
                    bc.final_test_loss = Some(*loss);
                    fill_metrics(&mut bc, ctx, policy, cfg)
                });
                if filled.is_err() {
                    bc = empty(Method::Bc);
                }
            }
            [mtbc, bc]
        })
        .collect();
    records.sort_by_key(ExperimentRecord::sort_key);
    Ok(records)
}

/// Runs the grid and writes `effective_config.toml` and `records.csv` into
/// the configured output directory; returns the records and the CSV path.
pub fn run_grid_to_dir(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRecord>, PathBuf)> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("effective_config.toml");
    fs::write(&config_path, cfg.dump()?).map_err(|e| Error::io(&config_path, e))?;
    let records = run_grid(cfg)?;
    let csv_path = dir.join("records.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_records(&records, std::io::BufWriter::new(file))?;
    Ok((records, csv_path))
}
