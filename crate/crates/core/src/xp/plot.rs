use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{read_records, ExperimentRecord, Method};
use super::svg::{render, Chart, Point, Reference, Series};
use crate::error::{Error, Result};

/// Grid dimension used as an axis, series key or filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    N,
    T,
    M,
}

impl Axis {
    pub fn of(self, r: &ExperimentRecord) -> usize {
        match self {
            Axis::N => r.n,
            Axis::T => r.t,
            Axis::M => r.m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::T => "T",
            Axis::M => "M",
        }
    }
}

fn default_metric() -> String {
    "normalized_return".into()
}

fn default_bc() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub name: String,
    pub x: Axis,
    pub series: Axis,
    #[serde(default = "default_metric")]
    pub metric: String,
    /// Fixed values of the remaining grid dimensions.
    #[serde(default)]
    pub filter: BTreeMap<Axis, usize>,
    /// Draw BC (at the filtered or series `M`) as dashed references.
    #[serde(default = "default_bc")]
    pub bc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotFile {
    pub plot: Vec<PlotSpec>,
}

pub fn parse_plot_specs(text: &str, origin: &str) -> Result<Vec<PlotSpec>> {
    let file: PlotFile = toml::from_str(text).map_err(|e| Error::Config {
        location: match e.span() {
            Some(span) => format!("{origin}:{}", text[..span.start.min(text.len())].matches('\n').count() + 1),
            None => origin.to_string(),
        },
        message: e.message().to_string(),
    })?;
    for p in &file.plot {
        let location = format!("{origin}: plot {:?}", p.name);
        let reject = |message: &str| Error::Config {
            location: location.clone(),
            message: message.into(),
        };
        if p.x == p.series {
            return Err(reject("x and series must differ"));
        }
        if p.filter.contains_key(&p.x) || p.filter.contains_key(&p.series) {
            return Err(reject("filter may not fix the x or series dimension"));
        }
        ExperimentRecord::metric_index(&p.metric).map_err(|e| reject(&e.to_string()))?;
        if p.name.is_empty() || p.name.contains(['/', '\\']) {
            return Err(reject("name must be a plain file stem"));
        }
    }
    Ok(file.plot)
}

/// Mean, standard error (sample sd over sqrt(n)) and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, stderr, count: n })
}

/// Summary of `metric` over records of `method` at exactly the given grid
/// values. BC rows are repeated per (N, T); they are reduced to one value per
/// (seed, M) first so that each seed counts once.
pub fn summarize_cell(
    records: &[ExperimentRecord],
    method: Method,
    metric: &str,
    at: &BTreeMap<Axis, usize>,
) -> Result<Option<Summary>> {
    let idx = ExperimentRecord::metric_index(metric)?;
    let mut per_seed: BTreeMap<(u64, usize, usize, usize), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method) {
        let fixed = |a: Axis| at.get(&a).is_none_or(|&v| a.of(r) == v);
        if !(fixed(Axis::N) && fixed(Axis::T) && fixed(Axis::M)) {
            continue;
        }
        if let Some(v) = r.metric(idx).filter(|v| v.is_finite()) {
            let key = match method {
                Method::Bc => (r.seed, 0, 0, r.m),
                Method::Mtbc => (r.seed, r.n, r.t, r.m),
            };
            per_seed.entry(key).or_insert(v);
        }
    }
    let values: Vec<f64> = per_seed.into_values().collect();
    Ok(summarize(&values))
}

/// One summarized line of a plot, for the companion CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub family: String,
    pub plot: String,
    pub method: Method,
    pub series: usize,
    pub x: Option<usize>,
    pub summary: Summary,
}

fn chart_for(family: &str, spec: &PlotSpec, records: &[ExperimentRecord]) -> Result<(Chart, Vec<SummaryRow>)> {
    let matches = |r: &ExperimentRecord| spec.filter.iter().all(|(a, &v)| a.of(r) == v);
    let mtbc: Vec<&ExperimentRecord> = records.iter().filter(|r| r.method == Method::Mtbc && matches(r)).collect();
    let xs: BTreeSet<usize> = mtbc.iter().map(|r| spec.x.of(r)).collect();
    let keys: BTreeSet<usize> = mtbc.iter().map(|r| spec.series.of(r)).collect();
    let mut rows = Vec::new();
    let mut chart = Chart {
        title: format!("{family}: {}", spec.name),
        x_label: spec.x.name().into(),
        y_label: spec.metric.clone(),
        x_ticks: xs.iter().map(|&x| x as f64).collect(),
        ..Chart::default()
    };
    for &key in &keys {
        let mut series = Series {
            label: format!("MTBC {}={key}", spec.series.name()),
            points: Vec::new(),
        };
        for &x in &xs {
            let mut at = spec.filter.clone();
            at.insert(spec.series, key);
            at.insert(spec.x, x);
            if let Some(s) = summarize_cell(records, Method::Mtbc, &spec.metric, &at)? {
                series.points.push(Point {
                    x: x as f64,
                    mean: s.mean,
                    stderr: s.stderr,
                });
                rows.push(SummaryRow {
                    family: family.into(),
                    plot: spec.name.clone(),
                    method: Method::Mtbc,
                    series: key,
                    x: Some(x),
                    summary: s,
                });
            }
        }
        chart.series.push(series);
    }
    if spec.bc {
        let bc_ms: BTreeSet<usize> = match spec.filter.get(&Axis::M) {
            Some(&m) => [m].into(),
            None => records.iter().filter(|r| r.method == Method::Bc).map(|r| r.m).collect(),
        };
        for m in bc_ms {
            let at = BTreeMap::from([(Axis::M, m)]);
            if let Some(s) = summarize_cell(records, Method::Bc, &spec.metric, &at)? {
                let color = (spec.series == Axis::M).then(|| keys.iter().position(|&k| k == m)).flatten();
                chart.references.push(Reference {
                    label: format!("BC M={m}"),
                    mean: s.mean,
                    stderr: s.stderr,
                    color,
                });
                rows.push(SummaryRow {
                    family: family.into(),
                    plot: spec.name.clone(),
                    method: Method::Bc,
                    series: m,
                    x: None,
                    summary: s,
                });
            }
        }
    }
    Ok((chart, rows))
}

/// Files written by `emit_plots`, and notes on single-seed cells.
#[derive(Debug, Clone, Default)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes `<family>_<plot>.svg` per family present in the records and plot
/// spec, plus `summary.csv` with every plotted mean.
pub fn emit_plots(records: &[ExperimentRecord], specs: &[PlotSpec], out_dir: &Path) -> Result<PlotOutput> {
    if records.is_empty() {
        return Err(Error::invalid("no records to plot"));
    }
    if specs.is_empty() {
        return Err(Error::invalid("no plot specs"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let families: BTreeSet<&str> = records.iter().map(|r| r.family_kind.name()).collect();
    let mut paths = Vec::new();
    let mut all_rows = Vec::new();
    for family in families {
        let subset: Vec<ExperimentRecord> =
            records.iter().filter(|r| r.family_kind.name() == family).cloned().collect();
        for spec in specs {
            let (chart, rows) = chart_for(family, spec, &subset)?;
            let path = out_dir.join(format!("{family}_{}.svg", spec.name));
            fs::write(&path, render(&chart)).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
            all_rows.extend(rows);
        }
    }
    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["family", "plot", "method", "series", "x", "mean", "stderr", "count"])?;
    for r in &all_rows {
        w.write_record([
            r.family.clone(),
            r.plot.clone(),
            r.method.name().into(),
            r.series.to_string(),
            r.x.map_or_else(|| "NA".into(), |x| x.to_string()),
            format!("{}", r.summary.mean),
            format!("{}", r.summary.stderr),
            r.summary.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    paths.push(path);
    let warnings = all_rows
        .iter()
        .filter(|r| r.summary.count == 1)
        .map(|r| {
            let at = r.x.map_or_else(String::new, |x| format!(" x={x}"));
            format!(
                "{} {} {} series={}{at}: single seed, zero-width band",
                r.family,
                r.plot,
                r.method.name(),
                r.series
            )
        })
        .collect();
    Ok(PlotOutput { files: paths, warnings })
}

/// File-level entry point: reads the records CSV and the TOML plot spec and
/// writes next to the CSV.
pub fn emit_plots_from_files(csv: &Path, spec: &Path) -> Result<PlotOutput> {
    let records = read_records(csv)?;
    let text = fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
    let specs = parse_plot_specs(&text, &spec.display().to_string())?;
    let dir = csv.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    emit_plots(&records, &specs, dir)
}
