//! A small frozen-lake grid run end to end: records, effective config and
//! plots land in a temporary directory.

use mtil::xp::{emit_plots, parse_config_str, parse_plot_specs, run_grid_to_dir};

const CONFIG: &str = r#"
seeds = [0, 1]
demos_per_task = 100

[family]
kind = "frozen_lake"
slip = [0.0, 0.1]

[grid]
n = [400]
t = [1, 4]
m = [100, 200]

[model]
hidden = [32]
repr_dim = 16

[mtbc]
epochs = 60
lr_head = 0.01

[bc]
epochs = 60
"#;

const PLOTS: &str = r#"
[[plot]]
name = "vary_t"
x = "T"
series = "M"
"#;

fn main() -> mtil::Result<()> {
    let dir = std::env::temp_dir().join("mtil_experiment_grid");
    let mut cfg = parse_config_str(CONFIG, "experiment_grid")?;
    cfg.output_dir = dir.clone();
    let (records, csv) = run_grid_to_dir(&cfg)?;
    for r in &records {
        println!(
            "seed {} N={} T={} M={} {:4} return {}",
            r.seed,
            r.n,
            r.t,
            r.m,
            r.method.name(),
            r.normalized_return.map_or("NA".into(), |x| format!("{x:.3}"))
        );
    }
    let out = emit_plots(&records, &parse_plot_specs(PLOTS, "plots")?, &dir)?;
    println!("records in {}", csv.display());
    for f in out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
