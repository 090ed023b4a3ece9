//! One full bound report on a planted family: every term of the
//! generalization bound and the composed policy-error bound.

use mtil::xp::{parse_config_str, run_bound_sweep};

const CONFIG: &str = r#"
seeds = [4]
demos_per_task = 500

[family]
kind = "planted"

[grid]
n = [2000]
t = [8]
m = [500]

[model]
hidden = [16]
repr_dim = 4
c_f = 40.0

[mtbc]
lr_repr = 0.003
lr_head = 0.03
"#;

fn main() -> mtil::Result<()> {
    let cfg = parse_config_str(CONFIG, "bound_report")?;
    let sweep = run_bound_sweep(&cfg)?;
    for row in &sweep.rows {
        print!("{}", row.report.to_key_values());
    }
    for ((seed, n, t, m), e) in &sweep.failures {
        eprintln!("seed {seed} N={n} T={t} M={m}: {e}");
    }
    Ok(())
}
