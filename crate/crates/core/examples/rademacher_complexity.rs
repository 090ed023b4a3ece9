//! Monte-Carlo empirical Rademacher complexity of a few function classes,
//! with the closed-form bound for norm-bounded linear heads.

use mtil::policy::ReprArch;
use mtil::rng::{stream_rng, Stream};
use mtil::theory::{empirical_rademacher, linear_rademacher_bound, AscentOptions, FunctionClass};
use rand::Rng;

fn main() -> mtil::Result<()> {
    let (c_f, c_phi, k) = (2.0, 1.0, 3);
    let mut rng = stream_rng(5, Stream::Metric, &[]);
    for n in [10, 40, 160] {
        // points on the sphere of radius C_phi
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| c_phi * x / norm).collect()
            })
            .collect();
        let linear = empirical_rademacher(&FunctionClass::LinearHeads { c_f, num_outputs: k }, &data, 200, 1)?;
        let repr = empirical_rademacher(
            &FunctionClass::Repr {
                arch: ReprArch {
                    obs_dim: 4,
                    hidden: vec![8],
                    out_dim: k,
                    c_phi,
                },
                search: AscentOptions::default(),
            },
            &data,
            10,
            2,
        )?;
        println!(
            "n={n:4}  linear {:.4} +- {:.4} (bound {:.4})  repr {:.4} +- {:.4} (lower estimate)",
            linear.mean,
            linear.stderr,
            linear_rademacher_bound(c_f, c_phi, k, n)?,
            repr.mean,
            repr.stderr
        );
    }
    Ok(())
}
