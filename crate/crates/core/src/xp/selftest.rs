use rand::{Rng as _, SeedableRng};

use crate::envs::{make_frozen_lake, Cell, FrozenLakeParams};
use crate::error::Result;
use crate::mdp::{policy_evaluation, value_iteration, FiniteMdp, TabularPolicy};
use crate::policy::{log_softmax_loss, loss_and_grads, PolicyParams, ReprArch, ReprParams};
use crate::rng::Rng;
use crate::theory::{
    empirical_rademacher, linear_rademacher_bound, verify_theorem5, worst_case_rep_difference, DescentOptions,
    FunctionClass,
};

/// Outcome of one quick oracle check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn gradients(rng: &mut Rng) -> Result<(bool, String)> {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let arch = ReprArch {
            obs_dim: 3,
            hidden: vec![4],
            out_dim: 3,
            c_phi: 2.0,
        };
        let policy = PolicyParams::init(&arch, 3, 2.0, rng)?;
        let obs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(rng, 3, 1.0)).collect();
        let batch: Vec<(&[f64], usize)> = obs.iter().map(|o| (o.as_slice(), rng.gen_range(0..3))).collect();
        let (_, grads) = loss_and_grads(&policy, &batch)?;
        let loss = |p: &PolicyParams| loss_and_grads(p, &batch).map(|r| r.0);
        for (i, g) in grads.head.iter().enumerate() {
            let (mut plus, mut minus) = (policy.clone(), policy.clone());
            plus.head.weight[i] += h;
            minus.head.weight[i] -= h;
            let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * h);
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-4));
        }
        for (l, layer) in grads.repr.iter().enumerate() {
            for (i, g) in layer.weight.iter().enumerate() {
                let (mut plus, mut minus) = (policy.clone(), policy.clone());
                plus.repr.layers[l].weight[i] += h;
                minus.repr.layers[l].weight[i] -= h;
                let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * h);
                worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-4));
            }
        }
    }
    Ok((worst <= 1e-5, format!("max relative error {worst:.2e}")))
}

fn lipschitz(rng: &mut Rng) -> Result<(bool, String)> {
    let mut violations = 0;
    for i in 0..300 {
        let k = [2, 5, 11][i % 3];
        let x = random_vec(rng, k, 5.0);
        let y = random_vec(rng, k, 5.0);
        let a = rng.gen_range(0..k);
        let dist = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if (log_softmax_loss(&x, a) - log_softmax_loss(&y, a)).abs() > 2f64.sqrt() * dist + 1e-9 {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{violations} violations in 300 draws")))
}

fn random_mdp(rng: &mut Rng) -> Result<FiniteMdp> {
    let (s, a) = (4, 3);
    let reward: Vec<Vec<f64>> = (0..s).map(|_| (0..a).map(|_| rng.gen()).collect()).collect();
    let transition: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|_| {
            (0..a)
                .map(|_| {
                    let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
                    let z: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / z).collect()
                })
                .collect()
        })
        .collect();
    let obs = (0..s).map(|i| vec![i as f64]).collect();
    FiniteMdp::from_dense(&reward, &transition, vec![0.25; s], 0.9, obs)
}

fn value_iteration_oracle(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mdp = random_mdp(rng)?;
        let (v, _) = value_iteration(&mdp, 1e-12)?;
        let mut best = vec![f64::NEG_INFINITY; 4];
        for code in 0..81usize {
            let actions: Vec<usize> = (0..4).map(|s| code / 3usize.pow(s as u32) % 3).collect();
            let values = policy_evaluation(&mdp, &TabularPolicy::deterministic(&actions, 3)?)?;
            for (b, x) in best.iter_mut().zip(values) {
                *b = b.max(x);
            }
        }
        worst = v.iter().zip(&best).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);
    }
    Ok((worst <= 1e-6, format!("max deviation from enumeration {worst:.2e}")))
}

fn kl_value_bound(rng: &mut Rng) -> Result<(bool, String)> {
    let mdp = make_frozen_lake(
        &FrozenLakeParams {
            start: Cell::new(0, 0),
            goal: Cell::new(7, 7),
            slip: 0.1,
        },
        0.99,
    )?;
    let (_, expert) = value_iteration(&mdp, 1e-10)?;
    let arch = ReprArch {
        obs_dim: mdp.obs_dim(),
        hidden: vec![16],
        out_dim: 8,
        c_phi: 10.0,
    };
    let mut held = 0;
    for _ in 0..20 {
        let policy = PolicyParams::init(&arch, mdp.num_actions(), 10.0, rng)?;
        held += usize::from(verify_theorem5(&mdp, &expert, &policy)?.holds);
    }
    Ok((held == 20, format!("{held}/20 random policies within the bound")))
}

fn rademacher(rng: &mut Rng) -> Result<(bool, String)> {
    let data: Vec<Vec<f64>> = (0..50).map(|_| random_vec(rng, 3, 1.0)).collect();
    let constant = empirical_rademacher(&FunctionClass::Constant(vec![1.0, -2.0]), &data, 200, 1)?;
    let (c_f, c_phi) = (2.0, 3f64.sqrt());
    let linear = empirical_rademacher(
        &FunctionClass::LinearHeads { c_f, num_outputs: 4 },
        &data,
        200,
        2,
    )?;
    let bound = linear_rademacher_bound(c_f, c_phi, 4, data.len())?;
    let ok = constant.mean.abs() <= 3.0 * constant.stderr.max(1e-12) && linear.mean <= bound + 3.0 * linear.stderr;
    Ok((
        ok,
        format!(
            "constant {:.3e} (se {:.1e}), linear {:.4} vs bound {bound:.4}",
            constant.mean, constant.stderr, linear.mean
        ),
    ))
}

fn d_worst_identity(rng: &mut Rng) -> Result<(bool, String)> {
    let mdp = random_mdp(rng)?;
    let (_, expert) = value_iteration(&mdp, 1e-10)?;
    let arch = ReprArch {
        obs_dim: 1,
        hidden: vec![4],
        out_dim: 2,
        c_phi: 2.0,
    };
    let phi = ReprParams::init(&arch, rng)?;
    let d = worst_case_rep_difference(&phi, &phi, &mdp, &expert, 3.0, &DescentOptions::default())?;
    Ok((d.value.abs() <= 1e-3, format!("d_worst(phi; phi) = {:.2e}", d.value)))
}

/// Quick versions of the oracle checks, for a smoke test of a build.
pub fn run_selftest(seed: u64) -> Vec<CheckResult> {
    type Check = fn(&mut Rng) -> Result<(bool, String)>;
    let checks: [(&'static str, Check); 6] = [
        ("analytic gradients vs finite differences", gradients),
        ("loss is sqrt(2)-Lipschitz in the logits", lipschitz),
        ("value iteration vs policy enumeration", value_iteration_oracle),
        ("value gap within the KL bound on frozen lake", kl_value_bound),
        ("Rademacher estimator oracles", rademacher),
        ("worst-case difference of a representation with itself", d_worst_identity),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, &(name, check))| {
            let mut rng = Rng::seed_from_u64(seed.wrapping_add(i as u64));
            match check(&mut rng) {
                Ok((passed, detail)) => CheckResult { name, passed, detail },
                Err(e) => CheckResult {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect()
}
