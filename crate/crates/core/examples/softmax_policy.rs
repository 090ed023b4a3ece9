//! A softmax policy over a norm-bounded representation: forward pass, loss,
//! gradient and a finite-difference spot check.

use mtil::policy::{forward, loss_and_grads, PolicyParams, ReprArch};
use mtil::rng::{stream_rng, Stream};

fn main() -> mtil::Result<()> {
    let arch = ReprArch {
        obs_dim: 4,
        hidden: vec![8],
        out_dim: 3,
        c_phi: 2.0,
    };
    let mut rng = stream_rng(0, Stream::Init, &[]);
    let policy = PolicyParams::init(&arch, 5, 3.0, &mut rng)?;

    let obs = [0.5, -1.0, 0.25, 2.0];
    let phi = policy.repr.forward(&obs);
    let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("|phi(x)| = {norm:.4} <= C_phi = {}", arch.c_phi);
    let (logits, probs) = forward(&policy, &obs)?;
    println!("logits {logits:.3?}\nprobs  {probs:.3?}");

    let batch = [(&obs[..], 2), (&[0.0, 0.1, 0.2, 0.3][..], 4)];
    let (loss, grads) = loss_and_grads(&policy, &batch)?;
    let h = 1e-5;
    let (mut plus, mut minus) = (policy.clone(), policy.clone());
    plus.head.weight[0] += h;
    minus.head.weight[0] -= h;
    let fd = (loss_and_grads(&plus, &batch)?.0 - loss_and_grads(&minus, &batch)?.0) / (2.0 * h);
    println!("loss {loss:.6}, dL/dW[0,0] analytic {:.8} finite-diff {fd:.8}", grads.head[0]);
    Ok(())
}
