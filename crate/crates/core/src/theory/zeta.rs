use crate::error::{check_dim, Error, Result};
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::policy::{log_softmax_loss, logsumexp, softmax, HeadParams, ReprParams};

use super::head_fit::{minimize_head, projected_descent, DescentOptions};

/// Sharpness schedule for the log-sum-exp surrogate of `max_s loss_s`.
const BETAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Clone)]
pub struct ZetaEstimate {
    /// Max over tasks of the per-task shortfall.
    pub value: f64,
    pub per_task: Vec<f64>,
    pub heads: Vec<HeadParams>,
}

fn expert_actions(expert: &TabularPolicy) -> Result<Vec<usize>> {
    if !expert.is_deterministic() {
        return Err(Error::invalid("realizability slack needs a deterministic expert"));
    }
    Ok((0..expert.num_states()).map(|s| expert.argmax(s)).collect())
}

/// `max_s 1 - softmax(W phi(s))[a*(s)]` for one head.
pub fn zeta_for_head(repr: &ReprParams, head: &HeadParams, mdp: &FiniteMdp, expert: &TabularPolicy) -> Result<f64> {
    check_dim("head input", repr.out_dim(), head.in_dim)?;
    let actions = expert_actions(expert)?;
    Ok(mdp
        .observations()
        .iter()
        .zip(&actions)
        .map(|(o, &a)| 1.0 - softmax(&head.logits(&repr.forward(o)))[a])
        .fold(0.0, f64::max))
}

fn worst_loss(features: &[Vec<f64>], actions: &[usize], head: &HeadParams) -> f64 {
    features
        .iter()
        .zip(actions)
        .map(|(phi, &a)| log_softmax_loss(&head.logits(phi), a))
        .fold(0.0, f64::max)
}

/// `(1/beta) log sum_s exp(beta loss_s(W))` and its gradient.
fn smoothed_max_loss<'a>(
    features: &'a [Vec<f64>],
    actions: &'a [usize],
    beta: f64,
) -> impl Fn(&HeadParams) -> (f64, Vec<f64>) + 'a {
    move |h: &HeadParams| {
        let mut grad = vec![0.0; h.weight.len()];
        let terms: Vec<(f64, Vec<f64>)> = features
            .iter()
            .zip(actions)
            .map(|(phi, &a)| {
                let z = h.logits(phi);
                let mut g = softmax(&z);
                g[a] -= 1.0;
                (log_softmax_loss(&z, a), g)
            })
            .collect();
        let scaled: Vec<f64> = terms.iter().map(|(l, _)| beta * l).collect();
        let lse = logsumexp(&scaled);
        for ((phi, (_, g)), sl) in features.iter().zip(&terms).zip(&scaled) {
            let w = (sl - lse).exp();
            h.backward(phi, &g.iter().map(|x| w * x).collect::<Vec<_>>(), &mut grad);
        }
        (lse / beta, grad)
    }
}

/// Descends the smoothed worst-state loss from `head` through the sharpness
/// schedule, keeping the best head by the exact worst-state loss.
pub(crate) fn minimax_polish(head: HeadParams, features: &[Vec<f64>], actions: &[usize], steps: usize, lr: f64) -> HeadParams {
    let mut best_loss = worst_loss(features, actions, &head);
    let mut best = head;
    for &beta in &BETAS {
        let objective = smoothed_max_loss(features, actions, beta);
        if let Some((h, _)) = projected_descent(best.clone(), &objective, steps, lr) {
            let w = worst_loss(features, actions, &h);
            if w < best_loss {
                best_loss = w;
                best = h;
            }
        }
    }
    best
}

/// Per task, searches for the head maximizing `min_s pi(a*(s)|s)` by
/// descending a log-sum-exp smoothing of `max_s loss_s` with increasing
/// sharpness; the measured shortfall of the head found is an upper estimate
/// of the achievable one.
pub fn realizability_zeta(
    repr: &ReprParams,
    tasks: &[FiniteMdp],
    experts: &[TabularPolicy],
    c_f: f64,
    opts: &DescentOptions,
) -> Result<ZetaEstimate> {
    if tasks.is_empty() {
        return Err(Error::invalid("no tasks"));
    }
    check_dim("experts", tasks.len(), experts.len())?;
    let mut out = ZetaEstimate {
        value: 0.0,
        per_task: Vec::new(),
        heads: Vec::new(),
    };
    for (t, (mdp, expert)) in tasks.iter().zip(experts).enumerate() {
        check_dim("representation input", mdp.obs_dim(), repr.obs_dim())?;
        let actions = expert_actions(expert)?;
        let features: Vec<Vec<f64>> = mdp.observations().iter().map(|o| repr.forward(o)).collect();
        let (k, d) = (mdp.num_actions(), repr.out_dim());
        let mut best: Option<(HeadParams, f64)> = None;
        for (stage, &beta) in BETAS.iter().enumerate() {
            let objective = smoothed_max_loss(&features, &actions, beta);
            let fit = minimize_head(k, d, c_f, &objective, opts, &[2, t as u64, stage as u64])?;
            let mut candidates = vec![fit.head];
            // also continue from the previous stage's best head
            if let Some((h, _)) = &best {
                if let Some((h, _)) = projected_descent(h.clone(), &objective, opts.steps, opts.lr) {
                    candidates.push(h);
                }
            }
            for h in candidates {
                let w = worst_loss(&features, &actions, &h);
                if best.as_ref().is_none_or(|(_, b)| w < *b) {
                    best = Some((h, w));
                }
            }
        }
        let (head, loss) = best.expect("at least one stage ran");
        let zeta = 1.0 - (-loss).exp();
        out.value = out.value.max(zeta);
        out.per_task.push(zeta);
        out.heads.push(head);
    }
    Ok(out)
}
