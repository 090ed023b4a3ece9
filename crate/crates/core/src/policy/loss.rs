pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax with max-subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let lse = logsumexp(x);
    x.iter().map(|v| v - lse).collect()
}

/// `-log softmax_a(x) = logsumexp(x) - x_a`; clamped at zero against
/// round-off when `x_a` dominates.
pub fn log_softmax_loss(logits: &[f64], action: usize) -> f64 {
    (logsumexp(logits) - logits[action]).max(0.0)
}

/// Loss and its gradient `softmax(x) - e_a` w.r.t. the logits.
pub(crate) fn loss_with_logit_grad(logits: &[f64], action: usize) -> (f64, Vec<f64>) {
    let mut g = softmax(logits);
    g[action] -= 1.0;
    (log_softmax_loss(logits, action), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let p = softmax(&[0.0; 5]);
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        for a in 0..5 {
            assert!((log_softmax_loss(&[3.0; 5], a) - 5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit() {
        let p = softmax(&[10.0, 0.0, 0.0]);
        assert!(p[0] > 0.9999);
        // log(1 + 2e^-10) evaluated directly
        let expected = (1.0 + 2.0 * (-10f64).exp()).ln();
        assert!((log_softmax_loss(&[10.0, 0.0, 0.0], 0) - expected).abs() < 1e-15);
        assert!((expected - 9.0800e-5).abs() < 1e-8);
    }

    #[test]
    fn stable_for_huge_logits() {
        let p = softmax(&[1000.0, -1000.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        assert!((log_softmax_loss(&[1000.0, -1000.0], 1) - 2000.0).abs() < 1e-9);
        let lp = log_softmax(&[1000.0, 999.0]);
        assert!((lp[1] - (-1.0 - (1.0 + (-1f64).exp()).ln())).abs() < 1e-12);
    }
}
