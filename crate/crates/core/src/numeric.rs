//! Log-space helpers shared by the likelihood and sampling code.

use rand::Rng;

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities.
pub fn normalize_log(values: &[f64]) -> Vec<f64> {
    let total = logsumexp(values);
    values.iter().map(|v| (v - total).exp()).collect()
}

/// Draws an index with probability proportional to `exp(log_weights)`.
///
/// Uses a single uniform draw and lowest-index resolution, so the outcome is
/// a deterministic function of the generator state.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max > f64::NEG_INFINITY, "all weights are zero");
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    h.max(0.0)
}

/// Linear-interpolation quantile of an unsorted sample (the "type 7" rule).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = (values.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logsumexp_handles_extremes() {
        assert_eq!(logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = logsumexp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = [0.2f64.ln(), f64::NEG_INFINITY, 0.8f64.ln()];
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[sample_log_categorical(&mut rng, &w)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[2] as f64 / 20_000.0 - 0.8).abs() < 0.02);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&mut [4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert_eq!(quantile(&mut [3.0, 1.0], 0.5), 2.0);
    }
}
