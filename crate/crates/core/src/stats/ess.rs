//! Autocorrelation and effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Normalized autocorrelation `rho_k` for `k = 0..n`, computed by zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Sum of autocorrelations `tau = sum_{k>=1} rho_k`, truncated by the initial positive
/// sequence of paired sums and made monotone.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let rho = autocorrelation(x);
    let n = rho.len();
    if n < 3 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if !(pair > 0.0) {
            break;
        }
        let pair = pair.min(prev);
        total += pair;
        prev = pair;
        m += 1;
    }
    // the pairs start at rho_0 = 1
    (total - 1.0).max(0.0)
}

/// `N / (2 tau + 1)`, capped at `N`. A constant series counts as `N` independent draws.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 3 {
        return n;
    }
    let tau = integrated_autocorrelation(x);
    (n / (2.0 * tau + 1.0)).min(n)
}

/// Sum of per-chain effective sample sizes.
pub fn pooled_ess(chains: &[&[f64]]) -> f64 {
    chains.iter().map(|c| effective_sample_size(c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + z;
                x
            })
            .collect()
    }

    #[test]
    fn white_noise_is_nearly_independent() {
        let x = ar1(0.0, 20_000, 1);
        let ess = effective_sample_size(&x);
        assert!(ess > 17_000.0 && ess <= 20_000.0, "{ess}");
    }

    #[test]
    fn ar1_matches_the_known_integrated_time() {
        // 2 tau + 1 = (1 + phi) / (1 - phi)
        let phi = 0.8;
        let x = ar1(phi, 200_000, 2);
        let ratio = x.len() as f64 / effective_sample_size(&x);
        let expected = (1.0 + phi) / (1.0 - phi);
        assert!((ratio - expected).abs() < 0.1 * expected, "{ratio} vs {expected}");
    }

    #[test]
    fn constant_series_counts_fully() {
        assert_eq!(effective_sample_size(&[2.0; 50]), 50.0);
    }

    #[test]
    fn autocorrelation_starts_at_one() {
        let rho = autocorrelation(&ar1(0.5, 1000, 3));
        assert!((rho[0] - 1.0).abs() < 1e-12);
        assert!((rho[1] - 0.5).abs() < 0.1);
    }
}
