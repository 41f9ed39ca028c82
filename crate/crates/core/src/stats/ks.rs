//! Kolmogorov–Smirnov distances and asymptotic p-values.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Effective sample size used for the p-value.
    pub size: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value with the small-sample correction `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) d`.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let s = n.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(domain("no samples"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(domain("samples contain NaN"));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_a(x) - F_b(x)|` over the empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    Ok(signed_sup(&a, &b).0)
}

/// Returns `(sup |F_a - F_b|, sup (F_a - F_b)_+)` for sorted inputs.
pub(crate) fn signed_sup(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut abs, mut plus) = (0.0_f64, 0.0_f64);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let diff = i as f64 / na - j as f64 / nb;
        abs = abs.max(diff.abs());
        plus = plus.max(diff);
    }
    (abs, plus)
}

/// Two-sample test with effective sizes `size_a`, `size_b` (raw lengths when `None`).
pub fn ks_two_sample(a: &[f64], b: &[f64], sizes: Option<(f64, f64)>) -> Result<KsResult> {
    let d = ks_distance(a, b)?;
    let (na, nb) = sizes.unwrap_or((a.len() as f64, b.len() as f64));
    if !(na > 0.0 && nb > 0.0) {
        return Err(domain("effective sizes must be positive"));
    }
    let size = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        size,
        p_value: ks_p_value(d, size),
    })
}

/// One-sample test against a continuous CDF; `size` defaults to the sample count.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64, size: Option<f64>) -> Result<KsResult> {
    let v = sorted(x)?;
    let n = v.len() as f64;
    let mut d = 0.0_f64;
    for (k, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    let size = size.unwrap_or(n);
    Ok(KsResult {
        statistic: d,
        size,
        p_value: ks_p_value(d, size),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn kolmogorov_reference_points() {
        // Q(1.3581) is the 5% point, Q(1.6276) the 1% point
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-20);
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let x = [0.3, 1.0, -2.0, 1.0];
        let r = ks_two_sample(&x, &x, None).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_samples_have_distance_one() {
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn ties_are_handled_as_steps() {
        assert_eq!(ks_distance(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn one_sample_normal_is_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let r = ks_one_sample(&x, normal::cdf, None).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.2).collect();
        assert!(ks_one_sample(&shifted, normal::cdf, None).unwrap().p_value < 1e-6);
    }

    #[test]
    fn p_values_are_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut small = 0;
        for _ in 0..400 {
            let a: Vec<f64> = (0..300).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            if ks_two_sample(&a, &b, None).unwrap().p_value < 0.1 {
                small += 1;
            }
        }
        assert!((20..=65).contains(&small), "{small}");
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(ks_distance(&[], &[1.0]).is_err());
        assert!(ks_distance(&[f64::NAN], &[1.0]).is_err());
        assert!(ks_two_sample(&[1.0], &[1.0], Some((0.0, 1.0))).is_err());
    }
}
