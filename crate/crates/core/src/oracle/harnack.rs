//! Empirical Harnack constant of the killed chamber kernel against the harmonic function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::closed::km_prob;
use crate::bridge::q;
use crate::error::{domain, Result};
use crate::observables::harmonic_u_unchecked;

/// Weight compared against the killed density: `U(x)^power`. `power = 1` is the harmonic case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackWeight {
    pub power: f64,
}

impl Default for HarnackWeight {
    fn default() -> Self {
        Self { power: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub max: f64,
    pub min: f64,
    /// `max / min`
    pub ratio: f64,
    pub pairs: usize,
}

/// Density of `k` Brownian motions killed on leaving `{x_1 > ... > x_k > 0}`, from `x` to `z` in time `t`.
pub fn killed_density(x: &[f64], z: &[f64], t: f64) -> Result<f64> {
    if x.len() == 1 {
        let (a, b) = (x[0], z[0]);
        return Ok(-q(t, a, b) * (-2.0 * a * b / t).exp_m1());
    }
    let survival = km_prob(x, z, t, true)?.prob;
    let diag: f64 = x.iter().zip(z).map(|(&a, &b)| q(t, a, b)).product();
    Ok(survival * diag)
}

/// Extremes of `p_t(x, z) / (w(x) w(z))` over `pairs` independent uniform pairs in the
/// chamber of `k` points below `l`.
pub fn harnack_ratio_check(
    k: usize,
    t: f64,
    l: f64,
    pairs: usize,
    weight: HarnackWeight,
    seed: u64,
) -> Result<HarnackReport> {
    if k == 0 {
        return Err(domain("need at least one coordinate"));
    }
    if !(t > 0.0 && l > 0.0) {
        return Err(domain(format!("t and L must be positive, got t={t}, L={l}")));
    }
    if pairs < 2 {
        return Err(domain("need at least two sample pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| l * (1.0 - rng.random::<f64>())).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (mut max, mut min) = (0.0_f64, f64::INFINITY);
    let mut used = 0;
    for _ in 0..pairs {
        let x = draw(&mut rng);
        let z = draw(&mut rng);
        if x.windows(2).any(|w| w[0] == w[1]) || z.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let p = killed_density(&x, &z, t)?;
        let w = (harmonic_u_unchecked(&x) * harmonic_u_unchecked(&z)).powf(weight.power);
        let r = p / w;
        if !(r.is_finite() && r > 0.0) {
            continue;
        }
        max = max.max(r);
        min = min.min(r);
        used += 1;
    }
    if used < 2 {
        return Err(domain("degenerate sample set: fewer than two usable pairs"));
    }
    Ok(HarnackReport {
        max,
        min,
        ratio: max / min,
        pairs: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_ratio_is_bounded_and_stable() {
        let a = harnack_ratio_check(1, 1.0, 1.0, 20_000, HarnackWeight::default(), 1).unwrap();
        let b = harnack_ratio_check(1, 1.0, 1.0, 40_000, HarnackWeight::default(), 2).unwrap();
        assert!(a.ratio.is_finite() && a.ratio > 1.0);
        assert!((a.ratio / b.ratio - 1.0).abs() < 0.1, "{} vs {}", a.ratio, b.ratio);
    }

    #[test]
    fn killed_density_matches_reflected_kernel() {
        let p = killed_density(&[0.7], &[1.3], 0.5).unwrap();
        let expected = q(0.5, 0.7, 1.3) - q(0.5, 0.7, -1.3);
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn non_harmonic_weight_blows_up() {
        let good = harnack_ratio_check(2, 1.0, 1.0, 20_000, HarnackWeight::default(), 3).unwrap();
        let bad = harnack_ratio_check(2, 1.0, 1.0, 20_000, HarnackWeight { power: 2.0 }, 3).unwrap();
        assert!(bad.ratio > 100.0 * good.ratio, "{} vs {}", bad.ratio, good.ratio);
    }

    #[test]
    fn degenerate_requests_are_refused() {
        assert!(harnack_ratio_check(1, 1.0, 1.0, 1, HarnackWeight::default(), 0).is_err());
        assert!(harnack_ratio_check(1, 0.0, 1.0, 10, HarnackWeight::default(), 0).is_err());
        assert!(harnack_ratio_check(0, 1.0, 1.0, 10, HarnackWeight::default(), 0).is_err());
    }
}
