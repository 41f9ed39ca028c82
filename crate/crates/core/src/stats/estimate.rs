use serde::{Deserialize, Serialize};

use super::ess::effective_sample_size;
use crate::error::{domain, Result};
use crate::normal;

pub const DEFAULT_LEVEL: f64 = 0.99;

/// Tail counts below this make a proportion interval unreliable; such estimates are flagged.
pub const MIN_TAIL_COUNT: f64 = 10.0;

/// Point estimate with an autocorrelation-corrected confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub estimate: f64,
    pub se: f64,
    pub ess: f64,
    /// Raw number of samples.
    pub samples: usize,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// Set when too few effective events support a proportion estimate.
    pub widened: bool,
}

/// Two-sided normal quantile for confidence `level`.
pub fn z_for(level: f64) -> f64 {
    normal::sf_inverse((1.0 - level) / 2.0)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

impl EstimateCI {
    pub fn z(&self) -> f64 {
        z_for(self.level)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Whether the two estimates differ by less than `z * sqrt(se1^2 + se2^2)`.
    pub fn compatible(&self, other: &EstimateCI) -> bool {
        let z = self.z().max(other.z());
        (self.estimate - other.estimate).abs() <= z * self.se.hypot(other.se)
    }

    /// Relative standard error; infinite for a zero estimate with positive error.
    pub fn relative_se(&self) -> f64 {
        if self.se == 0.0 {
            0.0
        } else {
            self.se / self.estimate.abs()
        }
    }
}

/// Mean with standard error `sd / sqrt(ESS)`.
pub fn mean_ci(x: &[f64], level: f64) -> Result<EstimateCI> {
    check_level(level)?;
    if x.is_empty() {
        return Err(domain("no samples"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("samples must be finite"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let ess = effective_sample_size(x);
    let se = (var / ess).sqrt();
    let z = z_for(level);
    Ok(EstimateCI {
        estimate: mean,
        se,
        ess,
        samples: x.len(),
        level,
        lower: mean - z * se,
        upper: mean + z * se,
        widened: false,
    })
}

/// Frequency of `hits` with a Wilson interval whose sample size is the ESS of the
/// indicator series.
pub fn proportion_ci(hits: &[bool], level: f64) -> Result<EstimateCI> {
    check_level(level)?;
    if hits.is_empty() {
        return Err(domain("no samples"));
    }
    let ind: Vec<f64> = hits.iter().map(|&h| h as u8 as f64).collect();
    let n = ind.len() as f64;
    let p = ind.iter().sum::<f64>() / n;
    let ess = effective_sample_size(&ind);
    let z = z_for(level);
    let (lower, upper) = wilson(p, ess, z);
    let events = p.min(1.0 - p) * ess;
    Ok(EstimateCI {
        estimate: p,
        se: (p * (1.0 - p) / ess).sqrt(),
        ess,
        samples: hits.len(),
        level,
        lower,
        upper,
        widened: events < MIN_TAIL_COUNT,
    })
}

/// Wilson score interval for proportion `p` observed on `n` trials.
pub fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn z_values() {
        assert!((z_for(0.99) - 2.575_829_303_548_9).abs() < 1e-9);
        assert!((z_for(0.95) - 1.959_963_984_540_05).abs() < 1e-9);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let ci = mean_ci(&[0.0; 200], DEFAULT_LEVEL).unwrap();
        assert_eq!((ci.estimate, ci.se, ci.lower, ci.upper), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mean_ci_covers_the_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut covered = 0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..400).map(|_| rng.sample::<f64, _>(StandardNormal) + 1.0).collect();
            if mean_ci(&x, 0.95).unwrap().contains(1.0) {
                covered += 1;
            }
        }
        assert!((180..=198).contains(&covered), "{covered}");
    }

    #[test]
    fn wilson_known_values() {
        // 5 of 10 at 95%
        let (lo, hi) = wilson(0.5, 10.0, z_for(0.95));
        assert!((lo - 0.236_593).abs() < 1e-5 && (hi - 0.763_407).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson(0.0, 100.0, 2.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn rare_events_are_flagged() {
        let mut hits = vec![false; 1000];
        hits[10] = true;
        let ci = proportion_ci(&hits, DEFAULT_LEVEL).unwrap();
        assert!(ci.widened);
        assert!(ci.upper > 0.001);
        let all = proportion_ci(&[true; 50], DEFAULT_LEVEL).unwrap();
        assert_eq!(all.estimate, 1.0);
        assert!(all.widened);
    }

    #[test]
    fn bad_inputs() {
        assert!(mean_ci(&[], 0.9).is_err());
        assert!(mean_ci(&[1.0, f64::NAN], 0.9).is_err());
        assert!(mean_ci(&[1.0], 1.0).is_err());
        assert!(proportion_ci(&[], 0.9).is_err());
    }
}
