//! Brownian kernel, exact discrete bridge sampling and trapezoid areas.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::path::Path;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Heat kernel `q_t(x, y) = (2 pi t)^(-1/2) exp(-(y - x)^2 / (2t))`, the mass of the bridge measure.
pub fn kernel_q(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("kernel duration must be positive, got {t}")));
    }
    Ok(q(t, x, y))
}

#[inline]
pub(crate) fn q(t: f64, x: f64, y: f64) -> f64 {
    let d = y - x;
    INV_SQRT_2PI / t.sqrt() * (-d * d / (2.0 * t)).exp()
}

/// Exact sample of the discrete Brownian bridge from `(left, x)` to `(right, y)` at the nodes.
pub fn sample_bridge<R: Rng + ?Sized>(grid: &TimeGrid, x: f64, y: f64, rng: &mut R) -> Path {
    let mut values = vec![0.0; grid.nodes()];
    fill_bridge(grid.dt(), x, y, &mut values, rng);
    Path::new(values).expect("bridge values are finite")
}

/// Fills `out[0..=k]` with a bridge of `k = out.len() - 1` steps of variance `dt` each,
/// drawing node by node from the Markov conditional given the right pin.
pub(crate) fn fill_bridge<R: Rng + ?Sized>(dt: f64, x: f64, y: f64, out: &mut [f64], rng: &mut R) {
    let k = out.len() - 1;
    out[0] = x;
    let mut prev = x;
    for j in 1..k {
        let remaining = (k - j + 1) as f64;
        let mean = prev + (y - prev) / remaining;
        let sd = (dt * (remaining - 1.0) / remaining).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        prev = mean + sd * z;
        out[j] = prev;
    }
    out[k] = y;
}

/// Trapezoid approximation of `int h(t) X(t) dt`; `weight` defaults to `h = 1`.
pub fn area(path: &Path, grid: &TimeGrid, weight: Option<&Path>) -> Result<f64> {
    if path.len() != grid.nodes() {
        return Err(Error::Shape {
            expected: grid.nodes(),
            got: path.len(),
        });
    }
    if let Some(h) = weight {
        if h.len() != grid.nodes() {
            return Err(Error::Shape {
                expected: grid.nodes(),
                got: h.len(),
            });
        }
    }
    let w = grid.trapezoid_weights();
    let total = (0..grid.nodes())
        .map(|j| w[j] * path[j] * weight.map_or(1.0, |h| h[j]))
        .sum();
    Ok(total)
}

/// Probability that a Brownian bridge over `dt` from `a > 0` to `b > 0` stays positive.
#[inline]
pub fn wall_survival(a: f64, b: f64, dt: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    -(-2.0 * a * b / dt).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_reference_values() {
        assert!((kernel_q(1.0, 0.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((kernel_q(2.0, 0.0, 0.0).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-15);
        // exp(-1/2)/sqrt(2 pi) evaluated independently
        assert!((kernel_q(1.0, 0.0, 1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert!(kernel_q(0.0, 0.0, 0.0).is_err());
        assert!(kernel_q(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kernel_is_symmetric() {
        assert_eq!(kernel_q(0.7, 1.3, -0.4).unwrap(), kernel_q(0.7, -0.4, 1.3).unwrap());
    }

    #[test]
    fn area_examples() {
        let g = TimeGrid::new(-1.0, 1.0, 7).unwrap();
        assert!((area(&Path::constant(&g, 3.0), &g, None).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(area(&Path::constant(&g, 0.0), &g, None).unwrap(), 0.0);
        for m in [1, 2, 5, 33] {
            let g = TimeGrid::new(0.0, 1.0, m).unwrap();
            let p = Path::from_fn(&g, |t| t);
            assert!((area(&p, &g, None).unwrap() - 0.5).abs() < 1e-12);
        }
        let g2 = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(area(&Path::new(vec![1.0; 3]).unwrap(), &g2, None).is_err());
    }

    #[test]
    fn bridge_is_pinned() {
        let g = TimeGrid::new(0.0, 2.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_bridge(&g, 0.0, 1.0, &mut rng);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[10], 1.0);
    }

    #[test]
    fn wall_survival_limits() {
        assert_eq!(wall_survival(0.0, 1.0, 1.0), 0.0);
        assert!((wall_survival(1.0, 1.0, 2.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(wall_survival(1.0, 1.0, 1e-6) > 1.0 - 1e-12);
    }
}
