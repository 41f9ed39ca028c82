//! Reflection-principle and Karlin–McGregor probabilities for untilted bridges.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Pivot ratio above which a determinant is flagged as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e10;

/// Probability that a Brownian bridge from `x` to `y` over duration `t` stays positive.
pub fn reflection_positive_prob(x: f64, y: f64, t: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && t > 0.0) {
        return Err(domain(format!(
            "reflection probability needs positive inputs, got x={x}, y={y}, t={t}"
        )));
    }
    Ok(-(-2.0 * x * y / t).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmProb {
    pub prob: f64,
    /// Ratio of the largest to the smallest pivot of the row-scaled matrix.
    pub condition_bound: f64,
    pub ill_conditioned: bool,
}

/// Probability that independent bridges from `x` to `y` over duration `t` never meet
/// (and stay positive when `wall` is set). Both vectors are ordered top first.
pub fn km_prob(x: &[f64], y: &[f64], t: f64, wall: bool) -> Result<KmProb> {
    let k = x.len();
    if k == 0 || y.len() != k {
        return Err(domain("start and end vectors must be non-empty and of equal length"));
    }
    if !(t > 0.0) {
        return Err(domain(format!("duration must be positive, got {t}")));
    }
    for v in [x, y] {
        if v.iter().any(|a| !a.is_finite()) {
            return Err(domain("points must be finite"));
        }
        if wall && v.iter().any(|a| !(*a > 0.0)) {
            return Err(domain("points must lie above the wall"));
        }
        if v.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(domain("points must be strictly ordered top first"));
        }
    }
    let mut a = vec![0.0; k * k];
    for i in 0..k {
        let di = y[i] - x[i];
        for j in 0..k {
            let dj = y[j] - x[i];
            let mut v = (-(dj * dj - di * di) / (2.0 * t)).exp();
            if wall {
                v *= -(-2.0 * x[i] * y[j] / t).exp_m1();
            }
            a[i * k + j] = v;
        }
    }
    let (det, condition_bound) = determinant(&mut a, k);
    Ok(KmProb {
        prob: det,
        condition_bound,
        ill_conditioned: condition_bound > CONDITION_WARNING,
    })
}

/// Determinant by LU with full pivoting; returns `(det, max|pivot| / min|pivot|)`.
/// The matrix is overwritten.
pub fn determinant(a: &mut [f64], k: usize) -> (f64, f64) {
    let mut det = 1.0;
    let mut pmax = 0.0_f64;
    let mut pmin = f64::INFINITY;
    for c in 0..k {
        let (mut pr, mut pc, mut best) = (c, c, -1.0);
        for r in c..k {
            for s in c..k {
                let v = a[r * k + s].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = s;
                }
            }
        }
        if best == 0.0 {
            return (0.0, f64::INFINITY);
        }
        if pr != c {
            for s in 0..k {
                a.swap(pr * k + s, c * k + s);
            }
            det = -det;
        }
        if pc != c {
            for r in 0..k {
                a.swap(r * k + pc, r * k + c);
            }
            det = -det;
        }
        let p = a[c * k + c];
        det *= p;
        pmax = pmax.max(p.abs());
        pmin = pmin.min(p.abs());
        for r in c + 1..k {
            let f = a[r * k + c] / p;
            if f != 0.0 {
                for s in c + 1..k {
                    a[r * k + s] -= f * a[c * k + s];
                }
            }
        }
    }
    (det, pmax / pmin)
}
