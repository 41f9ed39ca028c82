//! Standard normal CDF, quantiles and inverse-CDF sampling of truncated normals.

use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - cdf(x)` without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Inverse of [`sf`].
pub fn sf_inverse(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    SQRT_2 * erfc_inv(2.0 * q)
}

/// Quantile at level `u` of the standard normal restricted to `[a, b]`.
///
/// The result is non-decreasing in `u`, `a` and `b` up to rounding and always lies in `[a, b]`.
pub fn truncated_standard_quantile(a: f64, b: f64, u: f64) -> f64 {
    debug_assert!(a <= b);
    if b - a < 1e-9 {
        // the density is flat on such a window
        return (a + u * (b - a)).clamp(a, b);
    }
    let z = if a >= 0.0 {
        upper_side_quantile(a, b, u)
    } else if b <= 0.0 {
        -upper_side_quantile(-b, -a, 1.0 - u)
    } else {
        let pa = cdf(a);
        let pb = cdf(b);
        quantile(pa + u * (pb - pa))
    };
    z.clamp(a, b)
}

// Window inside [0, inf): work with upper-tail probabilities.
fn upper_side_quantile(a: f64, b: f64, u: f64) -> f64 {
    let sa = sf(a);
    let sb = sf(b);
    if sa > 1e-280 && sa - sb > 1e-14 * sa {
        return sf_inverse(sa - u * (sa - sb));
    }
    // Far tail: the truncated law is an exponential with rate `a` to leading order.
    let width = b - a;
    let tail = if width.is_finite() {
        -(-a * width).exp_m1()
    } else {
        1.0
    };
    a - (-u * tail).ln_1p() / a
}

/// `mean + sd * Z` with `Z` standard normal truncated to `((lo-mean)/sd, (hi-mean)/sd)`.
pub fn truncated_quantile(mean: f64, sd: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    (mean + sd * truncated_standard_quantile(a, b, u)).clamp(lo, hi)
}
