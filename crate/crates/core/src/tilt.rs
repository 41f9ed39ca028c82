//! Per-line area tilts and the mean shift they induce on a Gaussian bridge.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::path::Path;

/// Tilt strength of one line: a constant or one non-negative weight per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TiltProfile {
    Constant(f64),
    Nodes(Vec<f64>),
}

impl TiltProfile {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            TiltProfile::Constant(c) => *c,
            TiltProfile::Nodes(v) => v[j],
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        match self {
            TiltProfile::Constant(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(domain(format!("tilt must be a non-negative number, got {c}")));
                }
            }
            TiltProfile::Nodes(v) => {
                if v.len() != grid.nodes() {
                    return Err(Error::Shape {
                        expected: grid.nodes(),
                        got: v.len(),
                    });
                }
                if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(domain(format!("tilt weights must be non-negative, got {bad}")));
                }
            }
        }
        Ok(())
    }

    pub fn node_values(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.nodes()).map(|j| self.at(j)).collect()
    }
}

/// Area tilts `rho_i` for every line of the stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TiltSchedule {
    /// `rho_i = a * lambda^(i-1)`, `i = 1` being the top line.
    Geometric { a: f64, lambda: f64 },
    General { rhos: Vec<TiltProfile> },
}

impl TiltSchedule {
    pub fn geometric(a: f64, lambda: f64) -> Result<Self> {
        let s = TiltSchedule::Geometric { a, lambda };
        s.check_parameters()?;
        Ok(s)
    }

    /// Untilted stack of `n` lines.
    pub fn zero(n: usize) -> Self {
        TiltSchedule::General {
            rhos: vec![TiltProfile::Constant(0.0); n],
        }
    }

    pub fn constants(rhos: &[f64]) -> Self {
        TiltSchedule::General {
            rhos: rhos.iter().map(|&r| TiltProfile::Constant(r)).collect(),
        }
    }

    fn check_parameters(&self) -> Result<()> {
        if let TiltSchedule::Geometric { a, lambda } = *self {
            if !(a > 0.0 && a.is_finite()) {
                return Err(domain(format!("geometric tilt needs a > 0, got {a}")));
            }
            if !(lambda > 1.0 && lambda.is_finite()) {
                return Err(domain(format!("geometric tilt needs lambda > 1, got {lambda}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self, n: usize, grid: &TimeGrid) -> Result<()> {
        self.check_parameters()?;
        if let TiltSchedule::General { rhos } = self {
            if rhos.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: rhos.len(),
                });
            }
            for r in rhos {
                r.validate(grid)?;
            }
        }
        Ok(())
    }

    /// Tilt of line `i` (0 = top) at node `j`.
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        match self {
            TiltSchedule::Geometric { a, lambda } => a * lambda.powi(i as i32),
            TiltSchedule::General { rhos } => rhos[i].at(j),
        }
    }

    pub fn line_profile(&self, i: usize) -> TiltProfile {
        match self {
            TiltSchedule::Geometric { .. } => TiltProfile::Constant(self.rho(i, 0)),
            TiltSchedule::General { rhos } => rhos[i].clone(),
        }
    }

    pub fn line_weights(&self, i: usize, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.nodes()).map(|j| self.rho(i, j)).collect()
    }
}

/// Solves the tridiagonal system `(1/dt) tridiag(-1, 2, -1) m = rhs` with `m = 0` at both
/// pinned ends. `rhs` holds the interior entries only.
pub(crate) fn solve_bridge_precision(dt: f64, rhs: &[f64], out: &mut Vec<f64>) {
    let k = rhs.len();
    out.clear();
    out.resize(k, 0.0);
    if k == 0 {
        return;
    }
    // Thomas algorithm on tridiag(-1, 2, -1) after scaling rhs by dt.
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    let mut denom = 2.0;
    c[0] = -1.0 / denom;
    d[0] = rhs[0] * dt / denom;
    for j in 1..k {
        denom = 2.0 + c[j - 1];
        c[j] = -1.0 / denom;
        d[j] = (rhs[j] * dt + d[j - 1]) / denom;
    }
    out[k - 1] = d[k - 1];
    for j in (0..k - 1).rev() {
        out[j] = d[j] - c[j] * out[j + 1];
    }
}

/// Mean shift of a bridge pinned at `interior.len() + 1` intervals apart when tilted by
/// `exp(-sum_j rho_j * dt * x_j)` over the interior nodes.
pub(crate) fn block_shift(dt: f64, rho_interior: &[f64], out: &mut Vec<f64>) {
    let rhs: Vec<f64> = rho_interior.iter().map(|r| -r * dt).collect();
    solve_bridge_precision(dt, &rhs, out);
}

/// Deterministic shift `m` with `law(bridge tilted by exp(-rho * area)) = law(bridge + m)`.
///
/// The area is the trapezoid area on `grid`; both ends are pinned, so `m` vanishes there.
pub fn tilt_shift(grid: &TimeGrid, rho: &TiltProfile) -> Result<Path> {
    rho.validate(grid)?;
    let dt = grid.dt();
    let interior: Vec<f64> = (1..grid.steps).map(|j| rho.at(j)).collect();
    let mut m = Vec::new();
    block_shift(dt, &interior, &mut m);
    let mut values = Vec::with_capacity(grid.nodes());
    values.push(0.0);
    values.extend(m);
    values.push(0.0);
    Path::new(values)
}
