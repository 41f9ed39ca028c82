use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Endpoint potential `nu_i` / `eta_i` of a free boundary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointPotential {
    #[default]
    Zero,
    /// `slope * x`
    Linear { slope: f64 },
    /// `stiffness/2 * (x - center)^2`
    Quadratic { center: f64, stiffness: f64 },
}

impl EndpointPotential {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            EndpointPotential::Zero => 0.0,
            EndpointPotential::Linear { slope } => slope * x,
            EndpointPotential::Quadratic { center, stiffness } => {
                0.5 * stiffness * (x - center) * (x - center)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, EndpointPotential::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// Pinned endpoint vectors, top line first.
    Fixed { left: Vec<f64>, right: Vec<f64> },
    /// Every line pinned at the wall at both ends.
    Zero,
    /// Endpoints integrated over the chamber with weights `exp(-nu(x))`, `exp(-eta(y))`.
    /// Empty lists mean identically zero potentials.
    Free {
        #[serde(default)]
        nu: Vec<EndpointPotential>,
        #[serde(default)]
        eta: Vec<EndpointPotential>,
    },
}

impl BoundaryCondition {
    pub fn free() -> Self {
        BoundaryCondition::Free {
            nu: Vec::new(),
            eta: Vec::new(),
        }
    }

    pub fn fixed(left: &[f64], right: &[f64]) -> Self {
        BoundaryCondition::Fixed {
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, BoundaryCondition::Free { .. })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            BoundaryCondition::Fixed { left, right } => {
                for v in [left, right] {
                    if v.len() != n {
                        return Err(Error::Shape {
                            expected: n,
                            got: v.len(),
                        });
                    }
                    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        return Err(domain("fixed boundary values must be finite and >= 0"));
                    }
                    if v.windows(2).any(|w| !(w[0] >= w[1])) {
                        return Err(domain("fixed boundary values must be ordered top to bottom"));
                    }
                }
            }
            BoundaryCondition::Zero => {}
            BoundaryCondition::Free { nu, eta } => {
                for v in [nu, eta] {
                    if !v.is_empty() && v.len() != n {
                        return Err(Error::Shape {
                            expected: n,
                            got: v.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Pinned values of line `i` at (left, right), if the boundary pins them.
    pub fn pins(&self, i: usize) -> Option<(f64, f64)> {
        match self {
            BoundaryCondition::Fixed { left, right } => Some((left[i], right[i])),
            BoundaryCondition::Zero => Some((0.0, 0.0)),
            BoundaryCondition::Free { .. } => None,
        }
    }

    pub fn nu(&self, i: usize) -> EndpointPotential {
        match self {
            BoundaryCondition::Free { nu, .. } => nu.get(i).copied().unwrap_or_default(),
            _ => EndpointPotential::Zero,
        }
    }

    pub fn eta(&self, i: usize) -> EndpointPotential {
        match self {
            BoundaryCondition::Free { eta, .. } => eta.get(i).copied().unwrap_or_default(),
            _ => EndpointPotential::Zero,
        }
    }
}
