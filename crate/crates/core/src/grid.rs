use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform discretization `t_j = left + j * dt`, `j = 0..=steps`, shared by every line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub left: f64,
    pub right: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(left: f64, right: f64, steps: usize) -> Result<Self> {
        let grid = Self { left, right, steps };
        grid.validate()?;
        Ok(grid)
    }

    /// Symmetric interval `[-half_width, half_width]` with step `dt`.
    pub fn symmetric(half_width: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(domain("time step must be positive"));
        }
        let steps = (2.0 * half_width / dt).round() as usize;
        Self::new(-half_width, half_width, steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.left.is_finite() && self.right.is_finite()) {
            return Err(domain("grid endpoints must be finite"));
        }
        if !(self.right > self.left) {
            return Err(domain(format!(
                "grid needs right > left, got [{}, {}]",
                self.left, self.right
            )));
        }
        if self.steps == 0 {
            return Err(domain("grid needs at least one step"));
        }
        Ok(())
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.right - self.left) / self.steps as f64
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.right
        } else {
            self.left + j as f64 * self.dt()
        }
    }

    pub fn node_times(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.time(j)).collect()
    }

    pub fn duration(&self) -> f64 {
        self.right - self.left
    }

    /// Index of the node at time `t`, if `t` is a node up to rounding.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.left) / self.dt();
        let j = x.round();
        if j < 0.0 || j > self.steps as f64 || (x - j).abs() > 1e-9 {
            None
        } else {
            Some(j as usize)
        }
    }

    /// Inclusive node range covering the window `[lo, hi]`; both ends must be nodes.
    pub fn window(&self, lo: f64, hi: f64) -> Result<std::ops::RangeInclusive<usize>> {
        if lo > hi {
            return Err(domain(format!("empty window [{lo}, {hi}]")));
        }
        let a = self
            .node_index(lo)
            .ok_or_else(|| domain(format!("window start {lo} is not a grid node")))?;
        let b = self
            .node_index(hi)
            .ok_or_else(|| domain(format!("window end {hi} is not a grid node")))?;
        Ok(a..=b)
    }

    /// True when every node of `self` is also a node of `other`.
    pub fn is_subgrid_of(&self, other: &TimeGrid) -> bool {
        (0..self.nodes()).all(|j| other.node_index(self.time(j)).is_some())
    }

    /// The same grid relabelled by `t -> t - shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            left: self.left - shift,
            right: self.right - shift,
            steps: self.steps,
        }
    }

    /// Trapezoid quadrature weights: `dt/2` at the two ends, `dt` inside.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.nodes()];
        w[0] = 0.5 * dt;
        w[self.steps] = 0.5 * dt;
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_times_are_increasing_and_hit_both_ends() {
        let g = TimeGrid::new(-1.0, 1.0, 40).unwrap();
        let t = g.node_times();
        assert_eq!(t[0], -1.0);
        assert_eq!(t[40], 1.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((g.dt() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn windows_and_subgrids() {
        let g = TimeGrid::new(-1.0, 1.0, 40).unwrap();
        assert_eq!(g.window(-0.5, 0.5).unwrap(), 10..=30);
        assert!(g.window(-0.51, 0.5).is_err());
        let coarse = TimeGrid::new(-1.0, 1.0, 10).unwrap();
        assert!(coarse.is_subgrid_of(&g));
        assert!(!g.is_subgrid_of(&coarse));
        assert_eq!(g.node_index(0.0), Some(20));
    }

    #[test]
    fn shift_relabels_times_only() {
        let g = TimeGrid::new(-3.0, 3.0, 120).unwrap();
        let s = g.shifted(0.5);
        assert_eq!(s.dt(), g.dt());
        assert_eq!(s.node_index(-0.5), g.node_index(0.0));
    }
}
