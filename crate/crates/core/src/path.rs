use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;

/// Node values of one line on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(Vec<f64>);

impl Path {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("path value at node {j} is not finite")));
        }
        Ok(Self(values))
    }

    /// Checks the length against `grid` as well.
    pub fn on_grid(grid: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::Shape {
                expected: grid.nodes(),
                got: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Self {
        Self(vec![c; grid.nodes()])
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self(grid.node_times().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Nodewise `self <= other`.
    pub fn below(&self, other: &Path) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl std::ops::Index<usize> for Path {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// An ordered stack of lines (index 0 is the top line) between a floor and a ceiling.
///
/// A missing floor is the hard wall at zero; a missing ceiling is `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub grid: TimeGrid,
    pub lines: Vec<Path>,
    pub floor: Option<Path>,
    pub ceiling: Option<Path>,
}

impl Ensemble {
    pub fn new(grid: TimeGrid, lines: Vec<Path>) -> Result<Self> {
        for line in &lines {
            if line.len() != grid.nodes() {
                return Err(Error::Shape {
                    expected: grid.nodes(),
                    got: line.len(),
                });
            }
        }
        Ok(Self {
            grid,
            lines,
            floor: None,
            ceiling: None,
        })
    }

    pub fn with_floor(mut self, floor: Path) -> Result<Self> {
        if floor.len() != self.grid.nodes() {
            return Err(Error::Shape {
                expected: self.grid.nodes(),
                got: floor.len(),
            });
        }
        self.floor = Some(floor);
        Ok(self)
    }

    pub fn with_ceiling(mut self, ceiling: Path) -> Result<Self> {
        if ceiling.len() != self.grid.nodes() {
            return Err(Error::Shape {
                expected: self.grid.nodes(),
                got: ceiling.len(),
            });
        }
        self.ceiling = Some(ceiling);
        Ok(self)
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn floor_at(&self, j: usize) -> f64 {
        self.floor.as_ref().map_or(0.0, |f| f[j])
    }

    pub fn ceiling_at(&self, j: usize) -> f64 {
        self.ceiling.as_ref().map_or(f64::INFINITY, |c| c[j])
    }

    /// Chamber test at grid nodes.
    ///
    /// Interior nodes need `ceiling >= X_1 > X_2 > ... > X_n >= floor >= 0`.
    /// End nodes only need the weak version unless `strict_endpoints` is set.
    pub fn check_admissible(&self, strict_endpoints: bool) -> bool {
        let last = self.grid.steps;
        (0..self.grid.nodes()).all(|j| {
            let strict = strict_endpoints || (j != 0 && j != last);
            self.admissible_at(j, strict)
        })
    }

    fn admissible_at(&self, j: usize, strict: bool) -> bool {
        let floor = self.floor_at(j);
        let ceiling = self.ceiling_at(j);
        if !(floor >= 0.0 && floor <= ceiling) {
            return false;
        }
        let mut above = ceiling;
        for (i, line) in self.lines.iter().enumerate() {
            let x = line[j];
            // the ceiling and floor are touched weakly, neighbouring lines strictly
            let ok_above = if i == 0 { x <= above } else if strict { x < above } else { x <= above };
            if !ok_above {
                return false;
            }
            above = x;
        }
        self.lines.last().is_none_or(|l| l[j] >= floor)
    }

    /// Nodewise `self ≼ other` over every line.
    pub fn dominated_by(&self, other: &Ensemble) -> bool {
        self.lines.len() == other.lines.len()
            && self.lines.iter().zip(&other.lines).all(|(a, b)| a.below(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(-1.0, 1.0, 20).unwrap()
    }

    fn constants(vals: &[f64]) -> Ensemble {
        let g = grid();
        Ensemble::new(g, vals.iter().map(|&c| Path::constant(&g, c)).collect()).unwrap()
    }

    #[test]
    fn ordered_constant_lines_are_admissible() {
        assert!(constants(&[3.0, 2.0, 1.0]).check_admissible(true));
    }

    #[test]
    fn ties_between_lines_are_rejected() {
        assert!(!constants(&[2.0, 2.0]).check_admissible(false));
    }

    #[test]
    fn zero_endpoints_pass_only_with_weak_endpoint_rule() {
        let g = grid();
        let mk = |h: f64| {
            let mut v = vec![h; g.nodes()];
            v[0] = 0.0;
            v[g.steps] = 0.0;
            Path::new(v).unwrap()
        };
        let e = Ensemble::new(g, vec![mk(2.0), mk(1.0)]).unwrap();
        assert!(e.check_admissible(false));
        assert!(!e.check_admissible(true));
    }

    #[test]
    fn floor_and_ceiling_are_enforced() {
        let g = grid();
        let e = constants(&[2.0, 1.0]);
        assert!(!e.clone().with_floor(Path::constant(&g, 1.5)).unwrap().check_admissible(false));
        assert!(!e.clone().with_ceiling(Path::constant(&g, 1.5)).unwrap().check_admissible(false));
        assert!(e.with_floor(Path::constant(&g, 0.5)).unwrap().check_admissible(false));
    }

    #[test]
    fn negative_line_is_rejected() {
        assert!(!constants(&[1.0, -0.1]).check_admissible(false));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(Path::new(vec![0.0, f64::NAN]).is_err());
        assert!(Path::on_grid(&grid(), vec![0.0; 3]).is_err());
    }
}
