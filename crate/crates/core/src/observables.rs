//! Path statistics: curved maximum, minimal gap, modulus of continuity, the chamber
//! harmonic function and excursion thresholds.

use crate::error::{domain, Result};
use crate::grid::TimeGrid;
use crate::path::{Ensemble, Path};

/// `max_j (X(t_j) - |t_j|^alpha)_+` over the grid nodes.
pub fn curved_max(path: &Path, grid: &TimeGrid, alpha: f64) -> Result<f64> {
    curved_max_on(path, grid, alpha, 0..=grid.steps)
}

/// [`curved_max`] restricted to a node range.
pub fn curved_max_on(
    path: &Path,
    grid: &TimeGrid,
    alpha: f64,
    nodes: std::ops::RangeInclusive<usize>,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    if grid.left < 0.0 && grid.right > 0.0 && grid.node_index(0.0).is_none() {
        return Err(domain("the grid must contain t = 0 as a node"));
    }
    Ok(curved_max_values(path.values(), grid, alpha, nodes))
}

pub(crate) fn curved_max_values(
    values: &[f64],
    grid: &TimeGrid,
    alpha: f64,
    nodes: std::ops::RangeInclusive<usize>,
) -> f64 {
    nodes
        .map(|j| values[j] - grid.time(j).abs().powf(alpha))
        .fold(0.0, f64::max)
}

/// Smallest adjacent-line gap over the window `[-gamma, gamma]`.
pub fn min_gap(ensemble: &Ensemble, gamma: f64) -> Result<f64> {
    if ensemble.n_lines() < 2 {
        return Err(domain("min_gap needs at least two lines"));
    }
    let nodes = ensemble.grid.window(-gamma, gamma)?;
    Ok(min_gap_values(
        &ensemble.lines.iter().map(|l| l.values()).collect::<Vec<_>>(),
        nodes,
    ))
}

pub(crate) fn min_gap_values(lines: &[&[f64]], nodes: std::ops::RangeInclusive<usize>) -> f64 {
    let mut g = f64::INFINITY;
    for pair in lines.windows(2) {
        for j in nodes.clone() {
            g = g.min((pair[0][j] - pair[1][j]).abs());
        }
    }
    g
}

/// Largest `|X_i(s) - X_i(t)|` over lines and window nodes with `|s - t| < delta`.
pub fn modulus(ensemble: &Ensemble, gamma: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let nodes = ensemble.grid.window(-gamma, gamma)?;
    let lines: Vec<&[f64]> = ensemble.lines.iter().map(|l| l.values()).collect();
    Ok(modulus_values(&lines, &ensemble.grid, nodes, delta))
}

pub(crate) fn modulus_values(
    lines: &[&[f64]],
    grid: &TimeGrid,
    nodes: std::ops::RangeInclusive<usize>,
    delta: f64,
) -> f64 {
    let dt = grid.dt();
    // node pairs with (k * dt) < delta, guarding against rounding at the boundary
    let mut lag = (delta / dt).ceil() as usize;
    while lag > 0 && lag as f64 * dt >= delta * (1.0 - 1e-12) {
        lag -= 1;
    }
    let (lo, hi) = (*nodes.start(), *nodes.end());
    let mut best = 0.0_f64;
    for line in lines {
        for s in lo..=hi {
            let end = hi.min(s + lag);
            for t in s + 1..=end {
                best = best.max((line[s] - line[t]).abs());
            }
        }
    }
    best
}

/// `prod_j x_j * prod_{i<j} (x_i^2 - x_j^2)`, positive harmonic in the chamber with wall.
pub fn harmonic_u(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(domain("harmonic_u needs at least one coordinate"));
    }
    if x.iter().any(|v| !(*v > 0.0)) || x.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(domain("harmonic_u needs x_1 > ... > x_k > 0"));
    }
    Ok(harmonic_u_unchecked(x))
}

pub(crate) fn harmonic_u_unchecked(x: &[f64]) -> f64 {
    let mut u: f64 = x.iter().product();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            u *= x[i] * x[i] - x[j] * x[j];
        }
    }
    u
}

/// Excursion threshold `lambda^(-(i-1)/3) * m` for line `i` (1-based).
pub fn event_threshold(i: usize, m: f64, lambda: f64) -> Result<f64> {
    if i == 0 {
        return Err(domain("line index is 1-based"));
    }
    Ok(lambda.powf(-((i - 1) as f64) / 3.0) * m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(-1.0, 1.0, 40).unwrap()
    }

    fn ensemble(lines: Vec<Path>) -> Ensemble {
        Ensemble::new(grid(), lines).unwrap()
    }

    #[test]
    fn curved_max_examples() {
        let g = grid();
        let alpha = 0.3;
        let exact = Path::from_fn(&g, |t| t.abs().powf(alpha));
        assert_eq!(curved_max(&exact, &g, alpha).unwrap(), 0.0);
        assert_eq!(curved_max(&Path::constant(&g, 1.0), &g, 0.25).unwrap(), 1.0);
        assert_eq!(curved_max(&Path::constant(&g, 0.0), &g, 0.25).unwrap(), 0.0);
        assert!(curved_max(&exact, &g, 0.5).is_err());
        assert!(curved_max(&exact, &g, 0.0).is_err());
    }

    #[test]
    fn curved_max_needs_origin_node() {
        let g = TimeGrid::new(-1.0, 1.0, 3).unwrap();
        assert!(curved_max(&Path::constant(&g, 1.0), &g, 0.25).is_err());
    }

    #[test]
    fn min_gap_examples() {
        let g = grid();
        let e = ensemble(vec![Path::constant(&g, 3.0), Path::constant(&g, 1.0)]);
        assert_eq!(min_gap(&e, 1.0).unwrap(), 2.0);

        let mut touching = Path::constant(&g, 3.0);
        touching.values_mut()[7] = 1.0;
        let e = ensemble(vec![touching, Path::constant(&g, 1.0)]);
        assert_eq!(min_gap(&e, 1.0).unwrap(), 0.0);

        let e = ensemble(vec![Path::from_fn(&g, |t| 2.0 + t * t), Path::constant(&g, 1.0)]);
        assert!((min_gap(&e, 1.0).unwrap() - 1.0).abs() < 1e-15);

        let single = ensemble(vec![Path::constant(&g, 1.0)]);
        assert!(min_gap(&single, 1.0).is_err());
    }

    #[test]
    fn modulus_examples() {
        let g = grid();
        let e = ensemble(vec![Path::constant(&g, 2.0), Path::constant(&g, 1.0)]);
        assert_eq!(modulus(&e, 1.0, 0.3).unwrap(), 0.0);

        let e = ensemble(vec![Path::from_fn(&g, |t| t)]);
        let m = modulus(&e, 1.0, 0.1).unwrap();
        // pairs strictly closer than 0.1 are one node (0.05) apart
        assert!(m <= 0.1 && m >= 0.1 - g.dt() - 1e-12, "{m}");

        let e = ensemble(vec![Path::from_fn(&g, |t| t)]);
        assert_eq!(modulus(&e, 0.0, 0.5).unwrap(), 0.0);
        assert!(modulus(&e, 1.0, 0.0).is_err());
    }

    #[test]
    fn harmonic_u_examples() {
        assert_eq!(harmonic_u(&[2.0, 1.0]).unwrap(), 6.0);
        assert_eq!(harmonic_u(&[3.0, 2.0, 1.0]).unwrap(), 720.0);
        assert_eq!(harmonic_u(&[1.0]).unwrap(), 1.0);
        assert!(harmonic_u(&[1.0, 2.0]).is_err());
        assert!(harmonic_u(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn harmonic_u_vanishes_at_chamber_walls() {
        let base = harmonic_u(&[3.0, 2.0, 1.0]).unwrap();
        let near_tie = harmonic_u(&[3.0, 1.0 + 1e-8, 1.0]).unwrap();
        let near_wall = harmonic_u(&[3.0, 2.0, 1e-8]).unwrap();
        assert!(near_tie.abs() < 1e-6 * base);
        assert!(near_wall.abs() < 1e-6 * base);
    }

    #[test]
    fn event_threshold_examples() {
        assert_eq!(event_threshold(1, 5.0, 3.0).unwrap(), 5.0);
        assert!((event_threshold(4, 8.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
        // 8^(-2) * 8 computed separately
        assert!((event_threshold(7, 8.0, 8.0).unwrap() - 0.125).abs() < 1e-12);
    }
}
