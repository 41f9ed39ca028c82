//! Curved maxima, tail probabilities of maxima, gaps and moduli, and one-sided dominance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ess::effective_sample_size;
use super::estimate::{mean_ci, proportion_ci, EstimateCI};
use super::ks::signed_sup;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::observables::{curved_max_values, event_threshold};

pub const MIN_CURVED_MAX_ESS: f64 = 100.0;

/// Mean curved maximum of precomputed per-sweep values, refusing chains with ESS below 100.
pub fn curved_max_ci(values: &[f64], level: f64) -> Result<EstimateCI> {
    let ci = mean_ci(values, level)?;
    if ci.ess < MIN_CURVED_MAX_ESS {
        return Err(Error::InsufficientEss {
            ess: ci.ess,
            required: MIN_CURVED_MAX_ESS,
        });
    }
    Ok(ci)
}

/// Mean of `max_t (X_1(t) - |t|^alpha)_+` over sampled top-line paths.
pub fn estimate_curved_max(paths: &[&[f64]], grid: &TimeGrid, alpha: f64, level: f64) -> Result<EstimateCI> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    if grid.left < 0.0 && grid.right > 0.0 && grid.node_index(0.0).is_none() {
        return Err(domain("the grid must contain t = 0 as a node"));
    }
    let mut values = Vec::with_capacity(paths.len());
    for p in paths {
        if p.len() != grid.nodes() {
            return Err(Error::Shape {
                expected: grid.nodes(),
                got: p.len(),
            });
        }
        values.push(curved_max_values(p, grid, alpha, 0..=grid.steps));
    }
    curved_max_ci(&values, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    /// Line index (1-based).
    pub k: usize,
    /// Scan parameter (`M`, `delta` or `eta`).
    pub param: f64,
    /// Level the observable is compared with.
    pub cut: f64,
    pub ci: EstimateCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxTailTable {
    pub rows: Vec<TailRow>,
    /// Smallest `C` with `upper(k, M) <= C / M` for every row.
    pub constant: f64,
    /// Same with point estimates in place of upper limits.
    pub point_constant: f64,
}

/// `P(max_{[-gamma, gamma]} X_k > lambda^{-(k-1)/3} M)` for each `(k, M)`.
/// `window_max` holds the per-sweep window maxima of each line `k`.
pub fn max_tail_scan(window_max: &[(usize, &[f64])], m_list: &[f64], lambda: f64, level: f64) -> Result<MaxTailTable> {
    if !(lambda > 1.0) {
        return Err(domain(format!("lambda must exceed 1, got {lambda}")));
    }
    if m_list.iter().any(|m| !(*m > 0.0)) {
        return Err(domain("thresholds M must be positive"));
    }
    let mut rows = Vec::new();
    for &(k, values) in window_max {
        for &m in m_list {
            let cut = event_threshold(k, m, lambda)?;
            let hits: Vec<bool> = values.iter().map(|&v| v > cut).collect();
            rows.push(TailRow {
                k,
                param: m,
                cut,
                ci: proportion_ci(&hits, level)?,
            });
        }
    }
    let constant = rows.iter().map(|r| r.param * r.ci.upper).fold(0.0, f64::max);
    let point_constant = rows.iter().map(|r| r.param * r.ci.estimate).fold(0.0, f64::max);
    Ok(MaxTailTable {
        rows,
        constant,
        point_constant,
    })
}

/// `P(g <= delta)` for each `delta`, from per-sweep minimal gaps among the top `k` lines.
pub fn gap_tail(gaps: &[f64], k: usize, deltas: &[f64], level: f64) -> Result<Vec<TailRow>> {
    if k < 2 {
        return Err(domain("gaps need k >= 2"));
    }
    if deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(domain("delta must be non-negative"));
    }
    deltas
        .iter()
        .map(|&d| {
            let hits: Vec<bool> = gaps.iter().map(|&g| g <= d).collect();
            Ok(TailRow {
                k,
                param: d,
                cut: d,
                ci: proportion_ci(&hits, level)?,
            })
        })
        .collect()
}

/// `P(m >= eta)` from per-sweep moduli of continuity.
pub fn modulus_tail(moduli: &[f64], eta: f64, level: f64) -> Result<EstimateCI> {
    if !(eta >= 0.0) {
        return Err(domain(format!("eta must be non-negative, got {eta}")));
    }
    let hits: Vec<bool> = moduli.iter().map(|&m| m >= eta).collect();
    proportion_ci(&hits, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Hypothesis: the `hi` sample is stochastically larger.
    HiDominates,
    /// Hypothesis: the `lo` sample is stochastically larger.
    LoDominates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceOptions {
    pub replicates: usize,
    /// Dominance is rejected when the p-value falls below this.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for DominanceOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            alpha: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceResult {
    /// `sup_x (F_larger(x) - F_smaller(x))_+`, zero when the empirical CDFs are ordered.
    pub statistic: f64,
    pub p_value: f64,
    pub accepted: bool,
}

/// One-sided test of stochastic dominance. The p-value comes from a pooled bootstrap with
/// resample sizes equal to each sample's effective size.
pub fn dominance_test(lo: &[f64], hi: &[f64], direction: Direction, opts: &DominanceOptions) -> Result<DominanceResult> {
    match direction {
        Direction::HiDominates => dominance_core(lo, hi, opts),
        Direction::LoDominates => dominance_core(hi, lo, opts),
    }
}

fn dominance_core(smaller: &[f64], larger: &[f64], opts: &DominanceOptions) -> Result<DominanceResult> {
    for x in [smaller, larger] {
        if x.is_empty() {
            return Err(domain("no samples"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(domain("samples must be finite"));
        }
    }
    if opts.replicates == 0 || !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(domain("need at least one replicate and alpha in (0, 1)"));
    }
    let sort = |x: &[f64]| {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (s, l) = (sort(smaller), sort(larger));
    let statistic = signed_sup(&l, &s).1;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        let ns = effective_sample_size(smaller).round().max(1.0) as usize;
        let nl = effective_sample_size(larger).round().max(1.0) as usize;
        let pool: Vec<f64> = smaller.iter().chain(larger).copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut draw = |k: usize| {
            let mut v: Vec<f64> = (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let mut exceed = 0usize;
        for _ in 0..opts.replicates {
            let bs = draw(ns);
            let bl = draw(nl);
            if signed_sup(&bl, &bs).1 >= statistic {
                exceed += 1;
            }
        }
        (exceed + 1) as f64 / (opts.replicates + 1) as f64
    };
    Ok(DominanceResult {
        statistic,
        p_value,
        accepted: p_value >= opts.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::estimate::DEFAULT_LEVEL;
    use rand_distr::StandardNormal;

    fn normals(n: usize, shift: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    }

    #[test]
    fn zero_paths_give_zero_curved_max() {
        let grid = TimeGrid::new(-1.0, 1.0, 20).unwrap();
        let zero = vec![0.0; 21];
        let paths: Vec<&[f64]> = vec![&zero; 500];
        let ci = estimate_curved_max(&paths, &grid, 0.25, DEFAULT_LEVEL).unwrap();
        assert_eq!((ci.estimate, ci.se), (0.0, 0.0));
        assert!(estimate_curved_max(&paths, &grid, 0.5, DEFAULT_LEVEL).is_err());
    }

    #[test]
    fn short_chains_are_refused() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(curved_max_ci(&x, 0.99), Err(Error::InsufficientEss { .. })));
    }

    #[test]
    fn tiny_thresholds_are_certain() {
        let v = normals(1000, 5.0, 1);
        let t = max_tail_scan(&[(1, &v), (3, &v)], &[1e-9, 4.0, 6.0], 2.0, DEFAULT_LEVEL).unwrap();
        assert_eq!(t.rows[0].ci.estimate, 1.0);
        for pair in t.rows.windows(2).filter(|w| w[0].k == w[1].k) {
            assert!(pair[1].ci.estimate <= pair[0].ci.estimate);
        }
        assert!(t.constant >= t.point_constant);
    }

    #[test]
    fn gap_extremes() {
        let g = normals(300, 2.0, 2).iter().map(|x| x.abs() + 1e-3).collect::<Vec<_>>();
        let rows = gap_tail(&g, 3, &[0.0, 100.0], DEFAULT_LEVEL).unwrap();
        assert_eq!(rows[0].ci.estimate, 0.0);
        assert_eq!(rows[1].ci.estimate, 1.0);
        assert!(gap_tail(&g, 1, &[0.1], DEFAULT_LEVEL).is_err());
    }

    #[test]
    fn modulus_at_zero_is_certain() {
        let m = normals(200, 1.0, 3).iter().map(|x| x.abs()).collect::<Vec<_>>();
        assert_eq!(modulus_tail(&m, 0.0, DEFAULT_LEVEL).unwrap().estimate, 1.0);
        assert!(modulus_tail(&m, -1.0, DEFAULT_LEVEL).is_err());
    }

    #[test]
    fn identical_samples_do_not_reject() {
        let x = normals(500, 0.0, 4);
        let r = dominance_test(&x, &x, Direction::HiDominates, &DominanceOptions::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.accepted);
    }

    #[test]
    fn shifted_copies_are_dominated() {
        let hi = normals(500, 0.0, 5);
        let lo: Vec<f64> = hi.iter().map(|x| x - 1.0).collect();
        let r = dominance_test(&lo, &hi, Direction::HiDominates, &DominanceOptions::default()).unwrap();
        assert!(r.p_value > 0.99 && r.accepted);
        let wrong = dominance_test(&lo, &hi, Direction::LoDominates, &DominanceOptions::default()).unwrap();
        assert!(!wrong.accepted, "{wrong:?}");
    }

    #[test]
    fn swapping_and_flipping_is_the_same_test() {
        let a = normals(300, 0.0, 6);
        let b = normals(200, 0.1, 7);
        let o = DominanceOptions::default();
        assert_eq!(
            dominance_test(&a, &b, Direction::HiDominates, &o).unwrap(),
            dominance_test(&b, &a, Direction::LoDominates, &o).unwrap()
        );
    }

    #[test]
    fn dominance_rejects_bad_input() {
        let o = DominanceOptions::default();
        assert!(dominance_test(&[], &[1.0], Direction::HiDominates, &o).is_err());
        assert!(dominance_test(&[f64::INFINITY], &[1.0], Direction::HiDominates, &o).is_err());
    }
}
