//! Transfer-operator quadrature for the discrete polymer measure with one or two lines.
//!
//! The space axis `[0, x_max]` carries uniform weights. Where a barrier or the ordering
//! constraint cuts the axis at a space point, the weights next to the cut follow Gregory's
//! end correction on five points, so integrals of densities that jump at the cut keep
//! high-order accuracy.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCondition;
use crate::bridge::q;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::sampler::SamplerConfig;

/// Uniform space grid on `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceGrid {
    pub x_max: f64,
    pub points: usize,
}

impl SpaceGrid {
    pub fn new(x_max: f64, points: usize) -> Result<Self> {
        let s = Self { x_max, points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(domain(format!("x_max must be positive, got {}", self.x_max)));
        }
        if self.points < 3 {
            return Err(domain("a space grid needs at least 3 points"));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.x_max / (self.points - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.x_max
        } else {
            k as f64 * self.h()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.x(k)).collect()
    }

    /// Trapezoid weights; they sum to `x_max`.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }

    /// Cutoff `8 (M + sqrt(r - l))` with `M` the largest boundary or barrier level,
    /// and spacing `sqrt(dt) / 10`.
    pub fn for_config(config: &SamplerConfig) -> Result<Self> {
        let mut m = 0.0_f64;
        if let BoundaryCondition::Fixed { left, right } = &config.boundary {
            m = left.iter().chain(right).copied().fold(m, f64::max);
        }
        m = config.floor_values()?.into_iter().fold(m, f64::max);
        let ceiling = config.ceiling_values()?;
        let x_max = 8.0 * (m + config.grid.duration().sqrt());
        let x_max = ceiling.into_iter().fold(x_max, f64::min);
        let h = config.grid.dt().sqrt() / 10.0;
        Self::new(x_max, (x_max / h).ceil() as usize + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    /// Defaults to [`SpaceGrid::for_config`].
    #[serde(default)]
    pub space: Option<SpaceGrid>,
    /// Refuse runs whose estimated multiply-add count exceeds this.
    #[serde(default = "default_cost_limit")]
    pub cost_limit: f64,
}

fn default_cost_limit() -> f64 {
    4e10
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            space: None,
            cost_limit: default_cost_limit(),
        }
    }
}

impl OracleOptions {
    pub fn with_space(space: SpaceGrid) -> Self {
        Self {
            space: Some(space),
            ..Self::default()
        }
    }
}

/// Tail mass tolerated in the top 5% of the space grid.
pub const CUTOFF_TOLERANCE: f64 = 1e-10;

/// Gaussian kernel reach in standard deviations.
const KERNEL_REACH: f64 = 9.0;

/// One-point densities of each line at each node of the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub grid: TimeGrid,
    pub space: SpaceGrid,
    pub n: usize,
    pub log_partition: f64,
    /// `densities[line][node]`; `None` at pinned nodes.
    pub densities: Vec<Vec<Option<Vec<f64>>>>,
    /// Quadrature weights matching `densities`.
    pub weights: Vec<Vec<Option<Vec<f64>>>>,
}

impl MarginalTable {
    pub fn density(&self, line: usize, node: usize) -> Option<&[f64]> {
        self.densities[line][node].as_deref()
    }

    /// Cumulative distribution at the space points (trapezoid integration of the density).
    pub fn cdf(&self, line: usize, node: usize) -> Option<Vec<f64>> {
        let p = self.density(line, node)?;
        let w = self.weights[line][node].as_deref()?;
        let h = self.space.h();
        let mut out = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..p.len() {
            // nothing accumulates across a barrier
            if w[k - 1] > 0.0 {
                acc += 0.5 * h * (p[k - 1] + p[k]);
            }
            out.push(acc);
        }
        Some(out)
    }

    /// Cumulative distribution function by linear interpolation between space points.
    pub fn cdf_fn(&self, line: usize, node: usize) -> Option<impl Fn(f64) -> f64> {
        let f = self.cdf(line, node)?;
        let h = self.space.h();
        let last = f.len() - 1;
        Some(move |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            let u = x / h;
            let k = u.floor() as usize;
            if k >= last {
                return f[last];
            }
            let w = u - k as f64;
            f[k] * (1.0 - w) + f[k + 1] * w
        })
    }

    pub fn mean(&self, line: usize, node: usize) -> Option<f64> {
        let p = self.density(line, node)?;
        let w = self.weights[line][node].as_deref()?;
        Some((0..p.len()).map(|k| w[k] * self.space.x(k) * p[k]).sum())
    }

    pub fn mass(&self, line: usize, node: usize) -> Option<f64> {
        let p = self.density(line, node)?;
        let w = self.weights[line][node].as_deref()?;
        Some(w.iter().zip(p).map(|(w, p)| w * p).sum())
    }

    /// `node_time,line,x,density`, lines 1-based, pinned nodes omitted.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node_time,line,x,density")?;
        for (i, nodes) in self.densities.iter().enumerate() {
            for (j, d) in nodes.iter().enumerate() {
                if let Some(d) = d {
                    let t = self.grid.time(j);
                    for (k, p) in d.iter().enumerate() {
                        writeln!(w, "{},{},{},{}", t, i + 1, self.space.x(k), p)?;
                    }
                }
            }
        }
        Ok(())
    }
}

struct Model {
    n: usize,
    dt: f64,
    m: usize,
    p: usize,
    xs: Vec<f64>,
    /// `quad[line][node]`: quadrature weights of the line coordinate, barriers included.
    quad: Vec<Vec<Vec<f64>>>,
    taps: Vec<f64>,
    pins: Option<(Vec<f64>, Vec<f64>)>,
    node_weights: Vec<Vec<f64>>,
    log_const: f64,
}

impl Model {
    fn build(config: &SamplerConfig, options: &OracleOptions) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        if n > 2 {
            return Err(Error::CostGuard {
                estimate: f64::INFINITY,
                limit: options.cost_limit,
            });
        }
        let space = match options.space {
            Some(s) => {
                s.validate()?;
                s
            }
            None => SpaceGrid::for_config(config)?,
        };
        let grid = &config.grid;
        let m = grid.steps;
        let dt = grid.dt();
        let p = space.points;
        let h = space.h();
        let reach = ((KERNEL_REACH * dt.sqrt() / h).ceil() as usize).min(p - 1);
        let cost = m as f64 * (p as f64).powi(n as i32) * (2 * reach + 1) as f64 * n as f64 * 2.0;
        if cost > options.cost_limit {
            return Err(Error::CostGuard {
                estimate: cost,
                limit: options.cost_limit,
            });
        }
        let xs = space.xs();
        let taps = (0..=reach).map(|d| q(dt, 0.0, d as f64 * h)).collect();
        let floor = config.floor_values()?;
        let ceiling = config.ceiling_values()?;
        let tw = grid.trapezoid_weights();
        let rho: Vec<Vec<f64>> = (0..n).map(|i| config.tilts.line_weights(i, grid)).collect();
        let pins = match &config.boundary {
            BoundaryCondition::Fixed { left, right } => Some((left.clone(), right.clone())),
            BoundaryCondition::Zero => Some((vec![0.0; n], vec![0.0; n])),
            BoundaryCondition::Free { .. } => None,
        };
        let mut log_const = 0.0;
        if let Some((a, b)) = &pins {
            for i in 0..n {
                log_const -= tw[0] * rho[i][0] * a[i] + tw[m] * rho[i][m] * b[i];
            }
        }
        // with two lines the floor binds the bottom line and the ceiling the top one
        let quad: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| {
                (0..=m)
                    .map(|j| {
                        let lower = (i + 1 == n).then_some(floor[j]);
                        let upper = (i == 0).then_some(ceiling[j]);
                        cut_weights(&space, lower, upper)
                    })
                    .collect()
            })
            .collect();
        let single = |i: usize, j: usize| -> Vec<f64> {
            (0..p)
                .map(|k| {
                    let w = quad[i][j][k];
                    if w == 0.0 {
                        return 0.0;
                    }
                    let x = xs[k];
                    let mut log_w = -tw[j] * rho[i][j] * x;
                    if j == 0 {
                        log_w -= config.boundary.nu(i).eval(x);
                    }
                    if j == m {
                        log_w -= config.boundary.eta(i).eval(x);
                    }
                    w * log_w.exp()
                })
                .collect()
        };
        let mut node_weights = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let pinned = pins.is_some() && (j == 0 || j == m);
            if pinned {
                node_weights.push(Vec::new());
                continue;
            }
            let w = if n == 1 {
                single(0, j)
            } else {
                let top = single(0, j);
                let bottom = single(1, j);
                let mut w = vec![0.0; p * p];
                for k1 in 0..p {
                    for k2 in 0..=k1 {
                        w[k1 * p + k2] = gregory(k1 - k2) * top[k1] * bottom[k2];
                    }
                }
                w
            };
            node_weights.push(w);
        }
        Ok(Self {
            n,
            dt,
            m,
            p,
            xs,
            quad,
            taps,
            pins,
            node_weights,
            log_const,
        })
    }

    fn states(&self) -> usize {
        self.p.pow(self.n as u32)
    }

    fn first(&self) -> usize {
        if self.pins.is_some() {
            1
        } else {
            0
        }
    }

    fn last(&self) -> usize {
        if self.pins.is_some() {
            self.m - 1
        } else {
            self.m
        }
    }

    /// Product over lines of `q(pin_i, x_i)` for every state.
    fn pin_vector(&self, pin: &[f64]) -> Vec<f64> {
        let dt_kernel = |a: f64, x: f64| q(self.dt, a, x);
        if self.n == 1 {
            self.xs.iter().map(|&x| dt_kernel(pin[0], x)).collect()
        } else {
            let top: Vec<f64> = self.xs.iter().map(|&x| dt_kernel(pin[0], x)).collect();
            let bottom: Vec<f64> = self.xs.iter().map(|&x| dt_kernel(pin[1], x)).collect();
            let mut v = vec![0.0; self.p * self.p];
            for k1 in 0..self.p {
                for k2 in 0..self.p {
                    v[k1 * self.p + k2] = top[k1] * bottom[k2];
                }
            }
            v
        }
    }

    fn convolve(&self, v: &[f64]) -> Vec<f64> {
        if self.n == 1 {
            conv1d(v, &self.taps)
        } else {
            conv2d(v, self.p, &self.taps)
        }
    }
}

/// Gregory end-correction factor at offset `d` from a cut.
fn gregory(d: usize) -> f64 {
    match d {
        0 => 95.0 / 288.0,
        1 => 317.0 / 240.0,
        2 => 23.0 / 30.0,
        3 => 793.0 / 720.0,
        4 => 157.0 / 160.0,
        _ => 1.0,
    }
}

/// Weights of one coordinate restricted to `(lower, upper)`. A cut on a space point gets the
/// Gregory correction; a cut between points falls back to the plain indicator.
fn cut_weights(space: &SpaceGrid, lower: Option<f64>, upper: Option<f64>) -> Vec<f64> {
    let h = space.h();
    let p = space.points;
    let mut w = vec![h; p];
    // the far end only carries negligible mass
    w[p - 1] = 0.5 * h;
    let on_point = |level: f64| {
        let u = level / h;
        let k = u.round();
        ((u - k).abs() < 1e-9 && k >= 0.0 && k <= (p - 1) as f64).then_some(k as usize)
    };
    if let Some(f) = lower {
        match on_point(f) {
            Some(kf) => {
                for (k, x) in w.iter_mut().enumerate() {
                    *x = if k < kf { 0.0 } else { h * gregory(k - kf) };
                }
            }
            None => {
                for (k, x) in w.iter_mut().enumerate() {
                    if space.x(k) <= f {
                        *x = 0.0;
                    }
                }
            }
        }
    }
    if let Some(c) = upper.filter(|c| c.is_finite()) {
        match on_point(c) {
            Some(kc) => {
                for (k, x) in w.iter_mut().enumerate() {
                    *x = if k > kc { 0.0 } else { h * gregory(kc - k).min(*x / h) };
                }
            }
            None => {
                for (k, x) in w.iter_mut().enumerate() {
                    if space.x(k) >= c {
                        *x = 0.0;
                    }
                }
            }
        }
    }
    w
}

fn conv1d(v: &[f64], taps: &[f64]) -> Vec<f64> {
    let p = v.len();
    let r = taps.len() - 1;
    let mut out = vec![0.0; p];
    for (l, o) in out.iter_mut().enumerate() {
        let lo = l.saturating_sub(r);
        let hi = (l + r).min(p - 1);
        let mut acc = 0.0;
        for k in lo..=hi {
            acc += v[k] * taps[k.abs_diff(l)];
        }
        *o = acc;
    }
    out
}

fn conv2d(v: &[f64], p: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() - 1;
    // along the second coordinate (contiguous rows)
    let mut mid = vec![0.0; p * p];
    for k1 in 0..p {
        let row = &v[k1 * p..(k1 + 1) * p];
        if row.iter().all(|x| *x == 0.0) {
            continue;
        }
        mid[k1 * p..(k1 + 1) * p].copy_from_slice(&conv1d(row, taps));
    }
    // along the first coordinate, as row combinations
    let mut out = vec![0.0; p * p];
    for l1 in 0..p {
        let lo = l1.saturating_sub(r);
        let hi = (l1 + r).min(p - 1);
        let dst = &mut out[l1 * p..(l1 + 1) * p];
        for k1 in lo..=hi {
            let w = taps[k1.abs_diff(l1)];
            let src = &mid[k1 * p..(k1 + 1) * p];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

fn normalize(v: &mut [f64]) -> Result<f64> {
    let mx = v.iter().copied().fold(0.0, f64::max);
    if !(mx > 0.0 && mx.is_finite()) {
        return Err(Error::Consistency(
            "transfer messages vanished: the constraints leave no mass on the space grid".into(),
        ));
    }
    for x in v.iter_mut() {
        *x /= mx;
    }
    Ok(mx.ln())
}

struct Forward {
    alphas: Vec<Vec<f64>>,
    terminal: Vec<f64>,
    log_z: f64,
}

fn forward(model: &Model) -> Result<Forward> {
    let (first, last) = (model.first(), model.last());
    let mut alphas = vec![Vec::new(); model.m + 1];
    let mut log_acc = 0.0;
    let mut a: Vec<f64> = match &model.pins {
        Some((left, _)) => model
            .pin_vector(left)
            .iter()
            .zip(&model.node_weights[first])
            .map(|(u, w)| u * w)
            .collect(),
        None => model.node_weights[0].clone(),
    };
    log_acc += normalize(&mut a)?;
    alphas[first] = a;
    for j in first + 1..=last {
        let mut next = model.convolve(&alphas[j - 1]);
        for (x, w) in next.iter_mut().zip(&model.node_weights[j]) {
            *x *= w;
        }
        log_acc += normalize(&mut next)?;
        alphas[j] = next;
    }
    let terminal = match &model.pins {
        Some((_, right)) => model.pin_vector(right),
        None => vec![1.0; model.states()],
    };
    let z: f64 = alphas[last].iter().zip(&terminal).map(|(a, t)| a * t).sum();
    if !(z > 0.0) {
        return Err(Error::Consistency("partition function vanished on the space grid".into()));
    }
    Ok(Forward {
        alphas,
        terminal,
        log_z: log_acc + z.ln() + model.log_const,
    })
}

// With no interior nodes the measure is a product of pinned kernels.
fn single_interval_log_z(config: &SamplerConfig) -> Option<f64> {
    if config.grid.steps != 1 {
        return None;
    }
    let dt = config.grid.dt();
    let tw = config.grid.trapezoid_weights();
    let mut log_z = 0.0;
    for i in 0..config.n {
        let (a, b) = config.boundary.pins(i)?;
        log_z += q(dt, a, b).ln() - tw[0] * config.tilts.rho(i, 0) * a - tw[1] * config.tilts.rho(i, 1) * b;
    }
    Some(log_z)
}

/// Natural log of the partition function of the discrete measure.
pub fn log_partition(config: &SamplerConfig, options: &OracleOptions) -> Result<f64> {
    if let Some(z) = single_interval_log_z(config) {
        return Ok(z);
    }
    let model = Model::build(config, options)?;
    Ok(forward(&model)?.log_z)
}

/// Partition function by dense transfer-operator products on the space grid.
pub fn brute_partition(config: &SamplerConfig, options: &OracleOptions) -> Result<f64> {
    Ok(log_partition(config, options)?.exp())
}

/// Forward–backward one-point densities of every line at every free node.
pub fn transfer_marginals(config: &SamplerConfig, options: &OracleOptions) -> Result<MarginalTable> {
    let model = Model::build(config, options)?;
    let space = options.space.map_or_else(|| SpaceGrid::for_config(config), Ok)?;
    let fw = forward(&model)?;
    let (first, last) = (model.first(), model.last());
    let s = model.states();
    let mut densities = vec![vec![None; model.m + 1]; model.n];
    let mut weights = vec![vec![None; model.m + 1]; model.n];
    let mut beta = fw.terminal.clone();
    normalize(&mut beta)?;
    for j in (first..=last).rev() {
        if j < last {
            let weighted: Vec<f64> = beta.iter().zip(&model.node_weights[j + 1]).map(|(b, w)| b * w).collect();
            beta = model.convolve(&weighted);
            normalize(&mut beta)?;
        }
        let joint: Vec<f64> = fw.alphas[j].iter().zip(&beta).map(|(a, b)| a * b).collect();
        let total: f64 = joint.iter().sum();
        let p = model.p;
        for i in 0..model.n {
            let mut dens = vec![0.0; p];
            if model.n == 1 {
                dens.copy_from_slice(&joint);
            } else {
                for st in 0..s {
                    let k = if i == 0 { st / p } else { st % p };
                    dens[k] += joint[st];
                }
            }
            let qw = &model.quad[i][j];
            for (k, d) in dens.iter_mut().enumerate() {
                *d = if qw[k] > 0.0 { *d / (total * qw[k]) } else { 0.0 };
            }
            let tail: f64 = (0..p)
                .filter(|&k| model.xs[k] >= 0.95 * space.x_max)
                .map(|k| qw[k] * dens[k])
                .sum();
            if tail > CUTOFF_TOLERANCE {
                return Err(Error::Cutoff {
                    mass: tail,
                    tolerance: CUTOFF_TOLERANCE,
                });
            }
            densities[i][j] = Some(dens);
            weights[i][j] = Some(qw.clone());
        }
    }
    Ok(MarginalTable {
        grid: config.grid,
        space,
        n: model.n,
        log_partition: fw.log_z,
        densities,
        weights,
    })
}

/// Exact draws of whole paths from the single-line discrete measure on the space grid
/// (forward filtering, backward sampling). Node values are space-grid points.
pub fn sample_paths<R: Rng + ?Sized>(
    config: &SamplerConfig,
    options: &OracleOptions,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if config.n != 1 {
        return Err(Error::Usage("oracle path sampling supports a single line".into()));
    }
    let model = Model::build(config, options)?;
    let fw = forward(&model)?;
    let (first, last) = (model.first(), model.last());
    let p = model.p;
    let r = model.taps.len() - 1;
    let tail: Vec<f64> = fw.alphas[last].iter().zip(&fw.terminal).map(|(a, t)| a * t).collect();
    let tail_cdf = cumulative(&tail);
    let mut out = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(2 * r + 1);
    for _ in 0..count {
        let mut path = vec![0.0; model.m + 1];
        if let Some((a, b)) = &model.pins {
            path[0] = a[0];
            path[model.m] = b[0];
        }
        let mut k = pick(&tail_cdf, rng);
        path[last] = model.xs[k];
        for j in (first..last).rev() {
            let lo = k.saturating_sub(r);
            let hi = (k + r).min(p - 1);
            weights.clear();
            let mut acc = 0.0;
            for l in lo..=hi {
                acc += fw.alphas[j][l] * model.taps[l.abs_diff(k)];
                weights.push(acc);
            }
            k = lo + pick(&weights, rng);
            path[j] = model.xs[k];
        }
        out.push(path);
    }
    Ok(out)
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn pick<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().unwrap();
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilt::TiltSchedule;

    fn one_line(grid: TimeGrid, a: f64, bc: BoundaryCondition) -> SamplerConfig {
        let tilts = if a == 0.0 {
            TiltSchedule::zero(1)
        } else {
            TiltSchedule::constants(&[a])
        };
        SamplerConfig::new(1, grid, tilts, bc)
    }

    #[test]
    fn space_grid_weights_sum_to_cutoff() {
        let s = SpaceGrid::new(5.0, 11).unwrap();
        assert!((s.weights().iter().sum::<f64>() - 5.0).abs() < 1e-12);
        assert!(s.weights().iter().all(|w| *w > 0.0));
        assert_eq!(s.x(10), 5.0);
        assert!(SpaceGrid::new(0.0, 11).is_err());
        assert!(SpaceGrid::new(1.0, 2).is_err());
    }

    #[test]
    fn untilted_zero_boundary_positivity_is_one_over_m() {
        // positive excursions of an exchangeable bridge: probability 1/m
        for m in [4, 8, 16] {
            let grid = TimeGrid::new(0.0, 1.0, m).unwrap();
            let c = one_line(grid, 0.0, BoundaryCondition::Zero);
            let opts = OracleOptions::with_space(SpaceGrid::new(6.0, 1201).unwrap());
            let z = brute_partition(&c, &opts).unwrap();
            let ratio = z / q(1.0, 0.0, 0.0);
            assert!((ratio - 1.0 / m as f64).abs() < 2e-4 / m as f64, "m={m}: {ratio}");
        }
    }

    #[test]
    fn marginals_have_unit_mass_and_are_time_symmetric() {
        let grid = TimeGrid::new(-1.0, 1.0, 20).unwrap();
        let c = one_line(grid, 1.0, BoundaryCondition::Zero);
        let opts = OracleOptions::with_space(SpaceGrid::new(6.0, 601).unwrap());
        let t = transfer_marginals(&c, &opts).unwrap();
        for j in 1..20 {
            assert!((t.mass(0, j).unwrap() - 1.0).abs() < 1e-10);
            let (a, b) = (t.density(0, j).unwrap(), t.density(0, 20 - j).unwrap());
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
        assert!(t.density(0, 0).is_none());
    }

    #[test]
    fn larger_tilt_lowers_the_midpoint_mean() {
        let grid = TimeGrid::new(-1.0, 1.0, 20).unwrap();
        let opts = OracleOptions::with_space(SpaceGrid::new(6.0, 601).unwrap());
        let m1 = transfer_marginals(&one_line(grid, 1.0, BoundaryCondition::Zero), &opts)
            .unwrap()
            .mean(0, 10)
            .unwrap();
        let m2 = transfer_marginals(&one_line(grid, 2.0, BoundaryCondition::Zero), &opts)
            .unwrap()
            .mean(0, 10)
            .unwrap();
        assert!(m2 < m1, "{m2} vs {m1}");
    }

    #[test]
    fn small_cutoff_is_detected() {
        let grid = TimeGrid::new(-1.0, 1.0, 20).unwrap();
        let c = one_line(grid, 1.0, BoundaryCondition::fixed(&[1.0], &[1.0]));
        let opts = OracleOptions::with_space(SpaceGrid::new(1.5, 301).unwrap());
        assert!(matches!(transfer_marginals(&c, &opts), Err(Error::Cutoff { .. })));
    }

    #[test]
    fn cost_guard_refuses_large_runs() {
        let grid = TimeGrid::new(-1.0, 1.0, 40).unwrap();
        let mut c = one_line(grid, 1.0, BoundaryCondition::Zero);
        c.n = 2;
        c.tilts = TiltSchedule::constants(&[1.0, 2.0]);
        let opts = OracleOptions {
            space: Some(SpaceGrid::new(8.0, 4001).unwrap()),
            cost_limit: 1e9,
        };
        assert!(matches!(brute_partition(&c, &opts), Err(Error::CostGuard { .. })));
        c.n = 3;
        c.tilts = TiltSchedule::constants(&[1.0, 2.0, 4.0]);
        assert!(matches!(brute_partition(&c, &OracleOptions::default()), Err(Error::CostGuard { .. })));
    }

    #[test]
    fn csv_has_the_documented_header() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let c = one_line(grid, 1.0, BoundaryCondition::Zero);
        let opts = OracleOptions::with_space(SpaceGrid::new(4.0, 401).unwrap());
        let t = transfer_marginals(&c, &opts).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("node_time,line,x,density\n"));
        assert_eq!(s.lines().count(), 1 + 401);
        assert!(s.lines().nth(1).unwrap().starts_with("0.5,1,0,"));
    }
}
