use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{SamplerConfig, SweepSchedule};
use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::normal::truncated_quantile;
use crate::path::{Ensemble, Path};
use crate::tilt::block_shift;

/// Rejection bookkeeping for one line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineStats {
    /// Blocks handled by the rejection sampler (including sub-blocks after halving).
    pub blocks: u64,
    pub proposals: u64,
    pub accepted: u64,
    /// Blocks that exhausted `max_rejections` and were split.
    pub halvings: u64,
    /// Single-node exact updates.
    pub exact: u64,
}

impl LineStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposals as f64
    }
}

/// Random-walk state for the free endpoints of every line, `[left, right]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointState {
    pub log_scale: Vec<[f64; 2]>,
    pub proposed: Vec<[u64; 2]>,
    pub accepted: Vec<[u64; 2]>,
    pub adapting: bool,
}

impl EndpointState {
    fn new(n: usize, dt: f64) -> Self {
        Self {
            log_scale: vec![[0.5 * dt.ln(); 2]; n],
            proposed: vec![[0; 2]; n],
            accepted: vec![[0; 2]; n],
            adapting: true,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        let p: u64 = self.proposed.iter().map(|x| x[0] + x[1]).sum();
        let a: u64 = self.accepted.iter().map(|x| x[0] + x[1]).sum();
        if p == 0 {
            f64::NAN
        } else {
            a as f64 / p as f64
        }
    }
}

/// Mutable state of one chain. Lines are stored top first.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub(crate) lines: Vec<Vec<f64>>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) sweeps_done: u64,
    pub(crate) stats: Vec<LineStats>,
    pub(crate) endpoints: EndpointState,
}

impl PartialEq for ChainState {
    fn eq(&self, other: &Self) -> bool {
        self.lines == other.lines
            && self.rng == other.rng
            && self.sweeps_done == other.sweeps_done
            && self.stats == other.stats
            && self.endpoints == other.endpoints
    }
}

impl ChainState {
    pub fn lines(&self) -> &[Vec<f64>] {
        &self.lines
    }

    pub fn line(&self, i: usize) -> &[f64] {
        &self.lines[i]
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn stats(&self) -> &[LineStats] {
        &self.stats
    }

    pub fn endpoints(&self) -> &EndpointState {
        &self.endpoints
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Freezes endpoint adaptation; called at the end of burn-in.
    pub fn freeze_adaptation(&mut self) {
        self.endpoints.adapting = false;
    }
}

/// The Brownian-Gibbs kernel for one configuration, with per-node data precomputed.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    config: SamplerConfig,
    rho: Vec<Vec<f64>>,
    floor: Vec<f64>,
    ceiling: Vec<f64>,
    blocks: Vec<(usize, usize)>,
    dt: f64,
}

const TARGET_ENDPOINT_ACCEPTANCE: f64 = 0.4;

impl GibbsSampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let rho = (0..config.n)
            .map(|i| config.tilts.line_weights(i, &config.grid))
            .collect();
        let floor = config.floor_values()?;
        let ceiling = config.ceiling_values()?;
        let blocks = systematic_blocks(config.grid.steps, config.block_len);
        let dt = config.grid.dt();
        Ok(Self {
            config,
            rho,
            floor,
            ceiling,
            blocks,
            dt,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn floor(&self) -> &[f64] {
        &self.floor
    }

    pub fn ceiling(&self) -> &[f64] {
        &self.ceiling
    }

    pub fn rho(&self, i: usize) -> &[f64] {
        &self.rho[i]
    }

    /// Block end points `(s, t)` of one systematic pass over a line.
    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// Deterministic admissible starting configuration seeded from `config.seed`.
    pub fn initial_state(&self) -> Result<ChainState> {
        self.initial_state_with_seed(self.config.seed)
    }

    pub fn initial_state_with_seed(&self, seed: u64) -> Result<ChainState> {
        let n = self.config.n;
        let grid = &self.config.grid;
        let m = grid.steps;
        let mut lines = vec![vec![0.0; grid.nodes()]; n];
        for (i, line) in lines.iter_mut().enumerate() {
            for (j, x) in line.iter_mut().enumerate() {
                let f = self.floor[j];
                let c = self.ceiling[j];
                *x = if c.is_finite() {
                    f + (c - f) * (n - i) as f64 / (n + 1) as f64
                } else {
                    f + (n - i) as f64
                };
            }
            match &self.config.boundary {
                BoundaryCondition::Fixed { left, right } => {
                    for (j, x) in line.iter_mut().enumerate() {
                        let w = j as f64 / m as f64;
                        *x = left[i] * (1.0 - w) + right[i] * w;
                    }
                    line[m] = right[i];
                }
                BoundaryCondition::Zero => {
                    line[0] = 0.0;
                    line[m] = 0.0;
                }
                BoundaryCondition::Free { .. } => {}
            }
        }
        let state = ChainState {
            lines,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweeps_done: 0,
            stats: vec![LineStats::default(); n],
            endpoints: EndpointState::new(n, self.dt),
        };
        if !self.is_admissible(&state) {
            return Err(Error::Consistency(
                "no admissible starting configuration for these boundary data and barriers".into(),
            ));
        }
        Ok(state)
    }

    /// Builds a state from explicit line values (top first).
    pub fn state_from_lines(&self, lines: Vec<Vec<f64>>, seed: u64) -> Result<ChainState> {
        if lines.len() != self.config.n {
            return Err(Error::Shape {
                expected: self.config.n,
                got: lines.len(),
            });
        }
        for l in &lines {
            if l.len() != self.config.grid.nodes() {
                return Err(Error::Shape {
                    expected: self.config.grid.nodes(),
                    got: l.len(),
                });
            }
        }
        let state = ChainState {
            lines,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweeps_done: 0,
            stats: vec![LineStats::default(); self.config.n],
            endpoints: EndpointState::new(self.config.n, self.dt),
        };
        if !self.boundary_matches(&state) || !self.is_admissible(&state) {
            return Err(Error::Consistency("lines violate the boundary data or the chamber".into()));
        }
        Ok(state)
    }

    fn boundary_matches(&self, state: &ChainState) -> bool {
        let m = self.config.grid.steps;
        (0..self.config.n).all(|i| match self.config.boundary.pins(i) {
            Some((a, b)) => state.lines[i][0] == a && state.lines[i][m] == b,
            None => true,
        })
    }

    pub fn ensemble(&self, state: &ChainState) -> Ensemble {
        let grid = self.config.grid;
        let lines = state
            .lines
            .iter()
            .map(|l| Path::new(l.clone()).expect("chain values are finite"))
            .collect();
        let mut e = Ensemble::new(grid, lines).expect("state matches grid");
        if self.config.floor.is_some() {
            e.floor = Some(Path::new(self.floor.clone()).expect("finite floor"));
        }
        if self.config.ceiling.is_some() {
            e.ceiling = Some(Path::new(self.ceiling.clone()).expect("finite ceiling"));
        }
        e
    }

    /// Full chamber check of a state: strict at interior nodes, and at free endpoints.
    pub fn is_admissible(&self, state: &ChainState) -> bool {
        let m = self.config.grid.steps;
        let strict_ends = self.config.boundary.is_free();
        (0..=m).all(|j| {
            let strict = strict_ends || (j != 0 && j != m);
            let mut above = self.ceiling[j];
            for (i, line) in state.lines.iter().enumerate() {
                let x = line[j];
                let ok = if i == 0 || !strict { x <= above } else { x < above };
                if !ok || !x.is_finite() {
                    return false;
                }
                above = x;
            }
            above >= self.floor[j]
        })
    }

    #[inline]
    pub(crate) fn window(&self, lines: &[Vec<f64>], i: usize, j: usize) -> (f64, f64) {
        let lower = if i + 1 < lines.len() {
            lines[i + 1][j].max(self.floor[j])
        } else {
            self.floor[j]
        };
        let upper = if i > 0 {
            lines[i - 1][j].min(self.ceiling[j])
        } else {
            self.ceiling[j]
        };
        (lower, upper)
    }

    /// Resamples line `i` strictly inside `(s, t)` from its conditional law given everything else.
    pub fn resample_block(&self, state: &mut ChainState, i: usize, s: usize, t: usize) -> Result<()> {
        if i >= self.config.n {
            return Err(Error::Usage(format!("line {i} does not exist")));
        }
        if !(s < t && t <= self.config.grid.steps) {
            return Err(Error::Usage(format!("invalid block [{s}, {t}]")));
        }
        if t - s < 2 {
            return Ok(());
        }
        for j in s + 1..t {
            let (lo, hi) = self.window(&state.lines, i, j);
            if !(lo < hi) {
                return Err(Error::Consistency(format!(
                    "empty window ({lo}, {hi}) for line {i} at node {j}"
                )));
            }
        }
        self.resample_range(state, i, s, t);
        debug_assert!(self.block_is_admissible(state, i, s, t));
        Ok(())
    }

    fn block_is_admissible(&self, state: &ChainState, i: usize, s: usize, t: usize) -> bool {
        (s + 1..t).all(|j| {
            let (lo, hi) = self.window(&state.lines, i, j);
            let x = state.lines[i][j];
            x > lo && x < hi
        })
    }

    fn resample_range(&self, state: &mut ChainState, i: usize, s: usize, t: usize) {
        let k = t - s;
        if k == 2 {
            self.exact_single(state, i, s + 1);
            return;
        }
        state.stats[i].blocks += 1;
        let dt = self.dt;
        let mut shift = Vec::with_capacity(k - 1);
        block_shift(dt, &self.rho[i][s + 1..t], &mut shift);
        let mut proposal = vec![0.0; k - 1];
        let a = state.lines[i][s];
        let b = state.lines[i][t];
        for _ in 0..self.config.max_rejections {
            state.stats[i].proposals += 1;
            let mut prev = a;
            let mut ok = true;
            for j in 1..k {
                let remaining = (k - j + 1) as f64;
                let mean = prev + (b - prev) / remaining;
                let sd = (dt * (remaining - 1.0) / remaining).sqrt();
                let z: f64 = state.rng.sample(StandardNormal);
                let y = mean + sd * z;
                let x = y + shift[j - 1];
                let (lo, hi) = self.window(&state.lines, i, s + j);
                if !(x > lo && x < hi) {
                    ok = false;
                    break;
                }
                proposal[j - 1] = x;
                prev = y;
            }
            if ok {
                state.stats[i].accepted += 1;
                state.lines[i][s + 1..t].copy_from_slice(&proposal);
                return;
            }
        }
        state.stats[i].halvings += 1;
        // two overlapping halves, each strictly shorter than the parent
        let h = k / 2 + 1;
        self.resample_range(state, i, s, s + h);
        self.resample_range(state, i, t - h, t);
    }

    fn exact_single(&self, state: &mut ChainState, i: usize, j: usize) {
        state.stats[i].exact += 1;
        let u: f64 = state.rng.random();
        let (lo, hi) = self.window(&state.lines, i, j);
        state.lines[i][j] = self.single_site_value(&state.lines[i], i, j, lo, hi, u);
    }

    /// Heat-bath value of node `j` of line `i` for the uniform `u`, given its neighbours.
    #[inline]
    pub(crate) fn single_site_value(&self, line: &[f64], i: usize, j: usize, lo: f64, hi: f64, u: f64) -> f64 {
        let dt = self.dt;
        let mean = 0.5 * (line[j - 1] + line[j + 1]) - 0.5 * self.rho[i][j] * dt * dt;
        let sd = (0.5 * dt).sqrt();
        strict_inside(truncated_quantile(mean, sd, lo, hi, u), lo, hi)
    }

    /// One pass over all lines and blocks, then the endpoint moves under free boundaries.
    pub fn sweep(&self, state: &mut ChainState) -> Result<()> {
        let n = self.config.n;
        let m = self.config.grid.steps;
        match self.config.schedule {
            SweepSchedule::Systematic => {
                for i in 0..n {
                    for &(s, t) in &self.blocks {
                        self.resample_block(state, i, s, t)?;
                    }
                }
            }
            SweepSchedule::RandomBlock => {
                let k = (self.config.block_len + 1).min(m);
                for i in 0..n {
                    for _ in 0..self.blocks.len() {
                        let s = state.rng.random_range(0..=m - k);
                        self.resample_block(state, i, s, s + k)?;
                    }
                }
            }
        }
        if self.config.boundary.is_free() {
            self.update_endpoints(state)?;
        }
        state.sweeps_done += 1;
        debug_assert!(self.is_admissible(state));
        Ok(())
    }

    /// Metropolis random-walk move of every free endpoint.
    pub fn update_endpoints(&self, state: &mut ChainState) -> Result<()> {
        if !self.config.boundary.is_free() {
            return Err(Error::Usage(
                "endpoint updates need a free boundary condition".into(),
            ));
        }
        let m = self.config.grid.steps;
        let dt = self.dt;
        for i in 0..self.config.n {
            for side in 0..2 {
                let (j, nb, pot) = if side == 0 {
                    (0, 1, self.config.boundary.nu(i))
                } else {
                    (m, m - 1, self.config.boundary.eta(i))
                };
                let link = state.lines[i][nb];
                let tilt = self.rho[i][j] * 0.5 * dt;
                let log_target = |x: f64| -pot.eval(x) - (x - link) * (x - link) / (2.0 * dt) - tilt * x;
                let x = state.lines[i][j];
                let scale = state.endpoints.log_scale[i][side].exp();
                let z: f64 = state.rng.sample(StandardNormal);
                let u: f64 = state.rng.random();
                let y = x + scale * z;
                let (lo, hi) = self.window(&state.lines, i, j);
                let inside = y > lo && y < hi;
                let accept = inside && u.ln() < log_target(y) - log_target(x);
                if accept {
                    state.lines[i][j] = y;
                }
                let ep = &mut state.endpoints;
                ep.proposed[i][side] += 1;
                ep.accepted[i][side] += accept as u64;
                if ep.adapting {
                    let gain = (ep.proposed[i][side] as f64).powf(-0.6);
                    let hit = if accept { 1.0 } else { 0.0 };
                    ep.log_scale[i][side] += gain * (hit - TARGET_ENDPOINT_ACCEPTANCE);
                }
            }
        }
        Ok(())
    }
}

/// Moves a value clamped onto a window edge back strictly inside.
#[inline]
fn strict_inside(x: f64, lo: f64, hi: f64) -> f64 {
    if x > lo && x < hi {
        return x;
    }
    let up = lo.next_up();
    let down = hi.next_down();
    if x <= lo && up < hi {
        up
    } else if x >= hi && down > lo {
        down
    } else {
        0.5 * (lo + hi)
    }
}

/// Blocks of `block_len` resampled nodes with half-block overlap covering all interior nodes.
pub(crate) fn systematic_blocks(steps: usize, block_len: usize) -> Vec<(usize, usize)> {
    if steps < 2 {
        return Vec::new();
    }
    let span = block_len + 1;
    if span >= steps {
        return vec![(0, steps)];
    }
    let stride = (block_len / 2).max(1);
    let mut out = Vec::new();
    let mut s = 0;
    while s + span < steps {
        out.push((s, s + span));
        s += stride;
    }
    out.push((steps - span, steps));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sampler::config::Level;
    use crate::tilt::TiltSchedule;

    fn zero_bc(n: usize, a: f64) -> SamplerConfig {
        let tilts = if a == 0.0 {
            TiltSchedule::zero(n)
        } else {
            TiltSchedule::geometric(a, 2.0).unwrap()
        };
        SamplerConfig::new(n, TimeGrid::new(-1.0, 1.0, 40).unwrap(), tilts, BoundaryCondition::Zero)
    }

    #[test]
    fn blocks_cover_every_interior_node() {
        for steps in 2..60 {
            for block_len in 2..12 {
                let blocks = systematic_blocks(steps, block_len);
                let mut hit = vec![false; steps + 1];
                for &(s, t) in &blocks {
                    assert!(t - s <= block_len + 1 && t <= steps);
                    for j in s + 1..t {
                        hit[j] = true;
                    }
                }
                assert!(hit[1..steps].iter().all(|h| *h), "steps={steps} len={block_len}");
            }
        }
    }

    #[test]
    fn fan_start_is_admissible() {
        for n in 1..6 {
            let s = GibbsSampler::new(zero_bc(n, 1.0)).unwrap();
            let st = s.initial_state().unwrap();
            assert!(s.ensemble(&st).check_admissible(false));
        }
        let mut c = zero_bc(3, 1.0);
        c.boundary = BoundaryCondition::free();
        c.ceiling = Some(Level::Constant(2.0));
        let s = GibbsSampler::new(c).unwrap();
        let st = s.initial_state().unwrap();
        assert!(s.ensemble(&st).check_admissible(true));
    }

    #[test]
    fn sweep_counts_and_keeps_admissibility() {
        let s = GibbsSampler::new(zero_bc(3, 1.0)).unwrap();
        let mut st = s.initial_state().unwrap();
        for k in 1..=50 {
            s.sweep(&mut st).unwrap();
            assert_eq!(st.sweeps_done(), k);
            assert!(s.ensemble(&st).check_admissible(false));
            assert_eq!(st.line(0)[0], 0.0);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let s = GibbsSampler::new(zero_bc(2, 1.0)).unwrap();
        let mut a = s.initial_state().unwrap();
        let mut b = s.initial_state().unwrap();
        for _ in 0..20 {
            s.sweep(&mut a).unwrap();
            s.sweep(&mut b).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_window_is_a_consistency_error() {
        let c = SamplerConfig::new(
            3,
            TimeGrid::new(0.0, 1.0, 4).unwrap(),
            TiltSchedule::zero(3),
            BoundaryCondition::fixed(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]),
        );
        let s = GibbsSampler::new(c).unwrap();
        let mut st = s.initial_state().unwrap();
        st.lines[0][2] = 0.5;
        assert!(matches!(s.resample_block(&mut st, 1, 0, 4), Err(Error::Consistency(_))));
    }

    #[test]
    fn endpoint_update_needs_free_boundary() {
        let s = GibbsSampler::new(zero_bc(1, 1.0)).unwrap();
        let mut st = s.initial_state().unwrap();
        assert!(matches!(s.update_endpoints(&mut st), Err(Error::Usage(_))));
    }

    #[test]
    fn halving_fallback_stays_admissible() {
        // one rejection attempt forces the recursive split nearly every time
        let mut c = zero_bc(4, 1.0);
        c.max_rejections = 1;
        c.block_len = 16;
        let s = GibbsSampler::new(c).unwrap();
        let mut st = s.initial_state().unwrap();
        for _ in 0..100 {
            s.sweep(&mut st).unwrap();
            assert!(s.is_admissible(&st));
        }
        assert!(st.stats().iter().any(|l| l.halvings > 0));
    }

    #[test]
    fn strict_inside_never_returns_a_bound() {
        assert_eq!(strict_inside(0.5, 0.0, 1.0), 0.5);
        let x = strict_inside(0.0, 0.0, 1.0);
        assert!(x > 0.0 && x < 1.0);
        let x = strict_inside(1.0, 0.0, 1.0);
        assert!(x > 0.0 && x < 1.0);
    }
}
