//! Resampling-invariance check: one extra block update applied to copies of stationary
//! states must leave the one-point marginals unchanged and touch nothing outside the block.

use serde::{Deserialize, Serialize};

use super::ess::effective_sample_size;
use super::ks::{ks_two_sample, KsResult};
use crate::error::{domain, Result};
use crate::sampler::{ChainState, GibbsSampler};

/// Inside marginals pass when every KS p-value exceeds this.
pub const GIBBS_P_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeTest {
    /// 1-based line index.
    pub line: usize,
    pub node: usize,
    pub ks: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    /// Node indices `[s, t]`; nodes strictly inside are resampled.
    pub block: (usize, usize),
    pub samples: usize,
    pub inside: Vec<NodeTest>,
    pub outside_identical: bool,
    pub min_p: f64,
    pub passed: bool,
}

/// Streaming accumulator: feed stationary states with [`GibbsCheck::push`].
#[derive(Debug)]
pub struct GibbsCheck<'a> {
    kernel: &'a GibbsSampler,
    s: usize,
    t: usize,
    scratch: ChainState,
    nodes: Vec<usize>,
    before: Vec<Vec<f64>>,
    after: Vec<Vec<f64>>,
    outside_identical: bool,
    samples: usize,
}

impl<'a> GibbsCheck<'a> {
    /// `left`, `right` must be grid nodes; the extra resampling uses its own RNG seeded by `seed`.
    pub fn new(kernel: &'a GibbsSampler, left: f64, right: f64, seed: u64) -> Result<Self> {
        let grid = &kernel.config().grid;
        let idx = |t: f64| {
            grid.node_index(t)
                .ok_or_else(|| domain(format!("interval end {t} is not a grid node")))
        };
        let (s, t) = (idx(left)?, idx(right)?);
        if s > t {
            return Err(domain(format!("empty interval [{left}, {right}]")));
        }
        let n = kernel.config().n;
        let scratch = kernel.initial_state_with_seed(seed)?;
        let nodes = if t - s >= 2 { vec![(s + t) / 2] } else { Vec::new() };
        let series = n * nodes.len();
        Ok(Self {
            kernel,
            s,
            t,
            scratch,
            nodes,
            before: vec![Vec::new(); series],
            after: vec![Vec::new(); series],
            outside_identical: true,
            samples: 0,
        })
    }

    pub fn push(&mut self, state: &ChainState) -> Result<()> {
        let n = self.kernel.config().n;
        self.scratch.lines.clone_from(&state.lines);
        if self.t - self.s >= 2 {
            for i in 0..n {
                self.kernel.resample_block(&mut self.scratch, i, self.s, self.t)?;
            }
        }
        for (orig, copy) in state.lines.iter().zip(&self.scratch.lines) {
            let outside = (0..=self.s).chain(self.t..orig.len());
            if outside.into_iter().any(|j| orig[j].to_bits() != copy[j].to_bits()) {
                self.outside_identical = false;
            }
        }
        for i in 0..n {
            for (k, &j) in self.nodes.iter().enumerate() {
                let slot = i * self.nodes.len() + k;
                self.before[slot].push(state.lines[i][j]);
                self.after[slot].push(self.scratch.lines[i][j]);
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// KS tests use the effective size of the original series for both samples.
    pub fn finish(self) -> Result<GibbsReport> {
        let n = self.kernel.config().n;
        let mut inside = Vec::new();
        if self.samples > 0 {
            for i in 0..n {
                for (k, &j) in self.nodes.iter().enumerate() {
                    let slot = i * self.nodes.len() + k;
                    let ess = effective_sample_size(&self.before[slot]).max(1.0);
                    let ks = ks_two_sample(&self.before[slot], &self.after[slot], Some((ess, ess)))?;
                    inside.push(NodeTest { line: i + 1, node: j, ks });
                }
            }
        }
        let min_p = inside.iter().map(|t| t.ks.p_value).fold(1.0, f64::min);
        Ok(GibbsReport {
            block: (self.s, self.t),
            samples: self.samples,
            passed: self.outside_identical && min_p > GIBBS_P_THRESHOLD,
            inside,
            outside_identical: self.outside_identical,
            min_p,
        })
    }
}

/// Runs the check over stored states (`paths[r][line][node]`).
pub fn gibbs_consistency(
    kernel: &GibbsSampler,
    paths: &[Vec<Vec<f64>>],
    left: f64,
    right: f64,
    seed: u64,
) -> Result<GibbsReport> {
    let mut check = GibbsCheck::new(kernel, left, right, seed)?;
    let mut state = kernel.initial_state_with_seed(seed)?;
    for lines in paths {
        if lines.len() != state.lines.len() || lines.iter().any(|l| l.len() != state.lines[0].len()) {
            return Err(domain("stored paths do not match the configuration"));
        }
        state.lines.clone_from(lines);
        check.push(&state)?;
    }
    check.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryCondition;
    use crate::grid::TimeGrid;
    use crate::sampler::{Chain, SamplerConfig};
    use crate::tilt::TiltSchedule;

    fn chain() -> Chain {
        let mut c = SamplerConfig::new(
            2,
            TimeGrid::new(-1.0, 1.0, 20).unwrap(),
            TiltSchedule::geometric(1.0, 2.0).unwrap(),
            BoundaryCondition::fixed(&[2.0, 1.0], &[2.0, 1.0]),
        );
        c.burnin = 200;
        c.seed = 11;
        Chain::new(c).unwrap()
    }

    #[test]
    fn zero_length_interval_is_trivial() {
        let mut ch = chain();
        ch.burn_in().unwrap();
        let kernel = ch.kernel.clone();
        let mut check = GibbsCheck::new(&kernel, 0.0, 0.0, 1).unwrap();
        for _ in 0..20 {
            ch.sweep().unwrap();
            check.push(&ch.state).unwrap();
        }
        let r = check.finish().unwrap();
        assert!(r.passed && r.outside_identical && r.inside.is_empty());
    }

    #[test]
    fn interval_must_be_grid_aligned() {
        let ch = chain();
        assert!(GibbsCheck::new(&ch.kernel, -0.52, 0.5, 1).is_err());
        assert!(GibbsCheck::new(&ch.kernel, 0.5, -0.5, 1).is_err());
    }

    #[test]
    fn stationary_states_pass() {
        let mut ch = chain();
        ch.burn_in().unwrap();
        let mut paths = Vec::new();
        for _ in 0..3000 {
            ch.sweep().unwrap();
            paths.push(ch.state.lines().to_vec());
        }
        let r = gibbs_consistency(&ch.kernel, &paths, -0.5, 0.5, 7).unwrap();
        assert!(r.outside_identical);
        assert_eq!(r.inside.len(), 2);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn a_biased_sample_is_detected() {
        let mut ch = chain();
        ch.burn_in().unwrap();
        let mut paths = Vec::new();
        for _ in 0..3000 {
            ch.sweep().unwrap();
            let mut lines = ch.state.lines().to_vec();
            // push the top line up in the middle: admissible, but not stationary
            lines[0][10] += 0.3;
            paths.push(lines);
        }
        let r = gibbs_consistency(&ch.kernel, &paths, -0.5, 0.5, 7).unwrap();
        assert!(r.outside_identical);
        assert!(!r.passed, "{r:?}");
    }
}
