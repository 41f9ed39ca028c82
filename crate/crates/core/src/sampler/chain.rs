use serde::{Deserialize, Serialize};

use super::config::{derive_seed, SamplerConfig};
use super::kernel::{ChainState, GibbsSampler, LineStats};
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::observables::{curved_max_values, min_gap_values, modulus_values};
use crate::stats::ess::effective_sample_size;

/// A per-sweep scalar recorded by [`run_chain`]. Line indices are 1-based (1 = top).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `X_line(time)`; `time` must be a grid node.
    Value { line: usize, time: f64 },
    /// Curved maximum of one line over the whole grid.
    CurvedMax { line: usize, alpha: f64 },
    /// Largest value of one line on `[-gamma, gamma]`.
    WindowMax { line: usize, gamma: f64 },
    /// Minimal gap among the top `lines` lines on `[-gamma, gamma]`.
    MinGap { lines: usize, gamma: f64 },
    /// Modulus of continuity of the top `lines` lines on `[-gamma, gamma]`.
    Modulus { lines: usize, gamma: f64, delta: f64 },
    /// Trapezoid area under one line.
    Area { line: usize },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Value { line, time } => format!("x{line}(t={time})"),
            Observable::CurvedMax { line, alpha } => format!("curved_max{line}(alpha={alpha})"),
            Observable::WindowMax { line, gamma } => format!("max{line}(gamma={gamma})"),
            Observable::MinGap { lines, gamma } => format!("min_gap{lines}(gamma={gamma})"),
            Observable::Modulus { lines, gamma, delta } => {
                format!("modulus{lines}(gamma={gamma},delta={delta})")
            }
            Observable::Area { line } => format!("area{line}"),
        }
    }

    pub(crate) fn prepare(&self, n: usize, grid: &TimeGrid) -> Result<Prepared> {
        let check_line = |line: usize| {
            if line == 0 || line > n {
                Err(domain(format!("line {line} is outside 1..={n}")))
            } else {
                Ok(line - 1)
            }
        };
        let whole = 0..=grid.steps;
        Ok(match *self {
            Observable::Value { line, time } => {
                let j = grid
                    .node_index(time)
                    .ok_or_else(|| domain(format!("time {time} is not a grid node")))?;
                Prepared::Value(check_line(line)?, j)
            }
            Observable::CurvedMax { line, alpha } => {
                if !(alpha > 0.0 && alpha < 0.5) {
                    return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
                }
                if grid.left < 0.0 && grid.right > 0.0 && grid.node_index(0.0).is_none() {
                    return Err(domain("the grid must contain t = 0 as a node"));
                }
                Prepared::CurvedMax(check_line(line)?, alpha, whole)
            }
            Observable::WindowMax { line, gamma } => {
                Prepared::WindowMax(check_line(line)?, grid.window(-gamma, gamma)?)
            }
            Observable::MinGap { lines, gamma } => {
                if lines < 2 {
                    return Err(domain("min_gap needs at least two lines"));
                }
                check_line(lines)?;
                Prepared::MinGap(lines, grid.window(-gamma, gamma)?)
            }
            Observable::Modulus { lines, gamma, delta } => {
                if !(delta > 0.0) {
                    return Err(domain(format!("delta must be positive, got {delta}")));
                }
                check_line(lines)?;
                Prepared::Modulus(lines, grid.window(-gamma, gamma)?, delta)
            }
            Observable::Area { line } => Prepared::Area(check_line(line)?, grid.trapezoid_weights()),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Prepared {
    Value(usize, usize),
    CurvedMax(usize, f64, std::ops::RangeInclusive<usize>),
    WindowMax(usize, std::ops::RangeInclusive<usize>),
    MinGap(usize, std::ops::RangeInclusive<usize>),
    Modulus(usize, std::ops::RangeInclusive<usize>, f64),
    Area(usize, Vec<f64>),
}

impl Prepared {
    pub(crate) fn eval(&self, lines: &[Vec<f64>], grid: &TimeGrid) -> f64 {
        match self {
            Prepared::Value(i, j) => lines[*i][*j],
            Prepared::CurvedMax(i, alpha, r) => curved_max_values(&lines[*i], grid, *alpha, r.clone()),
            Prepared::WindowMax(i, r) => lines[*i][r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Prepared::MinGap(k, r) => {
                let top: Vec<&[f64]> = lines[..*k].iter().map(|l| l.as_slice()).collect();
                min_gap_values(&top, r.clone())
            }
            Prepared::Modulus(k, r, delta) => {
                let top: Vec<&[f64]> = lines[..*k].iter().map(|l| l.as_slice()).collect();
                modulus_values(&top, grid, r.clone(), *delta)
            }
            Prepared::Area(i, w) => w.iter().zip(&lines[*i]).map(|(w, x)| w * x).sum(),
        }
    }
}

/// Observables checked against one configuration, ready to evaluate on chain states.
#[derive(Debug, Clone)]
pub struct Recorder {
    prepared: Vec<Prepared>,
    grid: TimeGrid,
}

impl Recorder {
    pub fn new(observables: &[Observable], config: &SamplerConfig) -> Result<Self> {
        let prepared = observables
            .iter()
            .map(|o| o.prepare(config.n, &config.grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            prepared,
            grid: config.grid,
        })
    }

    /// Appends one value per observable to `columns`.
    pub fn record(&self, lines: &[Vec<f64>], columns: &mut [Vec<f64>]) {
        for (col, p) in columns.iter_mut().zip(&self.prepared) {
            col.push(p.eval(lines, &self.grid));
        }
    }
}

/// Retained sweeps of one chain: `values[c][r]` is observable `c` at retained sweep `r`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub sweeps: Vec<u64>,
    pub values: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|k| self.values[k].as_slice())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sweeps: u64,
    pub retained: usize,
    /// Effective sample size of each observable column.
    pub ess: Vec<f64>,
    pub line_stats: Vec<LineStats>,
    /// Endpoint acceptance after burn-in (free boundaries only).
    pub endpoint_acceptance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: SampleTable,
    pub diagnostics: Diagnostics,
    pub final_state: ChainState,
    /// Full line values of every retained sweep, when requested.
    pub paths: Vec<Vec<Vec<f64>>>,
}

/// A chain together with its kernel.
#[derive(Debug, Clone)]
pub struct Chain {
    pub kernel: GibbsSampler,
    pub state: ChainState,
}

impl Chain {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        let kernel = GibbsSampler::new(config)?;
        let state = kernel.initial_state()?;
        Ok(Self { kernel, state })
    }

    pub fn with_seed(mut config: SamplerConfig, seed: u64) -> Result<Self> {
        config.seed = seed;
        Self::new(config)
    }

    pub fn sweep(&mut self) -> Result<()> {
        self.kernel.sweep(&mut self.state)
    }

    pub fn run_sweeps(&mut self, sweeps: usize) -> Result<()> {
        for _ in 0..sweeps {
            self.sweep()?;
        }
        Ok(())
    }

    /// Runs the configured burn-in, then stops endpoint adaptation.
    pub fn burn_in(&mut self) -> Result<()> {
        let remaining = (self.kernel.config().burnin as u64).saturating_sub(self.state.sweeps_done);
        self.run_sweeps(remaining as usize)?;
        self.state.freeze_adaptation();
        Ok(())
    }

    /// Collects `n_samples` retained sweeps (every `thin`-th), calling `visit` on each.
    pub fn sample_with<F>(&mut self, n_samples: usize, mut visit: F) -> Result<()>
    where
        F: FnMut(&GibbsSampler, &ChainState) -> Result<()>,
    {
        let thin = self.kernel.config().thin.max(1);
        for _ in 0..n_samples {
            self.run_sweeps(thin)?;
            visit(&self.kernel, &self.state)?;
        }
        Ok(())
    }

    /// Burn-in (if not yet done) followed by `n_samples` retained sweeps.
    pub fn run(mut self, n_samples: usize, observables: &[Observable], keep_paths: bool) -> Result<RunOutput> {
        let config = self.kernel.config().clone();
        let recorder = Recorder::new(observables, &config)?;
        self.burn_in()?;
        let mut table = SampleTable {
            columns: observables.iter().map(Observable::name).collect(),
            sweeps: Vec::with_capacity(n_samples),
            values: vec![Vec::with_capacity(n_samples); observables.len()],
        };
        let mut paths = Vec::new();
        self.sample_with(n_samples, |_, st| {
            table.sweeps.push(st.sweeps_done());
            recorder.record(st.lines(), &mut table.values);
            if keep_paths {
                paths.push(st.lines().to_vec());
            }
            Ok(())
        })?;
        let ess = table
            .values
            .iter()
            .map(|c| if c.is_empty() { 0.0 } else { effective_sample_size(c) })
            .collect();
        let diagnostics = Diagnostics {
            sweeps: self.state.sweeps_done(),
            retained: table.len(),
            ess,
            line_stats: self.state.stats().to_vec(),
            endpoint_acceptance: config
                .boundary
                .is_free()
                .then(|| self.state.endpoints().acceptance_rate()),
        };
        Ok(RunOutput {
            table,
            diagnostics,
            final_state: self.state,
            paths,
        })
    }
}

/// Initializes, burns in, thins and records `observables` for `n_samples` retained sweeps.
pub fn run_chain(config: &SamplerConfig, n_samples: usize, observables: &[Observable]) -> Result<RunOutput> {
    Chain::new(config.clone())?.run(n_samples, observables, false)
}

/// Independent chains with seeds derived from `(config.seed, chain index, config hash)`,
/// spread over `workers` threads. Output order follows the chain index.
pub fn run_chains(
    config: &SamplerConfig,
    chains: usize,
    n_samples: usize,
    observables: &[Observable],
    workers: usize,
) -> Result<Vec<RunOutput>> {
    if chains == 0 {
        return Err(domain("need at least one chain"));
    }
    config.validate()?;
    let hash = config.hash();
    let seeds: Vec<u64> = (0..chains as u64).map(|c| derive_seed(config.seed, c, &hash)).collect();
    let one = |seed: u64| Chain::with_seed(config.clone(), seed)?.run(n_samples, observables, false);
    let workers = workers.clamp(1, chains);
    if workers == 1 {
        return seeds.into_iter().map(one).collect();
    }
    let mut slots: Vec<Option<Result<RunOutput>>> = (0..chains).map(|_| None).collect();
    std::thread::scope(|scope| {
        let per = chains.div_ceil(workers);
        let handles: Vec<_> = seeds
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(|&s| one(s)).collect::<Vec<_>>()))
            .collect();
        let mut k = 0;
        for h in handles {
            for r in h.join().expect("chain worker panicked") {
                slots[k] = Some(r);
                k += 1;
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.unwrap_or_else(|| Err(Error::Consistency("missing chain output".into()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryCondition;
    use crate::tilt::TiltSchedule;

    fn config() -> SamplerConfig {
        let mut c = SamplerConfig::new(
            2,
            TimeGrid::new(-1.0, 1.0, 20).unwrap(),
            TiltSchedule::geometric(1.0, 2.0).unwrap(),
            BoundaryCondition::Zero,
        );
        c.burnin = 10;
        c.thin = 2;
        c
    }

    #[test]
    fn zero_samples_gives_an_empty_table() {
        let out = run_chain(&config(), 0, &[Observable::Area { line: 1 }]).unwrap();
        assert!(out.table.is_empty());
        assert_eq!(out.diagnostics.sweeps, 10);
        assert_eq!(out.table.columns.len(), 1);
    }

    #[test]
    fn no_observables_keeps_sweep_indices() {
        let out = run_chain(&config(), 5, &[]).unwrap();
        assert_eq!(out.table.sweeps, vec![12, 14, 16, 18, 20]);
        assert!(out.table.values.is_empty());
    }

    #[test]
    fn observables_are_validated() {
        let bad = [Observable::Value { line: 3, time: 0.0 }];
        assert!(run_chain(&config(), 1, &bad).is_err());
        let off_grid = [Observable::Value { line: 1, time: 0.01 }];
        assert!(run_chain(&config(), 1, &off_grid).is_err());
        let gap = [Observable::MinGap { lines: 1, gamma: 0.5 }];
        assert!(run_chain(&config(), 1, &gap).is_err());
    }

    #[test]
    fn chains_are_reproducible_and_distinct() {
        let obs = [Observable::Value { line: 1, time: 0.0 }];
        let a = run_chains(&config(), 3, 20, &obs, 1).unwrap();
        let b = run_chains(&config(), 3, 20, &obs, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.table, y.table);
        }
        assert_ne!(a[0].table.values, a[1].table.values);
    }

    #[test]
    fn observable_names_are_distinct() {
        let obs = [
            Observable::Value { line: 1, time: 0.0 },
            Observable::CurvedMax { line: 1, alpha: 0.25 },
            Observable::WindowMax { line: 1, gamma: 1.0 },
            Observable::MinGap { lines: 2, gamma: 0.5 },
            Observable::Modulus { lines: 2, gamma: 1.0, delta: 0.1 },
            Observable::Area { line: 2 },
        ];
        let mut names: Vec<String> = obs.iter().map(Observable::name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), obs.len());
    }
}
