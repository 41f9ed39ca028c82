//! The acceptance suite. Each gate builds its own configurations, runs at the budget of
//! the chosen [`Scale`] and returns one or more [`GateRecord`]s.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tilted_core::oracle::{km_prob, reflection_positive_prob, OracleOptions, SpaceGrid};
use tilted_core::sampler::{checkpoint, proposal_acceptance, restore, Chain, Level, ProposalCheck, SamplerConfig};
use tilted_core::stats::{monotone_scan, ScanEvent, ScanOptions, ScanSetting};
use tilted_core::{BoundaryCondition, TiltSchedule, TimeGrid};

use crate::artifacts::GateRecord;
use crate::config::{Scale, Stack};
use crate::error::{CliError, Result};
use crate::runs;

/// Time step shared by every gate.
pub const DT: f64 = 0.05;
pub const LEVEL: f64 = 0.99;
const BURNIN: usize = 2000;
const BLOCK_LEN: usize = 16;

pub const GATES: [&str; 9] = [
    "oracle-equivalence",
    "untilted-exactness",
    "curved-max-tightness",
    "max-scaling",
    "monotone-coupling",
    "gibbs-consistency",
    "minimal-gaps",
    "zero-boundary-monotonicity",
    "determinism",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub gate: String,
    pub passed: bool,
    pub seconds: f64,
    pub records: Vec<GateRecord>,
}

impl GateOutcome {
    /// `PASS name: ...` with the failing or first record.
    pub fn line(&self) -> String {
        let shown = self.records.iter().find(|r| !r.passed()).or(self.records.first());
        let what = shown.map_or(String::new(), |r| {
            format!("{} = {:.6} (threshold {:.6}) {}", r.name, r.estimate, r.threshold, r.detail)
        });
        format!(
            "{} {} [{:.1}s]: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.gate,
            self.seconds,
            what.trim_end()
        )
    }
}

fn budget(scale: Scale, full: usize) -> usize {
    match scale {
        Scale::Full => full,
        Scale::Smoke => (full / 50).max(200),
    }
}

fn config(n: usize, half_width: f64, tilts: TiltSchedule, boundary: BoundaryCondition, seed: u64) -> Result<SamplerConfig> {
    let mut c = SamplerConfig::new(n, TimeGrid::symmetric(half_width, DT)?, tilts, boundary);
    c.burnin = BURNIN;
    c.block_len = BLOCK_LEN;
    c.seed = seed;
    c.validate()?;
    Ok(c)
}

fn geometric(a: f64) -> Result<TiltSchedule> {
    Ok(TiltSchedule::geometric(a, 2.0)?)
}

/// Runs one gate by name.
pub fn run_gate(name: &str, scale: Scale, seed: u64, workers: usize) -> Result<GateOutcome> {
    let start = std::time::Instant::now();
    let records = match name {
        "oracle-equivalence" => oracle_equivalence(scale, seed)?,
        "untilted-exactness" => untilted_exactness(scale, seed)?,
        "curved-max-tightness" => curved_max_tightness(scale, seed, workers)?,
        "max-scaling" => max_scaling(scale, seed)?,
        "monotone-coupling" => monotone_coupling(scale, seed)?,
        "gibbs-consistency" => gibbs_consistency(scale, seed)?,
        "minimal-gaps" => minimal_gaps(scale, seed)?,
        "zero-boundary-monotonicity" => zero_boundary_monotonicity(scale, seed, workers)?,
        "determinism" => determinism(seed)?,
        other => return Err(CliError::config(format!("unknown gate {other:?}; known: {}", GATES.join(", ")))),
    };
    Ok(GateOutcome {
        gate: name.to_string(),
        passed: records.iter().all(GateRecord::passed),
        seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

/// Sampler against exact marginals at `t = 0`: one line under zero boundary conditions,
/// then two lines pinned at `(2, 1)` with and without tilt.
pub fn oracle_equivalence(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let min_ess = budget(scale, 1_000_000) as f64;
    // Same spacing as the default grid, cut off at 12 instead of about 27.
    let pinned = OracleOptions::with_space(SpaceGrid::new(12.0, 538)?);
    let cases = [
        ("one line, a=1, zero boundary", config(1, 1.0, geometric(1.0)?, BoundaryCondition::Zero, seed)?, 0.01, OracleOptions::default()),
        (
            "two lines, a=0, pinned",
            config(2, 1.0, TiltSchedule::zero(2), BoundaryCondition::fixed(&[2.0, 1.0], &[2.0, 1.0]), seed)?,
            0.015,
            pinned,
        ),
        (
            "two lines, a=1, pinned",
            config(2, 1.0, geometric(1.0)?, BoundaryCondition::fixed(&[2.0, 1.0], &[2.0, 1.0]), seed)?,
            0.015,
            pinned,
        ),
    ];
    let mut gates = Vec::new();
    for (label, c, threshold, options) in cases {
        let run = runs::oracle_equivalence(&c, 0.0, min_ess, 20 * min_ess as usize, &options)?;
        gates.extend(runs::oracle_gates(label, &run.rows, threshold, min_ess));
    }
    Ok(gates)
}

/// Acceptance frequencies of untilted proposals (with the exact between-node survival
/// step) against the reflection and Karlin-McGregor values, both `1 - 1/e`.
pub fn untilted_exactness(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let trials = budget(scale, 1_000_000) as u64;
    let target = 1.0 - (-1.0f64).exp();
    let grid = TimeGrid::new(0.0, 2.0, 40)?;
    let gap = 2f64.sqrt();
    let cases = [
        ("one line above the wall from 1 to 1 over time 2", 1, vec![1.0], true, reflection_positive_prob(1.0, 1.0, 2.0)?),
        (
            "two lines sqrt(2) apart over time 2, no wall",
            2,
            vec![1.0 + gap, 1.0],
            false,
            km_prob(&[1.0 + gap, 1.0], &[1.0 + gap, 1.0], 2.0, false)?.prob,
        ),
    ];
    let mut gates = Vec::new();
    for (k, (label, n, pins, wall, exact)) in cases.into_iter().enumerate() {
        gates.push(GateRecord::new(format!("{label}: closed form equals 1 - 1/e"), exact, (f64::NAN, f64::NAN), target, (exact - target).abs() < 1e-12));
        let c = SamplerConfig::new(n, grid, TiltSchedule::zero(n), BoundaryCondition::fixed(&pins, &pins));
        let est = proposal_acceptance(&c, wall, ProposalCheck::Continuum, trials, seed.wrapping_add(k as u64))?;
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        let z = (est.p - exact).abs() / sigma;
        gates.push(
            GateRecord::new(format!("{label}: sampled frequency within 4 sigma"), z, (est.p - 4.0 * sigma, est.p + 4.0 * sigma), 4.0, z <= 4.0)
                .with_detail(format!("{} of {} accepted, frequency {:.6}, exact {:.6}", est.accepted, est.trials, est.p, exact)),
        );
    }
    Ok(gates)
}

pub const TIGHTNESS_STACKS: [Stack; 3] = [
    Stack { n: 3, half_width: 2.0 },
    Stack { n: 5, half_width: 3.0 },
    Stack { n: 8, half_width: 4.0 },
];

/// Expected curved maximum of the top line, `alpha = 1/4`, for growing stacks under zero
/// boundary conditions.
pub fn curved_max_tightness(scale: Scale, seed: u64, workers: usize) -> Result<Vec<GateRecord>> {
    let base = config(1, 1.0, geometric(1.0)?, BoundaryCondition::Zero, seed)?;
    let est = runs::tightness(&base, &TIGHTNESS_STACKS, 0.25, budget(scale, 100_000), LEVEL, workers)?;
    Ok(runs::tightness_gates(&TIGHTNESS_STACKS, &est, 0.05))
}

/// Six lines on `[-3, 3]`, zero boundary conditions, window `[-1, 1]`.
pub fn max_scaling(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let c = config(6, 3.0, geometric(1.0)?, BoundaryCondition::Zero, seed)?;
    let table = runs::max_scaling(&c, &[1, 2, 3], &[2.0, 4.0, 8.0], 1.0, budget(scale, 100_000), LEVEL)?;
    Ok(runs::max_scaling_gates(&table))
}

/// Coupled chains ordered by tilt and by floor.
pub fn monotone_coupling(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let sweeps = budget(scale, 10_000) as u64;
    let pins = BoundaryCondition::fixed(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]);
    let hi = config(3, 1.0, geometric(1.0)?, pins.clone(), seed)?;
    let mut lo = hi.clone();
    lo.tilts = geometric(2.0)?;
    let by_tilt = runs::coupling(&lo, &hi, sweeps, seed)?;
    let mut raised = hi.clone();
    raised.floor = Some(Level::Constant(0.5));
    let mut at_wall = hi.clone();
    at_wall.floor = Some(Level::Constant(0.0));
    let by_floor = runs::coupling(&at_wall, &raised, sweeps, seed.wrapping_add(1))?;
    Ok(vec![
        runs::coupling_gate("tilt a=2 below a=1", &by_tilt),
        runs::coupling_gate("floor 0 below floor 0.5", &by_floor),
    ])
}

/// Two lines pinned at `(2, 1)`, `a = 1`, block `[-1/2, 1/2]` of the domain `[-1, 1]`.
pub fn gibbs_consistency(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let c = config(2, 1.0, geometric(1.0)?, BoundaryCondition::fixed(&[2.0, 1.0], &[2.0, 1.0]), seed)?;
    let r = runs::gibbs(&c, -0.5, 0.5, budget(scale, 100_000))?;
    Ok(runs::gibbs_gates(&r, 0.01))
}

/// Three lines on `[-2, 2]`, zero boundary conditions, window `[-1/2, 1/2]`.
pub fn minimal_gaps(scale: Scale, seed: u64) -> Result<Vec<GateRecord>> {
    let c = config(3, 2.0, geometric(1.0)?, BoundaryCondition::Zero, seed)?;
    let rows = runs::gap_scan(&c, 3, 0.5, &[0.1, 0.05, 0.025, 0.0125], budget(scale, 100_000), LEVEL)?;
    Ok(runs::gap_gates(&rows))
}

pub const SCAN_SETTINGS: [ScanSetting; 3] = [
    ScanSetting { n: 2, left: -1.0, right: 1.0 },
    ScanSetting { n: 4, left: -2.0, right: 2.0 },
    ScanSetting { n: 6, left: -3.0, right: 3.0 },
];

/// `P(X_1(0) > 1/2)` along growing stacks, plus the translated rerun.
pub fn zero_boundary_monotonicity(scale: Scale, seed: u64, workers: usize) -> Result<Vec<GateRecord>> {
    let opts = ScanOptions {
        a: 1.0,
        lambda: 2.0,
        dt: DT,
        samples: budget(scale, 100_000),
        burnin: BURNIN,
        thin: 1,
        block_len: BLOCK_LEN,
        seed,
        level: LEVEL,
        workers,
    };
    let event = ScanEvent::Above { line: 1, time: 0.0, threshold: 0.5 };
    let r = monotone_scan(&SCAN_SETTINGS, &event, &opts)?;
    let shift = 1.0;
    let moved: Vec<ScanSetting> = SCAN_SETTINGS
        .iter()
        .map(|s| ScanSetting { left: s.left - shift, right: s.right - shift, ..*s })
        .collect();
    let s = monotone_scan(&moved, &event.shifted(shift), &opts)?;
    Ok(runs::scan_gates(&r, LEVEL, Some(&s)))
}

/// Byte-identical CSVs from repeated runs, and 50 + checkpoint/restore + 50 sweeps equal
/// to 100 uninterrupted ones.
pub fn determinism(seed: u64) -> Result<Vec<GateRecord>> {
    let tmp = TempDir::new("determinism")?;
    let text = format!(
        r#"seed = {seed}
[experiment]
kind = "simulate"
samples = 500
chains = 2
[sampler]
n = 2
grid = {{ left = -1.0, right = 1.0, steps = 20 }}
tilts = {{ kind = "geometric", a = 1.0, lambda = 2.0 }}
boundary = {{ kind = "free" }}
burnin = 100
[[observables]]
kind = "value"
line = 1
time = 0.0
[[observables]]
kind = "min_gap"
lines = 2
gamma = 0.5
"#
    );
    let mut first = None;
    let mut identical = true;
    for k in 0..2 {
        let dir = tmp.path.join(format!("run{k}"));
        let mut config = crate::config::ExperimentConfig::from_toml(&text, &[])?;
        config.out = Some(dir.clone());
        crate::app::execute(&config, None)?;
        let csvs = read_csvs(&dir)?;
        match &first {
            None => first = Some(csvs),
            Some(f) => identical &= *f == csvs,
        }
    }
    let files = first.as_ref().map_or(0, Vec::len);

    let c = config(3, 1.0, geometric(1.0)?, BoundaryCondition::free(), seed)?;
    let mut straight = Chain::new(c.clone())?;
    straight.run_sweeps(100)?;
    let mut split = Chain::new(c.clone())?;
    split.run_sweeps(50)?;
    let blob = checkpoint(&split.kernel, &split.state);
    let mut resumed = Chain::new(c)?;
    resumed.state = restore(&resumed.kernel, &blob)?;
    resumed.run_sweeps(50)?;
    let same_state = checkpoint(&straight.kernel, &straight.state) == checkpoint(&resumed.kernel, &resumed.state);
    let bits = |ch: &Chain| -> Vec<u64> { ch.state.lines().iter().flatten().map(|x| x.to_bits()).collect() };
    let same_paths = bits(&straight) == bits(&resumed);
    Ok(vec![
        GateRecord::new("repeated runs write byte-identical CSVs", identical as u8 as f64, (f64::NAN, f64::NAN), 1.0, identical && files > 0)
            .with_detail(format!("{files} CSV files compared")),
        GateRecord::new("50 + restore + 50 sweeps equal 100 sweeps bit for bit", same_paths as u8 as f64, (f64::NAN, f64::NAN), 1.0, same_paths && same_state),
    ])
}

fn read_csvs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
        }
    }
    out.sort();
    Ok(out)
}

/// Scratch directory removed on drop.
struct TempDir {
    path: std::path::PathBuf,
}

impl TempDir {
    fn new(tag: &str) -> Result<Self> {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos());
        let path = std::env::temp_dir().join(format!("tilted-{tag}-{}-{nanos}", std::process::id()));
        std::fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self { path })
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}
