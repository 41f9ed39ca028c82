//! Computations shared by the experiment kinds and the acceptance gates, with the
//! verdicts drawn from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tilted_core::oracle::{transfer_marginals, MarginalTable, OracleOptions};
use tilted_core::sampler::{derive_seed, Chain, CoupledChains, GibbsSampler, Observable, Recorder, RunOutput, SamplerConfig};
use tilted_core::stats::{
    curved_max_ci, dominance_test, effective_sample_size, gap_tail, ks_one_sample, max_tail_scan, z_for,
    Direction, DominanceOptions, DominanceResult, EstimateCI, GibbsCheck, GibbsReport, MaxTailTable, ScanResult,
    TailRow,
};
use tilted_core::TiltSchedule;

use crate::artifacts::GateRecord;
use crate::config::{resized, Stack};
use crate::error::{CliError, Result};

/// Seed of chain `index` under `config`, derived from its base seed and hash.
pub fn chain_seed(config: &SamplerConfig, index: u64) -> u64 {
    derive_seed(config.seed, index, &config.hash())
}

/// One chain: burn-in, then `samples` retained sweeps of `observables`.
pub fn sample(config: &SamplerConfig, index: u64, samples: usize, observables: &[Observable]) -> Result<RunOutput> {
    Ok(Chain::with_seed(config.clone(), chain_seed(config, index))?.run(samples, observables, false)?)
}

/// Evaluates `f(0..len)` on a pool of `workers` threads; output keeps index order.
pub fn par_map<T: Send>(len: usize, workers: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if workers <= 1 || len <= 1 {
        return (0..len).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    pool.install(|| (0..len).into_par_iter().map(f).collect())
}

pub fn geometric_lambda(config: &SamplerConfig) -> Result<f64> {
    match config.tilts {
        TiltSchedule::Geometric { lambda, .. } => Ok(lambda),
        _ => Err(CliError::config("this experiment needs geometric tilts")),
    }
}

fn pass_if(name: &str, ok: bool, detail: impl Into<String>) -> GateRecord {
    GateRecord::new(name, ok as u8 as f64, (f64::NAN, f64::NAN), 1.0, ok).with_detail(detail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub line: usize,
    pub time: f64,
    pub distance: f64,
    pub p_value: f64,
    pub ess: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub rows: Vec<KsRow>,
    pub table: MarginalTable,
    pub values: Vec<Vec<f64>>,
}

/// Samples `X_i(time)` for every line until each series reaches `min_ess` effective samples
/// (or `max_samples` draws), then measures its KS distance to the exact marginal.
pub fn oracle_equivalence(
    config: &SamplerConfig,
    time: f64,
    min_ess: f64,
    max_samples: usize,
    oracle: &OracleOptions,
) -> Result<OracleRun> {
    let node = config
        .grid
        .node_index(time)
        .ok_or_else(|| CliError::config(format!("time {time} is not a grid node")))?;
    let table = transfer_marginals(config, oracle)?;
    let observables: Vec<Observable> = (1..=config.n).map(|line| Observable::Value { line, time }).collect();
    let recorder = Recorder::new(&observables, config)?;
    let mut chain = Chain::with_seed(config.clone(), chain_seed(config, 0))?;
    chain.burn_in()?;
    let mut values = vec![Vec::new(); config.n];
    let batch = (min_ess as usize).clamp(1000, max_samples.max(1));
    let ess = loop {
        chain.sample_with(batch.min(max_samples - values[0].len()), |_, st| {
            recorder.record(st.lines(), &mut values);
            Ok(())
        })?;
        let ess: Vec<f64> = values.iter().map(|v| effective_sample_size(v)).collect();
        let done = ess.iter().all(|e| *e >= min_ess) || values[0].len() >= max_samples;
        if done {
            break ess;
        }
    };
    let mut rows = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let cdf = table
            .cdf_fn(i, node)
            .ok_or_else(|| CliError::config("the comparison node is pinned"))?;
        let ks = ks_one_sample(v, cdf, Some(ess[i]))?;
        rows.push(KsRow {
            line: i + 1,
            time,
            distance: ks.statistic,
            p_value: ks.p_value,
            ess: ess[i],
            samples: v.len(),
        });
    }
    Ok(OracleRun { rows, table, values })
}

pub fn oracle_gates(label: &str, rows: &[KsRow], threshold: f64, min_ess: f64) -> Vec<GateRecord> {
    rows.iter()
        .flat_map(|r| {
            let name = format!("{label} line {} at t={}", r.line, r.time);
            [
                GateRecord::new(format!("{name}: KS distance"), r.distance, (f64::NAN, f64::NAN), threshold, r.distance < threshold)
                    .with_detail(format!("p = {:.3}, {} samples", r.p_value, r.samples)),
                GateRecord::new(format!("{name}: effective samples"), r.ess, (f64::NAN, f64::NAN), min_ess, r.ess >= min_ess),
            ]
        })
        .collect()
}

/// Curved maxima of the top line for each stack, one chain per stack.
pub fn tightness(base: &SamplerConfig, stacks: &[Stack], alpha: f64, samples: usize, level: f64, workers: usize) -> Result<Vec<EstimateCI>> {
    let configs = stacks.iter().map(|s| resized(base, s)).collect::<Result<Vec<_>>>()?;
    let obs = [Observable::CurvedMax { line: 1, alpha }];
    par_map(configs.len(), workers, |i| {
        let out = sample(&configs[i], i as u64, samples, &obs)?;
        Ok(curved_max_ci(&out.table.values[0], level)?)
    })
}

pub fn tightness_gates(stacks: &[Stack], est: &[EstimateCI], max_relative_se: f64) -> Vec<GateRecord> {
    let z = est.first().map_or(f64::NAN, EstimateCI::z);
    let mut worst = (0.0, 0, 0);
    for a in 0..est.len() {
        for b in a + 1..est.len() {
            let d = (est[b].estimate - est[a].estimate).abs() / est[a].se.hypot(est[b].se);
            if d > worst.0 || d.is_nan() {
                worst = (d, a, b);
            }
        }
    }
    let label = |i: usize| format!("(n={}, T={})", stacks[i].n, stacks[i].half_width);
    let spread = est.iter().map(|e| e.estimate).fold(f64::NEG_INFINITY, f64::max)
        - est.iter().map(|e| e.estimate).fold(f64::INFINITY, f64::min);
    let mut gates = vec![GateRecord::new("curved maxima agree across stacks", worst.0, (f64::NAN, f64::NAN), z, worst.0 <= z)
        .with_detail(format!(
            "largest standardized difference between {} and {}; estimates {}; spread {spread:.4}",
            label(worst.1),
            label(worst.2),
            est.iter().map(|e| format!("{:.4}±{:.4}", e.estimate, e.se)).collect::<Vec<_>>().join(", ")
        ))];
    for (i, e) in est.iter().enumerate() {
        let rel = e.relative_se();
        gates.push(
            GateRecord::new(format!("curved max {} finite, relative SE", label(i)), rel, (e.lower, e.upper), max_relative_se, e.estimate.is_finite() && rel < max_relative_se)
                .with_detail(format!("estimate {:.4}, ESS {:.0}", e.estimate, e.ess)),
        );
    }
    gates
}

/// Window-maximum tails of lines `lines`, from one chain.
pub fn max_scaling(config: &SamplerConfig, lines: &[usize], ms: &[f64], gamma: f64, samples: usize, level: f64) -> Result<MaxTailTable> {
    let lambda = geometric_lambda(config)?;
    let obs: Vec<Observable> = lines.iter().map(|&line| Observable::WindowMax { line, gamma }).collect();
    let out = sample(config, 0, samples, &obs)?;
    let cols: Vec<(usize, &[f64])> = lines.iter().zip(&out.table.values).map(|(&k, v)| (k, v.as_slice())).collect();
    Ok(max_tail_scan(&cols, ms, lambda, level)?)
}

/// A single `C` with every upper limit below `C / M` that still says something at the
/// largest `M` (`C < M_max`), and exact monotonicity in `M`.
pub fn max_scaling_gates(table: &MaxTailTable) -> Vec<GateRecord> {
    let m_max = table.rows.iter().map(|r| r.param).fold(0.0, f64::max);
    let c = table.constant;
    let mut monotone = true;
    for a in &table.rows {
        for b in &table.rows {
            if a.k == b.k && a.param < b.param && b.ci.estimate > a.ci.estimate {
                monotone = false;
            }
        }
    }
    vec![
        GateRecord::new("one constant C bounds all tails by C/M", c, (table.point_constant, c), m_max, c.is_finite() && c < m_max)
            .with_detail(format!("C from upper limits {c:.4}, from point estimates {:.4}; bound C/M < 1 at M = {m_max}", table.point_constant)),
        pass_if("tails non-increasing in M", monotone, ""),
    ]
}

/// Minimal-gap tails `P(g <= delta)` of the top `k` lines, from one chain.
pub fn gap_scan(config: &SamplerConfig, k: usize, gamma: f64, deltas: &[f64], samples: usize, level: f64) -> Result<Vec<TailRow>> {
    let out = sample(config, 0, samples, &[Observable::MinGap { lines: k, gamma }])?;
    Ok(gap_tail(&out.table.values[0], k, deltas, level)?)
}

/// Decrease as `delta` shrinks, and no growth of `P / delta` from the largest to the
/// smallest `delta` beyond the intervals.
pub fn gap_gates(rows: &[TailRow]) -> Vec<GateRecord> {
    let mut sorted: Vec<&TailRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.param.total_cmp(&a.param));
    let decreasing = sorted.windows(2).all(|w| w[1].ci.estimate <= w[0].ci.estimate);
    let first = sorted[0];
    let ratio = |r: &TailRow, v: f64| v / r.param;
    let constant = rows.iter().map(|r| ratio(r, r.ci.upper)).fold(0.0, f64::max);
    let ratios: Vec<String> = sorted.iter().map(|r| format!("{:.4}", ratio(r, r.ci.estimate))).collect();
    vec![
        pass_if(
            "gap probabilities decrease with delta",
            decreasing,
            sorted.iter().map(|r| format!("P(g<={})={:.5}", r.param, r.ci.estimate)).collect::<Vec<_>>().join(", "),
        ),
        GateRecord::new(
            "P(g <= delta) <= C delta with C delta < 1 over the scan",
            constant * first.param,
            (f64::NAN, f64::NAN),
            1.0,
            constant.is_finite() && constant * first.param < 1.0,
        )
        .with_detail(format!("C = {constant:.4}; P/delta from largest to smallest delta: {}", ratios.join(", "))),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub sweeps: u64,
    /// Sweeps after which the order was broken somewhere.
    pub violations: u64,
    pub rounding_fixes: u64,
}

/// Coupled sweeps of `lo` below `hi`, checking the nodewise order after every sweep.
pub fn coupling(lo: &SamplerConfig, hi: &SamplerConfig, sweeps: u64, seed: u64) -> Result<CouplingReport> {
    let mut pair = CoupledChains::new(GibbsSampler::new(lo.clone())?, GibbsSampler::new(hi.clone())?, seed)?;
    let mut violations = 0;
    for _ in 0..sweeps {
        pair.sweep()?;
        if !pair.ordered() {
            violations += 1;
        }
    }
    Ok(CouplingReport {
        sweeps,
        violations,
        rounding_fixes: pair.rounding_fixes(),
    })
}

pub fn coupling_gate(label: &str, r: &CouplingReport) -> GateRecord {
    GateRecord::new(format!("{label}: order violations"), r.violations as f64, (f64::NAN, f64::NAN), 0.0, r.violations == 0)
        .with_detail(format!("{} sweeps, {} rounding-level ties resolved", r.sweeps, r.rounding_fixes))
}

/// Independent chains for `lo` and `hi`; tests that `hi`'s observable is stochastically larger.
/// Also returns both samples.
pub fn dominance(
    lo: &SamplerConfig,
    hi: &SamplerConfig,
    obs: &Observable,
    samples: usize,
    opts: &DominanceOptions,
    workers: usize,
) -> Result<(DominanceResult, [Vec<f64>; 2])> {
    let configs = [lo, hi];
    let mut runs = par_map(2, workers, |i| sample(configs[i], i as u64, samples, std::slice::from_ref(obs)))?;
    let hi_vals = runs.pop().expect("two runs").table.values.swap_remove(0);
    let lo_vals = runs.pop().expect("two runs").table.values.swap_remove(0);
    let r = dominance_test(&lo_vals, &hi_vals, Direction::HiDominates, opts)?;
    Ok((r, [lo_vals, hi_vals]))
}

pub fn dominance_gate(r: &DominanceResult, alpha: f64) -> GateRecord {
    GateRecord::new("upper chain dominates the lower chain", r.p_value, (f64::NAN, f64::NAN), alpha, r.accepted)
        .with_detail(format!("statistic {:.5}", r.statistic))
}

/// Stationary states of one chain pushed through one extra block resampling on `[left, right]`.
pub fn gibbs(config: &SamplerConfig, left: f64, right: f64, samples: usize) -> Result<GibbsReport> {
    let mut chain = Chain::with_seed(config.clone(), chain_seed(config, 0))?;
    chain.burn_in()?;
    let kernel = chain.kernel.clone();
    let mut check = GibbsCheck::new(&kernel, left, right, chain_seed(config, 1))?;
    chain.sample_with(samples, |_, st| check.push(st))?;
    Ok(check.finish()?)
}

pub fn gibbs_gates(r: &GibbsReport, threshold: f64) -> Vec<GateRecord> {
    let detail = r
        .inside
        .iter()
        .map(|t| format!("line {} node {}: D={:.5} p={:.3}", t.line, t.node, t.ks.statistic, t.ks.p_value))
        .collect::<Vec<_>>()
        .join("; ");
    vec![
        pass_if("values outside the block bit-identical", r.outside_identical, format!("{} states", r.samples)),
        GateRecord::new("inside marginals unchanged (KS p-value)", r.min_p, (f64::NAN, f64::NAN), threshold, r.min_p > threshold).with_detail(detail),
    ]
}

pub fn scan_gates(r: &ScanResult, level: f64, shifted: Option<&ScanResult>) -> Vec<GateRecord> {
    let z = z_for(level);
    let worst_drop = r
        .estimates
        .windows(2)
        .map(|w| (w[0].estimate - w[1].estimate) / w[0].se.hypot(w[1].se))
        .fold(f64::NEG_INFINITY, f64::max);
    let k = r.estimates.len();
    let last = if k >= 2 {
        let (a, b) = (&r.estimates[k - 2], &r.estimates[k - 1]);
        (b.estimate - a.estimate).abs() / a.se.hypot(b.se)
    } else {
        0.0
    };
    let detail = r
        .settings
        .iter()
        .zip(&r.estimates)
        .map(|(s, e)| format!("n={} [{}, {}]: {:.5}±{:.5}", s.n, s.left, s.right, e.estimate, e.se))
        .collect::<Vec<_>>()
        .join("; ");
    let mut gates = vec![
        GateRecord::new(format!("P({}) non-decreasing along the domains", r.observable), worst_drop, (f64::NAN, f64::NAN), z, r.non_decreasing)
            .with_detail(detail),
        GateRecord::new("last two settings indistinguishable", last, (f64::NAN, f64::NAN), z, r.saturated),
    ];
    if let Some(s) = shifted {
        let same = s.estimates == r.estimates;
        gates.push(pass_if("translated domains give identical estimates", same, ""));
    }
    gates
}
