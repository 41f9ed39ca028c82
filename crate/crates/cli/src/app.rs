//! Runs one experiment and writes its artifacts.
//!
//! Every run directory holds `config.toml` (the resolved configuration), the CSV tables of
//! its kind, `plot.svg`, `summary.json` / `gates.csv` and `manifest.json`.
//!
//! | kind | tables |
//! |---|---|
//! | simulate | `samples.csv`: `chain,sweep,<observable...>`; `estimates.csv`: `observable,chain,mean,se,ess,lower,upper` |
//! | oracle | `marginals.csv`: `node_time,line,x,density`; `cdf.csv`: `node_time,line,x,cdf`; `moments.csv`: `node_time,line,mean,mass` |
//! | compare | `compare.csv`: `line,time,distance,p_value,effective_samples,threshold,verdict` |
//! | tightness-scan | `tightness.csv`: `n,half_width,estimate,se,ess,lower,upper,relative_se` |
//! | max-scaling | `tails.csv`: `k,m,cut,estimate,se,ess,lower,upper,widened` |
//! | gap-scan | `gaps.csv`: `k,delta,estimate,se,ess,lower,upper,ratio` |
//! | domination | `coupling.csv`: `sweeps,violations,rounding_fixes` or `dominance.csv`: `statistic,p_value,accepted` |
//! | gibbs-check | `gibbs.csv`: `line,node,time,statistic,p_value` |
//! | monotone-scan | `scan.csv`: `domain,n,left,right,estimate,se,ess,lower,upper` |
//! | accept | `accept.csv`: `gate,passed,seconds` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tilted_core::oracle::transfer_marginals;
use tilted_core::sampler::{checkpoint, restore, Chain, Observable, Recorder, SamplerConfig};
use tilted_core::stats::{
    effective_sample_size, ks_one_sample, ks_two_sample, mean_ci, monotone_scan, DominanceOptions, EstimateCI, ScanOptions,
    ScanSetting,
};

use crate::artifacts::{num, write_summary, CsvData, GateRecord, Manifest, RunDir, Summary, Versions};
use crate::config::{differing_keys, hex, model_view, DominationMethod, Experiment, ExperimentConfig, LowerChain};
use crate::error::{CliError, Result};
use crate::gates::{self, GATES};
use crate::runs::{self, chain_seed, par_map};
use crate::svg::{ecdf_points, Plot, Series};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub summary: Summary,
    /// Human-readable result lines.
    pub lines: Vec<String>,
}

/// Executes `config`, resuming chains from the checkpoints in `resume` when given.
/// A run that errors removes the output directory if it created it.
pub fn execute(config: &ExperimentConfig, resume: Option<&Path>) -> Result<RunReport> {
    let out = config.out_dir();
    let fresh = !out.exists();
    let result = run(config, resume);
    if result.is_err() && fresh {
        let _ = std::fs::remove_dir_all(&out);
    }
    result
}

fn run(config: &ExperimentConfig, resume: Option<&Path>) -> Result<RunReport> {
    config.validate()?;
    if resume.is_some() && !matches!(config.experiment, Experiment::Simulate { .. }) {
        return Err(CliError::config("--resume applies to simulate runs only"));
    }
    let start = Instant::now();
    let hash = config.hash();
    let out = config.out_dir();
    let mut dir = RunDir::create(&out, config.experiment.kind(), &hash)?;
    dir.bytes("config.toml", config.to_toml()?.as_bytes())?;
    let mut lines = Vec::new();
    let gates = match &config.experiment {
        Experiment::Simulate { samples, chains } => simulate(config, &mut dir, *samples, *chains, resume)?,
        Experiment::Oracle {} => oracle(config, &mut dir)?,
        Experiment::Compare { sampler_run, oracle_run, threshold } => compare(&mut dir, sampler_run, oracle_run, *threshold)?,
        Experiment::TightnessScan { stacks, alpha, samples } => {
            let est = runs::tightness(&config.sampler()?, stacks, *alpha, *samples, config.level, config.workers)?;
            let mut t = dir.csv("tightness.csv", &["n", "half_width", "estimate", "se", "ess", "lower", "upper", "relative_se"])?;
            for (s, e) in stacks.iter().zip(&est) {
                let mut row = vec![s.n.to_string(), num(s.half_width)];
                row.extend(ci_fields(e));
                row.push(num(e.relative_se()));
                t.row(row)?;
            }
            t.finish()?;
            let pts = stacks.iter().zip(&est).map(|(s, e)| (s.n as f64, e.estimate)).collect();
            let bars = est.iter().map(|e| (e.lower, e.upper)).collect();
            plot(&mut dir, Plot {
                title: format!("curved maximum of the top line, alpha = {alpha}"),
                x_label: "lines n".into(),
                y_label: "mean curved maximum".into(),
                series: vec![Series::line("estimate", pts).with_bars(bars)],
                ..Plot::default()
            })?;
            runs::tightness_gates(stacks, &est, 0.05)
        }
        Experiment::MaxScaling { lines: ks, ms, gamma, samples } => {
            let table = runs::max_scaling(&config.sampler()?, ks, ms, *gamma, *samples, config.level)?;
            let mut t = dir.csv("tails.csv", &["k", "m", "cut", "estimate", "se", "ess", "lower", "upper", "widened"])?;
            for r in &table.rows {
                let mut row = vec![r.k.to_string(), num(r.param), num(r.cut)];
                row.extend(ci_fields(&r.ci));
                row.push(r.ci.widened.to_string());
                t.row(row)?;
            }
            t.finish()?;
            let mut series: Vec<Series> = ks
                .iter()
                .map(|&k| {
                    let rows: Vec<_> = table.rows.iter().filter(|r| r.k == k).collect();
                    Series::line(format!("k = {k}"), rows.iter().map(|r| (r.param, r.ci.estimate)).collect())
                        .with_bars(rows.iter().map(|r| (r.ci.lower, r.ci.upper)).collect())
                })
                .collect();
            let c = table.constant;
            series.push(Series::line(format!("C/M, C = {c:.3}"), ms.iter().map(|&m| (m, c / m)).collect()).dashed());
            plot(&mut dir, Plot {
                title: "window-maximum tails".into(),
                x_label: "M".into(),
                y_label: "P(max X_k > lambda^(-(k-1)/3) M)".into(),
                log_x: true,
                log_y: true,
                series,
            })?;
            runs::max_scaling_gates(&table)
        }
        Experiment::GapScan { k, gamma, deltas, samples } => {
            let rows = runs::gap_scan(&config.sampler()?, *k, *gamma, deltas, *samples, config.level)?;
            let mut t = dir.csv("gaps.csv", &["k", "delta", "estimate", "se", "ess", "lower", "upper", "ratio"])?;
            for r in &rows {
                let mut row = vec![r.k.to_string(), num(r.param)];
                row.extend(ci_fields(&r.ci));
                row.push(num(r.ci.estimate / r.param));
                t.row(row)?;
            }
            t.finish()?;
            plot(&mut dir, Plot {
                title: format!("minimal gap of the top {k} lines"),
                x_label: "delta".into(),
                y_label: "P(g <= delta)".into(),
                log_x: true,
                log_y: true,
                series: vec![Series::line("estimate", rows.iter().map(|r| (r.param, r.ci.estimate)).collect())
                    .with_bars(rows.iter().map(|r| (r.ci.lower, r.ci.upper)).collect())],
            })?;
            runs::gap_gates(&rows)
        }
        Experiment::Domination { lower, samples, method, replicates } => {
            domination(config, &mut dir, lower, *samples, *method, *replicates)?
        }
        Experiment::GibbsCheck { left, right, samples } => {
            let sampler = config.sampler()?;
            let r = runs::gibbs(&sampler, *left, *right, *samples)?;
            let mut t = dir.csv("gibbs.csv", &["line", "node", "time", "statistic", "p_value"])?;
            for n in &r.inside {
                t.row([n.line.to_string(), n.node.to_string(), num(sampler.grid.time(n.node)), num(n.ks.statistic), num(n.ks.p_value)])?;
            }
            t.finish()?;
            plot(&mut dir, Plot {
                title: format!("block [{left}, {right}] resampled once more"),
                x_label: "line".into(),
                y_label: "KS p-value".into(),
                series: vec![Series {
                    label: "p-value".into(),
                    points: r.inside.iter().map(|n| (n.line as f64, n.ks.p_value)).collect(),
                    markers: true,
                    ..Series::default()
                }],
                ..Plot::default()
            })?;
            runs::gibbs_gates(&r, 0.01)
        }
        Experiment::MonotoneScan { settings, event, samples, shift } => {
            let sampler = config.sampler()?;
            let lambda = runs::geometric_lambda(&sampler)?;
            let a = match sampler.tilts {
                tilted_core::TiltSchedule::Geometric { a, .. } => a,
                _ => unreachable!("checked by geometric_lambda"),
            };
            let opts = ScanOptions {
                a,
                lambda,
                dt: sampler.grid.dt(),
                samples: *samples,
                burnin: sampler.burnin,
                thin: sampler.thin,
                block_len: sampler.block_len,
                seed: config.seed,
                level: config.level,
                workers: config.workers,
            };
            let r = monotone_scan(settings, event, &opts)?;
            let moved = match shift {
                Some(d) => {
                    let s: Vec<ScanSetting> = settings
                        .iter()
                        .map(|s| ScanSetting { left: s.left - d, right: s.right - d, ..*s })
                        .collect();
                    Some(monotone_scan(&s, &event.shifted(*d), &opts)?)
                }
                None => None,
            };
            let mut t = dir.csv("scan.csv", &["domain", "n", "left", "right", "estimate", "se", "ess", "lower", "upper"])?;
            for (tag, res) in [("original", Some(&r)), ("translated", moved.as_ref())] {
                let Some(res) = res else { continue };
                for (s, e) in res.settings.iter().zip(&res.estimates) {
                    let mut row = vec![tag.to_string(), s.n.to_string(), num(s.left), num(s.right)];
                    row.extend(ci_fields(e));
                    t.row(row)?;
                }
            }
            t.finish()?;
            plot(&mut dir, Plot {
                title: format!("P({}) under zero boundary conditions", r.observable),
                x_label: "lines n".into(),
                y_label: "probability".into(),
                series: vec![Series::line("estimate", settings.iter().zip(&r.estimates).map(|(s, e)| (s.n as f64, e.estimate)).collect())
                    .with_bars(r.estimates.iter().map(|e| (e.lower, e.upper)).collect())],
                ..Plot::default()
            })?;
            runs::scan_gates(&r, config.level, moved.as_ref())
        }
        Experiment::Accept { scale, only } => {
            let names: Vec<&str> = if only.is_empty() { GATES.to_vec() } else { only.iter().map(String::as_str).collect() };
            if let Some(bad) = names.iter().find(|n| !GATES.contains(n)) {
                return Err(CliError::config(format!("unknown gate {bad:?}; known: {}", GATES.join(", "))));
            }
            let mut outcomes = Vec::new();
            let mut t = dir.csv("accept.csv", &["gate", "passed", "seconds"])?;
            for name in names {
                let o = gates::run_gate(name, *scale, config.seed, config.workers)?;
                lines.push(o.line());
                t.row([o.gate.clone(), o.passed.to_string(), format!("{:.3}", o.seconds)])?;
                outcomes.push(o);
            }
            t.finish()?;
            plot(&mut dir, Plot {
                title: "acceptance gates (1 = pass)".into(),
                x_label: "gate".into(),
                y_label: "verdict".into(),
                series: vec![Series {
                    label: "verdict".into(),
                    points: outcomes.iter().enumerate().map(|(i, o)| ((i + 1) as f64, o.passed as u8 as f64)).collect(),
                    markers: true,
                    ..Series::default()
                }],
                ..Plot::default()
            })?;
            outcomes
                .into_iter()
                .flat_map(|o| {
                    let gate = o.gate;
                    o.records.into_iter().map(move |mut r| {
                        r.name = format!("{gate}: {}", r.name);
                        r
                    })
                })
                .collect()
        }
    };
    if !matches!(config.experiment, Experiment::Accept { .. }) {
        lines.extend(gates.iter().map(|g| {
            format!(
                "{} {} = {:.6} (threshold {:.6}) {}",
                if g.passed() { "PASS" } else { "FAIL" },
                g.name,
                g.estimate,
                g.threshold,
                g.detail
            )
            .trim_end()
            .to_string()
        }));
    }
    let summary = write_summary(&mut dir, &gates)?;
    let model_hash = config.sampler.as_ref().map(|s| hex(&s.model_hash()));
    let mut artifacts = dir.written().to_vec();
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        kind: config.experiment.kind().into(),
        config_hash: hash,
        model_hash,
        seed: config.seed,
        versions: Versions::current(),
        wall_seconds: start.elapsed().as_secs_f64(),
        artifacts,
        passed: summary.passed,
    };
    dir.json("manifest.json", &manifest)?;
    Ok(RunReport { dir: out, summary, lines })
}

fn ci_fields(e: &EstimateCI) -> Vec<String> {
    vec![num(e.estimate), num(e.se), num(e.ess), num(e.lower), num(e.upper)]
}

fn plot(dir: &mut RunDir, p: Plot) -> Result<()> {
    dir.bytes("plot.svg", p.render().as_bytes())
}

/// A chain's progress as stored in `checkpoints/chain-<i>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint {
    pub config_hash: String,
    pub chain: usize,
    /// Snapshot from [`tilted_core::sampler::checkpoint`].
    pub state: Vec<u8>,
    pub sweeps: Vec<u64>,
    pub values: Vec<Vec<f64>>,
}

pub fn checkpoint_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain-{chain}.json"))
}

#[derive(Debug, Clone)]
struct ChainRun {
    seed: u64,
    sweeps: Vec<u64>,
    values: Vec<Vec<f64>>,
    sweeps_done: u64,
    acceptance: Vec<f64>,
    endpoint_acceptance: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn simulate_chain(
    sampler: &SamplerConfig,
    hash: &str,
    index: usize,
    samples: usize,
    observables: &[Observable],
    every: usize,
    save: &Path,
    resume: Option<&Path>,
) -> Result<ChainRun> {
    let recorder = Recorder::new(observables, sampler)?;
    let seed = chain_seed(sampler, index as u64);
    let mut chain = Chain::with_seed(sampler.clone(), seed)?;
    let mut sweeps = Vec::new();
    let mut values = vec![Vec::new(); observables.len()];
    if let Some(path) = resume.map(|d| checkpoint_path(d, index)).filter(|p| p.exists()) {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let ck: ChainCheckpoint =
            serde_json::from_str(&text).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        if ck.config_hash != hash || ck.chain != index {
            return Err(CliError::config(format!(
                "{} was written by a different configuration",
                path.display()
            )));
        }
        chain.state = restore(&chain.kernel, &ck.state)?;
        sweeps = ck.sweeps;
        values = ck.values;
        if values.len() != observables.len() {
            return Err(CliError::config(format!("{} records other observables", path.display())));
        }
        sweeps.truncate(samples);
        values.iter_mut().for_each(|v| v.truncate(samples));
    }
    chain.burn_in()?;
    while sweeps.len() < samples {
        let step = if every == 0 { samples - sweeps.len() } else { every.min(samples - sweeps.len()) };
        chain.sample_with(step, |_, st| {
            sweeps.push(st.sweeps_done());
            recorder.record(st.lines(), &mut values);
            Ok(())
        })?;
        if every > 0 {
            let ck = ChainCheckpoint {
                config_hash: hash.to_string(),
                chain: index,
                state: checkpoint(&chain.kernel, &chain.state),
                sweeps: sweeps.clone(),
                values: values.clone(),
            };
            let path = checkpoint_path(save, index);
            let tmp = path.with_extension("json.tmp");
            let text = serde_json::to_string(&ck).expect("checkpoint serializes");
            std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(ChainRun {
        seed,
        sweeps,
        values,
        sweeps_done: chain.state.sweeps_done(),
        acceptance: chain.state.stats().iter().map(|s| s.acceptance_rate()).collect(),
        endpoint_acceptance: sampler.boundary.is_free().then(|| chain.state.endpoints().acceptance_rate()),
    })
}

fn simulate(config: &ExperimentConfig, dir: &mut RunDir, samples: usize, chains: usize, resume: Option<&Path>) -> Result<Vec<GateRecord>> {
    let sampler = config.sampler()?;
    let obs = &config.observables;
    let hash = config.chain_hash();
    let save = dir.path().join("checkpoints");
    if config.checkpoint_every > 0 {
        std::fs::create_dir_all(&save).map_err(|e| CliError::io(&save, e))?;
    }
    let runs = par_map(chains, config.workers, |i| {
        simulate_chain(&sampler, &hash, i, samples, obs, config.checkpoint_every, &save, resume)
    })?;
    let names: Vec<String> = obs.iter().map(Observable::name).collect();
    let mut header = vec!["chain", "sweep"];
    header.extend(names.iter().map(String::as_str));
    let mut t = dir.csv("samples.csv", &header)?;
    for (c, r) in runs.iter().enumerate() {
        for (k, s) in r.sweeps.iter().enumerate() {
            let mut row = vec![c.to_string(), s.to_string()];
            row.extend(r.values.iter().map(|col| num(col[k])));
            t.row(row)?;
        }
    }
    t.finish()?;
    let mut t = dir.csv("estimates.csv", &["observable", "chain", "mean", "se", "ess", "lower", "upper"])?;
    for (j, name) in names.iter().enumerate() {
        for (c, r) in runs.iter().enumerate() {
            let mut row = vec![name.clone(), c.to_string()];
            row.extend(ci_fields(&mean_ci(&r.values[j], config.level)?));
            t.row(row)?;
        }
        if chains > 1 {
            let all: Vec<f64> = runs.iter().flat_map(|r| r.values[j].iter().copied()).collect();
            let mut row = vec![name.clone(), "all".into()];
            row.extend(ci_fields(&mean_ci(&all, config.level)?));
            t.row(row)?;
        }
    }
    t.finish()?;
    let diagnostics: Vec<serde_json::Value> = runs
        .iter()
        .enumerate()
        .map(|(c, r)| {
            serde_json::json!({
                "chain": c,
                "seed": r.seed,
                "sweeps": r.sweeps_done,
                "retained": r.sweeps.len(),
                "ess": r.values.iter().map(|v| effective_sample_size(v)).collect::<Vec<_>>(),
                "block_acceptance": r.acceptance,
                "endpoint_acceptance": r.endpoint_acceptance,
            })
        })
        .collect();
    dir.json("diagnostics.json", &diagnostics)?;
    let series = runs
        .iter()
        .enumerate()
        .map(|(c, r)| {
            let mut v = r.values[0].clone();
            v.sort_by(f64::total_cmp);
            Series::line(format!("chain {c}"), ecdf_points(&v))
        })
        .collect();
    plot(dir, Plot {
        title: format!("empirical CDF of {}", names[0]),
        x_label: names[0].clone(),
        y_label: "CDF".into(),
        series,
        ..Plot::default()
    })?;
    Ok(Vec::new())
}

fn oracle(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<GateRecord>> {
    let sampler = config.sampler()?;
    let table = transfer_marginals(&sampler, &config.oracle)?;
    let mut dens = dir.csv("marginals.csv", &["node_time", "line", "x", "density"])?;
    let mut cdfs = dir.csv("cdf.csv", &["node_time", "line", "x", "cdf"])?;
    let mut moments = dir.csv("moments.csv", &["node_time", "line", "mean", "mass"])?;
    let mut worst_mass = 0.0f64;
    for i in 0..table.n {
        for j in 0..=table.grid.steps {
            let (Some(d), Some(c)) = (table.density(i, j), table.cdf(i, j)) else { continue };
            let t = num(table.grid.time(j));
            for k in 0..d.len() {
                let x = num(table.space.x(k));
                dens.row([t.clone(), (i + 1).to_string(), x.clone(), num(d[k])])?;
                cdfs.row([t.clone(), (i + 1).to_string(), x, num(c[k])])?;
            }
            let mass = table.mass(i, j).unwrap_or(f64::NAN);
            worst_mass = worst_mass.max((mass - 1.0).abs());
            moments.row([t, (i + 1).to_string(), num(table.mean(i, j).unwrap_or(f64::NAN)), num(mass)])?;
        }
    }
    dens.finish()?;
    cdfs.finish()?;
    moments.finish()?;
    dir.json("oracle.json", &serde_json::json!({ "log_partition": table.log_partition, "space": table.space }))?;
    let mid = table.grid.steps / 2;
    let series = (0..table.n)
        .filter_map(|i| {
            let d = table.density(i, mid)?;
            Some(Series::line(format!("line {}", i + 1), (0..d.len()).map(|k| (table.space.x(k), d[k])).collect()))
        })
        .collect();
    plot(dir, Plot {
        title: format!("one-point densities at t = {}", table.grid.time(mid)),
        x_label: "x".into(),
        y_label: "density".into(),
        series,
        ..Plot::default()
    })?;
    Ok(vec![GateRecord::new("marginals carry unit mass", worst_mass, (f64::NAN, f64::NAN), 1e-9, worst_mass < 1e-9)])
}

/// One-point laws recorded by an earlier run, keyed by `(line, time bits)`.
enum Laws {
    Samples(BTreeMap<(usize, u64), Vec<f64>>),
    Exact(BTreeMap<(usize, u64), (Vec<f64>, Vec<f64>)>),
}

fn load_run(path: &Path) -> Result<(ExperimentConfig, Laws)> {
    let config_path = path.join("config.toml");
    let config = ExperimentConfig::load(&config_path, &[])?;
    let check_hash = |data: &CsvData, file: &str| {
        if data.config_hash != config.hash() {
            Err(CliError::Run(format!("{} does not belong to {}", file, config_path.display())))
        } else {
            Ok(())
        }
    };
    match &config.experiment {
        Experiment::Simulate { .. } => {
            let data = CsvData::read(&path.join("samples.csv"))?;
            check_hash(&data, "samples.csv")?;
            let mut laws = BTreeMap::new();
            for o in &config.observables {
                if let Observable::Value { line, time } = o {
                    let col = data
                        .column(&o.name())
                        .ok_or_else(|| CliError::Run(format!("samples.csv lacks {}", o.name())))?;
                    laws.insert((*line, time.to_bits()), data.floats(col)?);
                }
            }
            Ok((config, Laws::Samples(laws)))
        }
        Experiment::Oracle {} => {
            let data = CsvData::read(&path.join("cdf.csv"))?;
            check_hash(&data, "cdf.csv")?;
            let (t, l, x, c) = (data.floats(0)?, data.floats(1)?, data.floats(2)?, data.floats(3)?);
            let mut laws: BTreeMap<(usize, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for k in 0..t.len() {
                let e = laws.entry((l[k] as usize, t[k].to_bits())).or_default();
                e.0.push(x[k]);
                e.1.push(c[k]);
            }
            Ok((config, Laws::Exact(laws)))
        }
        other => Err(CliError::config(format!(
            "{} is a {} run; compare needs simulate or oracle runs",
            path.display(),
            other.kind()
        ))),
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.partition_point(|&v| v <= x) {
        0 => 0.0,
        k if k == xs.len() => ys[k - 1],
        k => {
            let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
            ys[k - 1] + w * (ys[k] - ys[k - 1])
        }
    }
}

fn compare(dir: &mut RunDir, a_path: &Path, b_path: &Path, threshold: f64) -> Result<Vec<GateRecord>> {
    let (a_cfg, a) = load_run(a_path)?;
    let (b_cfg, b) = load_run(b_path)?;
    let (sa, sb) = (a_cfg.sampler()?, b_cfg.sampler()?);
    let diff = differing_keys(&model_view(&sa), &model_view(&sb), "sampler");
    if !diff.is_empty() {
        return Err(CliError::config(format!("the runs model different ensembles; differing keys: {}", diff.join(", "))));
    }
    let keys: Vec<(usize, u64)> = match (&a, &b) {
        (Laws::Samples(x), Laws::Samples(y)) => x.keys().filter(|k| y.contains_key(k)).copied().collect(),
        (Laws::Samples(x), Laws::Exact(y)) | (Laws::Exact(y), Laws::Samples(x)) => x.keys().filter(|k| y.contains_key(k)).copied().collect(),
        (Laws::Exact(x), Laws::Exact(y)) => x.keys().filter(|k| y.contains_key(k)).copied().collect(),
    };
    if keys.is_empty() {
        return Err(CliError::config("the runs share no (line, time) value observable"));
    }
    let mut t = dir.csv("compare.csv", &["line", "time", "distance", "p_value", "effective_samples", "threshold", "verdict"])?;
    let mut gates = Vec::new();
    let mut overlay = Vec::new();
    for (k, &(line, bits)) in keys.iter().enumerate() {
        let time = f64::from_bits(bits);
        let (distance, p_value, size) = match (&a, &b) {
            (Laws::Samples(x), Laws::Samples(y)) => {
                let (u, v) = (&x[&(line, bits)], &y[&(line, bits)]);
                let (eu, ev) = (effective_sample_size(u), effective_sample_size(v));
                let r = ks_two_sample(u, v, Some((eu, ev)))?;
                if k == 0 {
                    for (label, s) in [("first run", u), ("second run", v)] {
                        let mut s = s.clone();
                        s.sort_by(f64::total_cmp);
                        overlay.push(Series::line(label, ecdf_points(&s)));
                    }
                }
                (r.statistic, r.p_value, eu * ev / (eu + ev))
            }
            (Laws::Samples(x), Laws::Exact(y)) | (Laws::Exact(y), Laws::Samples(x)) => {
                let u = &x[&(line, bits)];
                let (xs, cs) = &y[&(line, bits)];
                let e = effective_sample_size(u);
                let r = ks_one_sample(u, |v| interpolate(xs, cs, v), Some(e))?;
                if k == 0 {
                    let mut s = u.clone();
                    s.sort_by(f64::total_cmp);
                    overlay.push(Series::line("sampler", ecdf_points(&s)));
                    overlay.push(Series::line("oracle", xs.iter().copied().zip(cs.iter().copied()).collect()).dashed());
                }
                (r.statistic, r.p_value, e)
            }
            (Laws::Exact(x), Laws::Exact(y)) => {
                let ((xa, ca), (xb, cb)) = (&x[&(line, bits)], &y[&(line, bits)]);
                let d = xa
                    .iter()
                    .zip(ca)
                    .map(|(&v, &c)| (c - interpolate(xb, cb, v)).abs())
                    .chain(xb.iter().zip(cb).map(|(&v, &c)| (c - interpolate(xa, ca, v)).abs()))
                    .fold(0.0, f64::max);
                if k == 0 {
                    overlay.push(Series::line("first oracle", xa.iter().copied().zip(ca.iter().copied()).collect()));
                    overlay.push(Series::line("second oracle", xb.iter().copied().zip(cb.iter().copied()).collect()).dashed());
                }
                (d, f64::NAN, f64::INFINITY)
            }
        };
        let pass = distance < threshold;
        t.row([line.to_string(), num(time), num(distance), num(p_value), num(size), num(threshold), if pass { "pass" } else { "fail" }.into()])?;
        gates.push(
            GateRecord::new(format!("line {line} at t={time}: KS distance"), distance, (f64::NAN, f64::NAN), threshold, pass)
                .with_detail(format!("p = {p_value:.3}, effective size {size:.0}")),
        );
    }
    t.finish()?;
    let (line, bits) = keys[0];
    plot(dir, Plot {
        title: format!("CDF of line {line} at t = {}", f64::from_bits(bits)),
        x_label: "x".into(),
        y_label: "CDF".into(),
        series: overlay,
        ..Plot::default()
    })?;
    Ok(gates)
}

fn domination(
    config: &ExperimentConfig,
    dir: &mut RunDir,
    lower: &LowerChain,
    samples: usize,
    method: DominationMethod,
    replicates: usize,
) -> Result<Vec<GateRecord>> {
    let hi = config.sampler()?;
    let mut lo = hi.clone();
    if let Some(t) = &lower.tilts {
        lo.tilts = t.clone();
    }
    if let Some(f) = &lower.floor {
        lo.floor = Some(f.clone());
    }
    lo.validate()?;
    let coupled = match method {
        DominationMethod::Auto => !hi.boundary.is_free(),
        DominationMethod::Coupled => true,
        DominationMethod::Test => false,
    };
    if coupled {
        let r = runs::coupling(&lo, &hi, samples as u64, chain_seed(&hi, 0))?;
        let mut t = dir.csv("coupling.csv", &["sweeps", "violations", "rounding_fixes"])?;
        t.row([r.sweeps.to_string(), r.violations.to_string(), r.rounding_fixes.to_string()])?;
        t.finish()?;
        plot(dir, Plot {
            title: "coupled chains".into(),
            x_label: "sweeps".into(),
            y_label: "order violations".into(),
            series: vec![Series::line("violations", vec![(0.0, 0.0), (r.sweeps as f64, r.violations as f64)])],
            ..Plot::default()
        })?;
        return Ok(vec![runs::coupling_gate("lower chain below upper chain", &r)]);
    }
    let obs = config
        .observables
        .first()
        .ok_or_else(|| CliError::config("the dominance test needs an observable in [[observables]]"))?;
    let alpha = 1.0 - config.level;
    let opts = DominanceOptions { replicates, alpha, seed: chain_seed(&hi, 2) };
    let (r, values) = runs::dominance(&lo, &hi, obs, samples, &opts, config.workers)?;
    let mut t = dir.csv("dominance.csv", &["statistic", "p_value", "accepted"])?;
    t.row([num(r.statistic), num(r.p_value), r.accepted.to_string()])?;
    t.finish()?;
    let series = ["lower chain", "upper chain"]
        .iter()
        .zip(&values)
        .map(|(label, v)| {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            Series::line(*label, ecdf_points(&v))
        })
        .collect();
    plot(dir, Plot {
        title: format!("empirical CDFs of {}", obs.name()),
        x_label: obs.name(),
        y_label: "CDF".into(),
        series,
        ..Plot::default()
    })?;
    Ok(vec![runs::dominance_gate(&r, alpha)])
}
