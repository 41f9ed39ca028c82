//! Experiment configuration: a strict TOML schema with dotted-key overrides.
//!
//! ```toml
//! seed = 7
//! out = "runs/reference"
//!
//! [experiment]
//! kind = "simulate"
//! samples = 100000
//!
//! [sampler]
//! n = 1
//! grid = { left = -1.0, right = 1.0, steps = 40 }
//! tilts = { kind = "geometric", a = 1.0, lambda = 2.0 }
//! boundary = { kind = "zero" }
//!
//! [[observables]]
//! kind = "value"
//! line = 1
//! time = 0.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tilted_core::oracle::OracleOptions;
use tilted_core::sampler::{Level, Observable, SamplerConfig};
use tilted_core::stats::{ScanEvent, ScanSetting, DEFAULT_LEVEL};
use tilted_core::{TiltSchedule, TimeGrid};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Base seed; every chain seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory, `runs/<kind>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
    /// Retained samples between chain checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Confidence level of every interval and gate.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub oracle: OracleOptions,
}

/// Number of lines and half-width `T` of the symmetric domain `[-T, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stack {
    pub n: usize,
    pub half_width: f64,
}

/// Overrides applied to `[sampler]` to obtain the chain expected to lie below it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerChain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilts: Option<TiltSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominationMethod {
    /// Coupled chains when the boundary is pinned, a two-sample test otherwise.
    #[default]
    Auto,
    Coupled,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Sample sizes of the stated acceptance criteria.
    #[default]
    Full,
    /// A few percent of the full budget; exercises the plumbing only.
    Smoke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Runs `chains` independent chains and records `observables`.
    Simulate {
        samples: usize,
        #[serde(default = "one")]
        chains: usize,
    },
    /// Exact one-point marginals and partition function of `[sampler]`.
    Oracle {},
    /// KS distances between the one-point laws of two earlier runs.
    Compare {
        sampler_run: PathBuf,
        oracle_run: PathBuf,
        #[serde(default = "default_ks_threshold")]
        threshold: f64,
    },
    /// Curved maxima of the top line across growing stacks.
    TightnessScan {
        stacks: Vec<Stack>,
        alpha: f64,
        samples: usize,
    },
    /// Window-maximum tails `P(max X_k > lambda^{-(k-1)/3} M)` against `C / M`.
    MaxScaling {
        lines: Vec<usize>,
        ms: Vec<f64>,
        gamma: f64,
        samples: usize,
    },
    /// Minimal-gap probabilities `P(g <= delta)` of the top `k` lines.
    GapScan {
        k: usize,
        gamma: f64,
        deltas: Vec<f64>,
        samples: usize,
    },
    /// Stochastic order between `[sampler]` and a lower chain.
    Domination {
        #[serde(default)]
        lower: LowerChain,
        samples: usize,
        #[serde(default)]
        method: DominationMethod,
        #[serde(default = "default_replicates")]
        replicates: usize,
    },
    /// Extra block resampling of stationary states on `[left, right]`.
    GibbsCheck { left: f64, right: f64, samples: usize },
    /// Zero-boundary event probabilities along growing domains.
    MonotoneScan {
        settings: Vec<ScanSetting>,
        event: ScanEvent,
        samples: usize,
        /// Also rerun every domain translated by this amount and require identical estimates.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
    },
    /// The acceptance gates; `only` selects gates by name.
    Accept {
        #[serde(default)]
        scale: Scale,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        only: Vec<String>,
    },
}

fn one() -> usize {
    1
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

fn default_ks_threshold() -> f64 {
    0.01
}

fn default_replicates() -> usize {
    1000
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Oracle {} => "oracle",
            Experiment::Compare { .. } => "compare",
            Experiment::TightnessScan { .. } => "tightness-scan",
            Experiment::MaxScaling { .. } => "max-scaling",
            Experiment::GapScan { .. } => "gap-scan",
            Experiment::Domination { .. } => "domination",
            Experiment::GibbsCheck { .. } => "gibbs-check",
            Experiment::MonotoneScan { .. } => "monotone-scan",
            Experiment::Accept { .. } => "accept",
        }
    }

    fn needs_sampler(&self) -> bool {
        !matches!(self, Experiment::Compare { .. } | Experiment::Accept { .. })
    }
}

impl ExperimentConfig {
    /// Reads `path`, applies `KEY=VALUE` overrides and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return Err(CliError::config(format!("level must lie in (0.5, 1), got {}", self.level)));
        }
        match (&self.sampler, self.experiment.needs_sampler()) {
            (None, true) => {
                return Err(CliError::config(format!(
                    "experiment kind {} needs a [sampler] table",
                    self.experiment.kind()
                )))
            }
            (Some(s), _) => {
                s.validate()?;
                if s.seed != 0 && s.seed != self.seed {
                    return Err(CliError::config("set the seed at the top level, not in [sampler]"));
                }
            }
            (None, false) => {}
        }
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(CliError::config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match &self.experiment {
            Experiment::Simulate { samples, chains } => {
                positive("samples", *samples)?;
                positive("chains", *chains)?;
                if self.observables.is_empty() {
                    return Err(CliError::config("simulate needs at least one [[observables]] entry"));
                }
            }
            Experiment::Compare { threshold, .. } if !(*threshold > 0.0) => {
                return Err(CliError::config("compare threshold must be positive"));
            }
            Experiment::TightnessScan { stacks, samples, .. } => {
                positive("samples", *samples)?;
                if stacks.is_empty() {
                    return Err(CliError::config("tightness-scan needs at least one stack"));
                }
            }
            Experiment::MaxScaling { lines, ms, samples, .. } => {
                positive("samples", *samples)?;
                if lines.is_empty() || ms.is_empty() {
                    return Err(CliError::config("max-scaling needs lines and ms"));
                }
            }
            Experiment::GapScan { deltas, samples, .. } => {
                positive("samples", *samples)?;
                if deltas.is_empty() {
                    return Err(CliError::config("gap-scan needs deltas"));
                }
            }
            Experiment::Domination { samples, replicates, .. } => {
                positive("samples", *samples)?;
                positive("replicates", *replicates)?;
            }
            Experiment::GibbsCheck { samples, .. } | Experiment::MonotoneScan { samples, .. } => {
                positive("samples", *samples)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// The sampler table with the base seed filled in.
    pub fn sampler(&self) -> Result<SamplerConfig> {
        let mut s = self
            .sampler
            .clone()
            .ok_or_else(|| CliError::config("missing [sampler] table"))?;
        s.seed = self.seed;
        Ok(s)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.experiment.kind()))
    }

    /// SHA-256 (hex) of everything that influences results: output location, worker count
    /// and checkpoint cadence are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            for k in ["out", "workers", "checkpoint_every"] {
                m.remove(k);
            }
        }
        hex(&Sha256::digest(v.to_string().as_bytes()))
    }

    /// Like [`hash`](Self::hash) but blind to the number of samples, so a checkpointed run
    /// can be extended.
    pub fn chain_hash(&self) -> String {
        let mut c = self.clone();
        if let Experiment::Simulate { samples, .. } = &mut c.experiment {
            *samples = 0;
        }
        c.hash()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `a.b.c=VALUE`; `VALUE` is read as a TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override {assignment:?} is not KEY=VALUE")))?;
    let key = key.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("bad override key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Dotted names of the leaves where two JSON values differ.
pub fn differing_keys(a: &serde_json::Value, b: &serde_json::Value, prefix: &str) -> Vec<String> {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            keys.into_iter()
                .flat_map(|k| {
                    let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    match (x.get(k), y.get(k)) {
                        (Some(u), Some(v)) => differing_keys(u, v, &name),
                        _ => vec![name],
                    }
                })
                .collect()
        }
        _ if a == b => Vec::new(),
        _ => vec![prefix.to_string()],
    }
}

/// The part of a sampler configuration that defines the target measure.
pub fn model_view(s: &SamplerConfig) -> serde_json::Value {
    serde_json::json!({
        "n": s.n,
        "grid": s.grid,
        "tilts": s.tilts,
        "boundary": s.boundary,
        "floor": s.floor,
        "ceiling": s.ceiling,
    })
}

/// `[sampler]` resized to `n` lines on `[-half_width, half_width]`, keeping the time step.
pub fn resized(base: &SamplerConfig, stack: &Stack) -> Result<SamplerConfig> {
    let dt = base.grid.dt();
    let steps = (2.0 * stack.half_width / dt).round();
    if !(steps >= 2.0) || (2.0 * stack.half_width / steps - dt).abs() > 1e-9 * dt {
        return Err(CliError::config(format!(
            "half-width {} is not a multiple of dt = {dt}",
            stack.half_width
        )));
    }
    let mut c = base.clone();
    c.n = stack.n;
    c.grid = TimeGrid::new(-stack.half_width, stack.half_width, steps as usize)?;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMULATE: &str = r#"
seed = 3
[experiment]
kind = "simulate"
samples = 10
[sampler]
n = 1
grid = { left = -1.0, right = 1.0, steps = 8 }
tilts = { kind = "geometric", a = 1.0, lambda = 2.0 }
boundary = { kind = "zero" }
[[observables]]
kind = "value"
line = 1
time = 0.0
"#;

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml(SIMULATE, &[]).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SIMULATE.replace("samples = 10", "samples = 10\nsample = 3");
        assert!(matches!(ExperimentConfig::from_toml(&bad, &[]), Err(CliError::Config(_))));
        let bad = SIMULATE.replace("n = 1", "n = 1\nlines = 1");
        assert!(matches!(ExperimentConfig::from_toml(&bad, &[]), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::from_toml(SIMULATE, &["sampler.grid.steps=20".into(), "experiment.samples=5".into()]).unwrap();
        assert_eq!(c.sampler.unwrap().grid.steps, 20);
        assert_eq!(c.experiment, Experiment::Simulate { samples: 5, chains: 1 });
        let c = ExperimentConfig::from_toml(SIMULATE, &["out=some/dir".into()]).unwrap();
        assert_eq!(c.out_dir(), PathBuf::from("some/dir"));
        assert!(ExperimentConfig::from_toml(SIMULATE, &["seed".into()]).is_err());
        assert!(ExperimentConfig::from_toml(SIMULATE, &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_location_only() {
        let a = ExperimentConfig::from_toml(SIMULATE, &[]).unwrap();
        let b = ExperimentConfig::from_toml(SIMULATE, &["out=x".into(), "workers=4".into()]).unwrap();
        let c = ExperimentConfig::from_toml(SIMULATE, &["seed=4".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn differing_keys_are_named() {
        let a = serde_json::json!({"n": 1, "grid": {"left": -1, "steps": 8}});
        let b = serde_json::json!({"n": 1, "grid": {"left": -1, "steps": 9}, "extra": 0});
        assert_eq!(differing_keys(&a, &b, ""), vec!["extra", "grid.steps"]);
        assert!(differing_keys(&a, &a, "").is_empty());
    }

    #[test]
    fn resizing_keeps_the_time_step() {
        let c = ExperimentConfig::from_toml(SIMULATE, &[]).unwrap().sampler().unwrap();
        let r = resized(&c, &Stack { n: 3, half_width: 2.0 }).unwrap();
        assert_eq!((r.n, r.grid.steps), (3, 16));
        assert!(resized(&c, &Stack { n: 3, half_width: 0.3 }).is_err());
    }
}
