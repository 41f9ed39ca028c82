//! Zero-boundary probabilities of increasing events along growing domains.

use serde::{Deserialize, Serialize};

use super::estimate::{proportion_ci, EstimateCI};
use crate::boundary::BoundaryCondition;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::sampler::{derive_seed, Chain, Observable, SamplerConfig, SweepSchedule};
use crate::tilt::TiltSchedule;

/// Number of lines and the domain `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSetting {
    pub n: usize,
    pub left: f64,
    pub right: f64,
}

impl ScanSetting {
    /// Componentwise `(n, -left, right) <=` with at least one strict inequality.
    pub fn precedes(&self, other: &ScanSetting) -> bool {
        let le = self.n <= other.n && other.left <= self.left && self.right <= other.right;
        le && (self.n < other.n || other.left < self.left || self.right < other.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanEvent {
    Always,
    /// `X_line(time) > threshold`.
    Above { line: usize, time: f64, threshold: f64 },
    /// `X_line(time) <= threshold`; decreasing, hence refused.
    Below { line: usize, time: f64, threshold: f64 },
}

impl ScanEvent {
    pub fn name(&self) -> String {
        match self {
            ScanEvent::Always => "always".into(),
            ScanEvent::Above { line, time, threshold } => format!("x{line}(t={time})>{threshold}"),
            ScanEvent::Below { line, time, threshold } => format!("x{line}(t={time})<={threshold}"),
        }
    }

    /// The same event with time relabelled by `-shift`.
    pub fn shifted(&self, shift: f64) -> ScanEvent {
        match *self {
            ScanEvent::Always => ScanEvent::Always,
            ScanEvent::Above { line, time, threshold } => ScanEvent::Above {
                line,
                time: time - shift,
                threshold,
            },
            ScanEvent::Below { line, time, threshold } => ScanEvent::Below {
                line,
                time: time - shift,
                threshold,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOptions {
    pub a: f64,
    pub lambda: f64,
    pub dt: f64,
    pub samples: usize,
    pub burnin: usize,
    pub thin: usize,
    pub block_len: usize,
    pub seed: u64,
    pub level: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub observable: String,
    pub settings: Vec<ScanSetting>,
    pub estimates: Vec<EstimateCI>,
    /// No estimate falls below its predecessor by more than the joint interval.
    pub non_decreasing: bool,
    /// The last two estimates lie within their joint interval.
    pub saturated: bool,
}

fn setting_config(s: &ScanSetting, opts: &ScanOptions) -> Result<SamplerConfig> {
    let steps = ((s.right - s.left) / opts.dt).round();
    if !(steps >= 2.0) || ((s.right - s.left) / steps - opts.dt).abs() > 1e-9 * opts.dt {
        return Err(domain(format!(
            "domain [{}, {}] is not a multiple of dt = {}",
            s.left, s.right, opts.dt
        )));
    }
    let mut c = SamplerConfig::new(
        s.n,
        TimeGrid::new(s.left, s.right, steps as usize)?,
        TiltSchedule::geometric(opts.a, opts.lambda)?,
        BoundaryCondition::Zero,
    );
    c.burnin = opts.burnin;
    c.thin = opts.thin;
    c.block_len = opts.block_len;
    c.schedule = SweepSchedule::Systematic;
    c.validate()?;
    Ok(c)
}

/// Seed for setting `index`; invariant under translating the domain.
fn setting_seed(config: &SamplerConfig, base: u64, index: usize) -> u64 {
    let mut c = config.clone();
    c.grid = c.grid.shifted(c.grid.left);
    derive_seed(base, index as u64, &c.model_hash())
}

/// Estimates `P(event)` under zero boundary conditions for each setting, in order.
pub fn monotone_scan(settings: &[ScanSetting], event: &ScanEvent, opts: &ScanOptions) -> Result<ScanResult> {
    if let ScanEvent::Below { .. } = event {
        return Err(Error::Usage(
            "monotone_scan admits increasing events only (threshold exceedances)".into(),
        ));
    }
    if settings.is_empty() {
        return Err(domain("no settings to scan"));
    }
    if let Some(w) = settings.windows(2).find(|w| !w[0].precedes(&w[1])) {
        return Err(domain(format!("settings must increase: {:?} then {:?}", w[0], w[1])));
    }
    let configs = settings
        .iter()
        .map(|s| setting_config(s, opts))
        .collect::<Result<Vec<_>>>()?;
    let observable = match *event {
        ScanEvent::Above { line, time, .. } => Some(Observable::Value { line, time }),
        _ => None,
    };
    let run = |index: usize| -> Result<EstimateCI> {
        let c = &configs[index];
        let seed = setting_seed(c, opts.seed, index);
        let obs: Vec<Observable> = observable.iter().cloned().collect();
        let out = Chain::with_seed(c.clone(), seed)?.run(opts.samples, &obs, false)?;
        let hits: Vec<bool> = match *event {
            ScanEvent::Above { threshold, .. } => out.table.values[0].iter().map(|&v| v > threshold).collect(),
            _ => vec![true; opts.samples],
        };
        proportion_ci(&hits, opts.level)
    };
    let estimates = parallel_map(configs.len(), opts.workers, run)?;
    let z = super::estimate::z_for(opts.level);
    let non_decreasing = estimates
        .windows(2)
        .all(|w| w[1].estimate >= w[0].estimate - z * w[0].se.hypot(w[1].se));
    let saturated = match estimates.len() {
        0 | 1 => true,
        k => estimates[k - 2].compatible(&estimates[k - 1]),
    };
    Ok(ScanResult {
        observable: event.name(),
        settings: settings.to_vec(),
        estimates,
        non_decreasing,
        saturated,
    })
}

/// Evaluates `f(0..len)` on up to `workers` threads, keeping index order.
pub(crate) fn parallel_map<T: Send>(
    len: usize,
    workers: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let workers = workers.clamp(1, len.max(1));
    if workers == 1 {
        return (0..len).map(f).collect();
    }
    let f = &f;
    let mut out: Vec<Option<Result<T>>> = (0..len).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || (w..len).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("scan worker panicked") {
                out[i] = Some(r);
            }
        }
    });
    out.into_iter().map(|r| r.expect("every index is visited")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ScanOptions {
        ScanOptions {
            a: 1.0,
            lambda: 2.0,
            dt: 0.1,
            samples: 300,
            burnin: 50,
            thin: 1,
            block_len: 8,
            seed: 3,
            level: 0.99,
            workers: 2,
        }
    }

    fn settings() -> Vec<ScanSetting> {
        vec![
            ScanSetting { n: 1, left: -0.5, right: 0.5 },
            ScanSetting { n: 2, left: -1.0, right: 1.0 },
        ]
    }

    #[test]
    fn constant_event_is_certain() {
        let r = monotone_scan(&settings(), &ScanEvent::Always, &opts()).unwrap();
        assert!(r.estimates.iter().all(|e| e.estimate == 1.0));
        assert!(r.non_decreasing && r.saturated);
    }

    #[test]
    fn decreasing_events_are_refused() {
        let e = ScanEvent::Below { line: 1, time: 0.0, threshold: 0.5 };
        assert!(matches!(monotone_scan(&settings(), &e, &opts()), Err(Error::Usage(_))));
    }

    #[test]
    fn settings_must_grow() {
        let mut s = settings();
        s.reverse();
        assert!(monotone_scan(&s, &ScanEvent::Always, &opts()).is_err());
        let same = vec![s[0], s[0]];
        assert!(monotone_scan(&same, &ScanEvent::Always, &opts()).is_err());
    }

    #[test]
    fn translated_domains_give_identical_estimates() {
        let e = ScanEvent::Above { line: 1, time: 0.0, threshold: 0.3 };
        let a = monotone_scan(&settings(), &e, &opts()).unwrap();
        let shift = 1.0;
        let moved: Vec<ScanSetting> = settings()
            .iter()
            .map(|s| ScanSetting { left: s.left - shift, right: s.right - shift, ..*s })
            .collect();
        let b = monotone_scan(&moved, &e.shifted(shift), &opts()).unwrap();
        assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let e = ScanEvent::Above { line: 1, time: 0.0, threshold: 0.3 };
        let mut o = opts();
        let a = monotone_scan(&settings(), &e, &o).unwrap();
        o.workers = 1;
        assert_eq!(a, monotone_scan(&settings(), &e, &o).unwrap());
    }
}
