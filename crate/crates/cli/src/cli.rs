//! Command-line front end. Every flag can also come from a `TILTED_*` environment variable.

use std::path::PathBuf;

use clap::Parser;

use crate::app::execute;
use crate::config::ExperimentConfig;
use crate::error::{EXIT_GATE, EXIT_PASS};

#[derive(Debug, Clone, Parser)]
#[command(name = "tilted", version, about = "Run a line-ensemble experiment described by a TOML file")]
pub struct Args {
    /// Experiment configuration (TOML).
    #[arg(long, env = "TILTED_CONFIG", value_name = "PATH")]
    pub config: PathBuf,

    /// Override a configuration key, e.g. `--set sampler.grid.steps=80`; repeatable.
    /// In `TILTED_SET`, separate assignments with `;`.
    #[arg(long = "set", env = "TILTED_SET", value_name = "KEY=VALUE", value_delimiter = ';')]
    pub set: Vec<String>,

    /// Output directory (overrides `out`).
    #[arg(long, env = "TILTED_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Base seed (overrides `seed`).
    #[arg(long, env = "TILTED_SEED", value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads (overrides `workers`).
    #[arg(long, env = "TILTED_WORKERS", value_name = "N")]
    pub workers: Option<usize>,

    /// Directory of chain checkpoints to continue from.
    #[arg(long, env = "TILTED_RESUME", value_name = "CHECKPOINT")]
    pub resume: Option<PathBuf>,

    /// Only report errors.
    #[arg(long, short)]
    pub quiet: bool,
}

impl Args {
    /// `--set` assignments followed by the dedicated flags, which take precedence.
    pub fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(p) = &self.out {
            let quoted = toml::Value::String(p.to_string_lossy().into_owned()).to_string();
            o.push(format!("out={quoted}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(w) = self.workers {
            o.push(format!("workers={w}"));
        }
        o
    }
}

/// Runs the experiment and returns the process exit status.
pub fn run(args: &Args) -> u8 {
    let result = ExperimentConfig::load(&args.config, &args.overrides())
        .and_then(|config| execute(&config, args.resume.as_deref()));
    match result {
        Ok(report) => {
            if !args.quiet {
                for line in &report.lines {
                    println!("{line}");
                }
                println!(
                    "{}: {}",
                    if report.summary.passed { "passed" } else { "failed" },
                    report.dir.join("summary.json").display()
                );
            }
            if report.summary.passed {
                EXIT_PASS
            } else {
                EXIT_GATE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
