//! Brownian-Gibbs block sampler for the tilted line ensembles.

mod chain;
mod checkpoint;
mod config;
mod coupling;
mod diagnostics;
mod kernel;

pub use chain::{run_chain, run_chains, Chain, Diagnostics, Observable, Recorder, RunOutput, SampleTable};
pub use checkpoint::{checkpoint, restore, FORMAT_VERSION};
pub use config::{derive_seed, Level, SamplerConfig, SweepSchedule};
pub use coupling::{coupled_sweep, CoupledChains};
pub use diagnostics::{proposal_acceptance, AcceptanceEstimate, ProposalCheck};
pub use kernel::{ChainState, EndpointState, GibbsSampler, LineStats};
