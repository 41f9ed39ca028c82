//! Sampling, exact reference computations and statistics for ordered Brownian bridges
//! above a hard wall, each line penalized by its area.

pub mod boundary;
pub mod bridge;
pub mod error;
pub mod grid;
pub mod normal;
pub mod observables;
pub mod oracle;
pub mod path;
pub mod sampler;
pub mod stats;
pub mod tilt;

pub use boundary::{BoundaryCondition, EndpointPotential};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use path::{Ensemble, Path};
pub use tilt::{TiltProfile, TiltSchedule};
