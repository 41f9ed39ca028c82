//! Reference computations: reflection and Karlin–McGregor formulas, transfer-operator
//! quadrature of the discrete measure, and the Harnack ratio check.

mod closed;
mod harnack;
mod transfer;

pub use closed::{determinant, km_prob, reflection_positive_prob, KmProb, CONDITION_WARNING};
pub use harnack::{harnack_ratio_check, killed_density, HarnackReport, HarnackWeight};
pub use transfer::{
    brute_partition, log_partition, sample_paths, transfer_marginals, MarginalTable, OracleOptions,
    SpaceGrid, CUTOFF_TOLERANCE,
};
