//! Estimators, confidence intervals and the tests behind the pass/fail gates.

pub mod ess;
pub mod estimate;
pub mod gibbs;
pub mod ks;
pub mod scan;
pub mod tails;

pub use ess::{autocorrelation, effective_sample_size, integrated_autocorrelation, pooled_ess};
pub use estimate::{mean_ci, proportion_ci, wilson, z_for, EstimateCI, DEFAULT_LEVEL};
pub use gibbs::{gibbs_consistency, GibbsCheck, GibbsReport, NodeTest, GIBBS_P_THRESHOLD};
pub use ks::{kolmogorov_sf, ks_distance, ks_one_sample, ks_two_sample, KsResult};
pub use scan::{monotone_scan, ScanEvent, ScanOptions, ScanResult, ScanSetting};
pub use tails::{
    curved_max_ci, dominance_test, estimate_curved_max, gap_tail, max_tail_scan, modulus_tail, Direction,
    DominanceOptions, DominanceResult, MaxTailTable, TailRow,
};
