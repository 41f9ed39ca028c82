//! The nine acceptance gates at full scale. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p tilted-cli --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order.

use tilted_cli::gates::run_gate;
use tilted_cli::Scale;

const SEED: u64 = 20240611;

fn gate(name: &str) {
    let outcome = run_gate(name, Scale::Full, SEED, 1).unwrap_or_else(|e| panic!("FAIL {name}: {e}"));
    println!("{}", outcome.line());
    for r in outcome.records.iter().filter(|r| !r.passed()) {
        println!("  failed: {} = {} (threshold {}) {}", r.name, r.estimate, r.threshold, r.detail);
    }
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn oracle_equivalence() {
    gate("oracle-equivalence");
}

#[test]
fn untilted_exactness() {
    gate("untilted-exactness");
}

#[test]
fn curved_max_tightness() {
    gate("curved-max-tightness");
}

#[test]
fn max_scaling() {
    gate("max-scaling");
}

#[test]
fn monotone_coupling() {
    gate("monotone-coupling");
}

#[test]
fn gibbs_consistency() {
    gate("gibbs-consistency");
}

#[test]
fn minimal_gaps() {
    gate("minimal-gaps");
}

#[test]
fn zero_boundary_monotonicity() {
    gate("zero-boundary-monotonicity");
}

#[test]
fn determinism() {
    gate("determinism");
}
