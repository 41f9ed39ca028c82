use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::SamplerConfig;
use crate::bridge::fill_bridge;
use crate::error::{Error, Result};
use crate::oracle::km_prob;
use crate::tilt::block_shift;

/// Which event the unconstrained proposals are tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalCheck {
    /// Ordering (and the wall) at grid nodes only, the event of the discrete measure.
    Nodes,
    /// Additionally, each grid interval is survived with the exact bridge probability,
    /// which reproduces the continuous-time event for untilted lines.
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceEstimate {
    pub trials: u64,
    pub accepted: u64,
    pub p: f64,
    pub se: f64,
}

/// Fraction of joint proposals (one bridge plus tilt shift per line, between the fixed
/// pins) that satisfy the constraints. `wall` toggles the floor.
pub fn proposal_acceptance(
    config: &SamplerConfig,
    wall: bool,
    check: ProposalCheck,
    trials: u64,
    seed: u64,
) -> Result<AcceptanceEstimate> {
    config.validate()?;
    let n = config.n;
    let grid = &config.grid;
    let m = grid.steps;
    let dt = grid.dt();
    let pins: Vec<(f64, f64)> = (0..n)
        .map(|i| config.boundary.pins(i))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Usage("proposal acceptance needs pinned endpoints".into()))?;
    let floor = config.floor_values()?;
    let ceiling = config.ceiling_values()?;
    let shifts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let rho: Vec<f64> = (1..m).map(|j| config.tilts.rho(i, j)).collect();
            let mut s = Vec::new();
            block_shift(dt, &rho, &mut s);
            s
        })
        .collect();
    if check == ProposalCheck::Continuum {
        if shifts.iter().flatten().any(|s| *s != 0.0) {
            return Err(Error::Usage("the continuum check needs untilted lines".into()));
        }
        if wall && floor.iter().any(|f| *f != 0.0) {
            return Err(Error::Usage("the continuum check supports the wall at zero only".into()));
        }
        let strict = |k: usize| {
            let v: Vec<f64> = pins.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect();
            v.windows(2).all(|w| w[0] > w[1]) && (!wall || v[n - 1] > 0.0)
        };
        if !(strict(0) && strict(1)) {
            return Err(Error::Usage("the continuum check needs strictly separated pins".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = vec![vec![0.0; m + 1]; n];
    let mut starts = vec![0.0; n];
    let mut ends = vec![0.0; n];
    let mut accepted = 0u64;
    for _ in 0..trials {
        for (i, line) in lines.iter_mut().enumerate() {
            fill_bridge(dt, pins[i].0, pins[i].1, line, &mut rng);
            for j in 1..m {
                line[j] += shifts[i][j - 1];
            }
        }
        let nodes_ok = (1..m).all(|j| {
            let mut above = ceiling[j];
            for (i, line) in lines.iter().enumerate() {
                let x = line[j];
                let ok = if i == 0 { x <= above } else { x < above };
                if !ok {
                    return false;
                }
                above = x;
            }
            !wall || above > floor[j]
        });
        if !nodes_ok {
            continue;
        }
        if check == ProposalCheck::Continuum {
            let mut survived = true;
            for j in 0..m {
                for i in 0..n {
                    starts[i] = lines[i][j];
                    ends[i] = lines[i][j + 1];
                }
                let p = if n == 1 {
                    if wall {
                        -(-2.0 * starts[0] * ends[0] / dt).exp_m1()
                    } else {
                        1.0
                    }
                } else {
                    km_prob(&starts, &ends, dt, wall)?.prob
                };
                if rng.random::<f64>() >= p {
                    survived = false;
                    break;
                }
            }
            if !survived {
                continue;
            }
        }
        accepted += 1;
    }
    let p = if trials == 0 {
        f64::NAN
    } else {
        accepted as f64 / trials as f64
    };
    Ok(AcceptanceEstimate {
        trials,
        accepted,
        p,
        se: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryCondition;
    use crate::grid::TimeGrid;
    use crate::tilt::TiltSchedule;

    fn config(n: usize, pins: &[f64], right: f64) -> SamplerConfig {
        SamplerConfig::new(
            n,
            TimeGrid::new(0.0, right, 20).unwrap(),
            TiltSchedule::zero(n),
            BoundaryCondition::fixed(pins, pins),
        )
    }

    #[test]
    fn continuum_single_line_matches_reflection() {
        let est = proposal_acceptance(&config(1, &[1.0], 2.0), true, ProposalCheck::Continuum, 100_000, 1).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((est.p - exact).abs() < 4.0 * est.se, "{est:?}");
    }

    #[test]
    fn node_check_overestimates_the_continuum() {
        let c = config(1, &[1.0], 2.0);
        let nodes = proposal_acceptance(&c, true, ProposalCheck::Nodes, 50_000, 2).unwrap();
        let cont = proposal_acceptance(&c, true, ProposalCheck::Continuum, 50_000, 2).unwrap();
        assert!(nodes.p > cont.p);
    }

    #[test]
    fn continuum_check_needs_untilted_pinned_lines() {
        let mut c = config(1, &[1.0], 2.0);
        c.tilts = TiltSchedule::constants(&[1.0]);
        assert!(proposal_acceptance(&c, true, ProposalCheck::Continuum, 10, 0).is_err());
        let mut c = config(1, &[1.0], 2.0);
        c.boundary = BoundaryCondition::free();
        assert!(proposal_acceptance(&c, true, ProposalCheck::Nodes, 10, 0).is_err());
    }
}
