use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{ChainState, GibbsSampler};
use crate::boundary::BoundaryCondition;
use crate::error::{domain, Error, Result};

/// Two chains driven by common randomness so that `lo ≼ hi` nodewise is preserved.
///
/// Each sweep is a single-site heat bath in which both chains invert the same uniform
/// through their own truncated-normal conditional. The inverse CDF is non-decreasing
/// in the conditional mean and in both window edges, and every one of those is ordered
/// between the chains whenever the states, tilts, barriers and pins are.
#[derive(Debug, Clone)]
pub struct CoupledChains {
    lo_kernel: GibbsSampler,
    hi_kernel: GibbsSampler,
    pub lo: ChainState,
    pub hi: ChainState,
    rng: ChaCha8Rng,
    sweeps: u64,
    rounding_fixes: u64,
}

/// Gap below which an inversion in the coupled values is attributed to floating-point rounding.
const ROUNDING_SLACK: f64 = 1e-12;

impl CoupledChains {
    pub fn new(lo_kernel: GibbsSampler, hi_kernel: GibbsSampler, seed: u64) -> Result<Self> {
        check_preconditions(&lo_kernel, &hi_kernel)?;
        let lo = lo_kernel.initial_state_with_seed(seed)?;
        let hi = hi_kernel.initial_state_with_seed(seed)?;
        Self::from_states(lo_kernel, hi_kernel, lo, hi, seed)
    }

    pub fn from_states(
        lo_kernel: GibbsSampler,
        hi_kernel: GibbsSampler,
        lo: ChainState,
        hi: ChainState,
        seed: u64,
    ) -> Result<Self> {
        check_preconditions(&lo_kernel, &hi_kernel)?;
        let c = Self {
            lo_kernel,
            hi_kernel,
            lo,
            hi,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweeps: 0,
            rounding_fixes: 0,
        };
        if !c.ordered() {
            return Err(domain("coupled chains must start with lo below hi"));
        }
        Ok(c)
    }

    /// `lo ≼ hi` at every node of every line.
    pub fn ordered(&self) -> bool {
        self.lo
            .lines()
            .iter()
            .zip(self.hi.lines())
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y))
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Number of rounding-level inversions that were resolved by setting `lo = hi` at a node.
    pub fn rounding_fixes(&self) -> u64 {
        self.rounding_fixes
    }

    /// One coupled heat-bath sweep: lines top to bottom, interior nodes left to right.
    pub fn sweep(&mut self) -> Result<()> {
        let n = self.lo_kernel.config().n;
        let m = self.lo_kernel.config().grid.steps;
        for i in 0..n {
            for j in 1..m {
                let u: f64 = self.rng.random();
                let (llo, lhi) = self.lo_kernel.window(self.lo.lines(), i, j);
                let (hlo, hhi) = self.hi_kernel.window(self.hi.lines(), i, j);
                if !(llo < lhi && hlo < hhi) {
                    return Err(Error::Consistency(format!(
                        "empty window for line {i} at node {j}"
                    )));
                }
                let mut x_lo = self.lo_kernel.single_site_value(self.lo.line(i), i, j, llo, lhi, u);
                let x_hi = self.hi_kernel.single_site_value(self.hi.line(i), i, j, hlo, hhi, u);
                if x_lo > x_hi {
                    let gap = x_lo - x_hi;
                    if gap > ROUNDING_SLACK * x_hi.abs().max(1.0) {
                        return Err(Error::Consistency(format!(
                            "coupling lost order by {gap:e} on line {i} at node {j}"
                        )));
                    }
                    // x_hi lies inside the lo window: llo <= hlo < x_hi < x_lo < lhi
                    x_lo = x_hi;
                    self.rounding_fixes += 1;
                }
                self.lo.lines[i][j] = x_lo;
                self.hi.lines[i][j] = x_hi;
            }
        }
        self.lo.sweeps_done += 1;
        self.hi.sweeps_done += 1;
        self.sweeps += 1;
        debug_assert!(self.lo_kernel.is_admissible(&self.lo));
        debug_assert!(self.hi_kernel.is_admissible(&self.hi));
        Ok(())
    }
}

/// One coupled sweep of an existing pair of chains; `rng` supplies the shared uniforms.
pub fn coupled_sweep<R: Rng + ?Sized>(
    lo_kernel: &GibbsSampler,
    hi_kernel: &GibbsSampler,
    lo: &mut ChainState,
    hi: &mut ChainState,
    rng: &mut R,
) -> Result<u64> {
    check_preconditions(lo_kernel, hi_kernel)?;
    let seed: u64 = rng.random();
    let mut pair = CoupledChains::from_states(
        lo_kernel.clone(),
        hi_kernel.clone(),
        std::mem::replace(lo, lo_kernel.initial_state()?),
        std::mem::replace(hi, hi_kernel.initial_state()?),
        seed,
    )?;
    pair.sweep()?;
    *lo = pair.lo;
    *hi = pair.hi;
    Ok(pair.rounding_fixes)
}

fn check_preconditions(lo: &GibbsSampler, hi: &GibbsSampler) -> Result<()> {
    let (a, b) = (lo.config(), hi.config());
    if a.n != b.n || a.grid != b.grid {
        return Err(domain("coupled chains need the same grid and line count"));
    }
    let pins = |bc: &BoundaryCondition, i: usize| bc.pins(i);
    for i in 0..a.n {
        match (pins(&a.boundary, i), pins(&b.boundary, i)) {
            (Some((l1, r1)), Some((l2, r2))) => {
                if l1 > l2 || r1 > r2 {
                    return Err(domain("lo boundary data must lie below hi boundary data"));
                }
            }
            _ => {
                return Err(domain(
                    "couplings are only offered for fixed or zero boundary conditions",
                ))
            }
        }
        if lo.rho(i).iter().zip(hi.rho(i)).any(|(r_lo, r_hi)| r_lo < r_hi) {
            return Err(domain("lo tilts must dominate hi tilts"));
        }
    }
    if lo.floor().iter().zip(hi.floor()).any(|(x, y)| x > y)
        || lo.ceiling().iter().zip(hi.ceiling()).any(|(x, y)| x > y)
    {
        return Err(domain("lo floor and ceiling must lie below those of hi"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::sampler::config::{Level, SamplerConfig};
    use crate::tilt::TiltSchedule;

    fn kernel(a: f64, floor: f64) -> GibbsSampler {
        let mut c = SamplerConfig::new(
            3,
            TimeGrid::new(-1.0, 1.0, 40).unwrap(),
            TiltSchedule::geometric(a, 2.0).unwrap(),
            BoundaryCondition::Zero,
        );
        if floor > 0.0 {
            c.floor = Some(Level::Constant(floor));
            c.boundary = BoundaryCondition::fixed(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]);
        }
        GibbsSampler::new(c).unwrap()
    }

    #[test]
    fn identical_chains_stay_identical() {
        let mut pair = CoupledChains::new(kernel(1.0, 0.0), kernel(1.0, 0.0), 5).unwrap();
        for _ in 0..200 {
            pair.sweep().unwrap();
            assert_eq!(pair.lo.lines(), pair.hi.lines());
        }
    }

    #[test]
    fn larger_tilt_stays_below() {
        let mut pair = CoupledChains::new(kernel(2.0, 0.0), kernel(1.0, 0.0), 6).unwrap();
        for _ in 0..500 {
            pair.sweep().unwrap();
            assert!(pair.ordered());
        }
    }

    #[test]
    fn preconditions_are_checked() {
        assert!(CoupledChains::new(kernel(1.0, 0.0), kernel(2.0, 0.0), 1).is_err());
        let mut free = kernel(1.0, 0.0).config().clone();
        free.boundary = BoundaryCondition::free();
        let free = GibbsSampler::new(free).unwrap();
        assert!(CoupledChains::new(free.clone(), free, 1).is_err());
    }

    #[test]
    fn free_function_matches_pair_sweep() {
        let (lo_k, hi_k) = (kernel(2.0, 0.0), kernel(1.0, 0.0));
        let mut lo = lo_k.initial_state().unwrap();
        let mut hi = hi_k.initial_state().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            coupled_sweep(&lo_k, &hi_k, &mut lo, &mut hi, &mut rng).unwrap();
        }
        assert_eq!(lo.sweeps_done(), 50);
        assert!(lo.lines().iter().zip(hi.lines()).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y)));
    }
}
