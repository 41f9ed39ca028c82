use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::tilt::TiltSchedule;

/// A floor or ceiling: one constant level or a value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Constant(f64),
    Nodes(Vec<f64>),
}

impl Level {
    pub fn node_values(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        let v = match self {
            Level::Constant(c) => vec![*c; grid.nodes()],
            Level::Nodes(v) => {
                if v.len() != grid.nodes() {
                    return Err(Error::Shape {
                        expected: grid.nodes(),
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        if v.iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::Config("floor and ceiling values must be >= 0".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSchedule {
    /// Lines top to bottom, blocks left to right with half-block overlap.
    #[default]
    Systematic,
    /// Lines top to bottom, block positions drawn from the chain's random stream.
    RandomBlock,
}

fn default_block_len() -> usize {
    8
}

fn default_max_rejections() -> usize {
    64
}

fn default_thin() -> usize {
    1
}

/// Everything that determines a chain: the target measure and the kernel schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n: usize,
    pub grid: TimeGrid,
    pub tilts: TiltSchedule,
    pub boundary: BoundaryCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<Level>,
    /// Resampled nodes per block.
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_max_rejections")]
    pub max_rejections: usize,
    #[serde(default)]
    pub schedule: SweepSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burnin: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
}

impl SamplerConfig {
    pub fn new(n: usize, grid: TimeGrid, tilts: TiltSchedule, boundary: BoundaryCondition) -> Self {
        Self {
            n,
            grid,
            tilts,
            boundary,
            floor: None,
            ceiling: None,
            block_len: default_block_len(),
            max_rejections: default_max_rejections(),
            schedule: SweepSchedule::Systematic,
            seed: 0,
            burnin: 0,
            thin: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("need at least one line".into()));
        }
        self.grid.validate()?;
        self.tilts.validate(self.n, &self.grid)?;
        self.boundary.validate(self.n)?;
        if self.block_len < 2 {
            return Err(Error::Config(format!(
                "block_len must be at least 2, got {}",
                self.block_len
            )));
        }
        if self.max_rejections == 0 {
            return Err(Error::Config("max_rejections must be positive".into()));
        }
        let floor = self.floor_values()?;
        let ceiling = self.ceiling_values()?;
        if floor.iter().zip(&ceiling).any(|(f, c)| f > c) {
            return Err(Error::Config("floor must lie below the ceiling".into()));
        }
        Ok(())
    }

    pub fn floor_values(&self) -> Result<Vec<f64>> {
        match &self.floor {
            Some(l) => l.node_values(&self.grid),
            None => Ok(vec![0.0; self.grid.nodes()]),
        }
    }

    pub fn ceiling_values(&self) -> Result<Vec<f64>> {
        match &self.ceiling {
            Some(l) => l.node_values(&self.grid),
            None => Ok(vec![f64::INFINITY; self.grid.nodes()]),
        }
    }

    /// SHA-256 of the canonical JSON form of the whole configuration.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).into()
    }

    /// Hash of the target measure only (ignores seed, burn-in, thinning and kernel tuning).
    pub fn model_hash(&self) -> [u8; 32] {
        let model = serde_json::json!({
            "n": self.n,
            "grid": self.grid,
            "tilts": self.tilts,
            "boundary": self.boundary,
            "floor": self.floor,
            "ceiling": self.ceiling,
        });
        Sha256::digest(model.to_string().as_bytes()).into()
    }
}

/// Stable per-chain seed from `(base seed, chain index, config hash)`.
pub fn derive_seed(base: u64, chain: u64, config_hash: &[u8; 32]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"chain-seed");
    h.update(base.to_le_bytes());
    h.update(chain.to_le_bytes());
    h.update(config_hash);
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SamplerConfig {
        SamplerConfig::new(
            2,
            TimeGrid::new(-1.0, 1.0, 40).unwrap(),
            TiltSchedule::geometric(1.0, 2.0).unwrap(),
            BoundaryCondition::Zero,
        )
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut c = config();
        c.floor = Some(Level::Constant(0.25));
        let s = serde_json::to_string(&c).unwrap();
        let back: SamplerConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(config()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SamplerConfig>(v).is_err());
    }

    #[test]
    fn validation_catches_bad_kernels() {
        let mut c = config();
        c.block_len = 1;
        assert!(c.validate().is_err());
        let mut c = config();
        c.floor = Some(Level::Constant(2.0));
        c.ceiling = Some(Level::Constant(1.0));
        assert!(c.validate().is_err());
        assert!(config().validate().is_ok());
    }

    #[test]
    fn model_hash_ignores_seed() {
        let a = config();
        let mut b = config();
        b.seed = 99;
        assert_eq!(a.model_hash(), b.model_hash());
        assert_ne!(a.hash(), b.hash());
        assert_ne!(derive_seed(1, 0, &a.hash()), derive_seed(1, 1, &a.hash()));
    }
}
