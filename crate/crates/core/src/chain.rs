//! Problem instance descriptor and deterministic per-bond random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field the random interaction vectors are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    #[default]
    Complex,
}

impl Field {
    pub fn code(self) -> u8 {
        match self {
            Field::Real => 0,
            Field::Complex => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Field::Real),
            1 => Some(Field::Complex),
            _ => None,
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(format!("unknown field '{other}' (expected real|complex)")),
        }
    }
}

/// A chain of `n_sites` qudits of dimension `local_dim` coupled by rank-`rank`
/// nearest-neighbour projectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub local_dim: usize,
    pub rank: usize,
    pub seed: u64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, local_dim: usize, rank: usize, seed: u64) -> Result<Self> {
        let spec = Self { n_sites, local_dim, rank, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidChain(format!(
                "need at least two sites, got {}",
                self.n_sites
            )));
        }
        if self.local_dim < 2 {
            return Err(Error::InvalidChain(format!(
                "local dimension must be at least 2, got {}",
                self.local_dim
            )));
        }
        check_rank(self.local_dim, self.rank)
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites - 1
    }

    /// Size of the full Hilbert space, `d^N`, saturating at `u128::MAX`.
    pub fn hilbert_dim(&self) -> u128 {
        (self.local_dim as u128)
            .checked_pow(self.n_sites as u32)
            .unwrap_or(u128::MAX)
    }

    /// Independent stream for bond `k` (0-based).
    pub fn bond_rng(&self, k: usize) -> ChaCha20Rng {
        substream(self.seed, k as u64 + 1)
    }

    /// Stream reserved for instance-level choices that are not tied to a bond.
    pub fn instance_rng(&self) -> ChaCha20Rng {
        substream(self.seed, 0)
    }
}

pub(crate) fn check_rank(local_dim: usize, rank: usize) -> Result<()> {
    let max = local_dim * local_dim;
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, local_dim, max });
    }
    Ok(())
}

fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
