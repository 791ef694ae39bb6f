//! Reproducible random streams.
//!
//! Every stochastic quantity in the crate draws from a [`Xoshiro256PlusPlus`]
//! generator whose 64-bit seed is derived from a master seed and a path of
//! indices (trial, level, node, slot, ...). The generator's own seeding
//! expands the derived value with SplitMix64, so any implementation of
//! xoshiro256++ with SplitMix64 seeding reproduces the same draws.
//!
//! Streams depend only on `(seed, path)`, never on which thread touched them
//! first, so Monte Carlo loops can be split across workers freely.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator type used throughout the crate.
pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix one index into a running key.
#[inline]
pub fn mix(key: u64, index: u64) -> u64 {
    splitmix64(key ^ splitmix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// A master seed plus a derivation path.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedPath {
    seed: u64,
    key: u64,
    path: Vec<u64>,
}

impl SeedPath {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: splitmix64(seed),
            path: Vec::new(),
        }
    }

    /// Extend the path by one index.
    #[must_use]
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            seed: self.seed,
            key: mix(self.key, index),
            path,
        }
    }

    /// Extend the path by several indices at once.
    #[must_use]
    pub fn descend(&self, indices: &[u64]) -> Self {
        indices.iter().fold(self.clone(), |p, &i| p.child(i))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// The derived 64-bit key for this path.
    pub fn key(&self) -> u64 {
        self.key
    }

    /// A fresh generator positioned at the start of this path's stream.
    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.key)
    }
}

/// Stream for a single Monte Carlo trial under a named experiment tag.
pub fn trial_rng(seed: u64, tag: u64, trial: u64) -> StreamRng {
    SeedPath::new(seed).descend(&[tag, trial]).rng()
}

/// Stream tags keep unrelated experiments sharing a master seed apart.
pub mod tags {
    pub const DAG: u64 = 1;
    pub const PROPAGATE: u64 = 2;
    pub const COUPLED_MC: u64 = 3;
    pub const QUENCHED: u64 = 4;
    pub const LIMIT: u64 = 5;
    pub const GRID: u64 = 6;
    pub const GRID_MC: u64 = 7;
    pub const COUPLED_GRID: u64 = 8;
    pub const PERCOLATION: u64 = 9;
    pub const ERASURE: u64 = 10;
    pub const SITE_PERCOLATION: u64 = 11;
}
