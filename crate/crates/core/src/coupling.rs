//! Root-coupled AND grid over the alphabet {0c, 1u, 1c}.
//!
//! Each symbol is a pair (X⁻, X⁺) with X⁻ ≤ X⁺. Both copies see the same BSC
//! realization in its copy/fresh form, so a fresh bit makes the pair agree.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CrossoverProb;
use crate::rng::{tags, trial_rng, SeedPath, StreamRng};
use crate::stats::{wilson, Estimate, Z95};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoupledSymbol {
    /// (0, 0)
    ZeroCoupled,
    /// (0, 1)
    OneUncoupled,
    /// (1, 1)
    OneCoupled,
}

impl CoupledSymbol {
    pub const ALL: [CoupledSymbol; 3] = [
        CoupledSymbol::ZeroCoupled,
        CoupledSymbol::OneUncoupled,
        CoupledSymbol::OneCoupled,
    ];

    /// `None` for (1, 0), which the monotone coupling never produces.
    pub fn from_pair(minus: bool, plus: bool) -> Option<Self> {
        match (minus, plus) {
            (false, false) => Some(CoupledSymbol::ZeroCoupled),
            (false, true) => Some(CoupledSymbol::OneUncoupled),
            (true, true) => Some(CoupledSymbol::OneCoupled),
            (true, false) => None,
        }
    }

    /// (X⁻, X⁺).
    pub fn pair(self) -> (bool, bool) {
        match self {
            CoupledSymbol::ZeroCoupled => (false, false),
            CoupledSymbol::OneUncoupled => (false, true),
            CoupledSymbol::OneCoupled => (true, true),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_uncoupled(self) -> bool {
        self == CoupledSymbol::OneUncoupled
    }
}

impl std::fmt::Display for CoupledSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoupledSymbol::ZeroCoupled => "0c",
            CoupledSymbol::OneUncoupled => "1u",
            CoupledSymbol::OneCoupled => "1c",
        })
    }
}

/// One coupled BSC use from a single uniform: fresh with probability 2δ.
#[inline]
pub fn coupled_channel_draw<R: Rng + ?Sized>(
    sym: CoupledSymbol,
    delta: CrossoverProb,
    rng: &mut R,
) -> CoupledSymbol {
    let u: f64 = rng.random();
    let d = delta.get();
    if u < d {
        CoupledSymbol::OneCoupled
    } else if u < 2.0 * d {
        CoupledSymbol::ZeroCoupled
    } else {
        sym
    }
}

pub fn coupled_channel_step(
    sym: CoupledSymbol,
    delta: CrossoverProb,
    path: &SeedPath,
) -> CoupledSymbol {
    coupled_channel_draw(sym, delta, &mut path.rng())
}

/// Row-stochastic transition matrix of the coupled channel, rows and columns in
/// the order 0c, 1u, 1c.
pub fn transition_matrix(delta: CrossoverProb) -> [[f64; 3]; 3] {
    let d = delta.get();
    [[1.0 - d, 0.0, d], [d, 1.0 - 2.0 * d, d], [d, 0.0, 1.0 - d]]
}

/// Coordinate-wise AND of the two coupled copies.
#[inline]
pub fn coupled_and(a: CoupledSymbol, b: CoupledSymbol) -> CoupledSymbol {
    use CoupledSymbol::*;
    match (a, b) {
        (ZeroCoupled, _) | (_, ZeroCoupled) => ZeroCoupled,
        (OneCoupled, OneCoupled) => OneCoupled,
        _ => OneUncoupled,
    }
}

/// A level of the coupled grid and the machinery to advance it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledGrid {
    level: usize,
    symbols: Vec<CoupledSymbol>,
}

impl Default for CoupledGrid {
    fn default() -> Self {
        Self::new()
    }
}

impl CoupledGrid {
    /// Level 0 holds a single 1u: the two copies start from roots 0 and 1.
    pub fn new() -> Self {
        Self {
            level: 0,
            symbols: vec![CoupledSymbol::OneUncoupled],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn symbols(&self) -> &[CoupledSymbol] {
        &self.symbols
    }

    pub fn uncoupled(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_uncoupled()).count()
    }

    /// Level word of the root-1 copy, node j at bit j.
    pub fn plus_word(&self) -> u64 {
        self.word(|s| s.pair().1)
    }

    pub fn minus_word(&self) -> u64 {
        self.word(|s| s.pair().0)
    }

    fn word(&self, bit: impl Fn(CoupledSymbol) -> bool) -> u64 {
        assert!(self.symbols.len() <= 64);
        self.symbols
            .iter()
            .enumerate()
            .fold(0, |w, (j, &s)| w | (u64::from(bit(s)) << j))
    }

    /// Boundary nodes copy their single channel output; interior nodes AND two.
    /// Channel draws follow the canonical edge order.
    pub fn step<R: Rng + ?Sized>(&mut self, delta: CrossoverProb, rng: &mut R) {
        let prev = &self.symbols;
        let l = prev.len();
        let mut next = Vec::with_capacity(l + 1);
        next.push(coupled_channel_draw(prev[0], delta, rng));
        for j in 1..l {
            let left = coupled_channel_draw(prev[j - 1], delta, rng);
            let right = coupled_channel_draw(prev[j], delta, rng);
            next.push(coupled_and(left, right));
        }
        next.push(coupled_channel_draw(prev[l - 1], delta, rng));
        self.symbols = next;
        self.level += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingOutcome {
    /// First level with no 1u, if reached by the maximum depth.
    pub coalescence: Option<usize>,
    /// Number of 1u symbols at each simulated level, starting at level 0.
    pub uncoupled_counts: Vec<usize>,
}

fn run_until_coalesced(
    delta: CrossoverProb,
    max_depth: usize,
    rng: &mut StreamRng,
) -> CouplingOutcome {
    let mut grid = CoupledGrid::new();
    let mut counts = vec![grid.uncoupled()];
    while grid.level() < max_depth {
        grid.step(delta, rng);
        let c = grid.uncoupled();
        counts.push(c);
        if c == 0 {
            return CouplingOutcome {
                coalescence: Some(grid.level()),
                uncoupled_counts: counts,
            };
        }
    }
    CouplingOutcome {
        coalescence: None,
        uncoupled_counts: counts,
    }
}

/// Runs the coupled grid from a single 1u until it has no 1u or hits `max_depth`.
/// 1u-free levels are absorbing, so the run stops at the first one.
pub fn coupled_grid_run(
    delta: CrossoverProb,
    max_depth: usize,
    seed: u64,
) -> Result<CouplingOutcome> {
    if max_depth == 0 {
        return Err(Error::invalid("max_depth must be ≥ 1"));
    }
    let mut rng = SeedPath::new(seed).child(tags::COUPLED_GRID).rng();
    Ok(run_until_coalesced(delta, max_depth, &mut rng))
}

/// Coalescence times of independent runs; trial t uses stream (seed, COUPLED_GRID, t).
pub fn coalescence_times(
    delta: CrossoverProb,
    max_depth: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<Option<usize>>> {
    if max_depth == 0 || trials == 0 {
        return Err(Error::invalid("max_depth and trials must be ≥ 1"));
    }
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, tags::COUPLED_GRID, t);
            run_until_coalesced(delta, max_depth, &mut rng).coalescence
        })
        .collect())
}

/// Empirical survival function of the coalescence time.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingBound {
    pub trials: u64,
    /// Runs with T > k, for k = 0..=depth.
    pub uncoalesced: Vec<u64>,
}

impl CouplingBound {
    pub fn from_times(times: &[Option<usize>], depth: usize) -> Self {
        let uncoalesced = (0..=depth)
            .map(|k| times.iter().filter(|t| t.is_none_or(|t| t > k)).count() as u64)
            .collect();
        Self {
            trials: times.len() as u64,
            uncoalesced,
        }
    }

    /// P̂(T > k) with a 95% Wilson interval; an upper bound on TV at level k.
    pub fn at(&self, k: usize) -> Estimate {
        wilson(self.uncoalesced[k], self.trials, Z95)
    }

    /// Wilson upper endpoint at normal quantile `z`.
    pub fn upper(&self, k: usize, z: f64) -> f64 {
        wilson(self.uncoalesced[k], self.trials, z).high
    }

    pub fn depth(&self) -> usize {
        self.uncoalesced.len() - 1
    }
}

/// P(T > k) for k ≤ depth, estimated from `trials` coupled runs.
pub fn coupling_tv_bound(
    delta: CrossoverProb,
    depth: usize,
    trials: u64,
    seed: u64,
) -> Result<CouplingBound> {
    let times = coalescence_times(delta, depth, trials, seed)?;
    Ok(CouplingBound::from_times(&times, depth))
}
