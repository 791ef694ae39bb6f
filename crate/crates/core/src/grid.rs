//! Deterministic 2D grid: level k has nodes (k, 0..=k).
//!
//! Interior node (k, j) applies `f1` to its left parent (k−1, j−1) as input
//! bit 0 and its right parent (k−1, j) as input bit 1, each through its own
//! BSC. Boundary nodes apply `f2` to their single parent. Level words put
//! node j at bit j.
//!
//! Edges into level l are ordered by node, left edge before right edge:
//! node 0 has only its right edge, node l only its left edge.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::divergence;
use crate::error::{Error, Result};
use crate::model::{CrossoverProb, Gate};
use crate::rng::{tags, trial_rng, SeedPath};
use crate::stats::{folded_normal_mean, KahanSum};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLevel {
    pub level: usize,
    pub bits: Vec<bool>,
}

impl GridLevel {
    /// Node j at bit j. Requires level ≤ 63.
    pub fn word(&self) -> u64 {
        assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0, |w, (j, &b)| w | (u64::from(b) << j))
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Number of edges entering levels 1..=k.
pub fn edges_through(k: usize) -> usize {
    k * (k + 1)
}

fn check_gates(f1: &Gate, f2: &Gate) -> Result<()> {
    if f1.arity() != 2 {
        return Err(Error::ArityMismatch {
            level: 0,
            expected: 2,
            found: f1.arity(),
        });
    }
    if f2.arity() != 1 {
        return Err(Error::ArityMismatch {
            level: 0,
            expected: 1,
            found: f2.arity(),
        });
    }
    Ok(())
}

/// Advances one level given a noise bit per incoming edge in canonical order.
fn next_level(f1: &Gate, f2: &Gate, prev: &[bool], mut noise: impl FnMut() -> bool) -> Vec<bool> {
    let l = prev.len();
    let mut out = Vec::with_capacity(l + 1);
    out.push(f2.eval(u32::from(prev[0] ^ noise())));
    for j in 1..l {
        let left = prev[j - 1] ^ noise();
        let right = prev[j] ^ noise();
        out.push(f1.eval(u32::from(left) | (u32::from(right) << 1)));
    }
    out.push(f2.eval(u32::from(prev[l - 1] ^ noise())));
    out
}

fn propagate_inner(
    f1: &Gate,
    f2: &Gate,
    root: bool,
    depth: usize,
    mut noise: impl FnMut() -> bool,
) -> Vec<GridLevel> {
    let mut levels = vec![GridLevel {
        level: 0,
        bits: vec![root],
    }];
    for k in 1..=depth {
        let bits = next_level(f1, f2, &levels[k - 1].bits, &mut noise);
        levels.push(GridLevel { level: k, bits });
    }
    levels
}

/// Forward simulation with Bernoulli(δ) edge noise drawn in canonical edge order
/// from the stream (seed, GRID).
pub fn grid_propagate(
    f1: &Gate,
    f2: &Gate,
    delta: CrossoverProb,
    root: bool,
    depth: usize,
    seed: u64,
) -> Result<Vec<GridLevel>> {
    if depth == 0 {
        return Err(Error::invalid("depth must be ≥ 1"));
    }
    check_gates(f1, f2)?;
    let mut rng = SeedPath::new(seed).child(tags::GRID).rng();
    Ok(grid_propagate_rng(f1, f2, delta, root, depth, &mut rng))
}

pub(crate) fn grid_propagate_rng<R: Rng + ?Sized>(
    f1: &Gate,
    f2: &Gate,
    delta: CrossoverProb,
    root: bool,
    depth: usize,
    rng: &mut R,
) -> Vec<GridLevel> {
    let d = delta.get();
    propagate_inner(f1, f2, root, depth, || rng.random::<f64>() < d)
}

/// Forward simulation with explicit noise bits, one per edge in canonical order.
pub fn grid_propagate_with_noise(
    f1: &Gate,
    f2: &Gate,
    root: bool,
    noise: &[bool],
) -> Result<Vec<GridLevel>> {
    check_gates(f1, f2)?;
    let depth = (0..)
        .find(|&k| edges_through(k) >= noise.len())
        .expect("finite");
    if edges_through(depth) != noise.len() || depth == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} noise bits is not k(k+1) for any k ≥ 1",
            noise.len()
        )));
    }
    let mut it = noise.iter().copied();
    Ok(propagate_inner(f1, f2, root, depth, || {
        it.next().expect("counted")
    }))
}

/// Law of the level word given root = 1 (`plus`) and root = 0 (`minus`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridDistribution {
    pub level: usize,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl GridDistribution {
    pub fn tv(&self) -> f64 {
        divergence::tv(&self.plus, &self.minus)
    }

    pub fn ml_error(&self) -> f64 {
        divergence::ml_error(&self.plus, &self.minus)
    }

    pub fn mutual_information(&self) -> f64 {
        divergence::mutual_information(&self.plus, &self.minus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridBudget {
    pub max_depth: usize,
}

impl Default for GridBudget {
    fn default() -> Self {
        Self { max_depth: 12 }
    }
}

/// Per-node output laws: q1[a | b<<1] = P(f1 = 1 | parents a, b), q2[a] likewise.
struct NodeLaw {
    q1: [f64; 4],
    q2: [f64; 2],
}

impl NodeLaw {
    fn new(f1: &Gate, f2: &Gate, delta: f64) -> Self {
        let flip = |x: u32, y: u32| if x == y { 1.0 - delta } else { delta };
        let mut q1 = [0.0; 4];
        for (parents, slot) in q1.iter_mut().enumerate() {
            let (a, b) = (parents as u32 & 1, parents as u32 >> 1);
            for w in 0..4u32 {
                if f1.eval(w) {
                    *slot += flip(w & 1, a) * flip(w >> 1, b);
                }
            }
        }
        let mut q2 = [0.0; 2];
        for (a, slot) in q2.iter_mut().enumerate() {
            for w in 0..2u32 {
                if f2.eval(w) {
                    *slot += flip(w, a as u32);
                }
            }
        }
        Self { q1, q2 }
    }

    #[inline]
    fn p(q: f64, out: usize) -> f64 {
        if out == 1 {
            q
        } else {
            1.0 - q
        }
    }
}

/// Maps the law of level k (k+1 bits) to the law of level k+1 one node at a time.
///
/// After emitting y_j the vector is indexed by y_0..y_j in the low j+1 bits and
/// x_j..x_k above them, so each stage only mixes pairs of entries.
fn dp_step(law: &NodeLaw, cur: &[f64], k: usize) -> Vec<f64> {
    let n = 1usize << (k + 2);
    debug_assert_eq!(cur.len(), 1 << (k + 1));
    // y_0 from x_0; x stays above it.
    let mut a = vec![0.0; n];
    for (x, &w) in cur.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let q = law.q2[x & 1];
        a[x << 1] += w * NodeLaw::p(q, 0);
        a[1 | (x << 1)] += w * NodeLaw::p(q, 1);
    }
    let mut b = vec![0.0; n];
    for j in 1..=k {
        // Layout in: ylow (j bits) | x_{j-1} << j | rest << (j+1), rest = x_j.. .
        b.iter_mut().for_each(|v| *v = 0.0);
        let low_mask = (1usize << j) - 1;
        for (idx, &w) in a.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let ylow = idx & low_mask;
            let xa = (idx >> j) & 1;
            let rest = idx >> (j + 1);
            let q = law.q1[xa | ((rest & 1) << 1)];
            let base = ylow | (rest << (j + 1));
            b[base] += w * NodeLaw::p(q, 0);
            b[base | (1 << j)] += w * NodeLaw::p(q, 1);
        }
        std::mem::swap(&mut a, &mut b);
    }
    // y_{k+1} from x_k, which sits at bit k+1 and is summed out.
    b.iter_mut().for_each(|v| *v = 0.0);
    let low_mask = (1usize << (k + 1)) - 1;
    for (idx, &w) in a.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let ylow = idx & low_mask;
        let q = law.q2[(idx >> (k + 1)) & 1];
        b[ylow] += w * NodeLaw::p(q, 0);
        b[ylow | (1 << (k + 1))] += w * NodeLaw::p(q, 1);
    }
    b
}

/// Exact level laws for levels 0..=depth.
pub fn grid_exact_distribution(
    f1: &Gate,
    f2: &Gate,
    delta: CrossoverProb,
    depth: usize,
    budget: GridBudget,
) -> Result<Vec<GridDistribution>> {
    check_gates(f1, f2)?;
    if depth > budget.max_depth {
        return Err(Error::BudgetExceeded {
            what: "exact grid depth",
            requested: depth,
            limit: budget.max_depth,
        });
    }
    let law = NodeLaw::new(f1, f2, delta.get());
    let mut out = vec![GridDistribution {
        level: 0,
        plus: vec![0.0, 1.0],
        minus: vec![1.0, 0.0],
    }];
    for k in 0..depth {
        let prev = &out[k];
        let next = GridDistribution {
            level: k + 1,
            plus: dp_step(&law, &prev.plus, k),
            minus: dp_step(&law, &prev.minus, k),
        };
        out.push(next);
    }
    Ok(out)
}

/// Plug-in TV from sampled level words under each root.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTvEstimate {
    pub level: usize,
    pub trials: u64,
    /// ½ Σ |n⁺_x − n⁻_x| / n.
    pub plug_in: f64,
    /// Standard-deviation bound √(1/n) from the bounded-differences variance inequality.
    pub sigma_bound: f64,
    /// Sample counts per level word.
    pub plus_counts: HashMap<u64, u64>,
    pub minus_counts: HashMap<u64, u64>,
}

impl GridTvEstimate {
    /// P̂⁺(A) − P̂⁻(A) for a fixed set of words A; unbiased for P⁺(A) − P⁻(A).
    pub fn set_gap(&self, in_set: impl Fn(u64) -> bool) -> f64 {
        let count = |m: &HashMap<u64, u64>| -> u64 {
            m.iter().filter(|(w, _)| in_set(**w)).map(|(_, c)| c).sum()
        };
        (count(&self.plus_counts) as f64 - count(&self.minus_counts) as f64) / self.trials as f64
    }
}

/// Expected value of the plug-in estimator with `n` samples per root when the
/// true laws are `plus` and `minus`, using a normal approximation per word.
pub fn expected_plug_in_tv(plus: &[f64], minus: &[f64], n: u64) -> f64 {
    let nf = n as f64;
    let mut acc = KahanSum::new();
    for (&p, &q) in plus.iter().zip(minus) {
        let var = (p * (1.0 - p) + q * (1.0 - q)) / nf;
        acc.add(folded_normal_mean(p - q, var.sqrt()));
    }
    0.5 * acc.value()
}

const MC_CHUNK: u64 = 4096;

/// Plug-in TV per level from `trials` runs under each root.
/// Trial t draws root 1 from stream (seed, GRID_MC, 2t) and root 0 from 2t + 1.
pub fn grid_mc_tv_estimate(
    f1: &Gate,
    f2: &Gate,
    delta: CrossoverProb,
    depth: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<GridTvEstimate>> {
    check_gates(f1, f2)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    if depth > 63 {
        return Err(Error::invalid("grid Monte Carlo supports depth ≤ 63"));
    }
    type Counts = Vec<(HashMap<u64, u64>, HashMap<u64, u64>)>;
    let empty = || -> Counts { vec![Default::default(); depth + 1] };
    let chunks = trials.div_ceil(MC_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = empty();
            for t in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(trials) {
                for (root, stream) in [(true, 2 * t), (false, 2 * t + 1)] {
                    let mut rng = trial_rng(seed, tags::GRID_MC, stream);
                    let levels = grid_propagate_rng(f1, f2, delta, root, depth, &mut rng);
                    for (lv, slot) in levels.iter().zip(acc.iter_mut()) {
                        let map = if root { &mut slot.0 } else { &mut slot.1 };
                        *map.entry(lv.word()).or_insert(0) += 1;
                    }
                }
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for (w, c) in y.0 {
                    *x.0.entry(w).or_insert(0) += c;
                }
                for (w, c) in y.1 {
                    *x.1.entry(w).or_insert(0) += c;
                }
            }
            a
        });
    let n = trials as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(level, (plus_counts, minus_counts))| {
            let mut words: Vec<u64> = plus_counts
                .keys()
                .chain(minus_counts.keys())
                .copied()
                .collect();
            words.sort_unstable();
            words.dedup();
            let mut acc = KahanSum::new();
            for w in words {
                let a = plus_counts.get(&w).copied().unwrap_or(0) as f64;
                let b = minus_counts.get(&w).copied().unwrap_or(0) as f64;
                acc.add((a - b).abs());
            }
            GridTvEstimate {
                level,
                trials,
                plug_in: 0.5 * acc.value() / n,
                sigma_bound: (1.0 / n).sqrt(),
                plus_counts,
                minus_counts,
            }
        })
        .collect())
}
