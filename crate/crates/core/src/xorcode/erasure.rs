//! Erasure view of the XOR grid.
//!
//! A BSC(δ) edge is a fresh fair bit with probability 2δ and a clean copy
//! otherwise. A decoder told which edges were fresh faces an erasure channel
//! on the noise bits with the root bit also erased. It fails exactly when some
//! codeword of H_k has root bit 1 and is supported on erased columns; then
//! both root values explain the observation equally well.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CrossoverProb;
use crate::rng::{tags, trial_rng};
use crate::stats::{wilson, Estimate, Z95};

use super::bitmatrix::{f2_solve, BitVector, SolveOutcome};
use super::hk::{build_hk, EdgeIndex, ParityCheck};

/// Erased columns of H_k. Column 0, the root, is always erased.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErasurePattern {
    erased: Vec<bool>,
}

impl ErasurePattern {
    /// Only the root erased.
    pub fn root_only(edges: &EdgeIndex) -> Self {
        let mut erased = vec![false; edges.columns()];
        erased[0] = true;
        Self { erased }
    }

    pub fn all(edges: &EdgeIndex) -> Self {
        Self {
            erased: vec![true; edges.columns()],
        }
    }

    pub fn from_columns(edges: &EdgeIndex, columns: &[usize]) -> Result<Self> {
        let mut p = Self::root_only(edges);
        for &c in columns {
            p.erase(c)?;
        }
        Ok(p)
    }

    /// Each edge erased independently with probability 2δ, one uniform per edge
    /// in canonical order.
    pub fn sample<R: Rng + ?Sized>(edges: &EdgeIndex, delta: CrossoverProb, rng: &mut R) -> Self {
        let e = 2.0 * delta.get();
        let mut p = Self::root_only(edges);
        for slot in &mut p.erased[1..] {
            *slot = rng.random::<f64>() < e;
        }
        p
    }

    pub fn erase(&mut self, column: usize) -> Result<()> {
        let n = self.erased.len();
        let slot = self
            .erased
            .get_mut(column)
            .ok_or_else(|| Error::DimensionMismatch(format!("column {column} of {n}")))?;
        *slot = true;
        Ok(())
    }

    pub fn is_erased(&self, column: usize) -> bool {
        self.erased[column]
    }

    pub fn columns(&self) -> usize {
        self.erased.len()
    }

    /// Erased edge columns, root excluded.
    pub fn erased_edges(&self) -> Vec<usize> {
        (1..self.erased.len()).filter(|&c| self.erased[c]).collect()
    }
}

/// True iff H w = 0 has a solution with w_0 = 1 and w zero off the erased set,
/// i.e. the root column lies in the span of the erased edge columns.
pub fn erasure_ml_fails(h: &ParityCheck, pattern: &ErasurePattern) -> Result<bool> {
    if pattern.columns() != h.matrix.cols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern over {} columns for H with {}",
            pattern.columns(),
            h.matrix.cols()
        )));
    }
    let cols = pattern.erased_edges();
    let root = h.matrix.column(0);
    if cols.is_empty() {
        return Ok(root.is_zero());
    }
    Ok(f2_solve(&h.matrix.select_columns(&cols), &root)?.is_solved())
}

/// Witness codeword for a failing pattern: root bit 1, support inside the erasures.
pub fn failure_witness(h: &ParityCheck, pattern: &ErasurePattern) -> Result<Option<BitVector>> {
    let cols = pattern.erased_edges();
    let root = h.matrix.column(0);
    let sol = f2_solve(&h.matrix.select_columns(&cols), &root)?;
    Ok(match sol {
        SolveOutcome::Solved(x) => {
            let mut w = BitVector::unit(h.matrix.cols(), 0);
            for i in x.ones() {
                w.set(cols[i], true);
            }
            Some(w)
        }
        SolveOutcome::Inconsistent => None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErasureEstimate {
    pub k: usize,
    pub delta: f64,
    pub trials: u64,
    pub failures: u64,
    /// Failure frequency with a 95% Wilson interval.
    pub failure: Estimate,
    /// Half the failure frequency: the erasure decoder guesses on failure.
    /// The erasure decoder sees more than a BSC observer, so this also
    /// lower-bounds the ML error of the grid itself.
    pub ml_error_lower: Estimate,
}

/// Pattern t is drawn from the stream (seed, ERASURE, t).
pub fn erasure_mc_error_bound(
    k: usize,
    delta: CrossoverProb,
    trials: u64,
    seed: u64,
) -> Result<ErasureEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    let h = build_hk(k)?;
    let failures = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, tags::ERASURE, t);
            let p = ErasurePattern::sample(&h.edges, delta, &mut rng);
            erasure_ml_fails(&h, &p).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let failure = wilson(failures, trials, Z95);
    Ok(ErasureEstimate {
        k,
        delta: delta.get(),
        trials,
        failures,
        ml_error_lower: Estimate {
            value: 0.5 * failure.value,
            low: 0.5 * failure.low,
            high: 0.5 * failure.high,
            std_err: 0.5 * failure.std_err,
        },
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{grid_exact_distribution, GridBudget};
    use crate::model::Gate;
    use crate::rng::SeedPath;
    use rand::Rng;

    fn delta(x: f64) -> CrossoverProb {
        CrossoverProb::new(x).unwrap()
    }

    #[test]
    fn boundary_erasures_fail_at_powers_of_two() {
        for k in [1, 2, 4, 8, 16, 32] {
            let h = build_hk(k).unwrap();
            let p = ErasurePattern::from_columns(
                &h.edges,
                &[h.edges.left_boundary(), h.edges.right_boundary()],
            )
            .unwrap();
            assert!(erasure_ml_fails(&h, &p).unwrap());
            let w = failure_witness(&h, &p).unwrap().unwrap();
            assert!(h.matrix.mul_vec(&w).unwrap().is_zero());
        }
    }

    #[test]
    fn no_erasures_never_fail() {
        for k in 1..=8 {
            let h = build_hk(k).unwrap();
            assert!(!erasure_ml_fails(&h, &ErasurePattern::root_only(&h.edges)).unwrap());
        }
    }

    #[test]
    fn everything_erased_fails() {
        for k in 1..=12 {
            let h = build_hk(k).unwrap();
            assert!(erasure_ml_fails(&h, &ErasurePattern::all(&h.edges)).unwrap());
        }
    }

    #[test]
    fn failure_is_monotone_in_the_pattern() {
        let h = build_hk(6).unwrap();
        let mut rng = SeedPath::new(4).rng();
        for _ in 0..300 {
            let mut p = ErasurePattern::root_only(&h.edges);
            let mut failed = false;
            let mut order: Vec<usize> = (1..h.matrix.cols()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for c in order {
                p.erase(c).unwrap();
                let now = erasure_ml_fails(&h, &p).unwrap();
                assert!(now || !failed);
                failed = now;
            }
            assert!(failed);
        }
    }

    #[test]
    fn failure_matches_witness_search() {
        // Independent check on small k: enumerate subsets of erased edges.
        let h = build_hk(2).unwrap();
        let n = h.matrix.cols();
        let cols: Vec<BitVector> = (0..n).map(|c| h.matrix.column(c)).collect();
        for mask in 0u32..(1 << (n - 1)) {
            let erased: Vec<usize> = (1..n).filter(|c| mask >> (c - 1) & 1 == 1).collect();
            let p = ErasurePattern::from_columns(&h.edges, &erased).unwrap();
            let brute = (0u32..(1 << erased.len())).any(|sub| {
                let mut s = cols[0].clone();
                for (i, &c) in erased.iter().enumerate() {
                    if sub >> i & 1 == 1 {
                        s.xor_assign(&cols[c]);
                    }
                }
                s.is_zero()
            });
            assert_eq!(erasure_ml_fails(&h, &p).unwrap(), brute, "mask={mask:b}");
        }
    }

    #[test]
    fn failure_frequency_covers_boundary_event() {
        let est = erasure_mc_error_bound(4, delta(0.25), 20_000, 1).unwrap();
        let target = 0.25;
        assert!(
            est.failure.value >= target - 3.0 * est.failure.std_err,
            "{est:?}"
        );
        assert_eq!(est.ml_error_lower.value, 0.5 * est.failure.value);
    }

    #[test]
    fn tiny_noise_rarely_fails() {
        let est = erasure_mc_error_bound(3, delta(1e-6), 10_000, 2).unwrap();
        assert!(est.failure.value <= 1e-3, "{est:?}");
    }

    #[test]
    fn more_noise_more_failures() {
        let lo = erasure_mc_error_bound(8, delta(0.1), 10_000, 3).unwrap();
        let hi = erasure_mc_error_bound(8, delta(0.3), 10_000, 3).unwrap();
        let sd = (lo.failure.std_err.powi(2) + hi.failure.std_err.powi(2)).sqrt();
        assert!(
            hi.failure.value - lo.failure.value > 3.0 * sd,
            "{lo:?} {hi:?}"
        );
    }

    #[test]
    fn estimates_are_reproducible() {
        let a = erasure_mc_error_bound(5, delta(0.2), 2000, 9).unwrap();
        let b = erasure_mc_error_bound(5, delta(0.2), 2000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn xor_grid_tv_decreases() {
        let d = delta(0.2);
        let dist = grid_exact_distribution(
            &Gate::xor(2),
            &Gate::identity(),
            d,
            10,
            GridBudget::default(),
        )
        .unwrap();
        let tvs: Vec<f64> = (2..=10).map(|k| dist[k].tv()).collect();
        assert!(tvs[0] < 1.0);
        assert!(tvs.windows(2).all(|w| w[1] < w[0]), "{tvs:?}");
    }
}
