//! Oriented bond percolation on the 2D grid, as a diagnostic for coalescence.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{tags, trial_rng, SeedPath, StreamRng};
use crate::stats::{mean_and_se, wilson, Estimate, Z95};

#[derive(Clone, Debug, PartialEq)]
pub struct PercolationRun {
    pub p: f64,
    /// `open[l-1]` holds the edges into level l in canonical order.
    pub open: Vec<Vec<bool>>,
    /// (leftmost, rightmost) node connected to the root at each level, while any is.
    pub extent: Vec<(usize, usize)>,
    /// The root's open cluster reaches the deepest level.
    pub survived: bool,
}

impl PercolationRun {
    /// Last level reached by the root's cluster.
    pub fn reach(&self) -> usize {
        self.extent.len() - 1
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[0, 1]",
        })
    }
}

/// Simulates to `depth` or extinction. When `keep_edges` is false the edge map is left empty.
fn run(
    p: f64,
    depth: usize,
    rng: &mut StreamRng,
    keep_edges: bool,
) -> (Vec<Vec<bool>>, Vec<(usize, usize)>) {
    let mut wet = vec![true];
    let mut extent = vec![(0, 0)];
    let mut open = Vec::new();
    for l in 1..=depth {
        let mut edges = Vec::with_capacity(2 * l);
        let mut draw = |rng: &mut StreamRng| {
            let o = rng.random::<f64>() < p;
            if keep_edges {
                edges.push(o);
            }
            o
        };
        let mut next = vec![false; l + 1];
        next[0] = draw(rng) && wet[0];
        for j in 1..l {
            let left = draw(rng) && wet[j - 1];
            let right = draw(rng) && wet[j];
            next[j] = left || right;
        }
        next[l] = draw(rng) && wet[l - 1];
        if keep_edges {
            open.push(edges);
        }
        let lo = next.iter().position(|&b| b);
        let hi = next.iter().rposition(|&b| b);
        match (lo, hi) {
            (Some(lo), Some(hi)) => extent.push((lo, hi)),
            _ => break,
        }
        wet = next;
    }
    (open, extent)
}

/// Each edge open independently with probability `p`; edges drawn in canonical
/// order from the stream (seed, PERCOLATION). Stops early once the cluster dies.
pub fn bond_percolation_run(p: f64, depth: usize, seed: u64) -> Result<PercolationRun> {
    check_p(p)?;
    let mut rng = SeedPath::new(seed).child(tags::PERCOLATION).rng();
    let (open, extent) = run(p, depth, &mut rng, true);
    Ok(PercolationRun {
        p,
        survived: extent.len() == depth + 1,
        open,
        extent,
    })
}

fn trial_extent(p: f64, depth: usize, seed: u64, t: u64) -> Vec<(usize, usize)> {
    let mut rng = trial_rng(seed, tags::PERCOLATION, t);
    run(p, depth, &mut rng, false).1
}

pub fn survival_frequency(p: f64, depth: usize, trials: u64, seed: u64) -> Result<Estimate> {
    check_p(p)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    let survived: u64 = (0..trials)
        .into_par_iter()
        .map(|t| u64::from(trial_extent(p, depth, seed, t).len() == depth + 1))
        .sum();
    Ok(wilson(survived, trials, Z95))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaEstimate {
    pub survived: u64,
    pub trials: u64,
    /// Survival frequency with a 95% Wilson interval.
    pub survival: Estimate,
    /// Mean over surviving runs of the least-squares slope of R_k − L_k against k
    /// on the second half of the levels; `value ± std_err` across runs.
    pub alpha: Option<Estimate>,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Edge-speed estimate: R_k − L_k grows like α(p)·k on survival.
pub fn estimate_alpha(p: f64, depth: usize, trials: u64, seed: u64) -> Result<AlphaEstimate> {
    check_p(p)?;
    if depth < 4 || trials == 0 {
        return Err(Error::invalid(
            "alpha estimation needs depth ≥ 4 and trials ≥ 1",
        ));
    }
    let slopes: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ext = trial_extent(p, depth, seed, t);
            (ext.len() == depth + 1).then(|| {
                let pts: Vec<(f64, f64)> = (depth / 2..=depth)
                    .map(|k| (k as f64, (ext[k].1 - ext[k].0) as f64))
                    .collect();
                slope(&pts)
            })
        })
        .collect();
    let good: Vec<f64> = slopes.into_iter().flatten().collect();
    let survived = good.len() as u64;
    let alpha = (survived > 0).then(|| {
        let sum: f64 = good.iter().sum();
        let sq: f64 = good.iter().map(|s| s * s).sum();
        let (m, se) = mean_and_se(survived, sum, sq);
        Estimate {
            value: m,
            low: m - 1.96 * se,
            high: m + 1.96 * se,
            std_err: se,
        }
    });
    Ok(AlphaEstimate {
        survived,
        trials,
        survival: wilson(survived, trials, Z95),
        alpha,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalBracket {
    /// Survival frequency at `low` is below `theta`, at `high` at least `theta`.
    pub low: f64,
    pub high: f64,
    pub theta: f64,
    pub depth: usize,
    pub trials: u64,
}

/// Brackets the critical open probability by bisecting on whether the survival
/// frequency to `depth` reaches `theta`. Finite depth biases the bracket upward
/// of the infinite-lattice value.
pub fn estimate_delta_perc(
    trials: u64,
    depth: usize,
    theta: f64,
    tol: f64,
    seed: u64,
) -> Result<CriticalBracket> {
    if !(0.0 < theta && theta < 1.0) || tol <= 0.0 {
        return Err(Error::invalid(
            "theta must lie in (0, 1) and tol be positive",
        ));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if survival_frequency(mid, depth, trials, seed)?.value >= theta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalBracket {
        low: lo,
        high: hi,
        theta,
        depth,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_open_lattice() {
        let r = bond_percolation_run(1.0, 30, 0).unwrap();
        assert!(r.survived);
        for (k, &(l, rr)) in r.extent.iter().enumerate() {
            assert_eq!((l, rr), (0, k));
        }
        assert!(r.open.iter().all(|lv| lv.iter().all(|&o| o)));
    }

    #[test]
    fn closed_lattice_dies_at_level_one() {
        let r = bond_percolation_run(0.0, 30, 0).unwrap();
        assert!(!r.survived);
        assert_eq!(r.reach(), 0);
    }

    #[test]
    fn extents_are_ordered_and_edges_counted() {
        let r = bond_percolation_run(0.7, 200, 4).unwrap();
        assert!(r.extent.iter().all(|&(l, rr)| l <= rr));
        for (i, lv) in r.open.iter().enumerate() {
            assert_eq!(lv.len(), 2 * (i + 1));
        }
        assert_eq!(r, bond_percolation_run(0.7, 200, 4).unwrap());
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(bond_percolation_run(1.5, 3, 0).is_err());
    }

    #[test]
    fn supercritical_alpha_is_stable_across_seeds() {
        let a = estimate_alpha(0.8, 500, 1000, 1).unwrap();
        let b = estimate_alpha(0.8, 500, 1000, 2).unwrap();
        assert!(a.survival.value > 0.5);
        let (x, y) = (a.alpha.unwrap().value, b.alpha.unwrap().value);
        assert!(x > 0.0 && x <= 1.0);
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }

    #[test]
    fn bracket_is_inside_unit_interval() {
        let b = estimate_delta_perc(200, 100, 0.1, 0.02, 3).unwrap();
        assert!(b.low < b.high && b.high - b.low <= 0.02);
        assert!(b.low > 0.5 && b.high < 0.8);
    }
}
