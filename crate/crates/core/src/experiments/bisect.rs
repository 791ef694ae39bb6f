//! Localizing the reconstruction threshold from exact-chain TV.

use crate::error::{Error, Result};
use crate::model::{CrossoverProb, LayerSchedule};
use crate::sigma::{exact_tv_at, ChainModel, ExactBudget};

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdBracket {
    /// TV at level `depth` is at least `cutoff` at `low` (or `low` is 0)...
    pub low: f64,
    /// ...and below `cutoff` at `high` (or `high` is ½).
    pub high: f64,
    pub cutoff: f64,
    pub depth: usize,
    /// (δ, TV) at every evaluated midpoint, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

impl ThresholdBracket {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Bisects δ over (0, ½) on whether the exact level-`depth` TV is at least
/// `cutoff`, until the bracket is at most `tol` wide. TV decreases in δ, so the
/// endpoints are taken as TV = 1 at δ = 0 and TV = 0 at δ = ½ without
/// evaluation. A cutoff of 0 is never undershot, so the bracket closes on ½.
pub fn threshold_bisect(
    model: &ChainModel,
    schedule: &LayerSchedule,
    depth: usize,
    cutoff: f64,
    tol: f64,
) -> Result<ThresholdBracket> {
    threshold_bisect_with(model, schedule, depth, cutoff, tol, ExactBudget::default())
}

pub fn threshold_bisect_with(
    model: &ChainModel,
    schedule: &LayerSchedule,
    depth: usize,
    cutoff: f64,
    tol: f64,
    budget: ExactBudget,
) -> Result<ThresholdBracket> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if !model.reports_level(depth) {
        return Err(Error::invalid(format!(
            "{model} is compared at every period; depth {depth} is not a reported level"
        )));
    }
    schedule.validate()?;
    let widest = schedule.max_size(depth);
    if widest > budget.max_layer {
        return Err(Error::BudgetExceeded {
            what: "exact-chain layer size",
            requested: widest,
            limit: budget.max_layer,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut evaluations = Vec::new();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let tv = exact_tv_at(model, CrossoverProb::new(mid)?, schedule, depth, budget)?;
        evaluations.push((mid, tv));
        if tv >= cutoff {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdBracket {
        low: lo,
        high: hi,
        cutoff,
        depth,
        evaluations,
    })
}
