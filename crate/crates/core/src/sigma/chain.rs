//! Exact propagation of the law of σ_k under both root values.

use statrs::function::factorial::ln_factorial;

use super::curves::ChainModel;
use crate::divergence;
use crate::error::{Error, Result};
use crate::model::{CrossoverProb, LayerSchedule};

/// Law of L_k·σ_k over {0, …, L_k} given root = 1 (`plus`) and root = 0 (`minus`).
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaDistribution {
    pub level: usize,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// plus − minus, propagated through the same kernel rather than subtracted,
    /// so it stays accurate after it falls below the rounding level of the laws.
    pub gap: Vec<f64>,
}

impl SigmaDistribution {
    /// Level 0: σ_0 equals the root bit.
    pub fn root() -> Self {
        Self {
            level: 0,
            plus: vec![0.0, 1.0],
            minus: vec![1.0, 0.0],
            gap: vec![-1.0, 1.0],
        }
    }

    pub fn layer_size(&self) -> usize {
        self.plus.len() - 1
    }

    pub fn tv(&self) -> f64 {
        divergence::tv_from_gap(&self.gap)
    }

    pub fn ml_error(&self) -> f64 {
        0.5 * (1.0 - self.tv())
    }

    /// Decision per count m; ties go to 0.
    pub fn ml_rule(&self) -> Vec<bool> {
        self.gap.iter().map(|&g| g > 0.0).collect()
    }

    pub fn mutual_information(&self) -> f64 {
        let mid: Vec<f64> = self
            .plus
            .iter()
            .zip(&self.minus)
            .map(|(p, q)| 0.5 * (p + q))
            .collect();
        divergence::mutual_information_split(&mid, &self.gap)
    }

    /// Error of deciding by `rule` applied to the count of ones.
    pub fn rule_error(&self, rule: DecisionRule) -> f64 {
        let l = self.layer_size();
        divergence::rule_error(&self.plus, &self.minus, |m| rule.decide(m, l))
    }

    /// Probability under each root that `rule` outputs one.
    pub fn decide_one_probs(&self, rule: DecisionRule) -> (f64, f64) {
        let l = self.layer_size();
        let pick = |v: &[f64]| -> f64 {
            v.iter()
                .enumerate()
                .filter(|(m, _)| rule.decide(*m, l))
                .map(|(_, p)| p)
                .sum()
        };
        (pick(&self.plus), pick(&self.minus))
    }
}

/// 1{σ ≥ 1/2}.
pub fn majority_rule(sigma: f64) -> bool {
    sigma >= 0.5
}

/// 1{σ ≥ t}.
pub fn biased_rule(sigma: f64, t: f64) -> bool {
    sigma >= t
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecisionRule {
    Majority,
    Biased(f64),
}

impl DecisionRule {
    /// Decision from `ones` ones among `len` nodes. Majority compares in integers.
    #[inline]
    pub fn decide(self, ones: usize, len: usize) -> bool {
        match self {
            DecisionRule::Majority => 2 * ones >= len,
            DecisionRule::Biased(t) => biased_rule(ones as f64 / len as f64, t),
        }
    }
}

/// Limits on exact computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_layer: usize,
}

impl Default for ExactBudget {
    fn default() -> Self {
        Self { max_layer: 4096 }
    }
}

pub const RENORMALIZE_DRIFT: f64 = 1e-12;

/// Binomial(n, p) pmf evaluated in log space.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    binomial_pmf_into(n, p, &mut out);
    out
}

fn binomial_pmf_into(n: usize, p: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n + 1);
    if p <= 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if p >= 1.0 {
        out.fill(0.0);
        out[n] = 1.0;
        return;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_n = ln_factorial(n as u64);
    let mut sum = 0.0;
    for (m, slot) in out.iter_mut().enumerate() {
        let lc = ln_n - ln_factorial(m as u64) - ln_factorial((n - m) as u64);
        *slot = (lc + m as f64 * lp + (n - m) as f64 * lq).exp();
        sum += *slot;
    }
    if (sum - 1.0).abs() > RENORMALIZE_DRIFT {
        out.iter_mut().for_each(|x| *x /= sum);
    }
}

/// One level of the chain: mix Binomial(l_next, g(m/L)) rows by the current law.
pub fn exact_step(
    dist: &SigmaDistribution,
    curve: impl Fn(f64) -> f64,
    l_next: usize,
) -> SigmaDistribution {
    let l = dist.layer_size();
    let mut plus = vec![0.0; l_next + 1];
    let mut minus = vec![0.0; l_next + 1];
    let mut gap = vec![0.0; l_next + 1];
    let mut row = vec![0.0; l_next + 1];
    for m in 0..=l {
        let (wp, wm, wg) = (dist.plus[m], dist.minus[m], dist.gap[m]);
        if wp == 0.0 && wm == 0.0 {
            continue;
        }
        binomial_pmf_into(l_next, curve(m as f64 / l as f64), &mut row);
        for (i, &r) in row.iter().enumerate() {
            plus[i] += wp * r;
            minus[i] += wm * r;
            gap[i] += wg * r;
        }
    }
    for v in [&mut plus, &mut minus] {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > RENORMALIZE_DRIFT {
            v.iter_mut().for_each(|x| *x /= s);
        }
    }
    // The gap sums to zero exactly. Its rounding residue lies along the kernel's
    // invariant (mass) direction, which never contracts, so project it out along
    // the mixture law.
    let residue = crate::stats::compensated_sum(gap.iter().copied());
    for (g, (p, q)) in gap.iter_mut().zip(plus.iter().zip(&minus)) {
        *g -= residue * 0.5 * (p + q);
    }
    SigmaDistribution {
        level: dist.level + 1,
        plus,
        minus,
        gap,
    }
}

/// Laws of σ_0, …, σ_depth.
pub fn exact_chain(
    model: &ChainModel,
    delta: CrossoverProb,
    schedule: &LayerSchedule,
    depth: usize,
    budget: ExactBudget,
) -> Result<Vec<SigmaDistribution>> {
    if depth == 0 {
        return Err(Error::invalid("depth must be ≥ 1"));
    }
    schedule.validate()?;
    let widest = schedule.max_size(depth);
    if widest > budget.max_layer {
        return Err(Error::BudgetExceeded {
            what: "exact chain layer size",
            requested: widest,
            limit: budget.max_layer,
        });
    }
    let mut out = Vec::with_capacity(depth + 1);
    out.push(SigmaDistribution::root());
    for k in 1..=depth {
        let next = exact_step(
            &out[k - 1],
            |s| model.level_curve(k, s, delta),
            schedule.size(k),
        );
        out.push(next);
    }
    Ok(out)
}

/// TV at `depth` only, without keeping intermediate levels.
pub fn exact_tv_at(
    model: &ChainModel,
    delta: CrossoverProb,
    schedule: &LayerSchedule,
    depth: usize,
    budget: ExactBudget,
) -> Result<f64> {
    if depth == 0 {
        return Ok(1.0);
    }
    let widest = schedule.max_size(depth);
    if widest > budget.max_layer {
        return Err(Error::BudgetExceeded {
            what: "exact chain layer size",
            requested: widest,
            limit: budget.max_layer,
        });
    }
    let mut dist = SigmaDistribution::root();
    for k in 1..=depth {
        dist = exact_step(&dist, |s| model.level_curve(k, s, delta), schedule.size(k));
    }
    Ok(dist.tv())
}
