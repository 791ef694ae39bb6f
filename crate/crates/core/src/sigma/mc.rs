//! Monte Carlo on the σ-chain: monotone coupling, frozen-graph error, concentration.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::chain::DecisionRule;
use super::curves::{fixed_points, ChainModel};
use crate::error::{Error, Result};
use crate::model::{
    propagate_final_ones, CrossoverProb, DagRealization, GateSchedule, LayerSchedule,
};
use crate::rng::{tags, trial_rng};
use crate::stats::{mean_and_se, wilson, Estimate, Z95};

/// Integer tallies for one level of the coupled pair (σ⁺_k, σ⁻_k).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoupledLevelStats {
    pub level: usize,
    pub layer: usize,
    pub trials: u64,
    /// Trials with σ⁺_k ≠ σ⁻_k.
    pub unequal: u64,
    /// Σ (m⁺ − m⁻) over trials, m = L_k σ_k.
    pub gap_sum: i64,
    pub gap_sq_sum: u128,
    /// Trials where the decision rule outputs one under each root.
    pub plus_decides_one: u64,
    pub minus_decides_one: u64,
    /// Trials with σ⁺_k < σ⁻_k.
    pub order_violations: u64,
}

impl CoupledLevelStats {
    fn merge(&mut self, o: &Self) {
        self.trials += o.trials;
        self.unequal += o.unequal;
        self.gap_sum += o.gap_sum;
        self.gap_sq_sum += o.gap_sq_sum;
        self.plus_decides_one += o.plus_decides_one;
        self.minus_decides_one += o.minus_decides_one;
        self.order_violations += o.order_violations;
    }

    pub fn unequal_prob(&self) -> Estimate {
        wilson(self.unequal, self.trials, Z95)
    }

    /// E[σ⁺_k − σ⁻_k] with its standard error.
    pub fn mean_gap(&self) -> (f64, f64) {
        let l = self.layer as f64;
        let (m, se) = mean_and_se(self.trials, self.gap_sum as f64, self.gap_sq_sum as f64);
        (m / l, se / l)
    }

    /// P(rule = 1 | root 1) − P(rule = 1 | root 0): a lower bound on TV.
    pub fn decision_gap(&self) -> f64 {
        (self.plus_decides_one as f64 - self.minus_decides_one as f64) / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledMcReport {
    pub rule: DecisionRule,
    /// Index k holds level k, starting at 0.
    pub levels: Vec<CoupledLevelStats>,
}

impl CoupledMcReport {
    pub fn total_violations(&self) -> u64 {
        self.levels.iter().map(|l| l.order_violations).sum()
    }
}

/// Majority for symmetric models, 1{σ ≥ t} with the middle fixed point for AND–OR.
pub fn default_rule(model: &ChainModel, delta: CrossoverProb) -> Result<DecisionRule> {
    Ok(match model {
        ChainModel::AndOr2 => DecisionRule::Biased(fixed_points(model, delta)?.middle()),
        _ => DecisionRule::Majority,
    })
}

/// Simulates (σ⁺, σ⁻) from roots 1 and 0 with one shared uniform per node, so
/// m⁺ = #{u < g(σ⁺)} and m⁻ = #{u < g(σ⁻)} are comonotone.
pub fn coupled_mc(
    model: &ChainModel,
    delta: CrossoverProb,
    schedule: &LayerSchedule,
    depth: usize,
    trials: u64,
    seed: u64,
) -> Result<CoupledMcReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    schedule.validate()?;
    let rule = default_rule(model, delta)?;
    let sizes = schedule.sizes(depth);
    let blank: Vec<CoupledLevelStats> = sizes
        .iter()
        .enumerate()
        .map(|(level, &layer)| CoupledLevelStats {
            level,
            layer,
            ..Default::default()
        })
        .collect();

    let levels = (0..trials)
        .into_par_iter()
        .fold(
            || blank.clone(),
            |mut acc, t| {
                let mut rng = trial_rng(seed, tags::COUPLED_MC, t);
                let (mut mp, mut mm) = (1usize, 0usize);
                for k in 0..=depth {
                    if k > 0 {
                        let prev = sizes[k - 1] as f64;
                        let pp = model.level_curve(k, mp as f64 / prev, delta);
                        let pm = model.level_curve(k, mm as f64 / prev, delta);
                        let (mut np, mut nm) = (0, 0);
                        for _ in 0..sizes[k] {
                            let u: f64 = rng.random();
                            np += usize::from(u < pp);
                            nm += usize::from(u < pm);
                        }
                        (mp, mm) = (np, nm);
                    }
                    let s = &mut acc[k];
                    let gap = mp as i64 - mm as i64;
                    s.trials += 1;
                    s.unequal += u64::from(mp != mm);
                    s.gap_sum += gap;
                    s.gap_sq_sum += (gap * gap) as u128;
                    s.plus_decides_one += u64::from(rule.decide(mp, sizes[k]));
                    s.minus_decides_one += u64::from(rule.decide(mm, sizes[k]));
                    s.order_violations += u64::from(mp < mm);
                }
                acc
            },
        )
        .reduce(
            || blank.clone(),
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.merge(y);
                }
                a
            },
        );
    Ok(CoupledMcReport { rule, levels })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuenchedEstimate {
    pub errors: u64,
    pub trials: u64,
    /// Error probability with a 95% Wilson interval.
    pub error: Estimate,
}

/// P(rule(σ_depth) ≠ root) on a frozen DAG; trial t uses root = (t even).
pub fn quenched_error_estimate(
    dag: &DagRealization,
    gates: &GateSchedule,
    delta: CrossoverProb,
    rule: DecisionRule,
    trials: u64,
    seed: u64,
) -> Result<QuenchedEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    gates.check_arity(dag.d(), dag.depth())?;
    let last = dag.size(dag.depth());
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |bufs, t| {
                let root = t % 2 == 0;
                let mut rng = trial_rng(seed, tags::QUENCHED, t);
                let ones = propagate_final_ones(dag, gates, delta, root, &mut rng, bufs);
                u64::from(rule.decide(ones, last) != root)
            },
        )
        .sum();
    Ok(QuenchedEstimate {
        errors,
        trials,
        error: wilson(errors, trials, Z95),
    })
}

/// One draw of m_depth = L_depth σ_depth from the annealed chain.
pub fn sample_sigma_chain<R: Rng + ?Sized>(
    model: &ChainModel,
    delta: CrossoverProb,
    sizes: &[usize],
    root: bool,
    rng: &mut R,
) -> usize {
    let mut m = usize::from(root);
    for k in 1..sizes.len() {
        let p = model.level_curve(k, m as f64 / sizes[k - 1] as f64, delta);
        m = Binomial::new(sizes[k] as u64, p.clamp(0.0, 1.0))
            .expect("valid binomial")
            .sample(rng) as usize;
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationCheck {
    pub target: f64,
    pub tol: f64,
    pub within: u64,
    pub trials: u64,
    /// Fraction of trials with |σ_depth − target| < tol, 95% Wilson interval.
    pub fraction: Estimate,
    /// δ lies in the regime where the unique fixed point attracts every trajectory.
    pub applicable: bool,
}

/// Fraction of annealed trajectories whose σ_depth lies within `tol` of `target`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_check(
    model: &ChainModel,
    delta: CrossoverProb,
    schedule: &LayerSchedule,
    depth: usize,
    trials: u64,
    seed: u64,
    target: f64,
    tol: f64,
) -> Result<ConcentrationCheck> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    schedule.validate()?;
    let sizes = schedule.sizes(depth);
    let within: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, tags::LIMIT, t);
            let m = sample_sigma_chain(model, delta, &sizes, t % 2 == 0, &mut rng);
            u64::from((m as f64 / sizes[depth] as f64 - target).abs() < tol)
        })
        .sum();
    let applicable = model.threshold().is_some_and(|th| delta.get() > th);
    Ok(ConcentrationCheck {
        target,
        tol,
        within,
        trials,
        fraction: wilson(within, trials, Z95),
        applicable,
    })
}

/// Concentration of σ_depth around the unique attracting fixed point.
///
/// For period-two models the target at odd depth is the image of that point
/// under the first-level map. `applicable` is false below the threshold, where
/// no single limit exists.
pub fn almost_sure_limit_check(
    model: &ChainModel,
    delta: CrossoverProb,
    schedule: &LayerSchedule,
    depth: usize,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<ConcentrationCheck> {
    let report = fixed_points(model, delta)?;
    let mut target = report.middle();
    if model.period()? == 2 && depth % 2 == 1 {
        target = model.level_curve(1, target, delta);
    }
    concentration_check(model, delta, schedule, depth, trials, seed, target, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_random_dag, Gate};
    use crate::sigma::chain::{exact_chain, ExactBudget};
    use crate::sigma::curves::g_majority;

    fn delta(x: f64) -> CrossoverProb {
        CrossoverProb::new(x).unwrap()
    }

    #[test]
    fn coupling_is_ordered_and_matches_contraction() {
        let d = delta(0.25);
        let r = coupled_mc(
            &ChainModel::Majority3,
            d,
            &LayerSchedule::Constant(32),
            20,
            20_000,
            3,
        )
        .unwrap();
        assert_eq!(r.total_violations(), 0);
        for s in &r.levels {
            let (m, se) = s.mean_gap();
            assert!(
                m <= 0.75f64.powi(s.level as i32) + 3.0 * se + 1e-12,
                "k={}",
                s.level
            );
        }
    }

    #[test]
    fn coupled_decisions_agree_with_exact_chain() {
        let d = delta(0.1);
        let sched = LayerSchedule::Constant(64);
        let r = coupled_mc(&ChainModel::Majority3, d, &sched, 50, 20_000, 11).unwrap();
        let gap = r.levels[50].decision_gap();
        assert!(gap > 0.5, "{gap}");
        let exact = exact_chain(
            &ChainModel::Majority3,
            d,
            &sched,
            50,
            ExactBudget::default(),
        )
        .unwrap();
        let (pp, pm) = exact[50].decide_one_probs(DecisionRule::Majority);
        let se = (0.5 / 20_000f64).sqrt();
        assert!((gap - (pp - pm)).abs() < 4.0 * se);
    }

    #[test]
    fn quenched_noiseless_is_error_free() {
        let dag = sample_random_dag(1, 3, &LayerSchedule::Logarithmic(3.0), 15).unwrap();
        let est = quenched_error_estimate(
            &dag,
            &GateSchedule::majority(),
            CrossoverProb::noiseless(),
            DecisionRule::Majority,
            500,
            9,
        )
        .unwrap();
        assert_eq!(est.errors, 0);
    }

    #[test]
    fn quenched_estimate_is_consistent_across_seeds() {
        let dag = sample_random_dag(2, 3, &LayerSchedule::Constant(15), 20).unwrap();
        let run = |s| {
            quenched_error_estimate(
                &dag,
                &GateSchedule::majority(),
                delta(0.12),
                DecisionRule::Majority,
                5_000,
                s,
            )
            .unwrap()
        };
        let (a, b) = (run(1), run(2));
        let se = (a.error.std_err.powi(2) + b.error.std_err.powi(2)).sqrt();
        assert!((a.error.value - b.error.value).abs() < 3.0 * se + 1e-12);
    }

    #[test]
    fn quenched_rejects_wrong_arity() {
        let dag = sample_random_dag(2, 3, &LayerSchedule::Constant(5), 4).unwrap();
        let gates = GateSchedule::Uniform(Gate::and(2));
        assert!(
            quenched_error_estimate(&dag, &gates, delta(0.1), DecisionRule::Majority, 10, 0)
                .is_err()
        );
    }

    #[test]
    fn one_wide_step_concentrates_at_g() {
        let d = delta(0.2);
        let target = g_majority(1.0, d);
        // Root alternates, so compare each parity against its own g(σ_0).
        let sizes = LayerSchedule::Constant(10_000).sizes(1);
        let mut within = 0;
        for t in 0..1000u64 {
            let root = t % 2 == 0;
            let mut rng = trial_rng(5, tags::LIMIT, t);
            let m = sample_sigma_chain(&ChainModel::Majority3, d, &sizes, root, &mut rng);
            let want = if root { target } else { 1.0 - target };
            within += u64::from((m as f64 / 1e4 - want).abs() < 0.02);
        }
        assert!(within >= 990);
    }

    #[test]
    fn limit_check_flags_regime() {
        let sched = LayerSchedule::Constant(50);
        let below =
            almost_sure_limit_check(&ChainModel::Majority3, delta(0.1), &sched, 10, 10, 0, 0.05)
                .unwrap();
        assert!(!below.applicable);
        let above =
            almost_sure_limit_check(&ChainModel::Majority3, delta(0.25), &sched, 10, 10, 0, 0.05)
                .unwrap();
        assert!(above.applicable);
        assert_eq!(above.target, 0.5);
    }

    #[test]
    fn limit_fraction_matches_exact_chain_on_thin_layers() {
        // L_200 = ⌈5 ln 202⌉ = 27: the layer is too thin for σ to sit near ½ often.
        let d = delta(0.25);
        let sched = LayerSchedule::Logarithmic(5.0);
        assert_eq!(sched.size(200), 27);
        let n = 10_000;
        let mc =
            almost_sure_limit_check(&ChainModel::Majority3, d, &sched, 200, n, 4, 0.05).unwrap();
        let exact = exact_chain(
            &ChainModel::Majority3,
            d,
            &sched,
            200,
            ExactBudget::default(),
        )
        .unwrap();
        let lv = &exact[200];
        let near = |law: &[f64]| -> f64 {
            law.iter()
                .enumerate()
                .filter(|(m, _)| (*m as f64 / 27.0 - 0.5).abs() < 0.05)
                .map(|(_, p)| p)
                .sum()
        };
        let p = 0.5 * (near(&lv.plus) + near(&lv.minus));
        assert!(p < 0.5);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (mc.fraction.value - p).abs() < 3.0 * sd,
            "{} vs {p}",
            mc.fraction.value
        );
    }

    #[test]
    fn wide_layers_concentrate_at_one_half() {
        let sched = LayerSchedule::Logarithmic(400.0);
        let r = almost_sure_limit_check(
            &ChainModel::Majority3,
            delta(0.25),
            &sched,
            200,
            2_000,
            6,
            0.05,
        )
        .unwrap();
        assert!(r.applicable);
        assert!(r.fraction.value >= 0.99, "{:?}", r.fraction);
    }
}
