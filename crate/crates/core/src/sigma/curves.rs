//! Conditional-mean maps σ ↦ E[σ_k | σ_{k−1} = σ], their fixed points and slopes.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{conv, gate_output_prob, CrossoverProb, Gate, GateSchedule};

/// Below this crossover probability the majority map has three fixed points.
pub const MAJORITY_THRESHOLD: f64 = 1.0 / 6.0;

/// (3 − √7)/4: below it the AND–OR two-step map has three fixed points.
pub fn and_or_threshold() -> f64 {
    (3.0 - 7f64.sqrt()) / 4.0
}

/// (9 − √33)/12: where the maximiser of the AND–OR slope hits σ = 0.
pub fn and_or_slope_branch() -> f64 {
    (9.0 - 33f64.sqrt()) / 12.0
}

/// Distance from a threshold treated as landing exactly on it.
pub const DEGENERATE_TOL: f64 = 1e-12;

pub fn g_majority(sigma: f64, delta: CrossoverProb) -> f64 {
    let m = conv(sigma, delta.get());
    m * m * (3.0 - 2.0 * m)
}

pub fn g_majority_slope(sigma: f64, delta: CrossoverProb) -> f64 {
    let d = delta.get();
    let m = conv(sigma, d);
    6.0 * (1.0 - 2.0 * d) * m * (1.0 - m)
}

/// AND step: (σ⋆δ)².
pub fn g_and(sigma: f64, delta: CrossoverProb) -> f64 {
    let m = conv(sigma, delta.get());
    m * m
}

/// OR step: 1 − (1 − σ⋆δ)².
pub fn g_or(sigma: f64, delta: CrossoverProb) -> f64 {
    let m = conv(sigma, delta.get());
    1.0 - (1.0 - m) * (1.0 - m)
}

/// One OR level followed by one AND level.
pub fn g_andor(sigma: f64, delta: CrossoverProb) -> f64 {
    g_and(g_or(sigma, delta), delta)
}

/// Slope of `g_andor`: 4(1−2δ)² (g_or(σ)⋆δ)(1 − σ⋆δ).
pub fn g_andor_slope(sigma: f64, delta: CrossoverProb) -> f64 {
    let d = delta.get();
    let a = 1.0 - 2.0 * d;
    4.0 * a * a * conv(g_or(sigma, delta), d) * (1.0 - conv(sigma, d))
}

/// d/dp of `gate_output_prob(gate, p)`.
pub fn gate_output_slope(gate: &Gate, p: f64) -> f64 {
    let d = gate.arity() as i32;
    let q = 1.0 - p;
    let mut acc = 0.0;
    for w in 0..(1u32 << d) {
        if !gate.eval(w) {
            continue;
        }
        let h = w.count_ones() as i32;
        if h > 0 {
            acc += f64::from(h) * p.powi(h - 1) * q.powi(d - h);
        }
        if h < d {
            acc -= f64::from(d - h) * p.powi(h) * q.powi(d - h - 1);
        }
    }
    acc
}

/// Which σ-chain is being analysed.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainModel {
    /// d = 3, majority at every level.
    Majority3,
    /// d = 2, OR at odd levels and AND at even levels.
    AndOr2,
    Custom(GateSchedule),
}

impl fmt::Display for ChainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainModel::Majority3 => f.write_str("maj3"),
            ChainModel::AndOr2 => f.write_str("andor2"),
            ChainModel::Custom(_) => f.write_str("custom"),
        }
    }
}

impl ChainModel {
    pub fn gates(&self) -> GateSchedule {
        match self {
            ChainModel::Majority3 => GateSchedule::majority(),
            ChainModel::AndOr2 => GateSchedule::and_or(),
            ChainModel::Custom(g) => g.clone(),
        }
    }

    pub fn in_degree(&self) -> usize {
        self.gates().gate_at(1).arity()
    }

    /// g_k(σ): probability that a level-k node is one given σ_{k−1} = σ.
    pub fn level_curve(&self, k: usize, sigma: f64, delta: CrossoverProb) -> f64 {
        match self {
            ChainModel::Majority3 => g_majority(sigma, delta),
            ChainModel::AndOr2 if k % 2 == 1 => g_or(sigma, delta),
            ChainModel::AndOr2 => g_and(sigma, delta),
            ChainModel::Custom(g) => gate_output_prob(&g.gate_at(k), conv(sigma, delta.get())),
        }
    }

    fn level_slope(&self, k: usize, sigma: f64, delta: CrossoverProb) -> f64 {
        let gate = self.gates().gate_at(k);
        (1.0 - 2.0 * delta.get()) * gate_output_slope(&gate, conv(sigma, delta.get()))
    }

    /// Levels spanned by one application of the composite map.
    pub fn period(&self) -> Result<usize> {
        match self {
            ChainModel::Majority3 => Ok(1),
            ChainModel::AndOr2 => Ok(2),
            ChainModel::Custom(GateSchedule::Uniform(_)) => Ok(1),
            ChainModel::Custom(GateSchedule::Alternating { .. }) => Ok(2),
            ChainModel::Custom(GateSchedule::PerLevel(_)) => Err(Error::invalid(
                "composite map needs a uniform or alternating gate schedule",
            )),
        }
    }

    /// Levels at which results are reported: every level, or even levels for
    /// period-two models.
    pub fn reports_level(&self, k: usize) -> bool {
        match self.period() {
            Ok(2) => k.is_multiple_of(2),
            _ => true,
        }
    }

    /// Composite map over one period starting at level 1.
    pub fn composite(&self, sigma: f64, delta: CrossoverProb) -> Result<f64> {
        Ok(match self {
            ChainModel::Majority3 => g_majority(sigma, delta),
            ChainModel::AndOr2 => g_andor(sigma, delta),
            _ => {
                let mut s = sigma;
                for k in 1..=self.period()? {
                    s = self.level_curve(k, s, delta);
                }
                s
            }
        })
    }

    pub fn composite_slope(&self, sigma: f64, delta: CrossoverProb) -> Result<f64> {
        Ok(match self {
            ChainModel::Majority3 => g_majority_slope(sigma, delta),
            ChainModel::AndOr2 => g_andor_slope(sigma, delta),
            _ => {
                let mut s = sigma;
                let mut slope = 1.0;
                for k in 1..=self.period()? {
                    slope *= self.level_slope(k, s, delta);
                    s = self.level_curve(k, s, delta);
                }
                slope
            }
        })
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            ChainModel::Majority3 => Some(MAJORITY_THRESHOLD),
            ChainModel::AndOr2 => Some(and_or_threshold()),
            ChainModel::Custom(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    /// |g′(value)| < 1.
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointReport {
    pub model: ChainModel,
    pub delta: f64,
    /// Ascending.
    pub points: Vec<FixedPoint>,
    pub lipschitz: f64,
    /// δ sits on the model's threshold, where the outer roots merge into the middle one.
    pub degenerate: bool,
}

impl FixedPointReport {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Largest fixed point.
    pub fn top(&self) -> f64 {
        self.points.last().map(|p| p.value).unwrap_or(f64::NAN)
    }

    /// Middle (unstable or unique) fixed point.
    pub fn middle(&self) -> f64 {
        self.points[self.points.len() / 2].value
    }
}

pub const BISECT_TOL: f64 = 1e-14;
pub const BISECT_MAX_ITERS: usize = 200;

/// Root of `h` in [a, b] given h(a)·h(b) ≤ 0.
pub fn bisect_root(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut ha = h(a);
    let hb = h(b);
    if ha == 0.0 {
        return Some(a);
    }
    if hb == 0.0 {
        return Some(b);
    }
    if ha.signum() == hb.signum() {
        return None;
    }
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (a + b);
        if b - a <= BISECT_TOL || mid <= a || mid >= b {
            break;
        }
        let hm = h(mid);
        if hm == 0.0 {
            return Some(mid);
        }
        if hm.signum() == ha.signum() {
            a = mid;
            ha = hm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// All fixed points of `g` in [0, 1] found by a grid scan plus bisection.
pub fn fixed_points_by_scan(g: impl Fn(f64) -> f64, grid: usize) -> Vec<f64> {
    let h = |s: f64| g(s) - s;
    let mut roots: Vec<f64> = Vec::new();
    let xs: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ha, hb) = (h(a), h(b));
        if ha == 0.0 {
            roots.push(a);
        } else if hb != 0.0 && ha.signum() != hb.signum() {
            roots.push(bisect_root(h, a, b).expect("sign change"));
        }
    }
    if h(1.0) == 0.0 {
        roots.push(1.0);
    }
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    roots
}

/// Bisection refinement of a closed-form root, bracketing within `radius`.
/// Falls back to the value itself when |g(v) − v| is already zero.
pub fn refine_root(g: impl Fn(f64) -> f64, v: f64, radius: f64) -> Option<f64> {
    let h = |s: f64| g(s) - s;
    if h(v) == 0.0 {
        return Some(v);
    }
    let mut r = radius;
    while r > 1e-15 {
        let (a, b) = ((v - r).max(0.0), (v + r).min(1.0));
        if let Some(root) = bisect_root(h, a, b) {
            return Some(root);
        }
        r *= 0.5;
    }
    None
}

fn majority_closed_forms(delta: f64) -> Vec<f64> {
    if delta >= MAJORITY_THRESHOLD - DEGENERATE_TOL {
        return vec![0.5];
    }
    let a = 1.0 - 2.0 * delta;
    let top = 0.5 * (1.0 + ((1.0 - 6.0 * delta) / (a * a * a)).sqrt());
    vec![1.0 - top, 0.5, top]
}

/// t₀, t, t₁ when they are distinct, otherwise just t.
fn and_or_closed_forms(delta: f64) -> Vec<f64> {
    let a = 1.0 - 2.0 * delta;
    let base = 2.0 * (1.0 - delta) * a;
    let denom = 2.0 * a * a;
    // Rationalised: the textbook numerator cancels to 0/0 as δ → 1/2.
    let t = 2.0 * (1.0 - delta).powi(2) / (base + 1.0 + (2.0 * base + 1.0).sqrt());
    if delta >= and_or_threshold() - DEGENERATE_TOL {
        return vec![t];
    }
    let disc = (2.0 * base - 3.0).max(0.0).sqrt();
    vec![(base - 1.0 - disc) / denom, t, (base - 1.0 + disc) / denom]
}

/// Closed-form fixed points of the composite map, ascending; `None` for custom models.
pub fn closed_form_fixed_points(model: &ChainModel, delta: CrossoverProb) -> Option<Vec<f64>> {
    match model {
        ChainModel::Majority3 => Some(majority_closed_forms(delta.get())),
        ChainModel::AndOr2 => Some(and_or_closed_forms(delta.get())),
        ChainModel::Custom(_) => None,
    }
}

/// Lipschitz constant of the composite map over [0, 1].
pub fn lipschitz(model: &ChainModel, delta: CrossoverProb) -> Result<f64> {
    let d = delta.get();
    match model {
        ChainModel::Majority3 => Ok(1.5 * (1.0 - 2.0 * d)),
        ChainModel::AndOr2 => {
            if d <= and_or_slope_branch() {
                Ok((4.0 * (1.0 - d) * (1.0 - 2.0 * d) / 3.0).powf(1.5))
            } else {
                let a = 1.0 - 2.0 * d;
                Ok(4.0 * d * (1.0 - d).powi(2) * a * a * (3.0 - 2.0 * d))
            }
        }
        ChainModel::Custom(_) => {
            model.period()?;
            Ok(max_abs_slope(model, delta, LIPSCHITZ_GRID))
        }
    }
}

pub const LIPSCHITZ_GRID: usize = 10_000;

/// max |g′| over an evenly spaced grid of `grid + 1` points.
pub fn max_abs_slope(model: &ChainModel, delta: CrossoverProb, grid: usize) -> f64 {
    (0..=grid)
        .map(|i| {
            model
                .composite_slope(i as f64 / grid as f64, delta)
                .expect("periodic model")
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Fixed points, stability and Lipschitz constant of the composite map.
///
/// Closed forms, where available, are each refined by bisection and rejected if
/// the two disagree beyond 1e−10.
pub fn fixed_points(model: &ChainModel, delta: CrossoverProb) -> Result<FixedPointReport> {
    let g = |s: f64| model.composite(s, delta).expect("periodic model");
    model.period()?;
    let degenerate = model
        .threshold()
        .is_some_and(|t| (delta.get() - t).abs() <= DEGENERATE_TOL);
    let values = match closed_form_fixed_points(model, delta) {
        // A triple root is only located to about the cube root of machine precision,
        // so on the threshold the closed form is held to its residual alone.
        Some(vals) if degenerate => {
            for &v in &vals {
                if (g(v) - v).abs() >= 1e-12 {
                    return Err(Error::invalid(format!(
                        "degenerate fixed point {v} has residual {:e}",
                        g(v) - v
                    )));
                }
            }
            vals
        }
        Some(vals) => {
            for &v in &vals {
                let refined = refine_root(g, v, 1e-6).ok_or_else(|| {
                    Error::invalid(format!(
                        "no sign change of g(σ) − σ near {v} at δ = {delta}"
                    ))
                })?;
                if (refined - v).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "closed-form fixed point {v} disagrees with bisection {refined} at δ = {delta}"
                    )));
                }
            }
            vals
        }
        None => fixed_points_by_scan(g, 4096),
    };
    let points = values
        .into_iter()
        .map(|value| FixedPoint {
            value,
            stable: model.composite_slope(value, delta).expect("periodic").abs() < 1.0,
        })
        .collect();
    Ok(FixedPointReport {
        model: model.clone(),
        delta: delta.get(),
        points,
        lipschitz: lipschitz(model, delta)?,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn delta(x: f64) -> CrossoverProb {
        CrossoverProb::new(x).unwrap()
    }

    #[test]
    fn threshold_constants() {
        assert!((and_or_threshold() - 0.088_562_172_233_852_3).abs() < 1e-15);
        assert!((and_or_slope_branch() - 0.271_286_446_121_830_9).abs() < 1e-15);
    }

    #[test]
    fn majority_curve_examples() {
        assert_eq!(g_majority(0.5, delta(0.3)), 0.5);
        assert!((g_majority(0.3, CrossoverProb::noiseless()) - 0.216).abs() < 1e-15);
        assert!((g_majority(1.0, delta(0.1)) - 0.972).abs() < 1e-15);
    }

    #[test]
    fn and_or_curve_examples() {
        let z = CrossoverProb::noiseless();
        for s in [0.0, 0.2, 0.7, 1.0] {
            assert!((g_and(s, z) - s * s).abs() < 1e-15);
            assert!((g_or(s, z) - (2.0 * s - s * s)).abs() < 1e-15);
        }
        assert_eq!(g_andor(1.0, z), 1.0);
        assert_eq!(g_andor(0.0, z), 0.0);
        let d = delta(0.1);
        assert!((g_or(0.5, d) - 0.75).abs() < 1e-15);
        assert!((g_andor(0.5, d) - 0.49).abs() < 1e-15);
        let via_gates = gate_output_prob(
            &Gate::and(2),
            conv(gate_output_prob(&Gate::or(2), conv(0.5, 0.1)), 0.1),
        );
        assert!((via_gates - 0.49).abs() < 1e-15);
    }

    #[test]
    fn curves_agree_with_gate_probabilities() {
        let d = delta(0.13);
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            let m = conv(s, 0.13);
            assert!((g_majority(s, d) - gate_output_prob(&Gate::majority3(), m)).abs() < 1e-15);
            let custom = ChainModel::Custom(GateSchedule::and_or());
            let c = custom.composite(s, d).unwrap();
            assert!((c - g_andor(s, d)).abs() < 1e-15);
        }
    }

    fn numeric_slope(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let h = 1e-6;
        let (a, b) = ((s - h).max(0.0), (s + h).min(1.0));
        (f(b) - f(a)) / (b - a)
    }

    #[test]
    fn slopes_match_finite_differences() {
        let d = delta(0.07);
        let custom = ChainModel::Custom(GateSchedule::Uniform(Gate::majority3()));
        for i in 1..50 {
            let s = i as f64 / 50.0;
            let nm = numeric_slope(|x| g_majority(x, d), s);
            assert!((g_majority_slope(s, d) - nm).abs() < 1e-6);
            assert!((custom.composite_slope(s, d).unwrap() - nm).abs() < 1e-6);
            let na = numeric_slope(|x| g_andor(x, d), s);
            assert!((g_andor_slope(s, d) - na).abs() < 1e-6);
        }
    }

    #[test]
    fn majority_fixed_points_examples() {
        let r = fixed_points(&ChainModel::Majority3, delta(1e-9)).unwrap();
        let v = r.values();
        assert_eq!(v.len(), 3);
        for (got, want) in v.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-4);
        }
        let r = fixed_points(&ChainModel::Majority3, delta(0.1)).unwrap();
        assert!((r.top() - 0.941_941_7).abs() < 1e-7);
        assert!(r.points[2].stable && !r.points[1].stable && r.points[0].stable);
        let r = fixed_points(&ChainModel::Majority3, delta(0.2)).unwrap();
        assert_eq!(r.values(), vec![0.5]);
        assert!(r.points[0].stable);
    }

    #[test]
    fn and_or_noiseless_middle_point() {
        let z = CrossoverProb::noiseless();
        let forms = closed_form_fixed_points(&ChainModel::AndOr2, z).unwrap();
        let t = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((forms[1] - t).abs() < 1e-15);
        assert!((forms[1] - 0.381_966_0).abs() < 1e-7);
        assert_eq!(forms[0], 0.0);
        assert_eq!(forms[2], 1.0);
        let root = refine_root(|s| g_andor(s, z), 0.38, 0.01).unwrap();
        assert!((root - t).abs() < 1e-12);
    }

    #[test]
    fn degenerate_thresholds_are_flagged() {
        let r = fixed_points(&ChainModel::Majority3, delta(MAJORITY_THRESHOLD)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.values(), vec![0.5]);
        let r = fixed_points(&ChainModel::AndOr2, delta(and_or_threshold())).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.points.len(), 1);
        assert!(
            !fixed_points(&ChainModel::AndOr2, delta(0.05))
                .unwrap()
                .degenerate
        );
    }

    #[test]
    fn lipschitz_examples() {
        assert!((lipschitz(&ChainModel::Majority3, delta(0.25)).unwrap() - 0.75).abs() < 1e-15);
        let c = lipschitz(&ChainModel::AndOr2, delta(0.3)).unwrap();
        assert!((c - 0.225_792).abs() < 1e-12);
        let c = lipschitz(&ChainModel::AndOr2, delta(0.1)).unwrap();
        assert!((c - 0.96f64.powf(1.5)).abs() < 1e-15);
        assert!((c - 0.9406).abs() < 1e-4);
    }

    #[test]
    fn and_or_lipschitz_is_one_at_threshold() {
        let c = lipschitz(&ChainModel::AndOr2, delta(and_or_threshold())).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn custom_model_falls_back_to_scan() {
        let custom = ChainModel::Custom(GateSchedule::Uniform(Gate::majority3()));
        for d in [0.05, 0.12, 0.3] {
            let a = fixed_points(&custom, delta(d)).unwrap().values();
            let b = fixed_points(&ChainModel::Majority3, delta(d))
                .unwrap()
                .values();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        let per_level = ChainModel::Custom(GateSchedule::PerLevel(vec![Gate::majority3()]));
        assert!(fixed_points(&per_level, delta(0.1)).is_err());
    }

    proptest! {
        #[test]
        fn majority_self_duality(s in 0.0f64..=1.0, d in 0.001f64..0.499) {
            let dp = delta(d);
            prop_assert!((g_majority(1.0 - s, dp) - (1.0 - g_majority(s, dp))).abs() < 1e-14);
        }

        #[test]
        fn lipschitz_dominates_sampled_slope(d in 0.001f64..0.499) {
            let dp = delta(d);
            for model in [ChainModel::Majority3, ChainModel::AndOr2] {
                let c = lipschitz(&model, dp).unwrap();
                prop_assert!(c >= max_abs_slope(&model, dp, LIPSCHITZ_GRID) - 1e-9);
            }
        }

        #[test]
        fn reported_points_have_tiny_residual(d in 0.001f64..0.499) {
            let dp = delta(d);
            for model in [ChainModel::Majority3, ChainModel::AndOr2] {
                let r = fixed_points(&model, dp).unwrap();
                for v in r.values() {
                    prop_assert!((model.composite(v, dp).unwrap() - v).abs() < 1e-12);
                }
            }
        }
    }
}
