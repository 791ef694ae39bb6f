//! Distances and decision quantities between the two root-conditional laws.
//!
//! All functions take the law given root = 1 (`plus`) and given root = 0
//! (`minus`) over a common finite state space, with a uniform prior on the root.

use crate::stats::KahanSum;

/// ½ Σ |plus − minus|.
pub fn tv(plus: &[f64], minus: &[f64]) -> f64 {
    assert_eq!(plus.len(), minus.len());
    let mut acc = KahanSum::new();
    for (p, q) in plus.iter().zip(minus) {
        acc.add((p - q).abs());
    }
    (0.5 * acc.value()).clamp(0.0, 1.0)
}

/// Minimum error probability of guessing the root: (1 − TV)/2.
pub fn ml_error(plus: &[f64], minus: &[f64]) -> f64 {
    0.5 * (1.0 - tv(plus, minus))
}

/// Maximum-likelihood decision per state; ties go to 0.
pub fn ml_rule(plus: &[f64], minus: &[f64]) -> Vec<bool> {
    plus.iter().zip(minus).map(|(p, q)| p > q).collect()
}

/// Error probability of an arbitrary decision table under a uniform prior.
pub fn rule_error(plus: &[f64], minus: &[f64], decide: impl Fn(usize) -> bool) -> f64 {
    let mut acc = KahanSum::new();
    for (s, (p, q)) in plus.iter().zip(minus).enumerate() {
        acc.add(if decide(s) { *q } else { *p });
    }
    0.5 * acc.value()
}

/// I(root; state) in bits, with 0·log 0 = 0.
pub fn mutual_information(plus: &[f64], minus: &[f64]) -> f64 {
    assert_eq!(plus.len(), minus.len());
    let mid: Vec<f64> = plus.iter().zip(minus).map(|(p, q)| 0.5 * (p + q)).collect();
    let gap: Vec<f64> = plus.iter().zip(minus).map(|(p, q)| p - q).collect();
    mutual_information_split(&mid, &gap)
}

/// (1+x)·ln(1+x) + (1−x)·ln(1−x) for x ∈ [−1, 1], accurate to relative
/// rounding as x → 0, where the two terms cancel to x².
fn symmetric_entropy_gap(x: f64) -> f64 {
    let x = x.abs().min(1.0);
    if x < 1e-4 {
        let x2 = x * x;
        // Σ x^{2n} / (n(2n−1)); the next term is below 1e−28 relative.
        x2 * (1.0 + x2 * (1.0 / 6.0 + x2 / 15.0))
    } else if x == 1.0 {
        2.0 * std::f64::consts::LN_2
    } else {
        (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p()
    }
}

/// Mutual information from the mixture law `mid` = (plus + minus)/2 and the
/// signed difference `gap` = plus − minus. Tracking the difference separately
/// keeps the result accurate when it is far below the rounding level of the laws.
pub fn mutual_information_split(mid: &[f64], gap: &[f64]) -> f64 {
    assert_eq!(mid.len(), gap.len());
    let mut acc = KahanSum::new();
    for (&m, &g) in mid.iter().zip(gap) {
        if m > 0.0 {
            acc.add(0.5 * m * symmetric_entropy_gap(0.5 * g / m));
        }
    }
    (acc.value() / std::f64::consts::LN_2).clamp(0.0, 1.0)
}

/// ½ Σ |gap|.
pub fn tv_from_gap(gap: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for g in gap {
        acc.add(g.abs());
    }
    (0.5 * acc.value()).clamp(0.0, 1.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}
