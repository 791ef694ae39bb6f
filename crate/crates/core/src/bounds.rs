//! Closed-form impossibility bounds and the site-percolation recursion behind them.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::divergence;
use crate::error::{Error, Result};
use crate::model::{
    sample_random_dag, CrossoverProb, DagRealization, Gate, GateSchedule, LayerSchedule,
};
use crate::rng::{tags, trial_rng, SeedPath};
use crate::stats::{mean_and_se, wilson, Estimate, Z95};

/// Per-level information contraction factor (1−2δ)²d.
pub fn contraction_factor(delta: CrossoverProb, d: usize) -> f64 {
    (1.0 - 2.0 * delta.get()).powi(2) * d as f64
}

/// L_k ((1−2δ)²d)^k, an upper bound on I(X_0; X_k) in bits.
pub fn evans_schulman(layer: usize, delta: CrossoverProb, d: usize, k: usize) -> f64 {
    layer as f64 * contraction_factor(delta, d).powi(k as i32)
}

/// Noise level at which the contraction factor reaches one.
pub fn delta_es(d: usize) -> f64 {
    0.5 - 0.5 / (d as f64).sqrt()
}

/// Above this noise level each edge is a fresh bit often enough that the
/// root's surviving edge cluster is subcritical.
pub fn bond_bound(d: usize) -> f64 {
    0.5 - 0.5 / d as f64
}

/// ln k / (d ln(1/(2δ))): layer sizes at or below this make reconstruction
/// impossible.
pub fn slow_growth_threshold(k: usize, d: usize, delta: CrossoverProb) -> f64 {
    (k as f64).ln() / (d as f64 * (1.0 / (2.0 * delta.get())).ln())
}

/// Largest level scanned when deciding a logarithmic schedule.
pub const QUALIFY_SCAN_LIMIT: usize = 10_000_000;

/// Whether L_k ≤ slow_growth_threshold(k) for every k ≥ `from`.
///
/// The threshold grows without bound in k, so schedules that are eventually
/// constant only need a finite scan. A schedule ⌈c ln(k+2)⌉ qualifies only if
/// c is below the threshold's coefficient a = 1/(d ln(1/(2δ))); past
/// k* = exp((1 + c ln 2)/(a − c)) the inequality holds automatically.
pub fn schedule_qualifies(
    schedule: &LayerSchedule,
    d: usize,
    delta: CrossoverProb,
    from: usize,
) -> Result<bool> {
    schedule.validate()?;
    let from = from.max(1);
    let holds = |k: usize| schedule.size(k) as f64 <= slow_growth_threshold(k, d, delta);
    let scan_to = match schedule {
        LayerSchedule::Constant(_) => from,
        LayerSchedule::Explicit(v) => from.max(v.len()),
        LayerSchedule::Linear => return Ok(false),
        LayerSchedule::Logarithmic(c) => {
            let a = 1.0 / (d as f64 * (1.0 / (2.0 * delta.get())).ln());
            if *c >= a {
                return Ok(false);
            }
            let k_star = ((1.0 + c * 2f64.ln()) / (a - c)).exp();
            if !(k_star < QUALIFY_SCAN_LIMIT as f64) {
                return Err(Error::BudgetExceeded {
                    what: "schedule scan levels",
                    requested: if k_star.is_finite() {
                        k_star as usize
                    } else {
                        usize::MAX
                    },
                    limit: QUALIFY_SCAN_LIMIT,
                });
            }
            from.max(k_star.ceil() as usize)
        }
    };
    Ok((from..=scan_to).all(holds))
}

/// x_0 = x0, x_{k+1} = (1−2δ)²(1 − (1 − x_k)^d). Returns `steps + 1` values.
pub fn site_percolation_iterate(
    delta: CrossoverProb,
    d: usize,
    steps: usize,
    x0: f64,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::OutOfRange {
            name: "x0",
            value: x0,
            range: "[0, 1]",
        });
    }
    let q = (1.0 - 2.0 * delta.get()).powi(2);
    let mut xs = Vec::with_capacity(steps + 1);
    xs.push(x0);
    for _ in 0..steps {
        let x = *xs.last().expect("non-empty");
        // 1 − (1−x)^d without cancellation for small x.
        xs.push(-q * (d as f64 * (-x).ln_1p()).exp_m1());
    }
    Ok(xs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteLevel {
    pub level: usize,
    pub layer: usize,
    /// Mean fraction of level-k nodes that are open and joined to the root by
    /// an open path, with its standard error.
    pub mean_lambda: f64,
    pub lambda_se: f64,
    /// Frequency of at least one such node, with a 95% Wilson interval.
    pub connected: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SitePercolationReport {
    pub delta: f64,
    pub d: usize,
    pub trials: u64,
    /// Levels 0..=depth; level 0 is the root, always open.
    pub levels: Vec<SiteLevel>,
}

/// Open-and-connected counts per level for one draw of the open flags.
fn site_run<R: Rng + ?Sized>(dag: &DagRealization, q: f64, rng: &mut R) -> Vec<usize> {
    let d = dag.d();
    let mut prev = vec![true];
    let mut counts = vec![1];
    for k in 1..=dag.depth() {
        let next: Vec<bool> = dag
            .level_parents(k)
            .chunks_exact(d)
            .map(|ps| {
                // One uniform per node keeps streams aligned across outcomes.
                let open = rng.random::<f64>() < q;
                open && ps.iter().any(|&p| prev[p as usize])
            })
            .collect();
        counts.push(next.iter().filter(|&&b| b).count());
        prev = next;
    }
    counts
}

fn summarize(
    delta: CrossoverProb,
    d: usize,
    sizes: &[usize],
    trials: u64,
    counts: &[Vec<usize>],
) -> SitePercolationReport {
    let levels = sizes
        .iter()
        .enumerate()
        .map(|(k, &layer)| {
            let fr: Vec<f64> = counts.iter().map(|c| c[k] as f64 / layer as f64).collect();
            let (mean_lambda, lambda_se) =
                mean_and_se(trials, fr.iter().sum(), fr.iter().map(|x| x * x).sum());
            let hits = counts.iter().filter(|c| c[k] > 0).count() as u64;
            SiteLevel {
                level: k,
                layer,
                mean_lambda,
                lambda_se,
                connected: wilson(hits, trials, Z95),
            }
        })
        .collect();
    SitePercolationReport {
        delta: delta.get(),
        d,
        trials,
        levels,
    }
}

/// Annealed estimates of E[λ_k] and p_k: each trial draws a fresh DAG and
/// fresh open flags, nodes open with probability (1−2δ)². Trial t uses the
/// path (seed, SITE_PERCOLATION, t), child 0 for the DAG and child 1 for flags.
pub fn site_percolation_mc(
    d: usize,
    schedule: &LayerSchedule,
    depth: usize,
    delta: CrossoverProb,
    trials: u64,
    seed: u64,
) -> Result<SitePercolationReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    let q = (1.0 - 2.0 * delta.get()).powi(2);
    let counts: Vec<Vec<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let path = SeedPath::new(seed).descend(&[tags::SITE_PERCOLATION, t]);
            let dag = sample_random_dag(path.child(0).key(), d, schedule, depth)?;
            Ok(site_run(&dag, q, &mut path.child(1).rng()))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(delta, d, &schedule.sizes(depth), trials, &counts))
}

/// Quenched estimates on a fixed DAG.
pub fn site_percolation_mc_on(
    dag: &DagRealization,
    delta: CrossoverProb,
    trials: u64,
    seed: u64,
) -> Result<SitePercolationReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be ≥ 1"));
    }
    let q = (1.0 - 2.0 * delta.get()).powi(2);
    let counts: Vec<Vec<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| site_run(dag, q, &mut trial_rng(seed, tags::SITE_PERCOLATION, t)))
        .collect();
    Ok(summarize(delta, dag.d(), dag.sizes(), trials, &counts))
}

/// Widest layer the exact word-level computations accept.
pub const MAX_EXACT_QUENCHED_LAYER: usize = 12;

fn check_word_budget(dag: &DagRealization) -> Result<()> {
    let widest = dag.sizes().iter().copied().max().unwrap_or(1);
    if widest > MAX_EXACT_QUENCHED_LAYER {
        return Err(Error::BudgetExceeded {
            what: "layer width for word enumeration",
            requested: widest,
            limit: MAX_EXACT_QUENCHED_LAYER,
        });
    }
    Ok(())
}

/// Pushes a law over level words through a layer of conditionally independent
/// nodes, `one_prob(prev, j)` giving P(node j = 1 | previous word).
fn push_words(prev: &[f64], width: usize, one_prob: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut next = vec![0.0; 1 << width];
    for (w, &pw) in prev.iter().enumerate() {
        if pw == 0.0 {
            continue;
        }
        let ps: Vec<f64> = (0..width).map(|j| one_prob(w, j)).collect();
        for (v, slot) in next.iter_mut().enumerate() {
            let mut p = pw;
            for (j, &pj) in ps.iter().enumerate() {
                p *= if v >> j & 1 == 1 { pj } else { 1.0 - pj };
            }
            *slot += p;
        }
    }
    next
}

/// Exact P(root joined to level k by an open path | G) for k = 0..=depth,
/// nodes open with probability (1−2δ)².
pub fn site_percolation_exact_on(dag: &DagRealization, delta: CrossoverProb) -> Result<Vec<f64>> {
    let q = (1.0 - 2.0 * delta.get()).powi(2);
    connection_exact(dag, |slots_reached| if slots_reached > 0 { q } else { 0.0 })
}

/// As [`site_percolation_exact_on`] but with each edge open with probability
/// (1−2δ)² and every node open. Parallel edges from one parent count separately.
pub fn bond_percolation_exact_on(dag: &DagRealization, delta: CrossoverProb) -> Result<Vec<f64>> {
    let q = (1.0 - 2.0 * delta.get()).powi(2);
    connection_exact(dag, |slots_reached| {
        1.0 - (1.0 - q).powi(slots_reached as i32)
    })
}

/// `joins(n)`: probability a node with n edge slots from reached parents is reached.
fn connection_exact(dag: &DagRealization, joins: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    check_word_budget(dag)?;
    let mut law = vec![0.0, 1.0];
    let mut out = vec![1.0];
    for k in 1..=dag.depth() {
        law = push_words(&law, dag.size(k), |w, j| {
            joins(
                dag.parents(k, j)
                    .iter()
                    .filter(|&&p| w >> p & 1 == 1)
                    .count(),
            )
        });
        out.push(1.0 - law[0]);
    }
    Ok(out)
}

/// Exact quenched laws of the level words given each root value, for a DAG
/// narrow enough to enumerate. Entry k is (plus, minus) indexed by word.
pub fn exact_quenched_laws(
    dag: &DagRealization,
    gates: &GateSchedule,
    delta: CrossoverProb,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    check_word_budget(dag)?;
    gates.check_arity(dag.d(), dag.depth())?;
    let dl = delta.get();
    let d = dag.d();
    let mut plus = vec![0.0, 1.0];
    let mut minus = vec![1.0, 0.0];
    let mut out = vec![(plus.clone(), minus.clone())];
    for k in 1..=dag.depth() {
        let gate: Gate = gates.gate_at(k);
        let one_prob = |w: usize, j: usize| {
            let ps = dag.parents(k, j);
            (0..1u32 << d)
                .filter(|&x| gate.eval(x))
                .map(|x| {
                    ps.iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            let flipped = (w >> p & 1 == 1) != (x >> i & 1 == 1);
                            if flipped {
                                dl
                            } else {
                                1.0 - dl
                            }
                        })
                        .product::<f64>()
                })
                .sum::<f64>()
        };
        plus = push_words(&plus, dag.size(k), one_prob);
        minus = push_words(&minus, dag.size(k), one_prob);
        out.push((plus.clone(), minus.clone()));
    }
    Ok(out)
}

/// Exact I(X_0; X_k | G) in bits for each level of a narrow DAG.
pub fn exact_quenched_mutual_information(
    dag: &DagRealization,
    gates: &GateSchedule,
    delta: CrossoverProb,
) -> Result<Vec<f64>> {
    Ok(exact_quenched_laws(dag, gates, delta)?
        .iter()
        .map(|(p, m)| divergence::mutual_information(p, m))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    EvansSchulman,
    DeltaEs,
    BondPercolation,
    SlowGrowth,
    SitePercolation,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::EvansSchulman => "evans_schulman",
            BoundKind::DeltaEs => "delta_es",
            BoundKind::BondPercolation => "bond_bound",
            BoundKind::SlowGrowth => "slow_growth",
            BoundKind::SitePercolation => "site_percolation",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    Exact,
    MonteCarlo { trials: u64, std_err: f64 },
}

/// A bound value next to the quantity it should dominate.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundComparison {
    pub measured: f64,
    pub provenance: Provenance,
    /// Exact comparisons have no slack; Monte Carlo ones allow three standard errors.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub d: usize,
    pub delta: Option<f64>,
    pub k: Option<usize>,
    pub layer: Option<usize>,
    pub value: f64,
    pub comparison: Option<BoundComparison>,
}

impl BoundReport {
    pub fn new(kind: BoundKind, d: usize, value: f64) -> Self {
        Self {
            kind,
            d,
            delta: None,
            k: None,
            layer: None,
            value,
            comparison: None,
        }
    }

    pub fn evans_schulman(layer: usize, delta: CrossoverProb, d: usize, k: usize) -> Self {
        Self {
            delta: Some(delta.get()),
            k: Some(k),
            layer: Some(layer),
            ..Self::new(
                BoundKind::EvansSchulman,
                d,
                evans_schulman(layer, delta, d, k),
            )
        }
    }

    #[must_use]
    pub fn compared_with(mut self, measured: f64, provenance: Provenance) -> Self {
        let slack = match provenance {
            Provenance::Exact => 0.0,
            Provenance::MonteCarlo { std_err, .. } => 3.0 * std_err,
        };
        self.comparison = Some(BoundComparison {
            measured,
            provenance,
            holds: measured <= self.value + slack,
        });
        self
    }
}
