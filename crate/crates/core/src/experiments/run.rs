//! Dispatching a configuration to the owning module and summarizing the sweep.

use std::fmt;

use crate::bounds::evans_schulman;
use crate::coupling::coupling_tv_bound;
use crate::error::{Error, Result};
use crate::grid::{grid_exact_distribution, grid_mc_tv_estimate, GridBudget};
use crate::model::{CrossoverProb, Gate};
use crate::percolation::survival_frequency;
use crate::sigma::{coupled_mc, exact_chain, ChainModel, ExactBudget};
use crate::stats::{Estimate, Z95};
use crate::xorcode::{erasure_mc_error_bound, MAX_HK_LEVEL};

use super::config::{ExperimentConfig, Method, ModelKind};
use super::results::{sort_rows, Metric, ResultRow};

/// Size caps checked before any work starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Budget {
    pub exact: ExactBudget,
    pub grid: GridBudget,
}

/// Largest grid depth the Monte Carlo word counter supports.
pub const GRID_MC_MAX_DEPTH: usize = 63;

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    /// Last δ before the crossing with value at least the cutoff, if any.
    pub above: Option<f64>,
    /// First δ with value below the cutoff.
    pub below: f64,
}

impl Crossing {
    /// Whether the half-open bracket (above, below] contains `x`.
    pub fn brackets(&self, x: f64) -> bool {
        self.above.is_none_or(|a| a < x) && x <= self.below
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub model: ModelKind,
    pub method: Method,
    /// Metric used for crossing detection, if the method has one.
    pub metric: Option<Metric>,
    /// Level at which the metric is compared.
    pub level: usize,
    pub cutoff: f64,
    pub deltas: usize,
    pub rows: usize,
    pub crossing: Option<Crossing>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} / {}: {} δ values, {} rows",
            self.model, self.method, self.deltas, self.rows
        )?;
        let Some(metric) = self.metric else {
            return write!(f, "no crossing metric for this method");
        };
        match &self.crossing {
            Some(Crossing {
                above: Some(a),
                below,
            }) => write!(
                f,
                "{metric} at k={} falls below {} in ({a}, {below}]",
                self.level, self.cutoff
            ),
            Some(Crossing { above: None, below }) => write!(
                f,
                "{metric} at k={} is below {} already at the first δ = {below}",
                self.level, self.cutoff
            ),
            None => write!(
                f,
                "{metric} at k={} stays at or above {} across the sweep",
                self.level, self.cutoff
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// Sorted by (model, δ, k, metric).
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

fn chain_model(m: ModelKind) -> Option<ChainModel> {
    match m {
        ModelKind::RandomDagMaj3 => Some(ChainModel::Majority3),
        ModelKind::RandomDagAndOr2 => Some(ChainModel::AndOr2),
        _ => None,
    }
}

fn grid_gates(m: ModelKind) -> (Gate, Gate) {
    match m {
        ModelKind::GridXor => (Gate::xor(2), Gate::identity()),
        _ => (Gate::and(2), Gate::identity()),
    }
}

fn crossing_metric(model: ModelKind, method: Method) -> Option<Metric> {
    match (model, method) {
        (ModelKind::Percolation, _) => Some(Metric::Survival),
        (ModelKind::Bounds, _) => Some(Metric::BoundValue),
        (_, Method::Exact) => Some(Metric::TvExact),
        (_, Method::Mc) if chain_model(model).is_some() => Some(Metric::CoalesceProb),
        (_, Method::Mc) => Some(Metric::TvMc),
        (_, Method::Coupling) => Some(Metric::CoalesceProb),
        (_, Method::Erasure) => None,
    }
}

/// Deepest level at which the configuration produces its crossing metric.
fn report_level(cfg: &ExperimentConfig) -> usize {
    match chain_model(cfg.model) {
        Some(m) if !m.reports_level(cfg.depth) => cfg.depth - 1,
        _ => cfg.depth,
    }
}

fn check_budget(cfg: &ExperimentConfig, budget: &Budget) -> Result<()> {
    let exceeded = |what, requested, limit| {
        Err(Error::BudgetExceeded {
            what,
            requested,
            limit,
        })
    };
    match (cfg.model, cfg.method) {
        (ModelKind::RandomDagMaj3 | ModelKind::RandomDagAndOr2, Method::Exact) => {
            let widest = cfg.schedule.max_size(cfg.depth);
            if widest > budget.exact.max_layer {
                return exceeded("exact-chain layer size", widest, budget.exact.max_layer);
            }
        }
        (ModelKind::GridAnd | ModelKind::GridXor, Method::Exact)
            if cfg.depth > budget.grid.max_depth =>
        {
            return exceeded("exact grid depth", cfg.depth, budget.grid.max_depth);
        }
        (ModelKind::GridAnd | ModelKind::GridXor, Method::Mc) if cfg.depth > GRID_MC_MAX_DEPTH => {
            return exceeded("grid Monte Carlo depth", cfg.depth, GRID_MC_MAX_DEPTH);
        }
        (ModelKind::GridXor, Method::Erasure) if cfg.depth > MAX_HK_LEVEL => {
            return exceeded("H_k level", cfg.depth, MAX_HK_LEVEL);
        }
        _ => {}
    }
    Ok(())
}

fn rows_for_delta(cfg: &ExperimentConfig, budget: &Budget, d: f64) -> Result<Vec<ResultRow>> {
    let delta = CrossoverProb::new(d)?;
    let (model, method, seed, trials) = (cfg.model, cfg.method, cfg.seed, cfg.trials);
    let exact =
        |k, l_k, metric, value| ResultRow::exact(model, method, d, k, l_k, metric, value, seed);
    let est =
        |k, l_k, metric, e| ResultRow::estimate(model, method, d, k, l_k, metric, e, seed, trials);
    let mut rows = Vec::new();
    match (model, method) {
        (ModelKind::RandomDagMaj3 | ModelKind::RandomDagAndOr2, Method::Exact) => {
            let cm = chain_model(model).expect("dag model");
            let dist = exact_chain(&cm, delta, &cfg.schedule, cfg.depth, budget.exact)?;
            for lv in dist.iter().skip(1).filter(|lv| cm.reports_level(lv.level)) {
                let (k, l) = (lv.level, lv.layer_size());
                rows.push(exact(k, l, Metric::TvExact, lv.tv()));
                rows.push(exact(k, l, Metric::MlError, lv.ml_error()));
                rows.push(exact(k, l, Metric::MiBits, lv.mutual_information()));
            }
        }
        (ModelKind::RandomDagMaj3 | ModelKind::RandomDagAndOr2, Method::Mc) => {
            let cm = chain_model(model).expect("dag model");
            let rep = coupled_mc(&cm, delta, &cfg.schedule, cfg.depth, trials, seed)?;
            let n = trials as f64;
            for s in rep
                .levels
                .iter()
                .skip(1)
                .filter(|s| cm.reports_level(s.level))
            {
                rows.push(est(
                    s.level,
                    s.layer,
                    Metric::CoalesceProb,
                    s.unequal_prob(),
                ));
                // Error of the default rule: an upper bound on the ML error.
                let p1 = s.plus_decides_one as f64 / n;
                let p0 = s.minus_decides_one as f64 / n;
                let value = 0.5 * ((1.0 - p1) + p0);
                // The two decisions are positively correlated under the
                // coupling, so the independent-sum variance is conservative.
                let se = 0.5 * ((p1 * (1.0 - p1) + p0 * (1.0 - p0)) / n).sqrt();
                let e = Estimate {
                    value,
                    low: (value - Z95 * se).max(0.0),
                    high: (value + Z95 * se).min(1.0),
                    std_err: se,
                };
                rows.push(est(s.level, s.layer, Metric::MlError, e));
            }
        }
        (ModelKind::GridAnd | ModelKind::GridXor, Method::Exact) => {
            let (f1, f2) = grid_gates(model);
            for lv in grid_exact_distribution(&f1, &f2, delta, cfg.depth, budget.grid)?
                .iter()
                .skip(1)
            {
                let (k, l) = (lv.level, lv.level + 1);
                rows.push(exact(k, l, Metric::TvExact, lv.tv()));
                rows.push(exact(k, l, Metric::MlError, lv.ml_error()));
                rows.push(exact(k, l, Metric::MiBits, lv.mutual_information()));
            }
        }
        (ModelKind::GridAnd | ModelKind::GridXor, Method::Mc) => {
            let (f1, f2) = grid_gates(model);
            for e in grid_mc_tv_estimate(&f1, &f2, delta, cfg.depth, trials, seed)?
                .iter()
                .skip(1)
            {
                let half = Z95 * e.sigma_bound;
                let ci = Estimate {
                    value: e.plug_in,
                    low: (e.plug_in - half).max(0.0),
                    high: (e.plug_in + half).min(1.0),
                    std_err: e.sigma_bound,
                };
                rows.push(est(e.level, e.level + 1, Metric::TvMc, ci));
            }
        }
        (ModelKind::GridAnd, Method::Coupling) => {
            let b = coupling_tv_bound(delta, cfg.depth, trials, seed)?;
            for k in 1..=cfg.depth {
                rows.push(est(k, k + 1, Metric::CoalesceProb, b.at(k)));
            }
        }
        (ModelKind::GridXor, Method::Erasure) => {
            let e = erasure_mc_error_bound(cfg.depth, delta, trials, seed)?;
            rows.push(est(
                cfg.depth,
                cfg.depth + 1,
                Metric::ErasureFail,
                e.failure,
            ));
        }
        (ModelKind::Percolation, Method::Mc) => {
            // An edge carries its input exactly when the channel does not refresh it.
            let p = 1.0 - 2.0 * d;
            let s = survival_frequency(p, cfg.depth, trials, seed)?;
            rows.push(est(cfg.depth, cfg.depth + 1, Metric::Survival, s));
        }
        (ModelKind::Bounds, Method::Exact) => {
            for k in 1..=cfg.depth {
                let l = cfg.schedule.size(k);
                rows.push(exact(
                    k,
                    l,
                    Metric::BoundValue,
                    evans_schulman(l, delta, cfg.degree, k),
                ));
            }
        }
        (m, meth) => {
            return Err(Error::Config {
                line: 0,
                field: "method".into(),
                message: format!("{m} does not support method {meth}"),
            })
        }
    }
    Ok(rows)
}

/// Runs every δ of the configuration in order and returns sorted rows plus
/// the crossing summary. Budgets are checked before any computation.
pub fn run(cfg: &ExperimentConfig, budget: &Budget) -> Result<RunOutput> {
    cfg.validate()?;
    check_budget(cfg, budget)?;
    let deltas = cfg.delta.values();
    let mut rows = Vec::new();
    for &d in &deltas {
        rows.extend(rows_for_delta(cfg, budget, d)?);
    }
    sort_rows(&mut rows);
    let metric = crossing_metric(cfg.model, cfg.method);
    let level = report_level(cfg);
    let crossing = metric.and_then(|m| {
        let at_level: Vec<(f64, f64)> = deltas
            .iter()
            .filter_map(|&d| {
                rows.iter()
                    .find(|r| r.delta == d && r.metric == m && r.k == level)
                    .map(|r| (d, r.value))
            })
            .collect();
        let i = at_level.iter().position(|&(_, v)| v < cfg.cutoff)?;
        Some(Crossing {
            above: i.checked_sub(1).map(|j| at_level[j].0),
            below: at_level[i].0,
        })
    });
    let summary = Summary {
        model: cfg.model,
        method: cfg.method,
        metric,
        level,
        cutoff: cfg.cutoff,
        deltas: deltas.len(),
        rows: rows.len(),
        crossing,
    };
    Ok(RunOutput { rows, summary })
}
