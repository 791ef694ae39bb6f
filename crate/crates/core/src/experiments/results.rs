//! Result rows, their CSV form, and per-series data files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stats::Estimate;

use super::config::{Method, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    TvExact,
    TvMc,
    MlError,
    MiBits,
    CoalesceProb,
    ErasureFail,
    BoundValue,
    /// Root cluster reaches the final level (percolation model).
    Survival,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::TvExact => "tv_exact",
            Metric::TvMc => "tv_mc",
            Metric::MlError => "ml_error",
            Metric::MiBits => "mi_bits",
            Metric::CoalesceProb => "coalesce_prob",
            Metric::ErasureFail => "erasure_fail",
            Metric::BoundValue => "bound_value",
            Metric::Survival => "survival",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub model: ModelKind,
    pub method: Method,
    pub delta: f64,
    pub k: usize,
    pub l_k: usize,
    pub metric: Metric,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Zero for exact rows.
    pub trials: u64,
}

impl ResultRow {
    /// An exact value: both CI endpoints equal the value, no trials.
    #[allow(clippy::too_many_arguments)]
    pub fn exact(
        model: ModelKind,
        method: Method,
        delta: f64,
        k: usize,
        l_k: usize,
        metric: Metric,
        value: f64,
        seed: u64,
    ) -> Self {
        Self {
            model,
            method,
            delta,
            k,
            l_k,
            metric,
            value,
            ci_low: value,
            ci_high: value,
            seed,
            trials: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn estimate(
        model: ModelKind,
        method: Method,
        delta: f64,
        k: usize,
        l_k: usize,
        metric: Metric,
        est: Estimate,
        seed: u64,
        trials: u64,
    ) -> Self {
        Self {
            model,
            method,
            delta,
            k,
            l_k,
            metric,
            value: est.value,
            ci_low: est.low.min(est.value),
            ci_high: est.high.max(est.value),
            seed,
            trials,
        }
    }

    fn sort_key(&self) -> (ModelKind, u64, usize, Metric, Method) {
        // δ ∈ (0, ½) is positive, so its bit pattern orders like the value.
        (
            self.model,
            self.delta.to_bits(),
            self.k,
            self.metric,
            self.method,
        )
    }
}

/// Orders rows by (model, δ, k, metric), then method.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by_key(ResultRow::sort_key);
}

pub const CSV_HEADER: [&str; 11] = [
    "model", "method", "delta", "k", "l_k", "metric", "value", "ci_low", "ci_high", "seed",
    "trials",
];

/// UTF-8 CSV with a header row and LF line endings. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.method.to_string(),
            r.delta.to_string(),
            r.k.to_string(),
            r.l_k.to_string(),
            r.metric.to_string(),
            r.value.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.seed.to_string(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Reads rows back from [`write_csv`] output.
pub fn read_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |line: usize, field: &str, message: String| Error::Config {
        line,
        field: field.to_string(),
        message,
    };
    let header = r
        .headers()
        .map_err(|e| bad(1, "header", e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(
            1,
            "header",
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let metric_of = |s: &str| {
        [
            Metric::TvExact,
            Metric::TvMc,
            Metric::MlError,
            Metric::MiBits,
            Metric::CoalesceProb,
            Metric::ErasureFail,
            Metric::BoundValue,
            Metric::Survival,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown metric {s:?}"))
    };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, "", e.to_string()))?;
        let field = |j: usize| -> std::result::Result<&str, Error> {
            rec.get(j)
                .ok_or_else(|| bad(line, CSV_HEADER[j], "missing".into()))
        };
        let parse_f = |j: usize| -> Result<f64> {
            field(j)?
                .parse()
                .map_err(|e| bad(line, CSV_HEADER[j], format!("{e}")))
        };
        let parse_u = |j: usize| -> Result<u64> {
            field(j)?
                .parse()
                .map_err(|e| bad(line, CSV_HEADER[j], format!("{e}")))
        };
        rows.push(ResultRow {
            model: field(0)?.parse().map_err(|e| bad(line, "model", e))?,
            method: field(1)?.parse().map_err(|e| bad(line, "method", e))?,
            delta: parse_f(2)?,
            k: parse_u(3)? as usize,
            l_k: parse_u(4)? as usize,
            metric: metric_of(field(5)?).map_err(|e| bad(line, "metric", e))?,
            value: parse_f(6)?,
            ci_low: parse_f(7)?,
            ci_high: parse_f(8)?,
            seed: parse_u(9)?,
            trials: parse_u(10)?,
        });
    }
    Ok(rows)
}

/// Writes one whitespace-separated data file per curve into `dir`:
/// value against k for each (model, method, metric, δ), and, when several δ
/// share a metric, value against δ at the deepest level present for all of them.
pub fn write_series(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    type Key = (ModelKind, Method, Metric);
    let mut by_delta: BTreeMap<(Key, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_delta
            .entry(((r.model, r.method, r.metric), r.delta.to_bits()))
            .or_default()
            .push(r);
    }
    let mut written = Vec::new();
    let mut by_metric: BTreeMap<Key, Vec<(f64, &ResultRow)>> = BTreeMap::new();
    for (((model, method, metric), dbits), mut pts) in by_delta {
        pts.sort_by_key(|r| r.k);
        let delta = f64::from_bits(dbits);
        let path = dir.join(format!("{model}.{method}.{metric}.delta_{delta}.dat"));
        let mut s = String::from("# k value ci_low ci_high\n");
        for r in &pts {
            s.push_str(&format!("{} {} {} {}\n", r.k, r.value, r.ci_low, r.ci_high));
        }
        fs::write(&path, s)?;
        written.push(path);
        if let Some(last) = pts.last() {
            by_metric
                .entry((model, method, metric))
                .or_default()
                .push((delta, last));
        }
    }
    for ((model, method, metric), pts) in by_metric {
        if pts.len() < 2 {
            continue;
        }
        let k = pts.iter().map(|(_, r)| r.k).min().expect("nonempty");
        let path = dir.join(format!("{model}.{method}.{metric}.vs_delta.dat"));
        let mut s = format!("# delta value ci_low ci_high (deepest level per delta, min {k})\n");
        for (d, r) in &pts {
            s.push_str(&format!("{d} {} {} {}\n", r.value, r.ci_low, r.ci_high));
        }
        fs::write(&path, s)?;
        written.push(path);
    }
    Ok(written)
}
