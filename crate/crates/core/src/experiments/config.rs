//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::LayerSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    RandomDagMaj3,
    RandomDagAndOr2,
    GridAnd,
    GridXor,
    Percolation,
    Bounds,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::RandomDagMaj3,
        ModelKind::RandomDagAndOr2,
        ModelKind::GridAnd,
        ModelKind::GridXor,
        ModelKind::Percolation,
        ModelKind::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::RandomDagMaj3 => "random-dag-maj3",
            ModelKind::RandomDagAndOr2 => "random-dag-andor2",
            ModelKind::GridAnd => "grid-and",
            ModelKind::GridXor => "grid-xor",
            ModelKind::Percolation => "percolation",
            ModelKind::Bounds => "bounds",
        }
    }

    pub fn methods(self) -> &'static [Method] {
        match self {
            ModelKind::RandomDagMaj3 | ModelKind::RandomDagAndOr2 => &[Method::Exact, Method::Mc],
            ModelKind::GridAnd => &[Method::Exact, Method::Mc, Method::Coupling],
            ModelKind::GridXor => &[Method::Exact, Method::Mc, Method::Erasure],
            ModelKind::Percolation => &[Method::Mc],
            ModelKind::Bounds => &[Method::Exact],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
                format!("unknown model {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Exact,
    Mc,
    /// Root-coupled AND grid: P(T > k).
    Coupling,
    /// Erasure view of the XOR grid.
    Erasure,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
            Method::Coupling => "coupling",
            Method::Erasure => "erasure",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" => Ok(Method::Mc),
            "coupling" => Ok(Method::Coupling),
            "erasure" => Ok(Method::Erasure),
            _ => Err(format!(
                "unknown method {s:?}; expected exact, mc, coupling or erasure"
            )),
        }
    }
}

/// A single δ or `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaSpec {
    Single(f64),
    Sweep { start: f64, stop: f64, count: usize },
}

impl DeltaSpec {
    /// Sweep points are rounded to 12 decimals so grids like 0.05, 0.075, …
    /// print as written.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            DeltaSpec::Single(d) => vec![d],
            DeltaSpec::Sweep {
                start, count: 1, ..
            } => vec![start],
            DeltaSpec::Sweep { start, stop, count } => (0..count)
                .map(|i| {
                    let x = start + (stop - start) * i as f64 / (count - 1) as f64;
                    (x * 1e12).round() / 1e12
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub method: Method,
    pub delta: DeltaSpec,
    pub depth: usize,
    /// Layer sizes for the random-DAG and bounds models.
    pub schedule: LayerSchedule,
    pub trials: u64,
    pub seed: u64,
    /// TV level below which the sweep summary reports a crossing.
    pub cutoff: f64,
    /// In-degree used by the bounds model.
    pub degree: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, delta: DeltaSpec, depth: usize) -> Self {
        Self {
            model,
            method: model.methods()[0],
            delta,
            depth,
            schedule: LayerSchedule::Constant(64),
            trials: 10_000,
            seed: 0,
            cutoff: 0.01,
            degree: 3,
            output: None,
        }
    }

    /// Serialized form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("model", self.model.to_string());
        put("method", self.method.to_string());
        match self.delta {
            DeltaSpec::Single(d) => put("delta", d.to_string()),
            DeltaSpec::Sweep { start, stop, count } => {
                put("sweep", format!("{start}:{stop}:{count}"))
            }
        }
        put("depth", self.depth.to_string());
        put("schedule", self.schedule.to_string());
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        put("cutoff", self.cutoff.to_string());
        put("degree", self.degree.to_string());
        if let Some(p) = &self.output {
            put("output", p.display().to_string());
        }
        s
    }

    /// Parses the flat format. `#` starts a comment; blank lines are ignored.
    /// Errors name the 1-based line and the field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    field: String::new(),
                    message: format!("expected key = value, found {line:?}"),
                });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if let Some((first, ..)) = entries.iter().find(|e| e.1 == k) {
                return Err(Error::Config {
                    line: line_no,
                    field: k,
                    message: format!("duplicate key, first set on line {first}"),
                });
            }
            entries.push((line_no, k, v));
        }
        let mut overrides = Overrides::default();
        for (line, k, v) in entries {
            overrides.set(&k, &v).map_err(|message| Error::Config {
                line,
                field: k.clone(),
                message,
            })?;
        }
        overrides.build()
    }

    /// Checks field ranges and the model/method pairing.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::Config {
            line: 0,
            field: field.to_string(),
            message,
        };
        if !self.model.methods().contains(&self.method) {
            return Err(bad(
                "method",
                format!("{} does not support method {}", self.model, self.method),
            ));
        }
        if let DeltaSpec::Sweep { start, stop, count } = self.delta {
            if count == 0 {
                return Err(bad("sweep", "count must be ≥ 1".into()));
            }
            if stop < start {
                return Err(bad("sweep", "stop must be ≥ start".into()));
            }
        }
        let field = match self.delta {
            DeltaSpec::Single(_) => "delta",
            DeltaSpec::Sweep { .. } => "sweep",
        };
        for d in self.delta.values() {
            if !(d > 0.0 && d < 0.5) {
                return Err(bad(field, format!("δ = {d} is outside (0, 1/2)")));
            }
        }
        if self.depth == 0 {
            return Err(bad("depth", "must be ≥ 1".into()));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be ≥ 1".into()));
        }
        if !(self.cutoff.is_finite() && self.cutoff >= 0.0) {
            return Err(bad("cutoff", "must be a finite number ≥ 0".into()));
        }
        if self.degree == 0 {
            return Err(bad("degree", "must be ≥ 1".into()));
        }
        self.schedule
            .validate()
            .map_err(|e| bad("schedule", e.to_string()))
    }
}

/// Field values collected while parsing, before defaults are applied.
#[derive(Default, Debug)]
pub struct Overrides {
    pub model: Option<ModelKind>,
    pub method: Option<Method>,
    pub delta: Option<DeltaSpec>,
    pub depth: Option<usize>,
    pub schedule: Option<LayerSchedule>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub cutoff: Option<f64>,
    pub degree: Option<usize>,
    pub output: Option<PathBuf>,
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("{v:?}: {e}"))
}

impl Overrides {
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "model" => self.model = Some(v.parse()?),
            "method" => self.method = Some(v.parse()?),
            "delta" => {
                if matches!(self.delta, Some(DeltaSpec::Sweep { .. })) {
                    return Err("delta and sweep are mutually exclusive".into());
                }
                self.delta = Some(DeltaSpec::Single(num(v)?));
            }
            "sweep" => {
                if matches!(self.delta, Some(DeltaSpec::Single(_))) {
                    return Err("delta and sweep are mutually exclusive".into());
                }
                let parts: Vec<&str> = v.split(':').map(str::trim).collect();
                let [a, b, c] = parts[..] else {
                    return Err(format!("expected start:stop:count, found {v:?}"));
                };
                self.delta = Some(DeltaSpec::Sweep {
                    start: num(a)?,
                    stop: num(b)?,
                    count: num(c)?,
                });
            }
            "depth" => self.depth = Some(num(v)?),
            "schedule" => self.schedule = Some(v.parse().map_err(|e: Error| e.to_string())?),
            "trials" => self.trials = Some(num(v)?),
            "seed" => self.seed = Some(num(v)?),
            "cutoff" => self.cutoff = Some(num(v)?),
            "degree" => self.degree = Some(num(v)?),
            "output" => self.output = Some(PathBuf::from(v)),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let missing = |field: &str| Error::Config {
            line: 0,
            field: field.to_string(),
            message: "required field is missing".into(),
        };
        let model = self.model.ok_or_else(|| missing("model"))?;
        let delta = self.delta.ok_or_else(|| missing("delta"))?;
        let depth = self.depth.ok_or_else(|| missing("depth"))?;
        let mut c = ExperimentConfig::new(model, delta, depth);
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(s) = self.schedule {
            c.schedule = s;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(x) = self.cutoff {
            c.cutoff = x;
        }
        if let Some(d) = self.degree {
            c.degree = d;
        }
        c.output = self.output;
        c.validate()?;
        Ok(c)
    }
}
