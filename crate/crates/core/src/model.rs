//! Channels, gates, layer schedules, random DAG sampling and forward simulation.
//!
//! Level words and gate inputs share one convention: input slot `i` is bit `i`
//! of the word fed to a gate's truth table.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{tags, SeedPath, StreamRng};

/// Crossover probability of a binary symmetric channel, strictly inside (0, 1/2).
///
/// `noiseless()` is the single escape hatch to δ = 0, used by test-mode runs.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct CrossoverProb(f64);

impl CrossoverProb {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta < 0.5 {
            Ok(Self(delta))
        } else {
            Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                range: "(0, 1/2)",
            })
        }
    }

    pub const fn noiseless() -> Self {
        Self(0.0)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_noiseless(self) -> bool {
        self.0 == 0.0
    }
}

impl fmt::Display for CrossoverProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// σ⋆δ: probability of a one after passing a Bernoulli(σ) bit through BSC(δ).
#[inline]
pub fn convolve(sigma: f64, delta: CrossoverProb) -> f64 {
    conv(sigma, delta.0)
}

#[inline]
pub(crate) fn conv(sigma: f64, delta: f64) -> f64 {
    sigma * (1.0 - delta) + delta * (1.0 - sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Majority3,
    And,
    Or,
    Xor,
    Nand,
    Identity,
    Custom,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::Majority3 => "MAJ3",
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Xor => "XOR",
            GateKind::Nand => "NAND",
            GateKind::Identity => "IDENTITY",
            GateKind::Custom => "CUSTOM",
        };
        f.write_str(s)
    }
}

/// Boolean function of `arity` inputs stored as a truth table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    arity: usize,
    table: u64,
    kind: GateKind,
}

impl Gate {
    pub const MAX_ARITY: usize = 6;

    fn from_fn(kind: GateKind, arity: usize, f: impl Fn(u32) -> bool) -> Self {
        assert!(
            (1..=Self::MAX_ARITY).contains(&arity),
            "arity {arity} unsupported"
        );
        let mut table = 0u64;
        for w in 0..(1u32 << arity) {
            if f(w) {
                table |= 1 << w;
            }
        }
        Self { arity, table, kind }
    }

    pub fn majority3() -> Self {
        Self::from_fn(GateKind::Majority3, 3, |w| w.count_ones() >= 2)
    }

    pub fn and(arity: usize) -> Self {
        Self::from_fn(GateKind::And, arity, move |w| w == (1 << arity) - 1)
    }

    pub fn or(arity: usize) -> Self {
        Self::from_fn(GateKind::Or, arity, |w| w != 0)
    }

    pub fn xor(arity: usize) -> Self {
        Self::from_fn(GateKind::Xor, arity, |w| w.count_ones() % 2 == 1)
    }

    pub fn nand(arity: usize) -> Self {
        Self::from_fn(GateKind::Nand, arity, move |w| w != (1 << arity) - 1)
    }

    pub fn identity() -> Self {
        Self::from_fn(GateKind::Identity, 1, |w| w == 1)
    }

    /// Arbitrary table; bit `w` of `table` is the output on input word `w`.
    pub fn custom(arity: usize, table: u64) -> Result<Self> {
        if !(1..=Self::MAX_ARITY).contains(&arity) {
            return Err(Error::invalid(format!(
                "gate arity {arity} outside 1..={}",
                Self::MAX_ARITY
            )));
        }
        let width = 1u32 << arity;
        if width < 64 && table >> width != 0 {
            return Err(Error::invalid(format!(
                "truth table {table:#x} has bits beyond 2^{arity} entries"
            )));
        }
        Ok(Self {
            arity,
            table,
            kind: GateKind::Custom,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> u64 {
        self.table
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    #[inline]
    pub fn eval(&self, word: u32) -> bool {
        debug_assert!(word < (1 << self.arity));
        (self.table >> word) & 1 == 1
    }

    pub fn eval_bits(&self, bits: &[bool]) -> bool {
        assert_eq!(bits.len(), self.arity);
        let word = bits
            .iter()
            .enumerate()
            .fold(0u32, |w, (i, &b)| w | (u32::from(b) << i));
        self.eval(word)
    }

    /// True iff raising any input never lowers the output.
    pub fn is_monotone(&self) -> bool {
        let n = 1u32 << self.arity;
        (0..n).all(|w| {
            (0..self.arity).all(|i| {
                let up = w | (1 << i);
                !self.eval(w) || self.eval(up)
            })
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GateKind::Custom => write!(f, "CUSTOM{}:{:#x}", self.arity, self.table),
            GateKind::Majority3 | GateKind::Identity => write!(f, "{}", self.kind),
            k => write!(f, "{k}{}", self.arity),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let split = |prefix: &str| -> Option<usize> { up.strip_prefix(prefix)?.parse().ok() };
        if up == "MAJ3" || up == "MAJ" {
            return Ok(Self::majority3());
        }
        if up == "IDENTITY" || up == "ID" {
            return Ok(Self::identity());
        }
        if let Some(rest) = up.strip_prefix("CUSTOM") {
            let (a, t) = rest
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("bad custom gate `{s}`")))?;
            let arity = a
                .parse()
                .map_err(|_| Error::invalid(format!("bad arity in `{s}`")))?;
            let t = t.trim_start_matches("0X");
            let table = u64::from_str_radix(t, 16)
                .map_err(|_| Error::invalid(format!("bad truth table in `{s}`")))?;
            return Self::custom(arity, table);
        }
        let arity_ok = |a: usize| (1..=Self::MAX_ARITY).contains(&a);
        for (prefix, ctor) in [
            ("NAND", Self::nand as fn(usize) -> Self),
            ("AND", Self::and),
            ("XOR", Self::xor),
            ("OR", Self::or),
        ] {
            if let Some(a) = split(prefix) {
                if arity_ok(a) {
                    return Ok(ctor(a));
                }
            }
        }
        Err(Error::invalid(format!("unknown gate `{s}`")))
    }
}

/// Σ over words w with gate(w)=1 of p^|w| (1−p)^(d−|w|).
pub fn gate_output_prob(gate: &Gate, p: f64) -> f64 {
    let d = gate.arity as i32;
    let mut by_weight = [0u32; Gate::MAX_ARITY + 1];
    for w in 0..(1u32 << d) {
        if gate.eval(w) {
            by_weight[w.count_ones() as usize] += 1;
        }
    }
    let q = 1.0 - p;
    by_weight
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(h, &c)| f64::from(c) * p.powi(h as i32) * q.powi(d - h as i32))
        .sum()
}

/// Number of nodes per level. Level 0 always holds the single root.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSchedule {
    Constant(usize),
    /// L_k = k + 1.
    Linear,
    /// L_k = ⌈c·ln(k+2)⌉.
    Logarithmic(f64),
    /// L_1, L_2, ... with the last entry repeated beyond the list.
    Explicit(Vec<usize>),
}

impl LayerSchedule {
    pub fn size(&self, k: usize) -> usize {
        if k == 0 {
            return 1;
        }
        let l = match self {
            LayerSchedule::Constant(c) => *c,
            LayerSchedule::Linear => k + 1,
            LayerSchedule::Logarithmic(c) => (c * ((k + 2) as f64).ln()).ceil() as usize,
            LayerSchedule::Explicit(v) => v.get(k - 1).or(v.last()).copied().unwrap_or(1),
        };
        l.max(1)
    }

    /// Sizes for levels 0..=depth.
    pub fn sizes(&self, depth: usize) -> Vec<usize> {
        (0..=depth).map(|k| self.size(k)).collect()
    }

    pub fn max_size(&self, depth: usize) -> usize {
        (0..=depth).map(|k| self.size(k)).max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LayerSchedule::Constant(0) => Err(Error::invalid("constant layer size must be ≥ 1")),
            LayerSchedule::Logarithmic(c) if !(c.is_finite() && *c > 0.0) => Err(Error::invalid(
                format!("log schedule coefficient {c} must be > 0"),
            )),
            LayerSchedule::Explicit(v) if v.is_empty() || v.contains(&0) => {
                Err(Error::invalid("explicit schedule needs nonempty sizes ≥ 1"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LayerSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSchedule::Constant(c) => write!(f, "const:{c}"),
            LayerSchedule::Linear => f.write_str("linear"),
            LayerSchedule::Logarithmic(c) => write!(f, "log:{c}"),
            LayerSchedule::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for LayerSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("bad schedule `{s}`"));
        let sched = if s == "linear" {
            LayerSchedule::Linear
        } else if let Some(c) = s.strip_prefix("const:") {
            LayerSchedule::Constant(c.trim().parse().map_err(|_| bad())?)
        } else if let Some(c) = s.strip_prefix("log:") {
            LayerSchedule::Logarithmic(c.trim().parse().map_err(|_| bad())?)
        } else if let Some(list) = s.strip_prefix("list:") {
            let v = list
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            LayerSchedule::Explicit(v)
        } else {
            return Err(bad());
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Which gate every node at level k applies.
#[derive(Clone, Debug, PartialEq)]
pub enum GateSchedule {
    Uniform(Gate),
    /// `odd` at odd levels, `even` at even levels.
    Alternating {
        odd: Gate,
        even: Gate,
    },
    /// Gate for level k at index k−1; the last entry repeats.
    PerLevel(Vec<Gate>),
}

impl GateSchedule {
    pub fn majority() -> Self {
        GateSchedule::Uniform(Gate::majority3())
    }

    /// OR at odd levels, AND at even levels, both of arity 2.
    pub fn and_or() -> Self {
        GateSchedule::Alternating {
            odd: Gate::or(2),
            even: Gate::and(2),
        }
    }

    pub fn gate_at(&self, k: usize) -> Gate {
        debug_assert!(k >= 1);
        match self {
            GateSchedule::Uniform(g) => *g,
            GateSchedule::Alternating { odd, even } => {
                if k % 2 == 1 {
                    *odd
                } else {
                    *even
                }
            }
            GateSchedule::PerLevel(v) => *v.get(k - 1).or(v.last()).expect("nonempty gate list"),
        }
    }

    /// Errors unless every level in 1..=depth has a gate of arity `d`.
    pub fn check_arity(&self, d: usize, depth: usize) -> Result<()> {
        if let GateSchedule::PerLevel(v) = self {
            if v.is_empty() {
                return Err(Error::invalid("empty per-level gate list"));
            }
        }
        let distinct = match self {
            GateSchedule::PerLevel(v) => v.len().min(depth),
            GateSchedule::Alternating { .. } => depth.min(2),
            GateSchedule::Uniform(_) => depth.min(1),
        };
        for k in 1..=distinct {
            let found = self.gate_at(k).arity();
            if found != d {
                return Err(Error::ArityMismatch {
                    level: k,
                    expected: d,
                    found,
                });
            }
        }
        Ok(())
    }
}

/// Finite truncation of the random DAG: each node's d parents in the level above.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagRealization {
    d: usize,
    sizes: Vec<usize>,
    /// `parents[k-1][j*d + i]` is slot i of node j at level k.
    parents: Vec<Vec<u32>>,
    seed: u64,
}

impl DagRealization {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Parent indices of node j at level k ≥ 1.
    pub fn parents(&self, k: usize, j: usize) -> &[u32] {
        &self.parents[k - 1][j * self.d..(j + 1) * self.d]
    }

    pub fn level_parents(&self, k: usize) -> &[u32] {
        &self.parents[k - 1]
    }
}

/// Parents drawn i.i.d. uniformly, with replacement, per node and level.
pub fn sample_random_dag(
    seed: u64,
    d: usize,
    schedule: &LayerSchedule,
    depth: usize,
) -> Result<DagRealization> {
    if depth == 0 {
        return Err(Error::invalid("depth must be ≥ 1"));
    }
    if d == 0 {
        return Err(Error::invalid("in-degree d must be ≥ 1"));
    }
    schedule.validate()?;
    let sizes = schedule.sizes(depth);
    let root = SeedPath::new(seed);
    let parents = (1..=depth)
        .map(|k| {
            let above = sizes[k - 1] as u32;
            let mut rng = root.descend(&[tags::DAG, k as u64]).rng();
            (0..sizes[k] * d)
                .map(|_| rng.random_range(0..above))
                .collect()
        })
        .collect();
    Ok(DagRealization {
        d,
        sizes,
        parents,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BscDraw {
    pub output: bool,
    /// The channel discarded its input and emitted a fair coin.
    pub fresh: bool,
}

/// One BSC(δ) use as copy-with-probability 1−2δ or fresh-fair-bit otherwise.
/// Consumes exactly one uniform regardless of `input`.
#[inline]
pub fn bsc_draw<R: Rng + ?Sized>(input: bool, delta: CrossoverProb, rng: &mut R) -> BscDraw {
    let u: f64 = rng.random();
    if u < 2.0 * delta.0 {
        BscDraw {
            output: u < delta.0,
            fresh: true,
        }
    } else {
        BscDraw {
            output: input,
            fresh: false,
        }
    }
}

/// `bsc_draw` on the first draw of the stream at `path`.
pub fn bsc_sample(input: bool, delta: CrossoverProb, path: &SeedPath) -> BscDraw {
    bsc_draw(input, delta, &mut path.rng())
}

/// One simulated broadcast over a fixed DAG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    levels: Vec<Vec<bool>>,
    /// `fresh[k-1][j*d + i]` flags the channel on slot i of node j at level k.
    fresh: Vec<Vec<bool>>,
}

impl Trajectory {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[bool] {
        &self.levels[k]
    }

    pub fn ones(&self, k: usize) -> usize {
        self.levels[k].iter().filter(|&&b| b).count()
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.ones(k) as f64 / self.levels[k].len() as f64
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.levels.len()).map(|k| self.sigma(k)).collect()
    }

    pub fn fresh(&self, k: usize) -> &[bool] {
        &self.fresh[k - 1]
    }
}

/// Computes level k of the broadcast from level k−1.
#[inline]
pub(crate) fn step_level<R: Rng + ?Sized>(
    parents: &[u32],
    d: usize,
    gate: &Gate,
    delta: CrossoverProb,
    prev: &[bool],
    out: &mut Vec<bool>,
    mut fresh: Option<&mut Vec<bool>>,
    rng: &mut R,
) {
    out.clear();
    for node in parents.chunks_exact(d) {
        let mut word = 0u32;
        for (i, &p) in node.iter().enumerate() {
            let draw = bsc_draw(prev[p as usize], delta, rng);
            word |= u32::from(draw.output) << i;
            if let Some(f) = fresh.as_deref_mut() {
                f.push(draw.fresh);
            }
        }
        out.push(gate.eval(word));
    }
}

/// Forward simulation; noise for level k comes from the stream (seed, PROPAGATE, k).
pub fn propagate(
    dag: &DagRealization,
    gates: &GateSchedule,
    delta: CrossoverProb,
    root: bool,
    seed: u64,
) -> Result<Trajectory> {
    gates.check_arity(dag.d, dag.depth())?;
    let base = SeedPath::new(seed);
    let mut levels = Vec::with_capacity(dag.depth() + 1);
    let mut fresh = Vec::with_capacity(dag.depth());
    levels.push(vec![root]);
    for k in 1..=dag.depth() {
        let mut rng = base.descend(&[tags::PROPAGATE, k as u64]).rng();
        let mut out = Vec::with_capacity(dag.size(k));
        let mut fl = Vec::with_capacity(dag.size(k) * dag.d);
        step_level(
            dag.level_parents(k),
            dag.d,
            &gates.gate_at(k),
            delta,
            &levels[k - 1],
            &mut out,
            Some(&mut fl),
            &mut rng,
        );
        levels.push(out);
        fresh.push(fl);
    }
    Ok(Trajectory { levels, fresh })
}

/// Number of ones at the deepest level, drawing all noise from one stream.
/// Arity must already be checked by the caller.
pub(crate) fn propagate_final_ones(
    dag: &DagRealization,
    gates: &GateSchedule,
    delta: CrossoverProb,
    root: bool,
    rng: &mut StreamRng,
    bufs: &mut (Vec<bool>, Vec<bool>),
) -> usize {
    let (prev, next) = bufs;
    prev.clear();
    prev.push(root);
    for k in 1..=dag.depth() {
        step_level(
            dag.level_parents(k),
            dag.d,
            &gates.gate_at(k),
            delta,
            prev,
            next,
            None,
            rng,
        );
        std::mem::swap(prev, next);
    }
    prev.iter().filter(|&&b| b).count()
}
