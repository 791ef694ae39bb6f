use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nbl::experiments::{
    run, threshold_bisect_with, write_csv, write_series, Budget, ExperimentConfig, Method,
    ModelKind, Overrides,
};
use nbl::model::CrossoverProb;
use nbl::percolation::{estimate_alpha, estimate_delta_perc};
use nbl::sigma::{fixed_points, ChainModel, ExactBudget};
use nbl::xorcode::{build_hk, check_omega};
use nbl::Error;

#[derive(Parser, Debug)]
#[command(
    name = "nbl",
    version,
    about = "Noisy one-bit broadcasting experiments"
)]
struct Cli {
    /// Master seed; falls back to $NBL_SEED, then 0.
    #[arg(long, global = true, env = "NBL_SEED")]
    seed: Option<u64>,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest layer an exact σ-chain computation may hold.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Also write one data file per curve into this directory.
    #[arg(long, global = true)]
    series: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DagModel {
    Maj3,
    Andor2,
}

impl DagModel {
    fn chain(self) -> ChainModel {
        match self {
            DagModel::Maj3 => ChainModel::Majority3,
            DagModel::Andor2 => ChainModel::AndOr2,
        }
    }

    fn kind(self) -> ModelKind {
        match self {
            DagModel::Maj3 => ModelKind::RandomDagMaj3,
            DagModel::Andor2 => ModelKind::RandomDagAndOr2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GridGate {
    And,
    Xor,
}

#[derive(Args, Debug, Clone)]
struct DeltaArgs {
    /// Single noise level in (0, 1/2).
    #[arg(long, conflicts_with = "sweep")]
    delta: Option<String>,
    /// start:stop:count, evenly spaced and inclusive.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    depth: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fixed points, stability and Lipschitz constant of the σ-chain map.
    FixedPoints {
        #[arg(long, value_enum)]
        model: DagModel,
        #[arg(long)]
        delta: f64,
    },
    /// Exact σ-chain laws: TV, ML error and mutual information per level.
    ExactChain {
        #[arg(long, value_enum)]
        model: DagModel,
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value = "const:64")]
        schedule: String,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Coupled Monte Carlo on the σ-chain.
    McChain {
        #[arg(long, value_enum)]
        model: DagModel,
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value = "const:64")]
        schedule: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Exact level-word laws on the 2D grid.
    GridExact {
        #[arg(long, value_enum)]
        gate: GridGate,
        #[command(flatten)]
        delta: DeltaArgs,
    },
    /// Coalescence of the root-coupled AND grid.
    GridAndCouple {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Erasure failure frequency of the XOR grid at level `depth`.
    GridXor {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Write H_depth in index form (one row per line) to this file.
        #[arg(long)]
        export_hk: Option<PathBuf>,
    },
    /// Oriented bond percolation with edges open with probability 1 − 2δ.
    Percolation {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Also bracket the critical open probability by bisection.
        #[arg(long)]
        critical: bool,
        /// Also estimate the edge speed of surviving clusters.
        #[arg(long)]
        alpha: bool,
    },
    /// Evans–Schulman information bound per level.
    Bounds {
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value = "const:64")]
        schedule: String,
    },
    /// Run a key = value configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override a field, e.g. --set depth=50. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Bisect δ until the level-depth exact TV crosses the cutoff.
    Bisect {
        #[arg(long, value_enum)]
        model: DagModel,
        #[arg(long, default_value = "const:128")]
        schedule: String,
        #[arg(long, default_value_t = 150)]
        depth: usize,
        #[arg(long, default_value_t = 0.01)]
        cutoff: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

fn cli_error(field: &str, message: String) -> Error {
    Error::Config {
        line: 0,
        field: field.to_string(),
        message,
    }
}

fn set(o: &mut Overrides, key: &str, value: &str) -> Result<(), Error> {
    o.set(key, value).map_err(|m| cli_error(key, m))
}

fn base(model: ModelKind, method: Method, d: &DeltaArgs, seed: u64) -> Result<Overrides, Error> {
    let mut o = Overrides::default();
    set(&mut o, "model", model.name())?;
    set(&mut o, "method", &method.to_string())?;
    match (&d.delta, &d.sweep) {
        (Some(x), None) => set(&mut o, "delta", x)?,
        (None, Some(s)) => set(&mut o, "sweep", s)?,
        _ => {
            return Err(cli_error(
                "delta",
                "give exactly one of --delta or --sweep".into(),
            ))
        }
    }
    set(&mut o, "depth", &d.depth.to_string())?;
    set(&mut o, "seed", &seed.to_string())?;
    Ok(o)
}

fn config_for(cmd: &Command, seed: u64) -> Result<Option<ExperimentConfig>, Error> {
    let o = match cmd {
        Command::ExactChain {
            model,
            delta,
            schedule,
            cutoff,
        } => {
            let mut o = base(model.kind(), Method::Exact, delta, seed)?;
            set(&mut o, "schedule", schedule)?;
            if let Some(c) = cutoff {
                set(&mut o, "cutoff", &c.to_string())?;
            }
            o
        }
        Command::McChain {
            model,
            delta,
            schedule,
            trials,
        } => {
            let mut o = base(model.kind(), Method::Mc, delta, seed)?;
            set(&mut o, "schedule", schedule)?;
            set(&mut o, "trials", &trials.to_string())?;
            o
        }
        Command::GridExact { gate, delta } => {
            let kind = match gate {
                GridGate::And => ModelKind::GridAnd,
                GridGate::Xor => ModelKind::GridXor,
            };
            base(kind, Method::Exact, delta, seed)?
        }
        Command::GridAndCouple { delta, trials } => {
            let mut o = base(ModelKind::GridAnd, Method::Coupling, delta, seed)?;
            set(&mut o, "trials", &trials.to_string())?;
            o
        }
        Command::GridXor { delta, trials, .. } => {
            let mut o = base(ModelKind::GridXor, Method::Erasure, delta, seed)?;
            set(&mut o, "trials", &trials.to_string())?;
            o
        }
        Command::Percolation { delta, trials, .. } => {
            let mut o = base(ModelKind::Percolation, Method::Mc, delta, seed)?;
            set(&mut o, "trials", &trials.to_string())?;
            o
        }
        Command::Bounds {
            delta,
            degree,
            schedule,
        } => {
            let mut o = base(ModelKind::Bounds, Method::Exact, delta, seed)?;
            set(&mut o, "degree", &degree.to_string())?;
            set(&mut o, "schedule", schedule)?;
            o
        }
        Command::Sweep { config, sets } => {
            let text = fs::read_to_string(config)?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if !sets.is_empty() {
                let mut merged = cfg.to_text();
                for s in sets {
                    let (k, v) = s.split_once('=').ok_or_else(|| {
                        cli_error("set", format!("expected KEY=VALUE, found {s:?}"))
                    })?;
                    let k = k.trim();
                    // Drop the file's line for this key (and its delta/sweep partner).
                    let drop: &[&str] = if k == "delta" || k == "sweep" {
                        &["delta", "sweep"]
                    } else {
                        &[k]
                    };
                    merged = merged
                        .lines()
                        .filter(|l| {
                            !drop
                                .iter()
                                .any(|d| l.split('=').next().map(str::trim) == Some(*d))
                        })
                        .map(|l| format!("{l}\n"))
                        .collect();
                    merged.push_str(&format!("{k} = {}\n", v.trim()));
                }
                cfg = ExperimentConfig::parse(&merged)?;
            }
            return Ok(Some(cfg));
        }
        Command::FixedPoints { .. } | Command::Bisect { .. } => return Ok(None),
    };
    Ok(Some(o.build()?))
}

fn budget(cli: &Cli) -> Budget {
    let mut b = Budget::default();
    if let Some(n) = cli.budget {
        b.exact = ExactBudget { max_layer: n };
    }
    b
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let seed = cli.seed.unwrap_or(0);
    let stderr = &mut io::stderr();
    match &cli.command {
        Command::FixedPoints { model, delta } => {
            let r = fixed_points(&model.chain(), CrossoverProb::new(*delta)?)?;
            let mut out = String::from("value,stable\n");
            for p in &r.points {
                out.push_str(&format!("{},{}\n", p.value, p.stable));
            }
            emit(cli, out.as_bytes())?;
            writeln!(
                stderr,
                "lipschitz = {}{}",
                r.lipschitz,
                if r.degenerate { " (degenerate)" } else { "" }
            )?;
            return Ok(());
        }
        Command::Bisect {
            model,
            schedule,
            depth,
            cutoff,
            tol,
        } => {
            let schedule = schedule.parse()?;
            let b = threshold_bisect_with(
                &model.chain(),
                &schedule,
                *depth,
                *cutoff,
                *tol,
                budget(cli).exact,
            )?;
            let mut out = String::from("delta,tv\n");
            for (d, tv) in &b.evaluations {
                out.push_str(&format!("{d},{tv}\n"));
            }
            emit(cli, out.as_bytes())?;
            writeln!(
                stderr,
                "bracket [{}, {}] (width {}) at k={}, cutoff {}",
                b.low,
                b.high,
                b.width(),
                b.depth,
                b.cutoff
            )?;
            return Ok(());
        }
        _ => {}
    }
    let mut cfg = config_for(&cli.command, seed)?.expect("run-style command");
    if let Some(p) = &cli.out {
        cfg.output = Some(p.clone());
    }
    let out = run(&cfg, &budget(cli))?;
    let mut buf = Vec::new();
    write_csv(&out.rows, &mut buf)?;
    match &cfg.output {
        Some(p) => fs::write(p, &buf)?,
        None => io::stdout().write_all(&buf)?,
    }
    if let Some(dir) = &cli.series {
        let files = write_series(&out.rows, dir)?;
        writeln!(
            stderr,
            "wrote {} series files to {}",
            files.len(),
            dir.display()
        )?;
    }
    writeln!(stderr, "{}", out.summary)?;
    extras(cli, &cfg, stderr)
}

/// Side reports that do not fit the row schema.
fn extras(cli: &Cli, cfg: &ExperimentConfig, stderr: &mut impl Write) -> Result<(), Error> {
    match &cli.command {
        Command::GridXor { export_hk, .. } => {
            if cfg.depth.is_power_of_two() {
                writeln!(
                    stderr,
                    "omega certificate at k={}: {}",
                    cfg.depth,
                    check_omega(cfg.depth)?
                )?;
            }
            if let Some(p) = export_hk {
                fs::write(p, build_hk(cfg.depth)?.matrix.to_index_text())?;
            }
        }
        Command::Percolation {
            critical,
            alpha,
            trials,
            ..
        } => {
            if *alpha {
                for d in cfg.delta.values() {
                    let a = estimate_alpha(1.0 - 2.0 * d, cfg.depth, *trials, cfg.seed)?;
                    match a.alpha {
                        Some(e) => writeln!(
                            stderr,
                            "δ={d}: alpha ≈ {} ± {} ({} of {} survived)",
                            e.value, e.std_err, a.survived, a.trials
                        )?,
                        None => writeln!(stderr, "δ={d}: no surviving cluster")?,
                    }
                }
            }
            if *critical {
                let b = estimate_delta_perc(*trials, cfg.depth, 0.5, 1e-3, cfg.seed)?;
                writeln!(
                    stderr,
                    "critical open probability in [{}, {}]: δ in [{}, {}]",
                    b.low,
                    b.high,
                    (1.0 - b.high) / 2.0,
                    (1.0 - b.low) / 2.0
                )?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn emit(cli: &Cli, bytes: &[u8]) -> Result<(), Error> {
    match &cli.out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
