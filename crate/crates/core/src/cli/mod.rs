//! Command-line entry point.
//!
//! Every run is fully determined by a flat JSON configuration (see
//! [`RunConfig`]) plus flags. Outputs go to `output.dir` together with
//! `config.json`, the normalised configuration, and `manifest.json`, which
//! records the configuration hash and a digest of every output file. Running
//! the same subcommand with `--config <dir>/config.json` reproduces the
//! outputs byte for byte, independently of the thread count.
//!
//! Exit codes: `0` success, `1` configuration or domain error, `2` an
//! optimizer did not converge (outputs are still written).

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use commands::Outcome;
pub use config::{load_config, load_config_with, BbarMethod, ControlKind, OutputFormat, RunConfig, TargetKind};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mvfbm", version, about = "Multi-scale McKean-Vlasov SDEs driven by fractional Brownian motion")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// JSON configuration with flat dotted keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Sets any configuration key; the value is parsed as JSON when possible.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads; falls back to MVFBM_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    family: Option<String>,
    /// Hurst parameter.
    #[arg(long = "H", global = true)]
    hurst: Option<f64>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// Grid steps.
    #[arg(long = "N", global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    particles: Option<usize>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Comma-separated decreasing δ values.
    #[arg(long, global = true, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
    /// Exit radius.
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvergenceKind {
    Increment,
    Averaging,
    Controlled,
    Auxiliary,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One exact fBm path on the grid.
    SampleFbm,
    /// Coupled (or controlled, with a control) slow–fast particle system.
    Simulate,
    /// Averaged equation at scale `scales.delta`.
    Average,
    /// Deterministic limit equation.
    LimitOde,
    /// Skeleton path of the configured control.
    Skeleton,
    /// Rate function of a path or of an exit event.
    Rate {
        /// `from-khat FILE`, `path FILE` or `event`.
        #[arg(long, num_args = 1..=2, value_names = ["KIND", "FILE"])]
        target: Option<Vec<String>>,
    },
    /// Monte Carlo exit probabilities against the rate along a δ ladder.
    LdpVerify,
    /// Scaling and convergence experiments.
    Convergence {
        #[arg(value_enum)]
        kind: ConvergenceKind,
    },
    /// Statistical probes of the structural assumptions.
    ProbeAssumptions,
}

impl Command {
    fn words(&self) -> Vec<String> {
        let w: &[&str] = match self {
            Command::SampleFbm => &["sample-fbm"],
            Command::Simulate => &["simulate"],
            Command::Average => &["average"],
            Command::LimitOde => &["limit-ode"],
            Command::Skeleton => &["skeleton"],
            Command::Rate { .. } => &["rate"],
            Command::LdpVerify => &["ldp-verify"],
            Command::Convergence { kind } => {
                return vec!["convergence".into(), kind.to_possible_value().expect("named").get_name().into()]
            }
            Command::ProbeAssumptions => &["probe-assumptions"],
        };
        w.iter().map(|s| s.to_string()).collect()
    }
}

fn overrides(opts: &GlobalOpts, command: &Command) -> Result<Vec<(String, Value)>> {
    let mut o: Vec<(String, Value)> = Vec::new();
    for s in &opts.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        o.push((k.to_string(), v));
    }
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            o.push((k.to_string(), v));
        }
    };
    put("output.dir", opts.out.clone().map(Value::from));
    put("seed", opts.seed.map(Value::from));
    put("family.name", opts.family.clone().map(Value::from));
    put("hurst", opts.hurst.map(Value::from));
    put("grid.T", opts.horizon.map(Value::from));
    put("grid.N", opts.steps.map(Value::from));
    put("particles", opts.particles.map(Value::from));
    put("replicas", opts.replicas.map(Value::from));
    put("scales.delta", opts.delta.map(Value::from));
    put("scales.eps", opts.eps.map(Value::from));
    put("ladder.deltas", opts.ladder.clone().map(Value::from));
    put("r", opts.r.map(Value::from));
    put(
        "output.format",
        opts.format.map(|f| Value::from(match f {
            FormatArg::Csv => "csv",
            FormatArg::Binary => "binary",
        })),
    );
    if let Command::Rate { target: Some(t) } = command {
        put("target.kind", Some(Value::from(t[0].clone())));
        put("target.file", t.get(1).cloned().map(Value::from));
    }
    Ok(o)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("MVFBM_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|_| Error::Config(format!("MVFBM_THREADS must be an integer, got '{v}'")))
        }
        _ => Ok(None),
    }
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    config_hash: String,
    seed: u64,
    config_file: &'static str,
    config: &'a RunConfig,
    converged: bool,
    outputs: Vec<OutputEntry>,
}

fn write_outputs(cfg: &RunConfig, command: Vec<String>, outcome: &Outcome) -> Result<()> {
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for (name, bytes) in &outcome.files {
        std::fs::write(dir.join(name), bytes)?;
        outputs.push(OutputEntry { file: name.clone(), bytes: bytes.len(), sha256: config::hex(&Sha256::digest(bytes)) });
    }
    std::fs::write(dir.join("config.json"), cfg.to_json())?;
    let manifest = Manifest {
        tool: "mvfbm",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config_file: "config.json",
        config: cfg,
        converged: outcome.converged,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    let o = overrides(&cli.opts, &cli.command)?;
    let cfg = load_config_with(cli.opts.config.as_deref(), &o)?;
    let threads = thread_count(cli.opts.threads)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    let command = cli.command.words();
    let outcome = pool.install(|| commands::dispatch(&cli.command, &cfg))?;
    write_outputs(&cfg, command, &outcome)?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => {
            if code == EXIT_NOT_CONVERGED {
                eprintln!("warning: optimization did not converge; outputs written");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
