mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CoefficientSpec, DistanceChoice, KernelChoice, RunConfig};

/// Run outcome other than success.
#[derive(Debug)]
pub enum Failure {
    /// Malformed configuration or arguments.
    Usage(String),
    /// A numerical or I/O failure.
    Runtime(String),
}

impl From<quartic_heat::Error> for Failure {
    fn from(e: quartic_heat::Error) -> Self {
        use quartic_heat::Error as E;
        match e {
            E::Parameter(_)
            | E::Parse(_)
            | E::InvalidDomain(_)
            | E::InvalidField(_)
            | E::OutsideDomain(..)
            | E::GridMismatch(_)
            | E::Io(_)
            | E::Ellipticity { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "quartic-heat", version, about = "Heat kernel bounds for anisotropic fourth-order operators")]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shipped coefficient preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Nodes per axis.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbol, regime classification and theta.
    Report(ReportArgs),
    /// Residuals of the algebraic identities.
    AlgebraVerify(AlgebraArgs),
    /// Grid distance from a source point.
    Distance(DistanceArgs),
    /// Heat kernel slices.
    Kernel(KernelArgs),
    /// Verification of the Gaussian upper bound.
    Bound(BoundArgs),
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, value_delimiter = ',')]
    theta_scales: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct AlgebraArgs {
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// `x1,x2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    source: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<DistanceChoice>,
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Node indices `i,j`.
    #[arg(long, value_delimiter = ',')]
    source: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<KernelChoice>,
    /// Also write SVG heatmaps of log|G|.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// `x1,x2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    source: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<KernelChoice>,
}

fn pair<T: Copy>(v: &[T], flag: &str) -> Result<[T; 2], Failure> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(Failure::Usage(format!("--{flag} takes exactly two comma-separated values"))),
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.preset {
        cfg.coefficients = CoefficientSpec::Named { preset: p.clone() };
    }
    if let Some(n) = cli.n {
        cfg.domain.n1 = n;
        cfg.domain.n2 = n;
    }
    match &cli.command {
        Command::Report(a) => {
            if let Some(s) = &a.theta_scales {
                cfg.report.theta_scales = s.clone();
            }
        }
        Command::AlgebraVerify(a) => {
            if let Some(s) = a.samples {
                cfg.algebra.samples_per_regime = s;
            }
        }
        Command::Distance(a) => {
            if let Some(s) = &a.source {
                cfg.distance.source = pair(s, "source")?;
            }
            if let Some(m) = a.method {
                cfg.distance.method = m;
            }
            if let Some(o) = a.order {
                cfg.distance.order = o;
            }
        }
        Command::Kernel(a) => {
            if let Some(s) = &a.source {
                cfg.kernel.source = Some(pair(s, "source")?);
            }
            if let Some(t) = &a.times {
                cfg.kernel.times = t.clone();
            }
            if let Some(m) = a.method {
                cfg.kernel.method = m;
            }
            cfg.kernel.svg |= a.svg;
        }
        Command::Bound(a) => {
            if let Some(e) = a.epsilon {
                cfg.bound.epsilon = e;
            }
            if let Some(d) = a.delta {
                cfg.bound.delta = Some(d);
            }
            if let Some(t) = &a.times {
                cfg.bound.times = t.clone();
            }
            if let Some(s) = &a.source {
                cfg.bound.source = pair(s, "source")?;
            }
            if let Some(m) = a.method {
                cfg.bound.method = Some(m);
            }
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<commands::Outcome, Failure> {
    let cfg = resolve(cli)?;
    let base = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(|d| d.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut sink = output::Sink::new(&cfg.output_dir)?;
    sink.json("config.json", &cfg)?;
    match cli.command {
        Command::Report(_) => commands::report(&cfg, &base, &mut sink),
        Command::AlgebraVerify(_) => commands::algebra(&cfg, &mut sink),
        Command::Distance(_) => commands::distance(&cfg, &base, &mut sink),
        Command::Kernel(_) => commands::kernel(&cfg, &base, &mut sink),
        Command::Bound(_) => commands::bound(&cfg, &base, &mut sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.json);
            if out.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("invariant failure: {}", out.failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
