use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fgl::catalog::{load_system, parse_element, CatalogError, NamedElement};
use fgl::subshift::{SubshiftSystem, DEFAULT_ORBIT_HORIZON};

mod density_cmd;
mod element_cmd;
mod mean_cmd;
mod output;
mod report_cmd;
mod stab_cmd;
mod subshift_cmd;

use output::{Emitter, Format};

/// Invalid input; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(name = "fgl", version, about = "Experiments with topological full groups of substitution subshifts")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Builtin system (fibonacci, thue-morse) or path of a JSON substitution.
    #[arg(long, global = true, default_value = "fibonacci")]
    pub system: String,
    /// Element name such as shift, swap:01, comm:01,00100, tswap:a,b or @map.json; repeatable.
    #[arg(long = "element", global = true)]
    pub elements: Vec<String>,
    /// Comma-separated list of density parameters.
    #[arg(long, global = true, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    pub n: Vec<u32>,
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Word length for language and recurrence queries.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub length: Option<u64>,
    /// Comma-separated finite set E.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub set: Vec<i64>,
    /// Number of independent samples joined by the union boost.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    /// Number of sets drawn by sampling commands.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: Option<u64>,
    /// Half-length of the computed orbit of the fixed point.
    #[arg(long, global = true, env = "FGL_ORBIT_HORIZON", default_value_t = DEFAULT_ORBIT_HORIZON)]
    pub orbit_horizon: usize,
}

#[derive(Subcommand)]
enum Command {
    /// The substitution subshift and its fixed point.
    #[command(subcommand)]
    Subshift(subshift_cmd::SubshiftCmd),
    /// Elements of the full group and their embedding.
    #[command(subcommand)]
    Element(element_cmd::ElementCmd),
    /// Certified density estimates.
    #[command(subcommand)]
    Density(density_cmd::DensityCmd),
    /// Measures on finite subsets.
    #[command(subcommand)]
    Mean(mean_cmd::MeanCmd),
    /// Stabilisers and block certificates.
    #[command(subcommand)]
    Stab(stab_cmd::StabCmd),
    /// End-to-end pipeline.
    #[command(subcommand)]
    Report(report_cmd::ReportCmd),
}

impl Common {
    pub fn emitter(&self, default: Format) -> Emitter {
        Emitter::new(self.format, default, self.out.clone())
    }

    pub fn load_system(&self, horizon: usize) -> Result<Arc<SubshiftSystem>> {
        load_system(&self.system, horizon)
            .map(Arc::new)
            .map_err(config_error)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| ConfigError("--seed is required for sampling".into()).into())
    }

    pub fn require<T: Copy>(&self, value: Option<T>, flag: &str) -> Result<T> {
        value.ok_or_else(|| ConfigError(format!("--{flag} is required")).into())
    }

    pub fn check_eps(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(ConfigError("--eps must be positive".into()).into());
        }
        Ok(())
    }

    /// The `--element` list, building the system only if some element needs it.
    pub fn elements_with_horizon(&self, horizon: usize) -> Result<Vec<NamedElement>> {
        if self.elements.is_empty() {
            return Err(ConfigError("at least one --element is required".into()).into());
        }
        let needs_system = self
            .elements
            .iter()
            .any(|e| e.starts_with("swap:") || e.starts_with("comm:"));
        let system = if needs_system {
            Some(self.load_system(horizon)?)
        } else {
            None
        };
        self.elements
            .iter()
            .map(|e| parse_element(e, system.as_ref(), horizon).map_err(config_error))
            .collect()
    }

    pub fn elements(&self) -> Result<Vec<NamedElement>> {
        self.elements_with_horizon(self.orbit_horizon)
    }
}

/// Catalog failures are input problems except for horizon overruns, which
/// are reported as failed computations.
fn config_error(e: CatalogError) -> anyhow::Error {
    let text = e.to_string();
    if text.contains("horizon") {
        anyhow::Error::new(e).context("raise FGL_ORBIT_HORIZON or --orbit-horizon")
    } else {
        ConfigError(text).into()
    }
}

fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match cli.command {
        Command::Subshift(cmd) => subshift_cmd::run(cmd, c),
        Command::Element(cmd) => element_cmd::run(cmd, c),
        Command::Density(cmd) => density_cmd::run(cmd, c),
        Command::Mean(cmd) => mean_cmd::run(cmd, c),
        Command::Stab(cmd) => stab_cmd::run(cmd, c),
        Command::Report(cmd) => report_cmd::run(cmd, c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
