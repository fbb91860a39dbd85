//! `sic4`: verification runs over the dimension-four SIC orbit.
//!
//! Exit codes: 0 when every claim passes, 1 when a claim fails, 2 on usage or
//! input errors.

mod report;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sic4::two_qubit::Basis;
use sic4::Tolerance;

use crate::report::Report;
use crate::runs::Context;

#[derive(Parser, Debug)]
#[command(name = "sic4", version, about = "Verify the structure of the dimension-four SIC orbit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Absolute tolerance for numerical comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Defining basis for the two-qubit analysis.
    #[arg(long, global = true, value_enum, default_value_t = BasisArg::Product)]
    basis: BasisArg,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run the regrouping clique search over all 256 states.
    #[arg(long, global = true)]
    full_scan: bool,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Fiducial, Clifford group orders, orbit and stabilizer.
    Orbit,
    /// Symmetry group of a SIC and its action on SIC labels.
    Symmetry,
    /// Triple-product census and the equal-fidelity triple family.
    Triples,
    /// Rebuild the displacement group from SIC states.
    Reconstruct {
        /// JSON file holding a SIC (`{"d": 4, "states": [...]}`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Regrouped SICs, the equivalence unitary and the subgroup census.
    Regroup,
    /// Two-qubit sign patterns, concurrence and purity.
    Twoqubit,
    /// Every pipeline above.
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Orbit => "orbit",
            Command::Symmetry => "symmetry",
            Command::Triples => "triples",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Regroup => "regroup",
            Command::Twoqubit => "twoqubit",
            Command::All => "all",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BasisArg {
    Product,
    Bell,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Product => Basis::Product,
            BasisArg::Bell => Basis::Bell,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Json,
    Tsv,
    Text,
}

/// Caps the global rayon pool at `SIC4_THREADS` when it is set.
fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("SIC4_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().with_context(|| format!("SIC4_THREADS must be a positive integer, got '{raw}'"))?;
    anyhow::ensure!(n > 0, "SIC4_THREADS must be positive");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(Some(n))
}

fn run(cli: &Cli) -> Result<Report> {
    let threads = configure_threads()?;
    let tol = Tolerance::new(cli.tol).map_err(anyhow::Error::from)?;
    let input = match &cli.command {
        Command::Reconstruct { input: Some(path) } => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(runs::read_input(&text)?)
        }
        _ => None,
    };
    let input_path = match &cli.command {
        Command::Reconstruct { input } => input.as_ref().map(|p| p.display().to_string()),
        _ => None,
    };
    let ctx = Context::new(tol, cli.basis.into(), cli.full_scan, input);
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Orbit => runs::orbit(&ctx),
        Command::Symmetry => runs::symmetry(&ctx),
        Command::Triples => runs::triples(&ctx),
        Command::Reconstruct { .. } => runs::reconstruct(&ctx),
        Command::Regroup => runs::regroup(&ctx),
        Command::Twoqubit => runs::twoqubit(&ctx),
        Command::All => runs::all(&ctx),
    }?;
    let basis: Basis = cli.basis.into();
    Ok(Report {
        claims: outcome.claims,
        runtime_ms: start.elapsed().as_millis(),
        config: json!({
            "subcommand": cli.command.name(),
            "tolerance": cli.tol,
            "basis": basis,
            "format": format!("{:?}", cli.format).to_lowercase(),
            "full_scan": cli.full_scan,
            "input": input_path,
            "threads": threads,
        }),
        artifacts: outcome.artifacts,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let text = match cli.format {
        Format::Json => report.render_json(),
        Format::Tsv => report.render_tsv(),
        Format::Text => report.render_text(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
