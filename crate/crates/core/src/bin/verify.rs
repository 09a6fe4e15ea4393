use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};
use warpsub::geometry::Scheme;
use warpsub::scenarios;
use warpsub::verify::{run, RunConfig, Target};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Runs the built-in verification scenarios and reports residuals.
#[derive(Debug, Parser)]
#[command(name = "verify", version)]
#[command(group(ArgGroup::new("target").required(true).args(["scenario", "all", "list"])))]
struct Cli {
    /// Scenario id (see --list).
    scenario: Option<String>,
    /// Run every scenario in catalog order.
    #[arg(long)]
    all: bool,
    /// Print the scenario catalog and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 25)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "fd-step", default_value_t = 1e-5)]
    fd_step: f64,
    /// central2, central4 or richardson.
    #[arg(long, default_value = "central2")]
    scheme: Scheme,
    #[arg(long = "tolerance-scale", default_value_t = 1.0)]
    tolerance_scale: f64,
    #[arg(long, value_enum, default_value = "json")]
    report: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        for s in scenarios::list_scenarios("") {
            println!("{:<24} {}", s.id, s.description);
        }
        return ExitCode::SUCCESS;
    }
    let config = RunConfig {
        scheme: cli.scheme,
        fd_step: cli.fd_step,
        seed: cli.seed,
        samples: cli.samples,
        tolerance_scale: cli.tolerance_scale,
    };
    let target = match &cli.scenario {
        Some(id) => Target::One(id),
        None => Target::All,
    };
    let summary = match run(target, &config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let body = match cli.report {
        Format::Json => summary.to_json() + "\n",
        Format::Text => summary.to_text(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{body}"),
    }
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
