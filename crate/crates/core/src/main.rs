use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmflow::cli::{emit_report, parse_scenario, run_scenario, ExitStatus, ParseOptions, RunOptions};
use hmflow::level_geometry::mu;
use hmflow::manifold::ModelManifold;
use hmflow::{Error, Result};

#[derive(Parser)]
#[command(name = "hmflow", version, about = "Harmonic map heat flow into convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV reports.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        save_every: Option<usize>,
        /// Accept bodies beyond the convexity radius; a sampled strong
        /// convexity probe is run instead.
        #[arg(long)]
        override_convexity_check: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Print μ(w, t) for a fixed unit direction at a reference point.
    MuTable {
        /// sphere2, poincare or flatN (e.g. flat3)
        manifold: String,
        /// Comma-separated offsets, e.g. 0,0.1,0.2
        t_list: String,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_manifold(name: &str) -> Result<ModelManifold> {
    match name {
        "sphere2" => Ok(ModelManifold::Sphere2),
        "poincare" => Ok(ModelManifold::PoincareDisk),
        other => match other.strip_prefix("flat").and_then(|d| d.parse().ok()) {
            Some(d) => ModelManifold::flat(d),
            None => Err(Error::Scenario {
                location: "manifold".into(),
                message: format!("unknown manifold `{other}`"),
            }),
        },
    }
}

fn mu_table(manifold: &str, t_list: &str) -> Result<()> {
    let m = parse_manifold(manifold)?;
    let base: Vec<f64> = match m {
        ModelManifold::Sphere2 => vec![0.0, 0.0, 1.0],
        _ => vec![0.0; m.ambient_dim()],
    };
    let y = m.point(&base)?;
    let w = m.tangent_basis(&y).remove(0);
    println!("t,mu");
    for item in t_list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let t: f64 = item.parse().map_err(|_| Error::Scenario {
            location: "t-list".into(),
            message: format!("`{item}` is not a number"),
        })?;
        println!("{t:.16e},{:.16e}", mu(&m, &w, t)?);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitStatus> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            save_every,
            override_convexity_check,
            seed,
        } => {
            let text = read(&scenario)?;
            let s = parse_scenario(
                &text,
                ParseOptions {
                    override_convexity_check,
                },
            )?;
            let outcome = run_scenario(&s, &RunOptions { save_every, seed })?;
            emit_report(&outcome, &out)?;
            println!("{}", outcome.verdict_line);
            Ok(outcome.status)
        }
        Command::Check { scenario } => {
            let s = parse_scenario(&read(&scenario)?, ParseOptions::default())?;
            println!("ok: {}", s.name);
            Ok(ExitStatus::Pass)
        }
        Command::MuTable { manifold, t_list } => {
            mu_table(&manifold, &t_list)?;
            Ok(ExitStatus::Pass)
        }
    }
}

fn main() -> ExitCode {
    let status = match execute(Cli::parse()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::for_error(&e)
        }
    };
    ExitCode::from(status.code() as u8)
}
