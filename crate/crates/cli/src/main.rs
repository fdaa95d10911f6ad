//! `regproj` scenario runner.
//!
//! ```text
//! regproj run scenarios/circle-regularity.json --out out/
//! regproj validate scenarios/*.json
//! regproj render out/report.json --out out/
//! ```
//!
//! Exit status: 0 when every budget passes, 1 when one fails, 2 on
//! schema or module errors.

mod run;
mod scenario;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "regproj", version, about = "Regular projections and regular covers from JSON scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for the only randomized step (fiber probes)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Verification grid per axis (cover scenarios) or sample grid (atlas)
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its report
    Run { scenario: PathBuf },
    /// Check scenario files against the schema without running them
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Render a report as SVG
    Render { report: PathBuf },
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli, path: &Path) -> Result<bool> {
    let mut scenario = scenario::load(path)?;
    if let Some(g) = cli.grid {
        scenario.override_grid(g);
    }
    scenario.validate().with_context(|| format!("invalid scenario {}", path.display()))?;
    let outcome = run::run(&scenario, cli.seed).with_context(|| format!("running {}", path.display()))?;
    let report = &outcome.report;

    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let outputs = scenario.outputs();
    write(&cli.out, &outputs.report, &(serde_json::to_string_pretty(report)? + "\n"))?;
    if let Some(csv) = &outcome.csv {
        write(&cli.out, outputs.csv.as_deref().unwrap_or("profile.csv"), csv)?;
    }
    if let Some(name) = &outputs.svg {
        write(&cli.out, name, &svg::render(report)?)?;
    }
    for b in &report.budgets {
        println!("{} {}: {}", if b.pass { "PASS" } else { "FAIL" }, b.name, b.detail);
    }
    Ok(report.pass)
}

fn render(cli: &Cli, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: run::Report = serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))?;
    let doc = svg::render(&report)?;
    std::fs::create_dir_all(&cli.out)?;
    let name = report.scenario.outputs().svg.clone().unwrap_or_else(|| "plot.svg".into());
    write(&cli.out, &name, &doc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario } => run(&cli, scenario),
        Command::Validate { scenarios } => scenarios
            .iter()
            .try_for_each(|p| {
                scenario::load(p)?.validate().with_context(|| format!("invalid scenario {}", p.display()))?;
                println!("ok {}", p.display());
                Ok(())
            })
            .map(|_| true),
        Command::Render { report } => render(&cli, report).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
