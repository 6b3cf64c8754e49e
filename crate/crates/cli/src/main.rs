//! `gauge-forge`: run the verification suite on a scenario file or a
//! seeded random scenario.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gauge_forge::verifier::{
    random_scenario, run_suite, CheckId, CheckReport, CheckRow, Scenario, Tolerances,
};
use serde::Serialize;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gauge-forge",
    version,
    about = "Numeric verification of inhomogeneous local gauge invariance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Number of sample points (overrides the scenario)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    points: Option<u64>,

    /// Tolerance applied to every check except the negative controls
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Write one JSON object per check to this file
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    /// Print a single JSON summary object instead of the table
    #[arg(long, global = true)]
    json: bool,

    /// Suppress the human-readable table
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the suite on a JSON scenario file
    Verify { config: PathBuf },
    /// Generate a seeded random scenario and run the suite on it
    Random {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=3))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Describe what a check compares
    Explain { check_id: String },
}

#[derive(Serialize)]
struct ReportLine<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    row: &'a CheckRow,
}

#[derive(Serialize)]
struct Explanation {
    id: CheckId,
    equation: &'static str,
    formula: &'static str,
    comparison: &'static str,
    default_tolerance: f64,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn write_report(path: &Path, report: &CheckReport) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in &report.rows {
        let line = ReportLine {
            scenario: &report.scenario,
            row,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn print_table(report: &CheckReport, points: usize) {
    println!(
        "scenario {} (N = {}, {points} points)",
        report.scenario, report.n
    );
    for row in &report.rows {
        let status = match (row.applicable, row.pass) {
            (false, _) => "N/A ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let detail = match (&row.error, row.applicable) {
            (Some(e), _) => format!("error: {e}"),
            (None, false) => "not applicable".to_string(),
            (None, true) => format!(
                "max {:.3e} {} {:.0e}",
                row.max_residual, row.comparison, row.tolerance
            ),
        };
        println!(
            "{status}  {:<33} {:<44} {detail}",
            row.id.as_str(),
            row.equation
        );
    }
    let failed = report.failures().count();
    println!(
        "overall: {} ({} checks, {failed} failed) in {:.0} ms",
        if report.pass { "PASS" } else { "FAIL" },
        report.rows.len(),
        report.runtime_ms
    );
}

fn explain(cli: &Cli, id: &str) -> ExitCode {
    let id: CheckId = match id.parse() {
        Ok(id) => id,
        Err(e) => {
            let known: Vec<_> = CheckId::ALL.iter().map(|c| c.as_str()).collect();
            return usage_error(format!("{e}; known ids: {}", known.join(", ")));
        }
    };
    let ex = Explanation {
        id,
        equation: id.equation(),
        formula: id.formula(),
        comparison: if id.is_negative_control() { ">" } else { "<=" },
        default_tolerance: id.tolerance(&Tolerances::default()),
    };
    if cli.json {
        println!(
            "{}",
            serde_json::to_string(&ex).expect("plain data serializes")
        );
    } else if !cli.quiet {
        println!("{}", id.as_str());
        println!("  equation:  {}", ex.equation);
        println!("  compares:  {}", ex.formula);
        println!(
            "  passes if: residual {} {:e}",
            ex.comparison, ex.default_tolerance
        );
    }
    ExitCode::SUCCESS
}

fn run(cli: &Cli, mut scenario: Scenario) -> ExitCode {
    if let Some(k) = cli.points {
        scenario.sampling.points = k as usize;
    }
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t >= 0.0) {
            return usage_error(format!("--tol must be a non-negative number, got {t}"));
        }
        scenario.tolerances.override_all(t);
    }
    let report = match run_suite(&scenario) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    if let Some(path) = &cli.report {
        if let Err(e) = write_report(path, &report) {
            return usage_error(format!("cannot write report {}: {e}", path.display()));
        }
    }
    if cli.json {
        println!(
            "{}",
            serde_json::to_string(&report).expect("plain data serializes")
        );
    } else if !cli.quiet {
        print_table(&report, scenario.sampling.points);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Explain { check_id } => explain(&cli, check_id),
        Command::Verify { config } => match config::load_config(config) {
            Ok(s) => run(&cli, s),
            Err(e) => usage_error(e),
        },
        Command::Random { n, seed } => run(&cli, random_scenario(*n as usize, *seed)),
    }
}
