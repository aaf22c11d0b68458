//! `qwc`: run convergence scenarios, re-derive report orders, and exercise the
//! library's invariant suite from the command line.
//!
//! Exit codes follow the usual convention for batch checkers: `0` when every
//! check or report row passes, `1` when the work ran but something failed,
//! `2` when the input itself (config file, CSV, I/O) could not be used.

mod selftest;

use clap::{Parser, Subcommand};
use qwc_core::harness::{
    parse_report_csv, parse_scenario_config, rolling_orders, run_scenario, summarize_report,
    write_report_csv, ConvergenceReport,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "qwc", version, about = "Quantum random walk convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config and emit its CSV report.
    Run {
        /// Path to the scenario config (JSON).
        config: PathBuf,
        /// Write the CSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a one-line-per-pair summary after the report.
        #[arg(long)]
        summary: bool,
    },
    /// Run the built-in invariant suite and report each check.
    Selftest,
    /// Recompute the order column of an existing CSV report.
    Order {
        /// Path to a report produced by `qwc run`.
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, summary } => cmd_run(&config, out.as_deref(), summary),
        Command::Selftest => selftest::run(),
        Command::Order { csv } => cmd_order(&csv),
    }
}

fn config_error(context: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("qwc: {context}: {message}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_run(config: &Path, out: Option<&Path>, summary: bool) -> ExitCode {
    let text = match fs::read_to_string(config) {
        Ok(text) => text,
        Err(err) => return config_error(&format!("reading {}", config.display()), err),
    };
    let cfg = match parse_scenario_config(&text) {
        Ok(cfg) => cfg,
        Err(err) => return config_error(&format!("parsing {}", config.display()), err),
    };
    let report = match run_scenario(&cfg) {
        Ok(report) => report,
        Err(err) => return config_error("running scenario", err),
    };
    let csv = write_report_csv(&report);
    match out {
        Some(path) => {
            if let Err(err) = fs::write(path, &csv) {
                return config_error(&format!("writing {}", path.display()), err);
            }
        }
        None => print!("{csv}"),
    }
    if summary {
        print!("{}", summarize_report(&report));
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

/// Replace every `order_estimate` with the value recomputed from the error and
/// step columns, leaving errors and pass flags exactly as stored.
fn refresh_orders(report: &ConvergenceReport) -> ConvergenceReport {
    let mut refreshed = report.clone();
    for pair in report.pair_indices() {
        let rows = report.pair_rows(pair);
        let errors: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let orders = rolling_orders(&errors, &hs);
        let mut next = orders.into_iter();
        for row in refreshed.rows.iter_mut().filter(|r| r.pair_index == pair) {
            row.order_estimate = next.next().unwrap_or(f64::NAN);
        }
    }
    refreshed
}

fn cmd_order(csv: &Path) -> ExitCode {
    let text = match fs::read_to_string(csv) {
        Ok(text) => text,
        Err(err) => return config_error(&format!("reading {}", csv.display()), err),
    };
    let report = match parse_report_csv(&text) {
        Ok(report) => report,
        Err(err) => return config_error(&format!("parsing {}", csv.display()), err),
    };
    print!("{}", write_report_csv(&refresh_orders(&report)));
    ExitCode::SUCCESS
}
