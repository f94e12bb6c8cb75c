//! `coinlab`: runs the verification experiments and writes a report.
//!
//! Exit status: 0 when no verdict failed, 1 when any verdict failed, 2 on a
//! usage or parameter error.

mod config;
mod experiments;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use coinlab::Report;

use config::{Cli, OutputFormat, RunConfig};

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("coinlab: {msg}");
    eprintln!("usage: coinlab <SUBCOMMAND> --seed <SEED> [options]; see --help");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::resolve(cli) {
        Ok(cfg) => cfg,
        Err(msg) => return usage_error(msg),
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => return usage_error(format!("cannot start {} workers: {e}", cfg.workers)),
    };

    let mut report = Report::new(&cfg);
    if let Err(e) = pool.install(|| experiments::run(&cfg, &mut report)) {
        return usage_error(e);
    }

    let body = match cfg.output_format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => report.to_csv(),
    };
    let written = match &cfg.output_path {
        Some(path) => std::fs::write(path, body.as_bytes()),
        None => std::io::stdout().lock().write_all(body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("coinlab: cannot write report: {e}");
        return ExitCode::from(1);
    }
    eprintln!(
        "coinlab {}: {} pass, {} fail, {} inconclusive",
        cfg.subcommand, report.summary.pass, report.summary.fail, report.summary.inconclusive
    );
    if report.has_failures() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
