use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use markedgibbs_cli::config::{Command, Format, RunConfig};
use markedgibbs_cli::report::{CommandResult, Report};
use markedgibbs_cli::run::run;
use markedgibbs_cli::CliError;

/// Cluster expansions and samplers for marked Gibbs point processes.
#[derive(Parser)]
#[command(name = "markedgibbs", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `command` in the config.
    #[arg(long, value_enum)]
    command: Option<Command>,
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the thread pool; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn execute(args: Args) -> Result<Report, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(c) = args.command {
        config.command = Some(c);
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = args.out {
        config.output.path = Some(o);
    }
    if let Some(f) = args.format {
        config.output.format = f;
    }
    let report = match args.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?
            .install(|| run(&config))?,
        None => run(&config)?,
    };

    let mut body = Vec::new();
    match config.output.format {
        Format::Report => body.extend(report.to_json()?.into_bytes()),
        Format::Csv => report.write_csv(&mut body)?,
    }
    match &config.output.path {
        Some(p) => fs::write(p, &body).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => io::stdout().write_all(&body).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })?,
    }
    Ok(report)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(report) => match report.result {
            CommandResult::Verify(v) if !v.passed => {
                for p in v.properties.iter().filter(|p| !p.passed) {
                    eprintln!("{}", p.line());
                }
                ExitCode::from(1)
            }
            _ => ExitCode::SUCCESS,
        },
        Err(e) => {
            eprintln!("markedgibbs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
