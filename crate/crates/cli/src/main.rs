use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use edgesr_core::config::{export_trace, run, ConfigDocument, Diagnostic, Scenario};

#[derive(Parser)]
#[command(name = "edgesr", version, about = "Run SRv6 mobile user plane scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and build its network once.
    Validate { config: PathBuf },
    /// Run a scenario against a configuration and judge its assertions.
    Run {
        config: PathBuf,
        scenario: PathBuf,
        /// Write the per-hop trace here.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Append each packet's octets in hex to the trace.
        #[arg(long, requires = "trace")]
        hex: bool,
        /// Override the scenario's tick limit.
        #[arg(long, value_name = "N")]
        max_ticks: Option<u64>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

/// Input problems, already rendered with file and line.
struct InputError(Vec<String>);

fn located(file: &Path, diags: Vec<Diagnostic>) -> InputError {
    let name = file.display().to_string();
    InputError(diags.iter().map(|d| d.located(&name)).collect())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("{}:0: cannot read file", path.display()))
}

fn load_config(path: &Path) -> Result<std::result::Result<ConfigDocument, InputError>> {
    let text = read(path)?;
    Ok(ConfigDocument::validate(&text).map_err(|d| located(path, d)))
}

fn execute(cli: Cli) -> Result<std::result::Result<bool, InputError>> {
    match cli.command {
        Command::Validate { config } => {
            let doc = match load_config(&config)? {
                Ok(d) => d,
                Err(e) => return Ok(Err(e)),
            };
            let t = &doc.topology;
            println!(
                "{}: ok ({} gNBs, {} SR nodes, {} hosts, {} UEs, {} links, {} slices, {} sessions)",
                config.display(),
                t.gnbs.len(),
                t.sr_nodes.len(),
                t.hosts.len(),
                t.ues.len(),
                t.links.len(),
                t.policy.len(),
                doc.sessions.len()
            );
            Ok(Ok(true))
        }
        Command::Run { config, scenario, trace, hex, max_ticks } => {
            let doc = match load_config(&config)? {
                Ok(d) => d,
                Err(e) => return Ok(Err(e)),
            };
            let sc = match Scenario::parse(&read(&scenario)?, &doc) {
                Ok(s) => s,
                Err(d) => return Ok(Err(located(&scenario, d))),
            };
            let out = match run(&doc, &sc, max_ticks) {
                Ok(o) => o,
                Err(d) => return Ok(Err(located(&scenario, d))),
            };
            if let Some(path) = trace {
                export_trace(out.trace(), &path, hex).with_context(|| format!("{}:0: cannot write trace", path.display()))?;
            }
            print!("{}", out.report.render());
            Ok(Ok(out.report.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(EXIT_FAIL),
        Ok(Err(InputError(lines))) => {
            for l in lines {
                eprintln!("{l}");
            }
            ExitCode::from(EXIT_INPUT)
        }
        Err(e) => {
            eprintln!("{e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
