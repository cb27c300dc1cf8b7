//! `lpkato`: classification, potentials, embeddings and Feynman–Kac runs.
//!
//! Exit status: 0 pass, 1 fail (OUT under `--assert-in`, or a failing
//! self-test), 2 usage or config error, 3 inconclusive.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;
mod shorthand;

use clap::Parser;
use config::{Command, Format, RunConfig};
use run::{EXIT_USAGE, VERSION};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "lpkato", version = VERSION, about = "Kato-type measure classes, p-potentials and Feynman–Kac diagnostics")]
struct Cli {
    /// Command; may instead be set by `command` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Exit 1 when the headline verdict is OUT.
    #[arg(long)]
    assert_in: bool,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Process, e.g. `brownian:d=3`, `stable:d=2,alpha=1`.
    #[arg(long)]
    process: Option<String>,
    /// Measure, e.g. `lebesgue:ball(0,1)`, `sphere(0,1)`.
    #[arg(long)]
    measure: Option<String>,
    /// Domain, e.g. `strip:w=1,d=2`, `interval(-1,1)`.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("lpkato: {msg}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut cfg = RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if let Some(c) = cli.command {
                cfg.command = c;
            }
            cfg
        }
        None => RunConfig::new(cli.command.ok_or("no command given (and no --config)")?),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    cfg.assert_in |= cli.assert_in;
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    let field = |name: &str, e: String| format!("config error at `{name}`: {e}");
    if let Some(s) = &cli.process {
        cfg.process = Some(shorthand::process(s).map_err(|e| field("process", e))?);
    }
    let dim = cfg.process.map(|p| p.dim);
    if let Some(s) = &cli.measure {
        cfg.measure = Some(shorthand::measure(s, dim).map_err(|e| field("measure", e))?);
    }
    if let Some(s) = &cli.domain {
        cfg.domain = Some(shorthand::domain(s, dim).map_err(|e| field("domain", e))?);
    }
    if let Some(p) = cli.p {
        cfg.p = Some(p);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return usage(format!("thread pool: {e}"));
        }
    }
    let outcome = match run::run(&cfg) {
        Ok(o) => o,
        Err(e) => return usage(e),
    };
    print!("{}", run::render_summary(&cfg, &outcome));
    if let Some(dir) = &cfg.output.dir {
        match run::write_outputs(&cfg, &outcome, dir) {
            Ok(paths) => {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }
            Err(e) => return usage(e),
        }
    }
    ExitCode::from(run::exit_code(&outcome, cfg.assert_in) as u8)
}
