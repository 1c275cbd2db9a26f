//! `bubblelab` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, DynamicsCommand, FixturesCommand};
use config::Invalid;

#[derive(Debug, Parser)]
#[command(
    name = "bubblelab",
    version,
    about = "Boundary bubbles: profiles, moments, energy expansions, estimators and reduced models"
)]
struct Cli {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fixture cache directory.
    #[arg(long, global = true, env = "BUBBLELAB_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted moments of the half-space optimizer.
    Moments(commands::MomentsArgs),
    /// Expansion coefficients of the Escobar or GN quotients.
    Coefficients(commands::CoefficientsArgs),
    /// Quotient sweep over dyadic scales.
    Expand(commands::ExpandArgs),
    /// Curvature estimators from deficit sweeps.
    Estimate(commands::EstimateArgs),
    /// Euler characteristic from curvature fields.
    GaussBonnet(commands::GaussBonnetArgs),
    /// Critical points of the center-only potential.
    Reduce(commands::ReduceArgs),
    /// Fast-diffusion bounds and window eigenvalues.
    Dynamics {
        #[command(subcommand)]
        command: DynamicsCommand,
    },
    /// Reference values: regenerate or verify.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::Coefficients(_) => "coefficients",
            Command::Expand(_) => "expand",
            Command::Estimate(_) => "estimate",
            Command::GaussBonnet(_) => "gauss-bonnet",
            Command::Reduce(_) => "reduce",
            Command::Dynamics { command: DynamicsCommand::Fde(_) } => "dynamics fde",
            Command::Dynamics { command: DynamicsCommand::Window(_) } => "dynamics window",
            Command::Fixtures { command: FixturesCommand::Regenerate(_) } => "fixtures regenerate",
            Command::Fixtures { command: FixturesCommand::Verify(_) } => "fixtures verify",
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let name = cli.command.name();
    let file = cli.config.as_deref().map(config::load).transpose()?;
    if let Some(f) = &file {
        if let Some(c) = f.get("command") {
            if c.as_str() != Some(name) {
                return Err(config::invalid(format!("config file is for command {c}, not '{name}'")));
            }
        }
    }
    let from_file = |key: &str| file.as_ref().and_then(|f| f.get(key).cloned());
    let threads = match (cli.threads, from_file("threads")) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => {
            Some(serde_json::from_value::<usize>(v).map_err(|e| config::invalid(format!("threads: {e}")))?)
        }
        (None, None) => None,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(config::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let cache_dir = match (cli.cache_dir, from_file("cache-dir")) {
        (Some(d), _) => Some(d),
        (None, Some(v)) => {
            Some(serde_json::from_value::<PathBuf>(v).map_err(|e| config::invalid(format!("cache-dir: {e}")))?)
        }
        (None, None) => None,
    };
    let ctx = Ctx { command: name.to_string(), cache_dir };
    let f = file.as_ref();
    match &cli.command {
        Command::Moments(a) => commands::moments(&ctx, &config::resolve(a, f)?),
        Command::Coefficients(a) => commands::coefficients(&ctx, &config::resolve(a, f)?),
        Command::Expand(a) => commands::expand(&ctx, &config::resolve(a, f)?),
        Command::Estimate(a) => commands::estimate(&ctx, &config::resolve(a, f)?),
        Command::GaussBonnet(a) => commands::gauss_bonnet(&ctx, &config::resolve(a, f)?),
        Command::Reduce(a) => commands::reduce(&ctx, &config::resolve(a, f)?),
        Command::Dynamics { command: DynamicsCommand::Fde(a) } => commands::dynamics_fde(&ctx, &config::resolve(a, f)?),
        Command::Dynamics { command: DynamicsCommand::Window(a) } => {
            commands::dynamics_window(&ctx, &config::resolve(a, f)?)
        }
        Command::Fixtures { command: FixturesCommand::Regenerate(a) } => {
            commands::fixtures_regenerate(&ctx, &config::resolve(a, f)?)
        }
        Command::Fixtures { command: FixturesCommand::Verify(a) } => {
            commands::fixtures_verify(&ctx, &config::resolve(a, f)?)
        }
    }
}

/// 2 for validation errors, 3 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<bubblelab::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    3
}

fn diagnostic(command: Option<&str>, code: u8, message: String, causes: Vec<String>) {
    let d = json!({
        "schema_version": output::SCHEMA_VERSION,
        "status": "error",
        "command": command,
        "kind": if code == 2 { "validation" } else { "numerical" },
        "exit_code": code,
        "message": message,
        "causes": causes,
    });
    eprintln!("{d}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            diagnostic(None, 2, e.kind().to_string(), vec![e.to_string().trim_end().to_string()]);
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = exit_code(&err);
            diagnostic(Some(name), code, err.to_string(), err.chain().skip(1).map(|c| c.to_string()).collect());
            ExitCode::from(code)
        }
    }
}
