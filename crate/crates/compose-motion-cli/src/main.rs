//! `compose-motion`: the end-to-end pipeline CLI.
//!
//! Every subcommand takes a JSON config (defaults apply when omitted), an
//! optional seed override, dotted `--set` overrides, and writes artifacts
//! under `<out>/<run-id>/<command>/` with a manifest. Exit codes: 0 success,
//! 2 config/schema violation, 1 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compose_motion::config::{apply_override, load_config_value};
use compose_motion::pipeline::{run_command, Command, RunContext};
use compose_motion::Error;

#[derive(Parser)]
#[command(name = "compose-motion", version, about = "Compositional 3D action generation pipeline")]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory root (defaults to the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rerun even when the run directory already has a manifest.
    #[arg(long, global = true)]
    force: bool,
    /// Dotted config overrides, e.g. --set model.epochs=50.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the procedural sub-action dataset.
    GenData,
    /// Couple sub-actions into pseudo-composites.
    Couple {
        /// Pairing policy JSON file ({"pairs": [[0,1],...]} or "full-class").
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Number of composites to build.
        #[arg(long)]
        count: Option<usize>,
        /// Mixing distribution: gaussian:STD | beta:A | uniform | fixed:L.
        #[arg(long)]
        dist: Option<String>,
    },
    /// Per-part motion-energy tables as JSON.
    Energy,
    /// Rasterize a sequence to per-frame PGMs and a contact sheet.
    Render,
    /// Emit attention maps, region grids, and masked images for a composite.
    Decouple,
    /// Train the conditional generator.
    Train,
    /// Sample generations from a trained checkpoint.
    Sample,
    /// Report the refinement loss of composites against their sources.
    RefineEval,
    /// Compute the metrics report for generated samples.
    Evaluate,
    /// Train and evaluate ablation arms under matched seeds.
    Ablate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(err @ (Error::Config { .. } | Error::InvalidArgument(_))) => {
            eprintln!("error[config]: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error[{}]: {err}", module_tag(&err));
            ExitCode::FAILURE
        }
    }
}

fn module_tag(err: &Error) -> &'static str {
    match err {
        Error::Parse { .. } | Error::Validation(_) => "data",
        Error::Io { .. } => "io",
        Error::Numeric(_) => "numeric",
        Error::InvalidState(_) => "state",
        _ => "runtime",
    }
}

fn run(cli: Cli) -> compose_motion::Result<PathBuf> {
    let mut value = match &cli.config {
        Some(path) => load_config_value(path)?,
        None => serde_json::json!({}),
    };
    for assignment in &cli.overrides {
        apply_override(&mut value, assignment)?;
    }
    if let Some(seed) = cli.seed {
        apply_override(&mut value, &format!("seed={seed}"))?;
    }

    let command = match &cli.command {
        Cmd::GenData => Command::GenData,
        Cmd::Couple { policy, count, dist } => {
            if let Some(path) = policy {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let policy_value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })?;
                value["coupling"]["policy"] = policy_value;
            }
            if let Some(count) = count {
                apply_override(&mut value, &format!("coupling.count={count}"))?;
            }
            if let Some(dist) = dist {
                apply_override(&mut value, &format!("coupling.dist={dist}"))?;
            }
            Command::Couple
        }
        Cmd::Energy => Command::Energy,
        Cmd::Render => Command::Render,
        Cmd::Decouple => Command::Decouple,
        Cmd::Train => Command::Train,
        Cmd::Sample => Command::Sample,
        Cmd::RefineEval => Command::RefineEval,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Ablate => Command::Ablate,
    };

    let ctx = RunContext::new(value, cli.out.as_deref(), cli.force)?;
    run_command(&ctx, command)
}
