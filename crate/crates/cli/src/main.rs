//! `aiready` — runs the readiness/capability measurement pipeline and the
//! study battery over a configured corpus or a self-generated synthetic
//! one. Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 estimation error.

mod config;
mod context;
mod output;
mod recipes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aiready_core::synth::{self, SyntheticConfig};
use aiready_core::{Error, Result};

use crate::config::{validate_config, write_synthetic_config};
use crate::context::Context;
use crate::output::atomic_write;
use crate::recipes::find;

#[derive(Parser)]
#[command(name = "aiready", version, about = "AI readiness measurement pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline and write per-recipe artifacts.
    Run(RunArgs),
    /// Validate a config file without running anything.
    Validate {
        /// Pipeline config file.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config file (omit with --synthetic).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generate a synthetic corpus instead of reading a config.
    #[arg(long)]
    synthetic: bool,
    /// Seed for the synthetic generator.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated recipe names (default: all).
    #[arg(long, value_delimiter = ',')]
    recipes: Option<Vec<String>>,
    /// Treat any warning as a data error.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate_config(&config).map(|cfg| {
            println!(
                "config OK: {} inputs, years {}..={}",
                cfg.inputs().len(),
                cfg.years.0,
                cfg.years.1
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 1,
                Error::Io { .. } | Error::Parse { .. } | Error::Data(_) => 2,
                Error::Estimation(_) => 3,
            })
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.display().to_string(),
        source,
    })?;

    let config = if args.synthetic {
        if args.config.is_some() {
            return Err(Error::Config(
                "--config and --synthetic are mutually exclusive".into(),
            ));
        }
        let synth_dir = args.out.join("synthetic");
        let synth_config = SyntheticConfig {
            seed: args.seed,
            ..SyntheticConfig::default()
        };
        let data = synth::generate(&synth_config)?;
        synth::emit(&data, &synth_dir)?;
        let conf_path = write_synthetic_config(&synth_dir, synth_config.years)?;
        validate_config(&conf_path)?
    } else {
        let path = args
            .config
            .ok_or_else(|| Error::Config("either --config or --synthetic is required".into()))?;
        validate_config(&path)?
    };

    let selected: Vec<_> = match &args.recipes {
        Some(names) => names
            .iter()
            .map(|name| {
                find(name).ok_or_else(|| Error::Config(format!("unknown recipe `{name}`")))
            })
            .collect::<Result<_>>()?,
        None => recipes::registry(),
    };

    let mut ctx = Context::load(config, &args.out)?;
    let mut warnings = ctx.warnings.clone();
    let mut ran = Vec::new();
    for recipe in &selected {
        let artifacts = recipe.run(&mut ctx)?;
        let name = recipe.name();
        let json = serde_json::to_string_pretty(&artifacts.json).expect("artifact serializes");
        atomic_write(&args.out.join(format!("{name}.json")), &(json + "\n"))?;
        atomic_write(&args.out.join(format!("{name}.txt")), &artifacts.table)?;
        for (plot, csv) in &artifacts.plots {
            atomic_write(&args.out.join(format!("{name}_{plot}")), csv)?;
        }
        warnings.extend(artifacts.warnings.iter().map(|w| format!("{name}: {w}")));
        ran.push(name);
    }
    // the panel stage may have queued warnings after load
    for w in &ctx.warnings {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }

    let manifest = json!({
        "inputs": ctx.input_hashes,
        "input_hash": ctx.input_hash(),
        "years": { "start": ctx.config.years.0, "end": ctx.config.years.1 },
        "seed": if args.synthetic { Some(args.seed) } else { None },
        "recipes": ran,
        "warnings": warnings,
    });
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    atomic_write(&args.out.join("manifest.json"), &(manifest + "\n"))?;

    if args.strict && !warnings.is_empty() {
        return Err(Error::Data(format!(
            "strict mode: {} warning(s): {}",
            warnings.len(),
            warnings.join("; ")
        )));
    }
    println!("wrote {} recipe(s) to {}", ran.len(), args.out.display());
    Ok(())
}
