//! Command-line front end. Exit codes: 0 success, 2 invalid config or
//! usage, 3 missing input, 4 stage failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use schoolroom_core::assemble::Condition;
use serde_json::json;

use crate::config::{Overrides, PipelineConfig};
use crate::{log, pipeline, stages, Result};

#[derive(Debug, Parser)]
#[command(
    name = "schoolroom",
    version,
    about = "Render classroom dialogue corpora from clean speech"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Validate and print the plan without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Condition to render; repeat for several (clean, rir, noise, rir+noise).
    #[arg(long = "condition", global = true)]
    pub conditions: Vec<Condition>,
    /// Output root; overrides paths.output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the excitation sweep and its inverse filter.
    SweepGen,
    /// Deconvolve recorded sweeps into impulse responses.
    RirExtract {
        /// Recording of the sweep played in the room; repeat for several.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Room id stored with the extracted responses.
        #[arg(long, default_value = "measured")]
        room_id: String,
    },
    /// Simulate the impulse-response bank.
    RirBank,
    /// Synthesize classroom babble noise tracks.
    Babble,
    /// Assign utterances to train, dev and test splits.
    Partition,
    /// Match child and adult utterances by embedding similarity.
    Pair,
    /// Build clean dialogues from matched pairs.
    Assemble,
    /// Render conditions for an existing clean manifest.
    Mix,
    /// Run every stage.
    Pipeline,
    /// Check an embeddings file against the interchange contract.
    ValidateEmbeddings { path: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SweepGen => "sweep-gen",
            Command::RirExtract { .. } => "rir-extract",
            Command::RirBank => "rir-bank",
            Command::Babble => "babble",
            Command::Partition => "partition",
            Command::Pair => "pair",
            Command::Assemble => "assemble",
            Command::Mix => "mix",
            Command::Pipeline => "pipeline",
            Command::ValidateEmbeddings { .. } => "validate-embeddings",
        }
    }
}

/// Load and validate the config with the flag overrides applied.
pub fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(g.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: g.seed,
        workers: g.workers,
        output: g.output.clone(),
        conditions: g.conditions.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<serde_json::Value> {
    if let Command::ValidateEmbeddings { path } = &cli.command {
        return pipeline::validate_embeddings_cmd(path);
    }
    let cfg = load_config(&cli.global)?;
    let dry = cli.global.dry_run;
    let pool = stages::thread_pool(cfg.workers)?;
    log::emit(
        cli.command.name(),
        "config",
        json!({ "seed": cfg.master_seed()?, "workers": pool.current_num_threads(), "dry_run": dry }),
    );
    pool.install(|| match &cli.command {
        Command::SweepGen => pipeline::sweep_gen(&cfg, dry),
        Command::RirExtract { inputs, room_id } => pipeline::rir_extract(&cfg, inputs, room_id, dry),
        Command::RirBank => pipeline::rir_bank(&cfg, dry),
        Command::Babble => pipeline::babble(&cfg, dry),
        Command::Partition => pipeline::partition_cmd(&cfg, dry),
        Command::Pair => pipeline::pair_cmd(&cfg, dry),
        Command::Assemble => pipeline::assemble(&cfg, dry),
        Command::Mix => pipeline::mix(&cfg, dry),
        Command::Pipeline => pipeline::pipeline(&cfg, dry),
        Command::ValidateEmbeddings { .. } => unreachable!("handled before config loading"),
    })
}

/// Parse arguments, run, print the summary and return the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    log::set_quiet(cli.global.quiet);
    let name = cli.command.name();
    match run(&cli) {
        Ok(summary) => {
            let mut out = json!({ "command": name, "dry_run": cli.global.dry_run });
            if let (Some(o), serde_json::Value::Object(s)) = (out.as_object_mut(), summary) {
                o.extend(s);
            }
            println!("{out}");
            0
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!(
                "{}",
                log::line(name, "error", json!({ "code": code, "message": e.to_string() }))
            );
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn conditions_repeat() {
        let cli = Cli::try_parse_from([
            "schoolroom",
            "mix",
            "--condition",
            "rir",
            "--condition",
            "rir+noise",
            "--seed",
            "3",
        ])
        .unwrap();
        assert_eq!(cli.global.conditions, vec![Condition::Rir, Condition::RirNoise]);
        assert_eq!(cli.global.seed, Some(3));
    }

    #[test]
    fn unknown_condition_is_a_usage_error() {
        assert!(Cli::try_parse_from(["schoolroom", "mix", "--condition", "loud"]).is_err());
    }
}
