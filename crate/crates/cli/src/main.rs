mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use config::{ConfigError, Overrides, Provider, RunConfig};
use lam_core::training::TrainingError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lam", version, about = "Data pipeline, training, agent runs and evaluation for a toy large action model")]
struct Cli {
    /// Workspace directory holding corpus/, checkpoints/, runs/ and reports/.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// TOML config file; defaults to lam.toml in the workspace when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for task-parallel work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Create the workspace layout and seed the corpus.
    Init {
        /// Write the bundled 50-task benchmark corpus instead of the raw fixture.
        #[arg(long)]
        suite: bool,
        #[arg(long)]
        force: bool,
    },
    /// Data pipeline stages.
    Dataflow {
        #[command(subcommand)]
        action: DataflowCmd,
    },
    /// Train one phase from its predecessor.
    Train {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        phase: u8,
    },
    /// Agent runs.
    Agent {
        #[command(subcommand)]
        action: AgentCmd,
    },
    /// Evaluate trained checkpoints.
    Eval {
        #[command(subcommand)]
        kind: EvalCmd,
    },
    /// Render report.txt and report.csv from stored evaluation results.
    Report,
}

#[derive(Subcommand)]
enum DataflowCmd {
    Run {
        /// normalize, evolve, instantiate, execute, judge, postprocess or all.
        #[arg(long)]
        stage: String,
    },
}

#[derive(Subcommand)]
enum AgentCmd {
    Run {
        #[arg(long)]
        task: String,
        #[arg(long)]
        template: String,
        #[arg(long, default_value = "adhoc")]
        task_id: String,
        /// Checkpoint to use; the latest trained one by default.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        phase: Option<u8>,
        /// Sample actions with the run seed instead of taking the argmax.
        #[arg(long)]
        sample: bool,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Plan precision, recall and task success against the corpus plans.
    Plan {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        phase: Option<u8>,
        /// Let the oracle match steps and judge success.
        #[arg(long)]
        judge: bool,
    },
    /// Step-wise accuracy on recorded demonstrations.
    Actions {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        phase: Option<u8>,
    },
    /// Closed-loop runs on the instantiated tasks.
    Online {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        phase: Option<u8>,
    },
}

fn run(cli: Cli) -> Result<String> {
    let overrides = Overrides {
        workspace: cli.workspace,
        seed: cli.seed,
        workers: cli.workers,
        provider: cli.provider.map(|p| match p {
            ProviderArg::Mock => Provider::Mock,
            ProviderArg::Remote => Provider::Remote,
        }),
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    // A second build in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    match cli.command {
        Command::Init { suite, force } => commands::init(&cfg, suite, force),
        Command::Dataflow { action: DataflowCmd::Run { stage } } => commands::dataflow(&cfg, &stage),
        Command::Train { phase } => commands::train(&cfg, phase),
        Command::Agent { action: AgentCmd::Run { task, template, task_id, phase, sample } } => {
            commands::agent_run(&cfg, &task, &template, &task_id, phase, sample)
        }
        Command::Eval { kind } => match kind {
            EvalCmd::Plan { phase, judge } => commands::eval_plan(&cfg, phase, judge),
            EvalCmd::Actions { phase } => commands::eval_actions_cmd(&cfg, phase),
            EvalCmd::Online { phase } => commands::eval_online_cmd(&cfg, phase),
        },
        Command::Report => commands::report(&cfg),
    }
}

/// Short tag naming the kind of failure, shown before the message.
fn diagnostic_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<ConfigError>().is_some() {
        return "ConfigError";
    }
    match err.downcast_ref::<TrainingError>() {
        Some(TrainingError::MissingPredecessor { .. }) => "MissingPredecessor",
        Some(TrainingError::Config(_)) => "ConfigError",
        Some(_) => "TrainingError",
        None => "ValidationError",
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("LAM_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("{}", out.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = diagnostic_kind(&e);
            eprintln!("error[{kind}]: {e:#}");
            ExitCode::from(if kind == "ConfigError" { 2 } else { 1 })
        }
    }
}
