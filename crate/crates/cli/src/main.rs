//! `dds`: drive the intent-to-deployment pipeline one stage at a time, or a
//! whole deploy/observe/attribute/patch loop with `cycle`.

mod commands;
mod workdir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit status contract: 0 pass, 1 contract rejection or tier failure,
/// 2 input error, 3 missing prerequisite.
#[derive(Debug)]
pub enum Failure {
    Rejected(String),
    Input(String),
    Missing(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Rejected(_) => 1,
            Failure::Input(_) => 2,
            Failure::Missing(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "dds", version, about = "Intent-driven data backend composition")]
struct Cli {
    /// Directory holding every stage's inputs and outputs.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Pin every written timestamp to this RFC 3339 value.
    #[arg(long, global = true)]
    clock: Option<String>,
    /// Recorded in the workdir state; the default pipeline draws no randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RunnerKind {
    Sim,
    Compose,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an intent and store it in the workdir.
    Validate { intent: PathBuf },
    /// Synthesize (or load) an operator DAG and select products.
    Plan {
        /// Skill directory to import into the workdir first.
        #[arg(long)]
        skills: Option<PathBuf>,
        /// Use this DAG instead of synthesizing one.
        #[arg(long)]
        dag: Option<PathBuf>,
    },
    /// Build the deployment brief and artifacts for the stored plan.
    Render,
    /// Run the acceptance tiers against the rendered artifacts.
    Run {
        #[arg(long, value_enum, default_value = "sim")]
        runner: RunnerKind,
        /// Forced fault, `<class>:<service>`; repeatable.
        #[arg(long = "inject")]
        injections: Vec<String>,
        /// Host profile to copy into the workdir first.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Classify the last run, route signals, apply auto corrections.
    Attribute {
        #[arg(long)]
        approve: Vec<String>,
        #[arg(long)]
        approve_all: bool,
    },
    /// Apply deferred reviewer-gated corrections.
    Patch {
        #[arg(long)]
        approve: Vec<String>,
        #[arg(long)]
        approve_all: bool,
    },
    /// One full loop: plan, render, run, attribute, patch.
    Cycle {
        #[arg(long)]
        intent: Option<PathBuf>,
        #[arg(long)]
        skills: Option<PathBuf>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long = "inject")]
        injections: Vec<String>,
        #[arg(long)]
        approve: Vec<String>,
        #[arg(long)]
        approve_all: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context::new(&cli.workdir, cli.clock.as_deref(), cli.seed);
    let result = match cli.command {
        Command::Validate { intent } => ctx.validate(&intent),
        Command::Plan { skills, dag } => ctx.plan(skills.as_deref(), dag.as_deref()),
        Command::Render => ctx.render(),
        Command::Run {
            runner,
            injections,
            profile,
        } => ctx.run(runner, &injections, profile.as_deref()),
        Command::Attribute { approve, approve_all } => ctx.attribute(&commands::approvals(approve, approve_all)),
        Command::Patch { approve, approve_all } => ctx.patch(&commands::approvals(approve, approve_all)),
        Command::Cycle {
            intent,
            skills,
            profile,
            injections,
            approve,
            approve_all,
        } => ctx.cycle(
            intent.as_deref(),
            skills.as_deref(),
            profile.as_deref(),
            &injections,
            &commands::approvals(approve, approve_all),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Rejected(m) => eprintln!("rejected: {m}"),
                Failure::Input(m) => eprintln!("error: {m}"),
                Failure::Missing(m) => eprintln!("missing prerequisite: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
