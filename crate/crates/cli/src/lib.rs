//! File-based pipeline stages behind the `detect` binary.

pub mod config;
pub mod manifest;
pub mod report;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),
    #[error("incomplete run: {0}")]
    IncompleteRun(String),
    #[error("stage failed: {0:#}")]
    StageFailure(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageName {
    Ingest,
    ExtractClasses,
    Filter,
    Generate,
    Metrics,
    Compare,
    Prune,
    Train,
    Evaluate,
    Explain,
    Report,
    /// Every stage in order.
    All,
}

impl StageName {
    pub const PIPELINE: [StageName; 11] = [
        StageName::Ingest,
        StageName::ExtractClasses,
        StageName::Filter,
        StageName::Generate,
        StageName::Metrics,
        StageName::Compare,
        StageName::Prune,
        StageName::Train,
        StageName::Evaluate,
        StageName::Explain,
        StageName::Report,
    ];

    pub fn dir(self) -> &'static str {
        match self {
            StageName::Ingest => "ingest",
            StageName::ExtractClasses => "extract-classes",
            StageName::Filter => "filter",
            StageName::Generate => "generate",
            StageName::Metrics => "metrics",
            StageName::Compare => "compare",
            StageName::Prune => "prune",
            StageName::Train => "train",
            StageName::Evaluate => "evaluate",
            StageName::Explain => "explain",
            StageName::Report => "report",
            StageName::All => "all",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "detect", version, about = "Detect LLM-generated Python code from software metrics")]
pub struct Args {
    #[arg(value_enum)]
    pub stage: StageName,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated model kinds.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub sample: Option<usize>,
}

impl Args {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            run_dir: self.run_dir.clone(),
            seed: self.seed,
            alpha: self.alpha,
            ratio: self.ratio,
            k: self.k,
            models: self.models.clone(),
            sample: self.sample,
        }
    }
}

pub fn run_stage(stage: StageName, cfg: &RunConfig) -> Result<(), CliError> {
    match stage {
        StageName::All => {
            for s in StageName::PIPELINE {
                log::info!("stage {}", s.dir());
                run_stage(s, cfg)?;
            }
            Ok(())
        }
        StageName::Ingest => stages::ingest(cfg),
        StageName::ExtractClasses => stages::extract_classes(cfg),
        StageName::Filter => stages::filter(cfg),
        StageName::Generate => stages::generate(cfg),
        StageName::Metrics => stages::metrics(cfg),
        StageName::Compare => stages::compare(cfg),
        StageName::Prune => stages::prune(cfg),
        StageName::Train => stages::train(cfg),
        StageName::Evaluate => stages::evaluate(cfg),
        StageName::Explain => stages::explain(cfg),
        StageName::Report => report::report(cfg),
    }
}

/// Parses `argv`, runs the stage and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::load(&args.config, &args.overrides()).and_then(|cfg| run_stage(args.stage, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
