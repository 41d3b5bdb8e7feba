use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand};
use contact_core::bench::{
    evaluate_combination, load_dataset, random_baseline, render_table, BenchmarkReport, DEFAULT_RUNS,
};
use contact_core::par::Execution;
use contact_core::prompts::PromptSet;
use contact_core::Predictor;

use crate::backends::{build_llm, build_vision, LlmSpec, VisionSpec};
use crate::config::{LlmSettings, VisionSettings};

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Evaluate one backend combination on a dataset.
    Run(RunArgs),
    /// Uniform random point baseline.
    Random(RandomArgs),
    /// Print saved reports as a table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `scripted:<file>` or `openai:<model>`.
    #[arg(long)]
    pub llm: LlmSpec,
    /// `fixture:<dir>` or a segmentation URL.
    #[arg(long)]
    pub seg: VisionSpec,
    /// `fixture:<dir>` or a detection URL.
    #[arg(long)]
    pub det: VisionSpec,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row label; defaults to the backend specs.
    #[arg(long)]
    pub label: Option<String>,
    /// Chat-completions URL for `openai:` backends.
    #[arg(long, env = "CONTACT_LLM_ENDPOINT")]
    pub llm_endpoint: Option<String>,
    #[arg(long, env = "CONTACT_LLM_API_KEY", hide_env_values = true)]
    pub llm_api_key: Option<String>,
    /// JSON prompt set replacing the built-in prompts.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Evaluate records one at a time.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more report files; one table row each.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn finish(report: &BenchmarkReport, out: Option<&PathBuf>) -> anyhow::Result<String> {
    if let Some(path) = out {
        report.save(path)?;
    }
    if report.partial {
        tracing::warn!(
            runs = report.runs,
            requested = report.runs_requested,
            reason = report.abort_reason.as_deref().unwrap_or_default(),
            "partial report"
        );
    }
    Ok(render_table(std::slice::from_ref(report)))
}

/// Runs a bench subcommand and returns the table to print.
pub fn run(command: BenchCommand) -> anyhow::Result<String> {
    match command {
        BenchCommand::Run(args) => {
            let records = load_dataset(&args.manifest)?;
            let llm = build_llm(&LlmSettings {
                spec: args.llm.clone(),
                endpoint: args.llm_endpoint.clone(),
                api_key: args.llm_api_key.clone(),
                ..LlmSettings::default()
            })?;
            let vision = build_vision(&VisionSettings {
                segmentation: args.seg.clone(),
                detection: args.det.clone(),
                ..VisionSettings::default()
            })?;
            let prompts = match &args.prompts {
                Some(path) => PromptSet::from_file(path).with_context(|| format!("prompts {}", path.display()))?,
                None => PromptSet::default(),
            };
            let mode = execution(args.sequential);
            let predictor =
                Predictor::new(llm, vision, &prompts.analyzer, prompts.relative.clone())?.with_execution(mode);
            let label = args
                .label
                .clone()
                .unwrap_or_else(|| format!("{} + {} + {}", args.llm, args.det, args.seg));
            let report = evaluate_combination(&predictor, &label, &records, args.runs, args.seed, mode)?;
            finish(&report, args.out.as_ref())
        }
        BenchCommand::Random(args) => {
            let records = load_dataset(&args.manifest)?;
            let report = random_baseline(&records, args.runs, args.seed, Execution::default())?;
            finish(&report, args.out.as_ref())
        }
        BenchCommand::Report(args) => {
            let reports = args
                .inputs
                .iter()
                .map(|p| BenchmarkReport::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(render_table(&reports))
        }
    }
}
