use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use mfextreme::pipeline::{
    analyze_gap, build_snippets, evaluate, generate, report, train, ExperimentConfig, PipelineError, Run, TrainMode,
};
use serde_json::json;

/// Multi-fidelity extreme pitch estimation experiment.
#[derive(Debug, Parser)]
#[command(name = "mfextreme", version)]
struct Cli {
    /// Experiment config (JSON). Defaults to the built-in desk-scale experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `rng_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate wave records and paired low/high-fidelity motions.
    Generate,
    /// Compare fidelities, compute the coverage curve and choose k.
    AnalyzeGap,
    /// Cut training, validation and test snippets.
    BuildSnippets,
    /// Train a network.
    Train {
        #[arg(long, default_value = "snippet", value_parser = ["snippet", "base"])]
        mode: String,
    },
    /// Score methods on one sea state's test split (default: every sea state with a test split).
    Evaluate {
        #[arg(long)]
        label: Option<String>,
    },
    /// Collect results into report.json.
    Report,
    /// Print the effective config.
    ShowConfig,
}

/// `--config` wins; otherwise stages after `generate` reuse the run's frozen
/// `config.json` when there is one.
fn load_config(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let frozen = match (&cli.command, &cli.out) {
        (Command::Generate | Command::ShowConfig, _) => None,
        (_, Some(out)) => Some(out.join("config.json")).filter(|p| p.is_file()),
        (_, None) => Some(ExperimentConfig::default().output_dir.join("config.json")).filter(|p| p.is_file()),
    };
    let mut cfg = match (&cli.config, frozen) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(p)) => ExperimentConfig::load(&p)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value, PipelineError> {
    let cfg = load_config(cli)?;
    if let Command::ShowConfig = cli.command {
        return Ok(serde_json::to_value(&cfg)?);
    }
    let run = Run::new(cfg)?;
    Ok(match &cli.command {
        Command::Generate => {
            generate(&run)?;
            json!({ "stage": "generate", "run": run.dir })
        }
        Command::AnalyzeGap => serde_json::to_value(analyze_gap(&run)?)?,
        Command::BuildSnippets => json!({ "stage": "build-snippets", "k": build_snippets(&run)? }),
        Command::Train { mode } => serde_json::to_value(train(&run, mode.parse::<TrainMode>()?)?)?,
        Command::Evaluate { label } => {
            let labels: Vec<String> = match label {
                Some(l) => vec![l.clone()],
                None => run
                    .config
                    .sea_states
                    .iter()
                    .filter(|s| s.splits.test > 0)
                    .map(|s| s.label.clone())
                    .collect(),
            };
            let evals = labels
                .iter()
                .map(|l| evaluate(&run, l))
                .collect::<Result<Vec<_>, _>>()?;
            serde_json::to_value(evals)?
        }
        Command::Report => serde_json::to_value(report(&run)?)?,
        Command::ShowConfig => unreachable!(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({ "error": "config", "message": e.to_string() }));
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
