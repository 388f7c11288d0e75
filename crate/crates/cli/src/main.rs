use clap::{Parser, Subcommand};
use promo_bandit::experiment::{self, ExperimentConfig, Variant};
use promo_bandit::simulator::ScenarioKind;
use promo_bandit::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "promo-bandit", version, about = "Contextual Thompson-sampling bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write relative-gain files of each experiment directory over a baseline.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Defaults to `<baseline>/compare`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export `run_index,feature_name,weight` for every run of an experiment.
    ExportWeights {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a default config for a scenario and variant.
    InitConfig {
        #[arg(long, default_value = "mixed")]
        scenario: String,
        #[arg(long, default_value = "proposed")]
        variant: String,
        #[arg(long, default_value = "experiment")]
        output: PathBuf,
    },
}

fn unrecognised(s: &str) -> Error {
    Error::InvalidConfig(format!("unrecognised value `{s}`"))
}

fn execute(cli: Cli) -> Result<serde_json::Value, Error> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let a = experiment::run_experiment(&cfg)?;
            Ok(serde_json::json!({
                "status": "ok",
                "output_dir": a.dir,
                "runs": a.runs.len(),
            }))
        }
        Command::Compare { baseline, dirs, out } => {
            let out = out.unwrap_or_else(|| baseline.join("compare"));
            let c = experiment::compare(&baseline, &dirs, &out)?;
            Ok(serde_json::json!({ "status": "ok", "files": c.files }))
        }
        Command::ExportWeights { dir, out } => {
            let path = experiment::export_weights(&dir, out.as_deref())?;
            Ok(serde_json::json!({ "status": "ok", "file": path }))
        }
        Command::InitConfig {
            scenario,
            variant,
            output,
        } => {
            let kind: ScenarioKind =
                serde_json::from_value(scenario.clone().into()).map_err(|_| unrecognised(&scenario))?;
            let variant: Variant =
                serde_json::from_value(variant.clone().into()).map_err(|_| unrecognised(&variant))?;
            let cfg = ExperimentConfig {
                scenario: experiment::ScenarioSpec::canned(kind),
                variant,
                output_dir: output,
                ..ExperimentConfig::default()
            };
            Ok(serde_json::to_value(cfg)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = serde_json::json!({ "status": "error", "kind": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            ExitCode::from(match e {
                Error::InvalidConfig(_) | Error::Json(_) => 2,
                _ => 1,
            })
        }
    }
}
