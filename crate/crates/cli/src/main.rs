use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gagsl::experiment::{
    emit_plot_data, run_attack_sweep, run_experiment, self_check, ExperimentConfig, Stage,
    StageError,
};
use gagsl::harness::{AttackKind, MetricsReport};

#[derive(Debug, Parser)]
#[command(
    name = "gagsl",
    version,
    about = "Graph structure learning with global augmentations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every trial of an experiment and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the base seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compare the model with the GCN baseline across attack rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        attack: AttackKind,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write heatmap and histogram data for a completed run.
    PlotData { run_dir: PathBuf },
    /// Run the gradient and closed-form invariant checks.
    Check,
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, StageError> {
    let mut config = ExperimentConfig::load(path).map_err(|source| StageError {
        stage: Stage::Config,
        trial: None,
        source,
    })?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if out.is_some() {
        config.output = out;
    }
    Ok(config)
}

fn output_dir(config: &ExperimentConfig, prefix: &str) -> PathBuf {
    config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{prefix}-{}", &config.hash()[..12])))
}

fn summary(name: &str, r: &MetricsReport) {
    println!(
        "{name:<6} auc {:.4} ± {:.4}  f1-macro {:.4} ± {:.4}  f1-micro {:.4} ± {:.4}  ({} trials)",
        r.auc.mean,
        r.auc.std,
        r.f1_macro.mean,
        r.f1_macro.std,
        r.f1_micro.mean,
        r.f1_micro.std,
        r.trials
    );
}

fn run(command: Command) -> Result<(), StageError> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            trials,
        } => {
            let mut config = load_config(&config, seed, out)?;
            if let Some(t) = trials {
                config.trials = t;
            }
            let dir = output_dir(&config, "run");
            let result = run_experiment(&config, &dir)?;
            summary("gagsl", &result.gagsl);
            if let Some(b) = &result.baseline {
                summary("gcn", b);
            }
            println!("run directory: {}", dir.display());
        }
        Command::Sweep {
            config,
            attack,
            rates,
            seed,
            out,
        } => {
            let config = load_config(&config, seed, out)?;
            let dir = output_dir(&config, &format!("sweep-{}", attack.as_str()));
            let report = run_attack_sweep(&config, attack, &rates, &dir)?;
            print!("{}", report.to_csv());
            println!("sweep directory: {}", dir.display());
        }
        Command::PlotData { run_dir } => {
            let files = emit_plot_data(&run_dir)?;
            for f in files
                .heatmaps
                .iter()
                .chain(std::iter::once(&files.histogram))
            {
                println!("{}", f.display());
            }
        }
        Command::Check => unreachable!("handled by main"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAGSL_LOG", "info")).init();
    let cli = Cli::parse();
    if let Command::Check = cli.command {
        let outcomes = self_check();
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        for o in &outcomes {
            println!(
                "{} {}: {}",
                if o.passed { "ok  " } else { "FAIL" },
                o.name,
                o.detail
            );
        }
        return if failed == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        };
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
