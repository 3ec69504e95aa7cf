use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use langtrack_cli::*;

#[derive(Parser)]
#[command(
    name = "langtrack",
    version,
    about = "Hierarchical graph tracker with text-guided training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one scalar setting, e.g. `--set epochs=5` or `--set synth.seed=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic sequences (detections, ground truth, annotations).
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a text-embedding fixture, or validate one with --check.
    Embed {
        /// Annotation files whose descriptions are encoded; the whole
        /// vocabulary when none are given.
        #[arg(long = "annotations")]
        annotations: Vec<PathBuf>,
        #[arg(long, default_value_t = 512)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, required_unless_present = "check")]
        out: Option<PathBuf>,
        /// Validate this fixture instead of writing one.
        #[arg(long, conflicts_with_all = ["annotations", "out"])]
        check: Option<PathBuf>,
    },
    /// Train a model on the train-* sequences of a data directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a detection file with a trained model.
    Track {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Not accepted: tracking uses no language data.
        #[arg(long, hide = true)]
        fixture: Option<PathBuf>,
    },
    /// Score a result file against ground truth.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Baseline versus guided training, evaluated in and across domains.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(c: &ConfigArgs) -> Result<langtrack::config::RunConfig> {
    resolve_config(c.config.as_deref(), &c.overrides)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { cfg, out } => {
            let names = cmd_gen(&resolve(&cfg)?, &out)?;
            println!("wrote {} sequences to {}", names.len(), out.display());
        }
        Command::Embed {
            annotations,
            dim,
            seed,
            out,
            check,
        } => {
            let n = match (&check, &out) {
                (Some(path), _) => cmd_embed(EmbedSource::Validate(path), dim, seed, path)?,
                (None, Some(out)) if annotations.is_empty() => {
                    cmd_embed(EmbedSource::Vocabulary, dim, seed, out)?
                }
                (None, Some(out)) => {
                    cmd_embed(EmbedSource::Annotations(&annotations), dim, seed, out)?
                }
                (None, None) => return Err(CliError::Usage("embed needs --out or --check".into())),
            };
            println!("{n} descriptions");
        }
        Command::Train {
            cfg,
            data,
            fixture,
            out,
        } => {
            let path = cmd_train(&resolve(&cfg)?, &data, &fixture, &out)?;
            println!("checkpoint {}", path.display());
        }
        Command::Track {
            cfg,
            checkpoint,
            detections,
            out,
            fixture,
        } => {
            if fixture.is_some() {
                return Err(CliError::Usage(
                    "track takes no --fixture: tracking does not use language data".into(),
                ));
            }
            let path = cmd_track(&resolve(&cfg)?, &checkpoint, &detections, &out)?;
            println!("result {}", path.display());
        }
        Command::Eval {
            cfg,
            gt,
            result,
            out,
        } => {
            let report = cmd_eval(&resolve(&cfg)?, &gt, &result, &out)?;
            print!("{}", report.to_key_value());
        }
        Command::Experiment { cfg, out } => {
            let outcome = cmd_experiment(&resolve(&cfg)?, &out)?;
            print!("{}", outcome.comparison_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
