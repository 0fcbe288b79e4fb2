//! `stdc` — synthesize a corpus, extract features, train the pipeline,
//! score utterances, and evaluate EER, all from manifests on disk.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stdc_core::pipeline::{
    cmd_eval, cmd_extract, cmd_score, cmd_synth, cmd_train, FeatureKind, PipelineConfig, SynthSpec,
};
use stdc_core::Subset;

#[derive(Parser)]
#[command(
    name = "stdc",
    about = "Spectra-temporal voice anti-spoofing feature pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Sdc,
    Stc,
    Stdc,
}

impl From<KindArg> for FeatureKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sdc => FeatureKind::Sdc,
            KindArg::Stc => FeatureKind::Stc,
            KindArg::Stdc => FeatureKind::Stdc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SubsetArg {
    Train,
    Dev,
    Eval,
    All,
}

impl SubsetArg {
    fn to_filter(self) -> Option<Subset> {
        match self {
            SubsetArg::Train => Some(Subset::Train),
            SubsetArg::Dev => Some(Subset::Dev),
            SubsetArg::Eval => Some(Subset::Eval),
            SubsetArg::All => None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bona-fide/spoof corpus with a manifest.
    Synth {
        /// Output directory for WAVs and manifest.csv.
        #[arg(long)]
        out: PathBuf,
        /// Number of utterances.
        #[arg(long, default_value_t = 400)]
        count: usize,
        /// Generation seed (overrides the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Fraction of each partial-spoof utterance that is substituted.
        #[arg(long, default_value_t = 0.35)]
        partial_fraction: f64,
        /// Optional config file (for the sample rate and seed default).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract features for manifest entries into a feature file.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Model directory (required for stc/stdc).
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
        /// Output feature file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the staged training pipeline and write model artifacts.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score one subset and write utt_id,score,label CSV.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Stdc)]
        kind: KindArg,
        #[arg(long, value_enum, default_value_t = SubsetArg::Eval)]
        subset: SubsetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score the dev and eval subsets and write EER reports and DET curves.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Stdc)]
        kind: KindArg,
        /// Report output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> stdc_core::Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli) -> stdc_core::Result<()> {
    match cli.command {
        Command::Synth {
            out,
            count,
            seed,
            partial_fraction,
            config,
        } => {
            let config = load_config(&config, seed)?;
            let spec = SynthSpec {
                count,
                seed: config.seed,
                sample_rate: config.sample_rate,
                partial_fraction,
            };
            let corpus = cmd_synth(&out, &spec)?;
            println!(
                "wrote {} utterances and manifest.csv to {}",
                corpus.len(),
                out.display()
            );
        }
        Command::Extract {
            manifest,
            config,
            kind,
            models,
            subset,
            out,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            let models = models.or_else(|| config.model_dir.clone());
            let count = cmd_extract(
                &manifest,
                &config,
                kind.into(),
                models.as_deref(),
                subset.to_filter(),
                &out,
            )?;
            println!("wrote {count} vectors to {}", out.display());
        }
        Command::Train {
            manifest,
            config,
            out,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            let summary = cmd_train(&manifest, &config, &out)?;
            println!(
                "trained on {} utterances ({} augmented for balance)",
                summary.n_train_items, summary.n_augmented
            );
            println!(
                "stage 2 loss {:.4} -> {:.4}; autoencoder loss {:.4} -> {:.4}",
                summary.stage2_epoch_losses.first().unwrap_or(&f64::NAN),
                summary.stage2_epoch_losses.last().unwrap_or(&f64::NAN),
                summary.autoencoder_epoch_losses.first().unwrap_or(&f64::NAN),
                summary.autoencoder_epoch_losses.last().unwrap_or(&f64::NAN),
            );
            println!("model artifacts written to {}", out.display());
        }
        Command::Score {
            manifest,
            config,
            models,
            kind,
            subset,
            out,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            let subset = subset.to_filter().unwrap_or(Subset::Eval);
            let records = cmd_score(&manifest, &config, &models, kind.into(), subset, &out)?;
            println!("wrote {} scores to {}", records.len(), out.display());
        }
        Command::Eval {
            manifest,
            config,
            models,
            kind,
            out,
            seed,
        } => {
            let config = load_config(&config, seed)?;
            let reports = cmd_eval(&manifest, &config, &models, kind.into(), &out)?;
            for (subset, report) in &reports {
                println!(
                    "{subset}: eer {:.4} accuracy {:.4} (threshold {:.4})",
                    report.eer, report.accuracy, report.threshold_at_eer
                );
            }
            println!("reports written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stdc: error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
