//! Batch CLI for the pyrafuse toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pyrafuse::bundle;
use pyrafuse::error::Error;
use pyrafuse::features::FeatureKind;
use pyrafuse::pipeline::{
    self, build_codebook_from_images, evaluate, ingest_dataset, train_pipeline, PipelineConfig,
};
use pyrafuse::svm::KernelSpec;

#[derive(Parser)]
#[command(name = "pyrafuse", version, about = "Spatial-pyramid image classification with late fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    Phow,
    Phoc,
    Phog,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Phow => FeatureKind::Phow,
            FeatureArg::Phoc => FeatureKind::Phoc,
            FeatureArg::Phog => FeatureKind::Phog,
        }
    }
}

#[derive(Args)]
struct CommonParams {
    /// Highest pyramid level L
    #[arg(long, default_value_t = 2)]
    levels: u32,
    /// Visual vocabulary size V
    #[arg(long, default_value_t = 200)]
    words: usize,
    /// Dense sampling step in pixels
    #[arg(long, default_value_t = 8)]
    step: usize,
    /// SIFT patch side in pixels (multiple of 4)
    #[arg(long, default_value_t = 16)]
    patch: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Build a visual vocabulary from all images under a dataset directory
    BuildCodebook {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: CommonParams,
    },
    /// Train a full model: codebook, three SVM classifiers, fusion weights
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 60)]
        train_per_class: usize,
        #[arg(long, value_enum, default_value_t = KernelArg::Linear)]
        kernel: KernelArg,
        /// RBF kernel width (only with --kernel rbf)
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Fixed SVM box constraint; omit to select C by cross-validation
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: CommonParams,
    },
    /// Evaluate a trained model on the test half of a dataset
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// JSON report output path
        #[arg(long)]
        report: Option<PathBuf>,
        /// Confusion matrix CSV output path
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Classify a single image
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Print per-feature distributions and fusion weights
        #[arg(long)]
        explain: bool,
    },
    /// Extract one feature vector from an image as CSV
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum)]
        feature: FeatureArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::AtImage { source, .. } => exit_code_for(source),
        // internal invariant violations: these indicate a bug or a model
        // incompatible with its own configuration
        Error::DimensionMismatch { .. }
        | Error::LengthMismatch(..)
        | Error::PatchOutOfBounds { .. }
        | Error::LevelOutOfRange { .. }
        | Error::InvalidThresholds { .. }
        | Error::EmptyTrainingSet => 3,
        // everything else is bad input data
        _ => 2,
    }
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.clone(), source })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildCodebook { data, out, params } => {
            let config = PipelineConfig {
                levels: params.levels,
                words: params.words,
                step: params.step,
                patch: params.patch,
                seed: params.seed,
                ..Default::default()
            };
            let mut images = Vec::new();
            collect_images(&data, &mut images)?;
            if images.is_empty() {
                return Err(Error::NotADirectory(data));
            }
            images.sort();
            let codebook = build_codebook_from_images(&images, &config)?;
            bundle::save_codebook(&codebook, &config, &out)?;
            println!(
                "codebook: {} words from {} images, inertia {:.4} -> {}",
                codebook.words(),
                images.len(),
                codebook.inertia,
                out.display()
            );
            Ok(())
        }
        Command::Train { data, train_per_class, kernel, gamma, c, out, params } => {
            let config = PipelineConfig {
                levels: params.levels,
                words: params.words,
                step: params.step,
                patch: params.patch,
                seed: params.seed,
                kernel: match kernel {
                    KernelArg::Linear => KernelSpec::Linear,
                    KernelArg::Rbf => KernelSpec::Rbf { gamma },
                },
                c,
                train_per_class,
                ..Default::default()
            };
            let split = ingest_dataset(&data, train_per_class, config.seed)?;
            println!(
                "training on {} classes, {} images per class",
                split.classes.len(),
                train_per_class
            );
            let model = train_pipeline(&split, &config)?;
            bundle::save_model(&model, &out)?;
            println!(
                "fusion weights: phow={:.4} phoc={:.4} phog={:.4}",
                model.weights.a_phow, model.weights.a_phoc, model.weights.a_phog
            );
            println!("model -> {}", out.display());
            Ok(())
        }
        Command::Evaluate { model, data, report, confusion } => {
            let model = bundle::load_model(&model)?;
            let split = ingest_dataset(&data, model.config.train_per_class, model.config.seed)?;
            let eval = evaluate(&model, &split)?;
            println!("fused accuracy: {:.4}", eval.overall_accuracy);
            println!(
                "per-feature accuracy: phow={:.4} phoc={:.4} phog={:.4}",
                eval.phow_accuracy, eval.phoc_accuracy, eval.phog_accuracy
            );
            for (label, acc) in eval.confusion.labels.iter().zip(&eval.per_class_accuracy) {
                println!("  {label}: {acc:.4}");
            }
            if let Some(path) = report {
                write_text(&path, &eval.to_json())?;
                println!("report -> {}", path.display());
            }
            if let Some(path) = confusion {
                write_text(&path, &eval.confusion.to_csv())?;
                println!("confusion -> {}", path.display());
            }
            Ok(())
        }
        Command::Classify { model, image, explain } => {
            let model = bundle::load_model(&model)?;
            let (label, fused, per_feature) = pipeline::classify(&model, &image)?;
            println!("{label}");
            if explain {
                println!(
                    "weights: phow={:.4} phoc={:.4} phog={:.4}",
                    model.weights.a_phow, model.weights.a_phoc, model.weights.a_phog
                );
                for (name, pv) in ["phow", "phoc", "phog"].iter().zip(&per_feature) {
                    print!("{name}:");
                    for (cls, p) in model.class_labels.iter().zip(&pv.probs) {
                        print!(" {cls}={p:.4}");
                    }
                    println!();
                }
                print!("fused:");
                for (cls, p) in model.class_labels.iter().zip(&fused.probs) {
                    print!(" {cls}={p:.4}");
                }
                println!();
            }
            Ok(())
        }
        Command::Extract { image, feature, model, out } => {
            let model = bundle::load_model(&model)?;
            let fv = pipeline::extract_feature(&model, &image, feature.into())?;
            let line: Vec<String> = fv.values.iter().map(|v| v.to_string()).collect();
            write_text(&out, &(line.join(",") + "\n"))?;
            println!("{} values -> {}", fv.values.len(), out.display());
            Ok(())
        }
    }
}

fn collect_images(dir: &PathBuf, out: &mut Vec<PathBuf>) -> Result<(), Error> {
    if !dir.is_dir() {
        return Err(Error::NotADirectory(dir.clone()));
    }
    let entries =
        std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    for entry in entries {
        let path = entry.map_err(|source| Error::Io { path: dir.clone(), source })?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if matches!(
            path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
            Some("png") | Some("jpg") | Some("jpeg")
        ) {
            out.push(path);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a success, anything else a usage error
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
