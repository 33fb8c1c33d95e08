//! `novaclass eval` — confusion matrix and accuracy on a labeled file.

use std::path::PathBuf;

use clap::Args;
use novaclass::wdcnn::evaluate;

use super::{load_dataset_arg, load_model_arg, print_seed, print_wrote};
use crate::config::FileConfig;
use crate::reports::{confusion_text, export_reports, Artifacts};
use crate::CliError;

const CONFIG_KEYS: &[&str] = &["seed"];

#[derive(Args)]
pub struct EvalArgs {
    /// Model checkpoint to evaluate
    #[arg(long)]
    model: PathBuf,

    /// Labeled dataset file
    #[arg(long)]
    data: PathBuf,

    /// Seed to report (evaluation itself is deterministic)
    /// [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for the confusion-matrix exports (text + figure)
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Flat key=value config file (keys: seed)
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;
    let model = load_model_arg(&args.model)?;
    let ds = load_dataset_arg(&args.data)?;
    let (cm, accuracy) = evaluate(&model, &ds)?;

    print_seed(seed);
    println!("windows: {}", cm.total());
    println!("accuracy: {accuracy:.4}");
    println!("confusion matrix (rows = true class, columns = predicted):");
    print!("{}", confusion_text(&cm));

    if let Some(out_dir) = &args.out_dir {
        let artifacts = Artifacts {
            confusion: Some((&cm, &model.class_names)),
            ..Artifacts::default()
        };
        for path in export_reports(&artifacts, out_dir)? {
            print_wrote(&path);
        }
    }
    Ok(())
}
