//! `novaclass gen` — write a synthetic vibration dataset file.

use std::path::PathBuf;

use clap::Args;
use novaclass::data::{
    default_class_specs, generate_synthetic_dataset, save_dataset, ClassSpec,
    DEFAULT_TEST_COUNTS, DEFAULT_TRAIN_COUNTS,
};

use super::{parse_usize_list, print_seed, print_wrote};
use crate::config::FileConfig;
use crate::CliError;

const CONFIG_KEYS: &[&str] = &["seed", "classes", "counts", "split"];

#[derive(Args)]
pub struct GenArgs {
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,

    /// Master seed [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated class labels to generate [default: 0,1,2,3,4,5]
    #[arg(long)]
    classes: Option<String>,

    /// Comma-separated per-class window counts aligned with --classes
    /// [default: the standard counts for the chosen --split]
    #[arg(long)]
    counts: Option<String>,

    /// Which built-in count table to default to: train or test
    /// [default: train]
    #[arg(long)]
    split: Option<String>,

    /// Flat key=value config file (keys: seed, classes, counts, split)
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;
    let classes_raw = cfg.resolve(args.classes, "classes", "0,1,2,3,4,5".to_string())?;
    let split = cfg.resolve(args.split, "split", "train".to_string())?;

    let all_specs = default_class_specs();
    let labels = parse_usize_list(&classes_raw, "classes")?;
    for (i, &label) in labels.iter().enumerate() {
        if label >= all_specs.len() {
            return Err(CliError::Usage(format!(
                "--classes entry {label} has no generator recipe (labels 0..{})",
                all_specs.len() - 1
            )));
        }
        if labels[..i].contains(&label) {
            return Err(CliError::Usage(format!("--classes repeats label {label}")));
        }
    }

    let default_counts: &[usize; 6] = match split.as_str() {
        "train" => &DEFAULT_TRAIN_COUNTS,
        "test" => &DEFAULT_TEST_COUNTS,
        other => {
            return Err(CliError::Usage(format!(
                "--split must be train or test, not {other:?}"
            )))
        }
    };
    let counts: Vec<usize> = match &args.counts {
        Some(raw) => parse_usize_list(raw, "counts")?,
        None => match cfg.get::<String>("counts")? {
            Some(raw) => parse_usize_list(&raw, "counts")?,
            None => labels.iter().map(|&l| default_counts[l]).collect(),
        },
    };
    if counts.len() != labels.len() {
        return Err(CliError::Usage(format!(
            "--counts has {} entries for {} classes",
            counts.len(),
            labels.len()
        )));
    }

    let specs: Vec<ClassSpec> = labels.iter().map(|&l| all_specs[l].clone()).collect();
    let ds = generate_synthetic_dataset::<f32>(&specs, &counts, seed)?;
    save_dataset(&ds, &args.out)?;

    print_seed(seed);
    print_wrote(&args.out);
    println!("windows: {}", ds.len());
    for (spec, count) in specs.iter().zip(&counts) {
        println!("  class {} ({}): {}", spec.label, spec.name, count);
    }
    Ok(())
}
