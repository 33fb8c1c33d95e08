//! `novaclass train` — fit the classifier on a dataset file.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use novaclass::wdcnn::{
    build_model, kfold_cross_validate, save_model, train, ArchitectureConfig, EpochStats,
    TrainConfig,
};

use super::{load_dataset_arg, parse_usize_list, print_seed, print_wrote};
use crate::config::FileConfig;
use crate::reports::write_file;
use crate::CliError;

const CONFIG_KEYS: &[&str] = &[
    "seed", "classes", "epochs", "batch-size", "val-fraction", "patience", "dropout", "cv",
];

#[derive(Args)]
pub struct TrainArgs {
    /// Training dataset file
    #[arg(long)]
    data: PathBuf,

    /// Output model checkpoint
    #[arg(long)]
    out: PathBuf,

    /// Master seed for initialization, shuffling, and dropout
    /// [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Keep only these labels, e.g. 0,1,2,3,4 to hold out a sixth class
    /// [default: every label in the file]
    #[arg(long)]
    classes: Option<String>,

    /// Training epochs [default: 60]
    #[arg(long)]
    epochs: Option<usize>,

    /// Mini-batch size [default: 64]
    #[arg(long)]
    batch_size: Option<usize>,

    /// Fraction of windows held out for validation, in [0, 1) [default: 0.1]
    #[arg(long)]
    val_fraction: Option<f64>,

    /// Early-stopping patience in epochs; 0 disables [default: 5]
    #[arg(long)]
    patience: Option<usize>,

    /// Dropout rate in [0, 1) [default: 0.5]
    #[arg(long)]
    dropout: Option<f64>,

    /// Per-epoch history file [default: <out with extension history.csv>]
    #[arg(long)]
    history: Option<PathBuf>,

    /// Also run stratified cross-validation with this many folds and write
    /// the fold table next to the checkpoint
    #[arg(long)]
    cv: Option<usize>,

    /// Flat key=value config file (keys: seed, classes, epochs,
    /// batch-size, val-fraction, patience, dropout, cv)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn history_text(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for e in history {
        let fmt_opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            fmt_opt(e.val_loss),
            fmt_opt(e.val_accuracy)
        )
        .unwrap();
    }
    out
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;
    let epochs = cfg.resolve(args.epochs, "epochs", 60)?;
    let batch_size = cfg.resolve(args.batch_size, "batch-size", 64)?;
    let val_fraction = cfg.resolve(args.val_fraction, "val-fraction", 0.1)?;
    let patience = cfg.resolve(args.patience, "patience", 5)?;
    let dropout = cfg.resolve(args.dropout, "dropout", 0.5)?;
    let folds = match args.cv {
        Some(f) => Some(f),
        None => cfg.get::<usize>("cv")?,
    };

    let mut ds = load_dataset_arg(&args.data)?;
    if let Some(raw) = &args.classes {
        ds = ds.subset_by_labels(&parse_usize_list(raw, "classes")?);
    } else if let Some(raw) = cfg.get::<String>("classes")? {
        ds = ds.subset_by_labels(&parse_usize_list(&raw, "classes")?);
    }
    let Some(&max_label) = ds.labels().iter().max() else {
        return Err(CliError::Usage(
            "no windows left to train on after --classes filtering".into(),
        ));
    };
    let num_classes = max_label + 1;

    let arch = ArchitectureConfig {
        dropout_rate: dropout,
        ..ArchitectureConfig::default_for_classes(num_classes)
    };
    let mut model = build_model::<f32>(&arch, seed)?;
    model.class_names = ds.class_names()[..num_classes].to_vec();

    let train_cfg = TrainConfig {
        epochs,
        batch_size,
        seed,
        patience: if patience == 0 { None } else { Some(patience) },
        val_fraction,
        ..TrainConfig::default()
    };

    print_seed(seed);
    println!(
        "training on {} windows, {num_classes} classes, {} parameters",
        ds.len(),
        model.param_count()
    );
    let (trained, history) = train(model, &ds, &train_cfg)?;
    for e in &history {
        log::info!(
            "epoch {} loss {:.4} acc {:.4} val_acc {:?}",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            e.val_accuracy
        );
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "epochs run: {} (final train accuracy {:.4})",
        history.len(),
        last.train_accuracy
    );
    if let Some(best) = history.iter().filter_map(|e| e.val_accuracy).fold(None, |m: Option<f64>, v| {
        Some(m.map_or(v, |m| m.max(v)))
    }) {
        println!("best validation accuracy: {best:.4}");
    }

    save_model(&trained, &args.out)?;
    print_wrote(&args.out);

    let history_path = args
        .history
        .unwrap_or_else(|| args.out.with_extension("history.csv"));
    write_file(&history_path, &history_text(&history))?;
    print_wrote(&history_path);

    if let Some(folds) = folds {
        let report = kfold_cross_validate(&ds, folds, &arch, &train_cfg)?;
        let cv_path = args.out.with_extension("cv.csv");
        write_file(&cv_path, &report.to_string())?;
        print_wrote(&cv_path);
        print!("{report}");
    }
    Ok(())
}
