//! `novaclass probe` — decide whether suspect windows are a known fault or
//! a novel class.

use std::path::PathBuf;

use clap::Args;
use novaclass::novelty::{novelty_probe_with, NoveltyKind, NoveltyProbeConfig};

use super::{load_dataset_arg, load_model_arg, print_seed, print_wrote};
use crate::config::FileConfig;
use crate::reports::{export_reports, Artifacts};
use crate::CliError;

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "perplexity",
    "tsne-iterations",
    "restarts",
    "uniform-reference",
];

#[derive(Args)]
pub struct ProbeArgs {
    /// Trained model checkpoint
    #[arg(long)]
    model: PathBuf,

    /// Dataset file holding the suspect windows (labels are ignored;
    /// the probe expects exactly 100 windows)
    #[arg(long)]
    new: PathBuf,

    /// Known labeled dataset the 500 reference windows are drawn from
    #[arg(long = "ref")]
    reference: PathBuf,

    /// Master seed for the reference draw, t-SNE, and k-means
    /// [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for the SSE-curve and embedding exports (text + figures)
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// t-SNE perplexity [default: 30]
    #[arg(long)]
    perplexity: Option<f64>,

    /// t-SNE gradient-descent iterations [default: 1000]
    #[arg(long)]
    tsne_iterations: Option<usize>,

    /// k-means restarts per candidate k [default: 10]
    #[arg(long)]
    restarts: Option<usize>,

    /// Draw the reference windows uniformly at random instead of
    /// stratified per class
    #[arg(long)]
    uniform_reference: bool,

    /// Flat key=value config file (keys: seed, perplexity,
    /// tsne-iterations, restarts, uniform-reference)
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: ProbeArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;

    let mut probe_cfg = NoveltyProbeConfig::default();
    probe_cfg.tsne.perplexity =
        cfg.resolve(args.perplexity, "perplexity", probe_cfg.tsne.perplexity)?;
    probe_cfg.tsne.iterations = cfg.resolve(
        args.tsne_iterations,
        "tsne-iterations",
        probe_cfg.tsne.iterations,
    )?;
    probe_cfg.kmeans.restarts =
        cfg.resolve(args.restarts, "restarts", probe_cfg.kmeans.restarts)?;
    if args.uniform_reference || cfg.get::<bool>("uniform-reference")?.unwrap_or(false) {
        probe_cfg.stratified_reference = false;
    }

    let model = load_model_arg(&args.model)?;
    let new_ds = load_dataset_arg(&args.new)?;
    let reference = load_dataset_arg(&args.reference)?;

    print_seed(seed);
    let decision = novelty_probe_with(&model, new_ds.windows(), &reference, &probe_cfg, seed)?;
    println!("estimated_clusters: {}", decision.estimated_cluster_count);
    match decision.kind {
        NoveltyKind::NovelClass => println!("decision: novel_class"),
        NoveltyKind::KnownClass(label) => {
            let name = model
                .class_names
                .get(label)
                .cloned()
                .unwrap_or_else(|| format!("class_{label}"));
            println!("decision: known_class label={label} name={name}");
        }
    }

    if let Some(out_dir) = &args.out_dir {
        let artifacts = Artifacts {
            sse: Some((&decision.sse_curve, Some(decision.estimated_cluster_count))),
            embedding: Some((&decision.embedding, &model.class_names)),
            ..Artifacts::default()
        };
        for path in export_reports(&artifacts, out_dir)? {
            print_wrote(&path);
        }
    }
    Ok(())
}
