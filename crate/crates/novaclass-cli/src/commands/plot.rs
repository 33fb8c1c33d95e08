//! `novaclass plot` — re-render text exports as SVG figures.

use std::path::PathBuf;

use clap::Args;
use novaclass::cluster::{detect_knee, load_sse_curve};
use novaclass::tsne::load_embedding;

use super::{print_seed, print_wrote};
use crate::config::FileConfig;
use crate::reports::{confusion_svg, embedding_svg, read_confusion_text, sse_svg, write_file};
use crate::CliError;

const CONFIG_KEYS: &[&str] = &["seed"];

#[derive(Args)]
pub struct PlotArgs {
    /// Directory the figures are written into
    #[arg(long)]
    out_dir: PathBuf,

    /// Confusion-matrix text export to render as a heatmap
    #[arg(long)]
    confusion: Option<PathBuf>,

    /// SSE-curve text export to render as a line plot (the knee is
    /// re-detected for the marker)
    #[arg(long)]
    sse: Option<PathBuf>,

    /// Embedding text export to render as a scatter plot
    #[arg(long)]
    embedding: Option<PathBuf>,

    /// Seed to report (plotting is deterministic)
    /// [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Flat key=value config file (keys: seed)
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: PlotArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;
    if args.confusion.is_none() && args.sse.is_none() && args.embedding.is_none() {
        return Err(CliError::Usage(
            "plot needs at least one of --confusion, --sse, --embedding".into(),
        ));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    print_seed(seed);

    if let Some(path) = &args.confusion {
        let cm = read_confusion_text(path)?;
        let out = args.out_dir.join("confusion.svg");
        write_file(&out, &confusion_svg(&cm, &[]))?;
        print_wrote(&out);
    }
    if let Some(path) = &args.sse {
        let curve = load_sse_curve(path)?;
        let knee = detect_knee(&curve)?;
        let marker = (!knee.degenerate_curve).then_some(knee.k_star);
        let out = args.out_dir.join("sse.svg");
        write_file(&out, &sse_svg(&curve, marker))?;
        print_wrote(&out);
    }
    if let Some(path) = &args.embedding {
        let embedding = load_embedding::<f32>(path)?;
        let out = args.out_dir.join("embedding.svg");
        write_file(&out, &embedding_svg(&embedding, &[]))?;
        print_wrote(&out);
    }
    Ok(())
}
