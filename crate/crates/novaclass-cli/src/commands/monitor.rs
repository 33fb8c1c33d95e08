//! `novaclass monitor` — replay a stream file through the monitoring state
//! machine.

use std::path::PathBuf;

use clap::Args;
use novaclass::data::{stream_replay, ReplayOrder};
use novaclass::novelty::{monitor_loop, write_event_log, MonitorConfig, NoveltyProbeConfig};
use novaclass::wdcnn::{save_model, TrainConfig};

use super::{load_dataset_arg, load_model_arg, print_seed, print_wrote};
use crate::config::FileConfig;
use crate::CliError;

const CONFIG_KEYS: &[&str] = &["seed", "order", "epochs"];

#[derive(Args)]
pub struct MonitorArgs {
    /// Model checkpoint the monitor starts from
    #[arg(long)]
    model: PathBuf,

    /// Stream file to replay (an ordinary dataset file; labels stay hidden
    /// from the model)
    #[arg(long)]
    stream: PathBuf,

    /// Known labeled dataset backing probes and retraining
    #[arg(long)]
    base: PathBuf,

    /// Master seed; probe and retrain seeds are drawn from it
    /// [default: 42, or NOVACLASS_SEED if set]
    #[arg(long)]
    seed: Option<u64>,

    /// Replay order: sequential, or shuffle (seeded by --seed)
    /// [default: sequential]
    #[arg(long)]
    order: Option<String>,

    /// Event log output [default: events.log]
    #[arg(long)]
    log: Option<PathBuf>,

    /// Final model checkpoint output [default: monitor-final.ckpt]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Retraining epochs [default: 60]
    #[arg(long)]
    epochs: Option<usize>,

    /// Flat key=value config file (keys: seed, order, epochs)
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: MonitorArgs) -> Result<(), CliError> {
    let cfg = FileConfig::load(args.config.as_deref(), CONFIG_KEYS)?;
    let seed = cfg.resolve_seed(args.seed)?;
    let order_raw = cfg.resolve(args.order, "order", "sequential".to_string())?;
    let order = match order_raw.as_str() {
        "sequential" => ReplayOrder::Sequential,
        "shuffle" => ReplayOrder::SeededShuffle(seed),
        other => {
            return Err(CliError::Usage(format!(
                "--order must be sequential or shuffle, not {other:?}"
            )))
        }
    };
    let epochs = cfg.resolve(args.epochs, "epochs", 60)?;
    let log_path = args.log.unwrap_or_else(|| PathBuf::from("events.log"));
    let out_path = args
        .out
        .unwrap_or_else(|| PathBuf::from("monitor-final.ckpt"));

    let model = load_model_arg(&args.model)?;
    let base = load_dataset_arg(&args.base)?;
    let replay = stream_replay::<f32>(&args.stream, order).map_err(|e| match e {
        novaclass::Error::Io(source) => CliError::Io {
            path: args.stream.clone(),
            source,
        },
        other => CliError::Lib(other),
    })?;

    let monitor_cfg = MonitorConfig {
        base,
        probe: NoveltyProbeConfig::default(),
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        seed,
    };

    print_seed(seed);
    let outcome = monitor_loop(model, replay.map(|s| s.window), &monitor_cfg)?;
    println!("windows: {}", outcome.windows_seen);
    println!("events: {}", outcome.events.len());
    println!("classes: {}", outcome.model.num_classes());

    write_event_log(&outcome.events, &log_path)?;
    print_wrote(&log_path);
    save_model(&outcome.model, &out_path)?;
    print_wrote(&out_path);
    Ok(())
}
