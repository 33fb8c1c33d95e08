//! One module per subcommand plus the small parsing helpers they share.

pub mod eval;
pub mod gen;
pub mod monitor;
pub mod plot;
pub mod probe;
pub mod train;

use std::path::{Path, PathBuf};

use novaclass::data::{load_dataset, LabeledDataset};
use novaclass::wdcnn::{load_model, Model};

use crate::CliError;

/// Parses a comma-separated list of non-negative integers; `what` names
/// the flag in error messages.
pub fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>, CliError> {
    let mut values = Vec::new();
    for field in raw.split(',') {
        let field = field.trim();
        values.push(field.parse().map_err(|e| {
            CliError::Usage(format!("--{what} entry {field:?}: {e}"))
        })?);
    }
    if values.is_empty() {
        return Err(CliError::Usage(format!("--{what} must not be empty")));
    }
    Ok(values)
}

/// Every command announces the seed it resolved before doing any work.
pub fn print_seed(seed: u64) {
    println!("seed: {seed}");
}

pub fn print_wrote(path: &Path) {
    println!("wrote: {}", path.display());
}

/// `load_dataset` with the file name folded into the error.
pub fn load_dataset_arg(path: &PathBuf) -> Result<LabeledDataset<f32>, CliError> {
    load_dataset(path).map_err(|e| match e {
        novaclass::Error::Io(source) => CliError::Io {
            path: path.clone(),
            source,
        },
        other => CliError::Lib(other),
    })
}

/// `load_model` with the file name folded into the error.
pub fn load_model_arg(path: &PathBuf) -> Result<Model<f32>, CliError> {
    load_model(path).map_err(|e| match e {
        novaclass::Error::Io(source) => CliError::Io {
            path: path.clone(),
            source,
        },
        other => CliError::Lib(other),
    })
}
