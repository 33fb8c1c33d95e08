//! Folding a confirmed novel class back into the classifier.

use crate::data::{LabeledDataset, Window};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::wdcnn::{
    augment_output_layer, evaluate, kfold_cross_validate, train, ConfusionMatrix,
    CrossValidationReport, Model, TrainConfig,
};

/// How many samples of a new class must be collected before retraining.
///
/// The rule keeps the widened dataset balanced: the threshold is the median
/// of the per-class window counts already in `base` (for an even number of
/// classes, the mean of the two middle counts, rounded up).
pub fn retrain_sample_threshold<F: Real>(base: &LabeledDataset<F>) -> usize {
    let mut counts = vec![0usize; base.num_classes()];
    for &l in base.labels() {
        counts[l] += 1;
    }
    counts.sort_unstable();
    let n = counts.len();
    if n % 2 == 1 {
        counts[n / 2]
    } else {
        // ceiling of the midpoint mean: half a window still needs a window
        (counts[n / 2 - 1] + counts[n / 2]).div_ceil(2)
    }
}

/// Widens the model with one new output class and retrains it.
///
/// The new class takes the next free label (`model.num_classes()`); existing
/// labels and class names are untouched. Returns the retrained model, its
/// confusion matrix on the combined dataset, and a 5-fold cross-validation
/// report for the widened architecture.
///
/// Fails with [`Error::NeedsMoreData`] when fewer new windows are supplied
/// than [`retrain_sample_threshold`] demands.
pub fn integrate_new_class<F: Real>(
    model: &Model<F>,
    base: &LabeledDataset<F>,
    new_class_windows: &[Window<F>],
    cfg: &TrainConfig,
) -> Result<(Model<F>, ConfusionMatrix, CrossValidationReport)> {
    if base.num_classes() != model.num_classes() {
        return Err(Error::invalid_argument(format!(
            "base dataset has {} classes but the model has {}",
            base.num_classes(),
            model.num_classes()
        )));
    }
    let required = retrain_sample_threshold(base);
    let available = new_class_windows.len();
    if available < required {
        return Err(Error::NeedsMoreData {
            required,
            available,
            shortfall: required - available,
        });
    }

    let new_label = model.num_classes();
    let augmented = augment_output_layer(model);

    let mut combined = base.clone();
    let additions = LabeledDataset::new(
        new_class_windows.to_vec(),
        vec![new_label; new_class_windows.len()],
        augmented.class_names.clone(),
    )?;
    combined.extend_from(&additions);

    let arch = augmented.config.clone();
    let (retrained, _history) = train(augmented, &combined, cfg)?;
    let (confusion, _accuracy) = evaluate(&retrained, &combined)?;
    let report = kfold_cross_validate(&combined, 5, &arch, cfg)?;
    Ok((retrained, confusion, report))
}
