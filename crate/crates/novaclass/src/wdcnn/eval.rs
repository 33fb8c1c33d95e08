//! Confusion-matrix evaluation and stratified K-fold cross-validation.

use std::fmt;

use rand::seq::SliceRandom;
use rand::RngExt;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;
use crate::wdcnn::model::{build_model, ArchitectureConfig, Model};
use crate::wdcnn::train::{train, TrainConfig};

/// Rows are true classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<usize>,
    num_classes: usize,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![0; num_classes * num_classes],
            num_classes,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class * self.num_classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> usize {
        self.counts[true_class * self.num_classes + predicted]
    }

    pub fn row_sum(&self, true_class: usize) -> usize {
        self.counts[true_class * self.num_classes..(true_class + 1) * self.num_classes]
            .iter()
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Trace over total: the fraction classified correctly.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: usize = (0..self.num_classes).map(|i| self.count(i, i)).sum();
        trace as f64 / total as f64
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.num_classes {
            for p in 0..self.num_classes {
                if p > 0 {
                    write!(f, "\t")?;
                }
                write!(f, "{}", self.count(t, p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Classifies every window of `dataset` and tallies the confusion matrix;
/// the second value is the overall accuracy.
pub fn evaluate<F: Real>(
    model: &Model<F>,
    dataset: &LabeledDataset<F>,
) -> Result<(ConfusionMatrix, f64)> {
    if dataset.is_empty() {
        return Err(Error::invalid_argument("cannot evaluate on an empty dataset"));
    }
    let classes = model.num_classes();
    if let Some(&bad) = dataset.labels().iter().find(|&&l| l >= classes) {
        return Err(Error::invalid_argument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (w, &label) in dataset.windows().iter().zip(dataset.labels()) {
        cm.record(label, model.predict(w)?.argmax());
    }
    let accuracy = cm.accuracy();
    Ok((cm, accuracy))
}

/// Per-fold accuracies with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidationReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

impl CrossValidationReport {
    pub fn from_accuracies(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len() as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / n;
        let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        CrossValidationReport {
            fold_accuracies,
            mean,
            std_dev: var.sqrt(),
        }
    }
}

impl fmt::Display for CrossValidationReport {
    /// Renders the fold table: one `fold,accuracy%` row per fold and an
    /// average row with mean ± standard deviation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fold,test_accuracy_percent")?;
        for (i, acc) in self.fold_accuracies.iter().enumerate() {
            writeln!(f, "{},{:.3}", i + 1, acc * 100.0)?;
        }
        writeln!(
            f,
            "average,{:.3} ± {:.3}",
            self.mean * 100.0,
            self.std_dev * 100.0
        )
    }
}

/// Splits indices into `folds` disjoint, class-stratified parts covering
/// `labels`. Same seed, same assignment.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = seeded(seed);
    stratified_folds_with_rng(labels, folds, &mut rng)
}

fn stratified_folds_with_rng(
    labels: &[usize],
    folds: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid_argument("need at least 2 folds"));
    }
    if labels.len() < folds {
        return Err(Error::invalid_argument(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, group) in by_class.iter().enumerate() {
        if !group.is_empty() && group.len() < folds {
            return Err(Error::invalid_argument(format!(
                "class {c} has only {} samples, fewer than {folds} folds",
                group.len()
            )));
        }
    }

    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); folds];
    // Rotate the fold that receives each class's remainder so fold sizes
    // stay within one of each other overall.
    let mut offset = 0usize;
    for group in by_class.iter_mut() {
        group.shuffle(rng);
        for (j, &idx) in group.iter().enumerate() {
            assignment[(offset + j) % folds].push(idx);
        }
        offset = (offset + group.len()) % folds;
    }
    Ok(assignment)
}

/// Trains and tests one model per fold: fold `i` is the test set, the rest
/// the training set, stratified by class. Reports per-fold accuracy and the
/// mean ± population standard deviation.
pub fn kfold_cross_validate<F: Real>(
    dataset: &LabeledDataset<F>,
    folds: usize,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
) -> Result<CrossValidationReport> {
    let mut master = seeded(cfg.seed);
    let assignment = stratified_folds_with_rng(dataset.labels(), folds, &mut master)?;

    let mut accuracies = Vec::with_capacity(folds);
    for fold in assignment.iter() {
        let build_seed: u64 = master.random();
        let train_seed: u64 = master.random();

        let in_fold: Vec<bool> = {
            let mut mask = vec![false; dataset.len()];
            for &i in fold {
                mask[i] = true;
            }
            mask
        };
        let (mut train_windows, mut train_labels) = (Vec::new(), Vec::new());
        let (mut test_windows, mut test_labels) = (Vec::new(), Vec::new());
        for (i, (w, &l)) in dataset.windows().iter().zip(dataset.labels()).enumerate() {
            if in_fold[i] {
                test_windows.push(w.clone());
                test_labels.push(l);
            } else {
                train_windows.push(w.clone());
                train_labels.push(l);
            }
        }
        let train_ds = LabeledDataset::new(
            train_windows,
            train_labels,
            dataset.class_names().to_vec(),
        )?;
        let test_ds =
            LabeledDataset::new(test_windows, test_labels, dataset.class_names().to_vec())?;

        let model = build_model::<F>(arch, build_seed)?;
        let fold_cfg = TrainConfig {
            seed: train_seed,
            ..cfg.clone()
        };
        let (trained, _) = train(model, &train_ds, &fold_cfg)?;
        let (_, accuracy) = evaluate(&trained, &test_ds)?;
        accuracies.push(accuracy);
    }
    Ok(CrossValidationReport::from_accuracies(accuracies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_class_specs, generate_synthetic_dataset};
    use crate::tensor::Tensor;

    /// A model whose output layer always votes for one class: zero weights
    /// everywhere except a large bias on the chosen logit.
    fn constant_predictor(classes: usize, winner: usize) -> Model<f32> {
        let mut model =
            build_model::<f32>(&ArchitectureConfig::default_for_classes(classes), 1).unwrap();
        model.output_layer.weights =
            Tensor::zeros(vec![classes, model.config.feature_units]);
        model.output_layer.bias = vec![0.0; classes];
        model.output_layer.bias[winner] = 10.0;
        model
    }

    fn balanced_dataset(per_class: usize, classes: usize, seed: u64) -> LabeledDataset<f32> {
        let specs = default_class_specs();
        generate_synthetic_dataset(&specs[..classes], &vec![per_class; classes], seed).unwrap()
    }

    #[test]
    fn constant_predictor_on_balanced_five_class_set_scores_point_two() {
        let ds = balanced_dataset(4, 5, 3);
        let model = constant_predictor(5, 0);
        let (cm, acc) = evaluate(&model, &ds).unwrap();
        assert_eq!(acc, 0.2);
        for t in 0..5 {
            assert_eq!(cm.count(t, 0), 4);
            assert_eq!(cm.row_sum(t), 4);
        }
    }

    #[test]
    fn perfect_predictions_give_diagonal_matrix() {
        // Evaluate each single-class slice with a predictor pinned to it.
        let ds = balanced_dataset(3, 3, 5);
        let mut cm = ConfusionMatrix::new(3);
        for c in 0..3 {
            let slice = ds.subset_by_labels(&[c]);
            let model = constant_predictor(3, c);
            let (part, acc) = evaluate(&model, &slice).unwrap();
            assert_eq!(acc, 1.0);
            for t in 0..3 {
                for p in 0..3 {
                    for _ in 0..part.count(t, p) {
                        cm.record(t, p);
                    }
                }
            }
        }
        assert_eq!(cm.accuracy(), 1.0);
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.count(t, p), if t == p { 3 } else { 0 });
            }
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = LabeledDataset::<f32>::new(vec![], vec![], vec![]).unwrap();
        let model = constant_predictor(3, 0);
        assert!(evaluate(&model, &ds).is_err());
    }

    #[test]
    fn folds_partition_the_dataset() {
        // 100 samples, 5 balanced classes, 5 folds -> every fold has 20.
        let labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let folds = stratified_folds(&labels, 5, 17).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![false; 100];
        for fold in &folds {
            assert_eq!(fold.len(), 20);
            for &i in fold {
                assert!(!seen[i], "index {i} appears in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn folds_are_stratified_within_one_sample() {
        // Unbalanced classes: 13 of class 0, 9 of class 1, 8 of class 2.
        let mut labels = vec![0usize; 13];
        labels.extend(vec![1usize; 9]);
        labels.extend(vec![2usize; 8]);
        let folds = stratified_folds(&labels, 3, 23).unwrap();
        for c in 0..3usize {
            let total = labels.iter().filter(|&&l| l == c).count();
            let per_fold: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let min = *per_fold.iter().min().unwrap();
            let max = *per_fold.iter().max().unwrap();
            assert!(max - min <= 1, "class {c}: {per_fold:?} from {total}");
        }
    }

    #[test]
    fn same_seed_same_folds() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        assert_eq!(
            stratified_folds(&labels, 5, 7).unwrap(),
            stratified_folds(&labels, 5, 7).unwrap()
        );
        assert_ne!(
            stratified_folds(&labels, 5, 7).unwrap(),
            stratified_folds(&labels, 5, 8).unwrap()
        );
    }

    #[test]
    fn class_smaller_than_fold_count_rejected() {
        let labels = vec![0, 0, 0, 1, 1, 1, 2];
        let err = stratified_folds(&labels, 3, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn report_statistics_match_hand_computation() {
        let report = CrossValidationReport::from_accuracies(vec![
            0.99948, 1.0, 1.0, 1.0, 1.0,
        ]);
        assert!((report.mean - 0.99990).abs() < 5e-6);
        // population std over the five folds
        assert!((report.std_dev - 0.000208).abs() < 5e-6);
        let table = report.to_string();
        assert!(table.contains("fold,test_accuracy_percent"));
        assert!(table.contains("1,99.948"));
        assert!(table.contains("average,99.990 ± 0.021"));
    }

    #[test]
    fn tiny_cross_validation_runs_end_to_end() {
        let ds = balanced_dataset(6, 2, 31);
        let arch = {
            let mut a = ArchitectureConfig::default_for_classes(2);
            // shrink for speed: two blocks, narrow channels
            a.conv_blocks.truncate(2);
            a.conv_blocks[0].out_channels = 4;
            a.conv_blocks[1].out_channels = 8;
            a.conv_blocks[1].pool_size = 4;
            a.conv_blocks[1].pool_stride = 4;
            a.feature_units = 16;
            a
        };
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            seed: 5,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        let report = kfold_cross_validate(&ds, 3, &arch, &cfg).unwrap();
        assert_eq!(report.fold_accuracies.len(), 3);
        for acc in &report.fold_accuracies {
            assert!((0.0..=1.0).contains(acc));
        }
    }

    #[test]
    fn evaluate_rejects_out_of_range_labels() {
        let ds = balanced_dataset(2, 3, 3);
        let model = constant_predictor(2, 0);
        assert!(evaluate(&model, &ds).is_err());
    }

    #[test]
    fn perfect_and_constant_row_invariants() {
        let ds = balanced_dataset(3, 4, 9);
        let model = constant_predictor(4, 2);
        let (cm, acc) = evaluate(&model, &ds).unwrap();
        assert_eq!(acc, 0.25);
        for t in 0..4 {
            assert_eq!(cm.row_sum(t), ds.class_count(t));
        }
        assert_eq!(cm.total(), ds.len());
    }
}
