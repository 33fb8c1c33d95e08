//! Stage two: the closed loop that watches a deployed classifier, decides
//! whether unfamiliar vibration belongs to a known fault or a brand-new
//! class, and folds a confirmed new class back into the model.
//!
//! The loop has three observable pieces:
//!
//! * [`health_check`] — average the classifier's distribution over the last
//!   100 windows; the pump is faulty when the healthy class no longer holds
//!   a majority of the averaged probability.
//! * [`novelty_probe`] — mix the 100 suspect windows with 500 stratified
//!   reference windows, embed all 600 feature vectors with t-SNE, sweep
//!   k-means over k = 1..20, and read the knee of the SSE curve. More
//!   clusters than known classes means a novel fault.
//! * [`integrate_new_class`](crate::novelty::integrate_new_class) — once
//!   enough samples of the new fault are collected, widen the output layer
//!   and retrain.
//!
//! [`monitor_loop`](crate::novelty::monitor_loop) strings these into a state
//! machine over a window stream and logs every step.

mod integrate;
mod monitor;

pub use integrate::{integrate_new_class, retrain_sample_threshold};
pub use monitor::{
    monitor_loop, write_event_log, MonitorConfig, MonitorEvent, MonitorOutcome, MonitorPhase,
};

use rand::seq::SliceRandom;
use rand::RngExt;

use crate::cluster::{detect_knee, sse_sweep, KmeansConfig, SseCurve};
use crate::data::{LabeledDataset, Window};
use crate::error::{Error, Result};
use crate::nn::PredictionDistribution;
use crate::rng::seeded;
use crate::scalar::Real;
use crate::tensor::Tensor;
use crate::tsne::{tsne_embed, Embedding2D, PointId, TsneConfig};
use crate::wdcnn::Model;

/// Windows averaged by a standard health check.
pub const HEALTH_WINDOW_COUNT: usize = 100;

/// Reference windows mixed into a standard novelty probe.
pub const REFERENCE_SAMPLE_COUNT: usize = 500;

/// The label reserved for healthy operation.
pub const HEALTHY_LABEL: usize = 0;

/// Overall condition from a [`health_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HealthStatus {
    Healthy,
    Faulty,
}

/// Averaged-prediction health verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct HealthVerdict<F> {
    pub status: HealthStatus,
    /// Elementwise mean of the model's distribution over the windows.
    pub mean_distribution: PredictionDistribution<F>,
    pub windows_used: usize,
}

/// Averages the model's predictions over recent windows and checks whether
/// the healthy class still holds a majority.
///
/// `expected_count` is the number of windows the check is contracted to see
/// (100 in standard operation); any other count is an error.
pub fn health_check<F: Real>(
    model: &Model<F>,
    recent: &[Window<F>],
    expected_count: usize,
) -> Result<HealthVerdict<F>> {
    if expected_count == 0 {
        return Err(Error::invalid_argument(
            "health check needs at least 1 window",
        ));
    }
    if recent.len() != expected_count {
        return Err(Error::invalid_argument(format!(
            "health check expects exactly {expected_count} windows, got {}",
            recent.len()
        )));
    }
    let classes = model.num_classes();
    let mut mean = vec![F::zero(); classes];
    for w in recent {
        let dist = model.predict(w)?;
        for (m, &p) in mean.iter_mut().zip(dist.probs()) {
            *m += p;
        }
    }
    let inv = F::of(1.0 / recent.len() as f64);
    for m in &mut mean {
        *m *= inv;
    }
    let healthy_p = mean[HEALTHY_LABEL].to_f64();
    Ok(HealthVerdict {
        status: if healthy_p < 0.5 {
            HealthStatus::Faulty
        } else {
            HealthStatus::Healthy
        },
        mean_distribution: PredictionDistribution::from_probs(mean),
        windows_used: recent.len(),
    })
}

/// What a [`novelty_probe`] concluded about the suspect windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoveltyKind {
    /// The samples belong to this already-known label.
    KnownClass(usize),
    /// The samples form a cluster beyond every known class.
    NovelClass,
}

/// Full probe outcome: the verdict plus the evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyDecision<F> {
    pub kind: NoveltyKind,
    /// Knee-point estimate of the number of signal families present.
    pub estimated_cluster_count: usize,
    pub sse_curve: SseCurve,
    pub embedding: Embedding2D<F>,
}

/// Knobs for [`novelty_probe_with`]. The defaults reproduce the standard
/// probe: 100 new + 500 stratified reference windows, t-SNE to 2-d, k-means
/// sweep over 1..20.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyProbeConfig {
    /// Required number of suspect windows.
    pub new_window_count: usize,
    /// Reference windows drawn from the known dataset.
    pub reference_count: usize,
    /// Stratify the reference draw by class (equal shares) instead of
    /// sampling uniformly at random.
    pub stratified_reference: bool,
    pub k_min: usize,
    pub k_max: usize,
    /// Embedding hyperparameters; the seed field is overridden per probe.
    pub tsne: TsneConfig,
    /// Clustering hyperparameters; the seed field is overridden per probe.
    pub kmeans: KmeansConfig,
}

impl Default for NoveltyProbeConfig {
    fn default() -> Self {
        // The probe embeds 600 points in clusters of ~100; a perplexity well
        // below the cluster size keeps each point's effective neighbourhood
        // inside its own cluster, which sharpens the SSE drop at the true
        // cluster count and lets the chord knee resolve a sixth family.
        let tsne = TsneConfig {
            perplexity: 12.0,
            ..TsneConfig::default()
        };
        NoveltyProbeConfig {
            new_window_count: HEALTH_WINDOW_COUNT,
            reference_count: REFERENCE_SAMPLE_COUNT,
            stratified_reference: true,
            k_min: 1,
            k_max: 20,
            tsne,
            kmeans: KmeansConfig::default(),
        }
    }
}

/// [`novelty_probe_with`] under the standard configuration.
pub fn novelty_probe<F: Real>(
    model: &Model<F>,
    new_windows: &[Window<F>],
    reference: &LabeledDataset<F>,
    seed: u64,
) -> Result<NoveltyDecision<F>> {
    novelty_probe_with(model, new_windows, reference, &NoveltyProbeConfig::default(), seed)
}

/// Decides whether suspect windows are a known fault or a novel class.
///
/// The suspect windows are mixed with a reference draw from the known
/// dataset, every window's 64-d feature vector is embedded to 2-d, and the
/// knee of the k-means SSE curve estimates how many signal families are
/// present. One more family than the model knows classes means a novel
/// class; otherwise the majority prediction over the suspect windows names
/// the known fault.
pub fn novelty_probe_with<F: Real>(
    model: &Model<F>,
    new_windows: &[Window<F>],
    reference: &LabeledDataset<F>,
    cfg: &NoveltyProbeConfig,
    seed: u64,
) -> Result<NoveltyDecision<F>> {
    if new_windows.len() != cfg.new_window_count {
        return Err(Error::invalid_argument(format!(
            "novelty probe expects exactly {} new windows, got {}",
            cfg.new_window_count,
            new_windows.len()
        )));
    }
    if cfg.reference_count == 0 {
        return Err(Error::invalid_argument(
            "reference_count must be at least 1",
        ));
    }
    if reference.len() < cfg.reference_count {
        return Err(Error::invalid_argument(format!(
            "reference dataset has {} windows, probe needs {}",
            reference.len(),
            cfg.reference_count
        )));
    }
    let classes = model.num_classes();
    let mut master = seeded(seed);

    // 1. Reference draw (stratified by class, or plain random).
    let ref_rows: Vec<usize> = if cfg.stratified_reference {
        let mut chosen = Vec::with_capacity(cfg.reference_count);
        let per = cfg.reference_count / classes;
        let extra = cfg.reference_count % classes;
        for label in 0..classes {
            let want = per + usize::from(label < extra);
            let mut rows: Vec<usize> = reference
                .labels()
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == label)
                .map(|(i, _)| i)
                .collect();
            if rows.len() < want {
                return Err(Error::invalid_argument(format!(
                    "reference dataset has only {} windows of class {label}, probe needs {want}",
                    rows.len()
                )));
            }
            rows.shuffle(&mut master);
            chosen.extend_from_slice(&rows[..want]);
        }
        chosen
    } else {
        let mut rows: Vec<usize> = (0..reference.len()).collect();
        rows.shuffle(&mut master);
        rows.truncate(cfg.reference_count);
        rows
    };
    let tsne_seed: u64 = master.random();
    let sweep_seed: u64 = master.random();

    // 2. Feature extraction: suspect windows first, then the reference draw.
    let units = model.feature_units();
    let total = cfg.new_window_count + cfg.reference_count;
    let mut x = Vec::with_capacity(total * units);
    let mut point_ids = Vec::with_capacity(total);
    for (i, w) in new_windows.iter().enumerate() {
        x.extend_from_slice(&model.extract_features(w)?);
        point_ids.push(PointId::unlabeled(i));
    }
    for &row in &ref_rows {
        x.extend_from_slice(&model.extract_features(&reference.windows()[row])?);
        point_ids.push(PointId::labeled(
            cfg.new_window_count + row,
            reference.labels()[row],
        ));
    }
    let x = Tensor::new(vec![total, units], x).expect("one feature row per window");

    // 3. Embed, sweep, find the knee.
    let tsne_cfg = TsneConfig {
        seed: tsne_seed,
        ..cfg.tsne.clone()
    };
    let (embedding, _) = tsne_embed(&x, &point_ids, &tsne_cfg)?;
    let sweep_cfg = KmeansConfig {
        seed: sweep_seed,
        ..cfg.kmeans.clone()
    };
    let sse_curve = sse_sweep(&embedding.y, cfg.k_min, cfg.k_max, &sweep_cfg)?;
    let knee = detect_knee(&sse_curve)?;

    let kind = if knee.k_star > classes {
        NoveltyKind::NovelClass
    } else {
        // Majority vote of the model's own predictions over the suspect
        // windows; ties go to the lowest label.
        let mut votes = vec![0usize; classes];
        for w in new_windows {
            votes[model.predict(w)?.argmax()] += 1;
        }
        let mut top = 0usize;
        for (label, &v) in votes.iter().enumerate() {
            if v > votes[top] {
                top = label;
            }
        }
        NoveltyKind::KnownClass(top)
    };
    Ok(NoveltyDecision {
        kind,
        estimated_cluster_count: knee.k_star,
        sse_curve,
        embedding,
    })
}


#[cfg(test)]
mod tests {
    use super::testutil::{class_windows, rigged_constant_model, small_base};
    use super::*;
    use crate::wdcnn::ArchitectureConfig;
    use approx::assert_relative_eq;

    fn constant_predictor(classes: usize, winner: usize) -> Model<f32> {
        rigged_constant_model(&ArchitectureConfig::default_for_classes(classes), winner)
    }

    fn hundred_windows(seed: u64) -> Vec<Window<f32>> {
        class_windows(0, 100, seed)
    }

    #[test]
    fn confident_healthy_predictions_are_healthy() {
        let model = constant_predictor(5, 0);
        let verdict = health_check(&model, &hundred_windows(3), 100).unwrap();
        assert_eq!(verdict.status, HealthStatus::Healthy);
        assert_eq!(verdict.windows_used, 100);
        assert!(verdict.mean_distribution.probs()[0] > 0.99);
        let sum: f32 = verdict.mean_distribution.probs().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn confident_fault_predictions_are_faulty() {
        let model = constant_predictor(5, 3);
        let verdict = health_check(&model, &hundred_windows(4), 100).unwrap();
        assert_eq!(verdict.status, HealthStatus::Faulty);
        assert!(verdict.mean_distribution.probs()[3] > 0.9);
        assert!(verdict.mean_distribution.probs()[0] < 0.01);
    }

    #[test]
    fn wrong_window_count_rejected() {
        let model = constant_predictor(3, 0);
        let w = hundred_windows(5);
        assert!(health_check(&model, &w[..99], 100).is_err());
        assert!(health_check(&model, &w, 50).is_err());
        assert!(health_check(&model, &[], 0).is_err());
    }

    #[test]
    fn probe_rejects_wrong_counts() {
        let ds = small_base(&[10, 10, 10], 6);
        let model = constant_predictor(3, 0);
        // wrong suspect count
        let err =
            novelty_probe(&model, &ds.windows()[..5], &ds, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        // reference too small for the standard 500 draw
        let suspects = hundred_windows(7);
        let err = novelty_probe(&model, &suspects, &ds, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn stratified_draw_requires_every_class() {
        // class 2 exists in the name table but has only 3 windows: a
        // stratified 30-window draw (10 per class) must fail.
        let ds = small_base(&[20, 20, 3], 8);
        let model = constant_predictor(3, 0);
        let suspects = class_windows(0, 10, 9);
        let cfg = NoveltyProbeConfig {
            new_window_count: 10,
            reference_count: 30,
            tsne: TsneConfig {
                perplexity: 5.0,
                iterations: 50,
                ..TsneConfig::default()
            },
            ..NoveltyProbeConfig::default()
        };
        let err = novelty_probe_with(&model, &suspects, &ds, &cfg, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("class 2"), "{msg}");
    }

    #[test]
    fn small_probe_runs_end_to_end_and_votes_majority() {
        let ds = small_base(&[15, 15, 15], 10);
        let model = constant_predictor(3, 2);
        let suspects = class_windows(1, 12, 11);
        let cfg = NoveltyProbeConfig {
            new_window_count: 12,
            reference_count: 30,
            tsne: TsneConfig {
                perplexity: 6.0,
                iterations: 120,
                learning_rate: 50.0,
                ..TsneConfig::default()
            },
            k_max: 10,
            ..NoveltyProbeConfig::default()
        };
        let decision = novelty_probe_with(&model, &suspects, &ds, &cfg, 2).unwrap();
        assert_eq!(decision.embedding.len(), 42);
        assert_eq!(decision.sse_curve.k_values(), (1..=10).collect::<Vec<_>>());
        assert!(decision.estimated_cluster_count >= 1);
        // A constant predictor votes its fixed class whenever the knee says
        // nothing new is present.
        match decision.kind {
            NoveltyKind::KnownClass(label) => assert_eq!(label, 2),
            NoveltyKind::NovelClass => {
                assert!(decision.estimated_cluster_count > 3);
            }
        }
        // invariant: novel iff more clusters than classes
        assert_eq!(
            decision.kind == NoveltyKind::NovelClass,
            decision.estimated_cluster_count > 3
        );
    }

    #[test]
    fn probe_is_deterministic_in_the_seed() {
        let ds = small_base(&[12, 12, 12], 20);
        let model = constant_predictor(3, 1);
        let suspects = class_windows(0, 10, 21);
        let cfg = NoveltyProbeConfig {
            new_window_count: 10,
            reference_count: 24,
            tsne: TsneConfig {
                perplexity: 5.0,
                iterations: 60,
                learning_rate: 40.0,
                ..TsneConfig::default()
            },
            k_max: 8,
            ..NoveltyProbeConfig::default()
        };
        let a = novelty_probe_with(&model, &suspects, &ds, &cfg, 7).unwrap();
        let b = novelty_probe_with(&model, &suspects, &ds, &cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = novelty_probe_with(&model, &suspects, &ds, &cfg, 8).unwrap();
        // different seed draws a different reference sample and embedding
        assert_ne!(a.embedding, c.embedding);
    }
}
