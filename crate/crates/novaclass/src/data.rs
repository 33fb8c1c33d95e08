//! Synthetic vibration data, dataset files, and stream replay.
//!
//! The generator stands in for a live centrifugal-pump rig: each class is a
//! signal recipe (harmonics, amplitude modulation, impulse trains, broadband
//! noise) sampled at 1.6 kHz into 1024-point windows. Recipes are chosen so
//! classes differ in *shape* rather than scale — per-window normalization
//! removes amplitude information downstream.
//!
//! Dataset files are plain text: a fixed header line followed by one
//! `label,<1024 floats>` record per line. [`stream_replay`] turns a dataset
//! file into an ordered source of normalized windows for the monitor, with
//! ground-truth labels carried alongside for scoring only.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{child, seeded, SeededRng};
use crate::scalar::Real;

/// Samples per vibration window.
pub const WINDOW_LEN: usize = 1024;
/// Acquisition rate in Hz.
pub const SAMPLE_RATE_HZ: f64 = 1600.0;
/// First line of every dataset file.
pub const DATASET_HEADER: &str = "novaclass-ds-1,n=";

/// Default per-class training-set sizes (classes 0–5).
pub const DEFAULT_TRAIN_COUNTS: [usize; 6] = [1460, 1120, 1440, 1440, 1040, 1280];
/// Default per-class test-set sizes (classes 0–5).
pub const DEFAULT_TEST_COUNTS: [usize; 6] = [360, 280, 360, 360, 360, 320];

/// One vibration window: exactly [`WINDOW_LEN`] finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<F> {
    samples: Vec<F>,
    pub sample_rate_hz: f64,
}

impl<F: Real> Window<F> {
    pub fn new(samples: Vec<F>) -> Result<Self> {
        if samples.len() != WINDOW_LEN {
            return Err(Error::invalid_argument(format!(
                "window has {} samples, expected {WINDOW_LEN}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_argument(
                "window contains non-finite samples",
            ));
        }
        Ok(Window {
            samples,
            sample_rate_hz: SAMPLE_RATE_HZ,
        })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }
}

/// Signal recipe for one machine condition. Zeroed features are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    /// Sinusoidal components as `(frequency_hz, amplitude)` pairs.
    pub harmonics: Vec<(f64, f64)>,
    /// Depth of slow amplitude modulation applied to the harmonic sum.
    pub am_depth: f64,
    /// Modulation rate in Hz.
    pub am_rate_hz: f64,
    /// Repetition rate of the impulse train in Hz.
    pub impulse_rate_hz: f64,
    /// Peak amplitude of each impulse.
    pub impulse_level: f64,
    /// Resonance each impulse rings at, in Hz.
    pub impulse_ring_hz: f64,
    /// Exponential decay rate of each ring, in 1/s.
    pub impulse_decay: f64,
    /// Standard deviation of ever-present white noise.
    pub noise_level: f64,
    /// How many short high-noise bursts occur per second.
    pub burst_rate_hz: f64,
    /// Extra noise standard deviation inside a burst.
    pub burst_level: f64,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe {
            harmonics: Vec::new(),
            am_depth: 0.0,
            am_rate_hz: 0.0,
            impulse_rate_hz: 0.0,
            impulse_level: 0.0,
            impulse_ring_hz: 0.0,
            impulse_decay: 0.0,
            noise_level: 0.0,
            burst_rate_hz: 0.0,
            burst_level: 0.0,
        }
    }
}

/// One machine condition the generator can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub label: usize,
    pub name: String,
    pub recipe: Recipe,
    /// Flow range in L/min — descriptive metadata only.
    pub flow_range_l_min: Option<(f64, f64)>,
}

/// The six default machine conditions.
///
/// Class 5 ("crack") shares the healthy fundamental and differs only by a
/// sideband pair, so telling it apart takes more than an energy threshold —
/// it is the class held out as *novel* in the open-set scenario.
pub fn default_class_specs() -> Vec<ClassSpec> {
    vec![
        ClassSpec {
            label: 0,
            name: "healthy".into(),
            recipe: Recipe {
                harmonics: vec![(50.0, 1.0), (100.0, 0.45), (150.0, 0.22)],
                noise_level: 0.06,
                ..Recipe::default()
            },
            flow_range_l_min: Some((170.0, 220.0)),
        },
        ClassSpec {
            label: 1,
            name: "low_flow".into(),
            recipe: Recipe {
                harmonics: vec![(50.0, 0.55), (100.0, 1.25), (150.0, 0.18)],
                am_depth: 0.55,
                am_rate_hz: 1.8,
                noise_level: 0.07,
                ..Recipe::default()
            },
            flow_range_l_min: Some((80.0, 120.0)),
        },
        ClassSpec {
            label: 2,
            name: "cavitation".into(),
            recipe: Recipe {
                harmonics: vec![(50.0, 0.7), (100.0, 0.3)],
                noise_level: 0.28,
                burst_rate_hz: 9.0,
                burst_level: 1.1,
                ..Recipe::default()
            },
            flow_range_l_min: Some((120.0, 170.0)),
        },
        ClassSpec {
            label: 3,
            name: "major_defect".into(),
            recipe: Recipe {
                harmonics: vec![(50.0, 0.8), (100.0, 0.3)],
                impulse_rate_hz: 26.0,
                impulse_level: 3.2,
                impulse_ring_hz: 330.0,
                impulse_decay: 260.0,
                noise_level: 0.08,
                ..Recipe::default()
            },
            flow_range_l_min: Some((150.0, 200.0)),
        },
        ClassSpec {
            label: 4,
            name: "minor_defect".into(),
            recipe: Recipe {
                harmonics: vec![(50.0, 0.85), (100.0, 0.35)],
                impulse_rate_hz: 13.0,
                impulse_level: 1.1,
                impulse_ring_hz: 280.0,
                impulse_decay: 200.0,
                noise_level: 0.07,
                ..Recipe::default()
            },
            flow_range_l_min: Some((130.0, 160.0)),
        },
        ClassSpec {
            label: 5,
            name: "crack".into(),
            recipe: Recipe {
                harmonics: vec![(42.0, 1.0), (50.0, 1.0), (58.0, 1.0)],
                noise_level: 0.06,
                ..Recipe::default()
            },
            flow_range_l_min: Some((150.0, 200.0)),
        },
    ]
}

/// Labeled windows plus bookkeeping: class names indexed by label and the
/// generator seed when the set is synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F> {
    windows: Vec<Window<F>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    pub seed: Option<u64>,
}

impl<F: Real> LabeledDataset<F> {
    pub fn new(
        windows: Vec<Window<F>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if windows.len() != labels.len() {
            return Err(Error::invalid_argument(format!(
                "{} windows but {} labels",
                windows.len(),
                labels.len()
            )));
        }
        if let Some(&max) = labels.iter().max() {
            if max >= class_names.len() {
                return Err(Error::invalid_argument(format!(
                    "label {max} out of range for {} class names",
                    class_names.len()
                )));
            }
        }
        Ok(LabeledDataset {
            windows,
            labels,
            class_names,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[Window<F>] {
        &self.windows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Windows carrying `label`.
    pub fn class_count(&self, label: usize) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// A copy keeping only windows whose label is in `keep` (original label
    /// values and class names are preserved).
    pub fn subset_by_labels(&self, keep: &[usize]) -> LabeledDataset<F> {
        let mut windows = Vec::new();
        let mut labels = Vec::new();
        for (w, &l) in self.windows.iter().zip(&self.labels) {
            if keep.contains(&l) {
                windows.push(w.clone());
                labels.push(l);
            }
        }
        LabeledDataset {
            windows,
            labels,
            class_names: self.class_names.clone(),
            seed: self.seed,
        }
    }

    /// Appends another dataset's windows (class name lists must agree on
    /// shared labels; the longer list wins).
    pub fn extend_from(&mut self, other: &LabeledDataset<F>) {
        self.windows.extend_from_slice(&other.windows);
        self.labels.extend_from_slice(&other.labels);
        if other.class_names.len() > self.class_names.len() {
            self.class_names = other.class_names.clone();
        }
    }
}

/// Generates `counts[i]` windows of `specs[i]` for every class,
/// deterministically in `seed`.
pub fn generate_synthetic_dataset<F: Real>(
    specs: &[ClassSpec],
    counts: &[usize],
    seed: u64,
) -> Result<LabeledDataset<F>> {
    if specs.is_empty() {
        return Err(Error::invalid_argument("no class specs given"));
    }
    if specs.len() != counts.len() {
        return Err(Error::invalid_argument(format!(
            "{} specs but {} counts",
            specs.len(),
            counts.len()
        )));
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid_argument(format!(
            "count for class index {i} must be at least 1"
        )));
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if a.label == b.label {
                return Err(Error::invalid_argument(format!(
                    "duplicate class label {}",
                    a.label
                )));
            }
        }
    }

    let max_label = specs.iter().map(|s| s.label).max().unwrap();
    let mut class_names = vec![String::new(); max_label + 1];
    for (i, name) in class_names.iter_mut().enumerate() {
        *name = format!("class_{i}");
    }
    for spec in specs {
        class_names[spec.label] = spec.name.clone();
    }

    let mut master = seeded(seed);
    let total: usize = counts.iter().sum();
    let mut windows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (spec, &count) in specs.iter().zip(counts) {
        for _ in 0..count {
            let mut wr = child(&mut master);
            let samples = synth_window(&spec.recipe, &mut wr);
            windows.push(Window::new(samples.iter().map(|&v| F::of(v)).collect())?);
            labels.push(spec.label);
        }
    }

    let mut ds = LabeledDataset::new(windows, labels, class_names)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// Renders one window of a recipe. Random draws happen in a fixed order
/// (phases, impulse times, burst starts, then noise) so output is a pure
/// function of recipe and rng state.
fn synth_window(recipe: &Recipe, rng: &mut SeededRng) -> Vec<f64> {
    use std::f64::consts::TAU;
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let duration = WINDOW_LEN as f64 * dt;
    let mut x = vec![0.0f64; WINDOW_LEN];

    let phases: Vec<f64> = recipe
        .harmonics
        .iter()
        .map(|_| rng.random::<f64>() * TAU)
        .collect();
    let am_phase = if recipe.am_depth > 0.0 {
        rng.random::<f64>() * TAU
    } else {
        0.0
    };

    let mut impulse_times = Vec::new();
    if recipe.impulse_rate_hz > 0.0 && recipe.impulse_level > 0.0 {
        let period = 1.0 / recipe.impulse_rate_hz;
        let mut t = rng.random::<f64>() * period;
        while t < duration {
            impulse_times.push(t);
            t += period * (0.9 + 0.2 * rng.random::<f64>());
        }
    }

    let burst_len = 0.025; // seconds
    let mut burst_starts = Vec::new();
    if recipe.burst_rate_hz > 0.0 && recipe.burst_level > 0.0 {
        let expected = (duration * recipe.burst_rate_hz).round() as usize;
        for _ in 0..expected {
            burst_starts.push(rng.random::<f64>() * (duration - burst_len));
        }
    }

    for (k, sample) in x.iter_mut().enumerate() {
        let t = k as f64 * dt;
        let mut tone = 0.0;
        for (&(f, a), &phi) in recipe.harmonics.iter().zip(&phases) {
            tone += a * (TAU * f * t + phi).sin();
        }
        if recipe.am_depth > 0.0 {
            tone *= 1.0 + recipe.am_depth * (TAU * recipe.am_rate_hz * t + am_phase).sin();
        }
        *sample = tone;
    }

    for &t0 in &impulse_times {
        let start = (t0 * SAMPLE_RATE_HZ).ceil() as usize;
        for (k, sample) in x.iter_mut().enumerate().skip(start) {
            let dt_imp = k as f64 * dt - t0;
            let envelope = recipe.impulse_level * (-recipe.impulse_decay * dt_imp).exp();
            if envelope < 1e-4 {
                break;
            }
            *sample += envelope * (TAU * recipe.impulse_ring_hz * dt_imp).sin();
        }
    }

    if recipe.noise_level > 0.0 {
        for sample in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *sample += recipe.noise_level * z;
        }
    }

    for &b0 in &burst_starts {
        let start = (b0 * SAMPLE_RATE_HZ) as usize;
        let end = ((b0 + burst_len) * SAMPLE_RATE_HZ) as usize;
        for sample in x.iter_mut().take(end.min(WINDOW_LEN)).skip(start) {
            let z: f64 = rng.sample(StandardNormal);
            *sample += recipe.burst_level * z;
        }
    }

    x
}

/// Per-window z-score: `(x − mean) / std`. A window with standard deviation
/// below 1e-12 comes back as all zeros. Idempotent within float error.
pub fn normalize_window<F: Real>(w: &Window<F>) -> Window<F> {
    let n = F::of(WINDOW_LEN as f64);
    let mut sum = F::zero();
    for &v in w.samples() {
        sum += v;
    }
    let mean = sum / n;
    let mut sq = F::zero();
    for &v in w.samples() {
        let d = v - mean;
        sq += d * d;
    }
    let std = (sq / n).sqrt();
    let samples = if std.to_f64() < 1e-12 {
        vec![F::zero(); WINDOW_LEN]
    } else {
        w.samples().iter().map(|&v| (v - mean) / std).collect()
    };
    Window {
        samples,
        sample_rate_hz: w.sample_rate_hz,
    }
}

/// Writes a dataset as text: header
/// `novaclass-ds-1,n=<count>,len=1024,rate=1600`, then one
/// `label,<1024 floats>` record per line.
pub fn save_dataset<F: Real>(ds: &LabeledDataset<F>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}{},len={},rate=1600", DATASET_HEADER, ds.len(), WINDOW_LEN)?;
    for (w, &label) in ds.windows().iter().zip(ds.labels()) {
        write!(out, "{label}")?;
        for v in w.samples() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`]. Numbers round-trip exactly
/// because floats are printed shortest-round-trip.
pub fn load_dataset<F: Real>(path: &Path) -> Result<LabeledDataset<F>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "no header")),
    };
    let expected_n = parse_header(&header)?;

    let mut windows = Vec::with_capacity(expected_n);
    let mut labels = Vec::with_capacity(expected_n);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::parse(line_no, "record does not start with an integer label"))?;
        let mut samples = Vec::with_capacity(WINDOW_LEN);
        for field in fields {
            let v = F::parse_str(field).ok_or_else(|| {
                Error::parse(line_no, format!("unparseable sample value {field:?}"))
            })?;
            samples.push(v);
        }
        if samples.len() != WINDOW_LEN {
            return Err(Error::parse(
                line_no,
                format!("record has {} samples, expected {WINDOW_LEN}", samples.len()),
            ));
        }
        windows.push(
            Window::new(samples)
                .map_err(|e| Error::parse(line_no, format!("invalid window: {e}")))?,
        );
        labels.push(label);
    }
    if windows.len() != expected_n {
        return Err(Error::parse(
            1,
            format!("header says n={expected_n} but file has {} records", windows.len()),
        ));
    }

    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let class_names = (0..num_classes).map(|i| format!("class_{i}")).collect();
    LabeledDataset::new(windows, labels, class_names)
}

fn parse_header(header: &str) -> Result<usize> {
    let rest = header
        .strip_prefix(DATASET_HEADER)
        .ok_or_else(|| Error::parse(1, "no header"))?;
    let mut fields = rest.split(',');
    let n: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::parse(1, "header count is not an integer"))?;
    let len_field = fields.next().unwrap_or("");
    let rate_field = fields.next().unwrap_or("");
    if len_field != format!("len={WINDOW_LEN}") || rate_field != "rate=1600" {
        return Err(Error::parse(
            1,
            format!("header declares unsupported window length or rate: {rest:?}"),
        ));
    }
    Ok(n)
}

/// In what order a replay yields its windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayOrder {
    Sequential,
    SeededShuffle(u64),
}

/// One window from a replay. The model side sees [`Self::window`]; the true
/// label is deliberately tucked behind [`Self::truth_for_scoring`] so
/// monitoring code can't accidentally classify with it.
#[derive(Debug, Clone)]
pub struct StreamedWindow<F> {
    pub window: Window<F>,
    truth: usize,
}

impl<F> StreamedWindow<F> {
    /// Ground-truth label — for event-log scoring only.
    pub fn truth_for_scoring(&self) -> usize {
        self.truth
    }
}

/// Replays a dataset one normalized window at a time.
#[derive(Debug)]
pub struct StreamReplay<F> {
    items: std::vec::IntoIter<StreamedWindow<F>>,
    total: usize,
}

impl<F: Real> StreamReplay<F> {
    pub fn from_dataset(ds: &LabeledDataset<F>, order: ReplayOrder) -> Self {
        let mut indices: Vec<usize> = (0..ds.len()).collect();
        if let ReplayOrder::SeededShuffle(seed) = order {
            indices.shuffle(&mut seeded(seed));
        }
        let items: Vec<StreamedWindow<F>> = indices
            .into_iter()
            .map(|i| StreamedWindow {
                window: normalize_window(&ds.windows()[i]),
                truth: ds.labels()[i],
            })
            .collect();
        let total = items.len();
        StreamReplay {
            items: items.into_iter(),
            total,
        }
    }

    /// Number of windows the replay started with.
    pub fn total(&self) -> usize {
        self.total
    }
}

impl<F: Real> Iterator for StreamReplay<F> {
    type Item = StreamedWindow<F>;

    fn next(&mut self) -> Option<Self::Item> {
        self.items.next()
    }
}

/// Opens a dataset file as a replay source.
pub fn stream_replay<F: Real>(path: &Path, order: ReplayOrder) -> Result<StreamReplay<F>> {
    let ds = load_dataset(path)?;
    Ok(StreamReplay::from_dataset(&ds, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset(seed: u64) -> LabeledDataset<f32> {
        let specs = default_class_specs();
        generate_synthetic_dataset(&specs, &[3, 3, 3, 3, 3, 3], seed).unwrap()
    }

    #[test]
    fn default_config_has_six_classes_labeled_in_order() {
        let specs = default_class_specs();
        assert_eq!(specs.len(), 6);
        for (i, spec) in specs.iter().enumerate() {
            assert_eq!(spec.label, i);
            assert!(spec.flow_range_l_min.is_some());
        }
        assert_eq!(specs[0].name, "healthy");
        assert_eq!(specs[5].name, "crack");
        assert_eq!(DEFAULT_TRAIN_COUNTS[0], 1460);
        assert_eq!(DEFAULT_TEST_COUNTS[0], 360);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = tiny_dataset(7);
        let b = tiny_dataset(7);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = tiny_dataset(7);
        let b = tiny_dataset(8);
        assert_ne!(a.windows()[0].samples(), b.windows()[0].samples());
    }

    #[test]
    fn per_class_counts_match_request() {
        let specs = default_class_specs();
        let ds: LabeledDataset<f32> =
            generate_synthetic_dataset(&specs, &[5, 4, 3, 2, 1, 6], 1).unwrap();
        assert_eq!(ds.len(), 21);
        for (label, want) in [(0, 5), (1, 4), (2, 3), (3, 2), (4, 1), (5, 6)] {
            assert_eq!(ds.class_count(label), want);
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut specs = default_class_specs();
        specs[1].label = 0;
        let err =
            generate_synthetic_dataset::<f32>(&specs, &[1, 1, 1, 1, 1, 1], 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn zero_count_rejected() {
        let specs = default_class_specs();
        assert!(generate_synthetic_dataset::<f32>(&specs, &[1, 0, 1, 1, 1, 1], 1).is_err());
    }

    #[test]
    fn generated_windows_are_finite() {
        let ds = tiny_dataset(3);
        for w in ds.windows() {
            assert_eq!(w.samples().len(), WINDOW_LEN);
            assert!(w.samples().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn normalize_constant_window_is_all_zeros() {
        let w = Window::new(vec![3.25f64; WINDOW_LEN]).unwrap();
        let n = normalize_window(&w);
        assert!(n.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_centers_and_scales() {
        let specs = default_class_specs();
        let ds: LabeledDataset<f64> =
            generate_synthetic_dataset(&specs, &[1, 1, 1, 1, 1, 1], 11).unwrap();
        let n = normalize_window(&ds.windows()[0]);
        let mean: f64 = n.samples().iter().sum::<f64>() / WINDOW_LEN as f64;
        let var: f64 =
            n.samples().iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / WINDOW_LEN as f64;
        assert!(mean.abs() < 1e-9, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-6, "std {}", var.sqrt());
    }

    #[test]
    fn normalize_is_idempotent() {
        let specs = default_class_specs();
        let ds: LabeledDataset<f64> =
            generate_synthetic_dataset(&specs, &[1, 1, 1, 1, 1, 1], 13).unwrap();
        let once = normalize_window(&ds.windows()[1]);
        let twice = normalize_window(&once);
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.txt");
        let specs = default_class_specs();
        let ds: LabeledDataset<f32> =
            generate_synthetic_dataset(&specs[..2], &[5, 5], 21).unwrap();
        save_dataset(&ds, &path).unwrap();
        let back: LabeledDataset<f32> = load_dataset(&path).unwrap();
        assert_eq!(back.len(), 10);
        assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.windows().iter().zip(ds.windows()) {
            assert_eq!(a.samples(), b.samples());
        }
    }

    #[test]
    fn short_record_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        let mut row = String::from("0");
        for _ in 0..WINDOW_LEN - 1 {
            row.push_str(",0.0");
        }
        std::fs::write(&path, format!("novaclass-ds-1,n=1,len=1024,rate=1600\n{row}\n")).unwrap();
        match load_dataset::<f32>(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("1023"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_reports_no_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "").unwrap();
        match load_dataset::<f32>(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert_eq!(message, "no header");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mismatch.txt");
        std::fs::write(&path, "novaclass-ds-1,n=3,len=1024,rate=1600\n").unwrap();
        assert!(matches!(
            load_dataset::<f32>(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn sequential_replay_yields_everything_in_order() {
        let ds = tiny_dataset(5);
        let replay = StreamReplay::from_dataset(&ds, ReplayOrder::Sequential);
        assert_eq!(replay.total(), ds.len());
        let truths: Vec<usize> = replay.map(|s| s.truth_for_scoring()).collect();
        assert_eq!(truths, ds.labels());
    }

    #[test]
    fn replay_windows_arrive_normalized() {
        let ds = tiny_dataset(5);
        let first = StreamReplay::from_dataset(&ds, ReplayOrder::Sequential)
            .next()
            .unwrap();
        let mean: f64 =
            first.window.samples().iter().map(|&v| v as f64).sum::<f64>() / WINDOW_LEN as f64;
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn same_shuffle_seed_same_order() {
        let ds = tiny_dataset(5);
        let a: Vec<usize> = StreamReplay::from_dataset(&ds, ReplayOrder::SeededShuffle(9))
            .map(|s| s.truth_for_scoring())
            .collect();
        let b: Vec<usize> = StreamReplay::from_dataset(&ds, ReplayOrder::SeededShuffle(9))
            .map(|s| s.truth_for_scoring())
            .collect();
        let c: Vec<usize> = StreamReplay::from_dataset(&ds, ReplayOrder::Sequential)
            .map(|s| s.truth_for_scoring())
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_length_window_rejected() {
        assert!(Window::new(vec![0.0f32; 1023]).is_err());
        assert!(Window::new(vec![f32::NAN; WINDOW_LEN]).is_err());
    }
}
