//! K-means clustering, SSE sweeps over candidate cluster counts, and
//! knee-point detection.
//!
//! The cluster count of a probe set is estimated the classic way: run
//! k-means for every k in a range, record the best-of-restarts inertia
//! (SSE), and find the knee of the resulting curve — the point farthest
//! from the chord joining the curve's endpoints after normalizing both
//! axes to [0, 1].
//!
//! Inertia is always accumulated in 64-bit in point-index order, so the
//! same partition always produces the identical inertia value regardless
//! of how it was found. The small-instance tests exploit this to compare
//! k-means output against an exhaustive-partition oracle exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::{child, seeded};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Knobs for one [`kmeans`] call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmeansConfig {
    /// Independent k-means++ starts; the lowest-inertia run wins.
    pub restarts: usize,
    /// Lloyd iteration cap per restart.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            restarts: 10,
            max_iter: 300,
            seed: 42,
        }
    }
}

impl KmeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid_config("restarts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid_config("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Converged clustering of one restart-selected k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult<F> {
    /// Cluster centers, shape `[k, d]`.
    pub centroids: Tensor<F>,
    /// Cluster index of each input point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    /// Lloyd iterations the winning restart performed.
    pub iterations_run: usize,
}

/// Best-of-restarts inertia for each candidate cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct SseCurve {
    k_values: Vec<usize>,
    sse: Vec<f64>,
}

impl SseCurve {
    /// Validates ordering and signs and wraps the curve.
    pub fn new(k_values: Vec<usize>, sse: Vec<f64>) -> Result<Self> {
        if k_values.len() != sse.len() {
            return Err(Error::invalid_argument(format!(
                "{} k values but {} sse values",
                k_values.len(),
                sse.len()
            )));
        }
        if k_values.is_empty() {
            return Err(Error::invalid_argument("empty SSE curve"));
        }
        if k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid_argument(
                "k values must be strictly increasing",
            ));
        }
        if sse.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::invalid_argument(
                "sse values must be non-negative and finite",
            ));
        }
        Ok(SseCurve { k_values, sse })
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k_values
    }

    pub fn sse(&self) -> &[f64] {
        &self.sse
    }
}

/// Knee-point estimate from [`detect_knee`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KneeResult {
    /// The k at the knee of the curve.
    pub k_star: usize,
    /// Set when the curve was flat (max SSE == min SSE), in which case
    /// `k_star` is simply the smallest k on the curve.
    pub degenerate_curve: bool,
}

/// Canonical inertia of a partition: centroids are the 64-bit means of each
/// cluster and distances accumulate in point-index order. Returns the
/// per-cluster centroids (`k×d`, row-major) alongside the total.
fn partition_inertia(coords: &[f64], d: usize, assignment: &[usize], k: usize) -> (Vec<f64>, f64) {
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for j in 0..d {
            sums[c * d + j] += coords[i * d + j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                sums[c * d + j] /= counts[c] as f64;
            }
        }
    }
    let mut inertia = 0.0f64;
    for (i, &c) in assignment.iter().enumerate() {
        inertia += sq_dist(&coords[i * d..(i + 1) * d], &sums[c * d..(c + 1) * d]);
    }
    (sums, inertia)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Nearest centroid of a point; ties go to the lowest centroid index.
fn nearest(point: &[f64], centroids: &[f64], k: usize, d: usize) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let dist = sq_dist(point, &centroids[c * d..(c + 1) * d]);
        if dist < best_d {
            best_d = dist;
            best = c;
        }
    }
    best
}

/// Clusters `[n, d]` points into `k` groups.
///
/// k-means++ seeding, Lloyd iterations to an assignment fixpoint (or
/// `max_iter`), empty clusters repaired by donating the point farthest from
/// its centroid. The lowest-inertia restart wins; the first such restart on
/// ties. Deterministic given `cfg.seed`.
pub fn kmeans<F: Real>(
    points: &Tensor<F>,
    k: usize,
    cfg: &KmeansConfig,
) -> Result<KmeansResult<F>> {
    cfg.validate()?;
    let shape = points.shape();
    if shape.len() != 2 {
        return Err(Error::invalid_argument(format!(
            "expected an [n, d] matrix of points, got shape {shape:?}"
        )));
    }
    let (n, d) = (shape[0], shape[1]);
    if k == 0 {
        return Err(Error::invalid_argument("k must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid_argument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if !points.is_finite() {
        return Err(Error::invalid_argument("points contain non-finite values"));
    }

    // Work entirely in f64 coordinates.
    let coords: Vec<f64> = points.data().iter().map(|&v| v.to_f64()).collect();

    let mut master = seeded(cfg.seed);
    let mut best: Option<(f64, Vec<usize>, Vec<f64>, usize)> = None;
    for _ in 0..cfg.restarts {
        let mut rng = child(&mut master);
        let (assignment, centroids, inertia, iterations) =
            lloyd(&coords, n, d, k, cfg.max_iter, &mut rng);
        let replace = match &best {
            Some((b, _, _, _)) => inertia < *b,
            None => true,
        };
        if replace {
            best = Some((inertia, assignment, centroids, iterations));
        }
    }
    let (inertia, assignment, centroids, iterations_run) = best.expect("restarts >= 1");
    Ok(KmeansResult {
        centroids: Tensor::new(vec![k, d], centroids.iter().map(|&v| F::of(v)).collect())
            .expect("shape matches by construction"),
        assignment,
        inertia,
        iterations_run,
    })
}

/// One seeded restart: k-means++ init then Lloyd to fixpoint.
fn lloyd(
    coords: &[f64],
    n: usize,
    d: usize,
    k: usize,
    max_iter: usize,
    rng: &mut crate::rng::SeededRng,
) -> (Vec<usize>, Vec<f64>, f64, usize) {
    let mut centroids = plus_plus_seed(coords, n, d, k, rng);
    let mut assignment = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        // Assignment step.
        let mut changed = false;
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = nearest(&coords[i * d..(i + 1) * d], &centroids, k, d);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
            counts[c] += 1;
        }

        // Empty-cluster repair: donate the point farthest from its centroid,
        // never emptying another cluster in the process.
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut farthest: Option<(f64, usize)> = None;
            for i in 0..n {
                let c = assignment[i];
                if counts[c] < 2 {
                    continue;
                }
                let dist = sq_dist(&coords[i * d..(i + 1) * d], &centroids[c * d..(c + 1) * d]);
                let take = match farthest {
                    Some((fd, _)) => dist > fd,
                    None => true,
                };
                if take {
                    farthest = Some((dist, i));
                }
            }
            let (_, donor) = farthest.expect("k <= n guarantees a donatable point");
            counts[assignment[donor]] -= 1;
            assignment[donor] = empty;
            counts[empty] = 1;
            centroids[empty * d..(empty + 1) * d]
                .copy_from_slice(&coords[donor * d..(donor + 1) * d]);
            changed = true;
        }

        // Update step: centroids become cluster means; inertia is the
        // canonical value for the new assignment.
        let (means, inertia) = partition_inertia(coords, d, &assignment, k);
        centroids = means;
        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-12) + 1e-9,
            "Lloyd iteration increased inertia: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;

        if !changed {
            break;
        }
    }
    (assignment, centroids, prev_inertia, iterations)
}

/// k-means++ seeding: first center uniform, the rest sampled with
/// probability proportional to squared distance from the nearest chosen
/// center.
fn plus_plus_seed(
    coords: &[f64],
    n: usize,
    d: usize,
    k: usize,
    rng: &mut crate::rng::SeededRng,
) -> Vec<f64> {
    let mut centroids = vec![0.0f64; k * d];
    let first = rng.random_range(0..n);
    centroids[..d].copy_from_slice(&coords[first * d..(first + 1) * d]);

    let mut min_d: Vec<f64> = (0..n)
        .map(|i| sq_dist(&coords[i * d..(i + 1) * d], &centroids[..d]))
        .collect();

    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in min_d.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            // All points coincide with chosen centers; any pick is as good.
            rng.random_range(0..n)
        };
        centroids[c * d..(c + 1) * d].copy_from_slice(&coords[pick * d..(pick + 1) * d]);
        for i in 0..n {
            let dist = sq_dist(
                &coords[i * d..(i + 1) * d],
                &centroids[c * d..(c + 1) * d],
            );
            if dist < min_d[i] {
                min_d[i] = dist;
            }
        }
    }
    centroids
}

/// Best-of-restarts SSE for every k in `k_min..=k_max`.
///
/// The curve should be non-increasing; because restarts are finite a small
/// violation is possible and is logged as a warning rather than an error.
pub fn sse_sweep<F: Real>(
    points: &Tensor<F>,
    k_min: usize,
    k_max: usize,
    cfg: &KmeansConfig,
) -> Result<SseCurve> {
    if k_min == 0 {
        return Err(Error::invalid_argument("k_min must be at least 1"));
    }
    if k_min > k_max {
        return Err(Error::invalid_argument(format!(
            "k_min {k_min} exceeds k_max {k_max}"
        )));
    }
    let n = points.shape().first().copied().unwrap_or(0);
    if k_max > n {
        return Err(Error::invalid_argument(format!(
            "k_max {k_max} exceeds the number of points {n}"
        )));
    }

    let mut master = seeded(cfg.seed);
    let mut k_values = Vec::with_capacity(k_max - k_min + 1);
    let mut sse = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let sub = KmeansConfig {
            seed: master.random(),
            ..cfg.clone()
        };
        let result = kmeans(points, k, &sub)?;
        if let Some(&prev) = sse.last() {
            let tol = 1e-6 * f64::max(prev, 1.0);
            if result.inertia > prev + tol {
                log::warn!(
                    "SSE increased from {prev} at k={} to {} at k={k} (finite restarts)",
                    k - 1,
                    result.inertia
                );
            }
        }
        k_values.push(k);
        sse.push(result.inertia);
    }
    SseCurve::new(k_values, sse)
}

/// Finds the knee of an SSE curve.
///
/// Both axes are normalized to [0, 1]; the knee is the point with the
/// largest perpendicular distance to the chord joining the curve's
/// endpoints. Ties break toward smaller k. A flat curve is degenerate and
/// yields the smallest k with [`KneeResult::degenerate_curve`] set.
pub fn detect_knee(curve: &SseCurve) -> Result<KneeResult> {
    let m = curve.len();
    if m < 3 {
        return Err(Error::invalid_argument(format!(
            "knee detection needs at least 3 curve points, got {m}"
        )));
    }
    let ks = curve.k_values();
    let ss = curve.sse();
    let s_min = ss.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = ss.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if s_max == s_min {
        return Ok(KneeResult {
            k_star: ks[0],
            degenerate_curve: true,
        });
    }
    let k_span = (ks[m - 1] - ks[0]) as f64;
    let xs: Vec<f64> = ks.iter().map(|&k| (k - ks[0]) as f64 / k_span).collect();
    let ys: Vec<f64> = ss.iter().map(|&s| (s - s_min) / (s_max - s_min)).collect();

    // Perpendicular distance to the endpoint chord; the constant chord
    // length divides out of the argmax, so compare cross products only.
    let (ax, ay) = (xs[0], ys[0]);
    let (bx, by) = (xs[m - 1], ys[m - 1]);
    let mut best = 0usize;
    let mut best_dist = f64::NEG_INFINITY;
    for i in 0..m {
        let cross = (bx - ax) * (ys[i] - ay) - (by - ay) * (xs[i] - ax);
        let dist = cross.abs();
        // Strictly-better-within-epsilon, so exact mathematical ties (which
        // land an ulp apart after normalization) still break toward the
        // smaller k.
        if dist > best_dist + 1e-12 * dist.max(best_dist.max(0.0)) {
            best_dist = dist;
            best = i;
        }
    }
    Ok(KneeResult {
        k_star: ks[best],
        degenerate_curve: false,
    })
}

/// Writes an SSE curve as comma-separated `k,sse` rows (with header).
/// Floats survive a round trip exactly.
pub fn save_sse_curve(curve: &SseCurve, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "k,sse")?;
    for (k, s) in curve.k_values().iter().zip(curve.sse()) {
        writeln!(out, "{k},{s}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a curve written by [`save_sse_curve`].
pub fn load_sse_curve(path: &Path) -> Result<SseCurve> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "empty SSE file: no header"))?;
    if header != "k,sse" {
        return Err(Error::parse(1, format!("unrecognized header {header:?}")));
    }
    let mut k_values = Vec::new();
    let mut sse = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        let (k_str, s_str) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(lineno, "expected k,sse"))?;
        let k: usize = k_str
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad k {k_str:?}")))?;
        let s: f64 = s_str
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad sse {s_str:?}")))?;
        k_values.push(k);
        sse.push(s);
    }
    SseCurve::new(k_values, sse).map_err(|e| Error::parse(2, e.to_string()))
}
