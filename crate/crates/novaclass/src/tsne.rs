//! Exact t-SNE: 64-d feature vectors down to 2-d for cluster-structure
//! analysis.
//!
//! This is the classic O(n²) algorithm: per-point Gaussian bandwidths found
//! by binary search on perplexity, symmetrized joint affinities, and gradient
//! descent on KL(P‖Q) with a Student-t low-dimensional kernel, momentum,
//! per-coordinate gains, and early exaggeration. Probe sets here are at most
//! ~1,000 points, so the quadratic cost is fine and Barnes-Hut machinery
//! would be dead weight.
//!
//! Everything is deterministic given [`TsneConfig::seed`]. Initial
//! coordinates are drawn from a per-point generator keyed to the point's
//! *id* rather than its row position, and all pairwise reductions run in id
//! order, so permuting the input rows (with their ids) permutes the output
//! bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Floor applied to low-dimensional probabilities `q` inside KL terms.
pub const Q_CLAMP: f64 = 1e-12;

/// Symmetric joint affinities over a point set.
///
/// Invariants (checked by [`AffinityMatrix::new`]): square, symmetric, zero
/// diagonal, non-negative, and summing to 1 (to scalar-type precision; the
/// 1e-9 contract tolerance applies to 64-bit).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix<F> {
    p: Tensor<F>,
}

impl<F: Real> AffinityMatrix<F> {
    /// Validates the invariants and wraps the matrix.
    pub fn new(p: Tensor<F>) -> Result<Self> {
        let shape = p.shape();
        if shape.len() != 2 || shape[0] != shape[1] {
            return Err(Error::invalid_argument(format!(
                "affinity matrix must be square, got shape {shape:?}"
            )));
        }
        let n = shape[0];
        let d = p.data();
        let mut sum = 0.0f64;
        for i in 0..n {
            if d[i * n + i] != F::zero() {
                return Err(Error::invalid_argument(format!(
                    "affinity diagonal entry {i} is {}, expected 0",
                    d[i * n + i]
                )));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !(v >= F::zero()) {
                    return Err(Error::invalid_argument(format!(
                        "affinity entry ({i},{j}) = {v} is negative or NaN"
                    )));
                }
                if v != d[j * n + i] {
                    return Err(Error::invalid_argument(format!(
                        "affinity matrix asymmetric at ({i},{j})"
                    )));
                }
                sum += v.to_f64();
            }
        }
        // 64-bit storage holds the contract tolerance of 1e-9; in 32-bit
        // storage the rounding of ~n² entries dominates, so allow more slack.
        let slack = if (F::one() + F::of(1e-10)) > F::one() {
            1e-9
        } else {
            1e-4
        };
        if (sum - 1.0).abs() > slack {
            return Err(Error::invalid_argument(format!(
                "affinity matrix sums to {sum}, expected 1"
            )));
        }
        Ok(AffinityMatrix { p })
    }

    pub fn n(&self) -> usize {
        self.p.shape()[0]
    }

    pub fn matrix(&self) -> &Tensor<F> {
        &self.p
    }
}

/// Provenance of one embedded row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointId {
    /// Caller-assigned identity; must be unique within one embedding.
    pub index: usize,
    /// Class label, when known.
    pub label: Option<usize>,
}

impl PointId {
    pub fn unlabeled(index: usize) -> Self {
        PointId { index, label: None }
    }

    pub fn labeled(index: usize, label: usize) -> Self {
        PointId {
            index,
            label: Some(label),
        }
    }
}

/// A 2-d embedding: one (y1, y2) row per input point, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D<F> {
    /// Coordinates, shape `[n, 2]`.
    pub y: Tensor<F>,
    /// Row provenance, same order as `y`.
    pub point_ids: Vec<PointId>,
}

impl<F: Real> Embedding2D<F> {
    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    /// The (y1, y2) pair of row `i`.
    pub fn coords(&self, i: usize) -> (F, F) {
        let d = self.y.data();
        (d[2 * i], d[2 * i + 1])
    }
}

/// KL divergence recorded at one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlSample {
    pub iteration: usize,
    pub kl: f64,
}

/// Hyperparameters for [`tsne_embed`].
#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    /// Target perplexity; must satisfy `perplexity < (n − 1) / 3`.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Momentum before and after `momentum_switch_iter`.
    pub momentum_start: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    /// Factor multiplied into P for the first `exaggeration_iters` iterations.
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Z-score the input columns before computing distances.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            momentum_start: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            standardize: false,
            seed: 42,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity > 0.0) {
            return Err(Error::invalid_config("perplexity must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid_config("iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid_config("learning_rate must be positive"));
        }
        for (name, m) in [
            ("momentum_start", self.momentum_start),
            ("momentum_final", self.momentum_final),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::invalid_config(format!(
                    "{name} must be in [0, 1), got {m}"
                )));
            }
        }
        if !(self.early_exaggeration >= 1.0) {
            return Err(Error::invalid_config(
                "early_exaggeration must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Squared Euclidean distances between all rows of `x` (`[n, d]`), as a
/// dense `n×n` buffer in f64.
fn pairwise_sq_dists<F: Real>(x: &Tensor<F>) -> Vec<f64> {
    let n = x.shape()[0];
    let d = x.shape()[1];
    let data = x.data();
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        let xi = &data[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let xj = &data[j * d..(j + 1) * d];
            let mut acc = 0.0f64;
            for (&a, &b) in xi.iter().zip(xj) {
                let diff = a.to_f64() - b.to_f64();
                acc += diff * diff;
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
    out
}

/// Per-row Gaussian affinities at a target perplexity.
///
/// For each point a bandwidth is found by binary search so that the row's
/// perplexity `2^H` matches the target within 1e-3. Returns the row-stochastic
/// conditional matrix (zero diagonal) and the per-point sigma.
pub fn conditional_affinities<F: Real>(
    x: &Tensor<F>,
    perplexity: f64,
) -> Result<(Tensor<F>, Vec<F>)> {
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(Error::invalid_argument(format!(
            "expected an [n, d] matrix, got shape {shape:?}"
        )));
    }
    let n = shape[0];
    if n < 4 {
        return Err(Error::invalid_argument(format!(
            "need at least 4 points for affinities, got {n}"
        )));
    }
    if !(perplexity > 0.0) {
        return Err(Error::invalid_argument("perplexity must be positive"));
    }
    if perplexity >= (n as f64 - 1.0) / 3.0 {
        return Err(Error::invalid_argument(format!(
            "perplexity {perplexity} too large for {n} points (needs perplexity < (n-1)/3)"
        )));
    }

    let d2 = pairwise_sq_dists(x);
    let mut p = vec![F::zero(); n * n];
    let mut sigmas = Vec::with_capacity(n);
    let mut row = vec![0.0f64; n];

    for i in 0..n {
        let dists = &d2[i * n..(i + 1) * n];
        let beta = search_beta(dists, i, perplexity, &mut row)?;
        for j in 0..n {
            p[i * n + j] = F::of(row[j]);
        }
        sigmas.push(F::of((0.5 / beta).sqrt()));
    }

    Ok((
        Tensor::new(vec![n, n], p).expect("shape matches by construction"),
        sigmas,
    ))
}

/// Binary search for the precision `beta = 1/(2σ²)` of row `i` whose Gaussian
/// kernel has perplexity `target`. Writes the normalized row into `row`.
fn search_beta(dists: &[f64], i: usize, target: f64, row: &mut [f64]) -> Result<f64> {
    // Exponents are shifted by the row's minimum distance before
    // exponentiation so large beta cannot underflow every entry at once.
    let min_d = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);

    let mut beta = 1.0f64;
    let mut beta_lo = f64::NEG_INFINITY;
    let mut beta_hi = f64::INFINITY;

    for _ in 0..100 {
        let mut sum = 0.0f64;
        for (j, &d) in dists.iter().enumerate() {
            row[j] = if j == i {
                0.0
            } else {
                (-beta * (d - min_d)).exp()
            };
            sum += row[j];
        }
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::NumericError(format!(
                "degenerate affinity row {i}: kernel sum {sum}"
            )));
        }
        let mut entropy_bits = 0.0f64;
        for v in row.iter_mut() {
            *v /= sum;
            if *v > 0.0 {
                entropy_bits -= *v * v.log2();
            }
        }
        let achieved = entropy_bits.exp2();
        if (achieved - target).abs() < 1e-3 {
            return Ok(beta);
        }
        if achieved > target {
            // Too entropic: sharpen the kernel.
            beta_lo = beta;
            beta = if beta_hi.is_finite() {
                (beta + beta_hi) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_hi = beta;
            beta = if beta_lo.is_finite() {
                (beta + beta_lo) / 2.0
            } else {
                beta / 2.0
            };
        }
    }
    Err(Error::NumericError(format!(
        "perplexity search for point {i} did not converge within 100 iterations"
    )))
}

/// Joint affinities from a conditional matrix: `P_ij = (P_j|i + P_i|j) / 2n`.
///
/// The input must be square and row-stochastic with a zero diagonal (as
/// produced by [`conditional_affinities`]).
pub fn symmetrize_affinities<F: Real>(conditional: &Tensor<F>) -> Result<AffinityMatrix<F>> {
    let shape = conditional.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::invalid_argument(format!(
            "conditional matrix must be square, got shape {shape:?}"
        )));
    }
    let n = shape[0];
    let c = conditional.data();
    let scale = F::of(1.0 / (2.0 * n as f64));
    let mut p = vec![F::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (c[i * n + j] + c[j * n + i]) * scale;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    AffinityMatrix::new(Tensor::new(vec![n, n], p).expect("shape matches by construction"))
}

/// Embeds `[n, d]` feature rows into 2-d.
///
/// `point_ids` gives each row an identity (unique `index`) carried into the
/// output. The run is a pure function of `(x, point_ids, cfg)`: initial
/// coordinates come from a generator seeded per point id, and internal
/// reductions run in id order, so a permuted input produces the identically
/// permuted embedding. Returns the embedding and the KL(P‖Q) history
/// (sampled every 10 iterations plus the final one).
pub fn tsne_embed<F: Real>(
    x: &Tensor<F>,
    point_ids: &[PointId],
    cfg: &TsneConfig,
) -> Result<(Embedding2D<F>, Vec<KlSample>)> {
    cfg.validate()?;
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(Error::invalid_argument(format!(
            "expected an [n, d] matrix, got shape {shape:?}"
        )));
    }
    let (n, d) = (shape[0], shape[1]);
    if point_ids.len() != n {
        return Err(Error::invalid_argument(format!(
            "{} point ids for {n} rows",
            point_ids.len()
        )));
    }
    let mut seen: Vec<usize> = point_ids.iter().map(|p| p.index).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid_argument("point ids must be unique"));
    }

    // Canonical order: ascending id. All arithmetic happens in this order so
    // the result is independent of how the caller arranged the rows.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&r| point_ids[r].index);
    let mut cx = vec![F::zero(); n * d];
    for (c, &r) in order.iter().enumerate() {
        cx[c * d..(c + 1) * d].copy_from_slice(&x.data()[r * d..(r + 1) * d]);
    }
    let mut cx = Tensor::new(vec![n, d], cx).expect("shape matches by construction");
    if cfg.standardize {
        standardize_columns(&mut cx);
    }

    let (conditional, _) = conditional_affinities(&cx, cfg.perplexity)?;
    let joint = symmetrize_affinities(&conditional)?;
    let p = joint.matrix().data();

    // Gaussian(0, 1e-4) init, keyed to the point id so identity, not row
    // position, decides each point's starting coordinates.
    let mut y = vec![0.0f64; n * 2];
    for (c, &r) in order.iter().enumerate() {
        let mut point_rng = init_rng(cfg.seed, point_ids[r].index);
        let g0: f64 = point_rng.sample(StandardNormal);
        let g1: f64 = point_rng.sample(StandardNormal);
        y[2 * c] = g0 * 1e-4;
        y[2 * c + 1] = g1 * 1e-4;
    }

    let mut velocity = vec![0.0f64; n * 2];
    let mut gains = vec![1.0f64; n * 2];
    let mut grad = vec![0.0f64; n * 2];
    let mut q_num = vec![0.0f64; n * n];
    let mut history = Vec::new();
    record_kl(&mut history, 0, p, &y, n, &mut q_num)?;

    for it in 1..=cfg.iterations {
        let exag = if it <= cfg.exaggeration_iters {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it <= cfg.momentum_switch_iter {
            cfg.momentum_start
        } else {
            cfg.momentum_final
        };

        // Student-t numerators and their total.
        let mut z = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dy0 = y[2 * i] - y[2 * j];
                let dy1 = y[2 * i + 1] - y[2 * j + 1];
                let num = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                q_num[i * n + j] = num;
                q_num[j * n + i] = num;
                z += 2.0 * num;
            }
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::NumericError(format!(
                "degenerate low-dimensional kernel at iteration {it}"
            )));
        }

        grad.fill(0.0);
        for i in 0..n {
            let mut g0 = 0.0f64;
            let mut g1 = 0.0f64;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let num = q_num[i * n + j];
                let q = (num / z).max(Q_CLAMP);
                let mult = (exag * p[i * n + j].to_f64() - q) * num;
                g0 += mult * (y[2 * i] - y[2 * j]);
                g1 += mult * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * g0;
            grad[2 * i + 1] = 4.0 * g1;
        }

        for k in 0..n * 2 {
            gains[k] = if (grad[k] > 0.0) != (velocity[k] > 0.0) {
                gains[k] + 0.2
            } else {
                gains[k] * 0.8
            };
            if gains[k] < 0.01 {
                gains[k] = 0.01;
            }
            velocity[k] = momentum * velocity[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        let mut mean0 = 0.0f64;
        let mut mean1 = 0.0f64;
        for i in 0..n {
            mean0 += y[2 * i];
            mean1 += y[2 * i + 1];
        }
        mean0 /= n as f64;
        mean1 /= n as f64;
        for i in 0..n {
            y[2 * i] -= mean0;
            y[2 * i + 1] -= mean1;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericError(format!(
                "non-finite embedding coordinates at iteration {it}"
            )));
        }

        if it % 10 == 0 || it == cfg.iterations {
            record_kl(&mut history, it, p, &y, n, &mut q_num)?;
        }
    }

    // Undo the canonical ordering: output rows line up with the input rows.
    let mut out = vec![F::zero(); n * 2];
    for (c, &r) in order.iter().enumerate() {
        out[2 * r] = F::of(y[2 * c]);
        out[2 * r + 1] = F::of(y[2 * c + 1]);
    }
    Ok((
        Embedding2D {
            y: Tensor::new(vec![n, 2], out).expect("shape matches by construction"),
            point_ids: point_ids.to_vec(),
        },
        history,
    ))
}

/// Per-point initialization generator: a fixed mix of the run seed and the
/// point id.
fn init_rng(seed: u64, index: usize) -> SeededRng {
    SeededRng::seed_from_u64(
        seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

/// KL(P‖Q) at the current coordinates, with Q clamped at [`Q_CLAMP`].
fn record_kl<F: Real>(
    history: &mut Vec<KlSample>,
    iteration: usize,
    p: &[F],
    y: &[f64],
    n: usize,
    q_num: &mut [f64],
) -> Result<()> {
    let mut z = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dy0 = y[2 * i] - y[2 * j];
            let dy1 = y[2 * i + 1] - y[2 * j + 1];
            let num = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
            q_num[i * n + j] = num;
            q_num[j * n + i] = num;
            z += 2.0 * num;
        }
    }
    let mut kl = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let pij = p[i * n + j].to_f64();
            if pij > 0.0 {
                let q = (q_num[i * n + j] / z).max(Q_CLAMP);
                kl += pij * (pij / q).ln();
            }
        }
    }
    if !kl.is_finite() {
        return Err(Error::NumericError(format!(
            "non-finite KL divergence at iteration {iteration}"
        )));
    }
    history.push(KlSample { iteration, kl });
    Ok(())
}

/// Z-scores each column in place; constant columns become zero.
fn standardize_columns<F: Real>(x: &mut Tensor<F>) {
    let n = x.shape()[0];
    let d = x.shape()[1];
    let data = x.data_mut();
    for c in 0..d {
        let mut mean = 0.0f64;
        for r in 0..n {
            mean += data[r * d + c].to_f64();
        }
        mean /= n as f64;
        let mut var = 0.0f64;
        for r in 0..n {
            let diff = data[r * d + c].to_f64() - mean;
            var += diff * diff;
        }
        var /= n as f64;
        let std = var.sqrt();
        if std < 1e-12 {
            for r in 0..n {
                data[r * d + c] = F::zero();
            }
        } else {
            for r in 0..n {
                data[r * d + c] = F::of((data[r * d + c].to_f64() - mean) / std);
            }
        }
    }
}

/// Writes an embedding as a tab-separated table: `id  label  y1  y2`, one
/// row per point, label blank when unknown. Floats survive a round trip
/// exactly.
pub fn save_embedding<F: Real>(embedding: &Embedding2D<F>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id\tlabel\ty1\ty2")?;
    for (i, id) in embedding.point_ids.iter().enumerate() {
        let (y1, y2) = embedding.coords(i);
        match id.label {
            Some(l) => writeln!(out, "{}\t{l}\t{y1}\t{y2}", id.index)?,
            None => writeln!(out, "{}\t\t{y1}\t{y2}", id.index)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a table written by [`save_embedding`].
pub fn load_embedding<F: Real>(path: &Path) -> Result<Embedding2D<F>> {
    let reader = BufReader::new(File::open(path)?);
    let mut y = Vec::new();
    let mut point_ids = Vec::new();
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "empty embedding file: no header"))?;
    if header != "id\tlabel\ty1\ty2" {
        return Err(Error::parse(1, format!("unrecognized header {header:?}")));
    }
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad id {:?}", fields[0])))?;
        let label = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse().map_err(|_| {
                Error::parse(lineno, format!("bad label {:?}", fields[1]))
            })?)
        };
        let y1 = F::parse_str(fields[2])
            .ok_or_else(|| Error::parse(lineno, format!("bad coordinate {:?}", fields[2])))?;
        let y2 = F::parse_str(fields[3])
            .ok_or_else(|| Error::parse(lineno, format!("bad coordinate {:?}", fields[3])))?;
        if !y1.to_f64().is_finite() || !y2.to_f64().is_finite() {
            return Err(Error::parse(lineno, "non-finite coordinate"));
        }
        y.push(y1);
        y.push(y2);
        point_ids.push(PointId { index, label });
    }
    let n = point_ids.len();
    Ok(Embedding2D {
        y: Tensor::new(vec![n, 2], y).expect("two coordinates pushed per row"),
        point_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    /// `[n, d]` tensor of standard normal rows.
    fn gaussian_cloud(n: usize, d: usize, seed: u64) -> Tensor<f64> {
        let mut rng = seeded(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        Tensor::new(vec![n, d], data).unwrap()
    }

    fn ids(n: usize) -> Vec<PointId> {
        (0..n).map(PointId::unlabeled).collect()
    }

    /// Three well-separated equilateral triangles in 64-d.
    fn three_triangles() -> Tensor<f64> {
        let d = 64;
        let mut data = vec![0.0f64; 9 * d];
        // Equilateral triangle with side 1 in the plane of axes (a, a+1),
        // centered far away along axis c.
        let h = 3.0f64.sqrt() / 2.0;
        for (t, (a, c)) in [(0usize, 10usize), (2, 20), (4, 30)].iter().enumerate() {
            let verts = [(0.0, 0.0), (1.0, 0.0), (0.5, h)];
            for (v, &(va, vb)) in verts.iter().enumerate() {
                let row = t * 3 + v;
                data[row * d + a] = va;
                data[row * d + a + 1] = vb;
                data[row * d + c] = 50.0; // triangle offset: inter-triangle distance ≫ 1
            }
        }
        Tensor::new(vec![9, d], data).unwrap()
    }

    #[test]
    fn equidistant_neighbors_share_mass_equally() {
        // Each point's two triangle mates sit at the same distance; at
        // perplexity 2 they split the row's mass evenly, 0.5 each.
        let x = three_triangles();
        let (p, sigmas) = conditional_affinities(&x, 2.0).unwrap();
        let n = 9;
        assert_eq!(sigmas.len(), n);
        let d = p.data();
        for i in 0..n {
            let tri = i / 3;
            let mates: Vec<usize> = (3 * tri..3 * tri + 3).filter(|&j| j != i).collect();
            let (a, b) = (d[i * n + mates[0]], d[i * n + mates[1]]);
            // Same distance, so exactly the same probability ...
            assert_relative_eq!(a, b, max_relative = 1e-12);
            // ... and the pair absorbs essentially all of the row's mass.
            assert_relative_eq!(a, 0.5, epsilon = 1e-3);
            for j in 0..n {
                if j != i && !mates.contains(&j) {
                    assert!(d[i * n + j] < 1e-4, "far point ({i},{j}) got {}", d[i * n + j]);
                }
            }
        }
    }

    #[test]
    fn achieved_perplexity_matches_target() {
        let x = gaussian_cloud(40, 64, 7);
        let target = 10.0;
        let (p, _) = conditional_affinities(&x, target).unwrap();
        let n = 40;
        let d = p.data();
        for i in 0..n {
            let mut h_bits = 0.0f64;
            let mut sum = 0.0f64;
            for j in 0..n {
                let v = d[i * n + j];
                sum += v;
                if v > 0.0 {
                    h_bits -= v * v.log2();
                }
            }
            assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
            assert!(
                (h_bits.exp2() - target).abs() < 1e-3,
                "row {i}: perplexity {}",
                h_bits.exp2()
            );
            assert_eq!(d[i * n + i], 0.0);
        }
    }

    #[test]
    fn duplicate_point_dominates_its_row() {
        let mut x = gaussian_cloud(10, 64, 11);
        let dup: Vec<f64> = x.data()[2 * 64..3 * 64].to_vec();
        x.data_mut()[7 * 64..8 * 64].copy_from_slice(&dup);
        let (p, _) = conditional_affinities(&x, 2.0).unwrap();
        let d = p.data();
        let n = 10;
        for (a, b) in [(2usize, 7usize), (7, 2)] {
            let row = &d[a * n..(a + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(row[b], max, "row {a} should peak at its duplicate {b}");
        }
    }

    #[test]
    fn affinity_preconditions_enforced() {
        let x = gaussian_cloud(3, 8, 1);
        assert!(conditional_affinities(&x, 0.5).is_err()); // n < 4
        let x = gaussian_cloud(10, 8, 1);
        assert!(conditional_affinities(&x, 3.0).is_err()); // perp ≥ (n−1)/3
        assert!(conditional_affinities(&x, 0.0).is_err());
        assert!(conditional_affinities(&x, 2.9).is_ok());
    }

    #[test]
    fn symmetrize_three_point_equilateral_by_hand() {
        // Hand-built conditional matrix of a 3-point equilateral set: each row
        // splits its mass evenly over the two others.
        let c = Tensor::new(
            vec![3, 3],
            vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0],
        )
        .unwrap();
        let joint = symmetrize_affinities(&c).unwrap();
        let d = joint.matrix().data();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 1.0 / 6.0 };
                assert_relative_eq!(d[i * 3 + j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetrized_matrix_sums_to_one() {
        let x = gaussian_cloud(25, 16, 3);
        let (c, _) = conditional_affinities(&x, 5.0).unwrap();
        let joint = symmetrize_affinities(&c).unwrap();
        let sum: f64 = joint.matrix().data().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
        // symmetric-input law: P_ij == P_j|i / n
        let n = 25;
        let cd = c.data();
        let jd = joint.matrix().data();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(
                    jd[i * n + j],
                    (cd[i * n + j] + cd[j * n + i]) / (2.0 * n as f64),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn affinity_matrix_invariants_enforced() {
        // asymmetric
        let bad = Tensor::new(vec![2, 2], vec![0.0, 0.6, 0.4, 0.0]).unwrap();
        assert!(AffinityMatrix::new(bad).is_err());
        // non-zero diagonal
        let bad = Tensor::new(vec![2, 2], vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        assert!(AffinityMatrix::new(bad).is_err());
        // negative entry
        let bad = Tensor::new(vec![2, 2], vec![0.0, -0.5, -0.5, 0.0]).unwrap();
        assert!(AffinityMatrix::new(bad).is_err());
        // doesn't sum to 1
        let bad = Tensor::new(vec![2, 2], vec![0.0, 0.2, 0.2, 0.0]).unwrap();
        assert!(AffinityMatrix::new(bad).is_err());
        // valid
        let good = Tensor::new(vec![2, 2], vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(AffinityMatrix::new(good).is_ok());
    }

    /// Two 64-d Gaussian blobs, centroids 10× the intra-blob spread apart.
    fn two_blobs(per: usize, seed: u64) -> Tensor<f64> {
        let d = 64;
        let mut rng = seeded(seed);
        let mut data = vec![0.0f64; 2 * per * d];
        for b in 0..2 {
            for i in 0..per {
                let row = b * per + i;
                for c in 0..d {
                    let noise: f64 = rng.sample(StandardNormal);
                    // unit spread per coordinate; centroids 80 apart along axis 0
                    data[row * d + c] = noise + if c == 0 { 80.0 * b as f64 } else { 0.0 };
                }
            }
        }
        Tensor::new(vec![2 * per, d], data).unwrap()
    }

    #[test]
    fn separated_blobs_stay_separated_in_two_d() {
        let per = 20;
        let x = two_blobs(per, 5);
        let cfg = TsneConfig {
            perplexity: 8.0,
            iterations: 500,
            learning_rate: 50.0, // the default rate is tuned for much larger point sets
            seed: 9,
            ..TsneConfig::default()
        };
        let (emb, history) = tsne_embed(&x, &ids(2 * per), &cfg).unwrap();
        assert_eq!(emb.len(), 2 * per);
        assert!(emb.y.data().iter().all(|v| v.is_finite()));

        let centroid = |range: std::ops::Range<usize>| {
            let mut c = (0.0f64, 0.0f64);
            for i in range.clone() {
                let (a, b) = emb.coords(i);
                c.0 += a;
                c.1 += b;
            }
            (c.0 / range.len() as f64, c.1 / range.len() as f64)
        };
        let c0 = centroid(0..per);
        let c1 = centroid(per..2 * per);
        let sep = ((c0.0 - c1.0).powi(2) + (c0.1 - c1.1).powi(2)).sqrt();

        let mut spread = 0.0f64;
        for (blob, c) in [(0..per, c0), (per..2 * per, c1)] {
            for i in blob {
                let (a, b) = emb.coords(i);
                spread += ((a - c.0).powi(2) + (b - c.1).powi(2)).sqrt();
            }
        }
        spread /= (2 * per) as f64;
        assert!(
            sep > 3.0 * spread,
            "centroid separation {sep} vs mean spread {spread}"
        );

        // descent contract on the same run
        let first = history.first().unwrap();
        let last = history.last().unwrap();
        assert_eq!(first.iteration, 0);
        assert_eq!(last.iteration, cfg.iterations);
        assert!(last.kl < first.kl, "KL {} → {}", first.kl, last.kl);
        assert!(history.iter().all(|s| s.kl >= 0.0 && s.kl.is_finite()));
    }

    #[test]
    fn six_hundred_rows_embed_cleanly() {
        // 600 features from 6 synthetic families (100 per family), the probe
        // composition used downstream.
        let d = 64;
        let n = 600;
        let mut rng = seeded(31);
        let mut data = vec![0.0f64; n * d];
        for fam in 0..6 {
            for i in 0..100 {
                let row = fam * 100 + i;
                for c in 0..d {
                    let noise: f64 = rng.sample(StandardNormal);
                    data[row * d + c] = noise + if c == fam { 25.0 } else { 0.0 };
                }
            }
        }
        let x = Tensor::new(vec![n, d], data).unwrap();
        let labeled: Vec<PointId> = (0..n).map(|i| PointId::labeled(i, i / 100)).collect();
        let cfg = TsneConfig {
            iterations: 250,
            ..TsneConfig::default()
        };
        let (emb, history) = tsne_embed(&x, &labeled, &cfg).unwrap();
        assert_eq!(emb.len(), 600);
        assert_eq!(emb.y.shape(), &[600, 2]);
        assert!(emb.y.data().iter().all(|v| v.is_finite()));
        assert!(history.last().unwrap().kl < history.first().unwrap().kl);
        assert_eq!(emb.point_ids[250].label, Some(2));
    }

    #[test]
    fn permuting_rows_permutes_the_embedding_exactly() {
        let n = 12;
        let x = gaussian_cloud(n, 16, 17);
        let cfg = TsneConfig {
            perplexity: 3.0,
            iterations: 60,
            seed: 23,
            ..TsneConfig::default()
        };
        let base_ids = ids(n);
        let (emb, _) = tsne_embed(&x, &base_ids, &cfg).unwrap();

        // rotate-by-5 permutation: row r of the permuted input is row perm[r]
        // of the original
        let perm: Vec<usize> = (0..n).map(|r| (r + 5) % n).collect();
        let mut px = vec![0.0f64; n * 16];
        let mut pids = Vec::new();
        for (r, &src) in perm.iter().enumerate() {
            px[r * 16..(r + 1) * 16].copy_from_slice(&x.data()[src * 16..(src + 1) * 16]);
            pids.push(base_ids[src]);
        }
        let px = Tensor::new(vec![n, 16], px).unwrap();
        let (pemb, _) = tsne_embed(&px, &pids, &cfg).unwrap();

        for (r, &src) in perm.iter().enumerate() {
            assert_eq!(
                pemb.coords(r),
                emb.coords(src),
                "row {r} (id {src}) moved under permutation"
            );
        }
    }

    #[test]
    fn same_seed_reproduces_different_seed_differs() {
        let x = gaussian_cloud(10, 8, 2);
        let cfg = TsneConfig {
            perplexity: 2.0,
            iterations: 30,
            seed: 1,
            ..TsneConfig::default()
        };
        let (a, ha) = tsne_embed(&x, &ids(10), &cfg).unwrap();
        let (b, hb) = tsne_embed(&x, &ids(10), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let cfg2 = TsneConfig { seed: 2, ..cfg };
        let (c, _) = tsne_embed(&x, &ids(10), &cfg2).unwrap();
        assert_ne!(a.y.data(), c.y.data());
    }

    #[test]
    fn runaway_learning_rate_reports_iteration() {
        let x = gaussian_cloud(10, 8, 4);
        let cfg = TsneConfig {
            perplexity: 2.0,
            iterations: 50,
            learning_rate: 1e300,
            seed: 3,
            ..TsneConfig::default()
        };
        match tsne_embed(&x, &ids(10), &cfg) {
            Err(Error::NumericError(msg)) => {
                assert!(msg.contains("iteration"), "{msg}");
            }
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let x = gaussian_cloud(5, 8, 4);
        let mut bad = ids(5);
        bad[4].index = 0;
        assert!(tsne_embed(&x, &bad, &TsneConfig { perplexity: 1.2, ..TsneConfig::default() }).is_err());
    }

    #[test]
    fn standardize_flag_changes_scaled_inputs_only_in_scale() {
        // With one dominant column, standardizing changes the affinity
        // structure; the switch must be honored.
        let mut x = gaussian_cloud(12, 4, 6);
        for r in 0..12 {
            x.data_mut()[r * 4] *= 1000.0;
        }
        let cfg = TsneConfig {
            perplexity: 3.0,
            iterations: 40,
            seed: 5,
            ..TsneConfig::default()
        };
        let std_cfg = TsneConfig {
            standardize: true,
            ..cfg.clone()
        };
        let (a, _) = tsne_embed(&x, &ids(12), &cfg).unwrap();
        let (b, _) = tsne_embed(&x, &ids(12), &std_cfg).unwrap();
        assert_ne!(a.y.data(), b.y.data());
    }

    #[test]
    fn embedding_export_round_trips() {
        let x = gaussian_cloud(8, 8, 12);
        let cfg = TsneConfig {
            perplexity: 2.0,
            iterations: 25,
            seed: 6,
            ..TsneConfig::default()
        };
        let mut pids = ids(8);
        pids[3].label = Some(4);
        pids[6].label = Some(0);
        let (emb, _) = tsne_embed::<f64>(&x, &pids, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.tsv");
        save_embedding(&emb, &path).unwrap();
        let loaded: Embedding2D<f64> = load_embedding(&path).unwrap();
        assert_eq!(loaded, emb);
    }

    #[test]
    fn embedding_load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "id\tlabel\ty1\ty2\n0\t\tnot-a-number\t1.0\n").unwrap();
        match load_embedding::<f64>(&path) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
        std::fs::write(&path, "").unwrap();
        match load_embedding::<f64>(&path) {
            Err(Error::Parse { line: 1, message }) => assert!(message.contains("header")),
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TsneConfig::default().validate().is_ok());
        assert!(TsneConfig { perplexity: 0.0, ..TsneConfig::default() }.validate().is_err());
        assert!(TsneConfig { iterations: 0, ..TsneConfig::default() }.validate().is_err());
        assert!(TsneConfig { learning_rate: 0.0, ..TsneConfig::default() }.validate().is_err());
        assert!(TsneConfig { momentum_final: 1.0, ..TsneConfig::default() }.validate().is_err());
        assert!(TsneConfig { early_exaggeration: 0.5, ..TsneConfig::default() }.validate().is_err());
    }
}
