//! Report and figure exports: confusion matrices, SSE curves, embeddings,
//! and cross-validation tables.
//!
//! The delimited-text files are the normative artifacts; the SVG figures
//! are conveniences rendered from the same data. Both are deterministic:
//! exporting the same artifacts twice produces identical bytes.

use std::path::{Path, PathBuf};

use novaclass::cluster::{save_sse_curve, SseCurve};
use novaclass::tsne::{save_embedding, Embedding2D};
use novaclass::wdcnn::{ConfusionMatrix, CrossValidationReport};

use crate::svg::{class_color, nice_ticks, SvgDoc};
use crate::CliError;

/// Everything `export_reports` can write, each piece optional. Class-name
/// slices may be shorter than the label range; missing names fall back to
/// `class_<label>`.
#[derive(Default)]
pub struct Artifacts<'a> {
    pub confusion: Option<(&'a ConfusionMatrix, &'a [String])>,
    /// SSE curve plus the knee estimate to mark on the plot.
    pub sse: Option<(&'a SseCurve, Option<usize>)>,
    pub embedding: Option<(&'a Embedding2D<f32>, &'a [String])>,
    pub cv: Option<&'a CrossValidationReport>,
}

fn class_name(names: &[String], label: usize) -> String {
    names
        .get(label)
        .cloned()
        .unwrap_or_else(|| format!("class_{label}"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every present artifact into `out_dir` (created if missing) and
/// returns the paths written: `confusion.csv`/`.svg`, `sse.csv`/`.svg`,
/// `embedding.tsv`/`.svg`, `cv.csv`.
pub fn export_reports(artifacts: &Artifacts, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut record = |path: PathBuf| written.push(path);

    if let Some((cm, names)) = &artifacts.confusion {
        let text_path = out_dir.join("confusion.csv");
        write_file(&text_path, &confusion_text(cm))?;
        record(text_path);
        let svg_path = out_dir.join("confusion.svg");
        write_file(&svg_path, &confusion_svg(cm, names))?;
        record(svg_path);
    }
    if let Some((curve, knee)) = &artifacts.sse {
        let text_path = out_dir.join("sse.csv");
        save_sse_curve(curve, &text_path)?;
        record(text_path);
        let svg_path = out_dir.join("sse.svg");
        write_file(&svg_path, &sse_svg(curve, *knee))?;
        record(svg_path);
    }
    if let Some((embedding, names)) = &artifacts.embedding {
        let text_path = out_dir.join("embedding.tsv");
        save_embedding(embedding, &text_path)?;
        record(text_path);
        let svg_path = out_dir.join("embedding.svg");
        write_file(&svg_path, &embedding_svg(embedding, names))?;
        record(svg_path);
    }
    if let Some(report) = &artifacts.cv {
        let path = out_dir.join("cv.csv");
        write_file(&path, &report.to_string())?;
        record(path);
    }
    Ok(written)
}

/// `num_classes` rows of `num_classes` comma-separated counts — nothing
/// else, so the shape of the file is the shape of the matrix.
pub fn confusion_text(cm: &ConfusionMatrix) -> String {
    let n = cm.num_classes();
    let mut out = String::new();
    for t in 0..n {
        for p in 0..n {
            if p > 0 {
                out.push(',');
            }
            out.push_str(&cm.count(t, p).to_string());
        }
        out.push('\n');
    }
    out
}

/// Reads a matrix written by [`confusion_text`].
pub fn read_confusion_text(path: &Path) -> Result<ConfusionMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row: Vec<usize> = line
            .split(',')
            .map(|f| f.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|e| {
                CliError::Usage(format!(
                    "{}:{}: bad confusion count: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!(
            "{}: confusion matrix must be square and non-empty",
            path.display()
        )));
    }
    let mut cm = ConfusionMatrix::new(n);
    for (t, row) in rows.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            for _ in 0..count {
                cm.record(t, p);
            }
        }
    }
    Ok(cm)
}

/// Heatmap: rows are true classes, columns predictions, cell intensity is
/// the count relative to the largest cell.
pub fn confusion_svg(cm: &ConfusionMatrix, names: &[String]) -> String {
    let n = cm.num_classes();
    let cell = 52.0;
    let left = 110.0;
    let top = 96.0;
    let width = left + cell * n as f64 + 30.0;
    let height = top + cell * n as f64 + 40.0;
    let mut doc = SvgDoc::new(width, height);
    let max = (0..n)
        .flat_map(|t| (0..n).map(move |p| (t, p)))
        .map(|(t, p)| cm.count(t, p))
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    doc.text(
        left + cell * n as f64 / 2.0,
        24.0,
        13.0,
        "middle",
        "#222",
        &format!("Confusion matrix ({} windows)", cm.total()),
    );
    doc.text(left + cell * n as f64 / 2.0, 44.0, 10.0, "middle", "#555", "predicted class");
    doc.text_vertical(16.0, top + cell * n as f64 / 2.0, 10.0, "#555", "true class");

    for t in 0..n {
        let y = top + cell * t as f64;
        doc.text(
            left - 8.0,
            y + cell / 2.0 + 3.5,
            9.0,
            "end",
            "#222",
            &class_name(names, t),
        );
        for p in 0..n {
            let x = left + cell * p as f64;
            if t == 0 {
                doc.text_vertical(x + cell / 2.0 + 3.5, top - 8.0, 9.0, "#222", &class_name(names, p));
            }
            let count = cm.count(t, p);
            let intensity = count as f64 / max;
            doc.rect(x, y, cell, cell, &heat_color(intensity), Some("#d8d8d8"));
            let text_color = if intensity > 0.55 { "#ffffff" } else { "#222222" };
            doc.text(
                x + cell / 2.0,
                y + cell / 2.0 + 3.5,
                10.0,
                "middle",
                text_color,
                &count.to_string(),
            );
        }
    }
    doc.finish()
}

/// White-to-blue ramp for heatmap cells.
fn heat_color(intensity: f64) -> String {
    let t = intensity.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 59.0),
        lerp(255.0, 111.0),
        lerp(255.0, 182.0)
    )
}

/// Line plot of SSE over k with the knee estimate marked.
pub fn sse_svg(curve: &SseCurve, knee: Option<usize>) -> String {
    let (left, right, top, bottom) = (72.0, 24.0, 40.0, 52.0);
    let (plot_w, plot_h) = (430.0, 260.0);
    let width = left + plot_w + right;
    let height = top + plot_h + bottom;
    let mut doc = SvgDoc::new(width, height);

    let ks = curve.k_values();
    let sse = curve.sse();
    let k_lo = *ks.first().unwrap() as f64;
    let k_hi = *ks.last().unwrap() as f64;
    let s_hi = sse.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let x_of = |k: f64| left + (k - k_lo) / (k_hi - k_lo).max(1.0) * plot_w;
    let y_of = |s: f64| top + plot_h - s / s_hi * plot_h;

    doc.text(left + plot_w / 2.0, 22.0, 13.0, "middle", "#222", "SSE over cluster count");
    doc.line(left, top + plot_h, left + plot_w, top + plot_h, "#333", false);
    doc.line(left, top, left, top + plot_h, "#333", false);
    doc.text(left + plot_w / 2.0, height - 14.0, 10.0, "middle", "#555", "number of clusters k");
    doc.text_vertical(20.0, top + plot_h / 2.0, 10.0, "#555", "SSE");

    for &k in ks {
        let x = x_of(k as f64);
        doc.line(x, top + plot_h, x, top + plot_h + 4.0, "#333", false);
        if ks.len() <= 25 || k % 2 == 0 {
            doc.text(x, top + plot_h + 16.0, 8.5, "middle", "#222", &k.to_string());
        }
    }
    for tick in nice_ticks(0.0, s_hi, 5) {
        let y = y_of(tick);
        doc.line(left - 4.0, y, left, y, "#333", false);
        doc.line(left, y, left + plot_w, y, "#eeeeee", false);
        doc.text(left - 8.0, y + 3.0, 8.5, "end", "#222", &format_tick(tick));
    }

    let points: Vec<(f64, f64)> = ks
        .iter()
        .zip(sse)
        .map(|(&k, &s)| (x_of(k as f64), y_of(s)))
        .collect();
    doc.polyline(&points, "#3b6fb6");
    for &(x, y) in &points {
        doc.circle(x, y, 2.4, "#3b6fb6", 1.0);
    }

    if let Some(k_star) = knee {
        if let Some(pos) = ks.iter().position(|&k| k == k_star) {
            let (x, y) = points[pos];
            doc.line(x, top, x, top + plot_h, "#d1495b", true);
            doc.circle(x, y, 4.0, "#d1495b", 1.0);
            doc.text(x + 6.0, top + 14.0, 10.0, "start", "#d1495b", &format!("k* = {k_star}"));
        }
    }
    doc.finish()
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1000.0 {
        format!("{:.0}", v)
    } else if v.abs() >= 1.0 {
        format!("{v}")
    } else {
        format!("{v:.3}")
    }
}

/// Scatter of the 2-d embedding: labeled reference points colored by
/// class, unlabeled suspect points drawn as crosses.
pub fn embedding_svg(embedding: &Embedding2D<f32>, names: &[String]) -> String {
    let (left, top, plot, legend_w) = (40.0, 40.0, 430.0, 150.0);
    let width = left + plot + 20.0 + legend_w;
    let height = top + plot + 30.0;
    let mut doc = SvgDoc::new(width, height);
    doc.text(left + plot / 2.0, 22.0, 13.0, "middle", "#222", "t-SNE embedding");
    doc.rect(left, top, plot, plot, "#fcfcfc", Some("#cccccc"));

    let n = embedding.len();
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = embedding.coords(i);
            (f64::from(a), f64::from(b))
        })
        .collect();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &coords {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    let pad = ((x_hi - x_lo).max(y_hi - y_lo).max(1e-9)) * 0.05;
    let (x_lo, x_hi, y_lo, y_hi) = (x_lo - pad, x_hi + pad, y_lo - pad, y_hi + pad);
    let x_of = |x: f64| left + (x - x_lo) / (x_hi - x_lo) * plot;
    let y_of = |y: f64| top + plot - (y - y_lo) / (y_hi - y_lo) * plot;

    let mut labels_present: Vec<usize> = embedding
        .point_ids
        .iter()
        .filter_map(|id| id.label)
        .collect();
    labels_present.sort_unstable();
    labels_present.dedup();
    let has_unlabeled = embedding.point_ids.iter().any(|id| id.label.is_none());

    for (i, id) in embedding.point_ids.iter().enumerate() {
        let (x, y) = (x_of(coords[i].0), y_of(coords[i].1));
        match id.label {
            Some(label) => doc.circle(x, y, 2.6, class_color(label), 0.75),
            None => doc.cross(x, y, 2.6, "#222222"),
        }
    }

    let legend_x = left + plot + 20.0;
    let mut legend_y = top + 10.0;
    doc.text(legend_x, legend_y, 10.0, "start", "#555", "classes");
    legend_y += 16.0;
    for &label in &labels_present {
        doc.circle(legend_x + 5.0, legend_y - 3.0, 4.0, class_color(label), 0.9);
        doc.text(
            legend_x + 16.0,
            legend_y,
            9.5,
            "start",
            "#222",
            &format!("{label}: {}", class_name(names, label)),
        );
        legend_y += 16.0;
    }
    if has_unlabeled {
        doc.cross(legend_x + 5.0, legend_y - 3.0, 4.0, "#222222");
        doc.text(legend_x + 16.0, legend_y, 9.5, "start", "#222", "suspect (unlabeled)");
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use novaclass::tsne::PointId;
    use novaclass::tensor::Tensor;

    use super::*;

    fn sample_cm() -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(5);
        for t in 0..5 {
            for p in 0..5 {
                for _ in 0..(if t == p { 40 } else { t + p }) {
                    cm.record(t, p);
                }
            }
        }
        cm
    }

    #[test]
    fn confusion_text_is_square_and_round_trips() {
        let cm = sample_cm();
        let text = confusion_text(&cm);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 5);
        for row in &rows {
            assert_eq!(row.split(',').count(), 5);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.csv");
        write_file(&path, &text).unwrap();
        let back = read_confusion_text(&path).unwrap();
        assert_eq!(back, cm);
    }

    #[test]
    fn read_confusion_rejects_ragged_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.csv");
        write_file(&path, "1,2\n3\n").unwrap();
        assert!(matches!(
            read_confusion_text(&path),
            Err(CliError::Usage(_))
        ));
    }

    fn sample_embedding() -> Embedding2D<f32> {
        let coords = vec![0.0f32, 0.0, 1.0, 2.0, -1.5, 0.5, 2.0, -1.0];
        Embedding2D {
            y: Tensor::new(vec![4, 2], coords).unwrap(),
            point_ids: vec![
                PointId { index: 0, label: None },
                PointId { index: 1, label: Some(0) },
                PointId { index: 2, label: Some(1) },
                PointId { index: 3, label: Some(1) },
            ],
        }
    }

    #[test]
    fn export_reports_writes_the_full_file_set() {
        let cm = sample_cm();
        let names: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        let curve = SseCurve::new((1..=20).collect(), (1..=20).map(|k| 100.0 / k as f64).collect())
            .unwrap();
        let embedding = sample_embedding();
        let cv = CrossValidationReport::from_accuracies(vec![0.99, 0.98, 1.0, 0.97, 0.99]);
        let artifacts = Artifacts {
            confusion: Some((&cm, &names)),
            sse: Some((&curve, Some(4))),
            embedding: Some((&embedding, &names)),
            cv: Some(&cv),
        };
        let dir = tempfile::tempdir().unwrap();
        let written = export_reports(&artifacts, dir.path()).unwrap();
        let file_names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            file_names,
            ["confusion.csv", "confusion.svg", "sse.csv", "sse.svg",
             "embedding.tsv", "embedding.svg", "cv.csv"]
        );
        for path in &written {
            assert!(path.exists(), "{path:?} missing");
        }
        // SSE text has exactly the 20 sweep rows after its header.
        let sse_text = std::fs::read_to_string(dir.path().join("sse.csv")).unwrap();
        assert_eq!(sse_text.lines().count(), 21);
        // CV table: header, 5 fold rows, average row.
        let cv_text = std::fs::read_to_string(dir.path().join("cv.csv")).unwrap();
        assert_eq!(cv_text.lines().count(), 7);
        assert!(cv_text.lines().last().unwrap().starts_with("average,"));
    }

    #[test]
    fn exports_are_deterministic() {
        let cm = sample_cm();
        let names: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        assert_eq!(confusion_svg(&cm, &names), confusion_svg(&cm, &names));
        let curve =
            SseCurve::new((1..=20).collect(), (1..=20).map(|k| 50.0 / k as f64).collect()).unwrap();
        assert_eq!(sse_svg(&curve, Some(4)), sse_svg(&curve, Some(4)));
        let embedding = sample_embedding();
        assert_eq!(embedding_svg(&embedding, &names), embedding_svg(&embedding, &names));
    }

    #[test]
    fn svg_figures_mark_their_content() {
        let curve =
            SseCurve::new((1..=20).collect(), (1..=20).map(|k| 50.0 / k as f64).collect()).unwrap();
        let svg = sse_svg(&curve, Some(6));
        assert!(svg.contains("k* = 6"));
        assert!(svg.contains("<polyline"));
        let embedding = sample_embedding();
        let names: Vec<String> = vec!["healthy".into(), "low_flow".into()];
        let svg = embedding_svg(&embedding, &names);
        assert!(svg.contains("healthy"));
        assert!(svg.contains("suspect (unlabeled)"));
    }
}
