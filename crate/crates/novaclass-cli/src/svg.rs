//! Minimal SVG document builder for the export figures.
//!
//! Hand-rolled on purpose: the plots are simple enough (rect grids,
//! polylines, scatters) that a plotting dependency would outweigh them.
//! All coordinates are written with fixed precision so the same figure
//! always serializes to the same bytes.

use std::fmt::Write as _;

/// Categorical palette for class colors; indexed modulo its length.
pub const PALETTE: [&str; 8] = [
    "#3b6fb6", "#d1495b", "#66a182", "#edae49", "#8d6a9f", "#00798c", "#a44a3f", "#5c6f68",
];

pub fn class_color(label: usize) -> &'static str {
    PALETTE[label % PALETTE.len()]
}

/// An SVG document under construction. `finish` yields the serialized file.
pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        let mut doc = SvgDoc {
            width,
            height,
            body: String::new(),
        };
        doc.rect(0.0, 0.0, width, height, "#ffffff", None);
        doc
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: Option<&str>) {
        let stroke_attr = match stroke {
            Some(s) => format!(" stroke=\"{s}\" stroke-width=\"1\""),
            None => String::new(),
        };
        writeln!(
            self.body,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"{stroke_attr}/>",
            fmt_coord(x),
            fmt_coord(y),
            fmt_coord(w),
            fmt_coord(h)
        )
        .unwrap();
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dashed: bool) {
        let dash = if dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        writeln!(
            self.body,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"1\"{dash}/>",
            fmt_coord(x1),
            fmt_coord(y1),
            fmt_coord(x2),
            fmt_coord(y2)
        )
        .unwrap();
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, opacity: f64) {
        writeln!(
            self.body,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" fill-opacity=\"{opacity:.2}\"/>",
            fmt_coord(cx),
            fmt_coord(cy),
            fmt_coord(r)
        )
        .unwrap();
    }

    /// An x-shaped marker, used for points without a class label.
    pub fn cross(&mut self, cx: f64, cy: f64, r: f64, stroke: &str) {
        self.line(cx - r, cy - r, cx + r, cy + r, stroke, false);
        self.line(cx - r, cy + r, cx + r, cy - r, stroke, false);
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let mut attr = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            if i > 0 {
                attr.push(' ');
            }
            write!(attr, "{},{}", fmt_coord(x), fmt_coord(y)).unwrap();
        }
        writeln!(
            self.body,
            "<polyline points=\"{attr}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>"
        )
        .unwrap();
    }

    /// `anchor` is an SVG text-anchor value: start, middle, or end.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, fill: &str, text: &str) {
        writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{anchor}\" \
             fill=\"{fill}\" font-family=\"sans-serif\">{}</text>",
            fmt_coord(x),
            fmt_coord(y),
            fmt_coord(size),
            escape(text)
        )
        .unwrap();
    }

    /// Text rotated 90 degrees counter-clockwise about its anchor point,
    /// for y-axis captions.
    pub fn text_vertical(&mut self, x: f64, y: f64, size: f64, fill: &str, text: &str) {
        writeln!(
            self.body,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"{}\" text-anchor=\"middle\" fill=\"{fill}\" \
             font-family=\"sans-serif\" transform=\"rotate(-90 {x} {y})\">{}</text>",
            fmt_coord(size),
            escape(text),
            x = fmt_coord(x),
            y = fmt_coord(y)
        )
        .unwrap();
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" \
             width=\"{}\" height=\"{}\">\n{}</svg>\n",
            fmt_coord(self.width),
            fmt_coord(self.height),
            fmt_coord(self.width),
            fmt_coord(self.height),
            self.body
        )
    }
}

/// Round-valued tick marks covering `[lo, hi]`: step is 1/2/5 times a power
/// of ten chosen to produce roughly `target` ticks.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || target == 0 {
        return vec![lo];
    }
    let raw_step = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw_step.log10().floor());
    let norm = raw_step / mag;
    let step = if norm <= 1.0 {
        mag
    } else if norm <= 2.0 {
        2.0 * mag
    } else if norm <= 5.0 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_structure_and_escaping() {
        let mut doc = SvgDoc::new(100.0, 50.0);
        doc.text(5.0, 10.0, 9.0, "start", "#000", "a<b & c");
        let out = doc.finish();
        assert!(out.starts_with("<svg xmlns"));
        assert!(out.trim_end().ends_with("</svg>"));
        assert!(out.contains("a&lt;b &amp; c"));
        assert!(!out.contains("a<b"));
    }

    #[test]
    fn identical_calls_serialize_identically() {
        let build = || {
            let mut doc = SvgDoc::new(80.0, 80.0);
            doc.circle(40.0, 40.0, 3.5, class_color(2), 0.8);
            doc.polyline(&[(0.0, 0.0), (10.0, 20.0)], "#333");
            doc.finish()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn nice_ticks_are_round_and_cover_range() {
        let ticks = nice_ticks(0.0, 97.0, 5);
        assert!(ticks.len() >= 3);
        assert!(ticks.iter().all(|t| *t >= 0.0 && *t <= 97.0));
        // steps are uniform
        let step = ticks[1] - ticks[0];
        for w in ticks.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9);
        }
    }
}
