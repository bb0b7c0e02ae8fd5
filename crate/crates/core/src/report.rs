//! Reviewable outputs: SVG heatmaps, an HTML side-by-side pair report, and
//! CSV/JSON tables.
//!
//! Every renderer is a pure function of its inputs; the `write_*` wrappers
//! only add file I/O.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analyze::{MatrixBundle, RankedPair, SimilarityMatrix};
use crate::ingest::{ExpertSpan, InstanceSpec, Side};
use crate::score::Metric;
use crate::segment::{Level, Segment};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("invalid colormap: {0}")]
    InvalidColorMap(String),
    #[error("no ranked pairs to report")]
    NoPairs,
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ReportError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn parse_hex(s: &str) -> Result<Self, ReportError> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ReportError::InvalidColorMap(format!("bad color {s:?}")));
        }
        let c = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
        Ok(Rgb(c(0), c(2), c(4)))
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Rgb::parse_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Piecewise-linear color scale over strictly increasing anchors, clamped
/// at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorMap {
    anchors: Vec<(f64, Rgb)>,
}

impl Default for ColorMap {
    /// Green at 0.20, yellow at 0.50, red at 0.80.
    fn default() -> Self {
        Self {
            anchors: vec![
                (0.20, Rgb(0x2c, 0xa0, 0x2c)),
                (0.50, Rgb(0xff, 0xdf, 0x00)),
                (0.80, Rgb(0xd6, 0x27, 0x28)),
            ],
        }
    }
}

impl ColorMap {
    pub fn new(anchors: Vec<(f64, Rgb)>) -> Result<Self, ReportError> {
        if anchors.is_empty() {
            return Err(ReportError::InvalidColorMap("no anchors".into()));
        }
        if anchors.iter().any(|(v, _)| !v.is_finite()) {
            return Err(ReportError::InvalidColorMap(
                "non-finite anchor value".into(),
            ));
        }
        if anchors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(ReportError::InvalidColorMap(
                "anchor values must be strictly increasing".into(),
            ));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, Rgb)] {
        &self.anchors
    }

    /// Position along the anchor path: `k + t` for a value a fraction `t` of
    /// the way from anchor `k` to anchor `k + 1`, clamped to
    /// `[0, anchors - 1]`.
    pub fn path_position(&self, v: f64) -> f64 {
        let a = &self.anchors;
        if v <= a[0].0 {
            return 0.0;
        }
        let last = a.len() - 1;
        if v >= a[last].0 {
            return last as f64;
        }
        let k = a.windows(2).position(|w| v < w[1].0).unwrap();
        k as f64 + (v - a[k].0) / (a[k + 1].0 - a[k].0)
    }

    pub fn color(&self, v: f64) -> Rgb {
        let pos = self.path_position(v);
        let k = (pos.floor() as usize).min(self.anchors.len() - 1);
        let t = pos - k as f64;
        let from = self.anchors[k].1;
        if t == 0.0 {
            return from;
        }
        let to = self.anchors[k + 1].1;
        let lerp = |a: u8, b: u8| (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8;
        Rgb(lerp(from.0, to.0), lerp(from.1, to.1), lerp(from.2, to.2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    pub instance_id: u32,
    pub level: Level,
    pub metric: Metric,
    pub colormap: ColorMap,
    pub expert_spans: Vec<ExpertSpan>,
    pub output_dir: PathBuf,
}

impl ReportSpec {
    pub fn new(
        instance_id: u32,
        level: Level,
        metric: Metric,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            instance_id,
            level,
            metric,
            colormap: ColorMap::default(),
            expert_spans: Vec::new(),
            output_dir: output_dir.into(),
        }
    }

    /// `<out>/<instance_id>/<level>`
    pub fn instance_dir(&self) -> PathBuf {
        self.output_dir
            .join(self.instance_id.to_string())
            .join(self.level.as_str())
    }
}

const ANNOTATE_LIMIT: usize = 20;
const MARGIN_LEFT: usize = 64;
const MARGIN_TOP: usize = 48;
const MARGIN_BOTTOM: usize = 56;
const LEGEND_GAP: usize = 24;
const LEGEND_WIDTH: usize = 18;
const LEGEND_STEPS: usize = 60;
const LEGEND_LABEL_ROOM: usize = 48;

fn cell_size(cols: usize, rows: usize, annotate: bool) -> usize {
    if annotate {
        36
    } else if cols.max(rows) <= 80 {
        12
    } else {
        6
    }
}

fn label_step(count: usize) -> usize {
    if count <= 40 {
        1
    } else {
        10
    }
}

/// Renders the chosen metric as an SVG heatmap.
///
/// Candidate segments run along the x axis and reference segments down the
/// y axis. Cells carry numeric annotations when both sides have at most 20
/// segments.
pub fn render_heatmap_svg(m: &SimilarityMatrix, spec: &ReportSpec) -> String {
    let cols = m.cand_count;
    let rows = m.ref_count;
    let annotate = cols <= ANNOTATE_LIMIT && rows <= ANNOTATE_LIMIT;
    let cell = cell_size(cols, rows, annotate);
    let grid_w = cols * cell;
    let grid_h = rows * cell;
    let legend_x = MARGIN_LEFT + grid_w + LEGEND_GAP;
    let legend_h = grid_h.max(120);
    let width = legend_x + LEGEND_WIDTH + LEGEND_LABEL_ROOM;
    let height = MARGIN_TOP + legend_h + MARGIN_BOTTOM;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{MARGIN_LEFT}" y="24" font-size="14">instance {} / {} / {}</text>"#,
        m.instance_id, m.level, spec.metric
    );

    let _ = writeln!(svg, r#"<g class="cells">"#);
    for i in 0..cols {
        for j in 0..rows {
            let v = m.value(i, j, spec.metric);
            let x = MARGIN_LEFT + i * cell;
            let y = MARGIN_TOP + j * cell;
            let _ = writeln!(
                svg,
                r#"<rect class="cell" data-cand="{i}" data-ref="{j}" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/>"#,
                spec.colormap.color(v).to_hex()
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    if annotate {
        let _ = writeln!(
            svg,
            r#"<g class="annotations" font-size="10" text-anchor="middle">"#
        );
        for i in 0..cols {
            for j in 0..rows {
                let v = m.value(i, j, spec.metric);
                let x = MARGIN_LEFT + i * cell + cell / 2;
                let y = MARGIN_TOP + j * cell + cell / 2 + 4;
                let _ = writeln!(svg, r#"<text class="annot" x="{x}" y="{y}">{v:.2}</text>"#);
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g class="axes" font-size="9">"#);
    let step = label_step(cols);
    for i in (0..cols).step_by(step) {
        let x = MARGIN_LEFT + i * cell + cell / 2;
        let y = MARGIN_TOP + grid_h + 12;
        let _ = writeln!(
            svg,
            r#"<text class="xlabel" x="{x}" y="{y}" text-anchor="middle">{i}</text>"#
        );
    }
    let step = label_step(rows);
    for j in (0..rows).step_by(step) {
        let x = MARGIN_LEFT - 4;
        let y = MARGIN_TOP + j * cell + cell / 2 + 3;
        let _ = writeln!(
            svg,
            r#"<text class="ylabel" x="{x}" y="{y}" text-anchor="end">{j}</text>"#
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-title" x="{}" y="{}" text-anchor="middle" font-size="11">candidate segment</text>"#,
        MARGIN_LEFT + grid_w / 2,
        MARGIN_TOP + grid_h + 32
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-title" x="14" y="{y}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {y})">reference segment</text>"#,
        y = MARGIN_TOP + grid_h / 2
    );
    let _ = writeln!(svg, "</g>");

    // Legend: top is the highest anchor, bottom the lowest.
    let anchors = spec.colormap.anchors();
    let lo = anchors[0].0;
    let hi = anchors[anchors.len() - 1].0;
    let _ = writeln!(svg, r#"<g class="legend-strip">"#);
    for s in 0..LEGEND_STEPS {
        let y0 = MARGIN_TOP + s * legend_h / LEGEND_STEPS;
        let y1 = MARGIN_TOP + (s + 1) * legend_h / LEGEND_STEPS;
        let frac = (s as f64 + 0.5) / LEGEND_STEPS as f64;
        let v = hi - frac * (hi - lo);
        let _ = writeln!(
            svg,
            r#"<rect class="legend" x="{legend_x}" y="{y0}" width="{LEGEND_WIDTH}" height="{}" fill="{}"/>"#,
            y1 - y0,
            spec.colormap.color(v).to_hex()
        );
    }
    for &(v, _) in anchors {
        let frac = if hi > lo { (hi - v) / (hi - lo) } else { 0.0 };
        let y = MARGIN_TOP + (frac * legend_h as f64).round() as usize;
        let _ = writeln!(
            svg,
            r#"<text class="legend-label" x="{}" y="{}" font-size="9">{v:.2}</text>"#,
            legend_x + LEGEND_WIDTH + 4,
            y + 3
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

/// Writes `heatmap_<metric>.svg` under the spec's instance directory and
/// returns its path.
pub fn render_heatmap(m: &SimilarityMatrix, spec: &ReportSpec) -> Result<PathBuf, ReportError> {
    let path = spec
        .instance_dir()
        .join(format!("heatmap_{}.svg", spec.metric));
    write_file(&path, render_heatmap_svg(m, spec))?;
    Ok(path)
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Segment-local char ranges covered by the expert spans for `side`.
fn highlight_ranges(seg: &Segment, side: Side, spans: &[ExpertSpan]) -> Vec<(usize, usize)> {
    let mut ranges: Vec<(usize, usize)> = spans
        .iter()
        .filter(|s| s.side == side)
        .filter_map(|s| {
            let start = s.start.max(seg.char_start);
            let end = s.end.min(seg.char_end);
            (start < end).then(|| (start - seg.char_start, end - seg.char_start))
        })
        .collect();
    ranges.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in ranges {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

fn highlighted_text(seg: &Segment, side: Side, spans: &[ExpertSpan]) -> String {
    let ranges = highlight_ranges(seg, side, spans);
    if ranges.is_empty() {
        return escape_html(&seg.text);
    }
    let chars: Vec<char> = seg.text.chars().collect();
    let piece = |a: usize, b: usize| escape_html(&chars[a..b].iter().collect::<String>());
    let mut out = String::new();
    let mut pos = 0;
    for (s, e) in ranges {
        out.push_str(&piece(pos, s));
        out.push_str(r#"<mark class="expert">"#);
        out.push_str(&piece(s, e));
        out.push_str("</mark>");
        pos = e;
    }
    out.push_str(&piece(pos, chars.len()));
    out
}

/// `p = 0.80, r = 0.43, F1 = 0.56`
pub fn format_scores(p: f64, r: f64, f1: f64) -> String {
    format!("p = {p:.2}, r = {r:.2}, F1 = {f1:.2}")
}

/// Side-by-side HTML table of ranked pairs.
pub fn render_pair_report_html(
    instance: &InstanceSpec,
    ranked: &[RankedPair],
    cand_segments: &[Segment],
    ref_segments: &[Segment],
    spec: &ReportSpec,
) -> Result<String, ReportError> {
    if ranked.is_empty() {
        return Err(ReportError::NoPairs);
    }
    let lookup = |segs: &'_ [Segment], idx: usize, side: Side| -> Result<String, ReportError> {
        segs.get(idx)
            .map(|s| highlighted_text(s, side, &spec.expert_spans))
            .ok_or_else(|| ReportError::Invalid(format!("{side} segment {idx} not found")))
    };
    let highlight = !spec.expert_spans.is_empty();

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(
        html,
        "<title>instance {} {} pairs by {}</title>",
        instance.instance_id, spec.level, spec.metric
    );
    html.push_str("<style>\n");
    html.push_str("body { font-family: Georgia, serif; margin: 2em; }\n");
    html.push_str("table { border-collapse: collapse; width: 100%; }\n");
    html.push_str("th, td { border: 1px solid #999; padding: 0.4em; vertical-align: top; }\n");
    html.push_str(".scores { white-space: nowrap; font-family: monospace; }\n");
    html.push_str(".badge { display: inline-block; margin: 0.1em; padding: 0 0.4em; border-radius: 0.6em; background: #eee; font-size: 0.8em; font-family: sans-serif; }\n");
    if highlight {
        html.push_str("mark.expert { background: #b7f0b1; }\n");
    }
    html.push_str("</style>\n</head>\n<body>\n");
    let _ = writeln!(
        html,
        "<h1>Instance {}: {} vs. {}</h1>",
        instance.instance_id,
        escape_html(&instance.candidate_doc),
        escape_html(&instance.reference_doc)
    );
    let _ = writeln!(
        html,
        "<p>Level: {}. Ranked by {}. {} pairs.</p>",
        spec.level,
        spec.metric,
        ranked.len()
    );
    if !instance.notes.is_empty() {
        let _ = writeln!(
            html,
            "<p class=\"notes\">{}</p>",
            escape_html(&instance.notes)
        );
    }
    html.push_str("<table>\n<thead><tr><th>#</th><th>Candidate text</th><th>Reference text</th><th>Results</th></tr></thead>\n<tbody>\n");
    for (rank, pair) in ranked.iter().enumerate() {
        let cand = lookup(cand_segments, pair.cand_index, Side::Candidate)?;
        let reference = lookup(ref_segments, pair.ref_index, Side::Reference)?;
        let badges: String = pair
            .flags
            .iter()
            .map(|f| format!("<span class=\"badge\">{f}</span>"))
            .collect();
        let t = pair.triple;
        let _ = writeln!(
            html,
            "<tr class=\"pair\"><td>{}</td><td>{cand} <small>({} {})</small></td><td>{reference} <small>({} {})</small></td><td class=\"scores\">{}<br>{badges}</td></tr>",
            rank + 1,
            spec.level,
            pair.cand_index,
            spec.level,
            pair.ref_index,
            format_scores(t.p, t.r, t.f1),
        );
    }
    html.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    Ok(html)
}

/// Writes `pairs.html` under the spec's instance directory.
pub fn render_pair_report(
    instance: &InstanceSpec,
    ranked: &[RankedPair],
    cand_segments: &[Segment],
    ref_segments: &[Segment],
    spec: &ReportSpec,
) -> Result<PathBuf, ReportError> {
    let html = render_pair_report_html(instance, ranked, cand_segments, ref_segments, spec)?;
    let path = spec.instance_dir().join("pairs.html");
    write_file(&path, html)?;
    Ok(path)
}

/// One row per matrix cell:
/// `cand_index,ref_index,p,r,f1,cand_tokens,ref_tokens,flags`, flags joined
/// with `;`.
pub fn pairs_csv(bundle: &MatrixBundle) -> Result<String, ReportError> {
    let m = bundle
        .to_matrix()
        .map_err(|e| ReportError::Invalid(e.to_string()))?;
    let mut out = String::from("cand_index,ref_index,p,r,f1,cand_tokens,ref_tokens,flags\n");
    for i in 0..m.cand_count {
        for j in 0..m.ref_count {
            let t = m.get(i, j);
            let flags: Vec<&str> = bundle
                .flags
                .cell_flags(i, j)
                .iter()
                .map(|f| f.as_str())
                .collect();
            let _ = writeln!(
                out,
                "{i},{j},{:.6},{:.6},{:.6},{},{},{}",
                t.p,
                t.r,
                t.f1,
                m.cand_token_counts[i],
                m.ref_token_counts[j],
                flags.join(";")
            );
        }
    }
    Ok(out)
}

/// Writes `pairs.csv`, `matrix_<metric>.csv` for every metric and
/// `bundle.json` into `dir`.
pub fn export_tables(bundle: &MatrixBundle, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let m = bundle
        .to_matrix()
        .map_err(|e| ReportError::Invalid(e.to_string()))?;
    let mut written = Vec::new();
    let path = dir.join("pairs.csv");
    write_file(&path, pairs_csv(bundle)?)?;
    written.push(path);
    for metric in Metric::ALL {
        let path = dir.join(format!("matrix_{metric}.csv"));
        write_file(&path, crate::analyze::matrix_csv(&m, metric))?;
        written.push(path);
    }
    let path = dir.join("bundle.json");
    let mut json =
        serde_json::to_string_pretty(bundle).map_err(|e| ReportError::Invalid(e.to_string()))?;
    json.push('\n');
    write_file(&path, json)?;
    written.push(path);
    Ok(written)
}
