//! Corpus ingestion: loading book files, stripping Project Gutenberg
//! boilerplate, normalizing text, and cutting out the passage each side of a
//! comparison instance works on.
//!
//! Normalization is NFC first, then line-ending cleanup, then paragraph
//! reflow: hard-wrapped lines inside a paragraph are joined with single
//! spaces and paragraphs are separated by exactly one blank line. Curly quotes
//! and dashes are left alone.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: invalid UTF-8 at byte {offset}", path.display())]
    EncodingError { path: PathBuf, offset: usize },
    #[error("{}: no body text left after stripping boilerplate", .0.display())]
    EmptyAfterStrip(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("selector {selector} out of range: {reason}")]
    SelectorOutOfRange { selector: String, reason: String },
    #[error("marker {marker:?} {kind}")]
    MarkerNotFound { marker: String, kind: MarkerProblem },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerProblem {
    Absent,
    Ambiguous(usize),
}

impl fmt::Display for MarkerProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerProblem::Absent => f.write_str("not found"),
            MarkerProblem::Ambiguous(n) => write!(f, "is ambiguous ({n} occurrences)"),
        }
    }
}

/// Cleaned text of one book.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextDocument {
    pub id: String,
    pub title: String,
    pub raw_path: PathBuf,
    pub text: String,
    /// Length of `text` in Unicode scalar values.
    pub char_count: usize,
}

/// Loads a UTF-8 book file, strips Gutenberg boilerplate and normalizes it.
pub fn load_document(path: impl AsRef<Path>, id: &str) -> Result<TextDocument, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let raw = String::from_utf8(bytes).map_err(|e| IngestError::EncodingError {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })?;
    let text = normalize_text(&raw);
    if text.is_empty() {
        return Err(IngestError::EmptyAfterStrip(path.to_path_buf()));
    }
    Ok(TextDocument {
        id: id.to_string(),
        title: id.to_string(),
        raw_path: path.to_path_buf(),
        char_count: text.chars().count(),
        text,
    })
}

/// Full normalization pipeline applied by [`load_document`].
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let unified = composed.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').collect();
    let body = strip_boilerplate(&lines);
    reflow(body)
}

fn is_marker(line: &str, prefix: &str) -> bool {
    line.trim_start().to_uppercase().starts_with(prefix)
}

/// Keeps only the lines strictly inside the innermost START/END marker pair.
pub fn strip_boilerplate<'a>(lines: &'a [&'a str]) -> &'a [&'a str] {
    let mut start = 0;
    let mut end = lines.len();
    // The innermost pair: the last START that precedes the first END after it.
    let first_end = lines.iter().position(|l| is_marker(l, "*** END OF"));
    let search_until = first_end.unwrap_or(lines.len());
    if let Some(s) = lines[..search_until]
        .iter()
        .rposition(|l| is_marker(l, "*** START OF"))
    {
        start = s + 1;
    }
    if let Some(e) = lines[start..]
        .iter()
        .position(|l| is_marker(l, "*** END OF"))
    {
        end = start + e;
    }
    &lines[start..end]
}

fn reflow(lines: &[&str]) -> String {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.push(trimmed);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    paragraphs.join("\n\n")
}

/// One end of a passage selector: a numeric offset or a marker string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Index(usize),
    Marker(String),
}

/// Chooses a contiguous passage of a document.
///
/// `CharSpan` and `LineSpan` are half-open and 0-based; character offsets
/// count Unicode scalar values and lines are the `\n`-separated lines of the
/// normalized text. `MarkerPair` selects the text strictly between two
/// marker strings that must each occur exactly once, trimmed of surrounding
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSelector", into = "RawSelector")]
pub enum PassageSelector {
    CharSpan { start: usize, end: usize },
    LineSpan { start: usize, end: usize },
    MarkerPair { start: String, end: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSelector {
    mode: String,
    start: Bound,
    end: Bound,
}

impl TryFrom<RawSelector> for PassageSelector {
    type Error = String;

    fn try_from(raw: RawSelector) -> Result<Self, Self::Error> {
        match (raw.mode.as_str(), raw.start, raw.end) {
            ("char_span", Bound::Index(start), Bound::Index(end)) => {
                Ok(PassageSelector::CharSpan { start, end })
            }
            ("line_span", Bound::Index(start), Bound::Index(end)) => {
                Ok(PassageSelector::LineSpan { start, end })
            }
            ("marker_pair", Bound::Marker(start), Bound::Marker(end)) => {
                Ok(PassageSelector::MarkerPair { start, end })
            }
            (mode @ ("char_span" | "line_span"), _, _) => {
                Err(format!("{mode} selector needs integer start/end"))
            }
            ("marker_pair", _, _) => Err("marker_pair selector needs string start/end".into()),
            (mode, _, _) => Err(format!("unknown selector mode {mode:?}")),
        }
    }
}

impl From<PassageSelector> for RawSelector {
    fn from(sel: PassageSelector) -> Self {
        match sel {
            PassageSelector::CharSpan { start, end } => RawSelector {
                mode: "char_span".into(),
                start: Bound::Index(start),
                end: Bound::Index(end),
            },
            PassageSelector::LineSpan { start, end } => RawSelector {
                mode: "line_span".into(),
                start: Bound::Index(start),
                end: Bound::Index(end),
            },
            PassageSelector::MarkerPair { start, end } => RawSelector {
                mode: "marker_pair".into(),
                start: Bound::Marker(start),
                end: Bound::Marker(end),
            },
        }
    }
}

impl fmt::Display for PassageSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassageSelector::CharSpan { start, end } => write!(f, "char_span({start}, {end})"),
            PassageSelector::LineSpan { start, end } => write!(f, "line_span({start}, {end})"),
            PassageSelector::MarkerPair { start, end } => {
                write!(f, "marker_pair({start:?}, {end:?})")
            }
        }
    }
}

/// A resolved passage: the text plus its character offsets in the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

fn out_of_range(sel: &PassageSelector, reason: impl Into<String>) -> IngestError {
    IngestError::SelectorOutOfRange {
        selector: sel.to_string(),
        reason: reason.into(),
    }
}

fn find_unique(haystack: &str, marker: &str) -> Result<usize, IngestError> {
    let mut hits = haystack.match_indices(marker).map(|(i, _)| i);
    let first = hits.next().ok_or_else(|| IngestError::MarkerNotFound {
        marker: marker.to_string(),
        kind: MarkerProblem::Absent,
    })?;
    let extra = hits.count();
    if extra > 0 {
        return Err(IngestError::MarkerNotFound {
            marker: marker.to_string(),
            kind: MarkerProblem::Ambiguous(extra + 1),
        });
    }
    Ok(first)
}

fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .nth(char_idx)
}

/// Resolves a selector to byte offsets `[start, end)` in `text`.
fn resolve_bytes(text: &str, sel: &PassageSelector) -> Result<(usize, usize), IngestError> {
    match sel {
        PassageSelector::CharSpan { start, end } => {
            if start >= end {
                return Err(out_of_range(sel, "start must precede end"));
            }
            let b_end = char_to_byte(text, *end)
                .ok_or_else(|| out_of_range(sel, "end exceeds document length"))?;
            let b_start = char_to_byte(text, *start).expect("start < end is in range");
            Ok((b_start, b_end))
        }
        PassageSelector::LineSpan { start, end } => {
            if start >= end {
                return Err(out_of_range(sel, "start must precede end"));
            }
            let mut offsets = vec![0];
            offsets.extend(text.match_indices('\n').map(|(i, _)| i + 1));
            let line_count = offsets.len();
            if *end > line_count {
                return Err(out_of_range(
                    sel,
                    format!("document has {line_count} lines"),
                ));
            }
            let b_start = offsets[*start];
            let b_end = if *end == line_count {
                text.len()
            } else {
                offsets[*end] - 1
            };
            Ok((b_start, b_end))
        }
        PassageSelector::MarkerPair { start, end } => {
            let s = find_unique(text, start)?;
            let e = find_unique(text, end)?;
            let body_start = s + start.len();
            if e < body_start {
                return Err(out_of_range(sel, "end marker precedes start marker"));
            }
            let inner = &text[body_start..e];
            let lead = inner.len() - inner.trim_start().len();
            let trimmed = inner.trim();
            Ok((body_start + lead, body_start + lead + trimmed.len()))
        }
    }
}

/// Resolves `sel` against `doc`, returning the passage and its char offsets.
pub fn resolve_passage(doc: &TextDocument, sel: &PassageSelector) -> Result<Passage, IngestError> {
    let (b_start, b_end) = resolve_bytes(&doc.text, sel)?;
    let text = &doc.text[b_start..b_end];
    if text.trim().is_empty() {
        return Err(out_of_range(sel, "selected passage is empty"));
    }
    let char_start = doc.text[..b_start].chars().count();
    Ok(Passage {
        char_start,
        char_end: char_start + text.chars().count(),
        text: text.to_string(),
    })
}

/// Extracts the passage `sel` picks out of `doc`.
pub fn extract_passage(doc: &TextDocument, sel: &PassageSelector) -> Result<String, IngestError> {
    resolve_passage(doc, sel).map(|p| p.text)
}

/// Which side of an instance a text belongs to. The candidate is the
/// authored text, the reference is the source that was read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Candidate,
    Reference,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Candidate, Side::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Candidate => "candidate",
            Side::Reference => "reference",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A character range of one side's passage flagged by prior scholarship.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertSpan {
    pub side: Side,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub id: String,
    pub title: String,
    pub path: PathBuf,
}

/// One comparison pairing of an authored passage against a source passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub instance_id: u32,
    pub candidate_doc: String,
    pub reference_doc: String,
    pub candidate_range: PassageSelector,
    pub reference_range: PassageSelector,
    #[serde(default)]
    pub notes: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expert_spans: Vec<ExpertSpan>,
}

impl InstanceSpec {
    pub fn doc_id(&self, side: Side) -> &str {
        match side {
            Side::Candidate => &self.candidate_doc,
            Side::Reference => &self.reference_doc,
        }
    }

    pub fn range(&self, side: Side) -> &PassageSelector {
        match side {
            Side::Candidate => &self.candidate_range,
            Side::Reference => &self.reference_range,
        }
    }
}

/// The JSON manifest listing documents and comparison instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub documents: Vec<DocumentEntry>,
    pub instances: Vec<InstanceSpec>,
    /// Directory that relative document paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_json(json: &str, base_dir: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let mut manifest: Manifest =
            serde_json::from_str(json).map_err(|e| IngestError::Manifest(e.to_string()))?;
        manifest.base_dir = base_dir.into();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
            _ => IngestError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&json, base)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let mut seen_docs = std::collections::BTreeSet::new();
        for d in &self.documents {
            if !seen_docs.insert(d.id.as_str()) {
                return Err(IngestError::Manifest(format!(
                    "duplicate document id {:?}",
                    d.id
                )));
            }
        }
        let mut seen_inst = std::collections::BTreeSet::new();
        for inst in &self.instances {
            if !seen_inst.insert(inst.instance_id) {
                return Err(IngestError::Manifest(format!(
                    "duplicate instance_id {}",
                    inst.instance_id
                )));
            }
            if inst.candidate_doc == inst.reference_doc {
                return Err(IngestError::Manifest(format!(
                    "instance {}: candidate_doc and reference_doc are both {:?}",
                    inst.instance_id, inst.candidate_doc
                )));
            }
            for side in Side::BOTH {
                if !seen_docs.contains(inst.doc_id(side)) {
                    return Err(IngestError::Manifest(format!(
                        "instance {}: unknown {side} document {:?}",
                        inst.instance_id,
                        inst.doc_id(side)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn document(&self, id: &str) -> Option<&DocumentEntry> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Loads the document with the given id, resolving its path.
    pub fn load_document(&self, id: &str) -> Result<TextDocument, IngestError> {
        let entry = self
            .document(id)
            .ok_or_else(|| IngestError::Manifest(format!("unknown document id {id:?}")))?;
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        };
        let mut doc = load_document(path, &entry.id)?;
        doc.title = entry.title.clone();
        Ok(doc)
    }
}
