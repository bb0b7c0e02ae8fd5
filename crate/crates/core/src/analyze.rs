//! All-pairs scoring of an instance and the structural diagnostics read off
//! the resulting grid: ranked pairs, generic-segment streaks, and diagonal
//! alignment.
//!
//! Grids are stored row-major with one row per candidate segment. In the
//! rendered heatmap candidates run along the x axis, so a candidate is a
//! "column" there and a reference segment is a "row".

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddedSegment;
use crate::score::{bertscore, IdfWeights, Metric, ScoreError, ScoreTriple};
use crate::segment::Level;

pub const DEFAULT_MIN_TOKENS: usize = 6;
pub const DEFAULT_STREAK_QUANTILE: f64 = 0.90;
pub const DEFAULT_DIAGONAL_WINDOW: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error("cell ({cand_index}, {ref_index}): {source}")]
    Score {
        cand_index: usize,
        ref_index: usize,
        source: ScoreError,
    },
    #[error("{0} segment list is empty")]
    Empty(&'static str),
    #[error("bundle is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub instance_id: u32,
    pub level: Level,
    pub cand_count: usize,
    pub ref_count: usize,
    /// Row-major, `cand_count x ref_count`.
    pub triples: Vec<ScoreTriple>,
    /// Word-token counts used for the short-segment flags.
    pub cand_token_counts: Vec<usize>,
    pub ref_token_counts: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn get(&self, cand: usize, reference: usize) -> ScoreTriple {
        self.triples[cand * self.ref_count + reference]
    }

    pub fn value(&self, cand: usize, reference: usize, metric: Metric) -> f64 {
        self.get(cand, reference).get(metric)
    }

    /// The chosen metric as nested rows, one per candidate.
    pub fn grid(&self, metric: Metric) -> Vec<Vec<f64>> {
        self.triples
            .chunks(self.ref_count)
            .map(|row| row.iter().map(|t| t.get(metric)).collect())
            .collect()
    }
}

fn check_inputs(cand: &[EmbeddedSegment], refs: &[EmbeddedSegment]) -> Result<(), AnalyzeError> {
    if cand.is_empty() {
        return Err(AnalyzeError::Empty("candidate"));
    }
    if refs.is_empty() {
        return Err(AnalyzeError::Empty("reference"));
    }
    Ok(())
}

fn score_row(
    i: usize,
    c: &EmbeddedSegment,
    refs: &[EmbeddedSegment],
    idf: Option<&IdfWeights>,
) -> Result<Vec<ScoreTriple>, AnalyzeError> {
    refs.iter()
        .enumerate()
        .map(|(j, r)| {
            bertscore(c, r, idf).map_err(|source| AnalyzeError::Score {
                cand_index: i,
                ref_index: j,
                source,
            })
        })
        .collect()
}

fn assemble(
    cand: &[EmbeddedSegment],
    refs: &[EmbeddedSegment],
    rows: Vec<Vec<ScoreTriple>>,
) -> SimilarityMatrix {
    let first = cand[0].segment_ref;
    SimilarityMatrix {
        instance_id: first.instance_id,
        level: first.level,
        cand_count: cand.len(),
        ref_count: refs.len(),
        triples: rows.into_iter().flatten().collect(),
        cand_token_counts: cand.iter().map(EmbeddedSegment::token_count).collect(),
        ref_token_counts: refs.iter().map(EmbeddedSegment::token_count).collect(),
    }
}

/// Scores every candidate x reference pair, rows in parallel.
///
/// Each cell is computed independently and written to its own slot, so the
/// result does not depend on scheduling.
pub fn compare_all(
    cand: &[EmbeddedSegment],
    refs: &[EmbeddedSegment],
    idf: Option<&IdfWeights>,
) -> Result<SimilarityMatrix, AnalyzeError> {
    check_inputs(cand, refs)?;
    let rows = cand
        .par_iter()
        .enumerate()
        .map(|(i, c)| score_row(i, c, refs, idf))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(cand, refs, rows))
}

/// Single-threaded [`compare_all`].
pub fn compare_all_sequential(
    cand: &[EmbeddedSegment],
    refs: &[EmbeddedSegment],
    idf: Option<&IdfWeights>,
) -> Result<SimilarityMatrix, AnalyzeError> {
    check_inputs(cand, refs)?;
    let rows = cand
        .iter()
        .enumerate()
        .map(|(i, c)| score_row(i, c, refs, idf))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(cand, refs, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    ShortCandidate,
    ShortReference,
    StreakMember,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::ShortCandidate => "short_candidate",
            Flag::ShortReference => "short_reference",
            Flag::StreakMember => "streak_member",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub cand_index: usize,
    pub ref_index: usize,
    pub triple: ScoreTriple,
    pub metric_used: Metric,
    pub flags: BTreeSet<Flag>,
}

/// The `k` best cells by `metric`, descending, ties by `(cand, ref)`.
///
/// Pairs where either side has fewer than `min_tokens` word tokens are
/// flagged, never dropped.
pub fn top_pairs(
    m: &SimilarityMatrix,
    k: usize,
    metric: Metric,
    min_tokens: usize,
) -> Vec<RankedPair> {
    let mut cells: Vec<(usize, usize)> = (0..m.cand_count)
        .flat_map(|i| (0..m.ref_count).map(move |j| (i, j)))
        .collect();
    cells.sort_by(|&(ai, aj), &(bi, bj)| {
        m.value(bi, bj, metric)
            .total_cmp(&m.value(ai, aj, metric))
            .then((ai, aj).cmp(&(bi, bj)))
    });
    cells
        .into_iter()
        .take(k)
        .map(|(i, j)| {
            let mut flags = BTreeSet::new();
            if m.cand_token_counts[i] < min_tokens {
                flags.insert(Flag::ShortCandidate);
            }
            if m.ref_token_counts[j] < min_tokens {
                flags.insert(Flag::ShortReference);
            }
            RankedPair {
                cand_index: i,
                ref_index: j,
                triple: m.get(i, j),
                metric_used: metric,
                flags,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreakAxis {
    /// A candidate segment whose scores are high against most references.
    CandidateColumn,
    /// A reference segment whose scores are high against most candidates.
    ReferenceRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreakDiagnostic {
    pub axis: StreakAxis,
    pub index: usize,
    pub mean_score: f64,
    pub threshold_used: f64,
}

/// Linear-interpolation quantile (the "type 7" estimator).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn streaks_on_axis(means: Vec<f64>, axis: StreakAxis, q: f64) -> Vec<StreakDiagnostic> {
    let threshold = quantile(&means, q);
    means
        .into_iter()
        .enumerate()
        .filter(|&(_, mean)| mean > threshold)
        .map(|(index, mean_score)| StreakDiagnostic {
            axis,
            index,
            mean_score,
            threshold_used: threshold,
        })
        .collect()
}

/// Flags segments whose mean score strictly exceeds the `quantile` of all
/// per-segment means on the same axis. Candidate columns come first.
pub fn detect_streaks(
    m: &SimilarityMatrix,
    metric: Metric,
    quantile: f64,
) -> Vec<StreakDiagnostic> {
    if m.cand_count < 2 || m.ref_count < 2 {
        return Vec::new();
    }
    let cand_means = (0..m.cand_count)
        .map(|i| (0..m.ref_count).map(|j| m.value(i, j, metric)).sum::<f64>() / m.ref_count as f64)
        .collect();
    let ref_means = (0..m.ref_count)
        .map(|j| {
            (0..m.cand_count)
                .map(|i| m.value(i, j, metric))
                .sum::<f64>()
                / m.cand_count as f64
        })
        .collect();
    let mut out = streaks_on_axis(cand_means, StreakAxis::CandidateColumn, quantile);
    out.extend(streaks_on_axis(
        ref_means,
        StreakAxis::ReferenceRow,
        quantile,
    ));
    out
}

/// Adds [`Flag::StreakMember`] to pairs touching a flagged segment.
pub fn mark_streak_members(pairs: &mut [RankedPair], streaks: &[StreakDiagnostic]) {
    for pair in pairs {
        let hit = streaks.iter().any(|s| match s.axis {
            StreakAxis::CandidateColumn => s.index == pair.cand_index,
            StreakAxis::ReferenceRow => s.index == pair.ref_index,
        });
        if hit {
            pair.flags.insert(Flag::StreakMember);
        }
    }
}

/// Column a candidate row would hit on a perfectly proportional diagonal.
pub fn expected_diagonal_column(row: usize, cand_count: usize, ref_count: usize) -> usize {
    // round(row * ref_count / cand_count), halves rounded up.
    (2 * row * ref_count + cand_count) / (2 * cand_count)
}

/// Fraction of candidate rows whose best column lies within `window` of the
/// proportional diagonal. Ties for the best column resolve to the lowest
/// index.
pub fn diagonal_alignment(m: &SimilarityMatrix, metric: Metric, window: usize) -> f64 {
    if m.cand_count == 0 || m.ref_count == 0 {
        return 0.0;
    }
    let hits = (0..m.cand_count)
        .filter(|&i| {
            let mut best = 0;
            for j in 1..m.ref_count {
                if m.value(i, j, metric) > m.value(i, best, metric) {
                    best = j;
                }
            }
            let expected = expected_diagonal_column(i, m.cand_count, m.ref_count);
            best.abs_diff(expected) <= window
        })
        .count();
    hits as f64 / m.cand_count as f64
}

/// Segment indices carrying each flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSummary {
    pub short_candidate: Vec<usize>,
    pub short_reference: Vec<usize>,
    pub streak_candidate: Vec<usize>,
    pub streak_reference: Vec<usize>,
}

impl FlagSummary {
    pub fn build(m: &SimilarityMatrix, min_tokens: usize, streaks: &[StreakDiagnostic]) -> Self {
        let short = |counts: &[usize]| {
            counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c < min_tokens)
                .map(|(i, _)| i)
                .collect()
        };
        let on = |axis| {
            streaks
                .iter()
                .filter(|s| s.axis == axis)
                .map(|s| s.index)
                .collect()
        };
        Self {
            short_candidate: short(&m.cand_token_counts),
            short_reference: short(&m.ref_token_counts),
            streak_candidate: on(StreakAxis::CandidateColumn),
            streak_reference: on(StreakAxis::ReferenceRow),
        }
    }

    pub fn cell_flags(&self, cand: usize, reference: usize) -> BTreeSet<Flag> {
        let mut flags = BTreeSet::new();
        if self.short_candidate.contains(&cand) {
            flags.insert(Flag::ShortCandidate);
        }
        if self.short_reference.contains(&reference) {
            flags.insert(Flag::ShortReference);
        }
        if self.streak_candidate.contains(&cand) || self.streak_reference.contains(&reference) {
            flags.insert(Flag::StreakMember);
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub top_k: usize,
    pub min_tokens: usize,
    pub streak_quantile: f64,
    pub diagonal_window: usize,
    pub idf: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            top_k: 20,
            min_tokens: DEFAULT_MIN_TOKENS,
            streak_quantile: DEFAULT_STREAK_QUANTILE,
            diagonal_window: DEFAULT_DIAGONAL_WINDOW,
            idf: false,
        }
    }
}

/// JSON bundle for one instance and level. `values` holds the ranking
/// metric; `p`, `r` and `f1` carry the full grids so the matrix can be
/// rebuilt without rescoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBundle {
    pub instance_id: u32,
    pub level: Level,
    pub metric: Metric,
    pub shape: [usize; 2],
    pub values: Vec<Vec<f64>>,
    pub flags: FlagSummary,
    pub streaks: Vec<StreakDiagnostic>,
    pub diagonal_alignment: f64,
    pub top_pairs: Vec<RankedPair>,
    pub params: AnalysisParams,
    pub cand_token_counts: Vec<usize>,
    pub ref_token_counts: Vec<usize>,
    pub p: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub f1: Vec<Vec<f64>>,
}

impl MatrixBundle {
    /// Runs every diagnostic over `m` and packages the results.
    pub fn analyze(m: &SimilarityMatrix, metric: Metric, params: AnalysisParams) -> Self {
        let streaks = detect_streaks(m, metric, params.streak_quantile);
        let mut ranked = top_pairs(m, params.top_k, metric, params.min_tokens);
        mark_streak_members(&mut ranked, &streaks);
        Self {
            instance_id: m.instance_id,
            level: m.level,
            metric,
            shape: [m.cand_count, m.ref_count],
            values: m.grid(metric),
            flags: FlagSummary::build(m, params.min_tokens, &streaks),
            diagonal_alignment: diagonal_alignment(m, metric, params.diagonal_window),
            streaks,
            top_pairs: ranked,
            params,
            cand_token_counts: m.cand_token_counts.clone(),
            ref_token_counts: m.ref_token_counts.clone(),
            p: m.grid(Metric::P),
            r: m.grid(Metric::R),
            f1: m.grid(Metric::F1),
        }
    }

    pub fn grid(&self, metric: Metric) -> &[Vec<f64>] {
        match metric {
            Metric::P => &self.p,
            Metric::R => &self.r,
            Metric::F1 => &self.f1,
        }
    }

    /// Rebuilds the matrix the bundle was made from.
    pub fn to_matrix(&self) -> Result<SimilarityMatrix, AnalyzeError> {
        let [c, r] = self.shape;
        let shape_ok = |g: &[Vec<f64>]| g.len() == c && g.iter().all(|row| row.len() == r);
        if !(shape_ok(&self.p) && shape_ok(&self.r) && shape_ok(&self.f1)) {
            return Err(AnalyzeError::Inconsistent(format!(
                "score grids do not match shape {c}x{r}"
            )));
        }
        if self.cand_token_counts.len() != c || self.ref_token_counts.len() != r {
            return Err(AnalyzeError::Inconsistent(
                "token count lists do not match shape".into(),
            ));
        }
        let triples = (0..c)
            .flat_map(|i| {
                (0..r).map(move |j| ScoreTriple {
                    p: self.p[i][j],
                    r: self.r[i][j],
                    f1: self.f1[i][j],
                })
            })
            .collect();
        Ok(SimilarityMatrix {
            instance_id: self.instance_id,
            level: self.level,
            cand_count: c,
            ref_count: r,
            triples,
            cand_token_counts: self.cand_token_counts.clone(),
            ref_token_counts: self.ref_token_counts.clone(),
        })
    }
}

/// One metric as CSV: one line per candidate, one column per reference.
pub fn matrix_csv(m: &SimilarityMatrix, metric: Metric) -> String {
    let mut out = String::new();
    for row in m.grid(metric) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
