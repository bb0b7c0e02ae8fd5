//! BERTScore-style greedy matching between two embedded segments.
//!
//! Precision averages, over candidate tokens, each token's best cosine match
//! among the reference tokens; recall does the same over reference tokens.
//! F1 is their harmonic mean. With IDF weights the averages become weighted
//! averages. No baseline rescaling is applied.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddedSegment, SegmentRef};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("dimension mismatch: candidate {candidate}, reference {reference}")]
    DimMismatch { candidate: usize, reference: usize },
    #[error("{0}: empty segment")]
    EmptySegment(SegmentRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl ScoreTriple {
    /// Builds a triple, deriving F1 as the harmonic mean of `p` and `r`.
    pub fn from_pr(p: f64, r: f64) -> Self {
        Self {
            p,
            r,
            f1: harmonic_f1(p, r),
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::P => self.p,
            Metric::R => self.r,
            Metric::F1 => self.f1,
        }
    }
}

/// `2pr / (p + r)`, or 0 when `p + r` is not positive.
pub fn harmonic_f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    P,
    R,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::P, Metric::R, Metric::F1];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::P => "p",
            Metric::R => "r",
            Metric::F1 => "f1",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p" => Ok(Metric::P),
            "r" => Ok(Metric::R),
            "f1" => Ok(Metric::F1),
            other => Err(format!("unknown metric {other:?} (expected p, r or f1)")),
        }
    }
}

/// Per-token IDF weights with a fallback for unseen tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfWeights {
    pub weights: BTreeMap<String, f64>,
    pub default_weight: f64,
}

impl IdfWeights {
    pub fn uniform(weight: f64) -> Self {
        Self {
            weights: BTreeMap::new(),
            default_weight: weight,
        }
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.weights
            .get(token)
            .copied()
            .unwrap_or(self.default_weight)
    }
}

/// `weight(t) = ln((N + 1) / (df(t) + 1))` over the given segments, with
/// `ln(N + 1)` for unseen tokens.
pub fn compute_idf<'a, I>(reference_segments: I) -> IdfWeights
where
    I: IntoIterator<Item = &'a EmbeddedSegment>,
{
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0usize;
    for seg in reference_segments {
        n += 1;
        let distinct: BTreeSet<&str> = seg.tokens.iter().map(String::as_str).collect();
        for tok in distinct {
            *df.entry(tok.to_string()).or_default() += 1;
        }
    }
    let total = (n + 1) as f64;
    IdfWeights {
        weights: df
            .into_iter()
            .map(|(tok, d)| (tok, (total / (d + 1) as f64).ln()))
            .collect(),
        default_weight: total.ln(),
    }
}

/// Dense `cand.token_count x ref.token_count` matrix of row dot products,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl CosineMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub fn cosine_matrix(
    cand: &EmbeddedSegment,
    reference: &EmbeddedSegment,
) -> Result<CosineMatrix, ScoreError> {
    if cand.dim() != reference.dim() {
        return Err(ScoreError::DimMismatch {
            candidate: cand.dim(),
            reference: reference.dim(),
        });
    }
    let values = cand
        .rows()
        .flat_map(|a| reference.rows().map(move |b| dot(a, b)))
        .collect();
    Ok(CosineMatrix {
        rows: cand.token_count(),
        cols: reference.token_count(),
        values,
    })
}

/// Mean of `values`, weighted when `weights` has positive total mass.
fn mean(values: &[f64], weights: Option<&[f64]>) -> f64 {
    if let Some(w) = weights {
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total;
        }
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Greedy-matching precision, recall and F1 of `cand` against `reference`.
///
/// When every token of a side carries zero IDF weight, that side falls back
/// to the unweighted mean.
pub fn bertscore(
    cand: &EmbeddedSegment,
    reference: &EmbeddedSegment,
    idf: Option<&IdfWeights>,
) -> Result<ScoreTriple, ScoreError> {
    // EmbeddedSegment guarantees at least one token; kept for hand-built inputs.
    if cand.token_count() == 0 {
        return Err(ScoreError::EmptySegment(cand.segment_ref));
    }
    if reference.token_count() == 0 {
        return Err(ScoreError::EmptySegment(reference.segment_ref));
    }
    let sim = cosine_matrix(cand, reference)?;
    let row_max: Vec<f64> = (0..sim.rows)
        .map(|i| {
            (0..sim.cols)
                .map(|j| sim.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let col_max: Vec<f64> = (0..sim.cols)
        .map(|j| {
            (0..sim.rows)
                .map(|i| sim.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let (cand_w, ref_w) = match idf {
        Some(idf) => (
            Some(
                cand.tokens
                    .iter()
                    .map(|t| idf.weight(t))
                    .collect::<Vec<_>>(),
            ),
            Some(
                reference
                    .tokens
                    .iter()
                    .map(|t| idf.weight(t))
                    .collect::<Vec<_>>(),
            ),
        ),
        None => (None, None),
    };
    let p = mean(&row_max, cand_w.as_deref());
    let r = mean(&col_max, ref_w.as_deref());
    Ok(ScoreTriple::from_pr(p, r))
}
