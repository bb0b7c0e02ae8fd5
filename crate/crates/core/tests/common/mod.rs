#![allow(dead_code)]

use std::path::{Path, PathBuf};

use influence_scan::embed::hash_embed;
use influence_scan::segment::{segment_passage, SegmentationConfig};
use influence_scan::{EmbeddedSegment, Level, SegmentRef, Side};
use rand::Rng;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn table1_manifest() -> PathBuf {
    fixtures_dir().join("table1.json")
}

pub fn random_unit_rows<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let v: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-3 {
                break v;
            }
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.extend(v.iter().map(|x| (x / norm) as f32));
    }
    out
}

/// A segment of 1..=`max_tokens` random unit rows.
pub fn random_segment<R: Rng>(
    rng: &mut R,
    side: Side,
    index: usize,
    max_tokens: usize,
    dim: usize,
    vocab: &[&str],
) -> EmbeddedSegment {
    let tokens = rng.gen_range(1..=max_tokens);
    let toks = (0..tokens)
        .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
        .collect();
    EmbeddedSegment::new(
        SegmentRef::new(1, side, Level::Sentence, index),
        toks,
        dim,
        random_unit_rows(rng, tokens, dim),
    )
    .unwrap()
}

/// Independent greedy-matching scorer over the stored unit rows: scans every
/// cell directly with f64 dot products.
pub fn brute_force_pr(cand: &EmbeddedSegment, reference: &EmbeddedSegment) -> (f64, f64, f64) {
    let widen = |row: &[f32]| -> Vec<f64> { row.iter().map(|&x| f64::from(x)).collect() };
    let a: Vec<Vec<f64>> = cand.rows().map(widen).collect();
    let b: Vec<Vec<f64>> = reference.rows().map(widen).collect();
    let cos = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut p = 0.0;
    for x in &a {
        let mut best = f64::MIN;
        for y in &b {
            best = best.max(cos(x, y));
        }
        p += best;
    }
    p /= a.len() as f64;
    let mut r = 0.0;
    for y in &b {
        let mut best = f64::MIN;
        for x in &a {
            best = best.max(cos(x, y));
        }
        r += best;
    }
    r /= b.len() as f64;
    let f = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f)
}

pub fn random_word<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(3..9);
    (0..len)
        .map(|_| rng.gen_range(b'a'..=b'z') as char)
        .collect()
}

/// `count` sentences of random lowercase words, capitalized and terminated.
pub fn random_sentences<R: Rng>(rng: &mut R, count: usize) -> Vec<String> {
    (0..count)
        .map(|_| {
            let words: Vec<String> = (0..rng.gen_range(6..14))
                .map(|_| random_word(rng))
                .collect();
            let mut s = words.join(" ");
            s[..1].make_ascii_uppercase();
            s.push('.');
            s
        })
        .collect()
}

/// Sentence-segments `text` and hash-embeds every segment.
pub fn embed_sentences(text: &str, side: Side, dim: usize) -> Vec<EmbeddedSegment> {
    segment_passage(text, &SegmentationConfig::sentences())
        .unwrap()
        .iter()
        .map(|s| hash_embed(SegmentRef::new(1, side, Level::Sentence, s.index), s, dim).unwrap())
        .collect()
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn tree_snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
