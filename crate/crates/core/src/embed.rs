//! Token embeddings per segment, and the EMBX interchange file.
//!
//! EMBX layout (integers little-endian):
//!
//! ```text
//! header:  "EMBX" | version u32 | dim u32 | segment_count u64
//!          | backend_name (u16 len + UTF-8) | model_id (u16 len + UTF-8) | layer i32
//! record:  instance_id u32 | side u8 | level u8 | index u32 | token_count u32
//!          | token_count x (u16 len + UTF-8) | token_count*dim f32 row-major
//! ```
//!
//! Rows are L2-normalized before they are written so that a plain dot
//! product between rows is their cosine similarity.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::Side;
use crate::segment::{Level, Segment};

pub const MAGIC: [u8; 4] = *b"EMBX";
pub const FORMAT_VERSION: u32 = 1;
/// Maximum deviation of a row's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_HASH_DIM: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("bad magic {0:?}, expected \"EMBX\"")]
    BadMagic([u8; 4]),
    #[error("unsupported EMBX version {0} (expected {FORMAT_VERSION})")]
    VersionMismatch(u32),
    #[error("corrupt record at byte {offset}: {reason}")]
    CorruptRecord { offset: usize, reason: String },
    #[error("{segment}: row {row} has norm {norm:.6}")]
    NormViolation {
        segment: SegmentRef,
        row: usize,
        norm: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{0}: segment has no tokens")]
    EmptySegment(SegmentRef),
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

/// Identifies one segment across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub instance_id: u32,
    pub side: Side,
    pub level: Level,
    pub index: u32,
}

impl SegmentRef {
    pub fn new(instance_id: u32, side: Side, level: Level, index: usize) -> Self {
        Self {
            instance_id,
            side,
            level,
            index: index as u32,
        }
    }
}

impl fmt::Display for SegmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(instance {}, {}, {}, {})",
            self.instance_id, self.side, self.level, self.index
        )
    }
}

/// A segment's token embeddings: `token_count x dim`, unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSegment {
    pub segment_ref: SegmentRef,
    pub tokens: Vec<String>,
    dim: usize,
    matrix: Vec<f32>,
}

fn row_norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

impl EmbeddedSegment {
    /// Validates shape and row norms.
    pub fn new(
        segment_ref: SegmentRef,
        tokens: Vec<String>,
        dim: usize,
        matrix: Vec<f32>,
    ) -> Result<Self, EmbedError> {
        if tokens.is_empty() {
            return Err(EmbedError::EmptySegment(segment_ref));
        }
        if dim == 0 {
            return Err(EmbedError::Invalid("dim must be positive".into()));
        }
        if matrix.len() != tokens.len() * dim {
            return Err(EmbedError::Invalid(format!(
                "{segment_ref}: matrix has {} values, expected {} tokens x {dim}",
                matrix.len(),
                tokens.len()
            )));
        }
        let seg = Self {
            segment_ref,
            tokens,
            dim,
            matrix,
        };
        seg.check_norms()?;
        Ok(seg)
    }

    fn check_norms(&self) -> Result<(), EmbedError> {
        for (row, values) in self.matrix.chunks_exact(self.dim).enumerate() {
            let norm = row_norm(values);
            if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(EmbedError::NormViolation {
                    segment: self.segment_ref,
                    row,
                    norm,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.matrix.chunks_exact(self.dim)
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Embeds one word as L2-normalized counts of its boundary-marked character
/// trigrams hashed into `dim` buckets.
pub fn hash_embed_word(word: &str, dim: usize) -> Vec<f32> {
    let marked: Vec<char> = std::iter::once('^')
        .chain(word.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut counts = vec![0u32; dim];
    let mut buf = String::with_capacity(12);
    for w in marked.windows(3) {
        buf.clear();
        buf.extend(w);
        counts[(fnv1a64(buf.as_bytes()) % dim as u64) as usize] += 1;
    }
    let norm = counts
        .iter()
        .map(|&c| f64::from(c) * f64::from(c))
        .sum::<f64>()
        .sqrt();
    counts
        .iter()
        .map(|&c| (f64::from(c) / norm) as f32)
        .collect()
}

/// Deterministic model-free embedder over a segment's word tokens.
pub fn hash_embed(
    segment_ref: SegmentRef,
    segment: &Segment,
    dim: usize,
) -> Result<EmbeddedSegment, EmbedError> {
    if segment.word_tokens.is_empty() {
        return Err(EmbedError::EmptySegment(segment_ref));
    }
    if dim == 0 {
        return Err(EmbedError::Invalid("dim must be positive".into()));
    }
    let matrix = segment
        .word_tokens
        .iter()
        .flat_map(|w| hash_embed_word(w, dim))
        .collect();
    EmbeddedSegment::new(segment_ref, segment.word_tokens.clone(), dim, matrix)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub version: u32,
    pub backend_name: String,
    pub model_id: String,
    pub layer: i32,
    pub dim: u32,
    pub segment_count: u64,
}

impl StoreHeader {
    pub fn new(backend_name: &str, model_id: &str, layer: i32, dim: usize) -> Self {
        Self {
            version: FORMAT_VERSION,
            backend_name: backend_name.to_string(),
            model_id: model_id.to_string(),
            layer,
            dim: dim as u32,
            segment_count: 0,
        }
    }

    /// Encoded size in bytes.
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 4 + 8 + 2 + self.backend_name.len() + 2 + self.model_id.len() + 4
    }
}

fn side_code(side: Side) -> u8 {
    match side {
        Side::Candidate => 0,
        Side::Reference => 1,
    }
}

fn level_code(level: Level) -> u8 {
    match level {
        Level::Sentence => 0,
        Level::Ngram => 1,
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str, what: &str) -> Result<(), EmbedError> {
    let len = u16::try_from(s.len())
        .map_err(|_| EmbedError::Invalid(format!("{what} longer than 65535 bytes")))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Serializes a store to bytes. `header.segment_count` is taken from
/// `segments`.
pub fn encode_store<'a, I>(header: &StoreHeader, segments: I) -> Result<Vec<u8>, EmbedError>
where
    I: IntoIterator<Item = &'a EmbeddedSegment>,
{
    let dim = header.dim as usize;
    if dim == 0 {
        return Err(EmbedError::Invalid("header dim must be positive".into()));
    }
    let mut body = Vec::new();
    let mut count: u64 = 0;
    for seg in segments {
        if seg.dim() != dim {
            return Err(EmbedError::DimMismatch {
                expected: dim,
                found: seg.dim(),
            });
        }
        let r = seg.segment_ref;
        body.extend_from_slice(&r.instance_id.to_le_bytes());
        body.push(side_code(r.side));
        body.push(level_code(r.level));
        body.extend_from_slice(&r.index.to_le_bytes());
        body.extend_from_slice(&(seg.token_count() as u32).to_le_bytes());
        for tok in &seg.tokens {
            put_str(&mut body, tok, "token")?;
        }
        for v in seg.matrix() {
            body.extend_from_slice(&v.to_le_bytes());
        }
        count += 1;
    }
    let mut out = Vec::with_capacity(header.encoded_len() + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&header.dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    put_str(&mut out, &header.backend_name, "backend_name")?;
    put_str(&mut out, &header.model_id, "model_id")?;
    out.extend_from_slice(&header.layer.to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn write_store<'a, I>(
    header: &StoreHeader,
    segments: I,
    path: impl AsRef<Path>,
) -> Result<(), EmbedError>
where
    I: IntoIterator<Item = &'a EmbeddedSegment>,
{
    let path = path.as_ref();
    let bytes = encode_store(header, segments)?;
    fs::write(path, bytes).map_err(|source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EmbedError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(EmbedError::CorruptRecord {
                offset: self.pos,
                reason: format!(
                    "{what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, EmbedError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, EmbedError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, EmbedError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32, EmbedError> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, EmbedError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, EmbedError> {
        let len = self.u16(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| EmbedError::CorruptRecord {
            offset: at,
            reason: format!("{what} is not valid UTF-8"),
        })
    }
}

#[derive(Debug, Clone)]
struct RecordLoc {
    tokens: Vec<String>,
    matrix_offset: usize,
}

/// A read-only EMBX store. Structure is validated on open; row norms are
/// checked when a segment is read.
#[derive(Debug)]
pub struct EmbeddingStore {
    header: StoreHeader,
    bytes: Vec<u8>,
    order: Vec<SegmentRef>,
    records: BTreeMap<SegmentRef, RecordLoc>,
}

impl EmbeddingStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(bytes)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, EmbedError> {
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        let magic: [u8; 4] = match cur.take(4, "magic") {
            Ok(m) => m.try_into().unwrap(),
            Err(_) => {
                let mut m = [0u8; 4];
                m[..bytes.len()].copy_from_slice(&bytes);
                return Err(EmbedError::BadMagic(m));
            }
        };
        if magic != MAGIC {
            return Err(EmbedError::BadMagic(magic));
        }
        let version = cur.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(EmbedError::VersionMismatch(version));
        }
        let dim = cur.u32("dim")?;
        if dim == 0 {
            return Err(EmbedError::CorruptRecord {
                offset: 8,
                reason: "header dim is zero".into(),
            });
        }
        let segment_count = cur.u64("segment_count")?;
        let backend_name = cur.string("backend_name")?;
        let model_id = cur.string("model_id")?;
        let layer = cur.i32("layer")?;
        let header = StoreHeader {
            version,
            backend_name,
            model_id,
            layer,
            dim,
            segment_count,
        };

        let mut order = Vec::new();
        let mut records = BTreeMap::new();
        for _ in 0..segment_count {
            let record_start = cur.pos;
            let instance_id = cur.u32("instance_id")?;
            let side = match cur.u8("side")? {
                0 => Side::Candidate,
                1 => Side::Reference,
                other => {
                    return Err(EmbedError::CorruptRecord {
                        offset: record_start + 4,
                        reason: format!("side code {other}"),
                    })
                }
            };
            let level = match cur.u8("level")? {
                0 => Level::Sentence,
                1 => Level::Ngram,
                other => {
                    return Err(EmbedError::CorruptRecord {
                        offset: record_start + 5,
                        reason: format!("level code {other}"),
                    })
                }
            };
            let index = cur.u32("index")?;
            let token_count = cur.u32("token_count")? as usize;
            if token_count == 0 {
                return Err(EmbedError::CorruptRecord {
                    offset: record_start,
                    reason: "record has zero tokens".into(),
                });
            }
            let tokens = (0..token_count)
                .map(|_| cur.string("token"))
                .collect::<Result<Vec<_>, _>>()?;
            let matrix_offset = cur.pos;
            let matrix_len = token_count
                .checked_mul(dim as usize)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| EmbedError::CorruptRecord {
                    offset: record_start,
                    reason: "matrix size overflows".into(),
                })?;
            cur.take(matrix_len, "matrix")?;
            let seg_ref = SegmentRef {
                instance_id,
                side,
                level,
                index,
            };
            if records
                .insert(
                    seg_ref,
                    RecordLoc {
                        tokens,
                        matrix_offset,
                    },
                )
                .is_some()
            {
                return Err(EmbedError::CorruptRecord {
                    offset: record_start,
                    reason: format!("duplicate record {seg_ref}"),
                });
            }
            order.push(seg_ref);
        }
        if cur.pos != bytes.len() {
            return Err(EmbedError::CorruptRecord {
                offset: cur.pos,
                reason: format!("{} trailing bytes after last record", bytes.len() - cur.pos),
            });
        }
        Ok(Self {
            header,
            bytes,
            order,
            records,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.dim as usize
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, r: &SegmentRef) -> bool {
        self.records.contains_key(r)
    }

    /// Segment refs in file order.
    pub fn refs(&self) -> &[SegmentRef] {
        &self.order
    }

    /// Decodes one segment, verifying its row norms.
    pub fn get(&self, r: &SegmentRef) -> Result<Option<EmbeddedSegment>, EmbedError> {
        let Some(loc) = self.records.get(r) else {
            return Ok(None);
        };
        let dim = self.dim();
        let n = loc.tokens.len() * dim;
        let raw = &self.bytes[loc.matrix_offset..loc.matrix_offset + n * 4];
        let matrix = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        EmbeddedSegment::new(*r, loc.tokens.clone(), dim, matrix).map(Some)
    }

    /// Decodes every segment in file order.
    pub fn read_all(&self) -> Result<Vec<EmbeddedSegment>, EmbedError> {
        self.order
            .iter()
            .map(|r| self.get(r).map(|s| s.expect("ref from index")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::split_sentences;

    fn seg(tokens: &[&str]) -> Segment {
        Segment {
            index: 0,
            level: Level::Sentence,
            char_start: 0,
            char_end: 0,
            text: tokens.join(" "),
            word_tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn r(i: usize) -> SegmentRef {
        SegmentRef::new(1, Side::Candidate, Level::Sentence, i)
    }

    fn dot(a: &[f32], b: &[f32]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| f64::from(*x) * f64::from(*y))
            .sum()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"^ca"), 0xc3866b1a13177485);
    }

    #[test]
    fn cat_buckets_match_hand_computation() {
        // ^ca -> 5, cat -> 39, at$ -> 36 (mod 64), one count each.
        let row = hash_embed_word("cat", 64);
        let w = (1.0f64 / 3f64.sqrt()) as f32;
        let mut expected = vec![0f32; 64];
        for b in [5, 39, 36] {
            expected[b] = w;
        }
        assert_eq!(row, expected);
    }

    #[test]
    fn identical_tokens_identical_rows() {
        let e = hash_embed(r(0), &seg(&["cat", "cat"]), 64).unwrap();
        assert_eq!(e.row(0), e.row(1));
        assert!((dot(e.row(0), e.row(1)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn disjoint_trigram_buckets_are_orthogonal() {
        let e = hash_embed(r(0), &seg(&["cat", "dog"]), 64).unwrap();
        assert_eq!(dot(e.row(0), e.row(1)), 0.0);
    }

    #[test]
    fn empty_segment_rejected() {
        assert!(matches!(
            hash_embed(r(0), &seg(&[]), 64),
            Err(EmbedError::EmptySegment(_))
        ));
    }

    #[test]
    fn empty_store_is_valid() {
        let h = StoreHeader::new("hash", "none", -1, 8);
        let bytes = encode_store(&h, &[]).unwrap();
        let store = EmbeddingStore::from_bytes(bytes).unwrap();
        assert_eq!(store.header().segment_count, 0);
        assert!(store.is_empty());
    }

    #[test]
    fn round_trip_bits() {
        let segs: Vec<EmbeddedSegment> = split_sentences("The whale rose. It sank again! Why now?")
            .iter()
            .map(|s| hash_embed(r(s.index), s, 16).unwrap())
            .collect();
        let h = StoreHeader::new("hash", "fnv1a-trigram", -1, 16);
        let bytes = encode_store(&h, &segs).unwrap();
        assert_eq!(bytes, encode_store(&h, &segs).unwrap());
        let store = EmbeddingStore::from_bytes(bytes).unwrap();
        assert_eq!(store.read_all().unwrap(), segs);
        assert_eq!(store.header().backend_name, "hash");
        assert_eq!(store.header().layer, -1);
    }

    #[test]
    fn dim_mismatch_on_write() {
        let e = hash_embed(r(0), &seg(&["cat"]), 8).unwrap();
        let h = StoreHeader::new("hash", "x", -1, 16);
        assert!(matches!(
            encode_store(&h, [&e]),
            Err(EmbedError::DimMismatch {
                expected: 16,
                found: 8
            })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let e = hash_embed(r(0), &seg(&["cat"]), 8).unwrap();
        let h = StoreHeader::new("hash", "x", -1, 8);
        let good = encode_store(&h, [&e]).unwrap();

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            EmbeddingStore::from_bytes(bad),
            Err(EmbedError::BadMagic(m)) if &m == b"XXXX"
        ));

        let mut bad = good.clone();
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            EmbeddingStore::from_bytes(bad),
            Err(EmbedError::VersionMismatch(2))
        ));

        assert!(matches!(
            EmbeddingStore::from_bytes(b"EM".to_vec()),
            Err(EmbedError::BadMagic(_))
        ));
    }

    #[test]
    fn norm_violation_detected_on_read() {
        let e = hash_embed(r(0), &seg(&["cat"]), 8).unwrap();
        let h = StoreHeader::new("hash", "x", -1, 8);
        let mut bytes = encode_store(&h, [&e]).unwrap();
        // Overwrite the first float of the matrix (the last 8 floats).
        let at = bytes.len() - 8 * 4;
        bytes[at..at + 4].copy_from_slice(&5.0f32.to_le_bytes());
        let store = EmbeddingStore::from_bytes(bytes).unwrap();
        assert!(matches!(
            store.get(&r(0)),
            Err(EmbedError::NormViolation { row: 0, .. })
        ));
    }

    #[test]
    fn duplicate_and_trailing_bytes_rejected() {
        let e = hash_embed(r(0), &seg(&["cat"]), 8).unwrap();
        let h = StoreHeader::new("hash", "x", -1, 8);
        let dup = encode_store(&h, [&e, &e]).unwrap();
        assert!(matches!(
            EmbeddingStore::from_bytes(dup),
            Err(EmbedError::CorruptRecord { .. })
        ));
        let mut trailing = encode_store(&h, [&e]).unwrap();
        trailing.push(0);
        assert!(matches!(
            EmbeddingStore::from_bytes(trailing),
            Err(EmbedError::CorruptRecord { .. })
        ));
    }
}
