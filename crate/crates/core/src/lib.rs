//! Segment-level semantic similarity between an author's writing and the
//! books they read.
//!
//! Both texts are cut into comparable units (sentences or word 5-grams),
//! every unit is embedded token by token, and every candidate x reference
//! pair is scored with greedy-matching precision, recall and F1. The grid of
//! scores is then ranked, checked for streaks and diagonal structure, and
//! rendered for review.
//!
//! ## Modules
//!
//! - [`ingest`]: book loading, boilerplate stripping, passage selection, manifests
//! - [`segment`]: sentence and n-gram segmentation
//! - [`embed`]: token embeddings, the hash embedder, and the EMBX file format
//! - [`score`]: cosine matrices, greedy-matching P/R/F1, IDF weights
//! - [`analyze`]: all-pairs grids, ranking, streaks, diagonal alignment
//! - [`report`]: SVG heatmaps, HTML pair reports, CSV/JSON tables
//! - [`pipeline`]: the manifest-driven segment/compare/report stages
//!
//! ## Examples
//!
//! Each capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run -p influence-scan --example ingest_passage
//! cargo run -p influence-scan --example segment_passage
//! cargo run -p influence-scan --example score_segments
//! cargo run -p influence-scan --example embx_store
//! cargo run -p influence-scan --example all_pairs
//! cargo run -p influence-scan --example render_reports
//! cargo run -p influence-scan --example table1_pipeline
//! ```

pub mod analyze;
pub mod embed;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod score;
pub mod segment;

pub use analyze::{
    compare_all, detect_streaks, diagonal_alignment, top_pairs, MatrixBundle, RankedPair,
    SimilarityMatrix, StreakDiagnostic,
};
pub use embed::{hash_embed, EmbeddedSegment, EmbeddingStore, SegmentRef, StoreHeader};
pub use ingest::{extract_passage, load_document, Manifest, PassageSelector, Side, TextDocument};
pub use pipeline::{Backend, PipelineError, RunConfig};
pub use score::{bertscore, compute_idf, IdfWeights, Metric, ScoreTriple};
pub use segment::{
    split_ngrams, split_sentences, word_tokenize, Level, Segment, SegmentationConfig,
};
