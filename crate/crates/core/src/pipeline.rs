//! End-to-end orchestration from a manifest: segment, compare, report.
//!
//! Stages talk to each other only through files under the output directory:
//!
//! ```text
//! <out>/<instance_id>/<level>/segments_candidate.jsonl   (segment)
//! <out>/<instance_id>/<level>/segments_reference.jsonl   (segment)
//! <out>/<instance_id>/<level>/bundle.json                (compare)
//! <out>/<instance_id>/<level>/matrix_<metric>.csv        (compare)
//! <out>/<instance_id>/<level>/pairs.csv                  (compare)
//! <out>/<instance_id>/<level>/heatmap_<metric>.svg       (report)
//! <out>/<instance_id>/<level>/pairs.html                 (report)
//! ```

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analyze::{
    compare_all, detect_streaks, mark_streak_members, top_pairs, AnalysisParams, AnalyzeError,
    MatrixBundle, DEFAULT_DIAGONAL_WINDOW, DEFAULT_MIN_TOKENS, DEFAULT_STREAK_QUANTILE,
};
use crate::embed::{
    hash_embed, EmbedError, EmbeddedSegment, EmbeddingStore, SegmentRef, DEFAULT_HASH_DIM,
};
use crate::ingest::{resolve_passage, IngestError, InstanceSpec, Manifest, Side};
use crate::report::{self, ReportError, ReportSpec};
use crate::score::{compute_idf, Metric};
use crate::segment::{
    read_jsonl, segment_passage, write_jsonl, Level, Segment, SegmentError, SegmentationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Segment,
    Compare,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Segment => "segment",
            Stage::Compare => "compare",
            Stage::Report => "report",
        })
    }
}

/// Where an error happened: the stage and, when known, the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Context {
    pub stage: Stage,
    pub instance: Option<u32>,
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.instance {
            Some(id) => write!(f, "[{} instance {}]", self.stage, id),
            None => write!(f, "[{} instance -]", self.stage),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{ctx} configuration error: {message}")]
    Config { ctx: Context, message: String },
    #[error("{ctx} {message}")]
    Data { ctx: Context, message: String },
    #[error("{ctx} missing embeddings for {} segments: {}", .refs.len(), format_refs(.refs))]
    MissingEmbeddings { ctx: Context, refs: Vec<SegmentRef> },
    #[error("{ctx} {}: {source}", path.display())]
    Io {
        ctx: Context,
        path: PathBuf,
        source: io::Error,
    },
}

fn format_refs(refs: &[SegmentRef]) -> String {
    const SHOWN: usize = 20;
    let mut parts: Vec<String> = refs.iter().take(SHOWN).map(ToString::to_string).collect();
    if refs.len() > SHOWN {
        parts.push(format!("... and {} more", refs.len() - SHOWN));
    }
    parts.join(", ")
}

impl PipelineError {
    /// 1 for usage/config problems, 2 for bad input data, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 1,
            PipelineError::Data { .. } | PipelineError::MissingEmbeddings { .. } => 2,
            PipelineError::Io { .. } => 3,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        PipelineError::Config {
            ctx: Context {
                stage: Stage::Config,
                instance: None,
            },
            message: message.into(),
        }
    }
}

fn data(ctx: Context, err: impl fmt::Display) -> PipelineError {
    PipelineError::Data {
        ctx,
        message: err.to_string(),
    }
}

fn io_err(ctx: Context, path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        ctx,
        path: path.to_path_buf(),
        source,
    }
}

fn from_ingest(ctx: Context, err: IngestError) -> PipelineError {
    match err {
        IngestError::Manifest(m) => PipelineError::Config { ctx, message: m },
        IngestError::Io { path, source } => PipelineError::Io { ctx, path, source },
        other => data(ctx, other),
    }
}

fn from_embed(ctx: Context, err: EmbedError) -> PipelineError {
    match err {
        EmbedError::Io { path, source } => PipelineError::Io { ctx, path, source },
        other => data(ctx, other),
    }
}

fn from_report(ctx: Context, err: ReportError) -> PipelineError {
    match err {
        ReportError::Io { path, source } => PipelineError::Io { ctx, path, source },
        other => data(ctx, other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Built-in character-trigram hash embedder.
    Hash,
    /// Precomputed EMBX store.
    Embx,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hash" => Ok(Backend::Hash),
            "embx" | "embx_file" => Ok(Backend::Embx),
            other => Err(format!("unknown backend {other:?} (expected hash or embx)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub levels: Vec<Level>,
    pub n: usize,
    pub overlap: bool,
    pub keep_remainder: bool,
    pub backend: Backend,
    pub embx_path: Option<PathBuf>,
    pub hash_dim: usize,
    pub idf: bool,
    pub metric: Metric,
    pub top_k: usize,
    pub min_tokens: usize,
    pub streak_quantile: f64,
    pub diagonal_window: usize,
    pub output_dir: PathBuf,
    /// Recorded for reproducibility; no pipeline stage draws random numbers.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(manifest_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest_path: manifest_path.into(),
            levels: vec![Level::Sentence, Level::Ngram],
            n: 5,
            overlap: false,
            keep_remainder: true,
            backend: Backend::Hash,
            embx_path: None,
            hash_dim: DEFAULT_HASH_DIM,
            idf: false,
            metric: Metric::P,
            top_k: 20,
            min_tokens: DEFAULT_MIN_TOKENS,
            streak_quantile: DEFAULT_STREAK_QUANTILE,
            diagonal_window: DEFAULT_DIAGONAL_WINDOW,
            output_dir: output_dir.into(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.levels.is_empty() {
            return Err(PipelineError::config("at least one level is required"));
        }
        if self.levels.contains(&Level::Ngram) && self.n < 2 {
            return Err(PipelineError::config(format!(
                "--n must be at least 2, got {}",
                self.n
            )));
        }
        if self.backend == Backend::Embx && self.embx_path.is_none() {
            return Err(PipelineError::config(
                "--backend embx requires --embx <path>",
            ));
        }
        if self.hash_dim == 0 {
            return Err(PipelineError::config("hash dimension must be positive"));
        }
        if self.top_k == 0 {
            return Err(PipelineError::config("--top-k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.streak_quantile) {
            return Err(PipelineError::config(
                "--streak-quantile must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn segmentation(&self, level: Level) -> SegmentationConfig {
        SegmentationConfig {
            level,
            n: self.n,
            overlap: self.overlap,
            keep_remainder: self.keep_remainder,
        }
    }

    pub fn analysis_params(&self) -> AnalysisParams {
        AnalysisParams {
            top_k: self.top_k,
            min_tokens: self.min_tokens,
            streak_quantile: self.streak_quantile,
            diagonal_window: self.diagonal_window,
            idf: self.idf,
        }
    }

    pub fn instance_dir(&self, instance_id: u32, level: Level) -> PathBuf {
        self.output_dir
            .join(instance_id.to_string())
            .join(level.as_str())
    }

    pub fn segment_file(&self, instance_id: u32, level: Level, side: Side) -> PathBuf {
        self.instance_dir(instance_id, level)
            .join(format!("segments_{side}.jsonl"))
    }

    fn load_manifest(&self) -> Result<Manifest, PipelineError> {
        Manifest::load(&self.manifest_path).map_err(|e| match e {
            IngestError::Io { path, source } => PipelineError::Io {
                ctx: Context {
                    stage: Stage::Config,
                    instance: None,
                },
                path,
                source,
            },
            other => PipelineError::config(format!(
                "manifest {}: {other}",
                self.manifest_path.display()
            )),
        })
    }
}

/// Runs `f` for every instance in parallel and returns results in manifest
/// order, or the first error in manifest order.
fn per_instance<T, F>(manifest: &Manifest, f: F) -> Result<Vec<T>, PipelineError>
where
    T: Send,
    F: Fn(&InstanceSpec) -> Result<T, PipelineError> + Sync,
{
    manifest
        .instances
        .par_iter()
        .map(&f)
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Segment counts written for one instance, side and level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentCount {
    pub instance_id: u32,
    pub side: Side,
    pub level: Level,
    pub count: usize,
    pub path: PathBuf,
}

pub fn cmd_segment(config: &RunConfig) -> Result<Vec<SegmentCount>, PipelineError> {
    config.validate()?;
    let manifest = config.load_manifest()?;
    let nested = per_instance(&manifest, |inst| {
        let ctx = Context {
            stage: Stage::Segment,
            instance: Some(inst.instance_id),
        };
        let mut counts = Vec::new();
        for side in Side::BOTH {
            let doc = manifest
                .load_document(inst.doc_id(side))
                .map_err(|e| from_ingest(ctx, e))?;
            let passage = resolve_passage(&doc, inst.range(side))
                .map_err(|e| data(ctx, format!("{side} passage of {:?}: {e}", doc.id)))?;
            for &level in &config.levels {
                let segments = segment_passage(&passage.text, &config.segmentation(level))
                    .map_err(|e| data(ctx, e))?;
                let path = config.segment_file(inst.instance_id, level, side);
                write_segments(&path, &segments).map_err(|e| match e {
                    SegmentError::Io(source) => PipelineError::Io {
                        ctx,
                        path: path.clone(),
                        source,
                    },
                    other => data(ctx, other),
                })?;
                log::info!(
                    "instance {} {side} {level}: {} segments -> {}",
                    inst.instance_id,
                    segments.len(),
                    path.display()
                );
                counts.push(SegmentCount {
                    instance_id: inst.instance_id,
                    side,
                    level,
                    count: segments.len(),
                    path,
                });
            }
        }
        Ok(counts)
    })?;
    Ok(nested.into_iter().flatten().collect())
}

fn write_segments(path: &Path, segments: &[Segment]) -> Result<(), SegmentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_jsonl(BufWriter::new(File::create(path)?), segments)
}

fn read_segments(
    config: &RunConfig,
    ctx: Context,
    inst: u32,
    level: Level,
    side: Side,
) -> Result<Vec<Segment>, PipelineError> {
    let path = config.segment_file(inst, level, side);
    let file = File::open(&path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => data(
            ctx,
            format!(
                "segment file {} not found; run `segment` first",
                path.display()
            ),
        ),
        _ => PipelineError::Io {
            ctx,
            path: path.clone(),
            source: e,
        },
    })?;
    read_jsonl(BufReader::new(file)).map_err(|e| data(ctx, format!("{}: {e}", path.display())))
}

enum Embedder {
    Hash(usize),
    Store(EmbeddingStore),
}

impl Embedder {
    fn embed(&self, r: SegmentRef, seg: &Segment) -> Result<EmbeddedSegment, EmbedError> {
        match self {
            Embedder::Hash(dim) => hash_embed(r, seg, *dim),
            Embedder::Store(store) => store
                .get(&r)?
                .ok_or_else(|| EmbedError::Invalid(format!("{r} not in store"))),
        }
    }
}

/// The bundle for one instance and level.
#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub instance_id: u32,
    pub level: Level,
    pub bundle: MatrixBundle,
    pub dir: PathBuf,
}

type SideSegments = (Vec<Segment>, Vec<Segment>);

pub fn cmd_compare(config: &RunConfig) -> Result<Vec<CompareOutput>, PipelineError> {
    config.validate()?;
    let manifest = config.load_manifest()?;
    let stage_ctx = Context {
        stage: Stage::Compare,
        instance: None,
    };

    // Load every segment file up front so missing embeddings can be reported
    // together.
    let loaded: Vec<Vec<(Level, SideSegments)>> = per_instance(&manifest, |inst| {
        let ctx = Context {
            stage: Stage::Compare,
            instance: Some(inst.instance_id),
        };
        config
            .levels
            .iter()
            .map(|&level| {
                let cand = read_segments(config, ctx, inst.instance_id, level, Side::Candidate)?;
                let refs = read_segments(config, ctx, inst.instance_id, level, Side::Reference)?;
                Ok((level, (cand, refs)))
            })
            .collect()
    })?;

    let embedder = match config.backend {
        Backend::Hash => Embedder::Hash(config.hash_dim),
        Backend::Embx => {
            let path = config.embx_path.as_ref().expect("validated");
            let store = EmbeddingStore::open(path).map_err(|e| from_embed(stage_ctx, e))?;
            let mut missing = Vec::new();
            for (inst, levels) in manifest.instances.iter().zip(&loaded) {
                for (level, (cand, refs)) in levels {
                    for (side, segs) in [(Side::Candidate, cand), (Side::Reference, refs)] {
                        missing.extend(
                            segs.iter()
                                .map(|s| SegmentRef::new(inst.instance_id, side, *level, s.index))
                                .filter(|r| !store.contains(r)),
                        );
                    }
                }
            }
            if !missing.is_empty() {
                let instances: std::collections::BTreeSet<u32> =
                    missing.iter().map(|r| r.instance_id).collect();
                let instance = (instances.len() == 1).then(|| missing[0].instance_id);
                return Err(PipelineError::MissingEmbeddings {
                    ctx: Context {
                        stage: Stage::Compare,
                        instance,
                    },
                    refs: missing,
                });
            }
            log::info!(
                "embedding store {}: {} segments, model {:?}, layer {}, dim {}",
                path.display(),
                store.len(),
                store.header().model_id,
                store.header().layer,
                store.dim()
            );
            Embedder::Store(store)
        }
    };

    let work: Vec<(&InstanceSpec, Level, &SideSegments)> = manifest
        .instances
        .iter()
        .zip(&loaded)
        .flat_map(|(inst, levels)| levels.iter().map(move |(level, segs)| (inst, *level, segs)))
        .collect();

    let outputs: Vec<Result<CompareOutput, PipelineError>> = work
        .par_iter()
        .map(|&(inst, level, (cand, refs))| {
            let ctx = Context {
                stage: Stage::Compare,
                instance: Some(inst.instance_id),
            };
            compare_one(config, &embedder, ctx, inst.instance_id, level, cand, refs)
        })
        .collect();
    outputs.into_iter().collect()
}

fn compare_one(
    config: &RunConfig,
    embedder: &Embedder,
    ctx: Context,
    instance_id: u32,
    level: Level,
    cand: &[Segment],
    refs: &[Segment],
) -> Result<CompareOutput, PipelineError> {
    let embed_side =
        |side: Side, segs: &[Segment]| -> Result<Vec<EmbeddedSegment>, PipelineError> {
            segs.iter()
                .map(|s| {
                    embedder
                        .embed(SegmentRef::new(instance_id, side, level, s.index), s)
                        .map_err(|e| from_embed(ctx, e))
                })
                .collect()
        };
    let cand_emb = embed_side(Side::Candidate, cand)?;
    let ref_emb = embed_side(Side::Reference, refs)?;
    let idf = config.idf.then(|| compute_idf(&ref_emb));
    let mut matrix = compare_all(&cand_emb, &ref_emb, idf.as_ref()).map_err(|e| match e {
        AnalyzeError::Empty(side) => data(ctx, format!("{level}: no {side} segments")),
        other => data(ctx, format!("{level}: {other}")),
    })?;
    // Short-segment flags are defined on word tokens, not embedder tokens.
    matrix.cand_token_counts = cand.iter().map(|s| s.word_tokens.len()).collect();
    matrix.ref_token_counts = refs.iter().map(|s| s.word_tokens.len()).collect();

    let bundle = MatrixBundle::analyze(&matrix, config.metric, config.analysis_params());
    let dir = config.instance_dir(instance_id, level);
    report::export_tables(&bundle, &dir).map_err(|e| from_report(ctx, e))?;
    log::info!(
        "instance {instance_id} {level}: {}x{} grid, diagonal alignment {:.3}, {} streaks",
        matrix.cand_count,
        matrix.ref_count,
        bundle.diagonal_alignment,
        bundle.streaks.len()
    );
    Ok(CompareOutput {
        instance_id,
        level,
        bundle,
        dir,
    })
}

/// Files written by the report stage for one instance and level.
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub instance_id: u32,
    pub level: Level,
    pub files: Vec<PathBuf>,
}

pub fn cmd_report(config: &RunConfig) -> Result<Vec<ReportOutput>, PipelineError> {
    config.validate()?;
    let manifest = config.load_manifest()?;
    let nested = per_instance(&manifest, |inst| {
        let ctx = Context {
            stage: Stage::Report,
            instance: Some(inst.instance_id),
        };
        config
            .levels
            .iter()
            .map(|&level| report_one(config, ctx, inst, level))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(nested.into_iter().flatten().collect())
}

fn report_one(
    config: &RunConfig,
    ctx: Context,
    inst: &InstanceSpec,
    level: Level,
) -> Result<ReportOutput, PipelineError> {
    let dir = config.instance_dir(inst.instance_id, level);
    let bundle_path = dir.join("bundle.json");
    let json = fs::read_to_string(&bundle_path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => data(
            ctx,
            format!("missing bundle: expected {}", bundle_path.display()),
        ),
        _ => io_err(ctx, &bundle_path)(e),
    })?;
    let bundle: MatrixBundle = serde_json::from_str(&json)
        .map_err(|e| data(ctx, format!("{}: {e}", bundle_path.display())))?;
    let matrix = bundle.to_matrix().map_err(|e| data(ctx, e))?;
    let cand = read_segments(config, ctx, inst.instance_id, level, Side::Candidate)?;
    let refs = read_segments(config, ctx, inst.instance_id, level, Side::Reference)?;
    if cand.len() != matrix.cand_count || refs.len() != matrix.ref_count {
        return Err(data(
            ctx,
            format!(
                "{level}: bundle shape {}x{} does not match segment files ({}x{}); rerun compare",
                matrix.cand_count,
                matrix.ref_count,
                cand.len(),
                refs.len()
            ),
        ));
    }

    let mut spec = ReportSpec::new(inst.instance_id, level, config.metric, &config.output_dir);
    spec.expert_spans = inst.expert_spans.clone();
    let mut files = Vec::new();
    for metric in Metric::ALL {
        let spec = ReportSpec {
            metric,
            ..spec.clone()
        };
        files.push(report::render_heatmap(&matrix, &spec).map_err(|e| from_report(ctx, e))?);
    }
    let streaks = detect_streaks(&matrix, config.metric, config.streak_quantile);
    let mut ranked = top_pairs(&matrix, config.top_k, config.metric, config.min_tokens);
    mark_streak_members(&mut ranked, &streaks);
    files.push(
        report::render_pair_report(inst, &ranked, &cand, &refs, &spec)
            .map_err(|e| from_report(ctx, e))?,
    );
    Ok(ReportOutput {
        instance_id: inst.instance_id,
        level,
        files,
    })
}

/// Segment, compare and report in one go. Hash backend only.
pub fn cmd_pipeline(config: &RunConfig) -> Result<Vec<ReportOutput>, PipelineError> {
    config.validate()?;
    if config.backend != Backend::Hash {
        return Err(PipelineError::config(
            "pipeline runs the hash backend only; use segment/compare/report with --backend embx",
        ));
    }
    cmd_segment(config)?;
    cmd_compare(config)?;
    cmd_report(config)
}
