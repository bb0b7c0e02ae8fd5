//! Render a heatmap, a pair report and CSV/JSON tables for a small grid.
//!
//! ```bash
//! cargo run -p influence-scan --example render_reports
//! ```

use influence_scan::analyze::{AnalysisParams, MatrixBundle};
use influence_scan::ingest::{ExpertSpan, InstanceSpec, PassageSelector};
use influence_scan::report::{export_tables, render_heatmap, render_pair_report, ReportSpec};
use influence_scan::segment::split_sentences;
use influence_scan::{compare_all, hash_embed, Level, Metric, SegmentRef, Side};

fn main() -> anyhow::Result<()> {
    let cand = split_sentences(
        "They practice a plurality of husbands, instead of wives. The valley is quiet. Nobody is jealous.",
    );
    let refs = split_sentences(
        "A woman may have two husbands. This custom of a plurality of husbands is old.",
    );
    let embed = |side: Side, segs: &[influence_scan::Segment]| {
        segs.iter()
            .map(|s| hash_embed(SegmentRef::new(1, side, Level::Sentence, s.index), s, 64))
            .collect::<Result<Vec<_>, _>>()
    };
    let m = compare_all(
        &embed(Side::Candidate, &cand)?,
        &embed(Side::Reference, &refs)?,
        None,
    )?;
    let bundle = MatrixBundle::analyze(&m, Metric::F1, AnalysisParams::default());

    let out = std::env::temp_dir().join("influence_scan_reports");
    let mut spec = ReportSpec::new(1, Level::Sentence, Metric::F1, &out);
    spec.expert_spans = vec![ExpertSpan {
        side: Side::Candidate,
        start: 14,
        end: 55,
    }];
    std::fs::create_dir_all(spec.instance_dir())?;

    let instance = InstanceSpec {
        instance_id: 1,
        candidate_doc: "typee".into(),
        reference_doc: "stewart".into(),
        candidate_range: PassageSelector::LineSpan { start: 0, end: 1 },
        reference_range: PassageSelector::LineSpan { start: 0, end: 1 },
        notes: String::new(),
        expert_spans: spec.expert_spans.clone(),
    };
    let mut files = export_tables(&bundle, &spec.instance_dir())?;
    files.push(render_heatmap(&m, &spec)?);
    files.push(render_pair_report(
        &instance,
        &bundle.top_pairs,
        &cand,
        &refs,
        &spec,
    )?);
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
