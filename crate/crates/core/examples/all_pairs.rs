//! Compare every sentence of the Israel Potter chapter against its source,
//! then rank pairs and look for streaks and diagonal structure.
//!
//! ```bash
//! cargo run -p influence-scan --example all_pairs
//! ```

use std::path::Path;

use influence_scan::analyze::{AnalysisParams, MatrixBundle};
use influence_scan::segment::segment_passage;
use influence_scan::{
    compare_all, extract_passage, hash_embed, Manifest, Metric, SegmentRef, SegmentationConfig,
    Side,
};

fn main() -> anyhow::Result<()> {
    let manifest =
        Manifest::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/table1.json"))?;
    let inst = &manifest.instances[1];
    let cfg = SegmentationConfig::sentences();

    let mut sides = Vec::new();
    for side in Side::BOTH {
        let doc = manifest.load_document(inst.doc_id(side))?;
        let segments = segment_passage(&extract_passage(&doc, inst.range(side))?, &cfg)?;
        let embedded = segments
            .iter()
            .map(|s| {
                hash_embed(
                    SegmentRef::new(inst.instance_id, side, cfg.level, s.index),
                    s,
                    64,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        sides.push((segments, embedded));
    }
    let (cand_segs, cand) = &sides[0];
    let (ref_segs, refs) = &sides[1];

    let m = compare_all(cand, refs, None)?;
    let bundle = MatrixBundle::analyze(
        &m,
        Metric::P,
        AnalysisParams {
            top_k: 3,
            ..Default::default()
        },
    );
    println!(
        "{}x{} grid, diagonal alignment {:.2}",
        m.cand_count, m.ref_count, bundle.diagonal_alignment
    );
    for pair in &bundle.top_pairs {
        let t = pair.triple;
        println!("p = {:.2}, r = {:.2}, F1 = {:.2}", t.p, t.r, t.f1);
        println!("  {}", cand_segs[pair.cand_index].text);
        println!("  {}", ref_segs[pair.ref_index].text);
    }
    for s in &bundle.streaks {
        println!(
            "streak {:?} {} (mean {:.3} > {:.3})",
            s.axis, s.index, s.mean_score, s.threshold_used
        );
    }
    Ok(())
}
