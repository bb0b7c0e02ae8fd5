//! Score two short segments with greedy token matching, with and without
//! IDF weighting.
//!
//! ```bash
//! cargo run -p influence-scan --example score_segments
//! ```

use influence_scan::segment::split_ngrams;
use influence_scan::{
    bertscore, compute_idf, hash_embed, Level, SegmentRef, SegmentationConfig, Side,
};

fn main() -> anyhow::Result<()> {
    let cfg = SegmentationConfig::ngrams(5);
    let cand = &split_ngrams("a plurality of husbands, instead", &cfg)?[0];
    let reference = &split_ngrams("of a plurality of husbands", &cfg)?[0];

    let cand = hash_embed(
        SegmentRef::new(1, Side::Candidate, Level::Ngram, 0),
        cand,
        64,
    )?;
    let reference = hash_embed(
        SegmentRef::new(1, Side::Reference, Level::Ngram, 0),
        reference,
        64,
    )?;

    let plain = bertscore(&cand, &reference, None)?;
    println!(
        "plain: p = {:.3}, r = {:.3}, F1 = {:.3}",
        plain.p, plain.r, plain.f1
    );

    let idf = compute_idf([&reference]);
    let weighted = bertscore(&cand, &reference, Some(&idf))?;
    println!(
        "idf:   p = {:.3}, r = {:.3}, F1 = {:.3}",
        weighted.p, weighted.r, weighted.f1
    );

    let swapped = bertscore(&reference, &cand, None)?;
    println!("swap:  p = {:.3}, r = {:.3}", swapped.p, swapped.r);
    Ok(())
}
