//! Write hash embeddings to an EMBX file, reopen it and read one record back.
//!
//! ```bash
//! cargo run -p influence-scan --example embx_store
//! ```

use influence_scan::embed::write_store;
use influence_scan::segment::split_sentences;
use influence_scan::{hash_embed, EmbeddingStore, Level, SegmentRef, Side, StoreHeader};

fn main() -> anyhow::Result<()> {
    let text = "Call me Ishmael. Some years ago I thought I would sail about a little.";
    let embedded = split_sentences(text)
        .iter()
        .map(|s| {
            hash_embed(
                SegmentRef::new(1, Side::Candidate, Level::Sentence, s.index),
                s,
                64,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let path = std::env::temp_dir().join("influence_scan_example.embx");
    write_store(
        &StoreHeader::new("hash", "fnv1a-trigram", -1, 64),
        &embedded,
        &path,
    )?;
    println!(
        "wrote {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path)?.len()
    );

    let store = EmbeddingStore::open(&path)?;
    println!(
        "{} segments, dim {}, model {:?}",
        store.len(),
        store.dim(),
        store.header().model_id
    );
    let wanted = SegmentRef::new(1, Side::Candidate, Level::Sentence, 1);
    if let Some(seg) = store.get(&wanted)? {
        println!(
            "{wanted}: {} tokens, identical = {}",
            seg.token_count(),
            seg == embedded[1]
        );
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
