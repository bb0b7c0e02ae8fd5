//! Load a Gutenberg file, strip its boilerplate and cut out one chapter.
//!
//! ```bash
//! cargo run -p influence-scan --example ingest_passage
//! ```

use std::path::Path;

use influence_scan::ingest::resolve_passage;
use influence_scan::{load_document, PassageSelector};

fn main() -> anyhow::Result<()> {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/israel_potter_melville.txt");
    let doc = load_document(&path, "israel_potter")?;
    println!(
        "{}: {} characters after normalization",
        doc.id, doc.char_count
    );

    let chapter = PassageSelector::MarkerPair {
        start: "CHAPTER 4".into(),
        end: "CHAPTER 5".into(),
    };
    let passage = resolve_passage(&doc, &chapter)?;
    println!(
        "{chapter} -> chars {}..{}",
        passage.char_start, passage.char_end
    );
    let opening: String = passage.text.chars().take(120).collect();
    println!("{opening}...");

    let first_line = PassageSelector::LineSpan { start: 0, end: 1 };
    println!("first line: {:?}", resolve_passage(&doc, &first_line)?.text);
    Ok(())
}
