//! Split a passage into sentences and into word 5-grams.
//!
//! ```bash
//! cargo run -p influence-scan --example segment_passage
//! ```

use influence_scan::segment::segment_passage;
use influence_scan::SegmentationConfig;

const TEXT: &str = "Mr. Brown sailed from Nantucket in the spring. He returned three years \
later with a full hold! Israel had now been three days without food, except one two-penny loaf.";

fn main() -> anyhow::Result<()> {
    for s in segment_passage(TEXT, &SegmentationConfig::sentences())? {
        println!(
            "sentence {} [{}..{}] {}",
            s.index, s.char_start, s.char_end, s.text
        );
    }
    for s in segment_passage(TEXT, &SegmentationConfig::ngrams(5))? {
        println!("5-gram {:>2} {:?}", s.index, s.word_tokens);
    }
    let overlapping = SegmentationConfig {
        overlap: true,
        ..SegmentationConfig::ngrams(5)
    };
    let windows = segment_passage(TEXT, &overlapping)?;
    println!("{} overlapping windows", windows.len());
    Ok(())
}
