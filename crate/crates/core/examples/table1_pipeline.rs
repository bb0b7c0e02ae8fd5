//! Run segment, compare and report over the bundled four-instance manifest
//! with the hash backend.
//!
//! ```bash
//! cargo run -p influence-scan --example table1_pipeline [OUT_DIR]
//! ```

use std::path::{Path, PathBuf};

use influence_scan::pipeline::{cmd_compare, cmd_report, cmd_segment};
use influence_scan::RunConfig;

fn main() -> anyhow::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("influence_scan_table1"));
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/table1.json");
    let config = RunConfig::new(manifest, &out);

    for c in cmd_segment(&config)? {
        println!(
            "instance {} {} {}: {} segments",
            c.instance_id, c.side, c.level, c.count
        );
    }
    for c in cmd_compare(&config)? {
        let b = &c.bundle;
        println!(
            "instance {} {}: {}x{}, diagonal {:.2}, {} streaks",
            c.instance_id,
            c.level,
            b.shape[0],
            b.shape[1],
            b.diagonal_alignment,
            b.streaks.len()
        );
    }
    let reports = cmd_report(&config)?;
    println!(
        "{} report directories under {}",
        reports.len(),
        out.display()
    );
    Ok(())
}
