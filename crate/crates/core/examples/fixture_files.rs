//! Regenerates the data files under `crates/core/fixtures/`.
//!
//! cargo run --example fixture_files -- [DIR]

use std::path::PathBuf;

use windplan::fixtures;

fn main() -> windplan::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;
    fixtures::ieee14_fixture()?.instance.save(dir.join("ieee14.json"))?;
    fixtures::site_history(2000, 2024)?.save(dir.join("site_history.csv"))?;
    println!("wrote ieee14.json and site_history.csv to {}", dir.display());
    Ok(())
}
