//! `report`: concatenate the run's summaries to stdout.

use anyhow::{bail, Result};

use crate::config::RunConfig;

pub fn run(config: &RunConfig) -> Result<u8> {
    let out = config.out_dir()?;
    let manifest = super::manifest_path(out);
    if !manifest.is_file() {
        bail!("missing '{}': run the ingest stage first", manifest.display());
    }
    println!("== manifest ({}) ==", manifest.display());
    print!("{}", std::fs::read_to_string(&manifest)?);

    let summary = super::analysis_dir(out).join(super::SUMMARY_FILE);
    if summary.is_file() {
        print!("{}", std::fs::read_to_string(&summary)?);
    } else {
        println!("(no analysis summary yet: run the analyze stage)");
    }
    Ok(0)
}
