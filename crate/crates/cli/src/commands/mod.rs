pub mod analyze;
pub mod flatten;
pub mod ingest;
pub mod report;

use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MATRICES_DIR: &str = "matrices";
pub const ANALYSIS_DIR: &str = "analysis";
pub const SUMMARY_FILE: &str = "summary.txt";

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join(MANIFEST_FILE)
}

pub fn matrices_dir(out: &Path) -> PathBuf {
    out.join(MATRICES_DIR)
}

pub fn analysis_dir(out: &Path) -> PathBuf {
    out.join(ANALYSIS_DIR)
}
