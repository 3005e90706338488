//! `flatten`: reduce every input signal to a month-hour matrix file.
//! Tariffs are flattened against the reference load, sub-hourly series
//! resampled, and generation/emissions pairs regressed to marginal
//! intensities. Per-item failures are logged and the run continues.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use crate::config::{sorted_files, RunConfig};
use gridalign::reconcile::AnySeries;
use gridalign::{month_hour_average, MonthHourMatrix, Unit};

enum Work {
    Tariff(PathBuf),
    Series(PathBuf, &'static str, Unit),
    GenEmis(PathBuf),
}

fn produce(work: &Work, year: i32) -> Result<MonthHourMatrix> {
    match work {
        Work::Tariff(path) => {
            let schedule = gridalign::tariff::read_tariff_file(path)?;
            let mut series = gridalign::flatten_tariff(&schedule, year)?;
            series.label = format!("tariff_{}", schedule.tariff_id);
            Ok(month_hour_average(&series))
        }
        Work::Series(path, prefix, unit) => {
            let stem = path.file_stem().unwrap().to_string_lossy().to_string();
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading '{}'", path.display()))?;
            let label = format!("{prefix}_{stem}");
            let series = gridalign::reconcile::read_series_csv(&text, &label, *unit)?;
            let hourly = match series {
                AnySeries::Hourly(s) => s,
                AnySeries::SubHourly(s) => gridalign::reconcile::resample_to_hourly(&s)?,
            };
            Ok(month_hour_average(&hourly))
        }
        Work::GenEmis(path) => {
            let region = path.file_stem().unwrap().to_string_lossy().to_string();
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading '{}'", path.display()))?;
            let series = gridalign::emissions::GenEmisSeries::read_csv(&text, &region)?;
            Ok(gridalign::emissions::estimate_mef(&series))
        }
    }
}

pub fn run(config: &RunConfig) -> Result<u8> {
    let out = config.out_dir()?;
    if !super::manifest_path(out).is_file() {
        bail!(
            "missing '{}': run the ingest stage first",
            super::manifest_path(out).display()
        );
    }
    let matrices = super::matrices_dir(out);
    std::fs::create_dir_all(&matrices)
        .with_context(|| format!("creating '{}'", matrices.display()))?;

    let mut work = Vec::new();
    if let Some(dir) = &config.tariff_dir {
        for path in sorted_files(dir, "csv")? {
            work.push(Work::Tariff(path));
        }
    }
    if let Some(dir) = &config.aef_dir {
        for path in sorted_files(dir, "csv")? {
            work.push(Work::Series(path, "aef", Unit::KgCo2ePerMwh));
        }
    }
    if let Some(dir) = &config.dam_dir {
        for path in sorted_files(dir, "csv")? {
            work.push(Work::Series(path, "dam", Unit::UsdPerMwh));
        }
    }
    if let Some(dir) = &config.gen_emis_dir {
        for path in sorted_files(dir, "csv")? {
            work.push(Work::GenEmis(path));
        }
    }

    let year = config.year;
    let mut results: Vec<(String, String)> = work
        .par_iter()
        .filter_map(|item| match produce(item, year) {
            Ok(matrix) => Some((matrix.filename(), matrix.to_csv())),
            Err(e) => {
                log::error!("flatten: skipping item: {e}");
                None
            }
        })
        .collect();
    results.sort();

    let written = results.len();
    for (filename, content) in results {
        let path = matrices.join(&filename);
        std::fs::write(&path, content)
            .with_context(|| format!("writing '{}'", path.display()))?;
    }
    eprintln!(
        "flatten: wrote {written}/{} matrices to {}",
        work.len(),
        matrices.display()
    );
    Ok(0)
}
