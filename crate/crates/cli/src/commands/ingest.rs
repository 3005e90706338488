//! `ingest`: parse and validate every configured input, writing a
//! per-file status manifest with per-kind counts.

use std::path::Path;

use anyhow::{Context, Result};

use crate::config::{sorted_files, RunConfig};

struct ManifestRow {
    kind: &'static str,
    path: String,
    status: &'static str,
    detail: String,
}

struct Manifest {
    rows: Vec<ManifestRow>,
    failures: usize,
}

impl Manifest {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            failures: 0,
        }
    }

    fn record<T, E: std::fmt::Display>(
        &mut self,
        kind: &'static str,
        path: &Path,
        result: Result<T, E>,
        describe: impl FnOnce(&T) -> String,
    ) -> Option<T> {
        match result {
            Ok(value) => {
                self.rows.push(ManifestRow {
                    kind,
                    path: path.display().to_string(),
                    status: "ok",
                    detail: describe(&value),
                });
                Some(value)
            }
            Err(e) => {
                self.failures += 1;
                self.rows.push(ManifestRow {
                    kind,
                    path: path.display().to_string(),
                    status: "failed",
                    detail: e.to_string(),
                });
                None
            }
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["kind", "path", "status", "detail"])?;
        for row in &self.rows {
            writer.write_record([row.kind, &row.path, row.status, &row.detail])?;
        }
        // Per-kind counts as trailing summary rows.
        let mut kinds: Vec<&'static str> = self.rows.iter().map(|r| r.kind).collect();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            let ok = self
                .rows
                .iter()
                .filter(|r| r.kind == kind && r.status == "ok")
                .count();
            let failed = self
                .rows
                .iter()
                .filter(|r| r.kind == kind && r.status == "failed")
                .count();
            writer.write_record(["summary", kind, &ok.to_string(), &failed.to_string()])?;
        }
        std::fs::write(path, writer.into_inner()?)
            .with_context(|| format!("writing '{}'", path.display()))?;
        Ok(())
    }
}

pub fn run(config: &RunConfig) -> Result<u8> {
    let out = config.out_dir()?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory '{}'", out.display()))?;
    let mut manifest = Manifest::new();

    if let Some(dir) = &config.tariff_dir {
        for path in sorted_files(dir, "csv")? {
            manifest.record(
                "tariff",
                &path,
                gridalign::tariff::read_tariff_file(&path),
                |s| format!("items={}", s.items.len()),
            );
        }
    }

    if let Some(path) = &config.metadata_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading '{}'", path.display()))?;
        manifest.record(
            "metadata",
            path,
            gridalign::tariff::parse_metadata(&text),
            |rows| format!("rows={}", rows.len()),
        );
    }

    for (kind, dir) in [("aef", &config.aef_dir), ("dam", &config.dam_dir)] {
        if let Some(dir) = dir {
            for path in sorted_files(dir, "csv")? {
                let label = path.file_stem().unwrap().to_string_lossy().to_string();
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading '{}'", path.display()))?;
                let unit = if kind == "aef" {
                    gridalign::Unit::KgCo2ePerMwh
                } else {
                    gridalign::Unit::UsdPerMwh
                };
                manifest.record(
                    kind,
                    &path,
                    gridalign::reconcile::read_series_csv(&text, &label, unit),
                    |series| match series {
                        gridalign::reconcile::AnySeries::Hourly(s) => {
                            format!("hours={}", s.len())
                        }
                        gridalign::reconcile::AnySeries::SubHourly(s) => {
                            format!("steps={} step_min={}", s.values.len(), s.step_minutes)
                        }
                    },
                );
            }
        }
    }

    if let Some(dir) = &config.gen_emis_dir {
        for path in sorted_files(dir, "csv")? {
            let region = path.file_stem().unwrap().to_string_lossy().to_string();
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading '{}'", path.display()))?;
            manifest.record(
                "gen_emis",
                &path,
                gridalign::emissions::GenEmisSeries::read_csv(&text, &region),
                |s| format!("hours={}", s.len()),
            );
        }
    }

    if let Some(path) = &config.regions_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading '{}'", path.display()))?;
        manifest.record(
            "regions",
            path,
            gridalign::geo::RegionSet::from_geojson(&text),
            |rs| format!("regions={}", rs.regions.len()),
        );
    }

    if let Some(path) = &config.gazetteer_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading '{}'", path.display()))?;
        manifest.record(
            "gazetteer",
            path,
            gridalign::geo::Gazetteer::from_csv(&text),
            |g| format!("zips={}", g.len()),
        );
    }

    if let Some(path) = &config.idropp_programs_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading '{}'", path.display()))?;
        manifest.record(
            "idropp_programs",
            path,
            gridalign::idropp::parse_programs(&text),
            |programs| format!("programs={}", programs.len()),
        );
    }

    if let Some(path) = &config.idropp_parameters_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading '{}'", path.display()))?;
        let parsed = manifest.record(
            "idropp_parameters",
            path,
            gridalign::idropp::parse_parameter_metadata(&text),
            |params| format!("parameters={}", params.len()),
        );
        if let Some(params) = parsed {
            for p in &params {
                if !gridalign::idropp::PROGRAM_COLUMNS.contains(&p.column_id.as_str()) {
                    log::warn!(
                        "parameter metadata lists unknown column id '{}'",
                        p.column_id
                    );
                }
            }
        }
    }

    let manifest_path = super::manifest_path(out);
    manifest.write(&manifest_path)?;
    eprintln!(
        "ingest: {} inputs, {} failures; manifest at {}",
        manifest.rows.len(),
        manifest.failures,
        manifest_path.display()
    );
    Ok(if manifest.failures > 0 { 1 } else { 0 })
}
