//! Run configuration: a flat key = value file with CLI overrides. Paths
//! are resolved relative to the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tariff_dir: Option<PathBuf>,
    pub metadata_file: Option<PathBuf>,
    pub aef_dir: Option<PathBuf>,
    pub dam_dir: Option<PathBuf>,
    pub gen_emis_dir: Option<PathBuf>,
    pub regions_file: Option<PathBuf>,
    pub gazetteer_file: Option<PathBuf>,
    pub idropp_programs_file: Option<PathBuf>,
    pub idropp_parameters_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub year: i32,
    pub summer_start: u8,
    pub summer_end: u8,
    pub reference_demand_kw: f64,
    pub reference_price_usd_per_kwh: f64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tariff_dir: None,
            metadata_file: None,
            aef_dir: None,
            dam_dir: None,
            gen_emis_dir: None,
            regions_file: None,
            gazetteer_file: None,
            idropp_programs_file: None,
            idropp_parameters_file: None,
            out_dir: None,
            year: 2023,
            summer_start: 6,
            summer_end: 9,
            reference_demand_kw: 1000.0,
            reference_price_usd_per_kwh: 0.08,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config '{}'", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config '{}' line {}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim();
            let value = value.trim();
            let as_path = || -> Option<PathBuf> { Some(base.join(value)) };
            match key {
                "tariff_dir" => config.tariff_dir = as_path(),
                "metadata_file" => config.metadata_file = as_path(),
                "aef_dir" => config.aef_dir = as_path(),
                "dam_dir" => config.dam_dir = as_path(),
                "gen_emis_dir" => config.gen_emis_dir = as_path(),
                "regions_file" => config.regions_file = as_path(),
                "gazetteer_file" => config.gazetteer_file = as_path(),
                "idropp_programs_file" => config.idropp_programs_file = as_path(),
                "idropp_parameters_file" => config.idropp_parameters_file = as_path(),
                "out_dir" => config.out_dir = as_path(),
                "year" => config.year = value.parse().context("year")?,
                "summer_start" => config.summer_start = value.parse().context("summer_start")?,
                "summer_end" => config.summer_end = value.parse().context("summer_end")?,
                "reference_demand_kw" => {
                    config.reference_demand_kw = value.parse().context("reference_demand_kw")?
                }
                "reference_price_usd_per_kwh" => {
                    config.reference_price_usd_per_kwh =
                        value.parse().context("reference_price_usd_per_kwh")?
                }
                "jobs" => config.jobs = value.parse().context("jobs")?,
                other => log::warn!("config: ignoring unknown key '{other}'"),
            }
        }
        Ok(config)
    }

    /// Check value invariants and that every configured path exists.
    pub fn validate(&self) -> Result<()> {
        if self.year < 2000 {
            bail!("year {} is before 2000", self.year);
        }
        if self.reference_demand_kw <= 0.0 {
            bail!("reference_demand_kw must be positive");
        }
        if self.reference_price_usd_per_kwh <= 0.0 {
            bail!("reference_price_usd_per_kwh must be positive");
        }
        if !(1..=12).contains(&self.summer_start)
            || !(1..=12).contains(&self.summer_end)
            || self.summer_start > self.summer_end
        {
            bail!(
                "summer bounds {}..={} are not a valid month range",
                self.summer_start,
                self.summer_end
            );
        }
        for (name, path) in [
            ("tariff_dir", &self.tariff_dir),
            ("metadata_file", &self.metadata_file),
            ("aef_dir", &self.aef_dir),
            ("dam_dir", &self.dam_dir),
            ("gen_emis_dir", &self.gen_emis_dir),
            ("regions_file", &self.regions_file),
            ("gazetteer_file", &self.gazetteer_file),
            ("idropp_programs_file", &self.idropp_programs_file),
            ("idropp_parameters_file", &self.idropp_parameters_file),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    bail!("{name} '{}' does not exist", path.display());
                }
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("no output directory: pass --out or set out_dir"))
    }
}

/// Files of one extension in a directory, sorted by name for determinism.
pub fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory '{}'", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().map(|x| x == extension).unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}
