//! `analyze`: join the flattened matrices with tariff structure, regions,
//! and demand-response programs into the five analysis CSVs plus a short
//! text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::config::{sorted_files, RunConfig};
use gridalign::analysis::{
    categorize, correlation_table, peak_premium, regime_map, summary_stats, AnalysisError,
    CorrelationRecord, FlipStats, PeakPremium, PremiumRecord, SeasonBounds,
};
use gridalign::geo::{assign_region, GeoPoint, OTHER_REGION};
use gridalign::idropp::RateBasis;
use gridalign::tariff::TariffSchedule;
use gridalign::{MonthHourMatrix, Unit};

/// Matrices keyed by label, parsed back from the flatten stage's files.
fn load_matrices(dir: &Path) -> Result<BTreeMap<String, MonthHourMatrix>> {
    let mut out = BTreeMap::new();
    for path in sorted_files(dir, "csv")? {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let Some((label, unit)) = stem.rsplit_once("__") else {
            log::warn!("matrix file '{}' has no __unit suffix; skipped", path.display());
            continue;
        };
        let unit = Unit::parse(unit)
            .with_context(|| format!("matrix file '{}'", path.display()))?;
        let text = std::fs::read_to_string(&path)?;
        let matrix = MonthHourMatrix::from_csv(&text, label, unit)
            .with_context(|| format!("matrix file '{}'", path.display()))?;
        out.insert(label.to_string(), matrix);
    }
    Ok(out)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Region label per tariff: gazetteer coordinates (falling back to the
/// metadata row's own) pushed through point-in-polygon assignment when a
/// region set is configured, else whatever label the metadata carries.
fn resolve_regions(
    config: &RunConfig,
    metadata: &[gridalign::TariffMetadata],
) -> Result<BTreeMap<String, String>> {
    let regions = match &config.regions_file {
        Some(path) => Some(gridalign::geo::RegionSet::from_geojson(
            &std::fs::read_to_string(path)?,
        )?),
        None => None,
    };
    let gazetteer = match &config.gazetteer_file {
        Some(path) => Some(gridalign::geo::Gazetteer::from_csv(
            &std::fs::read_to_string(path)?,
        )?),
        None => None,
    };
    let mut out = BTreeMap::new();
    for row in metadata {
        let label = match &regions {
            Some(regions) => {
                let point = gazetteer
                    .as_ref()
                    .and_then(|g| g.zip_to_coords(&row.zip).ok())
                    .unwrap_or(GeoPoint {
                        lat: row.latitude,
                        lon: row.longitude,
                    });
                let assignment = assign_region(point, regions);
                if assignment.boundary {
                    log::warn!(
                        "tariff {}: coordinates sit on a region boundary",
                        row.tariff_id
                    );
                }
                assignment.region
            }
            None if !row.iso_label.is_empty() => row.iso_label.clone(),
            None => OTHER_REGION.to_string(),
        };
        out.insert(row.tariff_id.clone(), label);
    }
    Ok(out)
}

struct PremiumLine {
    label: String,
    region: String,
    month: u8,
    premium: Option<f64>,
    reason: String,
}

fn premium_lines(
    label: &str,
    region: &str,
    matrix: &MonthHourMatrix,
    out: &mut Vec<PremiumLine>,
) {
    for month in 1..=12u8 {
        match peak_premium(matrix, month) {
            Ok(PeakPremium::Ratio(r)) => out.push(PremiumLine {
                label: label.to_string(),
                region: region.to_string(),
                month,
                premium: Some(r),
                reason: String::new(),
            }),
            Ok(PeakPremium::Undefined { reason }) => out.push(PremiumLine {
                label: label.to_string(),
                region: region.to_string(),
                month,
                premium: None,
                reason,
            }),
            Err(AnalysisError::EmptyMonth(_)) => {}
            Err(e) => log::error!("premium for {label} month {month}: {e}"),
        }
    }
}

pub fn run(config: &RunConfig) -> Result<u8> {
    let out = config.out_dir()?;
    let matrices_dir = super::matrices_dir(out);
    if !matrices_dir.is_dir() {
        bail!(
            "missing '{}': run the flatten stage first",
            matrices_dir.display()
        );
    }
    let matrices = load_matrices(&matrices_dir)?;
    if matrices.is_empty() {
        bail!(
            "no matrices under '{}': run the flatten stage first",
            matrices_dir.display()
        );
    }
    let analysis_dir = super::analysis_dir(out);
    std::fs::create_dir_all(&analysis_dir)?;

    // Re-read tariff structure and metadata for categorization and joins.
    let mut schedules: Vec<TariffSchedule> = Vec::new();
    if let Some(dir) = &config.tariff_dir {
        for path in sorted_files(dir, "csv")? {
            match gridalign::tariff::read_tariff_file(&path) {
                Ok(s) => schedules.push(s),
                Err(e) => log::warn!("analyze: skipping '{}': {e}", path.display()),
            }
        }
    }
    let metadata = match &config.metadata_file {
        Some(path) => gridalign::tariff::parse_metadata(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let region_of = resolve_regions(config, &metadata)?;

    // categories.csv
    let mut categories_csv = String::from("tariff_id,energy,demand,overall\n");
    let mut category_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for schedule in &schedules {
        let assignment = categorize(schedule);
        *category_counts.entry(assignment.overall.as_str()).or_insert(0) += 1;
        writeln!(
            categories_csv,
            "{},{},{},{}",
            schedule.tariff_id, assignment.energy, assignment.demand, assignment.overall
        )?;
    }
    std::fs::write(analysis_dir.join("categories.csv"), categories_csv)?;

    // Correlations: tariff vs its region's AEF matrix, and MEF vs DAM per
    // matching region label.
    let mut pairs: Vec<(String, &MonthHourMatrix, &MonthHourMatrix)> = Vec::new();
    for schedule in &schedules {
        let Some(tariff_matrix) = matrices.get(&format!("tariff_{}", schedule.tariff_id)) else {
            continue;
        };
        let Some(region) = region_of.get(&schedule.tariff_id) else {
            continue;
        };
        if region == OTHER_REGION {
            continue; // off-grid labels are excluded from joins
        }
        let Some(aef) = matrices.get(&format!("aef_{region}")) else {
            continue;
        };
        pairs.push((region.clone(), tariff_matrix, aef));
    }
    let mef_regions: Vec<String> = matrices
        .keys()
        .filter_map(|label| label.strip_prefix("mef_").map(str::to_string))
        .collect();
    for region in &mef_regions {
        if let (Some(mef), Some(dam)) = (
            matrices.get(&format!("mef_{region}")),
            matrices.get(&format!("dam_{region}")),
        ) {
            pairs.push((region.clone(), mef, dam));
        }
    }
    let correlations = correlation_table(&pairs);
    let mut correlations_csv = String::from("label_a,label_b,region,month,r,n\n");
    for record in &correlations {
        writeln!(
            correlations_csv,
            "{},{},{},{},{},{}",
            record.label_a,
            record.label_b,
            record.region,
            record.month,
            fmt_opt(record.r),
            record.n
        )?;
    }
    std::fs::write(analysis_dir.join("correlations.csv"), correlations_csv)?;

    // premiums.csv for tariff and DAM matrices.
    let mut premiums = Vec::new();
    for (label, matrix) in &matrices {
        if let Some(id) = label.strip_prefix("tariff_") {
            let region = region_of
                .get(id)
                .cloned()
                .unwrap_or_else(|| OTHER_REGION.to_string());
            premium_lines(label, &region, matrix, &mut premiums);
        } else if let Some(region) = label.strip_prefix("dam_") {
            premium_lines(label, region, matrix, &mut premiums);
        }
    }
    let mut premiums_csv = String::from("label,region,month,premium,reason\n");
    for line in &premiums {
        writeln!(
            premiums_csv,
            "{},{},{},{},{}",
            line.label,
            line.region,
            line.month,
            fmt_opt(line.premium),
            line.reason
        )?;
    }
    std::fs::write(analysis_dir.join("premiums.csv"), premiums_csv)?;

    // summary_stats.csv
    let seasons = SeasonBounds {
        summer_start: config.summer_start,
        summer_end: config.summer_end,
    };
    let stats = summary_stats(&schedules, &seasons, config.year);
    let mut stats_csv = String::from(
        "season,n_tariffs,mean_energy_usd_per_kwh,mean_demand_usd_per_kw,\
         energy_spread_mean,energy_spread_p95,demand_spread_mean,demand_spread_p95,\
         undefined_energy_spreads,undefined_demand_spreads\n",
    );
    for s in &stats {
        writeln!(
            stats_csv,
            "{},{},{},{},{},{},{},{},{},{}",
            s.season,
            s.n_tariffs,
            s.mean_energy_usd_per_kwh,
            s.mean_demand_usd_per_kw,
            fmt_opt(s.energy_spread_mean),
            fmt_opt(s.energy_spread_p95),
            fmt_opt(s.demand_spread_mean),
            fmt_opt(s.demand_spread_p95),
            s.undefined_energy_spreads,
            s.undefined_demand_spreads
        )?;
    }
    std::fs::write(analysis_dir.join("summary_stats.csv"), stats_csv)?;

    // regime_map.csv: tariff premium/correlation rows plus per-region
    // demand-response payment boxes from declared per-kW rates.
    let premium_records: Vec<PremiumRecord> = premiums
        .iter()
        .filter(|line| line.label.starts_with("tariff_"))
        .filter_map(|line| {
            line.premium.map(|premium| PremiumRecord {
                tariff_id: line.label.clone(),
                region: line.region.clone(),
                month: line.month,
                premium,
            })
        })
        .collect();
    let tariff_correlations: Vec<CorrelationRecord> = correlations
        .iter()
        .filter(|r| r.label_a.starts_with("tariff_"))
        .cloned()
        .collect();
    let mut ibdr_rates: Vec<(String, f64)> = Vec::new();
    if let Some(path) = &config.idropp_programs_file {
        let programs = gridalign::idropp::parse_programs(&std::fs::read_to_string(path)?)?;
        for program in &programs {
            if let (Some(region), Some((rate, RateBasis::PerKw))) =
                (program.region(), program.declared_rate())
            {
                ibdr_rates.push((region.to_string(), rate));
            }
        }
    }
    let map = regime_map(&premium_records, &tariff_correlations, &ibdr_rates);
    let mut regime_csv = String::from(
        "record,tariff_id,region,month,peak_premium,r_aef_tariff,ibdr_min_rate,ibdr_max_rate\n",
    );
    for row in &map.rows {
        writeln!(
            regime_csv,
            "tariff,{},{},{},{},{},,",
            row.tariff_id, row.region, row.month, row.peak_premium, row.r_aef_tariff
        )?;
    }
    for b in &map.boxes {
        writeln!(
            regime_csv,
            "ibdr_box,,{},,,,{},{}",
            b.region, b.ibdr_min_rate, b.ibdr_max_rate
        )?;
    }
    std::fs::write(analysis_dir.join("regime_map.csv"), regime_csv)?;

    // Text summary: category shares, mean correlation per region, flip
    // fractions between the first and last months with defined values.
    let mut summary = String::new();
    writeln!(summary, "== analysis summary (year {}) ==", config.year)?;
    writeln!(summary, "tariffs: {}", schedules.len())?;
    let total: usize = category_counts.values().sum();
    if total > 0 {
        let share = |label: &str| {
            100.0 * category_counts.get(label).copied().unwrap_or(0) as f64 / total as f64
        };
        writeln!(
            summary,
            "category shares: Flat {:.1}% | SeasonalTOU {:.1}% | NonseasonalTOU {:.1}% | SeasonalNonTOU {:.1}%",
            share("Flat"),
            share("SeasonalTOU"),
            share("NonseasonalTOU"),
            share("SeasonalNonTOU")
        )?;
    }

    let mut per_region: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for record in &tariff_correlations {
        if let Some(r) = record.r {
            per_region.entry(&record.region).or_default().push(r);
        }
    }
    for (region, values) in &per_region {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        writeln!(
            summary,
            "mean tariff-AEF correlation, {region}: {mean:.3} (n={})",
            values.len()
        )?;
    }

    for (name, prefix) in [("tariff-AEF", "tariff_"), ("MEF-DAM", "mef_")] {
        if let Some(stats) = flips_between_extreme_months(&correlations, prefix) {
            writeln!(
                summary,
                "{name} sign flips, month {} vs {}: {:.1}% of {} nodes ({} ties)",
                stats.0, stats.1, stats.2.fraction * 100.0, stats.2.n, stats.2.ties
            )?;
        }
    }
    writeln!(summary, "regime map rows: {} (dropped {})", map.rows.len(), map.dropped)?;

    // MEF/AEF level comparison per region when both matrices exist.
    for region in &mef_regions {
        if let (Some(mef), Some(aef)) = (
            matrices.get(&format!("mef_{region}")),
            matrices.get(&format!("aef_{region}")),
        ) {
            if let Ok(ratio) = gridalign::emissions::mef_aef_summary(mef, aef) {
                writeln!(
                    summary,
                    "MEF/AEF cellwise ratio, {region}: mean {:.2} (min {:.2}, max {:.2}, n={})",
                    ratio.mean, ratio.min, ratio.max, ratio.n_cells
                )?;
            }
        }
    }

    std::fs::write(analysis_dir.join(super::SUMMARY_FILE), &summary)?;
    print!("{summary}");
    eprintln!("analyze: wrote 5 CSVs to {}", analysis_dir.display());
    Ok(0)
}

/// Flip stats between the first and last month carrying at least two
/// defined correlations, nodes keyed by `label_a` under the given prefix.
fn flips_between_extreme_months(
    correlations: &[CorrelationRecord],
    prefix: &str,
) -> Option<(u8, u8, FlipStats)> {
    let mut by_month: BTreeMap<u8, BTreeMap<String, f64>> = BTreeMap::new();
    for record in correlations {
        if !record.label_a.starts_with(prefix) {
            continue;
        }
        if let Some(r) = record.r {
            by_month
                .entry(record.month)
                .or_default()
                .insert(record.label_a.clone(), r);
        }
    }
    let months: Vec<u8> = by_month
        .iter()
        .filter(|(_, nodes)| !nodes.is_empty())
        .map(|(m, _)| *m)
        .collect();
    let (&first, &last) = (months.first()?, months.last()?);
    if first == last {
        return None;
    }
    gridalign::analysis::flip_fraction(&by_month[&first], &by_month[&last])
        .ok()
        .map(|stats| (first, last, stats))
}
