//! Average and marginal emissions factors from historical generation and
//! emissions series.
//!
//! AEF cells are the ratio of mean emissions to mean generation in each
//! (month, hour) bin. MEF cells come from a through-origin least-squares
//! fit of consecutive-hour emissions deltas against generation deltas,
//! binned the same way; deltas never cross a month boundary.

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::calendar::{hour_at, hour_fields, is_hour_aligned};
use crate::reconcile::{MonthHourMatrix, Unit};

#[derive(Debug, Error)]
pub enum EmissionsError {
    #[error("generation and emissions series have different lengths ({generation} vs {emissions})")]
    LengthMismatch { generation: usize, emissions: usize },
    #[error("start {0} is not aligned to an hour boundary")]
    UnalignedStart(NaiveDateTime),
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("matrices '{a}' and '{b}' share no non-missing cells")]
    NoCommonCells { a: String, b: String },
}

/// Paired hourly generation (MWh) and emissions (kg CO2-eq) for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct GenEmisSeries {
    pub region: String,
    pub start: NaiveDateTime,
    pub generation_mwh: Vec<Option<f64>>,
    pub emissions_kg: Vec<Option<f64>>,
}

impl GenEmisSeries {
    pub fn new(
        region: &str,
        start: NaiveDateTime,
        generation_mwh: Vec<Option<f64>>,
        emissions_kg: Vec<Option<f64>>,
    ) -> Result<Self, EmissionsError> {
        if generation_mwh.len() != emissions_kg.len() {
            return Err(EmissionsError::LengthMismatch {
                generation: generation_mwh.len(),
                emissions: emissions_kg.len(),
            });
        }
        if !is_hour_aligned(start) {
            return Err(EmissionsError::UnalignedStart(start));
        }
        Ok(Self {
            region: region.to_string(),
            start,
            generation_mwh,
            emissions_kg,
        })
    }

    pub fn len(&self) -> usize {
        self.generation_mwh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generation_mwh.is_empty()
    }

    /// Read a `timestamp,generation_mwh,emissions_kg` CSV. Rows must be
    /// strictly increasing hourly timestamps; absent hours are gaps.
    pub fn read_csv(text: &str, region: &str) -> Result<Self, EmissionsError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| EmissionsError::BadRow {
                row: 1,
                detail: e.to_string(),
            })?
            .clone();
        let col = |name: &str| -> Result<usize, EmissionsError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| EmissionsError::BadRow {
                    row: 1,
                    detail: format!("missing '{name}' column"),
                })
        };
        let ts_col = col("timestamp")?;
        let gen_col = col("generation_mwh")?;
        let emis_col = col("emissions_kg")?;

        let mut rows: Vec<(NaiveDateTime, Option<f64>, Option<f64>)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| EmissionsError::BadRow {
                row,
                detail: e.to_string(),
            })?;
            let ts = NaiveDateTime::parse_from_str(
                record.get(ts_col).unwrap_or(""),
                "%Y-%m-%dT%H:%M:%S",
            )
            .or_else(|_| {
                NaiveDateTime::parse_from_str(
                    record.get(ts_col).unwrap_or(""),
                    "%Y-%m-%d %H:%M:%S",
                )
            })
            .map_err(|e| EmissionsError::BadRow {
                row,
                detail: format!("bad timestamp: {e}"),
            })?;
            let parse_opt = |idx: usize| -> Result<Option<f64>, EmissionsError> {
                let raw = record.get(idx).unwrap_or("");
                if raw.is_empty() {
                    return Ok(None);
                }
                raw.parse::<f64>()
                    .map(Some)
                    .map_err(|e| EmissionsError::BadRow {
                        row,
                        detail: format!("'{raw}' is not a number: {e}"),
                    })
            };
            if let Some((prev, _, _)) = rows.last() {
                if ts <= *prev {
                    return Err(EmissionsError::BadRow {
                        row,
                        detail: "timestamps must be strictly increasing".into(),
                    });
                }
            }
            rows.push((ts, parse_opt(gen_col)?, parse_opt(emis_col)?));
        }
        if rows.is_empty() {
            return Self::new(region, crate::calendar::year_start(2000), vec![], vec![]);
        }
        let start = rows[0].0;
        let hours = ((rows.last().unwrap().0 - start).num_hours()) as usize + 1;
        let mut generation = vec![None; hours];
        let mut emissions = vec![None; hours];
        for (ts, g, e) in rows {
            let offset = (ts - start).num_minutes();
            if offset % 60 != 0 {
                return Err(EmissionsError::BadRow {
                    row: 0,
                    detail: format!("timestamp {ts} is not on the hourly grid"),
                });
            }
            let idx = (offset / 60) as usize;
            generation[idx] = g;
            emissions[idx] = e;
        }
        Self::new(region, start, generation, emissions)
    }
}

/// Average emissions factor: per (month, hour) cell, mean emissions over
/// the bin divided by mean generation over the bin. Cells whose mean
/// generation is not positive are missing.
pub fn average_aef(series: &GenEmisSeries) -> MonthHourMatrix {
    let mut emis_sum = vec![0.0f64; 12 * 24];
    let mut gen_sum = vec![0.0f64; 12 * 24];
    let mut counts = vec![0u32; 12 * 24];
    for i in 0..series.len() {
        if let (Some(g), Some(e)) = (series.generation_mwh[i], series.emissions_kg[i]) {
            let (m, _, h) = hour_fields(hour_at(series.start, i));
            let idx = (m as usize - 1) * 24 + h as usize;
            gen_sum[idx] += g;
            emis_sum[idx] += e;
            counts[idx] += 1;
        }
    }
    let mut matrix = MonthHourMatrix::empty(&format!("aef_{}", series.region), Unit::KgCo2ePerMwh);
    for month in 1..=12u8 {
        for hour in 0..24u8 {
            let idx = (month as usize - 1) * 24 + hour as usize;
            if counts[idx] == 0 {
                continue;
            }
            let mean_gen = gen_sum[idx] / counts[idx] as f64;
            if mean_gen > 0.0 {
                let mean_emis = emis_sum[idx] / counts[idx] as f64;
                matrix.set(month, hour, mean_emis / mean_gen, counts[idx]);
            }
        }
    }
    matrix
}

/// Marginal emissions factor by (month, hour) bin: least-squares slope
/// through the origin of ΔE on ΔG, using consecutive-hour deltas within a
/// month. Bins with fewer than two usable deltas or with ΣΔG² = 0 are
/// missing.
pub fn estimate_mef(series: &GenEmisSeries) -> MonthHourMatrix {
    let mut num = vec![0.0f64; 12 * 24]; // Σ ΔG·ΔE
    let mut den = vec![0.0f64; 12 * 24]; // Σ ΔG²
    let mut counts = vec![0u32; 12 * 24];
    for i in 1..series.len() {
        let (g1, e1) = (series.generation_mwh[i], series.emissions_kg[i]);
        let (g0, e0) = (series.generation_mwh[i - 1], series.emissions_kg[i - 1]);
        let (Some(g1), Some(e1), Some(g0), Some(e0)) = (g1, e1, g0, e0) else {
            continue;
        };
        let ts = hour_at(series.start, i);
        let prev = hour_at(series.start, i - 1);
        let (m, _, h) = hour_fields(ts);
        let (m_prev, _, _) = hour_fields(prev);
        if m != m_prev {
            continue; // keep bins self-contained within a month
        }
        let idx = (m as usize - 1) * 24 + h as usize;
        let dg = g1 - g0;
        let de = e1 - e0;
        num[idx] += dg * de;
        den[idx] += dg * dg;
        counts[idx] += 1;
    }
    let mut matrix = MonthHourMatrix::empty(&format!("mef_{}", series.region), Unit::KgCo2ePerMwh);
    for month in 1..=12u8 {
        for hour in 0..24u8 {
            let idx = (month as usize - 1) * 24 + hour as usize;
            if counts[idx] >= 2 && den[idx] > 0.0 {
                matrix.set(month, hour, num[idx] / den[idx], counts[idx]);
            }
        }
    }
    matrix
}

/// Cellwise MEF/AEF ratio statistics over common non-missing cells; cells
/// with a zero AEF are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n_cells: usize,
}

pub fn mef_aef_summary(
    mef: &MonthHourMatrix,
    aef: &MonthHourMatrix,
) -> Result<RatioSummary, EmissionsError> {
    let mut ratios = Vec::new();
    for month in 1..=12u8 {
        for hour in 0..24u8 {
            if let (Some(m), Some(a)) = (mef.get(month, hour), aef.get(month, hour)) {
                if a != 0.0 {
                    ratios.push(m / a);
                }
            }
        }
    }
    if ratios.is_empty() {
        return Err(EmissionsError::NoCommonCells {
            a: mef.label.clone(),
            b: aef.label.clone(),
        });
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioSummary {
        mean,
        min,
        max,
        n_cells: ratios.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::year_start;

    fn series(gen: Vec<Option<f64>>, emis: Vec<Option<f64>>) -> GenEmisSeries {
        GenEmisSeries::new("R", year_start(2023), gen, emis).unwrap()
    }

    #[test]
    fn constant_ratio_fills_cells_with_the_ratio() {
        let n = 8760;
        let s = series(vec![Some(1000.0); n], vec![Some(300_000.0); n]);
        let aef = average_aef(&s);
        for month in 1..=12u8 {
            for hour in 0..24u8 {
                assert_eq!(aef.get(month, hour), Some(300.0));
            }
        }
    }

    #[test]
    fn single_hour_yields_single_cell() {
        let s = series(vec![Some(2.0)], vec![Some(500.0)]);
        let aef = average_aef(&s);
        assert_eq!(aef.get(1, 0), Some(250.0));
        let filled: usize = (1..=12u8)
            .map(|m| aef.month_hours(m).len())
            .sum();
        assert_eq!(filled, 1);
    }

    #[test]
    fn aef_matches_ratio_of_means_oracle() {
        // Alternating generation/emissions pairs over January.
        let n = 31 * 24;
        let gen: Vec<Option<f64>> = (0..n)
            .map(|i| Some(if i % 2 == 0 { 800.0 } else { 1200.0 }))
            .collect();
        let emis: Vec<Option<f64>> = (0..n)
            .map(|i| Some(if i % 2 == 0 { 100_000.0 } else { 500_000.0 }))
            .collect();
        let s = series(gen.clone(), emis.clone());
        let aef = average_aef(&s);
        for hour in 0..24u8 {
            // Direct oracle: collect the bin and take mean(E)/mean(G).
            let mut ge = Vec::new();
            for i in 0..n {
                let ts = hour_at(s.start, i);
                let (m, _, h) = hour_fields(ts);
                if m == 1 && h == hour {
                    ge.push((gen[i].unwrap(), emis[i].unwrap()));
                }
            }
            let mg = ge.iter().map(|x| x.0).sum::<f64>() / ge.len() as f64;
            let me = ge.iter().map(|x| x.1).sum::<f64>() / ge.len() as f64;
            assert!((aef.get(1, hour).unwrap() - me / mg).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mean_generation_cell_is_missing() {
        let s = series(vec![Some(0.0), Some(5.0)], vec![Some(10.0), Some(20.0)]);
        let aef = average_aef(&s);
        assert_eq!(aef.get(1, 0), None);
        assert_eq!(aef.get(1, 1), Some(4.0));
    }

    #[test]
    fn exact_linear_relation_recovers_slope_everywhere() {
        // Integer-valued generation with strong hour-to-hour swings keeps
        // the through-origin fit exact; the +1000 offset cancels in deltas.
        let n = 8760;
        let gen: Vec<Option<f64>> = (0..n)
            .map(|i| Some(1000.0 + 3000.0 * ((i % 2) as f64) + (i % 7) as f64 * 16.0))
            .collect();
        let emis: Vec<Option<f64>> = gen
            .iter()
            .map(|g| Some(0.5 * g.unwrap() + 1000.0))
            .collect();
        let s = series(gen, emis);
        let mef = estimate_mef(&s);
        for month in 1..=12u8 {
            for hour in 0..24u8 {
                let v = mef.get(month, hour).unwrap();
                assert!((v - 0.5).abs() < 1e-12, "cell ({month},{hour}) = {v}");
            }
        }
    }

    #[test]
    fn constant_generation_leaves_all_cells_missing() {
        let n = 8760;
        let s = series(
            vec![Some(1000.0); n],
            (0..n).map(|i| Some(i as f64)).collect(),
        );
        let mef = estimate_mef(&s);
        for month in 1..=12u8 {
            assert!(mef.month_hours(month).is_empty());
        }
    }

    #[test]
    fn noisy_slope_recovered_within_tolerance() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 720; // one 30-day month, April
        let start = chrono::NaiveDate::from_ymd_opt(2023, 4, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        // Strong hour-to-hour generation swings keep the fit well
        // conditioned against the 5% noise floor.
        let gen: Vec<Option<f64>> = (0..n)
            .map(|i| Some(500.0 + 8000.0 * ((i % 2) as f64) + rng.gen_range(-200.0..200.0)))
            .collect();
        let mean_e = 0.7 * (500.0 + 4000.0);
        let sigma = 0.05 * mean_e;
        let emis: Vec<Option<f64>> = gen
            .iter()
            .map(|g| {
                let noise: f64 = rng.sample::<f64, _>(rand_distr_standard_normal()) * sigma;
                Some(0.7 * g.unwrap() + noise)
            })
            .collect();
        let s = GenEmisSeries::new("R", start, gen.clone(), emis.clone()).unwrap();
        let mef = estimate_mef(&s);
        for hour in 0..24u8 {
            let v = mef.get(4, hour).unwrap();
            assert!((v - 0.7).abs() < 0.02, "hour {hour}: {v}");
            // Independent normal-equation oracle over the same bin.
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for i in 1..n {
                let ts = hour_at(start, i);
                let (m, _, h) = hour_fields(ts);
                let (pm, _, _) = hour_fields(hour_at(start, i - 1));
                if m == 4 && pm == 4 && h == hour {
                    let dx = gen[i].unwrap() - gen[i - 1].unwrap();
                    let dy = emis[i].unwrap() - emis[i - 1].unwrap();
                    sxy += dx * dy;
                    sxx += dx * dx;
                }
            }
            assert!((v - sxy / sxx).abs() < 1e-12);
        }
    }

    // Box-Muller standard normal; keeps the dev-dependency surface small.
    fn rand_distr_standard_normal() -> impl rand::distributions::Distribution<f64> {
        struct StdNormal;
        impl rand::distributions::Distribution<f64> for StdNormal {
            fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }
        }
        StdNormal
    }

    #[test]
    fn mef_is_scale_equivariant_and_offset_invariant() {
        let n = 744;
        let gen: Vec<Option<f64>> = (0..n)
            .map(|i| Some(1000.0 + 700.0 * ((i % 3) as f64)))
            .collect();
        let emis: Vec<Option<f64>> = (0..n)
            .map(|i| Some(400.0 * ((i % 5) as f64) + 90.0))
            .collect();
        let base = estimate_mef(&series(gen.clone(), emis.clone()));

        let scaled_e = estimate_mef(&series(
            gen.clone(),
            emis.iter().map(|e| e.map(|x| 3.0 * x)).collect(),
        ));
        let scaled_g = estimate_mef(&series(
            gen.iter().map(|g| g.map(|x| 2.0 * x)).collect(),
            emis.clone(),
        ));
        let shifted = estimate_mef(&series(
            gen,
            emis.iter().map(|e| e.map(|x| x + 5000.0)).collect(),
        ));
        for month in 1..=12u8 {
            for hour in 0..24u8 {
                let Some(b) = base.get(month, hour) else {
                    continue;
                };
                assert!((scaled_e.get(month, hour).unwrap() - 3.0 * b).abs() < 1e-9);
                assert!((scaled_g.get(month, hour).unwrap() - b / 2.0).abs() < 1e-9);
                assert!((shifted.get(month, hour).unwrap() - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ratio_summary_basics() {
        let mut mef = MonthHourMatrix::empty("mef_R", Unit::KgCo2ePerMwh);
        let mut aef = MonthHourMatrix::empty("aef_R", Unit::KgCo2ePerMwh);
        for month in 1..=12u8 {
            for hour in 0..24u8 {
                aef.set(month, hour, 200.0, 1);
                mef.set(month, hour, 300.0, 1);
            }
        }
        let summary = mef_aef_summary(&mef, &aef).unwrap();
        assert!((summary.mean - 1.5).abs() < 1e-12);
        assert_eq!(summary.n_cells, 288);

        let same = mef_aef_summary(&aef, &aef).unwrap();
        assert!((same.mean - 1.0).abs() < 1e-12);

        let empty = MonthHourMatrix::empty("mef_S", Unit::KgCo2ePerMwh);
        assert!(matches!(
            mef_aef_summary(&empty, &aef),
            Err(EmissionsError::NoCommonCells { .. })
        ));
    }

    #[test]
    fn csv_reader_builds_gapped_series() {
        let text = "timestamp,generation_mwh,emissions_kg\n\
                    2023-01-01T00:00:00,1000,250000\n\
                    2023-01-01T02:00:00,1100,\n";
        let s = GenEmisSeries::read_csv(text, "R").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.generation_mwh[1], None);
        assert_eq!(s.emissions_kg[2], None);
        assert_eq!(s.generation_mwh[2], Some(1100.0));
    }
}
