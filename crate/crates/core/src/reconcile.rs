//! Reconciliation of structurally incompatible signals into a common
//! month-hour representation.
//!
//! Tariffs are flattened against a flat 1 MW reference load: each item's
//! dollar contribution per billing period is spread evenly over its active
//! hours and converted to $/kWh. Sub-hourly series are averaged up to
//! hourly, and any hourly series collapses to a 12x24 matrix of
//! month-hour means.

use chrono::{NaiveDateTime, Timelike};
use thiserror::Error;

use crate::billing::{item_contributions, BillingError, LoadProfile};
use crate::calendar::{hour_at, hour_fields, is_hour_aligned, year_start};
use crate::tariff::{ChargeKind, TariffSchedule};

#[derive(Debug, Error)]
pub enum ReconcileError {
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
    #[error("series step of {0} minutes does not divide 60")]
    BadStep(u32),
    #[error("series is not on a uniform {step}-minute grid at row {row}")]
    NonUniform { step: u32, row: usize },
    #[error("timestamp '{0}' is not hour-aligned")]
    Unaligned(String),
    #[error("cannot parse timestamp '{0}'")]
    BadTimestamp(String),
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("timestamps must be strictly increasing (row {0})")]
    NotIncreasing(usize),
    #[error("month {month}: only {found} common non-missing hours, need at least 2")]
    AlignTooFew { month: u8, found: usize },
    #[error("month must lie in 1..=12, got {0}")]
    BadMonth(u8),
    #[error("matrix file: {0}")]
    BadMatrix(String),
    #[error(transparent)]
    Billing(#[from] BillingError),
}

/// Physical unit of a series or matrix; part of output filenames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    UsdPerKwh,
    UsdPerMwh,
    KgCo2ePerMwh,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::UsdPerKwh => "usd_per_kwh",
            Unit::UsdPerMwh => "usd_per_mwh",
            Unit::KgCo2ePerMwh => "kg_co2e_per_mwh",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ReconcileError> {
        match s {
            "usd_per_kwh" => Ok(Unit::UsdPerKwh),
            "usd_per_mwh" => Ok(Unit::UsdPerMwh),
            "kg_co2e_per_mwh" => Ok(Unit::KgCo2ePerMwh),
            other => Err(ReconcileError::UnknownUnit(other.to_string())),
        }
    }
}

const TIMESTAMP_FORMATS: [&str; 3] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"];

fn parse_timestamp(raw: &str) -> Result<NaiveDateTime, ReconcileError> {
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(ts) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(ts);
        }
    }
    Err(ReconcileError::BadTimestamp(raw.to_string()))
}

/// Hourly series with gaps marked missing, anchored at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub label: String,
    pub unit: Unit,
    pub start: NaiveDateTime,
    pub values: Vec<Option<f64>>,
}

impl HourlySeries {
    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        hour_at(self.start, index)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV serialization: `timestamp,value` with empty values for gaps.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,value\n");
        for (i, value) in self.values.iter().enumerate() {
            let ts = self.timestamp(i).format("%Y-%m-%dT%H:%M:%S");
            match value {
                Some(v) => out.push_str(&format!("{ts},{v}\n")),
                None => out.push_str(&format!("{ts},\n")),
            }
        }
        out
    }
}

/// A series on a uniform sub-hourly grid, the shape wholesale feeds arrive in.
#[derive(Debug, Clone, PartialEq)]
pub struct SubHourlySeries {
    pub label: String,
    pub unit: Unit,
    pub start: NaiveDateTime,
    pub step_minutes: u32,
    pub values: Vec<Option<f64>>,
}

/// Either cadence, as detected from a `timestamp,value` file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySeries {
    Hourly(HourlySeries),
    SubHourly(SubHourlySeries),
}

impl AnySeries {
    /// Resolve to hourly, resampling when needed.
    pub fn into_hourly(self) -> Result<HourlySeries, ReconcileError> {
        match self {
            AnySeries::Hourly(s) => Ok(s),
            AnySeries::SubHourly(s) => resample_to_hourly(&s),
        }
    }
}

/// Read a `timestamp,value` CSV, detecting hourly or sub-hourly cadence
/// from the smallest timestamp gap. Absent grid points and empty values
/// are missing.
pub fn read_series_csv(text: &str, label: &str, unit: Unit) -> Result<AnySeries, ReconcileError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| ReconcileError::BadRow {
        row: 1,
        detail: e.to_string(),
    })?;
    let ts_col = headers.iter().position(|h| h == "timestamp").ok_or_else(|| {
        ReconcileError::BadRow {
            row: 1,
            detail: "missing 'timestamp' column".into(),
        }
    })?;
    let val_col = headers.iter().position(|h| h == "value").ok_or_else(|| {
        ReconcileError::BadRow {
            row: 1,
            detail: "missing 'value' column".into(),
        }
    })?;

    let mut rows: Vec<(NaiveDateTime, Option<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ReconcileError::BadRow {
            row,
            detail: e.to_string(),
        })?;
        let ts = parse_timestamp(record.get(ts_col).unwrap_or(""))?;
        let raw = record.get(val_col).unwrap_or("");
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
            None
        } else {
            Some(raw.parse::<f64>().map_err(|e| ReconcileError::BadRow {
                row,
                detail: format!("'{raw}' is not a number: {e}"),
            })?)
        };
        if let Some((prev, _)) = rows.last() {
            if ts <= *prev {
                return Err(ReconcileError::NotIncreasing(row));
            }
        }
        rows.push((ts, value));
    }
    if rows.is_empty() {
        return Ok(AnySeries::Hourly(HourlySeries {
            label: label.to_string(),
            unit,
            start: year_start(2000),
            values: Vec::new(),
        }));
    }

    let step_minutes = rows
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).num_minutes())
        .min()
        .unwrap_or(60)
        .min(60) as u32;
    if step_minutes == 0 || 60 % step_minutes != 0 {
        return Err(ReconcileError::BadStep(step_minutes));
    }
    let start = rows[0].0;
    if step_minutes == 60 && !is_hour_aligned(start) {
        return Err(ReconcileError::Unaligned(start.to_string()));
    }
    let span = (rows.last().unwrap().0 - start).num_minutes();
    if span % step_minutes as i64 != 0 {
        return Err(ReconcileError::NonUniform {
            step: step_minutes,
            row: rows.len() + 1,
        });
    }
    let slots = (span / step_minutes as i64) as usize + 1;
    let mut values: Vec<Option<f64>> = vec![None; slots];
    for (i, (ts, value)) in rows.iter().enumerate() {
        let offset = (*ts - start).num_minutes();
        if offset % step_minutes as i64 != 0 {
            return Err(ReconcileError::NonUniform {
                step: step_minutes,
                row: i + 2,
            });
        }
        values[(offset / step_minutes as i64) as usize] = *value;
    }
    if step_minutes == 60 {
        Ok(AnySeries::Hourly(HourlySeries {
            label: label.to_string(),
            unit,
            start,
            values,
        }))
    } else {
        Ok(AnySeries::SubHourly(SubHourlySeries {
            label: label.to_string(),
            unit,
            start,
            step_minutes,
            values,
        }))
    }
}

/// Average a uniform sub-hourly series up to hourly. An hour with any
/// missing sub-step is missing.
pub fn resample_to_hourly(series: &SubHourlySeries) -> Result<HourlySeries, ReconcileError> {
    if series.step_minutes == 0 || 60 % series.step_minutes != 0 {
        return Err(ReconcileError::BadStep(series.step_minutes));
    }
    let per_hour = (60 / series.step_minutes) as usize;
    let start_minute = series.start.minute();
    if start_minute % series.step_minutes != 0 || series.start.second() != 0 {
        return Err(ReconcileError::Unaligned(series.start.to_string()));
    }
    // Anchor the output at the hour containing the first sub-step.
    let hour_start = series
        .start
        .with_minute(0)
        .unwrap()
        .with_second(0)
        .unwrap();
    let lead = (start_minute / series.step_minutes) as usize;
    let total_slots = lead + series.values.len();
    let hours = total_slots.div_ceil(per_hour);
    let mut values: Vec<Option<f64>> = Vec::with_capacity(hours);
    for h in 0..hours {
        let mut sum = 0.0f64;
        let mut complete = true;
        for k in 0..per_hour {
            let slot = h * per_hour + k;
            let v = if slot < lead {
                None
            } else {
                series.values.get(slot - lead).copied().flatten()
            };
            match v {
                Some(x) => sum += x,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        values.push(if complete { Some(sum / per_hour as f64) } else { None });
    }
    Ok(HourlySeries {
        label: series.label.clone(),
        unit: series.unit,
        start: hour_start,
        values,
    })
}

/// 12x24 month-hour representation; cells with no contributing samples are
/// missing, never zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthHourMatrix {
    pub label: String,
    pub unit: Unit,
    cells: Vec<Option<f64>>,
    counts: Vec<u32>,
}

impl MonthHourMatrix {
    pub fn empty(label: &str, unit: Unit) -> Self {
        Self {
            label: label.to_string(),
            unit,
            cells: vec![None; 12 * 24],
            counts: vec![0; 12 * 24],
        }
    }

    fn idx(month: u8, hour: u8) -> usize {
        debug_assert!((1..=12).contains(&month) && hour < 24);
        (month as usize - 1) * 24 + hour as usize
    }

    pub fn get(&self, month: u8, hour: u8) -> Option<f64> {
        self.cells[Self::idx(month, hour)]
    }

    pub fn count(&self, month: u8, hour: u8) -> u32 {
        self.counts[Self::idx(month, hour)]
    }

    pub fn set(&mut self, month: u8, hour: u8, value: f64, count: u32) {
        let i = Self::idx(month, hour);
        self.cells[i] = Some(value);
        self.counts[i] = count;
    }

    /// Hours of one month with non-missing cells, ascending.
    pub fn month_hours(&self, month: u8) -> Vec<u8> {
        (0..24u8).filter(|&h| self.get(month, h).is_some()).collect()
    }

    /// Output filename, `<label>__<unit>.csv`.
    pub fn filename(&self) -> String {
        format!("{}__{}.csv", self.label, self.unit.as_str())
    }

    /// CSV serialization: header `h00..h23`, then 12 rows (months 1..12)
    /// with empty fields for missing cells.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (0..24).map(|h| format!("h{h:02}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for month in 1..=12u8 {
            let row: Vec<String> = (0..24u8)
                .map(|h| match self.get(month, h) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse [`Self::to_csv`] output. Counts are reconstructed as 1 for
    /// present cells and 0 for missing ones.
    pub fn from_csv(text: &str, label: &str, unit: Unit) -> Result<Self, ReconcileError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ReconcileError::BadMatrix("empty file".into()))?;
        if header.split(',').count() != 24 {
            return Err(ReconcileError::BadMatrix(format!(
                "expected 24 header columns, found {}",
                header.split(',').count()
            )));
        }
        let mut matrix = Self::empty(label, unit);
        let mut month = 0u8;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            month += 1;
            if month > 12 {
                return Err(ReconcileError::BadMatrix("more than 12 data rows".into()));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 24 {
                return Err(ReconcileError::BadMatrix(format!(
                    "month {month}: expected 24 columns, found {}",
                    fields.len()
                )));
            }
            for (h, raw) in fields.iter().enumerate() {
                if raw.is_empty() {
                    continue;
                }
                let v: f64 = raw.parse().map_err(|e| {
                    ReconcileError::BadMatrix(format!("month {month} hour {h}: {e}"))
                })?;
                matrix.set(month, h as u8, v, 1);
            }
        }
        if month != 12 {
            return Err(ReconcileError::BadMatrix(format!(
                "expected 12 data rows, found {month}"
            )));
        }
        Ok(matrix)
    }
}

/// Collapse an hourly series to month-hour means.
pub fn month_hour_average(series: &HourlySeries) -> MonthHourMatrix {
    let mut sums = vec![0.0f64; 12 * 24];
    let mut counts = vec![0u32; 12 * 24];
    for (i, value) in series.values.iter().enumerate() {
        if let Some(v) = value {
            let ts = series.timestamp(i);
            let (m, _, h) = hour_fields(ts);
            let idx = (m as usize - 1) * 24 + h as usize;
            sums[idx] += v;
            counts[idx] += 1;
        }
    }
    let mut matrix = MonthHourMatrix::empty(&series.label, series.unit);
    for month in 1..=12u8 {
        for hour in 0..24u8 {
            let idx = (month as usize - 1) * 24 + hour as usize;
            if counts[idx] > 0 {
                matrix.set(month, hour, sums[idx] / counts[idx] as f64, counts[idx]);
            }
        }
    }
    matrix
}

/// Restrict two matrices to one month's hours that are non-missing in
/// both, returning equal-length vectors in ascending hour order.
pub fn align(
    a: &MonthHourMatrix,
    b: &MonthHourMatrix,
    month: u8,
) -> Result<(Vec<f64>, Vec<f64>), ReconcileError> {
    if !(1..=12).contains(&month) {
        return Err(ReconcileError::BadMonth(month));
    }
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for hour in 0..24u8 {
        if let (Some(x), Some(y)) = (a.get(month, hour), b.get(month, hour)) {
            va.push(x);
            vb.push(y);
        }
    }
    if va.len() < 2 {
        return Err(ReconcileError::AlignTooFew {
            month,
            found: va.len(),
        });
    }
    Ok((va, vb))
}

/// Reference load level tariffs are flattened against, kW.
pub const FLATTENING_REFERENCE_KW: f64 = 1000.0;

/// Flatten a tariff to an hourly $/kWh series over one calendar year.
///
/// Each energy and demand item's dollars per billing period (per day for
/// daily-assessed demand) under a flat 1 MW load are spread evenly across
/// the item's active hours in that period and divided by the 1,000 kWh the
/// reference load consumes per hour. Customer charges are excluded as
/// load-independent. Summing the series times 1,000 kWh therefore
/// reproduces the 1 MW bill minus customer charges.
pub fn flatten_tariff(
    schedule: &TariffSchedule,
    year: i32,
) -> Result<HourlySeries, ReconcileError> {
    let load = LoadProfile::flat_year(year, FLATTENING_REFERENCE_KW);
    let contributions = item_contributions(schedule, &load)?;
    let mut values = vec![0.0f64; load.len()];
    for c in &contributions {
        let item = &schedule.items[c.item_index];
        match item.kind {
            ChargeKind::Customer => continue,
            ChargeKind::Energy | ChargeKind::Demand => {}
        }
        // Energy activity additionally requires a non-zero rate; such an
        // item contributes no dollars anyway. Demand items with no active
        // hours were already warned about by the accumulator.
        if c.active_hours.is_empty() || c.amount_usd == 0.0 {
            continue;
        }
        let per_hour =
            c.amount_usd / c.active_hours.len() as f64 / FLATTENING_REFERENCE_KW;
        for &idx in &c.active_hours {
            values[idx] += per_hour;
        }
    }
    Ok(HourlySeries {
        label: schedule.tariff_id.clone(),
        unit: Unit::UsdPerKwh,
        start: load.start(),
        values: values.into_iter().map(Some).collect(),
    })
}
