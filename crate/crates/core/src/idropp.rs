//! Incentive-based demand-response programs: the program-parameter file
//! format plus deterministic baseline, payment, duration-bound, and
//! equivalent-hours semantics.
//!
//! Program rows mirror the parameter table shipped as
//! `program_parameters.csv`; a field holding `n/a` (or nothing) is
//! missing. Stochastic event simulation is out of scope — evaluation here
//! is for one already-called event.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdroppError {
    #[error("missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("row {row}, column '{column}': {detail}")]
    MalformedRow {
        row: usize,
        column: String,
        detail: String,
    },
    #[error("program {row}: {rule}")]
    InvalidProgram { row: usize, rule: String },
    #[error("baseline infeasible: {available} eligible days before {event_date}, need {needed}")]
    BaselineInfeasible {
        available: usize,
        needed: usize,
        event_date: NaiveDate,
    },
    #[error("program does not declare '{0}', required for this evaluation")]
    MissingParameter(&'static str),
    #[error("unsupported baseline function '{0}' (supported: mean, max, median)")]
    UnsupportedFunction(String),
    #[error("history day {date} has {found} hourly values, expected 24")]
    BadHistoryDay { date: NaiveDate, found: usize },
    #[error("baseline and metered profiles have different lengths ({baseline} vs {metered})")]
    ProfileMismatch { baseline: usize, metered: usize },
    #[error("event duration {duration} h outside program bounds [{min}, {max}]")]
    DurationOutOfBounds { duration: f64, min: f64, max: f64 },
    #[error("nomination must be positive for a per-kW rate, got {0}")]
    BadNomination(f64),
    #[error("rate must be >= 0, got {0}")]
    BadRate(f64),
    #[error("reference price must be positive, got {0}")]
    BadReferencePrice(f64),
}

/// Default minimum event duration (hours) when a program declares none.
pub const DEFAULT_MIN_DURATION_H: f64 = 1.0;
/// Default maximum event duration (hours) when a program declares none:
/// the longest observed event duration in the source data.
pub const DEFAULT_MAX_DURATION_H: f64 = 6.3;

/// Column IDs of the program file, in table order.
pub const PROGRAM_COLUMNS: [&str; 40] = [
    "min_days",
    "max_days",
    "min_dur",
    "max_dur",
    "start_time",
    "end_time",
    "max_events",
    "max_hours",
    "events_daily",
    "max_consec",
    "notif_type",
    "notif_time",
    "notif_delt",
    "base_method",
    "hist_pres",
    "pay_function",
    "region",
    "dow",
    "season",
    "elig",
    "comp",
    "sm",
    "em",
    "state",
    "util",
    "trigger",
    "load",
    "program_rate",
    "function_base",
    "delivered_ratio",
    "amount_reduced",
    "weekends",
    "holidays",
    "prev_events",
    "base_hours",
    "range_val",
    "range_res",
    "base_dates",
    "function",
    "firm_level",
];

/// Marker for an unavailable parameter in the file format.
pub const MISSING_MARKER: &str = "n/a";

/// One demand-response program; every parameter is optional and stored as
/// given, with typed accessors for the fields evaluation needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IbdrProgram {
    fields: Vec<Option<String>>,
}

/// Aggregation applied across baseline days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineFn {
    Mean,
    Max,
    Median,
}

/// Unit basis of a payment rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBasis {
    PerKw,
    PerKwh,
}

impl IbdrProgram {
    pub fn new() -> Self {
        Self {
            fields: vec![None; PROGRAM_COLUMNS.len()],
        }
    }

    fn column_index(column: &str) -> Option<usize> {
        PROGRAM_COLUMNS.iter().position(|c| *c == column)
    }

    /// Raw field value by column ID; `None` for missing.
    pub fn get(&self, column: &str) -> Option<&str> {
        Self::column_index(column)
            .and_then(|i| self.fields[i].as_deref())
    }

    /// Set a field by column ID; `n/a` and empty collapse to missing.
    pub fn set(&mut self, column: &str, value: &str) {
        if let Some(i) = Self::column_index(column) {
            let trimmed = value.trim();
            self.fields[i] = if trimmed.is_empty() || trimmed.eq_ignore_ascii_case(MISSING_MARKER) {
                None
            } else {
                Some(trimmed.to_string())
            };
        }
    }

    pub fn populated_fields(&self) -> usize {
        self.fields.iter().filter(|f| f.is_some()).count()
    }

    fn numeric(&self, column: &str) -> Option<f64> {
        self.get(column).and_then(|v| v.parse::<f64>().ok())
    }

    pub fn min_duration_h(&self) -> Option<f64> {
        self.numeric("min_dur")
    }

    pub fn max_duration_h(&self) -> Option<f64> {
        self.numeric("max_dur")
    }

    /// DOE listing classification carried by `program_rate` (e.g.
    /// "program" or "rate").
    pub fn program_or_rate(&self) -> Option<&str> {
        self.get("program_rate")
    }

    /// Pre-defined payment rate parsed out of `pay_function` when it is
    /// declared numerically, e.g. `$40/kW` or `0.5/kWh`. A bare number
    /// counts as per-kW. Descriptive forms ("market based") yield `None`.
    pub fn declared_rate(&self) -> Option<(f64, RateBasis)> {
        let raw = self.get("pay_function")?;
        let trimmed = raw.trim().trim_start_matches('$');
        let (number, basis) = if let Some(prefix) = trimmed.strip_suffix("/kWh") {
            (prefix, RateBasis::PerKwh)
        } else if let Some(prefix) = trimmed.strip_suffix("/kW") {
            (prefix, RateBasis::PerKw)
        } else {
            (trimmed, RateBasis::PerKw)
        };
        number.trim().parse::<f64>().ok().map(|rate| (rate, basis))
    }

    pub fn firm_level_kw(&self) -> Option<f64> {
        self.numeric("firm_level")
    }

    pub fn range_val(&self) -> Option<u32> {
        self.get("range_val").and_then(|v| v.parse::<u32>().ok())
    }

    pub fn region(&self) -> Option<&str> {
        self.get("region")
    }

    pub fn state(&self) -> Option<&str> {
        self.get("state")
    }

    fn flag(&self, column: &str) -> Option<bool> {
        self.get(column).and_then(|v| {
            match v.to_ascii_lowercase().as_str() {
                "yes" | "y" | "true" | "1" | "included" => Some(true),
                "no" | "n" | "false" | "0" | "excluded" => Some(false),
                _ => None,
            }
        })
    }

    /// Whether the baseline window includes weekends; missing means no
    /// exclusion is applied.
    pub fn includes_weekends(&self) -> Option<bool> {
        self.flag("weekends")
    }

    pub fn includes_holidays(&self) -> Option<bool> {
        self.flag("holidays")
    }

    pub fn includes_prev_events(&self) -> Option<bool> {
        self.flag("prev_events")
    }

    /// Baseline measurement hours as a `start-end` range, end exclusive;
    /// missing means the whole day.
    pub fn base_hours(&self) -> (u8, u8) {
        match self.get("base_hours") {
            Some(raw) => {
                let parts: Vec<&str> = raw.split('-').collect();
                if parts.len() == 2 {
                    if let (Ok(s), Ok(e)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
                        if s < e && e <= 24 {
                            return (s, e);
                        }
                    }
                }
                (0, 24)
            }
            None => (0, 24),
        }
    }

    pub fn baseline_fn(&self) -> Result<BaselineFn, IdroppError> {
        match self.get("function") {
            None => Ok(BaselineFn::Mean),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "mean" | "average" => Ok(BaselineFn::Mean),
                "max" | "maximum" => Ok(BaselineFn::Max),
                "median" => Ok(BaselineFn::Median),
                other => Err(IdroppError::UnsupportedFunction(other.to_string())),
            },
        }
    }
}

fn validate_program(program: &IbdrProgram, row: usize) -> Result<(), IdroppError> {
    if let (Some(min), Some(max)) = (program.min_duration_h(), program.max_duration_h()) {
        if min > max {
            return Err(IdroppError::InvalidProgram {
                row,
                rule: format!("min_dur {min} exceeds max_dur {max}"),
            });
        }
    }
    if let Some(raw) = program.get("range_val") {
        match raw.parse::<i64>() {
            Ok(v) if v >= 1 => {}
            _ => {
                return Err(IdroppError::InvalidProgram {
                    row,
                    rule: format!("range_val '{raw}' is not a positive integer"),
                })
            }
        }
    }
    if let Some((rate, _)) = program.declared_rate() {
        if rate < 0.0 {
            return Err(IdroppError::InvalidProgram {
                row,
                rule: format!("declared payment rate {rate} is negative"),
            });
        }
    }
    Ok(())
}

/// Parse the program file; the header must carry every column ID.
pub fn parse_programs(text: &str) -> Result<Vec<IbdrProgram>, IdroppError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IdroppError::MalformedRow {
            row: 1,
            column: String::new(),
            detail: e.to_string(),
        })?
        .clone();
    let mut col_of = Vec::new();
    let mut missing = Vec::new();
    for column in PROGRAM_COLUMNS {
        match headers.iter().position(|h| h == column) {
            Some(i) => col_of.push(i),
            None => missing.push(column.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IdroppError::MissingColumns(missing));
    }
    for name in headers.iter() {
        if !PROGRAM_COLUMNS.contains(&name) {
            log::warn!("program file: ignoring unknown column '{name}'");
        }
    }

    let mut programs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| IdroppError::MalformedRow {
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        let mut program = IbdrProgram::new();
        for (j, column) in PROGRAM_COLUMNS.iter().enumerate() {
            program.set(column, record.get(col_of[j]).unwrap_or(""));
        }
        validate_program(&program, row)?;
        programs.push(program);
    }
    Ok(programs)
}

/// Serialize programs back to the file format; missing fields become `n/a`.
pub fn serialize_programs(programs: &[IbdrProgram]) -> String {
    let mut out = PROGRAM_COLUMNS.join(",");
    out.push('\n');
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    for program in programs {
        let row: Vec<&str> = PROGRAM_COLUMNS
            .iter()
            .map(|c| program.get(c).unwrap_or(MISSING_MARKER))
            .collect();
        writer.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory flush")).unwrap());
    out
}

/// One parameter descriptor from the metadata file
/// (`column_name,column_id,description`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDescriptor {
    pub column_name: String,
    pub column_id: String,
    pub description: String,
}

pub fn parse_parameter_metadata(text: &str) -> Result<Vec<ParameterDescriptor>, IdroppError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IdroppError::MalformedRow {
            row: 1,
            column: String::new(),
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, IdroppError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IdroppError::MissingColumns(vec![name.to_string()]))
    };
    let name_col = col("column_name")?;
    let id_col = col("column_id")?;
    let desc_col = col("description")?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IdroppError::MalformedRow {
            row: i + 2,
            column: String::new(),
            detail: e.to_string(),
        })?;
        out.push(ParameterDescriptor {
            column_name: record.get(name_col).unwrap_or("").to_string(),
            column_id: record.get(id_col).unwrap_or("").to_string(),
            description: record.get(desc_col).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

/// One day of hourly load history.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyLoad {
    pub date: NaiveDate,
    /// 24 hourly kW values.
    pub kw: Vec<f64>,
}

/// Calendar context the caller injects for baseline-day eligibility.
#[derive(Debug, Clone, Default)]
pub struct BaselineContext {
    pub holidays: BTreeSet<NaiveDate>,
    pub prior_events: BTreeSet<NaiveDate>,
}

fn is_weekend(date: NaiveDate) -> bool {
    crate::calendar::weekday_index(date) >= 5
}

/// Compute the baseline kW profile over the program's `base_hours`.
///
/// Days on or after the event, and days excluded by the program's
/// weekends/holidays/prev_events flags, are ineligible; the most recent
/// `range_val` eligible days feed the program's aggregation function
/// hour by hour. A declared `firm_level` short-circuits all of it.
pub fn compute_baseline(
    program: &IbdrProgram,
    history: &[DailyLoad],
    event_date: NaiveDate,
    context: &BaselineContext,
) -> Result<Vec<f64>, IdroppError> {
    let (hour_start, hour_end) = program.base_hours();
    let n_hours = (hour_end - hour_start) as usize;

    if let Some(firm) = program.firm_level_kw() {
        return Ok(vec![firm; n_hours]);
    }

    let needed = program
        .range_val()
        .ok_or(IdroppError::MissingParameter("range_val"))? as usize;
    let function = program.baseline_fn()?;

    let mut eligible: Vec<&DailyLoad> = history
        .iter()
        .filter(|day| day.date < event_date)
        .filter(|day| program.includes_weekends() != Some(false) || !is_weekend(day.date))
        .filter(|day| {
            program.includes_holidays() != Some(false) || !context.holidays.contains(&day.date)
        })
        .filter(|day| {
            program.includes_prev_events() != Some(false)
                || !context.prior_events.contains(&day.date)
        })
        .collect();
    eligible.sort_by_key(|day| day.date);
    if eligible.len() < needed {
        return Err(IdroppError::BaselineInfeasible {
            available: eligible.len(),
            needed,
            event_date,
        });
    }
    let window = &eligible[eligible.len() - needed..];
    for day in window {
        if day.kw.len() != 24 {
            return Err(IdroppError::BadHistoryDay {
                date: day.date,
                found: day.kw.len(),
            });
        }
    }

    let mut baseline = Vec::with_capacity(n_hours);
    for hour in hour_start..hour_end {
        let mut samples: Vec<f64> = window.iter().map(|d| d.kw[hour as usize]).collect();
        let value = match function {
            BaselineFn::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            BaselineFn::Max => samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            BaselineFn::Median => {
                samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = samples.len() / 2;
                if samples.len() % 2 == 0 {
                    (samples[mid - 1] + samples[mid]) / 2.0
                } else {
                    samples[mid]
                }
            }
        };
        baseline.push(value);
    }
    Ok(baseline)
}

/// Settlement result for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentOutcome {
    pub payment_usd: f64,
    /// Total reduction divided by nomination x duration; `None` when the
    /// nomination is non-positive under a per-kWh rate.
    pub delivered_ratio: Option<f64>,
    pub reduced_kwh: f64,
}

/// Settle one event: hourly reductions are baseline minus metered, clamped
/// at zero. Per-kW rates credit each hour up to the nomination; per-kWh
/// rates pay the full reduction.
pub fn compute_payment(
    program: &IbdrProgram,
    baseline_kw: &[f64],
    metered_kw: &[f64],
    nomination_kw: f64,
    rate: f64,
    basis: RateBasis,
) -> Result<PaymentOutcome, IdroppError> {
    if baseline_kw.len() != metered_kw.len() {
        return Err(IdroppError::ProfileMismatch {
            baseline: baseline_kw.len(),
            metered: metered_kw.len(),
        });
    }
    if rate < 0.0 {
        return Err(IdroppError::BadRate(rate));
    }
    let duration = baseline_kw.len() as f64;
    let (min_dur, max_dur) = duration_bounds(program);
    if duration < min_dur || duration > max_dur {
        return Err(IdroppError::DurationOutOfBounds {
            duration,
            min: min_dur,
            max: max_dur,
        });
    }
    if basis == RateBasis::PerKw && nomination_kw <= 0.0 {
        return Err(IdroppError::BadNomination(nomination_kw));
    }

    let mut reduced_total = 0.0f64;
    let mut credited = 0.0f64;
    for (b, m) in baseline_kw.iter().zip(metered_kw) {
        let reduced = (b - m).max(0.0);
        reduced_total += reduced; // 1 h steps: kW == kWh per hour
        credited += match basis {
            RateBasis::PerKw => reduced.min(nomination_kw),
            RateBasis::PerKwh => reduced,
        };
    }
    let delivered_ratio = if nomination_kw > 0.0 {
        Some(reduced_total / (nomination_kw * duration))
    } else {
        None
    };
    Ok(PaymentOutcome {
        payment_usd: rate * credited,
        delivered_ratio,
        reduced_kwh: reduced_total,
    })
}

/// Declared event-duration bounds with documented defaults for missing
/// ends. If a default would invert the interval, the defaulted side is
/// pulled to the declared one.
pub fn duration_bounds(program: &IbdrProgram) -> (f64, f64) {
    let declared_min = program.min_duration_h();
    let declared_max = program.max_duration_h();
    let mut min = declared_min.unwrap_or(DEFAULT_MIN_DURATION_H);
    let mut max = declared_max.unwrap_or(DEFAULT_MAX_DURATION_H);
    if min > max {
        if declared_max.is_none() {
            max = min;
        } else {
            min = max;
        }
    }
    (min, max)
}

/// Hours of reference-priced consumption one $/kW payment buys: drawing
/// 1 kW for h hours costs `reference_price * h` per kW.
pub fn equivalent_hours(payment_per_kw: f64, reference_price: f64) -> Result<f64, IdroppError> {
    if reference_price <= 0.0 {
        return Err(IdroppError::BadReferencePrice(reference_price));
    }
    Ok(payment_per_kw / reference_price)
}
