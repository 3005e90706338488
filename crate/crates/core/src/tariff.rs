//! Retail tariff domain model: charge rows, schedules, metadata, and the
//! CSV file format they travel in.
//!
//! A tariff file is one CSV per tariff with the fixed header
//! `kind,charge_family,rate,tier_floor,month_start,month_end,weekday_start,
//! weekday_end,hour_start,hour_end,assessed`. The filename carries the
//! tariff id and bundling, e.g. `PGE123_bundled.csv`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

/// Column order of the tariff file format.
pub const TARIFF_HEADER: [&str; 11] = [
    "kind",
    "charge_family",
    "rate",
    "tier_floor",
    "month_start",
    "month_end",
    "weekday_start",
    "weekday_end",
    "hour_start",
    "hour_end",
    "assessed",
];

/// Column order of the metadata file format.
pub const METADATA_HEADER: [&str; 9] = [
    "tariff_id",
    "utility_name",
    "eia_id",
    "zip",
    "latitude",
    "longitude",
    "sector",
    "service_type",
    "iso_label",
];

#[derive(Debug, Error)]
pub enum TariffError {
    #[error("row {row}, column '{column}': {detail}")]
    MalformedRow {
        row: usize,
        column: String,
        detail: String,
    },
    #[error("missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("validation failed: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("cannot derive tariff id and bundling from filename '{0}' (expected <tariff_id>_<bundled|delivery_only>.csv)")]
    Filename(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error reading '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One failed invariant, pointing at the offending item and field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index into `TariffSchedule::items` (or row index for metadata).
    pub item_index: usize,
    pub field: &'static str,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item {} field '{}': {}", self.item_index, self.field, self.rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChargeKind {
    Energy,
    Demand,
    Customer,
}

impl ChargeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChargeKind::Energy => "energy",
            ChargeKind::Demand => "demand",
            ChargeKind::Customer => "customer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "energy" => Some(ChargeKind::Energy),
            "demand" => Some(ChargeKind::Demand),
            "customer" => Some(ChargeKind::Customer),
            _ => None,
        }
    }
}

impl fmt::Display for ChargeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a demand charge resets monthly or each calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assessment {
    Monthly,
    Daily,
}

impl Assessment {
    pub fn as_str(self) -> &'static str {
        match self {
            Assessment::Monthly => "monthly",
            Assessment::Daily => "daily",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monthly" | "" => Some(Assessment::Monthly),
            "daily" => Some(Assessment::Daily),
            _ => None,
        }
    }
}

/// One charge row: a rate applied inside a month/weekday/hour window and,
/// for tiered families, to one quantity block.
///
/// Hour windows are end-exclusive `[hour_start, hour_end)` so adjacent
/// windows partition the day. Month and weekday bounds are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeItem {
    pub kind: ChargeKind,
    /// Groups the tiers of one logical charge; the (kind, family) pair is
    /// the tier-ladder key.
    pub charge_family: String,
    /// $/kWh for energy, $/kW for demand, $/billing-period for customer.
    pub rate: f64,
    /// Lower bound of this block: cumulative kWh in the billing period for
    /// energy, kW for demand, 0 for untiered charges.
    pub tier_floor: f64,
    pub month_start: u8,
    pub month_end: u8,
    pub weekday_start: u8,
    pub weekday_end: u8,
    pub hour_start: u8,
    pub hour_end: u8,
    /// Meaningful for demand charges only.
    pub assessed: Assessment,
}

impl ChargeItem {
    /// Month window check (inclusive bounds).
    pub fn months_contain(&self, month: u8) -> bool {
        self.month_start <= month && month <= self.month_end
    }

    /// Full time-of-use window check. Customer charges carry window fields
    /// but only the month bounds are honoured; weekday/hour are ignored.
    pub fn window_contains(&self, month: u8, weekday: u8, hour: u8) -> bool {
        if !self.months_contain(month) {
            return false;
        }
        if self.kind == ChargeKind::Customer {
            return true;
        }
        self.weekday_start <= weekday
            && weekday <= self.weekday_end
            && self.hour_start <= hour
            && hour < self.hour_end
    }

    /// Human-readable window label used in bill breakdowns.
    pub fn window_label(&self) -> String {
        format!(
            "m{}-{} wd{}-{} h{}-{}",
            self.month_start,
            self.month_end,
            self.weekday_start,
            self.weekday_end,
            self.hour_start,
            self.hour_end
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bundling {
    Bundled,
    DeliveryOnly,
}

impl Bundling {
    pub fn suffix(self) -> &'static str {
        match self {
            Bundling::Bundled => "bundled",
            Bundling::DeliveryOnly => "delivery_only",
        }
    }
}

/// A tariff: an ordered set of charge rows plus its bundling flavour.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    pub tariff_id: String,
    pub bundling: Bundling,
    pub items: Vec<ChargeItem>,
}

impl TariffSchedule {
    /// Filename this schedule serializes to.
    pub fn filename(&self) -> String {
        format!("{}_{}.csv", self.tariff_id, self.bundling.suffix())
    }

    /// Items grouped by (kind, family) in first-appearance order. Each
    /// group's items keep file order, which validation pins to the tier
    /// ladder order.
    pub fn families(&self) -> Vec<((ChargeKind, &str), Vec<usize>)> {
        let mut order: Vec<(ChargeKind, &str)> = Vec::new();
        let mut groups: HashMap<(ChargeKind, &str), Vec<usize>> = HashMap::new();
        for (i, item) in self.items.iter().enumerate() {
            let key = (item.kind, item.charge_family.as_str());
            if !groups.contains_key(&key) {
                order.push(key);
            }
            groups.entry(key).or_default().push(i);
        }
        order
            .into_iter()
            .map(|key| {
                let idxs = groups.remove(&key).unwrap();
                (key, idxs)
            })
            .collect()
    }
}

/// Check every type invariant directly; violations are data, not failures.
pub fn validate_schedule(schedule: &TariffSchedule) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, item) in schedule.items.iter().enumerate() {
        let mut push = |field: &'static str, rule: String| {
            out.push(Violation {
                item_index: i,
                field,
                rule,
            })
        };
        if !(item.rate >= 0.0) || !item.rate.is_finite() {
            push("rate", "rate must be finite and >= 0".into());
        }
        if !(item.tier_floor >= 0.0) || !item.tier_floor.is_finite() {
            push("tier_floor", "tier_floor must be finite and >= 0".into());
        }
        if !(1..=12).contains(&item.month_start) || !(1..=12).contains(&item.month_end) {
            push("month_start", "month indices must lie in 1..=12".into());
        } else if item.month_start > item.month_end {
            push("month_start", "month_start must be <= month_end".into());
        }
        if item.weekday_start > 6 || item.weekday_end > 6 {
            push("weekday_start", "weekday indices must lie in 0..=6".into());
        } else if item.weekday_start > item.weekday_end {
            push("weekday_start", "weekday_start must be <= weekday_end".into());
        }
        if item.hour_start > 23 {
            push("hour_start", "hour_start must lie in 0..=23".into());
        }
        if item.hour_end == 0 || item.hour_end > 24 {
            push("hour_end", "hour_end must lie in 1..=24".into());
        }
        if item.hour_start >= item.hour_end {
            push("hour_start", "hour_start must be < hour_end".into());
        }
    }
    // Tier ladders: strictly increasing floors starting at 0 within each
    // (kind, family) group, in file order.
    for ((_, family), idxs) in schedule.families() {
        let first = idxs[0];
        if schedule.items[first].tier_floor != 0.0 {
            out.push(Violation {
                item_index: first,
                field: "tier_floor",
                rule: format!("first tier of family '{family}' must start at 0"),
            });
        }
        for pair in idxs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if schedule.items[b].tier_floor <= schedule.items[a].tier_floor {
                out.push(Violation {
                    item_index: b,
                    field: "tier_floor",
                    rule: format!(
                        "tier floors of family '{family}' must be strictly increasing"
                    ),
                });
            }
        }
    }
    out
}

/// Parse the body of a tariff file. Unknown columns are ignored with a
/// warning; a parsed schedule that fails validation is an error.
pub fn parse_tariff_file(
    text: &str,
    tariff_id: &str,
    bundling: Bundling,
) -> Result<TariffSchedule, TariffError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let mut col_of: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if TARIFF_HEADER.contains(&name) {
            col_of.insert(TARIFF_HEADER[TARIFF_HEADER.iter().position(|h| *h == name).unwrap()], i);
        } else {
            log::warn!("tariff '{tariff_id}': ignoring unknown column '{name}'");
        }
    }
    let missing: Vec<String> = TARIFF_HEADER
        .iter()
        .filter(|h| !col_of.contains_key(**h))
        .map(|h| h.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(TariffError::MissingColumns(missing));
    }

    let mut items = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 2; // 1-based, counting the header line
        let field = |name: &str| -> &str { record.get(col_of[name]).unwrap_or("") };
        let num = |name: &str| -> Result<f64, TariffError> {
            field(name).parse::<f64>().map_err(|e| TariffError::MalformedRow {
                row,
                column: name.to_string(),
                detail: format!("'{}' is not a number: {e}", field(name)),
            })
        };
        let int = |name: &str| -> Result<u8, TariffError> {
            field(name).parse::<u8>().map_err(|e| TariffError::MalformedRow {
                row,
                column: name.to_string(),
                detail: format!("'{}' is not an integer: {e}", field(name)),
            })
        };
        let kind = ChargeKind::parse(field("kind")).ok_or_else(|| TariffError::MalformedRow {
            row,
            column: "kind".into(),
            detail: format!("'{}' is not one of energy|demand|customer", field("kind")),
        })?;
        let assessed =
            Assessment::parse(field("assessed")).ok_or_else(|| TariffError::MalformedRow {
                row,
                column: "assessed".into(),
                detail: format!("'{}' is not one of monthly|daily", field("assessed")),
            })?;
        items.push(ChargeItem {
            kind,
            charge_family: field("charge_family").to_string(),
            rate: num("rate")?,
            tier_floor: num("tier_floor")?,
            month_start: int("month_start")?,
            month_end: int("month_end")?,
            weekday_start: int("weekday_start")?,
            weekday_end: int("weekday_end")?,
            hour_start: int("hour_start")?,
            hour_end: int("hour_end")?,
            assessed,
        });
    }

    let schedule = TariffSchedule {
        tariff_id: tariff_id.to_string(),
        bundling,
        items,
    };
    let violations = validate_schedule(&schedule);
    if violations.is_empty() {
        Ok(schedule)
    } else {
        Err(TariffError::Validation(violations))
    }
}

/// Derive (tariff_id, bundling) from a `<tariff_id>_<suffix>.csv` filename.
pub fn parse_tariff_filename(path: &Path) -> Result<(String, Bundling), TariffError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| TariffError::Filename(path.display().to_string()))?;
    if let Some(id) = stem.strip_suffix("_delivery_only") {
        if !id.is_empty() {
            return Ok((id.to_string(), Bundling::DeliveryOnly));
        }
    }
    if let Some(id) = stem.strip_suffix("_bundled") {
        if !id.is_empty() {
            return Ok((id.to_string(), Bundling::Bundled));
        }
    }
    Err(TariffError::Filename(path.display().to_string()))
}

/// Read and parse a tariff file, taking id and bundling from the filename.
pub fn read_tariff_file(path: &Path) -> Result<TariffSchedule, TariffError> {
    let (id, bundling) = parse_tariff_filename(path)?;
    let text = std::fs::read_to_string(path).map_err(|source| TariffError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tariff_file(&text, &id, bundling)
}

/// Serialize a schedule to the canonical file format. `parse_tariff_file`
/// of the output reproduces the schedule exactly; floats use the shortest
/// representation that round-trips.
pub fn serialize_schedule(schedule: &TariffSchedule) -> String {
    let mut out = String::new();
    out.push_str(&TARIFF_HEADER.join(","));
    out.push('\n');
    for item in &schedule.items {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            item.kind.as_str(),
            item.charge_family,
            item.rate,
            item.tier_floor,
            item.month_start,
            item.month_end,
            item.weekday_start,
            item.weekday_end,
            item.hour_start,
            item.hour_end,
            item.assessed.as_str(),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sector {
    Industrial,
    Commercial,
    Other(String),
}

impl Sector {
    pub fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "industrial" => Sector::Industrial,
            "commercial" => Sector::Commercial,
            other => Sector::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Sector::Industrial => "industrial",
            Sector::Commercial => "commercial",
            Sector::Other(s) => s,
        }
    }
}

/// One row of `metadata.csv`, the lookup table from tariff id to utility,
/// location, and sector.
///
/// The applicability columns (`peak_min_kw`, `peak_max_kw`, `start_date`,
/// `end_date`) are optional extras used by [`filter_applicable`]; absent
/// bounds are treated as unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffMetadata {
    pub tariff_id: String,
    pub utility_name: String,
    pub eia_id: i64,
    pub zip: String,
    pub latitude: f64,
    pub longitude: f64,
    pub sector: Sector,
    pub service_type: String,
    /// Grid-region label; assigned by the geo stage, may be "Other".
    pub iso_label: String,
    pub peak_min_kw: Option<f64>,
    pub peak_max_kw: Option<f64>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
}

/// Extra metadata columns recognized beyond [`METADATA_HEADER`].
const METADATA_EXTRAS: [&str; 4] = ["peak_min_kw", "peak_max_kw", "start_date", "end_date"];

/// Parse `metadata.csv`. Coordinates out of range, malformed zips, and
/// duplicate tariff ids are validation errors.
pub fn parse_metadata(text: &str) -> Result<Vec<TariffMetadata>, TariffError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut col_of: HashMap<String, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if METADATA_HEADER.contains(&name) || METADATA_EXTRAS.contains(&name) {
            col_of.insert(name.to_string(), i);
        } else {
            log::warn!("metadata: ignoring unknown column '{name}'");
        }
    }
    let missing: Vec<String> = METADATA_HEADER
        .iter()
        .filter(|h| !col_of.contains_key(**h))
        .map(|h| h.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(TariffError::MissingColumns(missing));
    }

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 2;
        let field = |name: &str| -> &str {
            col_of
                .get(name)
                .and_then(|&i| record.get(i))
                .unwrap_or("")
        };
        let opt_num = |name: &str| -> Result<Option<f64>, TariffError> {
            let raw = field(name);
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>().map(Some).map_err(|e| TariffError::MalformedRow {
                row,
                column: name.to_string(),
                detail: format!("'{raw}' is not a number: {e}"),
            })
        };
        let opt_date = |name: &str| -> Result<Option<NaiveDate>, TariffError> {
            let raw = field(name);
            if raw.is_empty() {
                return Ok(None);
            }
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map(Some)
                .map_err(|e| TariffError::MalformedRow {
                    row,
                    column: name.to_string(),
                    detail: format!("'{raw}' is not a YYYY-MM-DD date: {e}"),
                })
        };
        let latitude = field("latitude")
            .parse::<f64>()
            .map_err(|e| TariffError::MalformedRow {
                row,
                column: "latitude".into(),
                detail: e.to_string(),
            })?;
        let longitude = field("longitude")
            .parse::<f64>()
            .map_err(|e| TariffError::MalformedRow {
                row,
                column: "longitude".into(),
                detail: e.to_string(),
            })?;
        let eia_id = field("eia_id")
            .parse::<i64>()
            .map_err(|e| TariffError::MalformedRow {
                row,
                column: "eia_id".into(),
                detail: e.to_string(),
            })?;
        let zip = field("zip").to_string();
        if !(-90.0..=90.0).contains(&latitude) {
            violations.push(Violation {
                item_index: row_idx,
                field: "latitude",
                rule: "latitude must lie in [-90, 90]".into(),
            });
        }
        if !(-180.0..=180.0).contains(&longitude) {
            violations.push(Violation {
                item_index: row_idx,
                field: "longitude",
                rule: "longitude must lie in [-180, 180]".into(),
            });
        }
        if zip.len() != 5 {
            violations.push(Violation {
                item_index: row_idx,
                field: "zip",
                rule: "zip must be a 5-character string".into(),
            });
        }
        rows.push(TariffMetadata {
            tariff_id: field("tariff_id").to_string(),
            utility_name: field("utility_name").to_string(),
            eia_id,
            zip,
            latitude,
            longitude,
            sector: Sector::parse(field("sector")),
            service_type: field("service_type").to_string(),
            iso_label: field("iso_label").to_string(),
            peak_min_kw: opt_num("peak_min_kw")?,
            peak_max_kw: opt_num("peak_max_kw")?,
            start_date: opt_date("start_date")?,
            end_date: opt_date("end_date")?,
        });
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        if seen.insert(r.tariff_id.as_str(), i).is_some() {
            violations.push(Violation {
                item_index: i,
                field: "tariff_id",
                rule: format!("tariff_id '{}' is not unique", r.tariff_id),
            });
        }
    }
    if violations.is_empty() {
        Ok(rows)
    } else {
        Err(TariffError::Validation(violations))
    }
}

/// Reference demand level used when filtering for large customers.
pub const DEFAULT_REFERENCE_DEMAND_KW: f64 = 1000.0;

/// Applicability filter. Every field is optional; an unset field is no
/// criterion, so the empty filter is the identity and adding a criterion
/// can only shrink the result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterCriteria {
    pub sectors: Option<Vec<Sector>>,
    pub service_types: Option<Vec<String>>,
    /// A tariff qualifies when its effective window contains this date.
    pub effective_date: Option<NaiveDate>,
    /// A tariff qualifies when its peak-capacity window contains this
    /// demand; absent bounds on the row count as unbounded.
    pub reference_demand_kw: Option<f64>,
}

/// Select the metadata rows satisfying all set criteria.
pub fn filter_applicable<'a>(
    rows: &'a [TariffMetadata],
    criteria: &FilterCriteria,
) -> Vec<&'a TariffMetadata> {
    rows.iter()
        .filter(|row| {
            if let Some(sectors) = &criteria.sectors {
                if !sectors.contains(&row.sector) {
                    return false;
                }
            }
            if let Some(types) = &criteria.service_types {
                if !types.iter().any(|t| t == &row.service_type) {
                    return false;
                }
            }
            if let Some(date) = criteria.effective_date {
                if let Some(start) = row.start_date {
                    if start >= date {
                        return false;
                    }
                }
                if let Some(end) = row.end_date {
                    if end <= date {
                        return false;
                    }
                }
            }
            if let Some(demand) = criteria.reference_demand_kw {
                if let Some(min) = row.peak_min_kw {
                    if min > demand {
                        return false;
                    }
                }
                if let Some(max) = row.peak_max_kw {
                    if max < demand {
                        return false;
                    }
                }
            }
            true
        })
        .collect()
}
