//! Analytical layer over reconciled data: Pearson correlations, tariff
//! categorization, peak premiums, sign-flip fractions, seasonal summary
//! statistics, and the premium/correlation regime map.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::calendar::weekday_count_in_month;
use crate::reconcile::MonthHourMatrix;
use crate::tariff::{ChargeKind, TariffSchedule};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("vector lengths differ ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("month must lie in 1..=12, got {0}")]
    BadMonth(u8),
    #[error("month {0} has no non-missing cells")]
    EmptyMonth(u8),
    #[error("node sets are disjoint")]
    DisjointNodes,
}

/// Sample Pearson correlation coefficient; `None` when either vector has
/// zero variance (or fewer than two samples), which is what drops flat
/// tariffs from correlation distributions.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch {
            a: x.len(),
            b: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Ok(None);
    }
    // Constancy is detected by exact value equality: the rounded mean of
    // identical values can sit one ulp off, which would smuggle a tiny
    // nonzero variance past an `sxx == 0` test.
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Ok(None);
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0f64;
    let mut sxx = 0.0f64;
    let mut syy = 0.0f64;
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

/// One correlation sample between two labelled signals in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRecord {
    pub label_a: String,
    pub label_b: String,
    pub region: String,
    pub month: u8,
    /// Undefined when either side has zero variance or too few common hours.
    pub r: Option<f64>,
    pub n: usize,
}

/// Correlate matrix pairs month by month over their common hours.
pub fn correlation_table(
    pairs: &[(String, &MonthHourMatrix, &MonthHourMatrix)],
) -> Vec<CorrelationRecord> {
    let mut out = Vec::new();
    for (region, a, b) in pairs {
        for month in 1..=12u8 {
            let record = match crate::reconcile::align(a, b, month) {
                Ok((va, vb)) => {
                    let n = va.len();
                    let r = pearson(&va, &vb).expect("aligned vectors have equal length");
                    CorrelationRecord {
                        label_a: a.label.clone(),
                        label_b: b.label.clone(),
                        region: region.clone(),
                        month,
                        r,
                        n,
                    }
                }
                Err(_) => CorrelationRecord {
                    label_a: a.label.clone(),
                    label_b: b.label.clone(),
                    region: region.clone(),
                    month,
                    r: None,
                    n: 0,
                },
            };
            out.push(record);
        }
    }
    out
}

/// The four-way tariff classification by monthly and intra-day variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TariffCategory {
    Flat,
    SeasonalTou,
    NonseasonalTou,
    SeasonalNonTou,
}

impl TariffCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TariffCategory::Flat => "Flat",
            TariffCategory::SeasonalTou => "SeasonalTOU",
            TariffCategory::NonseasonalTou => "NonseasonalTOU",
            TariffCategory::SeasonalNonTou => "SeasonalNonTOU",
        }
    }

    pub fn all() -> [TariffCategory; 4] {
        [
            TariffCategory::Flat,
            TariffCategory::SeasonalTou,
            TariffCategory::NonseasonalTou,
            TariffCategory::SeasonalNonTou,
        ]
    }
}

impl std::fmt::Display for TariffCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sum of active rates per (month, weekday, hour) cell. This is the
/// undistributed price-signal shape of a tariff: a function of the window
/// structure only, so calendar artifacts like month length cannot leak
/// into categorization.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSignature {
    cells: Vec<f64>, // 12 x 7 x 24
}

impl RateSignature {
    /// Build from the items of the given kinds (customer charges carry no
    /// time-varying incentive and never participate).
    pub fn of(schedule: &TariffSchedule, kinds: &[ChargeKind]) -> Self {
        let mut cells = vec![0.0f64; 12 * 7 * 24];
        for item in &schedule.items {
            if item.kind == ChargeKind::Customer || !kinds.contains(&item.kind) {
                continue;
            }
            for month in item.month_start..=item.month_end {
                for weekday in item.weekday_start..=item.weekday_end {
                    for hour in item.hour_start..item.hour_end {
                        cells[Self::idx(month, weekday, hour)] += item.rate;
                    }
                }
            }
        }
        Self { cells }
    }

    fn idx(month: u8, weekday: u8, hour: u8) -> usize {
        ((month as usize - 1) * 7 + weekday as usize) * 24 + hour as usize
    }

    pub fn get(&self, month: u8, weekday: u8, hour: u8) -> f64 {
        self.cells[Self::idx(month, weekday, hour)]
    }

    fn month_slice(&self, month: u8) -> &[f64] {
        let lo = Self::idx(month, 0, 0);
        &self.cells[lo..lo + 7 * 24]
    }

    /// Any two months with different weekday-hour profiles.
    pub fn varies_monthly(&self) -> bool {
        let first = self.month_slice(1);
        (2..=12u8).any(|m| self.month_slice(m) != first)
    }

    /// Any month whose profile varies across hours or weekdays.
    pub fn varies_within_day(&self) -> bool {
        (1..=12u8).any(|m| {
            let slice = self.month_slice(m);
            slice.iter().any(|&v| v != slice[0])
        })
    }

    pub fn category(&self) -> TariffCategory {
        match (self.varies_monthly(), self.varies_within_day()) {
            (false, false) => TariffCategory::Flat,
            (true, true) => TariffCategory::SeasonalTou,
            (false, true) => TariffCategory::NonseasonalTou,
            (true, false) => TariffCategory::SeasonalNonTou,
        }
    }
}

/// Category per charge kind plus the combined-signal category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryAssignment {
    pub energy: TariffCategory,
    pub demand: TariffCategory,
    pub overall: TariffCategory,
}

/// Classify a tariff from its per-kind rate signatures; the overall label
/// comes from the combined energy-plus-demand signal.
pub fn categorize(schedule: &TariffSchedule) -> CategoryAssignment {
    CategoryAssignment {
        energy: RateSignature::of(schedule, &[ChargeKind::Energy]).category(),
        demand: RateSignature::of(schedule, &[ChargeKind::Demand]).category(),
        overall: RateSignature::of(schedule, &[ChargeKind::Energy, ChargeKind::Demand])
            .category(),
    }
}

/// Max/min over a month's non-missing cells, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq)]
pub enum PeakPremium {
    Ratio(f64),
    /// The month's floor is zero or negative, so a max/min ratio loses
    /// meaning (wholesale prices can clear negative).
    Undefined { reason: String },
}

pub fn peak_premium(matrix: &MonthHourMatrix, month: u8) -> Result<PeakPremium, AnalysisError> {
    if !(1..=12).contains(&month) {
        return Err(AnalysisError::BadMonth(month));
    }
    let values: Vec<f64> = (0..24u8).filter_map(|h| matrix.get(month, h)).collect();
    if values.is_empty() {
        return Err(AnalysisError::EmptyMonth(month));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Ok(PeakPremium::Undefined {
            reason: format!("negative-or-zero floor ({min})"),
        });
    }
    Ok(PeakPremium::Ratio(max / min))
}

/// Sign-flip accounting between two per-node correlation maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipStats {
    /// Flipped nodes over all common nodes.
    pub fraction: f64,
    pub flips: usize,
    /// Nodes where at least one side is exactly zero; zero is its own sign
    /// and never a flip partner, so ties are reported separately.
    pub ties: usize,
    pub n: usize,
}

/// Fraction of common nodes whose correlation changed sign between two
/// months.
pub fn flip_fraction(
    month_a: &BTreeMap<String, f64>,
    month_b: &BTreeMap<String, f64>,
) -> Result<FlipStats, AnalysisError> {
    let mut n = 0usize;
    let mut flips = 0usize;
    let mut ties = 0usize;
    for (node, &ra) in month_a {
        let Some(&rb) = month_b.get(node) else {
            continue;
        };
        n += 1;
        if ra == 0.0 || rb == 0.0 {
            ties += 1;
        } else if (ra > 0.0) != (rb > 0.0) {
            flips += 1;
        }
    }
    if n == 0 {
        return Err(AnalysisError::DisjointNodes);
    }
    Ok(FlipStats {
        fraction: flips as f64 / n as f64,
        flips,
        ties,
        n,
    })
}

/// Season partition; the year splits into summer and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonBounds {
    pub summer_start: u8,
    pub summer_end: u8,
}

impl Default for SeasonBounds {
    fn default() -> Self {
        Self {
            summer_start: 6,
            summer_end: 9,
        }
    }
}

impl SeasonBounds {
    pub fn is_summer(&self, month: u8) -> bool {
        self.summer_start <= month && month <= self.summer_end
    }
}

/// Per-season cross-tariff means of time-averaged charges and spreads.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonStats {
    pub season: &'static str,
    pub n_tariffs: usize,
    /// Cross-tariff mean of each tariff's time-averaged energy rate, $/kWh.
    pub mean_energy_usd_per_kwh: f64,
    /// Cross-tariff mean of each tariff's time-averaged demand rate, $/kW.
    pub mean_demand_usd_per_kw: f64,
    pub energy_spread_mean: Option<f64>,
    pub energy_spread_p95: Option<f64>,
    pub demand_spread_mean: Option<f64>,
    pub demand_spread_p95: Option<f64>,
    /// Tariffs whose spread is undefined (zero floor), excluded above.
    pub undefined_energy_spreads: usize,
    pub undefined_demand_spreads: usize,
}

fn season_cells(seasons: &SeasonBounds, summer: bool) -> Vec<u8> {
    (1..=12u8)
        .filter(|&m| seasons.is_summer(m) == summer)
        .collect()
}

/// Time-averaged rate over a season: cell values weighted by how often
/// each (month, weekday) combination occurs in the calendar year.
fn seasonal_time_average(
    signature: &RateSignature,
    months: &[u8],
    year: i32,
) -> f64 {
    let mut weighted = 0.0f64;
    let mut hours = 0.0f64;
    for &month in months {
        for weekday in 0..7u8 {
            let days = weekday_count_in_month(year, month as u32, weekday) as f64;
            for hour in 0..24u8 {
                weighted += signature.get(month, weekday, hour) * days;
                hours += days;
            }
        }
    }
    if hours > 0.0 {
        weighted / hours
    } else {
        0.0
    }
}

/// Max/min of a signature over a season's cells; `None` on a zero floor.
fn seasonal_spread(signature: &RateSignature, months: &[u8]) -> Option<f64> {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &month in months {
        for weekday in 0..7u8 {
            for hour in 0..24u8 {
                let v = signature.get(month, weekday, hour);
                max = max.max(v);
                min = min.min(v);
            }
        }
    }
    if min <= 0.0 {
        None
    } else {
        Some(max / min)
    }
}

fn percentile_95(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((sorted.len() as f64) * 0.95).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Seasonal means and spreads of energy and demand charges across tariffs.
pub fn summary_stats(
    schedules: &[TariffSchedule],
    seasons: &SeasonBounds,
    year: i32,
) -> Vec<SeasonStats> {
    let mut out = Vec::new();
    for (season, summer) in [("summer", true), ("winter", false)] {
        let months = season_cells(seasons, summer);
        let mut energy_means = Vec::new();
        let mut demand_means = Vec::new();
        let mut energy_spreads = Vec::new();
        let mut demand_spreads = Vec::new();
        let mut undefined_energy = 0usize;
        let mut undefined_demand = 0usize;
        for schedule in schedules {
            let energy = RateSignature::of(schedule, &[ChargeKind::Energy]);
            let demand = RateSignature::of(schedule, &[ChargeKind::Demand]);
            energy_means.push(seasonal_time_average(&energy, &months, year));
            demand_means.push(seasonal_time_average(&demand, &months, year));
            match seasonal_spread(&energy, &months) {
                Some(s) => energy_spreads.push(s),
                None => undefined_energy += 1,
            }
            match seasonal_spread(&demand, &months) {
                Some(s) => demand_spreads.push(s),
                None => undefined_demand += 1,
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        energy_spreads.sort_by(|a, b| a.partial_cmp(b).unwrap());
        demand_spreads.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(SeasonStats {
            season,
            n_tariffs: schedules.len(),
            mean_energy_usd_per_kwh: mean(&energy_means),
            mean_demand_usd_per_kw: mean(&demand_means),
            energy_spread_mean: (!energy_spreads.is_empty()).then(|| mean(&energy_spreads)),
            energy_spread_p95: percentile_95(&energy_spreads),
            demand_spread_mean: (!demand_spreads.is_empty()).then(|| mean(&demand_spreads)),
            demand_spread_p95: percentile_95(&demand_spreads),
            undefined_energy_spreads: undefined_energy,
            undefined_demand_spreads: undefined_demand,
        });
    }
    out
}

/// One tariff-month premium observation feeding the regime map.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiumRecord {
    pub tariff_id: String,
    pub region: String,
    pub month: u8,
    pub premium: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeRow {
    pub tariff_id: String,
    pub region: String,
    pub month: u8,
    pub peak_premium: f64,
    pub r_aef_tariff: f64,
}

/// Per-region payment-rate bounding box over its programs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeBox {
    pub region: String,
    pub ibdr_min_rate: f64,
    pub ibdr_max_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMap {
    pub rows: Vec<RegimeRow>,
    pub boxes: Vec<RegimeBox>,
    /// Premium observations dropped for lack of a defined correlation
    /// partner.
    pub dropped: usize,
}

/// Join tariff premiums with their cost-emissions correlations and attach
/// per-region demand-response payment ranges.
pub fn regime_map(
    premiums: &[PremiumRecord],
    correlations: &[CorrelationRecord],
    ibdr_rates: &[(String, f64)],
) -> RegimeMap {
    let mut r_of: BTreeMap<(String, u8), f64> = BTreeMap::new();
    for record in correlations {
        if let Some(r) = record.r {
            r_of.insert((record.label_a.clone(), record.month), r);
        }
    }
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for p in premiums {
        match r_of.get(&(p.tariff_id.clone(), p.month)) {
            Some(&r) => rows.push(RegimeRow {
                tariff_id: p.tariff_id.clone(),
                region: p.region.clone(),
                month: p.month,
                peak_premium: p.premium,
                r_aef_tariff: r,
            }),
            None => dropped += 1,
        }
    }
    let mut bounds: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (region, rate) in ibdr_rates {
        let entry = bounds
            .entry(region.clone())
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        entry.0 = entry.0.min(*rate);
        entry.1 = entry.1.max(*rate);
    }
    let boxes = bounds
        .into_iter()
        .map(|(region, (lo, hi))| RegimeBox {
            region,
            ibdr_min_rate: lo,
            ibdr_max_rate: hi,
        })
        .collect();
    RegimeMap {
        rows,
        boxes,
        dropped,
    }
}
