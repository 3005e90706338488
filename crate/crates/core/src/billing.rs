//! Exact bill computation and linear charge-function decomposition for a
//! load profile under a tariff schedule.
//!
//! Billing periods are calendar months. Energy families use block
//! (marginal) pricing on cumulative in-window energy; demand charges price
//! the block of the window peak, per month or per calendar day; customer
//! charges bill once per month inside their month window. Summation order
//! is fixed (hours in time order, then items in file order) so results are
//! bitwise deterministic.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use thiserror::Error;

use crate::calendar::{hour_at, hour_fields, is_hour_aligned};
use crate::tariff::{validate_schedule, ChargeKind, TariffSchedule};

#[derive(Debug, Error)]
pub enum BillingError {
    #[error("load profile is empty")]
    EmptyLoad,
    #[error("load value at hour {index} is {value}, must be finite and >= 0")]
    BadLoadValue { index: usize, value: f64 },
    #[error("load start {0} is not aligned to an hour boundary")]
    UnalignedStart(NaiveDateTime),
    #[error("load must cover whole calendar months: {0}")]
    PartialMonth(String),
    #[error("schedule '{tariff_id}' fails validation: {detail}")]
    InvalidSchedule { tariff_id: String, detail: String },
}

/// Uniform hourly power series in kW.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    start: NaiveDateTime,
    values: Vec<f64>,
}

impl LoadProfile {
    pub fn new(start: NaiveDateTime, values: Vec<f64>) -> Result<Self, BillingError> {
        if values.is_empty() {
            return Err(BillingError::EmptyLoad);
        }
        if !is_hour_aligned(start) {
            return Err(BillingError::UnalignedStart(start));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(BillingError::BadLoadValue { index, value });
            }
        }
        Ok(Self { start, values })
    }

    /// Constant load over a whole calendar year.
    pub fn flat_year(year: i32, kw: f64) -> Self {
        let hours = crate::calendar::hours_in_year(year);
        Self::new(crate::calendar::year_start(year), vec![kw; hours]).unwrap()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        hour_at(self.start, index)
    }
}

/// One aggregated bill line: a charge family's dollars in one billing period.
#[derive(Debug, Clone, PartialEq)]
pub struct BillLine {
    pub charge_family: String,
    pub kind: ChargeKind,
    /// Billing period label, `YYYY-MM`.
    pub period: String,
    pub amount_usd: f64,
}

/// Peak power behind a demand line, one per assessed scope.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodPeak {
    pub charge_family: String,
    pub window: String,
    /// `YYYY-MM` for monthly assessment, `YYYY-MM-DD` for daily.
    pub period: String,
    pub peak_kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BillBreakdown {
    pub total_usd: f64,
    pub per_item: Vec<BillLine>,
    pub per_period_peaks: Vec<PeriodPeak>,
}

impl BillBreakdown {
    /// CSV serialization: `tariff_id,period,charge_family,kind,amount_usd`.
    pub fn to_csv(&self, tariff_id: &str) -> String {
        let mut out = String::from("tariff_id,period,charge_family,kind,amount_usd\n");
        for line in &self.per_item {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                tariff_id, line.period, line.charge_family, line.kind, line.amount_usd
            ));
        }
        out
    }
}

/// Linearization of a bill around a load profile: `bill ≈ Σ c_t·e_t + k`
/// for perturbations that keep tier blocks and peak hours unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeFunction {
    /// Per-hour marginal energy price, $/kWh, aligned with the load.
    pub coefficients: Vec<f64>,
    /// Demand and customer dollars at the linearization load.
    pub constant_usd: f64,
    /// Demand windows where several hours tie for the period peak; the
    /// earliest tied hour is canonical.
    pub peak_ties: Vec<PeakTie>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakTie {
    pub charge_family: String,
    pub period: String,
    /// Load indices of the tied hours, ascending.
    pub hours: Vec<usize>,
}

/// The scope one item contribution was assessed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scope {
    Month { year: i32, month: u32 },
    Day(NaiveDate),
}

impl Scope {
    pub(crate) fn label(&self) -> String {
        match self {
            Scope::Month { year, month } => format!("{year:04}-{month:02}"),
            Scope::Day(d) => d.format("%Y-%m-%d").to_string(),
        }
    }
}

/// Dollar contribution of one schedule item over one assessed scope,
/// together with the load indices of its active hours there. This is the
/// granularity tariff flattening distributes over.
#[derive(Debug, Clone)]
pub(crate) struct ItemContribution {
    pub item_index: usize,
    pub scope: Scope,
    pub amount_usd: f64,
    pub active_hours: Vec<usize>,
    /// For demand items: (peak kW, indices of hours tied for the peak).
    pub peak: Option<(f64, Vec<usize>)>,
}

/// One calendar month slice of the load.
struct MonthSlice {
    year: i32,
    month: u32,
    /// (load index, month, weekday, hour-of-day) per hour, in time order.
    hours: Vec<(usize, u8, u8, u8)>,
}

fn split_months(load: &LoadProfile) -> Result<Vec<MonthSlice>, BillingError> {
    let start = load.start();
    if start.day() != 1 || start.hour() != 0 {
        return Err(BillingError::PartialMonth(format!(
            "starts at {start}, expected the first hour of a month"
        )));
    }
    let mut slices: Vec<MonthSlice> = Vec::new();
    for idx in 0..load.len() {
        let ts = load.timestamp(idx);
        let (m, wd, h) = hour_fields(ts);
        let need_new = slices
            .last()
            .map(|s| s.year != ts.year() || s.month != ts.month())
            .unwrap_or(true);
        if need_new {
            slices.push(MonthSlice {
                year: ts.year(),
                month: ts.month(),
                hours: Vec::new(),
            });
        }
        slices.last_mut().unwrap().hours.push((idx, m, wd, h));
    }
    let last = slices.last().unwrap();
    let last_ts = load.timestamp(load.len() - 1) + Duration::hours(1);
    if last_ts.day() != 1 || last_ts.hour() != 0 {
        return Err(BillingError::PartialMonth(format!(
            "ends inside {:04}-{:02}, expected the last hour of a month",
            last.year, last.month
        )));
    }
    Ok(slices)
}

/// Upper bound of each item's tier block, from the family ladder in file
/// order (validated strictly increasing). The last block is unbounded.
fn block_ceilings(schedule: &TariffSchedule) -> Vec<f64> {
    let mut ceilings = vec![f64::INFINITY; schedule.items.len()];
    for ((_, _), idxs) in schedule.families() {
        for pair in idxs.windows(2) {
            ceilings[pair[0]] = schedule.items[pair[1]].tier_floor;
        }
    }
    ceilings
}

/// Portion of `value` that falls in the block `[floor, ceiling)`.
fn block_clamp(value: f64, floor: f64, ceiling: f64) -> f64 {
    (value.min(ceiling) - floor).max(0.0)
}

/// Core accumulator: per-item, per-scope dollar contributions with their
/// active hours. Everything else (bills, charge functions, flattening) is
/// assembled from this.
pub(crate) fn item_contributions(
    schedule: &TariffSchedule,
    load: &LoadProfile,
) -> Result<Vec<ItemContribution>, BillingError> {
    let violations = validate_schedule(schedule);
    if !violations.is_empty() {
        return Err(BillingError::InvalidSchedule {
            tariff_id: schedule.tariff_id.clone(),
            detail: violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    let months = split_months(load)?;
    let ceilings = block_ceilings(schedule);
    let families = schedule.families();
    let mut out: Vec<ItemContribution> = Vec::new();

    for slice in &months {
        let scope_month = Scope::Month {
            year: slice.year,
            month: slice.month,
        };

        // Energy: block pricing on cumulative in-window energy, walked in
        // hour order with one cumulative counter per family.
        for ((kind, _family), idxs) in &families {
            if *kind != ChargeKind::Energy {
                continue;
            }
            let mut amounts = vec![0.0f64; idxs.len()];
            let mut actives: Vec<Vec<usize>> = vec![Vec::new(); idxs.len()];
            let mut cumulative = 0.0f64;
            for &(load_idx, m, wd, h) in &slice.hours {
                let energy_kwh = load.values()[load_idx]; // 1 h step
                let mut any_active = false;
                for (j, &item_idx) in idxs.iter().enumerate() {
                    let item = &schedule.items[item_idx];
                    if item.window_contains(m, wd, h) {
                        any_active = true;
                        actives[j].push(load_idx);
                        let lo = cumulative.max(item.tier_floor);
                        let hi = (cumulative + energy_kwh).min(ceilings[item_idx]);
                        if hi > lo {
                            amounts[j] += item.rate * (hi - lo);
                        }
                    }
                }
                if any_active {
                    cumulative += energy_kwh;
                }
            }
            for (j, &item_idx) in idxs.iter().enumerate() {
                out.push(ItemContribution {
                    item_index: item_idx,
                    scope: scope_month,
                    amount_usd: amounts[j],
                    active_hours: std::mem::take(&mut actives[j]),
                    peak: None,
                });
            }
        }

        // Demand: block of the window peak, per month or per day. Months
        // outside the item's month window are structurally inactive and
        // skipped without a record.
        for (item_idx, item) in schedule.items.iter().enumerate() {
            if item.kind != ChargeKind::Demand || !item.months_contain(slice.month as u8) {
                continue;
            }
            let scopes: Vec<(Scope, Vec<&(usize, u8, u8, u8)>)> = match item.assessed {
                crate::tariff::Assessment::Monthly => vec![(
                    scope_month,
                    slice.hours.iter().collect(),
                )],
                crate::tariff::Assessment::Daily => {
                    let mut days: Vec<(Scope, Vec<&(usize, u8, u8, u8)>)> = Vec::new();
                    for hour in &slice.hours {
                        let date = load.timestamp(hour.0).date();
                        let need_new = days
                            .last()
                            .map(|(s, _)| *s != Scope::Day(date))
                            .unwrap_or(true);
                        if need_new {
                            days.push((Scope::Day(date), Vec::new()));
                        }
                        days.last_mut().unwrap().1.push(hour);
                    }
                    days
                }
            };
            for (scope, hours) in scopes {
                let mut active: Vec<usize> = Vec::new();
                let mut peak = f64::NEG_INFINITY;
                for &&(load_idx, m, wd, h) in &hours {
                    if item.window_contains(m, wd, h) {
                        active.push(load_idx);
                        let kw = load.values()[load_idx];
                        if kw > peak {
                            peak = kw;
                        }
                    }
                }
                if active.is_empty() {
                    // A weekday-only window legitimately has empty weekend
                    // days under daily assessment; only a whole empty month
                    // is surprising.
                    match scope {
                        Scope::Month { .. } => log::warn!(
                            "tariff '{}': demand item {} ('{}') has no active hours in {}; contributes 0",
                            schedule.tariff_id,
                            item_idx,
                            item.charge_family,
                            scope.label()
                        ),
                        Scope::Day(_) => log::debug!(
                            "tariff '{}': demand item {} inactive on {}",
                            schedule.tariff_id,
                            item_idx,
                            scope.label()
                        ),
                    }
                    out.push(ItemContribution {
                        item_index: item_idx,
                        scope,
                        amount_usd: 0.0,
                        active_hours: active,
                        peak: None,
                    });
                    continue;
                }
                let tied: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&i| load.values()[i] == peak)
                    .collect();
                let amount =
                    item.rate * block_clamp(peak, item.tier_floor, ceilings[item_idx]);
                out.push(ItemContribution {
                    item_index: item_idx,
                    scope,
                    amount_usd: amount,
                    active_hours: active,
                    peak: Some((peak, tied)),
                });
            }
        }

        // Customer: once per month inside the month window; weekday and
        // hour fields carry no semantics for this kind.
        for (item_idx, item) in schedule.items.iter().enumerate() {
            if item.kind != ChargeKind::Customer {
                continue;
            }
            if item.months_contain(slice.month as u8) {
                out.push(ItemContribution {
                    item_index: item_idx,
                    scope: scope_month,
                    amount_usd: item.rate,
                    active_hours: Vec::new(),
                    peak: None,
                });
            }
        }
    }
    Ok(out)
}

/// Compute the exact bill for a load covering whole calendar months.
pub fn compute_bill(
    schedule: &TariffSchedule,
    load: &LoadProfile,
) -> Result<BillBreakdown, BillingError> {
    let contributions = item_contributions(schedule, load)?;

    // Aggregate per (family, kind, month period), preserving first-appearance order.
    let mut per_item: Vec<BillLine> = Vec::new();
    let mut peaks: Vec<PeriodPeak> = Vec::new();
    for c in &contributions {
        let item = &schedule.items[c.item_index];
        let period = match c.scope {
            Scope::Month { .. } => c.scope.label(),
            Scope::Day(d) => format!("{:04}-{:02}", d.year(), d.month()),
        };
        match per_item.iter_mut().find(|l| {
            l.charge_family == item.charge_family && l.kind == item.kind && l.period == period
        }) {
            Some(line) => line.amount_usd += c.amount_usd,
            None => per_item.push(BillLine {
                charge_family: item.charge_family.clone(),
                kind: item.kind,
                period,
                amount_usd: c.amount_usd,
            }),
        }
        if let Some((peak_kw, _)) = c.peak {
            peaks.push(PeriodPeak {
                charge_family: item.charge_family.clone(),
                window: item.window_label(),
                period: c.scope.label(),
                peak_kw,
            });
        }
    }
    let total_usd = per_item.iter().map(|l| l.amount_usd).sum();
    Ok(BillBreakdown {
        total_usd,
        per_item,
        per_period_peaks: peaks,
    })
}

/// Linearize the bill at `load`: per-hour marginal energy prices plus a
/// constant holding the demand and customer dollars.
///
/// Each hour's coefficient is the block rate its energy slice is priced at
/// (the volume-weighted rate when a slice straddles a boundary — the one
/// kink in the model); zero-energy hours get the rate the next unit would
/// pay. Ties for a demand peak are reported, the earliest hour canonical.
pub fn build_charge_function(
    schedule: &TariffSchedule,
    load: &LoadProfile,
) -> Result<ChargeFunction, BillingError> {
    let violations = validate_schedule(schedule);
    if !violations.is_empty() {
        return Err(BillingError::InvalidSchedule {
            tariff_id: schedule.tariff_id.clone(),
            detail: violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    let months = split_months(load)?;
    let ceilings = block_ceilings(schedule);
    let families = schedule.families();
    let mut coefficients = vec![0.0f64; load.len()];

    for slice in &months {
        for ((kind, _family), idxs) in &families {
            if *kind != ChargeKind::Energy {
                continue;
            }
            let mut cumulative = 0.0f64;
            for &(load_idx, m, wd, h) in &slice.hours {
                let energy_kwh = load.values()[load_idx];
                let active: Vec<usize> = idxs
                    .iter()
                    .copied()
                    .filter(|&i| schedule.items[i].window_contains(m, wd, h))
                    .collect();
                if active.is_empty() {
                    continue;
                }
                if energy_kwh > 0.0 {
                    let mut charge = 0.0f64;
                    for &item_idx in &active {
                        let item = &schedule.items[item_idx];
                        let lo = cumulative.max(item.tier_floor);
                        let hi = (cumulative + energy_kwh).min(ceilings[item_idx]);
                        if hi > lo {
                            charge += item.rate * (hi - lo);
                        }
                    }
                    coefficients[load_idx] += charge / energy_kwh;
                } else {
                    // Marginal rate of the block the next unit lands in.
                    for &item_idx in &active {
                        let item = &schedule.items[item_idx];
                        if item.tier_floor <= cumulative && cumulative < ceilings[item_idx] {
                            coefficients[load_idx] += item.rate;
                        }
                    }
                }
                cumulative += energy_kwh;
            }
        }
    }

    // Demand and customer dollars enter the constant.
    let contributions = item_contributions(schedule, load)?;
    let mut constant_usd = 0.0f64;
    let mut peak_ties = Vec::new();
    for c in &contributions {
        let item = &schedule.items[c.item_index];
        match item.kind {
            ChargeKind::Demand | ChargeKind::Customer => constant_usd += c.amount_usd,
            ChargeKind::Energy => {}
        }
        if let Some((_, tied)) = &c.peak {
            if tied.len() > 1 {
                peak_ties.push(PeakTie {
                    charge_family: item.charge_family.clone(),
                    period: c.scope.label(),
                    hours: tied.clone(),
                });
            }
        }
    }
    Ok(ChargeFunction {
        coefficients,
        constant_usd,
        peak_ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariff::{Assessment, Bundling, ChargeItem};

    fn item(kind: ChargeKind, family: &str, rate: f64) -> ChargeItem {
        ChargeItem {
            kind,
            charge_family: family.into(),
            rate,
            tier_floor: 0.0,
            month_start: 1,
            month_end: 12,
            weekday_start: 0,
            weekday_end: 6,
            hour_start: 0,
            hour_end: 24,
            assessed: Assessment::Monthly,
        }
    }

    fn schedule(items: Vec<ChargeItem>) -> TariffSchedule {
        TariffSchedule {
            tariff_id: "T".into(),
            bundling: Bundling::Bundled,
            items,
        }
    }

    fn june_2023_flat(kw: f64) -> LoadProfile {
        let start = NaiveDate::from_ymd_opt(2023, 6, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        LoadProfile::new(start, vec![kw; 720]).unwrap()
    }

    #[test]
    fn flat_energy_720h_month() {
        let s = schedule(vec![item(ChargeKind::Energy, "E1", 0.10)]);
        let bill = compute_bill(&s, &june_2023_flat(1000.0)).unwrap();
        assert!((bill.total_usd - 72_000.0).abs() < 1e-9 * 72_000.0);
        assert_eq!(bill.per_item.len(), 1);
    }

    #[test]
    fn zero_load_bills_zero() {
        let s = schedule(vec![
            item(ChargeKind::Demand, "D1", 10.0),
            item(ChargeKind::Energy, "E1", 0.10),
        ]);
        let bill = compute_bill(&s, &june_2023_flat(0.0)).unwrap();
        assert_eq!(bill.total_usd, 0.0);
    }

    #[test]
    fn tiered_energy_splits_across_blocks() {
        let mut lo = item(ChargeKind::Energy, "E1", 0.12);
        let mut hi = lo.clone();
        hi.rate = 0.08;
        hi.tier_floor = 500_000.0;
        lo.tier_floor = 0.0;
        let s = schedule(vec![lo, hi]);
        let bill = compute_bill(&s, &june_2023_flat(1000.0)).unwrap();
        let expected = 500_000.0 * 0.12 + 220_000.0 * 0.08;
        assert!((bill.total_usd - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn monthly_demand_prices_window_peak() {
        let mut d = item(ChargeKind::Demand, "D1", 10.0);
        d.weekday_start = 0;
        d.weekday_end = 4;
        d.hour_start = 16;
        d.hour_end = 21;
        let s = schedule(vec![d]);
        let bill = compute_bill(&s, &june_2023_flat(1000.0)).unwrap();
        assert!((bill.total_usd - 10_000.0).abs() < 1e-9 * 10_000.0);
        assert_eq!(bill.per_period_peaks.len(), 1);
        assert_eq!(bill.per_period_peaks[0].peak_kw, 1000.0);
    }

    #[test]
    fn daily_demand_sums_over_days() {
        let mut d = item(ChargeKind::Demand, "D1", 1.0);
        d.assessed = Assessment::Daily;
        let s = schedule(vec![d]);
        let bill = compute_bill(&s, &june_2023_flat(1000.0)).unwrap();
        // 30 days x 1 $/kW x 1000 kW
        assert!((bill.total_usd - 30_000.0).abs() < 1e-9 * 30_000.0);
        assert_eq!(bill.per_period_peaks.len(), 30);
    }

    #[test]
    fn customer_charge_honours_month_window_only() {
        let mut c = item(ChargeKind::Customer, "C1", 50.0);
        c.month_start = 6;
        c.month_end = 9;
        // Nonsense TOU fields must be ignored for customer charges.
        c.hour_start = 3;
        c.hour_end = 4;
        c.weekday_start = 2;
        c.weekday_end = 2;
        let s = schedule(vec![c]);
        let year = LoadProfile::flat_year(2023, 0.0);
        let bill = compute_bill(&s, &year).unwrap();
        assert!((bill.total_usd - 200.0).abs() < 1e-12);
    }

    #[test]
    fn partial_month_is_rejected() {
        let start = NaiveDate::from_ymd_opt(2023, 6, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let load = LoadProfile::new(start, vec![1.0; 100]).unwrap();
        let s = schedule(vec![item(ChargeKind::Energy, "E1", 0.10)]);
        assert!(matches!(
            compute_bill(&s, &load),
            Err(BillingError::PartialMonth(_))
        ));
    }

    #[test]
    fn invalid_schedule_is_rejected() {
        let mut bad = item(ChargeKind::Energy, "E1", -0.1);
        bad.tier_floor = 0.0;
        let s = schedule(vec![bad]);
        assert!(matches!(
            compute_bill(&s, &june_2023_flat(1.0)),
            Err(BillingError::InvalidSchedule { .. })
        ));
    }

    #[test]
    fn breakdown_total_matches_line_sum() {
        let s = schedule(vec![
            item(ChargeKind::Energy, "E1", 0.10),
            item(ChargeKind::Demand, "D1", 10.0),
            item(ChargeKind::Customer, "C1", 50.0),
        ]);
        let bill = compute_bill(&s, &june_2023_flat(500.0)).unwrap();
        let sum: f64 = bill.per_item.iter().map(|l| l.amount_usd).sum();
        assert!((bill.total_usd - sum).abs() <= 1e-9 * bill.total_usd.abs());
    }

    #[test]
    fn charge_function_flat_energy() {
        let s = schedule(vec![item(ChargeKind::Energy, "E1", 0.10)]);
        let load = june_2023_flat(1000.0);
        let f = build_charge_function(&s, &load).unwrap();
        assert!(f.coefficients.iter().all(|&c| (c - 0.10).abs() < 1e-15));
        assert_eq!(f.constant_usd, 0.0);
    }

    #[test]
    fn charge_function_customer_goes_to_constant() {
        let s = schedule(vec![
            item(ChargeKind::Energy, "E1", 0.10),
            item(ChargeKind::Customer, "C1", 50.0),
        ]);
        let load = june_2023_flat(1000.0);
        let f = build_charge_function(&s, &load).unwrap();
        assert!(f.coefficients.iter().all(|&c| (c - 0.10).abs() < 1e-15));
        assert!((f.constant_usd - 50.0).abs() < 1e-12);
    }

    #[test]
    fn charge_function_evaluates_to_bill_total() {
        let mut lo = item(ChargeKind::Energy, "E1", 0.12);
        lo.tier_floor = 0.0;
        let mut hi = lo.clone();
        hi.rate = 0.08;
        hi.tier_floor = 500_000.0;
        let mut d = item(ChargeKind::Demand, "D1", 7.5);
        d.hour_start = 12;
        d.hour_end = 20;
        let s = schedule(vec![lo, hi, d, item(ChargeKind::Customer, "C1", 25.0)]);
        let load = june_2023_flat(1000.0);
        let bill = compute_bill(&s, &load).unwrap();
        let f = build_charge_function(&s, &load).unwrap();
        let eval: f64 = f
            .coefficients
            .iter()
            .zip(load.values())
            .map(|(c, e)| c * e)
            .sum::<f64>()
            + f.constant_usd;
        assert!((eval - bill.total_usd).abs() <= 1e-9 * bill.total_usd.abs());
    }

    #[test]
    fn flat_load_peak_tie_is_flagged_earliest_first() {
        let d = item(ChargeKind::Demand, "D1", 10.0);
        let s = schedule(vec![d]);
        let load = june_2023_flat(1000.0);
        let f = build_charge_function(&s, &load).unwrap();
        assert_eq!(f.peak_ties.len(), 1);
        let hours = &f.peak_ties[0].hours;
        assert_eq!(hours[0], 0);
        assert!(hours.windows(2).all(|w| w[0] < w[1]));
    }
}
