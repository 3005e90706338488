//! Shared input builders for the benchmark targets.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridalign::tariff::{Assessment, Bundling, ChargeItem, ChargeKind, TariffSchedule};
use gridalign::{HourlySeries, LoadProfile, Unit};

/// A 12-item schedule mixing tiered energy, monthly and daily demand, and
/// a customer charge.
pub fn benchmark_schedule() -> TariffSchedule {
    let mut items = Vec::new();
    let window = |ms: u8, me: u8, hs: u8, he: u8| ChargeItem {
        kind: ChargeKind::Energy,
        charge_family: String::new(),
        rate: 0.0,
        tier_floor: 0.0,
        month_start: ms,
        month_end: me,
        weekday_start: 0,
        weekday_end: 6,
        hour_start: hs,
        hour_end: he,
        assessed: Assessment::Monthly,
    };
    for (i, floor) in [0.0, 200_000.0, 400_000.0].iter().enumerate() {
        let mut item = window(1, 12, 0, 24);
        item.charge_family = "E_BASE".into();
        item.rate = 0.12 - 0.02 * i as f64;
        item.tier_floor = *floor;
        items.push(item);
    }
    for (family, ms, me, hs, he, rate) in [
        ("E_SUMMER", 6, 9, 12, 20, 0.07),
        ("E_WINTER", 1, 3, 6, 10, 0.03),
        ("E_EVE", 1, 12, 17, 22, 0.04),
    ] {
        let mut item = window(ms, me, hs, he);
        item.charge_family = family.into();
        item.rate = rate;
        items.push(item);
    }
    for (family, assessed, hs, he, rate, floor) in [
        ("D_PEAK", Assessment::Monthly, 16, 21, 14.0, 0.0),
        ("D_PEAK", Assessment::Monthly, 16, 21, 9.0, 500.0),
        ("D_ALL", Assessment::Monthly, 0, 24, 4.0, 0.0),
        ("D_DAILY", Assessment::Daily, 14, 20, 1.2, 0.0),
        ("D_DAILY2", Assessment::Daily, 0, 24, 0.4, 0.0),
    ] {
        let mut item = window(1, 12, hs, he);
        item.kind = ChargeKind::Demand;
        item.charge_family = family.into();
        item.assessed = assessed;
        item.rate = rate;
        item.tier_floor = floor;
        items.push(item);
    }
    let mut customer = window(1, 12, 0, 24);
    customer.kind = ChargeKind::Customer;
    customer.charge_family = "FIXED".into();
    customer.rate = 120.0;
    items.push(customer);

    TariffSchedule {
        tariff_id: "BENCH".into(),
        bundling: Bundling::Bundled,
        items,
    }
}

/// One year of noisy diurnal load at hourly resolution.
pub fn benchmark_load(year: i32) -> LoadProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let hours = if year % 4 == 0 { 8784 } else { 8760 };
    let values: Vec<f64> = (0..hours)
        .map(|i| {
            let diurnal = (2.0 * std::f64::consts::PI * (i % 24) as f64 / 24.0).sin();
            800.0 + 300.0 * diurnal + rng.gen_range(0.0..200.0)
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(year, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    LoadProfile::new(start, values).unwrap()
}

/// A year-long hourly series with diurnal and seasonal structure.
pub fn benchmark_series(year: i32) -> HourlySeries {
    let load = benchmark_load(year);
    HourlySeries {
        label: "bench".into(),
        unit: Unit::UsdPerMwh,
        start: load.start(),
        values: load.values().iter().map(|v| Some(*v)).collect(),
    }
}
