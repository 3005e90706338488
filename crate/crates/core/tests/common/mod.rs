//! Shared test support: randomized fixture generators and independent
//! oracles. Oracle code must stay structurally independent of the library
//! paths it checks — it re-derives everything from raw fields.
//!
//! Each test target compiles its own copy, so not every helper is used
//! everywhere.
#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use gridalign::tariff::{Assessment, Bundling, ChargeItem, ChargeKind, TariffSchedule};
use gridalign::LoadProfile;

/// Random valid schedule: mixed kinds, up to three tiers per family,
/// overlapping windows, monthly and daily demand assessment.
pub fn random_schedule(rng: &mut ChaCha8Rng, id: &str) -> TariffSchedule {
    let n_families = rng.gen_range(1..=4);
    let mut items = Vec::new();
    for f in 0..n_families {
        let kind = match rng.gen_range(0..10) {
            0..=4 => ChargeKind::Energy,
            5..=8 => ChargeKind::Demand,
            _ => ChargeKind::Customer,
        };
        let family = format!("F{f}");
        let n_tiers = if kind == ChargeKind::Customer {
            1
        } else {
            rng.gen_range(1..=3)
        };
        let month_start = rng.gen_range(1..=12u8);
        let month_end = rng.gen_range(month_start..=12u8);
        let weekday_start = rng.gen_range(0..=6u8);
        let weekday_end = rng.gen_range(weekday_start..=6u8);
        let hour_start = rng.gen_range(0..=23u8);
        let hour_end = rng.gen_range(hour_start + 1..=24u8);
        let assessed = if rng.gen_bool(0.3) {
            Assessment::Daily
        } else {
            Assessment::Monthly
        };
        let mut floor = 0.0f64;
        for _ in 0..n_tiers {
            let rate = match kind {
                ChargeKind::Energy => rng.gen_range(0.0..0.5),
                ChargeKind::Demand => rng.gen_range(0.0..30.0),
                ChargeKind::Customer => rng.gen_range(0.0..500.0),
            };
            // Occasionally jitter a tier's hour window so blocks of one
            // family do not all share an identical window.
            let (hs, he) = if rng.gen_bool(0.2) {
                let hs = rng.gen_range(0..=23u8);
                (hs, rng.gen_range(hs + 1..=24u8))
            } else {
                (hour_start, hour_end)
            };
            items.push(ChargeItem {
                kind,
                charge_family: family.clone(),
                rate,
                tier_floor: floor,
                month_start,
                month_end,
                weekday_start,
                weekday_end,
                hour_start: hs,
                hour_end: he,
                assessed,
            });
            floor += match kind {
                ChargeKind::Energy => rng.gen_range(50_000.0..400_000.0),
                ChargeKind::Demand => rng.gen_range(100.0..900.0),
                ChargeKind::Customer => 1.0,
            };
        }
    }
    TariffSchedule {
        tariff_id: id.to_string(),
        bundling: Bundling::Bundled,
        items,
    }
}

/// Random whole-month load in 2023 with occasional zero hours.
pub fn random_month_load(rng: &mut ChaCha8Rng) -> LoadProfile {
    let month = rng.gen_range(1..=12u32);
    let days = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        2 => 28,
        _ => 30,
    };
    let start = NaiveDate::from_ymd_opt(2023, month, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let values: Vec<f64> = (0..days * 24)
        .map(|_| {
            if rng.gen_bool(0.05) {
                0.0
            } else {
                rng.gen_range(0.0..2000.0)
            }
        })
        .collect();
    LoadProfile::new(start, values).unwrap()
}

fn in_window(item: &ChargeItem, month: u8, weekday: u8, hour: u8) -> bool {
    month >= item.month_start
        && month <= item.month_end
        && weekday >= item.weekday_start
        && weekday <= item.weekday_end
        && hour >= item.hour_start
        && hour < item.hour_end
}

/// Independent bill oracle: enumerate every hour, classify it against
/// every item, and keep per-family cumulative energy and per-scope peaks.
/// One flat total accumulator, no shared engine code.
pub fn oracle_bill_total(schedule: &TariffSchedule, load: &LoadProfile) -> f64 {
    #[derive(Clone, Copy)]
    struct Hour {
        ts: NaiveDateTime,
        kw: f64,
    }
    let hours: Vec<Hour> = (0..load.len())
        .map(|i| Hour {
            ts: load.start() + Duration::hours(i as i64),
            kw: load.values()[i],
        })
        .collect();

    // Family ladders in file order: (kind, family) -> item indices.
    let mut ladders: Vec<((ChargeKind, String), Vec<usize>)> = Vec::new();
    for (i, item) in schedule.items.iter().enumerate() {
        let key = (item.kind, item.charge_family.clone());
        match ladders.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => ladders.push((key, vec![i])),
        }
    }
    let ceiling = |family: &[usize], pos: usize| -> f64 {
        family
            .get(pos + 1)
            .map(|&next| schedule.items[next].tier_floor)
            .unwrap_or(f64::INFINITY)
    };

    let months: Vec<(i32, u32)> = {
        let mut seen = Vec::new();
        for h in &hours {
            let key = (h.ts.year(), h.ts.month());
            if seen.last() != Some(&key) {
                seen.push(key);
            }
        }
        seen
    };

    let mut total = 0.0f64;
    for &(year, month) in &months {
        let month_hours: Vec<&Hour> = hours
            .iter()
            .filter(|h| h.ts.year() == year && h.ts.month() == month)
            .collect();

        for ((kind, _), family) in &ladders {
            match kind {
                ChargeKind::Energy => {
                    let mut cumulative = 0.0f64;
                    for h in &month_hours {
                        let m = h.ts.month() as u8;
                        let wd = h.ts.weekday().num_days_from_monday() as u8;
                        let hr = h.ts.hour() as u8;
                        let mut any = false;
                        for (pos, &idx) in family.iter().enumerate() {
                            let item = &schedule.items[idx];
                            if in_window(item, m, wd, hr) {
                                any = true;
                                let lo = cumulative.max(item.tier_floor);
                                let hi = (cumulative + h.kw).min(ceiling(family, pos));
                                if hi > lo {
                                    total += item.rate * (hi - lo);
                                }
                            }
                        }
                        if any {
                            cumulative += h.kw;
                        }
                    }
                }
                ChargeKind::Demand => {
                    for (pos, &idx) in family.iter().enumerate() {
                        let item = &schedule.items[idx];
                        let charge_peak = |peak: f64| -> f64 {
                            item.rate
                                * ((peak.min(ceiling(family, pos)) - item.tier_floor).max(0.0))
                        };
                        match item.assessed {
                            Assessment::Monthly => {
                                let peak = month_hours
                                    .iter()
                                    .filter(|h| {
                                        in_window(
                                            item,
                                            h.ts.month() as u8,
                                            h.ts.weekday().num_days_from_monday() as u8,
                                            h.ts.hour() as u8,
                                        )
                                    })
                                    .map(|h| h.kw)
                                    .fold(f64::NEG_INFINITY, f64::max);
                                if peak.is_finite() {
                                    total += charge_peak(peak);
                                }
                            }
                            Assessment::Daily => {
                                let mut dates: Vec<NaiveDate> = month_hours
                                    .iter()
                                    .map(|h| h.ts.date())
                                    .collect();
                                dates.dedup();
                                for date in dates {
                                    let peak = month_hours
                                        .iter()
                                        .filter(|h| h.ts.date() == date)
                                        .filter(|h| {
                                            in_window(
                                                item,
                                                h.ts.month() as u8,
                                                h.ts.weekday().num_days_from_monday() as u8,
                                                h.ts.hour() as u8,
                                            )
                                        })
                                        .map(|h| h.kw)
                                        .fold(f64::NEG_INFINITY, f64::max);
                                    if peak.is_finite() {
                                        total += charge_peak(peak);
                                    }
                                }
                            }
                        }
                    }
                }
                ChargeKind::Customer => {
                    for &idx in family {
                        let item = &schedule.items[idx];
                        if (item.month_start..=item.month_end).contains(&(month as u8)) {
                            total += item.rate;
                        }
                    }
                }
            }
        }
    }
    total
}

/// Winding-number point-in-polygon oracle over a set of rings.
pub fn winding_contains(rings: &[Vec<(f64, f64)>], lon: f64, lat: f64) -> bool {
    fn is_left(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
        (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1)
    }
    rings.iter().any(|ring| {
        let mut winding = 0i32;
        for edge in ring.windows(2) {
            let (a, b) = (edge[0], edge[1]);
            if a.1 <= lat {
                if b.1 > lat && is_left(a, b, (lon, lat)) > 0.0 {
                    winding += 1;
                }
            } else if b.1 <= lat && is_left(a, b, (lon, lat)) < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    })
}

/// Relative difference guarded for zero expectations.
pub fn rel_err(actual: f64, expected: f64) -> f64 {
    let scale = expected.abs().max(1.0);
    (actual - expected).abs() / scale
}
