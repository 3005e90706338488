//! Calendar helpers shared by the billing and reconciliation paths.
//!
//! All timekeeping is naive local standard time at a fixed hourly
//! resolution; DST transitions are not modelled.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

/// Number of days in a calendar month.
pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    };
    (next - first).num_days() as u32
}

/// Number of hours in a calendar year (8760, or 8784 in leap years).
pub fn hours_in_year(year: i32) -> usize {
    (1..=12).map(|m| days_in_month(year, m) as usize * 24).sum()
}

/// Weekday index with 0 = Monday .. 6 = Sunday.
pub fn weekday_index(date: NaiveDate) -> u8 {
    date.weekday().num_days_from_monday() as u8
}

/// (month 1-12, weekday 0-6, hour 0-23) of a timestamp.
pub fn hour_fields(ts: NaiveDateTime) -> (u8, u8, u8) {
    (
        ts.month() as u8,
        weekday_index(ts.date()),
        ts.hour() as u8,
    )
}

/// First hour of a calendar year.
pub fn year_start(year: i32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(year, 1, 1)
        .expect("valid year")
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// True if the timestamp sits exactly on an hour boundary.
pub fn is_hour_aligned(ts: NaiveDateTime) -> bool {
    ts.minute() == 0 && ts.second() == 0 && ts.nanosecond() == 0
}

/// Timestamp `index` hours after `start`.
pub fn hour_at(start: NaiveDateTime, index: usize) -> NaiveDateTime {
    start + Duration::hours(index as i64)
}

/// Count of a given weekday (0 = Monday) in a calendar month.
pub fn weekday_count_in_month(year: i32, month: u32, weekday: u8) -> u32 {
    (1..=days_in_month(year, month))
        .filter(|&d| {
            weekday_index(NaiveDate::from_ymd_opt(year, month, d).unwrap()) == weekday
        })
        .count() as u32
}
