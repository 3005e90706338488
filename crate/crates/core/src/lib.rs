//! Rate engine and data-reconciliation toolkit for electricity costs and
//! carbon emissions.
//!
//! The crate converts heterogeneous inputs — retail tariffs, wholesale
//! price series, average and marginal emissions factors, incentive-based
//! demand-response programs — into a common month-hour representation and
//! provides the analytics (correlations, categorization, premiums, regime
//! maps) used to compare cost and emissions incentives.

pub mod analysis;
pub mod billing;
pub mod calendar;
pub mod emissions;
pub mod geo;
pub mod idropp;
pub mod reconcile;
pub mod tariff;

pub use billing::{compute_bill, build_charge_function, BillBreakdown, ChargeFunction, LoadProfile};
pub use reconcile::{flatten_tariff, month_hour_average, HourlySeries, MonthHourMatrix, Unit};
pub use tariff::{
    parse_tariff_file, validate_schedule, Bundling, ChargeItem, ChargeKind, TariffMetadata,
    TariffSchedule,
};
