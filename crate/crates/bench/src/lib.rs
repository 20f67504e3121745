//! Shared inputs for the benchmarks.

use chrono::NaiveDate;
use volint_core::synth::{gen_iid_volatility, to_minute_series};
use volint_core::{MinuteSeries, NormVolSeries, SeModel, TradingCalendar};

/// A typical fitted interval model.
pub fn table_model() -> SeModel {
    SeModel::normalized(5.79, 0.43).expect("valid parameters")
}

pub fn iid_series(n: usize) -> NormVolSeries {
    gen_iid_volatility(n, 1).expect("n >= 100")
}

pub fn minute_series(n: usize) -> MinuteSeries {
    let v = iid_series(n);
    let start = NaiveDate::from_ymd_opt(2004, 1, 2).expect("valid date");
    to_minute_series(&v, &TradingCalendar::default(), start, 1000.0, 1e-3, 2).expect("valid calendar")
}
