//! Synthetic volatility with known interval statistics.

use std::path::PathBuf;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{MinuteSeries, TradingCalendar};
use crate::seed;
use crate::semodel::SeModel;
use crate::volatility::{mean_sd, NormVolSeries};

pub const MIN_SYNTH_LEN: usize = 100;
/// Slots per synthetic day when no calendar is involved.
pub const SYNTH_SLOTS_PER_DAY: u32 = 240;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// `|N(0,1)|`, memoryless: exceedances are Bernoulli, intervals geometric.
    IidGaussianAbs,
    /// Background `|N|` noise plus spikes separated by stretched-exponential
    /// gaps, giving interval statistics that change with the threshold.
    SeIntervals { gamma: f64, mean_gap: f64 },
    /// Permutation of a `day,slot,v` file.
    ShuffledFromFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<NormVolSeries> {
        match &self.kind {
            SynthKind::IidGaussianAbs => gen_iid_volatility(self.n, self.seed),
            SynthKind::SeIntervals { gamma, mean_gap } => {
                gen_se_interval_volatility(self.n, self.seed, *gamma, *mean_gap)
            }
            SynthKind::ShuffledFromFile { path } => {
                let file = std::fs::File::open(path)?;
                let v = crate::report::read_volatility_csv(file)?;
                Ok(shuffle_series(&v, self.seed))
            }
        }
    }
}

fn labels(n: usize) -> (Vec<u32>, Vec<u32>) {
    (0..n as u32)
        .map(|i| (i / SYNTH_SLOTS_PER_DAY, i % SYNTH_SLOTS_PER_DAY))
        .unzip()
}

fn normalized(values: Vec<f64>) -> Result<NormVolSeries> {
    let (_, sd) = mean_sd(&values);
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (day, slot) = labels(values.len());
    let mut v = NormVolSeries::from_parts(values.into_iter().map(|x| x / sd).collect(), day, slot)?;
    v.sd = sd;
    Ok(v)
}

/// `n` i.i.d. `|N(0,1)|` values scaled to unit population standard deviation.
pub fn gen_iid_volatility(n: usize, seed: u64) -> Result<NormVolSeries> {
    if n < MIN_SYNTH_LEN {
        return Err(Error::Domain(format!(
            "synthetic length must be >= {MIN_SYNTH_LEN}, got {n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let values = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    normalized(values)
}

/// Standard deviation of `|N(0,1)|`, `sqrt(1 - 2/pi)`.
pub fn half_normal_sd() -> f64 {
    (1.0 - 2.0 / std::f64::consts::PI).sqrt()
}

/// Spikes of random height at stretched-exponential gaps over `|N|` noise.
pub fn gen_se_interval_volatility(n: usize, seed: u64, gamma: f64, mean_gap: f64) -> Result<NormVolSeries> {
    if n < MIN_SYNTH_LEN {
        return Err(Error::Domain(format!(
            "synthetic length must be >= {MIN_SYNTH_LEN}, got {n}"
        )));
    }
    if mean_gap.is_nan() || mean_gap < 1.0 {
        return Err(Error::Domain(format!("mean gap must be >= 1, got {mean_gap}")));
    }
    let gaps = SeModel::unit_mean(gamma)?;
    let mut rng = seed::rng(seed);
    let mut values: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    let mut pos = 0usize;
    loop {
        let gap = (gaps.sample(1, &mut rng)[0] * mean_gap).ceil().max(1.0) as usize;
        pos += gap;
        if pos >= n {
            break;
        }
        let height: f64 = rng.sample(Exp1);
        values[pos] = 4.0 + 4.0 * height;
    }
    normalized(values)
}

/// Uniform random permutation of the values; labels stay in place.
pub fn shuffle_series(v: &NormVolSeries, seed: u64) -> NormVolSeries {
    let mut values = v.values.clone();
    values.shuffle(&mut seed::rng(seed));
    NormVolSeries {
        values,
        day: v.day.clone(),
        slot: v.slot.clone(),
        sd: v.sd,
    }
}

/// Lay a volatility series onto the calendar as minute prices.
///
/// Each session opens at the previous close and then moves by
/// `scale * v` per minute with a random sign, so the volatility recovered
/// with overnight returns dropped is `scale * v` in the original order.
pub fn to_minute_series(
    v: &NormVolSeries,
    cal: &TradingCalendar,
    start: NaiveDate,
    base_price: f64,
    scale: f64,
    seed: u64,
) -> Result<MinuteSeries> {
    if !(base_price > 0.0 && scale > 0.0) {
        return Err(Error::Domain("base price and scale must be positive".into()));
    }
    let spd = cal.minutes_per_day();
    let starts = cal.session_starts();
    let per_day = spd - starts.len();
    if per_day == 0 {
        return Err(Error::Domain("calendar sessions are one minute long".into()));
    }
    let n_days = v.len().div_ceil(per_day).max(1);
    let mut rng = seed::rng(seed);
    let mut days = Vec::with_capacity(n_days);
    let mut prices = Vec::with_capacity(n_days * spd);
    let mut day = start;
    let mut level = base_price.ln();
    let mut values = v.values.iter();
    while days.len() < n_days {
        if matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            day = day.succ_opt().expect("date in range");
            continue;
        }
        days.push(day);
        for s in 0..spd {
            if starts.contains(&s) {
                prices.push(Some(level.exp()));
                continue;
            }
            match values.next() {
                Some(&x) => {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    level += sign * scale * x;
                    prices.push(Some(level.exp()));
                }
                None => prices.push(None),
            }
        }
        day = day.succ_opt().expect("date in range");
    }
    MinuteSeries::new(cal.clone(), days, prices)
}
