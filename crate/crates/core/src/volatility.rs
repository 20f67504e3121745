//! Minute volatility, intraday pattern removal and unit-variance normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MinuteSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Deseasonalized,
}

/// Volatility values with their (day, slot) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    pub values: Vec<f64>,
    pub day: Vec<u32>,
    pub slot: Vec<u32>,
    pub slots_per_day: usize,
    pub stage: Stage,
}

impl VolSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `R(t) = |ln Y(t) - ln Y(t-1)|` between consecutive present prices.
///
/// Missing slots are bridged. With `drop_overnight` a return is only emitted
/// when both prices lie in the same session of the same day, so the first
/// return of every day and every post-break session is omitted.
pub fn compute_volatility(ms: &MinuteSeries, drop_overnight: bool) -> Result<VolSeries> {
    let spd = ms.slots_per_day();
    let starts = ms.calendar().session_starts();
    let session_of = |slot: usize| starts.partition_point(|&s| s <= slot) - 1;

    let mut out = VolSeries {
        values: Vec::new(),
        day: Vec::new(),
        slot: Vec::new(),
        slots_per_day: spd,
        stage: Stage::Raw,
    };
    let mut prev: Option<(f64, usize, usize)> = None;
    let mut present = 0usize;
    for d in 0..ms.days().len() {
        for s in 0..spd {
            let Some(price) = ms.price(d, s) else { continue };
            present += 1;
            let ln = price.ln();
            let session = session_of(s);
            if let Some((prev_ln, pd, ps)) = prev {
                if !drop_overnight || (pd == d && ps == session) {
                    out.values.push((ln - prev_ln).abs());
                    out.day.push(d as u32);
                    out.slot.push(s as u32);
                }
            }
            prev = Some((ln, d, session));
        }
    }
    if present < 2 || out.is_empty() {
        return Err(Error::EmptySeries("fewer than two usable prices"));
    }
    Ok(out)
}

/// Average volatility per minute-of-day slot, `A(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayPattern {
    /// `A(s)`; zero where the slot never occurs (see `counts`).
    pub values: Vec<f64>,
    /// Number of days contributing to each slot.
    pub counts: Vec<usize>,
    /// Number of distinct days in the source series.
    pub n_days: usize,
}

impl IntradayPattern {
    pub fn get(&self, slot: usize) -> Option<f64> {
        (self.counts.get(slot).copied().unwrap_or(0) > 0).then(|| self.values[slot])
    }

    pub fn is_valid(&self, slot: usize) -> bool {
        self.get(slot).is_some()
    }
}

pub fn intraday_pattern(vs: &VolSeries) -> Result<IntradayPattern> {
    if vs.stage != Stage::Raw {
        return Err(Error::Domain(
            "intraday pattern needs a raw volatility series".into(),
        ));
    }
    if vs.is_empty() {
        return Err(Error::EmptySeries("volatility series"));
    }
    let mut sums = vec![0.0; vs.slots_per_day];
    let mut counts = vec![0usize; vs.slots_per_day];
    for (&r, &s) in vs.values.iter().zip(&vs.slot) {
        sums[s as usize] += r;
        counts[s as usize] += 1;
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&sum, &n)| if n > 0 { sum / n as f64 } else { 0.0 })
        .collect();
    let mut n_days = 0;
    let mut last = None;
    for &d in &vs.day {
        if last != Some(d) {
            n_days += 1;
            last = Some(d);
        }
    }
    Ok(IntradayPattern {
        values,
        counts,
        n_days,
    })
}

/// `R'(t) = R(t) / A(s(t))`, with `0/0` taken as 0.
pub fn deseasonalize(vs: &VolSeries, pat: &IntradayPattern) -> Result<VolSeries> {
    if pat.values.len() != vs.slots_per_day {
        return Err(Error::Domain(format!(
            "pattern has {} slots, series has {}",
            pat.values.len(),
            vs.slots_per_day
        )));
    }
    let values = vs
        .values
        .iter()
        .zip(&vs.slot)
        .map(|(&r, &s)| {
            let s = s as usize;
            let a = pat
                .get(s)
                .ok_or_else(|| Error::Domain(format!("pattern slot {s} has no data")))?;
            if a > 0.0 {
                Ok(r / a)
            } else if r == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::DegeneratePattern { slot: s })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VolSeries {
        values,
        day: vs.day.clone(),
        slot: vs.slot.clone(),
        slots_per_day: vs.slots_per_day,
        stage: Stage::Deseasonalized,
    })
}

/// Deseasonalized volatility scaled to unit (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormVolSeries {
    pub values: Vec<f64>,
    pub day: Vec<u32>,
    pub slot: Vec<u32>,
    /// Standard deviation divided out during normalization.
    pub sd: f64,
}

impl NormVolSeries {
    /// Wrap values that are already normalized, e.g. read back from disk.
    pub fn from_parts(values: Vec<f64>, day: Vec<u32>, slot: Vec<u32>) -> Result<Self> {
        if values.len() != day.len() || values.len() != slot.len() {
            return Err(Error::Domain("label arrays must match value count".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("volatility must be finite and non-negative".into()));
        }
        Ok(NormVolSeries {
            values,
            day,
            slot,
            sd: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Population mean and standard deviation.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `v(t) = R'(t) / sd(R')` using the population divisor.
pub fn normalize(vs: &VolSeries) -> Result<NormVolSeries> {
    if vs.is_empty() {
        return Err(Error::EmptySeries("volatility series"));
    }
    let (_, sd) = mean_sd(&vs.values);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::ZeroVariance);
    }
    Ok(NormVolSeries {
        values: vs.values.iter().map(|r| r / sd).collect(),
        day: vs.day.clone(),
        slot: vs.slot.clone(),
        sd,
    })
}

/// Minute prices to normalized volatility in one pass.
pub fn preprocess(ms: &MinuteSeries, drop_overnight: bool) -> Result<(NormVolSeries, IntradayPattern)> {
    let raw = compute_volatility(ms, drop_overnight)?;
    let pattern = intraday_pattern(&raw)?;
    let norm = normalize(&deseasonalize(&raw, &pattern)?)?;
    Ok((norm, pattern))
}
