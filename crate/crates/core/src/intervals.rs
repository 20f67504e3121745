//! Threshold exceedances, return intervals and their scaled distributions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volatility::NormVolSeries;

/// Return intervals (in trading minutes) between successive exceedances of `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSample {
    pub q: f64,
    pub intervals: Vec<u32>,
    pub mean: f64,
    pub source_len: usize,
}

impl IntervalSample {
    pub fn new(q: f64, intervals: Vec<u32>, source_len: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InsufficientEvents { count: 0 });
        }
        if intervals.contains(&0) {
            return Err(Error::Domain("intervals must be at least 1".into()));
        }
        let mean = intervals.iter().map(|&t| f64::from(t)).sum::<f64>() / intervals.len() as f64;
        Ok(IntervalSample {
            q,
            intervals,
            mean,
            source_len,
        })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `x = tau / <tau>`.
    pub fn scaled(&self) -> Vec<f64> {
        self.intervals.iter().map(|&t| f64::from(t) / self.mean).collect()
    }
}

fn exceedances(values: &[f64], q: f64) -> impl Iterator<Item = usize> + '_ {
    values
        .iter()
        .enumerate()
        .filter_map(move |(i, &v)| (v > q).then_some(i))
}

/// Intervals between positions where `v > q`, counted in series positions.
///
/// With `cross_day = false`, pairs whose exceedances fall on different days
/// are discarded.
pub fn extract_intervals(v: &NormVolSeries, q: f64, cross_day: bool) -> Result<IntervalSample> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("threshold must be positive, got {q}")));
    }
    let mut count = 0usize;
    let mut prev: Option<usize> = None;
    let mut intervals = Vec::new();
    for pos in exceedances(&v.values, q) {
        count += 1;
        if let Some(p) = prev {
            if cross_day || v.day[p] == v.day[pos] {
                intervals.push((pos - p) as u32);
            }
        }
        prev = Some(pos);
    }
    if count < 2 || intervals.is_empty() {
        return Err(Error::InsufficientEvents { count });
    }
    IntervalSample::new(q, intervals, v.len())
}

/// Mean interval for threshold `q` with gaps collapsed, or `None` below two events.
pub fn mean_interval(values: &[f64], q: f64) -> Option<f64> {
    let mut first = None;
    let mut last = 0;
    let mut count = 0usize;
    for pos in exceedances(values, q) {
        first.get_or_insert(pos);
        last = pos;
        count += 1;
    }
    (count >= 2).then(|| (last - first.unwrap()) as f64 / (count - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfBin {
    pub lo: f64,
    pub hi: f64,
    /// Mean scaled interval of the bin's members.
    pub x: f64,
    pub density: f64,
    pub count: usize,
}

/// Log-binned density of scaled intervals; empty bins are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfTable {
    pub q: f64,
    pub bins: Vec<PdfBin>,
    pub total: usize,
    /// Set when every interval is equal and the table is a single artificial bin.
    pub degenerate: bool,
}

impl PdfTable {
    pub fn from_bins(q: f64, bins: Vec<PdfBin>) -> Self {
        let total = bins.iter().map(|b| b.count).sum();
        PdfTable {
            q,
            bins,
            total,
            degenerate: false,
        }
    }
}

pub fn scaled_pdf(s: &IntervalSample, bins_per_decade: u32) -> Result<PdfTable> {
    if bins_per_decade == 0 {
        return Err(Error::Domain("bins_per_decade must be at least 1".into()));
    }
    let xs = s.scaled();
    let total = xs.len();
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let step = 1.0 / f64::from(bins_per_decade);

    if min == max {
        let lo = min * 10f64.powf(-step / 2.0);
        let hi = min * 10f64.powf(step / 2.0);
        return Ok(PdfTable {
            q: s.q,
            bins: vec![PdfBin {
                lo,
                hi,
                x: min,
                density: 1.0 / (hi - lo),
                count: total,
            }],
            total,
            degenerate: true,
        });
    }

    let n_bins = (((max / min).log10() / step).ceil() as usize).max(1);
    let mut edges: Vec<f64> = (0..=n_bins).map(|k| min * 10f64.powf(k as f64 * step)).collect();
    edges[0] = min;
    edges[n_bins] = edges[n_bins].max(max);
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0; n_bins];
    for &x in &xs {
        let k = edges.partition_point(|&e| e <= x).clamp(1, n_bins) - 1;
        counts[k] += 1;
        sums[k] += x;
    }
    let bins = (0..n_bins)
        .filter(|&k| counts[k] > 0)
        .map(|k| {
            let (lo, hi) = (edges[k], edges[k + 1]);
            PdfBin {
                lo,
                hi,
                x: (sums[k] / counts[k] as f64).clamp(lo, hi),
                density: counts[k] as f64 / (total as f64 * (hi - lo)),
                count: counts[k],
            }
        })
        .collect();
    Ok(PdfTable {
        q: s.q,
        bins,
        total,
        degenerate: false,
    })
}

/// Right-continuous empirical step CDF over distinct sorted values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfTable {
    pub x: Vec<f64>,
    /// Cumulative count of sample points `<= x[i]`.
    pub cum: Vec<usize>,
    pub n: usize,
}

impl CdfTable {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries("CDF of an empty sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("CDF sample contains non-finite values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut x = Vec::new();
        let mut cum = Vec::new();
        for (i, v) in sorted.iter().enumerate() {
            if x.last() == Some(v) {
                *cum.last_mut().unwrap() = i + 1;
            } else {
                x.push(*v);
                cum.push(i + 1);
            }
        }
        Ok(CdfTable {
            x,
            cum,
            n: sorted.len(),
        })
    }

    pub fn min(&self) -> f64 {
        self.x[0]
    }

    pub fn max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// `F(x_i)` for the i-th distinct value.
    pub fn prob(&self, i: usize) -> f64 {
        self.cum[i] as f64 / self.n as f64
    }

    pub(crate) fn count_le(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&v| v <= x);
        if k == 0 {
            0
        } else {
            self.cum[k - 1]
        }
    }

    fn count_lt(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&v| v < x);
        if k == 0 {
            0
        } else {
            self.cum[k - 1]
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.n as f64
    }

    /// Left limit `F(x-)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.count_lt(x) as f64 / self.n as f64
    }

    /// Number of sample points inside the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        if hi < lo {
            return 0;
        }
        self.count_le(hi) - self.count_lt(lo)
    }
}

pub fn empirical_cdf(s: &IntervalSample) -> Result<CdfTable> {
    CdfTable::from_values(&s.scaled())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSearch {
    pub q: f64,
    pub achieved: f64,
}

/// Find a threshold whose mean interval is within `tol` of `target`.
///
/// The mean interval only changes when `q` crosses a data value, so the
/// search bisects over the distinct values, using the midpoint between
/// neighbours as the threshold.
pub fn threshold_for_mean(v: &NormVolSeries, target: f64, tol: f64) -> Result<ThresholdSearch> {
    if !(target >= 1.0 && target.is_finite()) {
        return Err(Error::Domain(format!(
            "target mean interval must be >= 1, got {target}"
        )));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Domain("tolerance must be non-negative".into()));
    }
    let mut distinct = v.values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let mut candidates = Vec::with_capacity(distinct.len());
    if distinct[0] > 0.0 {
        candidates.push(distinct[0] / 2.0);
    }
    candidates.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));

    let eval = |k: usize| mean_interval(&v.values, candidates[k]);
    // highest candidate that still leaves two exceedances
    let mut top = candidates.len();
    let mut top_mean = None;
    while top > 0 {
        top -= 1;
        if let Some(m) = eval(top) {
            top_mean = Some(m);
            break;
        }
    }
    let Some(top_mean) = top_mean else {
        return Err(Error::InsufficientEvents { count: 0 });
    };
    if target > top_mean + tol {
        return Err(Error::UnreachableTarget {
            target,
            max_achievable: top_mean,
        });
    }

    let (mut lo, mut hi) = (0usize, top);
    let mut lo_mean = eval(lo).unwrap_or(1.0);
    let mut hi_mean = top_mean;
    if (lo_mean - target).abs() <= tol {
        return Ok(ThresholdSearch {
            q: candidates[lo],
            achieved: lo_mean,
        });
    }
    while hi - lo > 1 {
        if (hi_mean - target).abs() <= tol {
            break;
        }
        let mid = lo + (hi - lo) / 2;
        let m = eval(mid).unwrap_or(f64::INFINITY);
        if (m - target).abs() <= tol {
            return Ok(ThresholdSearch {
                q: candidates[mid],
                achieved: m,
            });
        }
        if m < target {
            lo = mid;
            lo_mean = m;
        } else {
            hi = mid;
            hi_mean = m;
        }
    }
    let (k, achieved) = if (hi_mean - target).abs() <= (lo_mean - target).abs() {
        (hi, hi_mean)
    } else {
        (lo, lo_mean)
    };
    Ok(ThresholdSearch {
        q: candidates[k],
        achieved,
    })
}
