//! Moments of scaled return intervals, their dependence on the mean interval,
//! and extended self-similarity (ESS) exponents.
//!
//! All moments are computed from raw interval lists, never from binned
//! densities. The mean interval is in trading minutes.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervals::{extract_intervals, threshold_for_mean, IntervalSample};
use crate::semodel::{fit_mle, SeModel};
use crate::volatility::NormVolSeries;

/// Default medium region of mean intervals used for power-law fits.
pub const DEFAULT_REGION: Region = Region { lo: 10.0, hi: 100.0 };
pub const MIN_FIT_POINTS: usize = 3;

/// Closed range of mean intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// `q` grid from `lo` to `hi` inclusive in steps of `step`.
pub fn q_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

/// `<v^m>^(1/m)`, falling back to log-space accumulation when powers overflow.
fn root_moment(values: impl Iterator<Item = f64> + Clone, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("moment order must be positive, got {m}")));
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v.powf(m);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySeries("moment of an empty sample"));
    }
    let direct = (sum / n as f64).powf(1.0 / m);
    if sum.is_finite() && direct.is_finite() && direct > 0.0 {
        return Ok(direct);
    }
    // log-sum-exp over m ln v
    let logs: Vec<f64> = values.map(|v| m * v.ln()).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = peak + logs.iter().map(|l| (l - peak).exp()).sum::<f64>().ln();
    let out = ((lse - (n as f64).ln()) / m).exp();
    if out.is_finite() && out > 0.0 {
        Ok(out)
    } else {
        // direct powers stay finite up to about this order
        let max_safe = f64::MAX.ln() / (peak / m).max(f64::MIN_POSITIVE);
        Err(Error::Overflow { order: m, max_safe })
    }
}

/// `mu_m = <(tau / <tau>)^m>^(1/m)`.
pub fn empirical_moment(s: &IntervalSample, m: f64) -> Result<f64> {
    let mean = s.mean;
    root_moment(s.intervals.iter().map(move |&t| f64::from(t) / mean), m)
}

/// `mu_{m,n} = <tau^m>^(1/m) / <tau^n>^(1/n)` over raw intervals.
pub fn ess_mu(s: &IntervalSample, m: f64, n: f64) -> Result<f64> {
    let raw = || s.intervals.iter().map(|&t| f64::from(t));
    Ok(root_moment(raw(), m)? / root_moment(raw(), n)?)
}

/// Interval samples for each threshold of a grid, plus the thresholds
/// that produced too few events.
#[derive(Debug, Clone)]
pub struct IntervalGrid {
    pub samples: Vec<IntervalSample>,
    pub dropped: Vec<(f64, String)>,
}

pub fn interval_grid(v: &NormVolSeries, q_grid: &[f64], cross_day: bool) -> Result<IntervalGrid> {
    if q_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("q grid must be strictly ascending".into()));
    }
    let results: Vec<(f64, Result<IntervalSample>)> = q_grid
        .par_iter()
        .map(|&q| (q, extract_intervals(v, q, cross_day)))
        .collect();
    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for (q, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e @ Error::InsufficientEvents { .. }) => dropped.push((q, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::InsufficientEvents { count: 0 });
    }
    Ok(IntervalGrid { samples, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub q: f64,
    pub mean_tau: f64,
    pub mu: f64,
    pub count: usize,
}

/// `mu_m` against `<tau>` over a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCurve {
    pub m: f64,
    pub points: Vec<CurvePoint>,
    /// Thresholds left out, with the reason.
    pub dropped: Vec<(f64, String)>,
}

impl IntervalGrid {
    /// Points are kept only while `<tau>` strictly increases.
    pub fn moment_curve(&self, m: f64) -> Result<MomentCurve> {
        let mut points: Vec<CurvePoint> = Vec::with_capacity(self.samples.len());
        let mut dropped = self.dropped.clone();
        for s in &self.samples {
            if points.last().is_some_and(|p| s.mean <= p.mean_tau) {
                dropped.push((s.q, format!("mean interval {} not increasing", s.mean)));
                continue;
            }
            points.push(CurvePoint {
                q: s.q,
                mean_tau: s.mean,
                mu: empirical_moment(s, m)?,
                count: s.len(),
            });
        }
        Ok(MomentCurve { m, points, dropped })
    }

    pub fn ess_xi(&self, m: f64, n: f64, region: Region) -> Result<EssReport> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut last_mean = f64::NEG_INFINITY;
        for s in &self.samples {
            if s.mean <= last_mean || !region.contains(s.mean) {
                last_mean = last_mean.max(s.mean);
                continue;
            }
            last_mean = s.mean;
            let raw = || s.intervals.iter().map(|&t| f64::from(t));
            let mom_m = root_moment(raw(), m)?.ln() * m;
            let mom_n = root_moment(raw(), n)?.ln() * n;
            xs.push(mom_n);
            ys.push(mom_m);
        }
        if xs.len() < MIN_FIT_POINTS {
            return Err(Error::InsufficientPoints {
                found: xs.len(),
                required: MIN_FIT_POINTS,
            });
        }
        let xi_fit = ols(&xs, &ys);
        // ln mu_{m,n} = ln<tau^m>/m - ln<tau^n>/n against ln<tau^n>/n
        let u: Vec<f64> = xs.iter().map(|x| x / n).collect();
        let w: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / m - x / n).collect();
        let alpha_fit = ols(&u, &w);
        Ok(EssReport {
            m,
            n,
            xi: xi_fit.slope,
            xi_stderr: xi_fit.stderr,
            alpha: alpha_fit.slope,
            alpha_stderr: alpha_fit.stderr,
            identity_residual: (alpha_fit.slope + 1.0) / n - xi_fit.slope / m,
            region,
            points: xs.len(),
        })
    }
}

pub fn moment_curve(v: &NormVolSeries, m: f64, q_grid: &[f64], cross_day: bool) -> Result<MomentCurve> {
    interval_grid(v, q_grid, cross_day)?.moment_curve(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> LinFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let stderr = if x.len() > 2 && sxx > 0.0 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinFit {
        slope,
        intercept,
        stderr,
    }
}

/// Power-law exponent of `mu_m` against `<tau>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaFit {
    pub m: f64,
    pub alpha: f64,
    pub stderr: f64,
    pub points: usize,
    pub region: Region,
}

/// Slope of `ln mu_m` on `ln <tau>` over curve points inside `region`.
pub fn fit_alpha(curve: &MomentCurve, region: Region) -> Result<AlphaFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .points
        .iter()
        .filter(|p| region.contains(p.mean_tau))
        .map(|p| (p.mean_tau.ln(), p.mu.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            found: xs.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let fit = ols(&xs, &ys);
    Ok(AlphaFit {
        m: curve.m,
        alpha: fit.slope,
        stderr: fit.stderr,
        points: xs.len(),
        region,
    })
}

/// ESS exponents for orders `(m, n)`.
///
/// `xi` is the slope of `ln <tau^m>` on `ln <tau^n>`; `alpha` is the slope of
/// `ln mu_{m,n}` on `ln <tau^n>^(1/n)`, which reduces to the moment exponent
/// `alpha(m)` when `n = 1`. `identity_residual` is `(alpha + 1)/n - xi/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssReport {
    pub m: f64,
    pub n: f64,
    pub xi: f64,
    pub xi_stderr: f64,
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub identity_residual: f64,
    pub region: Region,
    pub points: usize,
}

/// `alpha(m) = xi(m, 1) / m - 1`.
pub fn alpha_from_xi(xi_m1: f64, m: f64) -> f64 {
    xi_m1 / m - 1.0
}

pub fn ess_xi(
    v: &NormVolSeries,
    m: f64,
    n: f64,
    q_grid: &[f64],
    region: Region,
    cross_day: bool,
) -> Result<EssReport> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!(
            "ESS reference order must be positive, got {n}"
        )));
    }
    interval_grid(v, q_grid, cross_day)?.ess_xi(m, n, region)
}

/// Moments against order at one fixed mean interval, with the analytic
/// companion from a likelihood fit of the same intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderCurve {
    pub target: f64,
    pub q: f64,
    pub mean_tau: f64,
    /// `(m, mu_m)` from the intervals.
    pub empirical: Vec<(f64, f64)>,
    pub model: Option<SeModel>,
    /// `(m, mu_m)` of the fitted model; empty when the fit failed.
    pub analytic: Vec<(f64, f64)>,
}

pub fn moment_vs_order(
    v: &NormVolSeries,
    mean_targets: &[f64],
    m_grid: &[f64],
    tol: f64,
    cross_day: bool,
) -> Result<Vec<OrderCurve>> {
    mean_targets
        .iter()
        .map(|&target| {
            let found = threshold_for_mean(v, target, tol)?;
            let s = extract_intervals(v, found.q, cross_day)?;
            let empirical = m_grid
                .iter()
                .map(|&m| empirical_moment(&s, m).map(|mu| (m, mu)))
                .collect::<Result<Vec<_>>>()?;
            let model = fit_mle(&s.scaled()).ok();
            let analytic = model
                .map(|md| {
                    m_grid
                        .iter()
                        .filter_map(|&m| md.analytic_moment(m).ok().map(|mu| (m, mu)))
                        .collect()
                })
                .unwrap_or_default();
            Ok(OrderCurve {
                target,
                q: found.q,
                mean_tau: s.mean,
                empirical,
                model,
                analytic,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample(taus: Vec<u32>) -> IntervalSample {
        IntervalSample::new(1.0, taus, 1000).unwrap()
    }

    #[test]
    fn hand_moments() {
        let s = sample(vec![1, 1, 2]);
        assert!((empirical_moment(&s, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let mu2 = empirical_moment(&s, 2.0).unwrap();
        assert!((mu2 - 1.125f64.sqrt()).abs() < 1e-15);
        assert!((mu2 - 1.0607).abs() < 1e-4);
        let ess = ess_mu(&s, 2.0, 1.0).unwrap();
        assert!((ess - 2f64.sqrt() / (4.0 / 3.0)).abs() < 1e-15);
        assert!((ess_mu(&s, 2.5, 2.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_sample_moments() {
        let s = sample(vec![7; 20]);
        for m in [0.25, 0.5, 2.0, 6.0] {
            assert!((empirical_moment(&s, m).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(empirical_moment(&s, 0.0).is_err());
    }

    #[test]
    fn huge_orders_use_log_space() {
        let s = sample(vec![1, 1000]);
        let mu = empirical_moment(&s, 300.0).unwrap();
        // (x_max^300 / 2)^(1/300) with x_max = 2000/1001
        let expected = (2000.0f64 / 1001.0) * 0.5f64.powf(1.0 / 300.0);
        assert!((mu / expected - 1.0).abs() < 1e-12, "{mu} {expected}");
    }

    #[test]
    fn q_grid_endpoints() {
        let g = q_grid(1.0, 5.0, 0.1);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[40], 5.0);
        assert_eq!(g[13], 2.3);
    }

    fn curve(points: &[(f64, f64)]) -> MomentCurve {
        MomentCurve {
            m: 2.0,
            points: points
                .iter()
                .map(|&(t, mu)| CurvePoint {
                    q: 0.0,
                    mean_tau: t,
                    mu,
                    count: 10,
                })
                .collect(),
            dropped: vec![],
        }
    }

    #[test]
    fn alpha_regression_identity() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 45.0, 80.0, 100.0]
            .iter()
            .map(|&t: &f64| (t, t.powf(0.1)))
            .collect();
        let fit = fit_alpha(&curve(&pts), DEFAULT_REGION).unwrap();
        assert!((fit.alpha - 0.1).abs() < 1e-12);
        assert_eq!(fit.points, 5);

        let flat: Vec<(f64, f64)> = [12.0, 30.0, 70.0].iter().map(|&t| (t, 1.0)).collect();
        assert_eq!(fit_alpha(&curve(&flat), DEFAULT_REGION).unwrap().alpha, 0.0);

        let outside = [(1.0, 1.0), (5.0, 1.0), (50.0, 1.0), (500.0, 1.0)];
        assert!(matches!(
            fit_alpha(&curve(&outside), DEFAULT_REGION),
            Err(Error::InsufficientPoints { found: 1, .. })
        ));
    }

    #[test]
    fn alpha_from_xi_identity() {
        assert_eq!(alpha_from_xi(1.0, 1.0), 0.0);
        assert!((alpha_from_xi(2.2, 2.0) - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ess_reduces_to_scaled_moment(taus in prop::collection::vec(1u32..1000, 1..100), m in 0.1f64..4.0) {
            let s = sample(taus);
            let a = empirical_moment(&s, m).unwrap();
            let b = ess_mu(&s, m, 1.0).unwrap();
            prop_assert!((a / b - 1.0).abs() < 1e-10);
        }

        #[test]
        fn root_moments_increase_with_order(taus in prop::collection::vec(1u32..1000, 1..100), m in 0.1f64..4.0, dm in 0.01f64..2.0) {
            let s = sample(taus);
            let lo = empirical_moment(&s, m).unwrap();
            let hi = empirical_moment(&s, m + dm).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-12));
        }
    }
}
