//! The stretched-exponential family `f(x) = c * exp(-a * x^gamma)` on `(0, inf)`.
//!
//! With `u = a x^gamma` the normalized member is a power transform of a
//! Gamma(1/gamma) variable, which gives closed forms for the normalization,
//! the CDF (regularized lower incomplete gamma), the moments and an exact
//! sampler.
//!
//! Moments carry the prefactor `a^(-1/gamma)`. The frequently quoted `1/a`
//! prefactor only agrees with it at `gamma = 1`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::optimize::{golden_max, local_max};
use crate::seed;

/// Bounds on the stretching exponent used by both fitters.
pub const GAMMA_MIN: f64 = 0.05;
pub const GAMMA_MAX: f64 = 2.0;
/// Starting exponents for the likelihood search.
pub const MLE_STARTS: [f64; 3] = [0.3, 0.6, 1.0];
pub const MLE_MIN_SAMPLE: usize = 50;
pub const LSQ_MIN_BINS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeModel {
    pub c: f64,
    pub a: f64,
    pub gamma: f64,
    /// `c` is the normalization implied by `(a, gamma)`.
    pub constrained: bool,
}

fn check_params(a: f64, gamma: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("scale a must be positive, got {a}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!(
            "exponent gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// `c = gamma * a^(1/gamma) / Gamma(1/gamma)`.
pub fn normalization_c(a: f64, gamma: f64) -> Result<f64> {
    check_params(a, gamma)?;
    Ok(ln_normalization(a, gamma).exp())
}

fn ln_normalization(a: f64, gamma: f64) -> f64 {
    gamma.ln() + a.ln() / gamma - ln_gamma(1.0 / gamma)
}

impl SeModel {
    /// The probability density with scale `a` and exponent `gamma`.
    pub fn normalized(a: f64, gamma: f64) -> Result<Self> {
        Ok(SeModel {
            c: normalization_c(a, gamma)?,
            a,
            gamma,
            constrained: true,
        })
    }

    /// A curve with an independent prefactor, as produced by [`fit_lsq`].
    pub fn free(c: f64, a: f64, gamma: f64) -> Result<Self> {
        check_params(a, gamma)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("prefactor c must be positive, got {c}")));
        }
        Ok(SeModel {
            c,
            a,
            gamma,
            constrained: false,
        })
    }

    /// The normalized member sharing this curve's `(a, gamma)`.
    pub fn to_normalized(&self) -> Self {
        SeModel::normalized(self.a, self.gamma).expect("parameters validated at construction")
    }

    /// Normalized model with unit mean for the given exponent.
    pub fn unit_mean(gamma: f64) -> Result<Self> {
        check_params(1.0, gamma)?;
        // <x> = a^(-1/gamma) Gamma(2/gamma) / Gamma(1/gamma) = 1
        let a = ((ln_gamma(2.0 / gamma) - ln_gamma(1.0 / gamma)) * gamma).exp();
        SeModel::normalized(a, gamma)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.c * (-self.a * x.powf(self.gamma)).exp()
        }
    }

    /// CDF of the normalized member, `P(1/gamma, a x^gamma)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let u = self.a * x.powf(self.gamma);
        if u.is_infinite() {
            return 1.0;
        }
        gamma_lr(1.0 / self.gamma, u)
    }

    /// Survival function `1 - cdf(x)`, accurate in the tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let u = self.a * x.powf(self.gamma);
        if u.is_infinite() {
            return 0.0;
        }
        gamma_ur(1.0 / self.gamma, u)
    }

    /// Draw `n` values: `X = (G / a)^(1/gamma)`, `G ~ Gamma(1/gamma, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let g = Gamma::new(1.0 / self.gamma, 1.0).expect("positive shape");
        let inv = 1.0 / self.gamma;
        (0..n).map(|_| (g.sample(rng) / self.a).powf(inv)).collect()
    }

    /// Root moment `<x^m>^(1/m)` of the normalized member.
    pub fn analytic_moment(&self, m: f64) -> Result<f64> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("moment order must be positive, got {m}")));
        }
        let mu = self.ln_root_moment(m).exp();
        if mu.is_finite() && mu > 0.0 {
            Ok(mu)
        } else {
            let max_safe = largest_finite(m, |t| self.ln_root_moment(t).exp());
            Err(Error::Overflow { order: m, max_safe })
        }
    }

    fn ln_root_moment(&self, m: f64) -> f64 {
        let g = self.gamma;
        -self.a.ln() / g + (ln_gamma((m + 1.0) / g) - ln_gamma(1.0 / g)) / m
    }
}

/// Largest order below `m` at which `f` stays finite and positive.
pub(crate) fn largest_finite(m: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ok = |t: f64| {
        let v = f(t);
        v.is_finite() && v > 0.0
    };
    let (mut lo, mut hi) = (0.0, m);
    if !ok(f64::MIN_POSITIVE.max(m * 1e-6)) {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn se_cdf(model: &SeModel, x: f64) -> f64 {
    model.cdf(x)
}

/// `n` draws from `model` using a stream seeded with `seed`.
pub fn se_sample(model: &SeModel, n: usize, seed: u64) -> Vec<f64> {
    model.sample(n, &mut seed::rng(seed))
}

pub fn analytic_moment(model: &SeModel, m: f64) -> Result<f64> {
    model.analytic_moment(m)
}

/// Maximum-likelihood fit of the normalized family.
///
/// For fixed `gamma` the likelihood is maximized by `a = n / (gamma * sum x^gamma)`,
/// so the search runs over `gamma` alone, from each of [`MLE_STARTS`].
pub fn fit_mle(sample: &[f64]) -> Result<SeModel> {
    if sample.len() < MLE_MIN_SAMPLE {
        return Err(Error::Domain(format!(
            "likelihood fit needs at least {MLE_MIN_SAMPLE} values, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(
            "likelihood fit needs positive finite values".into(),
        ));
    }
    let logs: Vec<f64> = sample.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let scale_for = |g: f64| n / (g * logs.iter().map(|l| (g * l).exp()).sum::<f64>());
    let profile = |g: f64| {
        let a = scale_for(g);
        // per-observation log-likelihood at the optimal a
        ln_normalization(a, g) - 1.0 / g
    };

    let mut best: Option<(f64, f64)> = None;
    for start in MLE_STARTS {
        if let Some((g, ll)) = local_max(profile, start, GAMMA_MIN, GAMMA_MAX, 1e-10) {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((g, ll));
            }
        }
    }
    let Some((gamma, _)) = best else {
        return Err(Error::FitFailure {
            reason: "likelihood not finite from any start".into(),
            best: None,
        });
    };
    let a = scale_for(gamma);
    SeModel::normalized(a, gamma).map_err(|_| Error::FitFailure {
        reason: format!("non-finite scale at gamma = {gamma}"),
        best: None,
    })
}

/// Least squares of `ln density` against `ln c - a x^gamma` over non-empty bins.
///
/// For fixed `gamma` this is ordinary linear regression on `x^gamma`, so the
/// search runs over `gamma` alone: a log-spaced scan followed by golden section.
pub fn fit_lsq(pdf: &crate::intervals::PdfTable) -> Result<SeModel> {
    let points: Vec<(f64, f64)> = pdf
        .bins
        .iter()
        .filter(|b| b.count > 0 && b.density > 0.0 && b.x > 0.0)
        .map(|b| (b.x, b.density.ln()))
        .collect();
    fit_lsq_points(&points)
}

pub(crate) fn fit_lsq_points(points: &[(f64, f64)]) -> Result<SeModel> {
    if points.len() < LSQ_MIN_BINS {
        return Err(Error::FitFailure {
            reason: format!(
                "{} non-empty bins, at least {LSQ_MIN_BINS} required",
                points.len()
            ),
            best: None,
        });
    }
    let logx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let solve = |g: f64| -> (f64, f64, f64) {
        let z: Vec<f64> = logx.iter().map(|l| (g * l).exp()).collect();
        let n = z.len() as f64;
        let mz = z.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let szz: f64 = z.iter().map(|v| (v - mz) * (v - mz)).sum();
        let szy: f64 = z.iter().zip(&ys).map(|(v, y)| (v - mz) * (y - my)).sum();
        if szz <= 0.0 {
            return (f64::NAN, f64::NAN, f64::INFINITY);
        }
        let slope = szy / szz;
        let intercept = my - slope * mz;
        let rss: f64 = z
            .iter()
            .zip(&ys)
            .map(|(v, y)| {
                let r = y - intercept - slope * v;
                r * r
            })
            .sum();
        (intercept, -slope, rss)
    };

    const SCAN: usize = 200;
    let ratio = (GAMMA_MAX / GAMMA_MIN).ln();
    let grid: Vec<f64> = (0..=SCAN)
        .map(|k| GAMMA_MIN * (ratio * k as f64 / SCAN as f64).exp())
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&g| -solve(g).2).collect();
    let k = (0..grid.len())
        .max_by(|&i, &j| scores[i].total_cmp(&scores[j]))
        .unwrap();
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(SCAN)];
    let (gamma, _) = golden_max(|g| -solve(g).2, lo, hi, 1e-13);

    let (ln_c, a, _) = solve(gamma);
    let best = SeModel {
        c: ln_c.exp(),
        a,
        gamma,
        constrained: false,
    };
    if !(a > 0.0 && a.is_finite() && ln_c.is_finite()) {
        return Err(Error::FitFailure {
            reason: format!("degenerate table: fitted scale a = {a}"),
            best: Some(best),
        });
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Mle,
    Lsq,
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMode::Mle => "mle",
            FitMode::Lsq => "lsq",
        })
    }
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(FitMode::Mle),
            "lsq" => Ok(FitMode::Lsq),
            other => Err(Error::Domain(format!("unknown fit mode `{other}`"))),
        }
    }
}

/// One row of a goodness-of-fit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub q: Option<f64>,
    pub mode: FitMode,
    pub c: f64,
    pub a: f64,
    pub gamma: f64,
    pub n: usize,
    pub ks: f64,
    pub p: f64,
    pub n_boot: usize,
    pub seed: u64,
    /// Bootstrap replicates dropped because their refit failed.
    pub n_failed: usize,
}
