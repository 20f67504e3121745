//! Kolmogorov-Smirnov statistics: two-sample scaling tests between thresholds
//! and one-sample goodness-of-fit with a parametric bootstrap p-value.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervals::{CdfTable, IntervalSample};
use crate::seed;
use crate::semodel::{fit_mle, FitMode, FitReport, SeModel};

/// Coefficient of the asymptotic 5% two-sample critical value.
pub const KS_COEFF_5PCT: f64 = 1.36;
pub const MIN_BOOTSTRAP: usize = 100;

/// `CV = 1.36 / sqrt(m n / (m + n))`.
pub fn critical_value(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    KS_COEFF_5PCT / (m * n / (m + n)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn from_statistic(ks: f64, cv: f64) -> Self {
        if ks < cv {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        })
    }
}

/// Which sample sizes enter the critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CvCounts {
    /// Points lying inside the overlap of the two supports.
    #[default]
    Overlap,
    /// Whole samples.
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub ks: f64,
    pub cv: f64,
    pub m: usize,
    pub n: usize,
    pub overlap: (f64, f64),
    pub decision: Decision,
}

/// Sup-distance between two empirical CDFs over their common support.
///
/// Both CDFs are evaluated right-continuously at every sample point of
/// either table lying in `[max(min_i, min_j), min(max_i, max_j)]`.
pub fn two_sample_ks(fi: &CdfTable, fj: &CdfTable, counts: CvCounts) -> Result<KsResult> {
    let lo = fi.min().max(fj.min());
    let hi = fi.max().min(fj.max());
    if lo > hi {
        return Err(Error::NoOverlap);
    }
    let (mi, nj) = (fi.count_in(lo, hi), fj.count_in(lo, hi));
    if mi == 0 || nj == 0 {
        return Err(Error::NoOverlap);
    }
    let sup_over = |a: &CdfTable, b: &CdfTable| {
        let start = a.x.partition_point(|&x| x < lo);
        a.x[start..]
            .iter()
            .zip(&a.cum[start..])
            .take_while(|(x, _)| **x <= hi)
            .map(|(&x, &c)| {
                // |c/na - cb/nb| from integer counts, so rational cases are exact
                let lhs = c as u128 * b.n as u128;
                let rhs = b.count_le(x) as u128 * a.n as u128;
                lhs.abs_diff(rhs) as f64 / (a.n as f64 * b.n as f64)
            })
            .fold(0.0, f64::max)
    };
    let ks = sup_over(fi, fj).max(sup_over(fj, fi));
    let (m, n) = match counts {
        CvCounts::Overlap => (mi, nj),
        CvCounts::Whole => (fi.n, fj.n),
    };
    let cv = critical_value(m, n);
    Ok(KsResult {
        ks,
        cv,
        m,
        n,
        overlap: (lo, hi),
        decision: Decision::from_statistic(ks, cv),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsEntry {
    pub q_i: f64,
    pub q_j: f64,
    pub result: KsResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Scaling,
    Multiscaling,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Scaling => "scaling",
            Verdict::Multiscaling => "multiscaling",
        })
    }
}

/// Pairwise tests for every unordered pair of thresholds, in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsMatrix {
    pub entries: Vec<KsEntry>,
    pub verdict: Verdict,
}

impl KsMatrix {
    pub fn get(&self, q_i: f64, q_j: f64) -> Option<&KsResult> {
        self.entries
            .iter()
            .find(|e| (e.q_i == q_i && e.q_j == q_j) || (e.q_i == q_j && e.q_j == q_i))
            .map(|e| &e.result)
    }
}

/// Scaling holds iff every pair is accepted.
pub fn ks_matrix(samples: &[IntervalSample], counts: CvCounts) -> Result<KsMatrix> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "KS matrix needs at least 2 thresholds, got {}",
            samples.len()
        )));
    }
    let cdfs = samples
        .iter()
        .map(|s| CdfTable::from_values(&s.scaled()))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..samples.len())
        .flat_map(|i| (i + 1..samples.len()).map(move |j| (i, j)))
        .collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (q_i, q_j) = (samples[i].q, samples[j].q);
            two_sample_ks(&cdfs[i], &cdfs[j], counts)
                .map(|result| KsEntry { q_i, q_j, result })
                .map_err(|e| Error::Pair {
                    q_i,
                    q_j,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if entries.iter().all(|e| e.result.decision == Decision::Accept) {
        Verdict::Scaling
    } else {
        Verdict::Multiscaling
    };
    Ok(KsMatrix { entries, verdict })
}

/// A distribution function that can be compared against an empirical sample.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// Left limit `F(x-)`; equal to `cdf` for continuous distributions.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl Cdf for SeModel {
    fn cdf(&self, x: f64) -> f64 {
        SeModel::cdf(self, x)
    }
}

impl Cdf for CdfTable {
    fn cdf(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.eval_left(x)
    }
}

/// `sup |F_emp - F|`, checked on both sides of every jump of `F_emp`.
pub fn ks_against<C: Cdf + ?Sized>(sample: &[f64], dist: &C) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_sorted(&sorted, dist)
}

fn ks_sorted<C: Cdf + ?Sized>(sorted: &[f64], dist: &C) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d
            .max((at - dist.cdf(x)).abs())
            .max((below - dist.cdf_left(x)).abs());
        i = j;
    }
    d
}

/// One-sample KS distance between `sample` and the normalized `model`.
pub fn one_sample_ks(sample: &[f64], model: &SeModel) -> f64 {
    ks_against(sample, &model.to_normalized())
}

/// Parametric bootstrap p-value for the fit of `model` to `sample`.
///
/// Each replicate draws a synthetic sample of the same size from the model
/// and computes its KS distance to the model (`refit = false`) or to a
/// likelihood refit of itself (`refit = true`). The p-value is the fraction
/// of successful replicates whose distance strictly exceeds the observed one.
/// Replicate `k` uses stream `k` of `seed`, so results do not depend on
/// scheduling.
pub fn bootstrap_pvalue(
    sample: &[f64],
    model: &SeModel,
    n_boot: usize,
    seed: u64,
    refit: bool,
) -> Result<FitReport> {
    if sample.is_empty() {
        return Err(Error::EmptySeries("bootstrap sample"));
    }
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::Domain(format!(
            "n_boot must be >= {MIN_BOOTSTRAP}, got {n_boot}"
        )));
    }
    let target = model.to_normalized();
    let ks = ks_against(sample, &target);
    let n = sample.len();

    let outcomes: Vec<Option<bool>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::substream(seed, k);
            let mut sim = target.sample(n, &mut rng);
            sim.sort_by(f64::total_cmp);
            let ks_sim = if refit {
                let refitted = fit_mle(&sim).ok()?;
                ks_sorted(&sim, &refitted)
            } else {
                ks_sorted(&sim, &target)
            };
            Some(ks_sim > ks)
        })
        .collect();
    let ok = outcomes.iter().flatten().count();
    let n_failed = n_boot - ok;
    if ok == 0 {
        return Err(Error::FitFailure {
            reason: "every bootstrap refit failed".into(),
            best: Some(*model),
        });
    }
    let exceed = outcomes.iter().flatten().filter(|&&b| b).count();
    Ok(FitReport {
        q: None,
        mode: if model.constrained {
            FitMode::Mle
        } else {
            FitMode::Lsq
        },
        c: model.c,
        a: model.a,
        gamma: model.gamma,
        n,
        ks,
        p: exceed as f64 / ok as f64,
        n_boot,
        seed,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn table(values: &[f64]) -> CdfTable {
        CdfTable::from_values(values).unwrap()
    }

    #[test]
    fn critical_values() {
        assert!((critical_value(2000, 2000) - 0.04301).abs() < 1e-5);
        for m in [1usize, 7, 100, 5000] {
            assert!((critical_value(m, m) - 1.36 * (2.0 / m as f64).sqrt()).abs() < 1e-14);
        }
        // Effective size behind a printed CV of 0.0201.
        let eff = (1.36f64 / 0.0201).powi(2);
        assert!((eff - 4578.0).abs() < 1.0, "{eff}");
    }

    #[test]
    fn published_decisions() {
        assert_eq!(Decision::from_statistic(0.0363, 0.0201), Decision::Reject);
        assert_eq!(Decision::from_statistic(0.0445, 0.0506), Decision::Accept);
    }

    #[test]
    fn identical_samples() {
        let a = table(&[0.3, 1.0, 1.0, 2.5]);
        let r = two_sample_ks(&a, &a, CvCounts::Overlap).unwrap();
        assert_eq!(r.ks, 0.0);
        assert_eq!(r.decision, Decision::Accept);
    }

    #[test]
    fn hand_enumerated_pair() {
        let a = table(&[1.0, 2.0, 3.0]);
        let b = table(&[2.0, 3.0, 4.0]);
        let r = two_sample_ks(&a, &b, CvCounts::Overlap).unwrap();
        assert_eq!(r.ks, 1.0 / 3.0);
        assert_eq!(r.overlap, (2.0, 3.0));
        assert_eq!((r.m, r.n), (2, 2));
        let whole = two_sample_ks(&a, &b, CvCounts::Whole).unwrap();
        assert_eq!((whole.m, whole.n), (3, 3));
    }

    #[test]
    fn disjoint_supports() {
        let a = table(&[1.0, 2.0]);
        let b = table(&[3.0, 4.0]);
        assert!(matches!(
            two_sample_ks(&a, &b, CvCounts::Overlap),
            Err(Error::NoOverlap)
        ));
    }

    #[test]
    fn matrix_shape_and_errors() {
        let samples: Vec<IntervalSample> = [2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&q| IntervalSample::new(q, vec![1, 2, 3, 5, 8], 100).unwrap())
            .collect();
        let m = ks_matrix(&samples, CvCounts::Overlap).unwrap();
        assert_eq!(m.entries.len(), 6);
        assert_eq!(m.verdict, Verdict::Scaling);
        let pairs: Vec<(f64, f64)> = m.entries.iter().map(|e| (e.q_i, e.q_j)).collect();
        assert_eq!(
            pairs,
            vec![
                (2.0, 3.0),
                (2.0, 4.0),
                (2.0, 5.0),
                (3.0, 4.0),
                (3.0, 5.0),
                (4.0, 5.0)
            ]
        );
        assert!(m.get(5.0, 3.0).is_some());
        assert!(ks_matrix(&samples[..1], CvCounts::Overlap).is_err());
    }

    #[test]
    fn quantile_sample_distance() {
        let model = SeModel::normalized(1.0, 1.0).unwrap();
        let n = 50;
        // exponential quantiles in closed form
        let xs: Vec<f64> = (1..=n)
            .map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln())
            .collect();
        assert!((one_sample_ks(&xs, &model) - 0.5 / n as f64).abs() < 1e-12);
        assert!((one_sample_ks(&[2f64.ln()], &model) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_rejects_small_budgets() {
        let model = SeModel::normalized(1.0, 1.0).unwrap();
        assert!(bootstrap_pvalue(&[1.0, 2.0], &model, 50, 1, false).is_err());
        assert!(bootstrap_pvalue(&[], &model, 200, 1, false).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_bounded() {
        let model = SeModel::normalized(14.2, 0.38).unwrap();
        let xs = crate::semodel::se_sample(&model, 300, 4);
        let r1 = bootstrap_pvalue(&xs, &model, 200, 77, false).unwrap();
        let r2 = bootstrap_pvalue(&xs, &model, 200, 77, false).unwrap();
        assert_eq!(r1, r2);
        assert!((0.0..=1.0).contains(&r1.p));
        assert_eq!(r1.mode, FitMode::Mle);
        assert_eq!(r1.n_failed, 0);
    }

    #[test]
    fn bootstrap_with_refit() {
        let model = SeModel::normalized(1.0, 1.0).unwrap();
        let xs = crate::semodel::se_sample(&model, 500, 8);
        let fitted = fit_mle(&xs).unwrap();
        let r = bootstrap_pvalue(&xs, &fitted, 100, 3, true).unwrap();
        assert_eq!(r.n_failed, 0);
        assert!(r.p > 0.01, "{r:?}");
    }

    proptest! {
        #[test]
        fn two_sample_is_symmetric(
            a in prop::collection::vec(0.0f64..5.0, 1..60),
            b in prop::collection::vec(0.0f64..5.0, 1..60),
        ) {
            let (ta, tb) = (table(&a), table(&b));
            match (two_sample_ks(&ta, &tb, CvCounts::Overlap), two_sample_ks(&tb, &ta, CvCounts::Overlap)) {
                (Ok(x), Ok(y)) => {
                    prop_assert_eq!(x.ks, y.ks);
                    prop_assert_eq!(x.cv, y.cv);
                    prop_assert!((0.0..=1.0).contains(&x.ks));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn two_sample_uses_ranks_only(
            a in prop::collection::vec(0.01f64..5.0, 1..60),
            b in prop::collection::vec(0.01f64..5.0, 1..60),
        ) {
            let (ta, tb) = (table(&a), table(&b));
            let map = |v: &[f64]| table(&v.iter().map(|x| x.ln() * 3.0 + 1.0).collect::<Vec<_>>());
            if let Ok(x) = two_sample_ks(&ta, &tb, CvCounts::Overlap) {
                let y = two_sample_ks(&map(&a), &map(&b), CvCounts::Overlap).unwrap();
                prop_assert_eq!(x.ks, y.ks);
                prop_assert_eq!((x.m, x.n), (y.m, y.n));
            }
        }

        #[test]
        fn own_ecdf_distance_is_zero(a in prop::collection::vec(0.0f64..5.0, 1..80)) {
            prop_assert_eq!(ks_against(&a, &table(&a)), 0.0);
        }

        #[test]
        fn one_sample_bounded(a in prop::collection::vec(0.0f64..50.0, 1..80), g in 0.1f64..2.0) {
            let model = SeModel::normalized(1.0, g).unwrap();
            let d = one_sample_ks(&a, &model);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
