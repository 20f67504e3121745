//! End-to-end checks on synthetic series with closed-form or Monte Carlo oracles.

mod common;

use chrono::NaiveDate;
use volint_core::ingest::{parse_ticks, sample_minutely};
use volint_core::intervals::{extract_intervals, threshold_for_mean};
use volint_core::kstest::{ks_matrix, CvCounts, Verdict};
use volint_core::moments::{fit_alpha, interval_grid, moment_vs_order, q_grid, DEFAULT_REGION};
use volint_core::report::write_minute_csv;
use volint_core::synth::{gen_iid_volatility, gen_se_interval_volatility, shuffle_series, to_minute_series};
use volint_core::volatility::compute_volatility;
use volint_core::{IntervalSample, NormVolSeries, TradingCalendar};

#[test]
fn iid_mean_interval_is_geometric() {
    let v = gen_iid_volatility(140_000, 11).unwrap();
    for q in [1.5, 2.0, 3.0, 4.0] {
        let s = extract_intervals(&v, q, true).unwrap();
        // v = |N| / sd, so v > q iff |N| > q sd
        let p = 2.0 * common::normal_sf(q * v.sd);
        let stderr = (1.0 - p).sqrt() / p / (s.len() as f64).sqrt();
        assert!(
            (s.mean - 1.0 / p).abs() < 3.0 * stderr,
            "q={q}: {} vs {} (se {stderr})",
            s.mean,
            1.0 / p
        );
    }
}

#[test]
fn threshold_search_matches_empirical_quantile() {
    let v = gen_iid_volatility(140_000, 12).unwrap();
    let found = threshold_for_mean(&v, 10.0, 0.05).unwrap();
    assert!((found.achieved - 10.0).abs() <= 0.05);
    let mut sorted = v.values.clone();
    sorted.sort_by(f64::total_cmp);
    let quantile = sorted[(0.9 * sorted.len() as f64) as usize];
    let above = v.values.iter().filter(|&&x| x > found.q).count() as f64 / v.len() as f64;
    assert!((above - 0.1).abs() < 0.001, "exceedance fraction {above}");
    assert!((found.q - quantile).abs() < 0.01, "{} vs {quantile}", found.q);
}

fn matrix_verdict(v: &NormVolSeries, raw_thresholds: &[f64]) -> Verdict {
    let samples: Vec<IntervalSample> = raw_thresholds
        .iter()
        .map(|h| extract_intervals(v, h / v.sd, true).unwrap())
        .collect();
    ks_matrix(&samples, CvCounts::Overlap).unwrap().verdict
}

#[test]
fn shuffling_restores_scaling_of_a_memory_series() {
    let v = gen_se_interval_volatility(200_000, 21, 0.3, 50.0).unwrap();
    // spikes are 4 + 4 Exp(1) in raw units, well clear of the |N| noise
    let raw = [4.5, 6.0, 8.0];
    assert_eq!(matrix_verdict(&v, &raw), Verdict::Multiscaling);
    assert_eq!(matrix_verdict(&shuffle_series(&v, 22), &raw), Verdict::Scaling);
}

#[test]
fn ess_alpha_agrees_with_direct_fit() {
    let v = gen_iid_volatility(140_000, 13).unwrap();
    let grid = interval_grid(&v, &q_grid(1.0, 5.0, 0.1), true).unwrap();
    for m in [0.25, 0.5, 1.5, 2.0] {
        let direct = fit_alpha(&grid.moment_curve(m).unwrap(), DEFAULT_REGION).unwrap();
        let ess = grid.ess_xi(m, 1.0, DEFAULT_REGION).unwrap();
        let band = 2.0 * (direct.stderr.powi(2) + ess.alpha_stderr.powi(2)).sqrt();
        assert!((direct.alpha - ess.alpha).abs() <= band.max(1e-12));
        assert!(ess.identity_residual.abs() < 1e-9);
        assert!((ess.xi / m - 1.0).abs() < 0.05, "m={m}: xi {}", ess.xi);
    }
}

#[test]
fn order_curves_pass_through_unity() {
    let v = gen_iid_volatility(140_000, 14).unwrap();
    let curves = moment_vs_order(&v, &[10.0, 30.0], &[0.5, 1.0, 2.0], 0.5, true).unwrap();
    assert_eq!(curves.len(), 2);
    for c in &curves {
        let at_one = c.empirical.iter().find(|p| p.0 == 1.0).unwrap().1;
        assert!((at_one - 1.0).abs() < 1e-12);
        assert!((c.mean_tau - c.target).abs() < 0.5 + 1e-9);
        assert!(!c.analytic.is_empty());
    }
    // the curves of a memoryless series collapse
    for k in 0..3 {
        let gap = (curves[0].empirical[k].1 - curves[1].empirical[k].1).abs();
        assert!(gap < 0.05, "order index {k}: gap {gap}");
    }
}

#[test]
fn tick_file_round_trip_recovers_volatility() {
    let v = gen_iid_volatility(2000, 15).unwrap();
    let cal = TradingCalendar::default();
    let start = NaiveDate::from_ymd_opt(2004, 3, 1).unwrap();
    let ms = to_minute_series(&v, &cal, start, 1500.0, 1e-3, 16).unwrap();
    let mut csv = Vec::new();
    write_minute_csv(&mut csv, &ms).unwrap();
    let parsed = parse_ticks(&csv[..], cal.tick_format()).unwrap();
    assert_eq!(parsed.skipped, 0);
    let back = sample_minutely(&parsed.records, &cal).unwrap();
    assert_eq!(back.days(), ms.days());
    let raw = compute_volatility(&back, true).unwrap();
    assert_eq!(raw.len(), v.len());
    for (r, x) in raw.values.iter().zip(&v.values) {
        // prices are written with shortest round-trip formatting
        assert!((r - 1e-3 * x).abs() < 1e-12);
    }
}
