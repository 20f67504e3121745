//! Run configuration: a flat JSON object whose keys mirror [`RunConfig`].

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use volint_core::kstest::{CvCounts, MIN_BOOTSTRAP};
use volint_core::moments::{q_grid, Region};
use volint_core::FitMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Tick files (`timestamp,price`), merged in time order.
    pub inputs: Vec<PathBuf>,
    /// A `day,slot,v` volatility file used instead of tick inputs.
    pub volatility: Option<PathBuf>,
    /// Trading calendar JSON; the built-in two-session calendar when absent.
    pub calendar: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub thresholds: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub bins_per_decade: u32,
    pub region_lo: f64,
    pub region_hi: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub fit_mode: FitMode,
    pub drop_overnight: bool,
    pub cross_day: bool,
    pub refit: bool,
    /// Count only points inside the overlap region for the KS critical value.
    pub overlap_cv: bool,
    pub moment_orders: Vec<f64>,
    /// Reference order of the ESS fits.
    pub ess_n: f64,
    /// Mean intervals at which moments are reported against order.
    pub order_targets: Vec<f64>,
    pub order_grid: Vec<f64>,
    pub order_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            volatility: None,
            calendar: None,
            output_dir: PathBuf::from("out"),
            thresholds: vec![2.0, 3.0, 4.0, 5.0],
            q_min: 1.0,
            q_max: 5.0,
            q_step: 0.1,
            bins_per_decade: 20,
            region_lo: 10.0,
            region_hi: 100.0,
            n_boot: 1000,
            seed: 20_080_101,
            fit_mode: FitMode::Mle,
            drop_overnight: true,
            cross_day: true,
            refit: false,
            overlap_cv: true,
            moment_orders: vec![0.25, 0.5, 1.5, 2.0],
            ess_n: 1.0,
            order_targets: vec![10.0, 30.0, 100.0],
            order_grid: (1..=12).map(|k| 0.25 * k as f64).collect(),
            order_tol: 0.5,
        }
    }
}

impl RunConfig {
    pub fn q_grid(&self) -> Vec<f64> {
        q_grid(self.q_min, self.q_max, self.q_step)
    }

    pub fn region(&self) -> Region {
        Region {
            lo: self.region_lo,
            hi: self.region_hi,
        }
    }

    pub fn cv_counts(&self) -> CvCounts {
        if self.overlap_cv {
            CvCounts::Overlap
        } else {
            CvCounts::Whole
        }
    }
}

/// One violation, keyed by the offending field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn issue(field: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        field: field.into(),
        message: message.into(),
    }
}

/// Fill defaults into a raw JSON config and check every field.
///
/// Each key is decoded on its own so that a type error in one field does
/// not hide problems in the others.
pub fn validate_config(raw: &Value) -> Result<RunConfig, ConfigErrors> {
    let obj = match raw {
        Value::Object(map) => map.clone(),
        Value::Null => Map::new(),
        _ => return Err(ConfigErrors(vec![issue("$", "config must be a JSON object")])),
    };
    let defaults = match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("RunConfig serializes to an object"),
    };
    let mut issues = Vec::new();
    let mut merged = defaults.clone();
    let mut keys: Vec<&String> = obj.keys().collect();
    keys.sort();
    for key in keys {
        if !defaults.contains_key(key) {
            issues.push(issue(key.as_str(), "unknown field"));
            continue;
        }
        let mut probe = defaults.clone();
        probe.insert(key.clone(), obj[key].clone());
        match serde_json::from_value::<RunConfig>(Value::Object(probe)) {
            Ok(_) => {
                merged.insert(key.clone(), obj[key].clone());
            }
            Err(e) => issues.push(issue(key.as_str(), format!("invalid value: {e}"))),
        }
    }
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).expect("every merged field decoded on its own");
    issues.extend(check_ranges(&config));
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(issues))
    }
}

fn positive_list(field: &str, values: &[f64], min: f64, issues: &mut Vec<ConfigIssue>) {
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v >= min && v > 0.0) {
            let bound = if min > 0.0 {
                format!("≥ {min}")
            } else {
                "> 0".into()
            };
            issues.push(issue(
                format!("{field}[{i}]"),
                format!("expected {field} {bound}, got {v}"),
            ));
        }
    }
}

fn check_ranges(c: &RunConfig) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    if !c.inputs.is_empty() && c.volatility.is_some() {
        out.push(issue(
            "volatility",
            "set either `inputs` or `volatility`, not both",
        ));
    }
    if c.thresholds.len() < 2 {
        out.push(issue(
            "thresholds",
            "at least 2 thresholds are required for the KS matrix",
        ));
    }
    positive_list("thresholds", &c.thresholds, 0.0, &mut out);
    let mut sorted = c.thresholds.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        out.push(issue("thresholds", "thresholds must be distinct"));
    }
    if !(c.q_min.is_finite() && c.q_min > 0.0) {
        out.push(issue("q_min", format!("expected q_min > 0, got {}", c.q_min)));
    }
    if !(c.q_step.is_finite() && c.q_step > 0.0) {
        out.push(issue("q_step", format!("expected q_step > 0, got {}", c.q_step)));
    }
    if !(c.q_max.is_finite() && c.q_max > c.q_min) {
        out.push(issue("q_max", format!("expected q_max > q_min, got {}", c.q_max)));
    } else if c.q_step > 0.0 && (c.q_max - c.q_min) / c.q_step > 100_000.0 {
        out.push(issue("q_step", "q grid would exceed 100000 points"));
    }
    if !(1..=1000).contains(&c.bins_per_decade) {
        out.push(issue(
            "bins_per_decade",
            format!("expected 1 ≤ bins_per_decade ≤ 1000, got {}", c.bins_per_decade),
        ));
    }
    if !(c.region_lo.is_finite() && c.region_lo >= 1.0) {
        out.push(issue(
            "region_lo",
            format!("expected region_lo ≥ 1, got {}", c.region_lo),
        ));
    }
    if !(c.region_hi.is_finite() && c.region_hi > c.region_lo) {
        out.push(issue(
            "region_hi",
            format!("expected region_hi > region_lo, got {}", c.region_hi),
        ));
    }
    if c.n_boot < MIN_BOOTSTRAP {
        out.push(issue(
            "n_boot",
            format!("expected n_boot ≥ {MIN_BOOTSTRAP}, got {}", c.n_boot),
        ));
    }
    if c.moment_orders.is_empty() {
        out.push(issue("moment_orders", "at least one order is required"));
    }
    positive_list("moment_orders", &c.moment_orders, 0.0, &mut out);
    if !(c.ess_n.is_finite() && c.ess_n > 0.0) {
        out.push(issue("ess_n", format!("expected ess_n > 0, got {}", c.ess_n)));
    }
    positive_list("order_targets", &c.order_targets, 1.0, &mut out);
    positive_list("order_grid", &c.order_grid, 0.0, &mut out);
    if !c.order_targets.is_empty() && c.order_grid.is_empty() {
        out.push(issue(
            "order_grid",
            "at least one order is required when order_targets is set",
        ));
    }
    if !(c.order_tol.is_finite() && c.order_tol >= 0.0) {
        out.push(issue(
            "order_tol",
            format!("expected order_tol ≥ 0, got {}", c.order_tol),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn empty_config_is_fully_defaulted() {
        assert_eq!(validate_config(&json!({})).unwrap(), RunConfig::default());
        assert_eq!(validate_config(&Value::Null).unwrap(), RunConfig::default());
    }

    #[test]
    fn small_bootstrap_is_rejected() {
        let errs = validate_config(&json!({"n_boot": 50})).unwrap_err();
        assert_eq!(errs.0.len(), 1);
        assert_eq!(errs.0[0].field, "n_boot");
        assert!(errs.0[0].message.contains("n_boot ≥ 100"));
    }

    #[test]
    fn negative_threshold_names_the_field() {
        let errs = validate_config(&json!({"thresholds": [2, -3]})).unwrap_err();
        assert_eq!(errs.0[0].field, "thresholds[1]");
    }

    #[test]
    fn errors_are_aggregated() {
        let errs = validate_config(&json!({
            "n_boot": 10,
            "seed": "abc",
            "bogus": 1,
            "region_lo": 50,
            "region_hi": 20,
            "fit_mode": "ols"
        }))
        .unwrap_err();
        let fields: Vec<&str> = errs.0.iter().map(|i| i.field.as_str()).collect();
        for f in ["n_boot", "seed", "bogus", "region_hi", "fit_mode"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn round_trip_is_stable() {
        let c = validate_config(&json!({"thresholds": [2.5, 3.5], "fit_mode": "lsq", "seed": 9})).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = validate_config(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn grid_and_region_follow_fields() {
        let c = RunConfig::default();
        let g = c.q_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[10], 2.0);
        assert!(c.region().contains(10.0) && c.region().contains(100.0));
    }
}
