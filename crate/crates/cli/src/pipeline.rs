//! Stage runners shared by the subcommands, and the end-to-end `analyze` run.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use volint_core::ingest::{parse_ticks, sample_minutely};
use volint_core::intervals::{extract_intervals, scaled_pdf};
use volint_core::kstest::{bootstrap_pvalue, ks_matrix, KsEntry, Verdict};
use volint_core::moments::{fit_alpha, interval_grid, moment_vs_order, AlphaFit, OrderCurve};
use volint_core::report::{self, VolatilitySidecar};
use volint_core::seed::derive_seed;
use volint_core::semodel::{fit_lsq, fit_mle};
use volint_core::volatility::preprocess;
use volint_core::{
    Error, ErrorKind, EssReport, FitMode, FitReport, IntervalSample, KsMatrix, MomentCurve, NormVolSeries,
    TradingCalendar,
};

use crate::config::RunConfig;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_STATISTICAL: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Volatility,
    Intervals,
    KsMatrix,
    Fit,
    Moments,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("unit variant");
        f.write_str(name.as_str().expect("string"))
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub exit_code: u8,
    pub message: String,
}

impl StageError {
    pub fn config(message: impl Into<String>) -> Self {
        StageError {
            stage: Stage::Config,
            exit_code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn from_core(stage: Stage, e: Error) -> Self {
        let exit_code = match e.kind() {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Statistical => EXIT_STATISTICAL,
        };
        StageError {
            stage,
            exit_code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn at(stage: Stage) -> impl Fn(Error) -> StageError {
    move |e| StageError::from_core(stage, e)
}

/// Volatility ready for interval analysis.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub series: NormVolSeries,
    pub ticks_skipped: Option<usize>,
    pub days: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub n_volatility: usize,
    pub sd: f64,
    pub days: Option<usize>,
    pub ticks_skipped: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub q: f64,
    pub intervals: usize,
    pub mean_tau: f64,
}

#[derive(Debug, Clone)]
pub struct MomentsOutput {
    pub curves: Vec<MomentCurve>,
    pub alpha: Vec<AlphaFit>,
    pub ess: Vec<EssReport>,
    pub order: Vec<OrderCurve>,
}

/// Writes artifacts into the output directory and remembers their names.
pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    artifacts: Vec<String>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, StageError> {
        fs::create_dir_all(&cfg.output_dir).map_err(|e| {
            StageError::config(format!(
                "cannot create output dir {}: {e}",
                cfg.output_dir.display()
            ))
        })?;
        Ok(Pipeline {
            cfg,
            out: cfg.output_dir.clone(),
            artifacts: Vec::new(),
        })
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn write<F>(&mut self, stage: Stage, name: &str, body: F) -> Result<(), StageError>
    where
        F: FnOnce(&mut BufWriter<File>) -> volint_core::Result<()>,
    {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| StageError::from_core(stage, e.into()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush().map_err(Error::from))
            .map_err(at(stage))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn calendar(&self) -> Result<TradingCalendar, StageError> {
        match &self.cfg.calendar {
            None => Ok(TradingCalendar::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| StageError::config(format!("calendar {}: {e}", path.display())))?;
                TradingCalendar::from_json(&text)
                    .map_err(|e| StageError::config(format!("calendar {}: {e}", path.display())))
            }
        }
    }

    /// Ingest ticks (or read a volatility file) and write the volatility artifacts.
    pub fn load(&mut self) -> Result<Loaded, StageError> {
        let cfg = self.cfg;
        if let Some(path) = &cfg.volatility {
            let file = File::open(path).map_err(|e| StageError::from_core(Stage::Ingest, e.into()))?;
            let series = report::read_volatility_csv(file).map_err(at(Stage::Ingest))?;
            self.write(Stage::Volatility, "volatility.csv", |w| {
                report::write_volatility_csv(w, &series)
            })?;
            return Ok(Loaded {
                series,
                ticks_skipped: None,
                days: None,
            });
        }
        if cfg.inputs.is_empty() {
            return Err(StageError::config("no input data: set `inputs` or `volatility`"));
        }
        let cal = self.calendar()?;
        let mut records = Vec::new();
        let mut skipped = 0;
        for path in &cfg.inputs {
            let file = File::open(path).map_err(|e| {
                StageError::from_core(Stage::Ingest, Error::Format(format!("{}: {e}", path.display())))
            })?;
            let parsed = parse_ticks(file, cal.tick_format()).map_err(at(Stage::Ingest))?;
            skipped += parsed.skipped;
            records.extend(parsed.records);
        }
        records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let minutes = sample_minutely(&records, &cal).map_err(at(Stage::Ingest))?;
        let (series, pattern) = preprocess(&minutes, cfg.drop_overnight).map_err(at(Stage::Volatility))?;
        self.write(Stage::Volatility, "volatility.csv", |w| {
            report::write_volatility_csv(w, &series)
        })?;
        let sidecar = VolatilitySidecar {
            sd: series.sd,
            n: series.len(),
            pattern: &pattern,
        };
        self.write(Stage::Volatility, "volatility.json", |w| {
            report::write_json(w, &sidecar)
        })?;
        Ok(Loaded {
            series,
            ticks_skipped: Some(skipped),
            days: Some(minutes.days().len()),
        })
    }

    pub fn intervals(&mut self, v: &NormVolSeries) -> Result<Vec<IntervalSample>, StageError> {
        let cfg = self.cfg;
        let samples = cfg
            .thresholds
            .iter()
            .map(|&q| extract_intervals(v, q, cfg.cross_day))
            .collect::<volint_core::Result<Vec<_>>>()
            .map_err(at(Stage::Intervals))?;
        let pdfs = samples
            .iter()
            .map(|s| scaled_pdf(s, cfg.bins_per_decade))
            .collect::<volint_core::Result<Vec<_>>>()
            .map_err(at(Stage::Intervals))?;
        self.write(Stage::Intervals, "intervals.csv", |w| {
            report::write_intervals_csv(w, &samples)
        })?;
        self.write(Stage::Intervals, "pdf.csv", |w| report::write_pdf_csv(w, &pdfs))?;
        self.write(Stage::Intervals, "cdf.csv", |w| {
            report::write_cdf_csv(w, &samples)
        })?;
        Ok(samples)
    }

    pub fn ks_matrix(&mut self, samples: &[IntervalSample]) -> Result<KsMatrix, StageError> {
        let matrix = ks_matrix(samples, self.cfg.cv_counts()).map_err(at(Stage::KsMatrix))?;
        self.write(Stage::KsMatrix, "ks_matrix.csv", |w| {
            report::write_ks_matrix_csv(w, &matrix)
        })?;
        Ok(matrix)
    }

    /// Fit every threshold and attach a bootstrap p-value.
    pub fn fits(&mut self, samples: &[IntervalSample]) -> Result<Vec<FitReport>, StageError> {
        let cfg = self.cfg;
        let mut reports = Vec::with_capacity(samples.len());
        for s in samples {
            let x = s.scaled();
            let model = match cfg.fit_mode {
                FitMode::Mle => fit_mle(&x),
                FitMode::Lsq => scaled_pdf(s, cfg.bins_per_decade).and_then(|t| fit_lsq(&t)),
            }
            .map_err(|e| StageError::from_core(Stage::Fit, e))
            .map_err(|e| StageError {
                message: format!("q = {}: {}", s.q, e.message),
                ..e
            })?;
            let seed = derive_seed(cfg.seed, &format!("bootstrap/q={}", s.q));
            let mut r = bootstrap_pvalue(&x, &model, cfg.n_boot, seed, cfg.refit).map_err(at(Stage::Fit))?;
            r.q = Some(s.q);
            reports.push(r);
        }
        self.write(Stage::Fit, "fits.csv", |w| report::write_fit_csv(w, &reports))?;
        self.write(Stage::Fit, "fits.json", |w| report::write_json(w, &reports))?;
        Ok(reports)
    }

    pub fn moments(&mut self, v: &NormVolSeries) -> Result<MomentsOutput, StageError> {
        let cfg = self.cfg;
        let region = cfg.region();
        let grid = interval_grid(v, &cfg.q_grid(), cfg.cross_day).map_err(at(Stage::Moments))?;
        let curves = cfg
            .moment_orders
            .iter()
            .map(|&m| grid.moment_curve(m))
            .collect::<volint_core::Result<Vec<_>>>()
            .map_err(at(Stage::Moments))?;
        self.write(Stage::Moments, "moment_curves.csv", |w| {
            report::write_curves_csv(w, &curves)
        })?;
        let alpha = curves
            .iter()
            .map(|c| fit_alpha(c, region))
            .collect::<volint_core::Result<Vec<_>>>()
            .map_err(at(Stage::Moments))?;
        self.write(Stage::Moments, "alpha.csv", |w| {
            report::write_alpha_csv(w, &alpha)
        })?;
        let ess = cfg
            .moment_orders
            .iter()
            .map(|&m| grid.ess_xi(m, cfg.ess_n, region))
            .collect::<volint_core::Result<Vec<_>>>()
            .map_err(at(Stage::Moments))?;
        self.write(Stage::Moments, "ess.csv", |w| report::write_ess_csv(w, &ess))?;
        let order = if cfg.order_targets.is_empty() {
            Vec::new()
        } else {
            let order = moment_vs_order(
                v,
                &cfg.order_targets,
                &cfg.order_grid,
                cfg.order_tol,
                cfg.cross_day,
            )
            .map_err(at(Stage::Moments))?;
            self.write(Stage::Moments, "moment_order.json", |w| {
                report::write_json(w, &order)
            })?;
            order
        };
        Ok(MomentsOutput {
            curves,
            alpha,
            ess,
            order,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Failed,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub status: Status,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub exit_code: u8,
    /// The run configuration without `output_dir`.
    pub config: Value,
    pub input: Option<InputSummary>,
    pub thresholds: Vec<ThresholdSummary>,
    pub verdict: Option<Verdict>,
    pub ks_pairs: Vec<KsEntry>,
    pub fits: Vec<FitReport>,
    pub alpha: Vec<AlphaFit>,
    pub ess: Vec<EssReport>,
    /// Files written to the output directory, in order. On failure these
    /// are the partial results of the stages that completed.
    pub artifacts: Vec<String>,
}

impl Summary {
    fn new(cfg: &RunConfig) -> Self {
        let mut config = serde_json::to_value(cfg).expect("config serializes");
        if let Value::Object(map) = &mut config {
            map.remove("output_dir");
        }
        Summary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            status: Status::Complete,
            failed_stage: None,
            error: None,
            exit_code: 0,
            config,
            input: None,
            thresholds: Vec::new(),
            verdict: None,
            ks_pairs: Vec::new(),
            fits: Vec::new(),
            alpha: Vec::new(),
            ess: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

fn analyze_stages(p: &mut Pipeline<'_>, summary: &mut Summary) -> Result<(), StageError> {
    let loaded = p.load()?;
    summary.input = Some(InputSummary {
        n_volatility: loaded.series.len(),
        sd: loaded.series.sd,
        days: loaded.days,
        ticks_skipped: loaded.ticks_skipped,
    });
    let samples = p.intervals(&loaded.series)?;
    summary.thresholds = samples
        .iter()
        .map(|s| ThresholdSummary {
            q: s.q,
            intervals: s.len(),
            mean_tau: s.mean,
        })
        .collect();
    let matrix = p.ks_matrix(&samples)?;
    summary.verdict = Some(matrix.verdict);
    summary.ks_pairs = matrix.entries;
    summary.fits = p.fits(&samples)?;
    let moments = p.moments(&loaded.series)?;
    summary.alpha = moments.alpha;
    summary.ess = moments.ess;
    Ok(())
}

/// Run every stage and write `summary.json`.
///
/// The summary is written on failure too, with the failed stage and the
/// artifacts that were completed before it.
pub fn run_analyze(cfg: &RunConfig) -> Result<Summary, StageError> {
    let mut p = Pipeline::new(cfg)?;
    let mut summary = Summary::new(cfg);
    let result = analyze_stages(&mut p, &mut summary);
    if let Err(e) = &result {
        summary.status = Status::Failed;
        summary.failed_stage = Some(e.stage);
        summary.error = Some(e.message.clone());
        summary.exit_code = e.exit_code;
    }
    summary.artifacts = p.artifacts().to_vec();
    summary.artifacts.push("summary.json".into());
    let path = p.output_dir().join("summary.json");
    let written = File::create(&path)
        .map_err(Error::from)
        .and_then(|f| {
            let mut w = BufWriter::new(f);
            report::write_json(&mut w, &summary)?;
            w.flush().map_err(Error::from)
        })
        .map_err(at(Stage::Report));
    result?;
    written?;
    Ok(summary)
}
