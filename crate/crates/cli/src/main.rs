use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use volint_cli::pipeline::{Status, EXIT_CONFIG};
use volint_cli::{run_analyze, validate_config, Pipeline, RunConfig, StageError};
use volint_core::report::{write_minute_csv, write_volatility_csv};
use volint_core::synth::{to_minute_series, SynthKind, SynthSpec};
use volint_core::{Error, TradingCalendar};

#[derive(Parser)]
#[command(
    name = "volint",
    version,
    about = "Return-interval analysis of volatility series"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic volatility series, optionally as a tick file.
    Synth(SynthArgs),
    /// Ingest ticks and write the normalized volatility series.
    Volatility(ConfigArgs),
    /// Return intervals, scaled PDFs and CDFs per threshold.
    Intervals(ConfigArgs),
    /// Pairwise two-sample KS tests between thresholds.
    KsMatrix(ConfigArgs),
    /// Stretched-exponential fits with bootstrap p-values.
    Fit(ConfigArgs),
    /// Moment curves, power-law exponents and ESS fits.
    Moments(ConfigArgs),
    /// Every stage plus a summary report.
    Analyze(ConfigArgs),
}

/// Flags mirror the config keys and override the config file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON config file with flat keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tick file; repeat for several.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    volatility: Option<PathBuf>,
    #[arg(long)]
    calendar: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    q_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q_step: Option<f64>,
    #[arg(long)]
    bins_per_decade: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    region_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    region_hi: Option<f64>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `mle` or `lsq`.
    #[arg(long)]
    fit_mode: Option<String>,
    #[arg(long)]
    drop_overnight: Option<bool>,
    #[arg(long)]
    cross_day: Option<bool>,
    #[arg(long)]
    refit: Option<bool>,
    #[arg(long)]
    overlap_cv: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    moment_orders: Option<Vec<f64>>,
    #[arg(long)]
    ess_n: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    order_targets: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    order_grid: Option<Vec<f64>>,
    #[arg(long)]
    order_tol: Option<f64>,
}

impl ConfigArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("inputs", (!self.inputs.is_empty()).then(|| json!(self.inputs)));
        put("volatility", self.volatility.as_ref().map(|v| json!(v)));
        put("calendar", self.calendar.as_ref().map(|v| json!(v)));
        put("output_dir", self.output_dir.as_ref().map(|v| json!(v)));
        put("thresholds", self.thresholds.as_ref().map(|v| json!(v)));
        put("q_min", self.q_min.map(|v| json!(v)));
        put("q_max", self.q_max.map(|v| json!(v)));
        put("q_step", self.q_step.map(|v| json!(v)));
        put("bins_per_decade", self.bins_per_decade.map(|v| json!(v)));
        put("region_lo", self.region_lo.map(|v| json!(v)));
        put("region_hi", self.region_hi.map(|v| json!(v)));
        put("n_boot", self.n_boot.map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("fit_mode", self.fit_mode.as_ref().map(|v| json!(v)));
        put("drop_overnight", self.drop_overnight.map(|v| json!(v)));
        put("cross_day", self.cross_day.map(|v| json!(v)));
        put("refit", self.refit.map(|v| json!(v)));
        put("overlap_cv", self.overlap_cv.map(|v| json!(v)));
        put("moment_orders", self.moment_orders.as_ref().map(|v| json!(v)));
        put("ess_n", self.ess_n.map(|v| json!(v)));
        put("order_targets", self.order_targets.as_ref().map(|v| json!(v)));
        put("order_grid", self.order_grid.as_ref().map(|v| json!(v)));
        put("order_tol", self.order_tol.map(|v| json!(v)));
        m
    }

    fn resolve(&self) -> Result<RunConfig, StageError> {
        let mut raw = match &self.config {
            None => Map::new(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| StageError::config(format!("config {}: {e}", path.display())))?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(StageError::config("config must be a JSON object")),
                    Err(e) => return Err(StageError::config(format!("config {}: {e}", path.display()))),
                }
            }
        };
        raw.extend(self.overrides());
        validate_config(&Value::Object(raw)).map_err(|e| StageError::config(e.to_string()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Iid,
    Se,
    Shuffle,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "iid")]
    kind: Kind,
    #[arg(long, default_value_t = 140_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stretching exponent of the spike gaps (`se`).
    #[arg(long, default_value_t = 0.3)]
    gamma: f64,
    /// Mean spike gap in minutes (`se`).
    #[arg(long, default_value_t = 50.0)]
    mean_gap: f64,
    /// Volatility file to permute (`shuffle`).
    #[arg(long)]
    from: Option<PathBuf>,
    /// Output `day,slot,v` file.
    #[arg(long)]
    out: PathBuf,
    /// Also lay the series onto a calendar and write a tick file.
    #[arg(long)]
    ticks: Option<PathBuf>,
    #[arg(long)]
    calendar: Option<PathBuf>,
    #[arg(long, default_value = "2004-01-02")]
    start: NaiveDate,
    #[arg(long, default_value_t = 1000.0)]
    base_price: f64,
    /// Log-price move per unit of volatility.
    #[arg(long, default_value_t = 1e-3)]
    scale: f64,
}

fn write_file<F>(path: &PathBuf, body: F) -> Result<(), StageError>
where
    F: FnOnce(&mut BufWriter<File>) -> volint_core::Result<()>,
{
    let file = File::create(path).map_err(|e| StageError::from_core(volint_cli::Stage::Report, e.into()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| StageError::from_core(volint_cli::Stage::Report, e))
}

fn synth(args: &SynthArgs) -> Result<(), StageError> {
    let kind = match args.kind {
        Kind::Iid => SynthKind::IidGaussianAbs,
        Kind::Se => SynthKind::SeIntervals {
            gamma: args.gamma,
            mean_gap: args.mean_gap,
        },
        Kind::Shuffle => SynthKind::ShuffledFromFile {
            path: args
                .from
                .clone()
                .ok_or_else(|| StageError::config("--kind shuffle needs --from"))?,
        },
    };
    let spec = SynthSpec {
        kind,
        n: args.n,
        seed: args.seed,
    };
    let stage = volint_cli::Stage::Volatility;
    let v = spec.generate().map_err(|e| StageError::from_core(stage, e))?;
    write_file(&args.out, |w| write_volatility_csv(w, &v))?;
    if let Some(ticks) = &args.ticks {
        let cal = match &args.calendar {
            None => TradingCalendar::default(),
            Some(p) => fs::read_to_string(p)
                .map_err(Error::from)
                .and_then(|t| TradingCalendar::from_json(&t))
                .map_err(|e| StageError::config(format!("calendar {}: {e}", p.display())))?,
        };
        let price_seed = volint_core::seed::derive_seed(args.seed, "synth/prices");
        let ms = to_minute_series(&v, &cal, args.start, args.base_price, args.scale, price_seed)
            .map_err(|e| StageError::from_core(stage, e))?;
        write_file(ticks, |w| write_minute_csv(w, &ms))?;
    }
    println!("wrote {} values to {}", v.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), StageError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(StageError::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| StageError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(args) => synth(&args),
        Command::Analyze(args) => {
            let cfg = args.resolve()?;
            let summary = run_analyze(&cfg)?;
            debug_assert_eq!(summary.status, Status::Complete);
            let verdict = summary.verdict.map(|v| v.to_string()).unwrap_or_default();
            println!("verdict: {verdict}");
            println!("summary: {}", cfg.output_dir.join("summary.json").display());
            Ok(())
        }
        Command::Volatility(args) => {
            let cfg = args.resolve()?;
            let loaded = Pipeline::new(&cfg)?.load()?;
            println!(
                "{} volatility values (sd {})",
                loaded.series.len(),
                loaded.series.sd
            );
            Ok(())
        }
        Command::Intervals(args) => {
            let cfg = args.resolve()?;
            let mut p = Pipeline::new(&cfg)?;
            let loaded = p.load()?;
            for s in p.intervals(&loaded.series)? {
                println!("q={} intervals={} mean_tau={}", s.q, s.len(), s.mean);
            }
            Ok(())
        }
        Command::KsMatrix(args) => {
            let cfg = args.resolve()?;
            let mut p = Pipeline::new(&cfg)?;
            let loaded = p.load()?;
            let samples = p.intervals(&loaded.series)?;
            let matrix = p.ks_matrix(&samples)?;
            for e in &matrix.entries {
                println!(
                    "q={} vs q={}: KS={} CV={} {}",
                    e.q_i, e.q_j, e.result.ks, e.result.cv, e.result.decision
                );
            }
            println!("verdict: {}", matrix.verdict);
            Ok(())
        }
        Command::Fit(args) => {
            let cfg = args.resolve()?;
            let mut p = Pipeline::new(&cfg)?;
            let loaded = p.load()?;
            let samples = p.intervals(&loaded.series)?;
            for r in p.fits(&samples)? {
                let q = r.q.unwrap_or(f64::NAN);
                println!("q={q} c={} a={} gamma={} p={}", r.c, r.a, r.gamma, r.p);
            }
            Ok(())
        }
        Command::Moments(args) => {
            let cfg = args.resolve()?;
            let mut p = Pipeline::new(&cfg)?;
            let loaded = p.load()?;
            let out = p.moments(&loaded.series)?;
            for (a, e) in out.alpha.iter().zip(&out.ess) {
                println!("m={} alpha={} xi={}", a.m, a.alpha, e.xi);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.exit_code == 0 {
                EXIT_CONFIG
            } else {
                e.exit_code
            })
        }
    }
}
