//! Volatility return-interval analysis.
//!
//! The pipeline runs tick prices through minute resampling ([`ingest`]),
//! deseasonalized and normalized volatility ([`volatility`]), threshold
//! exceedance intervals ([`intervals`]), stretched-exponential modelling
//! ([`semodel`]), Kolmogorov-Smirnov scaling and goodness-of-fit tests
//! ([`kstest`]) and moment / extended self-similarity diagnostics
//! ([`moments`]). [`synth`] provides ground-truth generators and [`report`]
//! the CSV/JSON table formats.

pub mod error;
pub mod ingest;
pub mod intervals;
pub mod kstest;
pub mod moments;
mod optimize;
pub mod report;
pub mod seed;
pub mod semodel;
pub mod synth;
pub mod volatility;

pub use error::{Error, ErrorKind, Result};
pub use ingest::{MinuteSeries, TickRecord, TradingCalendar};
pub use intervals::{CdfTable, IntervalSample, PdfTable};
pub use kstest::{KsMatrix, KsResult};
pub use moments::{EssReport, MomentCurve};
pub use semodel::{FitMode, FitReport, SeModel};
pub use volatility::{IntradayPattern, NormVolSeries, VolSeries};
