use std::io;

use thiserror::Error;

use crate::semodel::SeModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by front ends to map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Statistical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("empty series: {0}")]
    EmptySeries(&'static str),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("degenerate intraday pattern: A(slot {slot}) = 0 with positive volatility")]
    DegeneratePattern { slot: usize },

    #[error("zero variance: series cannot be normalized")]
    ZeroVariance,

    #[error("insufficient events: {count} exceedance(s), at least 2 required")]
    InsufficientEvents { count: usize },

    #[error("CDF supports do not overlap")]
    NoOverlap,

    #[error("fit failed: {reason}")]
    FitFailure { reason: String, best: Option<SeModel> },

    #[error("numeric overflow at order {order}; largest safe order is about {max_safe}")]
    Overflow { order: f64, max_safe: f64 },

    #[error("target mean interval {target} unreachable; largest achievable is {max_achievable}")]
    UnreachableTarget { target: f64, max_achievable: f64 },

    #[error("insufficient points: {found} in fit region, at least {required} required")]
    InsufficientPoints { found: usize, required: usize },

    #[error("pair (q={q_i}, q={q_j}): {source}")]
    Pair {
        q_i: f64,
        q_j: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Config,
            Error::Io(_)
            | Error::Format(_)
            | Error::EmptySeries(_)
            | Error::DegeneratePattern { .. }
            | Error::ZeroVariance => ErrorKind::Data,
            Error::Pair { source, .. } => source.kind(),
            _ => ErrorKind::Statistical,
        }
    }
}
