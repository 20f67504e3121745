//! Tick parsing and nearest-tick resampling onto a per-minute trading grid.
//!
//! Ticks arrive as a CSV with header `timestamp,price`. Timestamps are either
//! epoch seconds (UTC) or ISO-8601; ISO values without a zone are read as
//! exchange-local wall time. Every in-session minute mark takes the price of
//! the tick closest to it within [`SAMPLE_WINDOW_SECS`], earlier tick on ties.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the search window around each minute mark, in seconds.
pub const SAMPLE_WINDOW_SECS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: f64,
    pub price: f64,
}

/// How to interpret timestamps that carry no zone information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickFormat {
    pub utc_offset_minutes: i32,
}

impl Default for TickFormat {
    fn default() -> Self {
        TickFormat {
            utc_offset_minutes: DEFAULT_UTC_OFFSET_MINUTES,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTicks {
    pub records: Vec<TickRecord>,
    pub skipped: usize,
}

/// Parse a `timestamp,price` CSV stream.
///
/// Malformed lines, non-positive prices and records that step backwards in
/// time are skipped and counted. More than half of the data lines being bad
/// is a format error.
pub fn parse_ticks<R: Read>(input: R, format: TickFormat) -> Result<ParsedTicks> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();

    let header = loop {
        match lines.next() {
            None => return Ok(ParsedTicks::default()),
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let columns: Vec<&str> = header
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(str::trim)
        .collect();
    if columns != ["timestamp", "price"] {
        return Err(Error::Format(format!(
            "expected header `timestamp,price`, found `{}`",
            header.trim()
        )));
    }

    let mut out = ParsedTicks::default();
    let mut last_ts = f64::NEG_INFINITY;
    let mut data_lines = 0usize;
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        data_lines += 1;
        match parse_tick_line(line, format) {
            Some(rec) if rec.timestamp >= last_ts => {
                last_ts = rec.timestamp;
                out.records.push(rec);
            }
            _ => out.skipped += 1,
        }
    }
    if data_lines > 0 && 2 * out.skipped > data_lines {
        return Err(Error::Format(format!(
            "{} of {} lines malformed",
            out.skipped, data_lines
        )));
    }
    Ok(out)
}

fn parse_tick_line(line: &str, format: TickFormat) -> Option<TickRecord> {
    let (ts, price) = line.split_once(',')?;
    let price: f64 = price.trim().parse().ok()?;
    if !(price.is_finite() && price > 0.0) {
        return None;
    }
    let timestamp = parse_timestamp(ts.trim(), format)?;
    Some(TickRecord { timestamp, price })
}

pub(crate) fn parse_timestamp(s: &str, format: TickFormat) -> Option<f64> {
    if let Ok(secs) = s.parse::<f64>() {
        return secs.is_finite().then_some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .ok()?;
    let utc = naive.and_utc();
    Some(
        utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
            - f64::from(format.utc_offset_minutes) * 60.0,
    )
}

/// China Standard Time.
pub const DEFAULT_UTC_OFFSET_MINUTES: i32 = 480;

/// A trading session `[open, close)` in minutes after local midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub open: u32,
    pub close: u32,
}

impl Session {
    pub fn minutes(&self) -> u32 {
        self.close - self.open
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TradingDays {
    /// Whatever local dates the ticks fall on.
    FromData,
    List(Vec<NaiveDate>),
    Range {
        start: NaiveDate,
        end: NaiveDate,
        weekdays: Vec<Weekday>,
        holidays: Vec<NaiveDate>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    sessions: Vec<Session>,
    pub days: TradingDays,
    pub utc_offset_minutes: i32,
}

impl Default for TradingCalendar {
    /// Two sessions, 09:30-11:30 and 13:00-15:00, UTC+8.
    fn default() -> Self {
        TradingCalendar {
            sessions: vec![
                Session {
                    open: 570,
                    close: 690,
                },
                Session {
                    open: 780,
                    close: 900,
                },
            ],
            days: TradingDays::FromData,
            utc_offset_minutes: DEFAULT_UTC_OFFSET_MINUTES,
        }
    }
}

impl TradingCalendar {
    pub fn new(sessions: Vec<Session>, days: TradingDays, utc_offset_minutes: i32) -> Result<Self> {
        if sessions.is_empty() {
            return Err(Error::Domain("calendar needs at least one session".into()));
        }
        let mut prev_close = 0;
        for s in &sessions {
            if s.open >= s.close || s.close > 24 * 60 || s.open < prev_close {
                return Err(Error::Domain(format!(
                    "sessions must be non-empty, ordered and disjoint (bad session {}-{})",
                    fmt_hhmm(s.open),
                    fmt_hhmm(s.close)
                )));
            }
            prev_close = s.close;
        }
        Ok(TradingCalendar {
            sessions,
            days,
            utc_offset_minutes,
        })
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn minutes_per_day(&self) -> usize {
        self.sessions.iter().map(|s| s.minutes() as usize).sum()
    }

    /// Minute marks (seconds after local midnight) at the end of each trading minute.
    pub fn slot_marks(&self) -> Vec<u32> {
        self.sessions
            .iter()
            .flat_map(|s| (s.open + 1..=s.close).map(|m| m * 60))
            .collect()
    }

    /// Slot indices at which a new session begins.
    pub fn session_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.sessions.len());
        let mut acc = 0;
        for s in &self.sessions {
            starts.push(acc);
            acc += s.minutes() as usize;
        }
        starts
    }

    pub fn tick_format(&self) -> TickFormat {
        TickFormat {
            utc_offset_minutes: self.utc_offset_minutes,
        }
    }

    fn local_date(&self, ts: f64) -> Option<NaiveDate> {
        let local = ts + f64::from(self.utc_offset_minutes) * 60.0;
        DateTime::from_timestamp(local.floor() as i64, 0).map(|dt| dt.date_naive())
    }

    /// UTC epoch seconds of local midnight on `day`.
    pub fn midnight_utc(&self, day: NaiveDate) -> f64 {
        let local = day.and_time(NaiveTime::MIN).and_utc().timestamp();
        (local - i64::from(self.utc_offset_minutes) * 60) as f64
    }

    fn resolve_days(&self, ticks: &[TickRecord]) -> Vec<NaiveDate> {
        match &self.days {
            TradingDays::FromData => ticks
                .iter()
                .filter_map(|t| self.local_date(t.timestamp))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            TradingDays::List(days) => days
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            TradingDays::Range {
                start,
                end,
                weekdays,
                holidays,
            } => start
                .iter_days()
                .take_while(|d| d <= end)
                .filter(|d| weekdays.contains(&d.weekday()) && !holidays.contains(d))
                .collect(),
        }
    }

    /// Parse the JSON calendar description.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CalendarFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("calendar: {e}")))?;
        raw.into_calendar()
    }

    pub fn to_json(&self) -> String {
        let file = CalendarFile::from_calendar(self);
        serde_json::to_string_pretty(&file).expect("calendar serializes")
    }
}

fn fmt_hhmm(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

fn parse_hhmm(s: &str) -> Result<u32> {
    let t = NaiveTime::parse_from_str(s, "%H:%M")
        .map_err(|_| Error::Format(format!("calendar: bad time `{s}`, expected HH:MM")))?;
    Ok(t.hour() * 60 + t.minute())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalendarFile {
    sessions: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    days: Option<Vec<NaiveDate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<RangeFile>,
    #[serde(default = "default_offset")]
    utc_offset_minutes: i32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeFile {
    start: NaiveDate,
    end: NaiveDate,
    #[serde(default = "default_weekdays")]
    weekdays: Vec<Weekday>,
    #[serde(default)]
    holidays: Vec<NaiveDate>,
}

fn default_offset() -> i32 {
    DEFAULT_UTC_OFFSET_MINUTES
}

fn default_weekdays() -> Vec<Weekday> {
    vec![
        Weekday::Mon,
        Weekday::Tue,
        Weekday::Wed,
        Weekday::Thu,
        Weekday::Fri,
    ]
}

impl CalendarFile {
    fn into_calendar(self) -> Result<TradingCalendar> {
        let sessions = self
            .sessions
            .iter()
            .map(|[open, close]| {
                Ok(Session {
                    open: parse_hhmm(open)?,
                    close: parse_hhmm(close)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let days = match (self.days, self.range) {
            (Some(_), Some(_)) => {
                return Err(Error::Format(
                    "calendar: give either `days` or `range`, not both".into(),
                ))
            }
            (Some(list), None) => TradingDays::List(list),
            (None, Some(r)) => {
                if r.end < r.start {
                    return Err(Error::Format("calendar: range end precedes start".into()));
                }
                TradingDays::Range {
                    start: r.start,
                    end: r.end,
                    weekdays: r.weekdays,
                    holidays: r.holidays,
                }
            }
            (None, None) => TradingDays::FromData,
        };
        TradingCalendar::new(sessions, days, self.utc_offset_minutes)
    }

    fn from_calendar(cal: &TradingCalendar) -> Self {
        let sessions = cal
            .sessions
            .iter()
            .map(|s| [fmt_hhmm(s.open), fmt_hhmm(s.close)])
            .collect();
        let (days, range) = match &cal.days {
            TradingDays::FromData => (None, None),
            TradingDays::List(d) => (Some(d.clone()), None),
            TradingDays::Range {
                start,
                end,
                weekdays,
                holidays,
            } => (
                None,
                Some(RangeFile {
                    start: *start,
                    end: *end,
                    weekdays: weekdays.clone(),
                    holidays: holidays.clone(),
                }),
            ),
        };
        CalendarFile {
            sessions,
            days,
            range,
            utc_offset_minutes: cal.utc_offset_minutes,
        }
    }
}

/// Per-minute prices on a trading-calendar grid, row-major by (day, slot).
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSeries {
    days: Vec<NaiveDate>,
    calendar: TradingCalendar,
    prices: Vec<Option<f64>>,
}

impl MinuteSeries {
    pub fn new(calendar: TradingCalendar, days: Vec<NaiveDate>, prices: Vec<Option<f64>>) -> Result<Self> {
        if prices.len() != days.len() * calendar.minutes_per_day() {
            return Err(Error::Domain(format!(
                "expected {} prices for {} days, got {}",
                days.len() * calendar.minutes_per_day(),
                days.len(),
                prices.len()
            )));
        }
        if prices.iter().flatten().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Domain("prices must be positive and finite".into()));
        }
        Ok(MinuteSeries {
            days,
            calendar,
            prices,
        })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn slots_per_day(&self) -> usize {
        self.calendar.minutes_per_day()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn price(&self, day: usize, slot: usize) -> Option<f64> {
        self.prices[day * self.slots_per_day() + slot]
    }

    pub fn prices(&self) -> &[Option<f64>] {
        &self.prices
    }

    /// Present prices as ticks stamped exactly on their minute marks.
    pub fn to_ticks(&self) -> Vec<TickRecord> {
        let marks = self.calendar.slot_marks();
        let spd = marks.len();
        let mut out = Vec::new();
        for (d, day) in self.days.iter().enumerate() {
            let midnight = self.calendar.midnight_utc(*day);
            for (s, mark) in marks.iter().enumerate() {
                if let Some(price) = self.prices[d * spd + s] {
                    out.push(TickRecord {
                        timestamp: midnight + f64::from(*mark),
                        price,
                    });
                }
            }
        }
        out
    }
}

/// Resample sorted ticks onto the calendar's minute marks.
///
/// Days without any sampled price are left out of the result.
pub fn sample_minutely(ticks: &[TickRecord], cal: &TradingCalendar) -> Result<MinuteSeries> {
    let marks = cal.slot_marks();
    let mut days = Vec::new();
    let mut prices = Vec::new();
    for day in cal.resolve_days(ticks) {
        let midnight = cal.midnight_utc(day);
        let row: Vec<Option<f64>> = marks
            .iter()
            .map(|m| nearest_tick(ticks, midnight + f64::from(*m)))
            .collect();
        if row.iter().any(Option::is_some) {
            days.push(day);
            prices.extend(row);
        }
    }
    if days.is_empty() {
        return Err(Error::EmptySeries("no ticks inside any trading session"));
    }
    Ok(MinuteSeries {
        days,
        calendar: cal.clone(),
        prices,
    })
}

fn nearest_tick(ticks: &[TickRecord], mark: f64) -> Option<f64> {
    let start = ticks.partition_point(|t| t.timestamp < mark - SAMPLE_WINDOW_SECS);
    let mut best: Option<(f64, f64)> = None;
    for t in ticks[start..]
        .iter()
        .take_while(|t| t.timestamp <= mark + SAMPLE_WINDOW_SECS)
    {
        let dist = (t.timestamp - mark).abs();
        // strict comparison keeps the earlier tick on ties
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, t.price));
        }
    }
    best.map(|(_, p)| p)
}
