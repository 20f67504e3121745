//! CSV and JSON table formats.
//!
//! Floats are written with Rust's shortest round-trip formatting so that
//! identical inputs give byte-identical files.

use std::io::{BufRead, BufReader, Read, Write};

use chrono::DateTime;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::MinuteSeries;
use crate::intervals::{empirical_cdf, IntervalSample, PdfTable};
use crate::kstest::KsMatrix;
use crate::moments::{AlphaFit, EssReport, MomentCurve};
use crate::semodel::FitReport;
use crate::volatility::{IntradayPattern, NormVolSeries};

pub fn write_volatility_csv<W: Write>(mut w: W, v: &NormVolSeries) -> Result<()> {
    writeln!(w, "day,slot,v")?;
    for ((d, s), x) in v.day.iter().zip(&v.slot).zip(&v.values) {
        writeln!(w, "{d},{s},{x}")?;
    }
    Ok(())
}

pub fn read_volatility_csv<R: Read>(r: R) -> Result<NormVolSeries> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "day,slot,v" {
        return Err(Error::Format("expected header `day,slot,v`".into()));
    }
    let (mut day, mut slot, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: `{line}`", i + 2));
        let mut parts = line.split(',').map(str::trim);
        let d: u32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let s: u32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let x: f64 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        day.push(d);
        slot.push(s);
        values.push(x);
    }
    if values.is_empty() {
        return Err(Error::EmptySeries("volatility file has no rows"));
    }
    NormVolSeries::from_parts(values, day, slot).map_err(|e| Error::Format(e.to_string()))
}

/// Minute prices as a tick file stamped on the minute marks (exchange-local time).
pub fn write_minute_csv<W: Write>(mut w: W, ms: &MinuteSeries) -> Result<()> {
    writeln!(w, "timestamp,price")?;
    let offset = i64::from(ms.calendar().utc_offset_minutes) * 60;
    for tick in ms.to_ticks() {
        let local = DateTime::from_timestamp(tick.timestamp as i64 + offset, 0)
            .ok_or_else(|| Error::Domain("timestamp out of range".into()))?
            .naive_utc();
        writeln!(w, "{},{}", local.format("%Y-%m-%dT%H:%M:%S"), tick.price)?;
    }
    Ok(())
}

/// JSON sidecar of the volatility stage.
#[derive(Debug, Serialize)]
pub struct VolatilitySidecar<'a> {
    pub sd: f64,
    pub n: usize,
    pub pattern: &'a IntradayPattern,
}

pub fn write_intervals_csv<W: Write>(mut w: W, samples: &[IntervalSample]) -> Result<()> {
    writeln!(w, "q,tau")?;
    for s in samples {
        for t in &s.intervals {
            writeln!(w, "{},{t}", s.q)?;
        }
    }
    Ok(())
}

pub fn write_pdf_csv<W: Write>(mut w: W, tables: &[PdfTable]) -> Result<()> {
    writeln!(w, "q,x,density,count")?;
    for t in tables {
        for b in &t.bins {
            writeln!(w, "{},{},{},{}", t.q, b.x, b.density, b.count)?;
        }
    }
    Ok(())
}

pub fn write_cdf_csv<W: Write>(mut w: W, samples: &[IntervalSample]) -> Result<()> {
    writeln!(w, "q,x,F")?;
    for s in samples {
        let cdf = empirical_cdf(s)?;
        for i in 0..cdf.x.len() {
            writeln!(w, "{},{},{}", s.q, cdf.x[i], cdf.prob(i))?;
        }
    }
    Ok(())
}

pub fn write_ks_matrix_csv<W: Write>(mut w: W, matrix: &KsMatrix) -> Result<()> {
    writeln!(w, "q_i,q_j,KS,CV,decision")?;
    for e in &matrix.entries {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.q_i, e.q_j, e.result.ks, e.result.cv, e.result.decision
        )?;
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(mut w: W, reports: &[FitReport]) -> Result<()> {
    writeln!(w, "q,c,a,gamma,p")?;
    for r in reports {
        let q = r.q.map(|q| q.to_string()).unwrap_or_default();
        writeln!(w, "{q},{},{},{},{}", r.c, r.a, r.gamma, r.p)?;
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

pub fn write_curves_csv<W: Write>(mut w: W, curves: &[MomentCurve]) -> Result<()> {
    writeln!(w, "m,mean_tau,mu")?;
    for c in curves {
        for p in &c.points {
            writeln!(w, "{},{},{}", c.m, p.mean_tau, p.mu)?;
        }
    }
    Ok(())
}

pub fn write_alpha_csv<W: Write>(mut w: W, fits: &[AlphaFit]) -> Result<()> {
    writeln!(w, "m,alpha,stderr")?;
    for f in fits {
        writeln!(w, "{},{},{}", f.m, f.alpha, f.stderr)?;
    }
    Ok(())
}

pub fn write_ess_csv<W: Write>(mut w: W, reports: &[EssReport]) -> Result<()> {
    writeln!(w, "m,n,xi,alpha")?;
    for r in reports {
        writeln!(w, "{},{},{},{}", r.m, r.n, r.xi, r.alpha)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kstest::{ks_matrix, CvCounts};
    use crate::semodel::FitMode;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn volatility_csv_round_trip() {
        let v = crate::synth::gen_iid_volatility(500, 1).unwrap();
        let csv = text(|b| write_volatility_csv(b, &v));
        let back = read_volatility_csv(csv.as_bytes()).unwrap();
        assert_eq!(back.values, v.values);
        assert_eq!(back.day, v.day);
        assert!(read_volatility_csv("a,b\n".as_bytes()).is_err());
        assert!(read_volatility_csv("day,slot,v\n1,2,x\n".as_bytes()).is_err());
    }

    #[test]
    fn ks_matrix_layout() {
        let samples: Vec<IntervalSample> = [2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&q| IntervalSample::new(q, vec![1, 3, 4, 9], 100).unwrap())
            .collect();
        let m = ks_matrix(&samples, CvCounts::Overlap).unwrap();
        let csv = text(|b| write_ks_matrix_csv(b, &m));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "q_i,q_j,KS,CV,decision");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("2,3,0,"));
        assert!(lines[6].starts_with("4,5,"));
    }

    #[test]
    fn fit_table_fields() {
        let r = FitReport {
            q: Some(5.0),
            mode: FitMode::Mle,
            c: 1.05,
            a: 14.19,
            gamma: 0.35,
            n: 1200,
            ks: 0.01,
            p: 0.74,
            n_boot: 1000,
            seed: 1,
            n_failed: 0,
        };
        let csv = text(|b| write_fit_csv(b, std::slice::from_ref(&r)));
        assert_eq!(csv, "q,c,a,gamma,p\n5,1.05,14.19,0.35,0.74\n");
        let json: serde_json::Value = serde_json::from_str(&text(|b| write_json(b, &r))).unwrap();
        for key in ["q", "mode", "c", "a", "gamma", "n", "ks", "p", "n_boot", "seed"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["mode"], "mle");
    }
}
