//! Per-field metric reports and their CSV forms.
//!
//! Report CSV: `id,method,rmse,csi10,csi15,critic_score,critic_diff`, one row
//! per field, then one row with `method=AGGREGATE` holding the means.
//! Undefined values are empty cells. Spectrum CSV: `bin,mean_logpower,sigma`.

use std::io::{BufRead, Write};

use super::spectrum::SpectrumCurve;
use crate::error::{Error, Result};

pub const AGGREGATE_TAG: &str = "AGGREGATE";
const HEADER: &str = "id,method,rmse,csi10,csi15,critic_score,critic_diff";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub rmse: f64,
    pub csi10: Option<f64>,
    pub csi15: Option<f64>,
    pub critic_score: Option<f64>,
    pub critic_diff: Option<f64>,
}

/// Means over rows; undefined entries are left out of their column's mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rmse: f64,
    pub csi10: Option<f64>,
    pub csi15: Option<f64>,
    pub critic_score: Option<f64>,
    pub critic_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn aggregate(&self) -> Aggregate {
        let n = self.rows.len().max(1) as f64;
        Aggregate {
            rmse: self.rows.iter().map(|r| r.rmse).sum::<f64>() / n,
            csi10: mean_defined(self.rows.iter().map(|r| r.csi10)),
            csi15: mean_defined(self.rows.iter().map(|r| r.csi15)),
            critic_score: mean_defined(self.rows.iter().map(|r| r.critic_score)),
            critic_diff: mean_defined(self.rows.iter().map(|r| r.critic_diff)),
        }
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.id,
                self.method,
                r.rmse,
                cell(r.csi10),
                cell(r.csi15),
                cell(r.critic_score),
                cell(r.critic_diff)
            )?;
        }
        let a = self.aggregate();
        writeln!(
            w,
            "ALL,{AGGREGATE_TAG},{},{},{},{},{}",
            a.rmse,
            cell(a.csi10),
            cell(a.csi15),
            cell(a.critic_score),
            cell(a.critic_diff)
        )?;
        Ok(())
    }

    /// Parses a report written by [`MetricsReport::write_csv`]; the aggregate row is skipped.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim() == HEADER => {}
            other => return Err(Error::format(format!("bad report header {other:?}"))),
        }
        let mut method: Option<String> = None;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::format(format!("report row {}: {what}: {line}", i + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad("expected 7 columns"));
            }
            if cols[1] == AGGREGATE_TAG {
                continue;
            }
            match &method {
                None => method = Some(cols[1].to_string()),
                Some(m) if m != cols[1] => return Err(bad("mixed methods")),
                _ => {}
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| bad("not a number"))
                }
            };
            rows.push(ReportRow {
                id: cols[0].to_string(),
                rmse: num(cols[2])?.ok_or_else(|| bad("missing rmse"))?,
                csi10: num(cols[3])?,
                csi15: num(cols[4])?,
                critic_score: num(cols[5])?,
                critic_diff: num(cols[6])?,
            });
        }
        Ok(Self {
            method: method.unwrap_or_default(),
            rows,
        })
    }
}

pub fn write_spectrum_csv(w: &mut impl Write, curve: &SpectrumCurve) -> Result<()> {
    writeln!(w, "bin,mean_logpower,sigma")?;
    for ((b, m), s) in curve
        .bins
        .iter()
        .zip(&curve.mean_log_power)
        .zip(&curve.sigma)
    {
        writeln!(w, "{b},{m},{s}")?;
    }
    Ok(())
}

pub fn read_spectrum_csv(r: impl BufRead) -> Result<SpectrumCurve> {
    let mut curve = SpectrumCurve {
        bins: Vec::new(),
        mean_log_power: Vec::new(),
        sigma: Vec::new(),
    };
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "bin,mean_logpower,sigma" {
                return Err(Error::format(format!("bad spectrum header {line:?}")));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::format(format!("bad spectrum row: {line}"));
        if cols.len() != 3 {
            return Err(bad());
        }
        curve.bins.push(cols[0].parse().map_err(|_| bad())?);
        curve
            .mean_log_power
            .push(cols[1].parse().map_err(|_| bad())?);
        curve.sigma.push(cols[2].parse().map_err(|_| bad())?);
    }
    Ok(curve)
}
