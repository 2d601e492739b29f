use std::io::{BufRead, Write};

use super::{LossRecord, RecordKind};
use crate::error::{Error, Result};

pub const HISTORY_HEADER: &str = "step,mode,wasserstein,mse,gp,total";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_history(w: &mut impl Write, records: &[LossRecord]) -> Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step,
            r.kind,
            cell(r.wasserstein),
            cell(r.mse),
            cell(r.gp),
            r.total
        )?;
    }
    Ok(())
}

pub fn read_history(r: impl BufRead) -> Result<Vec<LossRecord>> {
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == HISTORY_HEADER => {}
        other => return Err(Error::format(format!("bad loss history header {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(format!("malformed loss history row {}: {line}", i + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        out.push(LossRecord {
            step: cols[0].parse().map_err(|_| bad())?,
            kind: cols[1].parse::<RecordKind>().map_err(|_| bad())?,
            wasserstein: opt(cols[2])?,
            mse: opt(cols[3])?,
            gp: opt(cols[4])?,
            total: cols[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let recs = vec![
            LossRecord {
                step: 0,
                kind: RecordKind::Critic,
                wasserstein: Some(0.1 + 0.2),
                mse: None,
                gp: Some(1e-300),
                total: -0.30000000000000004 + 1e-300,
            },
            LossRecord {
                step: 1,
                kind: RecordKind::Srcnn,
                wasserstein: None,
                mse: Some(std::f64::consts::PI),
                gp: None,
                total: std::f64::consts::PI,
            },
        ];
        let mut buf = Vec::new();
        write_history(&mut buf, &recs).unwrap();
        assert_eq!(read_history(buf.as_slice()).unwrap(), recs);
        assert!(read_history("step,mode\n".as_bytes()).is_err());
        assert!(read_history(format!("{HISTORY_HEADER}\n1,x,,,,1\n").as_bytes()).is_err());
    }
}
