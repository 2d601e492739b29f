use crate::data::PrecipField;
use crate::error::{Error, Result};

fn same_size(op: &'static str, a: &PrecipField, b: &PrecipField) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::shape(
            op,
            format!("{0}x{0} vs {1}x{1}", a.size(), b.size()),
        ));
    }
    Ok(())
}

/// Root mean squared difference in mm hr⁻¹.
pub fn rmse(pred: &PrecipField, truth: &PrecipField) -> Result<f64> {
    same_size("rmse", pred, truth)?;
    let n = pred.values().len() as f64;
    let ss: f64 = pred
        .values()
        .iter()
        .zip(truth.values())
        .map(|(&p, &t)| (p as f64 - t as f64).powi(2))
        .sum();
    Ok((ss / n).sqrt())
}

/// Hits, false alarms and misses for events `value >= threshold`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Contingency {
    pub hits: u64,
    pub false_alarms: u64,
    pub misses: u64,
}

impl Contingency {
    /// `TP / (TP + FP + FN)`, or `None` when no event occurs in either field.
    pub fn csi(&self) -> Option<f64> {
        let denom = self.hits + self.false_alarms + self.misses;
        (denom > 0).then(|| self.hits as f64 / denom as f64)
    }
}

impl std::ops::AddAssign for Contingency {
    fn add_assign(&mut self, o: Self) {
        self.hits += o.hits;
        self.false_alarms += o.false_alarms;
        self.misses += o.misses;
    }
}

pub fn contingency(pred: &PrecipField, truth: &PrecipField, threshold: f64) -> Result<Contingency> {
    same_size("csi", pred, truth)?;
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::invalid(format!(
            "CSI threshold must be non-negative, got {threshold}"
        )));
    }
    let mut c = Contingency::default();
    for (&p, &t) in pred.values().iter().zip(truth.values()) {
        match (p as f64 >= threshold, t as f64 >= threshold) {
            (true, true) => c.hits += 1,
            (true, false) => c.false_alarms += 1,
            (false, true) => c.misses += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Critical success index at `threshold` mm hr⁻¹; `None` when undefined.
pub fn csi(pred: &PrecipField, truth: &PrecipField, threshold: f64) -> Result<Option<f64>> {
    Ok(contingency(pred, truth, threshold)?.csi())
}
