//! Verification of downscaled fields: RMSE, CSI, radial power spectra and
//! critic-score analysis.
//!
//! Pixel metrics are computed on physical values (mm hr⁻¹) so the CSI
//! thresholds apply literally; critic scores are computed on normalized
//! values because that is the space the critic was trained in.

mod critic;
mod metrics;
mod report;
mod spectrum;

use std::collections::HashMap;

pub use critic::{
    critic_difference, critic_scores, histogram, rank_by_critic_difference, RankedCase, Ranking,
};
pub use metrics::{contingency, csi, rmse, Contingency};
pub use report::{
    read_spectrum_csv, write_spectrum_csv, Aggregate, MetricsReport, ReportRow, AGGREGATE_TAG,
};
pub use spectrum::{
    power_spectrum_radial, radial_power_totals, spectrum_aggregate, RadialSpectrum, SpectrumCurve,
    LOG_FLOOR,
};

use crate::data::PrecipField;
use crate::error::{Error, Result};
use crate::networks::NetworkParams;

/// Intensity thresholds (mm hr⁻¹) of the two reported CSI columns.
pub const CSI_THRESHOLDS: [f64; 2] = [10.0, 15.0];

#[derive(Debug, Clone)]
pub struct MethodEvaluation {
    pub report: MetricsReport,
    /// Contingency counts pooled over all fields, per threshold.
    pub pooled: [Contingency; 2],
    pub spectrum: SpectrumCurve,
    /// Critic scores of the predictions, in report row order.
    pub scores: Option<Vec<f64>>,
}

/// Pairs predictions with truth fields by id, sorted by id.
pub fn match_ids<'a>(
    truth: &'a [(String, PrecipField)],
    preds: &'a [(String, PrecipField)],
) -> Result<Vec<(&'a str, &'a PrecipField, &'a PrecipField)>> {
    let by_id: HashMap<&str, &PrecipField> = preds.iter().map(|(id, f)| (id.as_str(), f)).collect();
    if by_id.len() != preds.len() {
        return Err(Error::IdMismatch("duplicate prediction ids".into()));
    }
    if truth.len() != preds.len() {
        return Err(Error::IdMismatch(format!(
            "{} reference fields but {} predictions",
            truth.len(),
            preds.len()
        )));
    }
    let mut out = truth
        .iter()
        .map(|(id, t)| {
            by_id
                .get(id.as_str())
                .map(|p| (id.as_str(), t, *p))
                .ok_or_else(|| Error::IdMismatch(format!("no prediction for '{id}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.0.cmp(b.0));
    Ok(out)
}

/// Full evaluation of one method's predictions against the reference.
pub fn evaluate_method(
    method: &str,
    truth: &[(String, PrecipField)],
    preds: &[(String, PrecipField)],
    critic: Option<&NetworkParams>,
) -> Result<MethodEvaluation> {
    let pairs = match_ids(truth, preds)?;
    if pairs.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let (hr_scores, pred_scores) = match critic {
        Some(c) => {
            let hr: Vec<&PrecipField> = pairs.iter().map(|p| p.1).collect();
            let pr: Vec<&PrecipField> = pairs.iter().map(|p| p.2).collect();
            (Some(critic_scores(c, &hr)?), Some(critic_scores(c, &pr)?))
        }
        None => (None, None),
    };
    let mut pooled = [Contingency::default(); 2];
    let mut rows = Vec::with_capacity(pairs.len());
    for (i, &(id, t, p)) in pairs.iter().enumerate() {
        let c10 = contingency(p, t, CSI_THRESHOLDS[0])?;
        let c15 = contingency(p, t, CSI_THRESHOLDS[1])?;
        pooled[0] += c10;
        pooled[1] += c15;
        let score = pred_scores.as_ref().map(|s| s[i]);
        rows.push(ReportRow {
            id: id.to_string(),
            rmse: rmse(p, t)?,
            csi10: c10.csi(),
            csi15: c15.csi(),
            critic_score: score,
            critic_diff: hr_scores.as_ref().zip(score).map(|(h, s)| h[i] - s),
        });
    }
    let side = pairs[0].2.size();
    let grids: Vec<Vec<f64>> = pairs.iter().map(|p| p.2.values_f64()).collect();
    let spectrum = if grids.len() >= 2 {
        spectrum_aggregate(&grids, side)?
    } else {
        let s = power_spectrum_radial(&grids[0], side, side)?;
        SpectrumCurve {
            bins: s.bins,
            mean_log_power: s.power.iter().map(|p| (p + LOG_FLOOR).log10()).collect(),
            sigma: vec![0.0; s.power.len()],
        }
    };
    Ok(MethodEvaluation {
        report: MetricsReport {
            method: method.to_string(),
            rows,
        },
        pooled,
        spectrum,
        scores: pred_scores,
    })
}
