//! Critic scores, score differences against the reference, and case ranking.

use std::cmp::Ordering;

use super::report::MetricsReport;
use crate::autodiff::Tensor;
use crate::data::{normalize, PrecipField};
use crate::error::{Error, Result};
use crate::networks::{critic_forward, NetworkParams};

const SCORE_BATCH: usize = 32;

/// Critic scores of fields after normalization to `[0, 1]`.
pub fn critic_scores(critic: &NetworkParams, fields: &[&PrecipField]) -> Result<Vec<f64>> {
    let size = critic.critic_config()?.input_size;
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(SCORE_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * size * size);
        for f in chunk {
            if f.size() != size {
                return Err(Error::shape(
                    "critic_score",
                    format!("field is {0}x{0}, critic expects {1}x{1}", f.size(), size),
                ));
            }
            data.extend(normalize(f)?);
        }
        let batch = Tensor::new(vec![chunk.len(), 1, size, size], data)?;
        out.extend_from_slice(critic_forward(critic, &batch)?.data());
    }
    Ok(out)
}

/// `F(hr) - F(generated)`. Negative values mean the critic rates the
/// generated field at least as realistic as the reference.
pub fn critic_difference(
    critic: &NetworkParams,
    hr: &PrecipField,
    generated: &PrecipField,
) -> Result<f64> {
    let s = critic_scores(critic, &[hr, generated])?;
    Ok(s[0] - s[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCase {
    pub id: String,
    pub critic_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Most negative differences first.
    pub negative: Vec<RankedCase>,
    /// Most positive differences first.
    pub positive: Vec<RankedCase>,
    /// Set when fewer than `k` rows were available.
    pub truncated: bool,
}

/// Top-`k` most negative and most positive critic differences; ties go to the
/// smaller id.
pub fn rank_by_critic_difference(report: &MetricsReport, k: usize) -> Result<Ranking> {
    let cases: Vec<RankedCase> = report
        .rows
        .iter()
        .map(|r| {
            r.critic_diff
                .map(|d| RankedCase {
                    id: r.id.clone(),
                    critic_diff: d,
                })
                .ok_or_else(|| Error::invalid(format!("row {} has no critic difference", r.id)))
        })
        .collect::<Result<_>>()?;
    let by = |desc: bool| {
        move |a: &RankedCase, b: &RankedCase| {
            let o = a.critic_diff.total_cmp(&b.critic_diff);
            let o = if desc { o.reverse() } else { o };
            o.then_with(|| a.id.cmp(&b.id))
        }
    };
    let take = |desc: bool| -> Vec<RankedCase> {
        let mut v = cases.clone();
        v.sort_by(by(desc));
        v.truncate(k);
        v
    };
    Ok(Ranking {
        negative: take(false),
        positive: take(true),
        truncated: k > cases.len(),
    })
}

/// Equal-width histogram counts of `values` over `[lo, hi]`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 || hi.partial_cmp(&lo) != Some(Ordering::Greater) {
        if bins > 0 {
            counts[0] = values.len();
        }
        return counts;
    }
    let w = (hi - lo) / bins as f64;
    for &v in values {
        let i = (((v - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
}
