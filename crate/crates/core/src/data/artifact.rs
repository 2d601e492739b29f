//! Rectangular clutter-like artifacts for quality-control experiments.

use rand::Rng as _;

use super::field::PrecipField;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

/// Overwrites `rect` with `level ± jitter` (uniform, seeded, floored at zero)
/// and flags the field as artifact-bearing. Pixels outside `rect` are untouched.
pub fn inject_artifact(
    hr: &PrecipField,
    rect: Rect,
    level: f32,
    jitter: f32,
    seed: u64,
) -> Result<PrecipField> {
    let n = hr.size();
    if rect.row + rect.height > n || rect.col + rect.width > n {
        return Err(Error::invalid(format!(
            "rectangle {rect:?} exceeds the {n}x{n} grid"
        )));
    }
    if !(level >= 0.0 && level.is_finite() && jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid artifact level {level} ± {jitter}"
        )));
    }
    if rect.height == 0 || rect.width == 0 {
        return Ok(hr.clone());
    }
    let mut rng = rng::stream(seed, rng::tag::ARTIFACT);
    let mut values = hr.values().to_vec();
    for i in rect.row..rect.row + rect.height {
        for j in rect.col..rect.col + rect.width {
            let noise = if jitter > 0.0 {
                rng.gen_range(-jitter..=jitter)
            } else {
                0.0
            };
            values[i * n + j] = (level + noise).max(0.0);
        }
    }
    let mut out = hr.with_values(values)?;
    out.artifact = true;
    Ok(out)
}
