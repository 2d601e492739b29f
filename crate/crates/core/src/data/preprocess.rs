//! Intensity scaling, coarsening and the rain-fraction filter.

use super::field::PrecipField;
use crate::autodiff::{kernels, UpsampleMode};
use crate::error::{Error, Result};

/// Intensity mapped to 1.0; larger values saturate.
pub const NORMALIZATION_CEILING: f64 = 20.0;
/// Pixels at or above this intensity (mm hr⁻¹) count as raining for the filter.
pub const RAIN_THRESHOLD: f32 = 0.4;

/// `min(R / 20, 1)` per pixel.
pub fn normalize(field: &PrecipField) -> Result<Vec<f64>> {
    normalize_values(field.values())
}

pub fn normalize_values(values: &[f32]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&r| {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::invalid(format!("cannot normalize intensity {r}")));
            }
            Ok((r as f64 / NORMALIZATION_CEILING).min(1.0))
        })
        .collect()
}

/// `20 · clamp(x, 0, 1)` per pixel. NaN maps to zero.
pub fn denormalize(grid: &[f64]) -> Vec<f32> {
    grid.iter()
        .map(|&x| {
            let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
            (NORMALIZATION_CEILING * x) as f32
        })
        .collect()
}

/// Block-average pooling over `factor × factor` blocks.
pub fn downsample(hr: &PrecipField, factor: usize) -> Result<PrecipField> {
    let n = hr.size();
    if factor == 0 || !n.is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "grid side {n} is not divisible by factor {factor}"
        )));
    }
    let sums = kernels::block_sum(&hr.values_f64(), 1, n, n, factor);
    let area = (factor * factor) as f64;
    let values = sums.iter().map(|s| (s / area) as f32).collect();
    let mut out = PrecipField::new(
        n / factor,
        values,
        hr.timestamp,
        hr.pixel_km * factor as f32,
    )?;
    out.artifact = hr.artifact;
    Ok(out)
}

/// Interpolates a coarse field onto a grid `factor` times finer.
pub fn upsample_field(lr: &PrecipField, factor: usize, mode: UpsampleMode) -> Result<PrecipField> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be positive"));
    }
    let n = lr.size();
    let v = lr.values_f64();
    let up = match mode {
        UpsampleMode::Nearest => kernels::upsample_nearest(&v, 1, n, n, factor),
        UpsampleMode::Bilinear => kernels::bilinear(&v, 1, n, n, factor),
    };
    let values = up.iter().map(|&x| x.max(0.0) as f32).collect();
    let mut out = PrecipField::new(
        n * factor,
        values,
        lr.timestamp,
        lr.pixel_km / factor as f32,
    )?;
    out.artifact = lr.artifact;
    Ok(out)
}

/// True when strictly more than 20% of pixels are at or above 0.4 mm hr⁻¹.
pub fn sample_filter(hr: &PrecipField) -> bool {
    let wet = hr.values().iter().filter(|&&v| v >= RAIN_THRESHOLD).count();
    // wet / total > 1/5 without rounding
    wet * 5 > hr.values().len()
}
