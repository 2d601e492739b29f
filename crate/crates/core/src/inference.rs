//! Applying a trained generator to LR fields.

use crate::autodiff::Tensor;
use crate::data::{denormalize, normalize, PrecipField};
use crate::error::{Error, Result};
use crate::networks::{generator_forward, NetworkParams};

const BATCH: usize = 16;

/// Downscales every field. Outputs are clamped to the normalized range
/// before conversion back to mm hr⁻¹.
pub fn super_resolve(generator: &NetworkParams, lr: &[&PrecipField]) -> Result<Vec<PrecipField>> {
    let cfg = generator.generator_config()?;
    let scale = cfg.scale_factor;
    let mut out = Vec::with_capacity(lr.len());
    for chunk in lr.chunks(BATCH) {
        let side = chunk[0].size();
        if let Some(f) = chunk.iter().find(|f| f.size() != side) {
            return Err(Error::shape(
                "super_resolve",
                format!("mixed sizes {side} and {}", f.size()),
            ));
        }
        let mut data = Vec::with_capacity(chunk.len() * side * side);
        for f in chunk {
            data.extend(normalize(f)?);
        }
        let x = Tensor::new(vec![chunk.len(), 1, side, side], data)?;
        let y = generator_forward(generator, &x)?;
        let hr_side = side * scale;
        for (f, plane) in chunk.iter().zip(y.data().chunks(hr_side * hr_side)) {
            let mut field = PrecipField::new(
                hr_side,
                denormalize(plane),
                f.timestamp,
                f.pixel_km / scale as f32,
            )?;
            field.artifact = f.artifact;
            out.push(field);
        }
    }
    Ok(out)
}
