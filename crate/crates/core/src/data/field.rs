use crate::error::{Error, Result};

/// Square grid of precipitation intensities in mm hr⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecipField {
    size: usize,
    values: Vec<f32>,
    /// Hours since the Unix epoch.
    pub timestamp: i64,
    /// Grid spacing in km.
    pub pixel_km: f32,
    /// Set when the field carries an injected artifact.
    pub artifact: bool,
}

impl PrecipField {
    pub fn new(size: usize, values: Vec<f32>, timestamp: i64, pixel_km: f32) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::shape(
                "precip_field",
                format!("{} values for a {size}x{size} grid", values.len()),
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!(
                "precipitation must be finite and non-negative, pixel {i} is {v}"
            )));
        }
        Ok(Self {
            size,
            values,
            timestamp,
            pixel_km,
            artifact: false,
        })
    }

    pub fn zeros(size: usize, timestamp: i64, pixel_km: f32) -> Self {
        Self::new(size, vec![0.0; size * size], timestamp, pixel_km).expect("zero field is valid")
    }

    /// Side length (the grid is square).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.size + col]
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Copy with replaced values, keeping metadata; values are validated.
    pub fn with_values(&self, values: Vec<f32>) -> Result<Self> {
        let mut out = Self::new(self.size, values, self.timestamp, self.pixel_km)?;
        out.artifact = self.artifact;
        Ok(out)
    }
}
