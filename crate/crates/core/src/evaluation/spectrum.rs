//! Radially averaged power spectra.
//!
//! The field mean is removed, the 2-D DFT taken, and the power of each mode
//! `|X(kx, ky)|² / (H·W)` is binned by the integer radius
//! `round(sqrt(kx² + ky²))` of its centred frequency. Bins are wavenumbers in
//! cycles per domain width, `1..=N/2`; the corners beyond `N/2` are left out
//! of the curve.

use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::{fft2, signed_freq};

/// Added before taking `log10` so empty power does not produce `-inf`.
pub const LOG_FLOOR: f64 = 1e-12;

/// Mean power per radial bin of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    pub bins: Vec<usize>,
    pub power: Vec<f64>,
}

/// Per-bin mean and population standard deviation of `log10(power + floor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub bins: Vec<usize>,
    pub mean_log_power: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SpectrumCurve {
    /// First index of the top third of bins.
    pub fn top_third_start(&self) -> usize {
        let n = self.bins.len();
        n - n.div_ceil(3)
    }

    /// Mean `|Δ log10 power|` against `other` over bins `from..`.
    pub fn mean_abs_log_diff(&self, other: &SpectrumCurve, from: usize) -> Result<f64> {
        if self.bins != other.bins || from >= self.bins.len() {
            return Err(Error::shape("spectrum", "curves have different bins"));
        }
        let d: Vec<f64> = self.mean_log_power[from..]
            .iter()
            .zip(&other.mean_log_power[from..])
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(d.iter().sum::<f64>() / d.len() as f64)
    }
}

fn side_of(grid: &[f64], rows: usize, cols: usize) -> Result<usize> {
    if rows != cols {
        return Err(Error::shape(
            "power_spectrum",
            format!("grid must be square, got {rows}x{cols}"),
        ));
    }
    if rows < 2 || grid.len() != rows * cols {
        return Err(Error::shape(
            "power_spectrum",
            format!("{} values for a {rows}x{cols} grid", grid.len()),
        ));
    }
    Ok(rows)
}

/// Mode powers `|X|² / N` of the mean-removed field with their integer radii.
fn mode_powers(grid: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mean = grid.iter().sum::<f64>() / grid.len() as f64;
    let mut buf: Vec<Complex64> = grid
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .collect();
    fft2(&mut buf, n, FftDirection::Forward);
    let norm = (n * n) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let ky = signed_freq(i, n) as f64;
        for j in 0..n {
            let kx = signed_freq(j, n) as f64;
            let r = (kx * kx + ky * ky).sqrt().round() as usize;
            out.push((r, buf[i * n + j].norm_sqr() / norm));
        }
    }
    out
}

pub fn power_spectrum_radial(grid: &[f64], rows: usize, cols: usize) -> Result<RadialSpectrum> {
    let n = side_of(grid, rows, cols)?;
    let half = n / 2;
    let mut sum = vec![0.0; half + 1];
    let mut count = vec![0usize; half + 1];
    for (r, p) in mode_powers(grid, n) {
        if r <= half {
            sum[r] += p;
            count[r] += 1;
        }
    }
    Ok(RadialSpectrum {
        bins: (1..=half).collect(),
        power: (1..=half).map(|r| sum[r] / count[r] as f64).collect(),
    })
}

/// Total power in every radial bin including the corners, indexed by radius.
/// Their sum equals the variance-like total `Σ (x - mean)²`.
pub fn radial_power_totals(grid: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let n = side_of(grid, rows, cols)?;
    let powers = mode_powers(grid, n);
    let max_r = powers.iter().map(|&(r, _)| r).max().unwrap_or(0);
    let mut sum = vec![0.0; max_r + 1];
    for (r, p) in powers {
        sum[r] += p;
    }
    Ok(sum)
}

/// Per-bin log-power statistics over at least two same-size square grids.
pub fn spectrum_aggregate<G: AsRef<[f64]>>(fields: &[G], side: usize) -> Result<SpectrumCurve> {
    if fields.len() < 2 {
        return Err(Error::invalid(format!(
            "spectrum aggregate needs at least 2 fields, got {}",
            fields.len()
        )));
    }
    let spectra: Vec<RadialSpectrum> = fields
        .iter()
        .map(|f| {
            if f.as_ref().len() != side * side {
                return Err(Error::shape("spectrum_aggregate", "fields differ in size"));
            }
            power_spectrum_radial(f.as_ref(), side, side)
        })
        .collect::<Result<_>>()?;
    let bins = spectra[0].bins.clone();
    let m = spectra.len() as f64;
    let mut mean_log_power = Vec::with_capacity(bins.len());
    let mut sigma = Vec::with_capacity(bins.len());
    for b in 0..bins.len() {
        let logs: Vec<f64> = spectra
            .iter()
            .map(|s| (s.power[b] + LOG_FLOOR).log10())
            .collect();
        let mean = logs.iter().sum::<f64>() / m;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        mean_log_power.push(mean);
        sigma.push(var.sqrt());
    }
    Ok(SpectrumCurve {
        bins,
        mean_log_power,
        sigma,
    })
}
