//! Synthetic precipitation fields.
//!
//! Fields are produced in short "events" of consecutive hourly frames. Each
//! event has a smooth large-scale envelope, either an elongated Gaussian
//! ridge (a rain band) or a few broad blobs, modulated by a lognormal
//! cellular texture whose log-field has a power-law spectrum. Envelope and
//! texture are advected with a constant velocity from frame to frame.
//! Intensities are scaled per field so that 99.8% of rainy pixels stay below
//! a drawn peak under 20 mm hr⁻¹, and every emitted field passes
//! [`sample_filter`].

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::field::PrecipField;
use super::preprocess::sample_filter;
use crate::error::{Error, Result};
use crate::fft::{fft2, signed_freq};
use crate::rng::{self, Rng};

/// Intensities below this (mm hr⁻¹) are set to zero.
const DRIZZLE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Grid side in pixels (1 km each).
    pub size: usize,
    pub n_fields: usize,
    /// Probability that an event is a rain band rather than scattered blobs.
    pub band_fraction: f64,
    /// Advection speed range in pixels per hour.
    pub advection_speed: (f64, f64),
    /// Standard deviation of the log-intensity texture; 0 gives smooth fields.
    pub cell_density: f64,
    /// Power-law exponent of the texture's log-field spectrum.
    pub spectral_slope: f64,
    /// Frames per event.
    pub event_hours: usize,
    /// Range of the per-field 99.8th percentile of rainy pixels, mm hr⁻¹.
    pub peak_range: (f64, f64),
    /// Event redraws allowed before giving up.
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 64,
            n_fields: 100,
            band_fraction: 0.5,
            advection_speed: (1.0, 4.0),
            cell_density: 0.9,
            spectral_slope: 2.0,
            event_hours: 4,
            peak_range: (8.0, 19.0),
            max_retries: 1000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.size < 8 {
            return bad(format!("grid size {} is too small", self.size));
        }
        if !(0.0..=1.0).contains(&self.band_fraction) {
            return bad(format!(
                "band fraction {} outside [0, 1]",
                self.band_fraction
            ));
        }
        let (lo, hi) = self.advection_speed;
        if !(lo >= 0.0 && hi >= lo) {
            return bad(format!("invalid advection speed range {lo}..{hi}"));
        }
        if !(self.cell_density >= 0.0 && self.cell_density.is_finite()) {
            return bad(format!("invalid cell density {}", self.cell_density));
        }
        if !self.spectral_slope.is_finite() {
            return bad("spectral slope must be finite".into());
        }
        if self.event_hours == 0 {
            return bad("event length must be at least one hour".into());
        }
        let (lo, hi) = self.peak_range;
        if !(lo > 0.0 && hi >= lo && hi < 20.0) {
            return bad(format!("peak range {lo}..{hi} must lie in (0, 20)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Envelope {
    Band {
        angle: f64,
        offset: f64,
        width: f64,
        along_center: f64,
        along_scale: f64,
    },
    Blobs(Vec<(f64, f64, f64, f64)>),
}

impl Envelope {
    fn draw(rng: &mut Rng, n: f64, band: bool) -> Self {
        if band {
            Envelope::Band {
                angle: rng.gen_range(0.0..PI),
                offset: rng.gen_range(-0.25..0.25) * n,
                width: rng.gen_range(0.06..0.16) * n,
                along_center: rng.gen_range(-0.3..0.3) * n,
                along_scale: rng.gen_range(0.5..1.5) * n,
            }
        } else {
            let k = rng.gen_range(2..=4);
            Envelope::Blobs(
                (0..k)
                    .map(|_| {
                        (
                            rng.gen_range(0.0..n),
                            rng.gen_range(0.0..n),
                            rng.gen_range(0.12..0.3) * n,
                            rng.gen_range(0.5..1.0),
                        )
                    })
                    .collect(),
            )
        }
    }

    /// Value at pixel centre `(y, x)` relative to the domain centre `c`.
    fn eval(&self, y: f64, x: f64, c: f64) -> f64 {
        match self {
            Envelope::Band {
                angle,
                offset,
                width,
                along_center,
                along_scale,
            } => {
                let (s, co) = angle.sin_cos();
                let (dx, dy) = (x - c, y - c);
                let across = -s * dx + co * dy - offset;
                let along = co * dx + s * dy - along_center;
                (-0.5 * (across / width).powi(2) - 0.5 * (along / along_scale).powi(2)).exp()
            }
            Envelope::Blobs(blobs) => blobs
                .iter()
                .map(|&(by, bx, sigma, amp)| {
                    amp * (-0.5 * ((y - by).powi(2) + (x - bx).powi(2)) / (sigma * sigma)).exp()
                })
                .sum(),
        }
    }
}

/// Zero-mean, unit-variance periodic Gaussian field with power ∝ k^(-slope).
pub(crate) fn gaussian_field(n: usize, slope: f64, rng: &mut Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    fft2(&mut buf, n, FftDirection::Forward);
    for i in 0..n {
        let ky = signed_freq(i, n) as f64;
        for j in 0..n {
            let kx = signed_freq(j, n) as f64;
            let k = (kx * kx + ky * ky).sqrt();
            buf[i * n + j] *= if k == 0.0 { 0.0 } else { k.powf(-slope / 2.0) };
        }
    }
    fft2(&mut buf, n, FftDirection::Inverse);
    let re: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = re.iter().sum::<f64>() / re.len() as f64;
    let var = re.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / re.len() as f64;
    let sd = var.sqrt().max(f64::MIN_POSITIVE);
    re.into_iter().map(|v| (v - mean) / sd).collect()
}

struct Event {
    envelope: Envelope,
    velocity: (f64, f64),
    texture: (Vec<f64>, Vec<f64>),
    peaks: Vec<f64>,
}

impl Event {
    fn draw(cfg: &SynthConfig, rng: &mut Rng) -> Self {
        let n = cfg.size;
        let band = rng.gen_bool(cfg.band_fraction);
        let envelope = Envelope::draw(rng, n as f64, band);
        let (lo, hi) = cfg.advection_speed;
        let speed = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let dir = rng.gen_range(0.0..2.0 * PI);
        let texture = if cfg.cell_density > 0.0 {
            (
                gaussian_field(n, cfg.spectral_slope, rng),
                gaussian_field(n, cfg.spectral_slope, rng),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let (plo, phi) = cfg.peak_range;
        let peaks = (0..cfg.event_hours)
            .map(|_| {
                if phi > plo {
                    rng.gen_range(plo..phi)
                } else {
                    plo
                }
            })
            .collect();
        Self {
            envelope,
            velocity: (speed * dir.sin(), speed * dir.cos()),
            texture,
            peaks,
        }
    }

    fn frame(&self, cfg: &SynthConfig, hour: usize) -> Vec<f64> {
        let n = cfg.size;
        let t = hour as f64;
        let (vy, vx) = self.velocity;
        let (sy, sx) = (vy * t, vx * t);
        let (ry, rx) = (
            (sy.round() as i64).rem_euclid(n as i64) as usize,
            (sx.round() as i64).rem_euclid(n as i64) as usize,
        );
        // slow evolution of the cells while they are carried along
        let (c, s) = (0.35 * t).sin_cos();
        let centre = (n as f64 - 1.0) / 2.0;
        let sigma = cfg.cell_density;
        let mut raw = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let env = self.envelope.eval(i as f64 - sy, j as f64 - sx, centre);
                let tex = if sigma > 0.0 {
                    let k = ((i + n - ry) % n) * n + (j + n - rx) % n;
                    let g = s * self.texture.0[k] + c * self.texture.1[k];
                    (sigma * g - 0.5 * sigma * sigma).exp()
                } else {
                    1.0
                };
                raw[i * n + j] = env * tex;
            }
        }
        raw
    }
}

/// Scales `raw` so the 99.8th percentile of its rainy pixels equals `peak`,
/// then zeroes drizzle.
fn scale_to_peak(raw: &[f64], peak: f64) -> Vec<f32> {
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; raw.len()];
    }
    let mut rainy: Vec<f64> = raw.iter().copied().filter(|&v| v > 0.02 * max).collect();
    rainy.sort_by(f64::total_cmp);
    let idx = ((0.998 * rainy.len() as f64).ceil() as usize).clamp(1, rainy.len()) - 1;
    let scale = peak / rainy[idx];
    raw.iter()
        .map(|&v| {
            let r = v * scale;
            if r < DRIZZLE_FLOOR {
                0.0
            } else {
                r as f32
            }
        })
        .collect()
}

/// Generates `cfg.n_fields` fields in chronological order.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<PrecipField>> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, rng::tag::SYNTH);
    let mut out = Vec::with_capacity(cfg.n_fields);
    let mut retries = 0;
    let mut clock: i64 = 0;
    while out.len() < cfg.n_fields {
        let event = Event::draw(cfg, &mut rng);
        let frames = cfg.event_hours.min(cfg.n_fields - out.len());
        let fields: Vec<PrecipField> = (0..frames)
            .map(|h| {
                let values = scale_to_peak(&event.frame(cfg, h), event.peaks[h]);
                PrecipField::new(cfg.size, values, clock + h as i64, 1.0)
            })
            .collect::<Result<_>>()?;
        if !fields.iter().all(sample_filter) {
            retries += 1;
            if retries > cfg.max_retries {
                return Err(Error::Config(format!(
                    "gave up after {retries} events failed the rain-fraction filter"
                )));
            }
            continue;
        }
        clock += frames as i64 + rng.gen_range(1..48);
        out.extend(fields);
    }
    Ok(out)
}
