//! Super-resolution of gridded precipitation fields with an MSE-trained
//! convolutional baseline and a Wasserstein GAN with gradient penalty.
//!
//! The crate covers the whole pipeline: a small reverse-mode autodiff engine,
//! the generator and critic networks, both training objectives, synthetic
//! precipitation data with the preprocessing used for training, and the
//! verification metrics (RMSE, CSI, radial power spectra, critic scores).

pub mod autodiff;
mod binio;
pub mod data;
pub mod error;
pub mod evaluation;
mod fft;
pub mod inference;
pub mod networks;
pub mod rng;
pub mod training;

pub use autodiff::{Graph, Tensor, UpsampleMode, Var};
pub use data::{Dataset, PrecipField, SynthConfig};
pub use error::{Error, Result};
pub use evaluation::{MetricsReport, SpectrumCurve};
pub use networks::{CriticConfig, GeneratorConfig, NetworkParams, Role};
pub use training::{LossRecord, TrainConfig, TrainMode};
