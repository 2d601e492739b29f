//! Adam with bias correction, plus its on-disk state.
//!
//! ```text
//! "RDWO" | version u16 | step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
//!        | tensor block of first moments | tensor block of second moments
//! ```

use std::io::{Read, Write};

use crate::autodiff::Tensor;
use crate::binio::*;
use crate::error::{Error, Result};
use crate::networks::{read_tensor_block, write_tensor_block, NetworkParams};

const MAGIC: &[u8; 4] = b"RDWO";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid optimizer settings {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<(String, Tensor)>,
    v: Vec<(String, Tensor)>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &NetworkParams) -> Self {
        let zeros: Vec<(String, Tensor)> = params
            .tensors()
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec())))
            .collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update; `grads` follow the parameter storage order.
    pub fn update(&mut self, params: &mut NetworkParams, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "{} gradients for {} parameter tensors",
                grads.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);
        for (((p, g), (_, m)), (_, v)) in params
            .values_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if g.len() != p.len() {
                return Err(Error::shape(
                    "adam",
                    format!("gradient of {} for {} values", g.len(), p.len()),
                ));
            }
            for (((p, &g), m), v) in p
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u16(w, VERSION)?;
        put_u64(w, self.step)?;
        put_f64(w, self.config.learning_rate)?;
        put_f64(w, self.config.beta1)?;
        put_f64(w, self.config.beta2)?;
        put_f64(w, self.config.epsilon)?;
        write_tensor_block(w, &self.m)?;
        write_tensor_block(w, &self.v)
    }

    /// Reads optimizer state and checks it lines up with `params`.
    pub fn read(r: &mut impl Read, params: &NetworkParams) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        let version = get_u16(r)?;
        if version != VERSION {
            return Err(Error::format(format!(
                "unsupported optimizer format version {version}"
            )));
        }
        let step = get_u64(r)?;
        let config = AdamConfig {
            learning_rate: get_f64(r)?,
            beta1: get_f64(r)?,
            beta2: get_f64(r)?,
            epsilon: get_f64(r)?,
        };
        let m = read_tensor_block(r)?;
        let v = read_tensor_block(r)?;
        for block in [&m, &v] {
            let fits = block.len() == params.tensors().len()
                && block
                    .iter()
                    .zip(params.tensors())
                    .all(|((a, x), (b, y))| a == b && x.shape() == y.shape());
            if !fits {
                return Err(Error::format("optimizer state does not match the network"));
            }
        }
        Ok(Self { config, step, m, v })
    }
}
