//! Generator and critic definitions.
//!
//! The generator is the three-layer SRCNN-style network shared by the MSE
//! baseline and the WGAN: the low-resolution input is first interpolated onto
//! the high-resolution grid, then passed through `conv → leaky_relu → conv →
//! leaky_relu → conv` with "same" padding. The critic is a stack of stride-2
//! 4×4 convolutions with leaky ReLU and a final linear map to one score per
//! sample. Neither network has normalization layers: the gradient penalty
//! acts on per-sample input gradients.

mod checkpoint;

use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, Tensor, UpsampleMode, Var};
use crate::error::{Error, Result};
use crate::rng;

pub use checkpoint::{read_network, write_network};
pub(crate) use checkpoint::{read_tensor_block, write_tensor_block};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Generator,
    Critic,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Generator => "generator",
            Role::Critic => "critic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// HR/LR side ratio.
    pub scale_factor: usize,
    /// Hidden channel counts of the first two layers.
    pub channels: Vec<usize>,
    pub kernel_sizes: Vec<usize>,
    pub upsample_mode: UpsampleMode,
    pub leaky_slope: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            scale_factor: 4,
            channels: vec![64, 32],
            kernel_sizes: vec![9, 5, 5],
            upsample_mode: UpsampleMode::Bilinear,
            leaky_slope: 0.2,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.scale_factor) {
            return Err(Error::Config(format!(
                "scale factor must be 2, 4 or 8, got {}",
                self.scale_factor
            )));
        }
        if self.kernel_sizes.len() != 3 || self.channels.len() + 1 != self.kernel_sizes.len() {
            return Err(Error::Config(format!(
                "generator needs 3 kernel sizes and 2 hidden widths, got kernels {:?} channels {:?}",
                self.kernel_sizes, self.channels
            )));
        }
        if self.kernel_sizes.iter().any(|&k| k == 0 || k % 2 == 0) {
            return Err(Error::Config(format!(
                "generator kernel sizes must be odd, got {:?}",
                self.kernel_sizes
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config(
                "generator channel counts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(in, out, kernel)` of each convolution.
    fn layers(&self) -> Vec<(usize, usize, usize)> {
        let mut widths = vec![1];
        widths.extend(&self.channels);
        widths.push(1);
        widths
            .windows(2)
            .zip(&self.kernel_sizes)
            .map(|(io, &k)| (io[0], io[1], k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    /// Channel counts of the stride-2 convolutions. An empty list leaves
    /// only the final linear map.
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    /// Side of the square HR input.
    pub input_size: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            widths: vec![64, 128, 256],
            leaky_slope: 0.2,
            input_size: 128,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "invalid critic widths {:?}",
                self.widths
            )));
        }
        let div = 1usize << self.widths.len();
        if self.input_size < div || !self.input_size.is_multiple_of(div) {
            return Err(Error::Config(format!(
                "critic input size {} must be a positive multiple of {div}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Side of the feature map entering the final linear layer.
    pub fn feature_size(&self) -> usize {
        self.input_size >> self.widths.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetConfig {
    Generator(GeneratorConfig),
    Critic(CriticConfig),
}

impl NetConfig {
    pub fn role(&self) -> Role {
        match self {
            NetConfig::Generator(_) => Role::Generator,
            NetConfig::Critic(_) => Role::Critic,
        }
    }

    /// Names and shapes of every learnable tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        match self {
            NetConfig::Generator(cfg) => {
                for (i, (cin, cout, k)) in cfg.layers().into_iter().enumerate() {
                    out.push((format!("conv{}.weight", i + 1), vec![cout, cin, k, k]));
                    out.push((format!("conv{}.bias", i + 1), vec![cout]));
                }
            }
            NetConfig::Critic(cfg) => {
                let mut cin = 1;
                for (i, &w) in cfg.widths.iter().enumerate() {
                    out.push((format!("conv{}.weight", i + 1), vec![w, cin, 4, 4]));
                    out.push((format!("conv{}.bias", i + 1), vec![w]));
                    cin = w;
                }
                let s = cfg.feature_size();
                out.push(("fc.weight".into(), vec![1, cin, s, s]));
                out.push(("fc.bias".into(), vec![1]));
            }
        }
        out
    }
}

/// Ordered, named learnable tensors of one network together with its config.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetConfig,
    tensors: Vec<(String, Tensor)>,
}

impl NetworkParams {
    /// Wraps tensors after checking them against the shapes implied by `config`.
    pub fn from_parts(config: NetConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let expected = config.param_shapes();
        if expected.len() != tensors.len() {
            return Err(Error::format(format!(
                "{} network needs {} tensors, got {}",
                config.role(),
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::format(format!(
                    "expected tensor {name} {shape:?}, got {got_name} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn role(&self) -> Role {
        self.config.role()
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn generator_config(&self) -> Result<&GeneratorConfig> {
        match &self.config {
            NetConfig::Generator(c) => Ok(c),
            NetConfig::Critic(_) => {
                Err(Error::invalid("expected generator parameters, got critic"))
            }
        }
    }

    pub fn critic_config(&self) -> Result<&CriticConfig> {
        match &self.config {
            NetConfig::Critic(c) => Ok(c),
            NetConfig::Generator(_) => {
                Err(Error::invalid("expected critic parameters, got generator"))
            }
        }
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Mutable values in storage order; shapes cannot change through this.
    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.tensors.iter_mut().map(|(_, t)| t.data_mut())
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    /// Same network with every value set to zero.
    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        out.values_mut().for_each(|v| v.fill(0.0));
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_network(&mut buf, self).expect("writing to a Vec cannot fail");
        buf
    }

    /// Places every tensor on `graph`, differentiable when `trainable`.
    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|(_, t)| {
                if trainable {
                    graph.param(t.clone())
                } else {
                    graph.constant(t.clone())
                }
            })
            .collect()
    }
}

fn init_params(config: NetConfig, seed: u64, tag: u64) -> Result<NetworkParams> {
    let mut rng = rng::stream(seed, tag);
    let tensors = config
        .param_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let t = if shape.len() == 4 {
                let fan_in = shape[1] * shape[2] * shape[3];
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                Tensor::from_fn(shape, |_| normal.sample(&mut rng))
            } else {
                Tensor::zeros(shape)
            };
            (name, t)
        })
        .collect();
    NetworkParams::from_parts(config, tensors)
}

/// He-initialised kernels and zero biases, deterministic in `seed`.
pub fn build_generator(cfg: &GeneratorConfig, seed: u64) -> Result<NetworkParams> {
    cfg.validate()?;
    init_params(
        NetConfig::Generator(cfg.clone()),
        seed,
        rng::tag::GENERATOR_INIT,
    )
}

pub fn build_critic(cfg: &CriticConfig, seed: u64) -> Result<NetworkParams> {
    cfg.validate()?;
    init_params(NetConfig::Critic(cfg.clone()), seed, rng::tag::CRITIC_INIT)
}

/// Generator forward on `graph`; `vars` come from [`NetworkParams::bind`].
pub fn generator_graph(
    graph: &mut Graph,
    cfg: &GeneratorConfig,
    vars: &[Var],
    lr: Var,
) -> Result<Var> {
    let [_, c, _, _] = graph.value(lr).dims4("generator_forward")?;
    if c != 1 {
        return Err(Error::shape(
            "generator_forward",
            format!("expected 1 input channel, got {c}"),
        ));
    }
    let mut x = graph.upsample(lr, cfg.scale_factor, cfg.upsample_mode)?;
    let n_layers = cfg.kernel_sizes.len();
    for (i, &k) in cfg.kernel_sizes.iter().enumerate() {
        x = graph.conv2d(x, vars[2 * i], Some(vars[2 * i + 1]), 1, k / 2)?;
        if i + 1 < n_layers {
            x = graph.leaky_relu(x, cfg.leaky_slope);
        }
    }
    Ok(x)
}

/// Critic forward on `graph`, producing one score per sample (`[B]`).
pub fn critic_graph(
    graph: &mut Graph,
    cfg: &CriticConfig,
    vars: &[Var],
    field: Var,
) -> Result<Var> {
    let [b, c, h, w] = graph.value(field).dims4("critic_forward")?;
    if c != 1 || h != cfg.input_size || w != cfg.input_size {
        return Err(Error::shape(
            "critic_forward",
            format!(
                "critic expects [B,1,{0},{0}], got [{b},{c},{h},{w}]",
                cfg.input_size
            ),
        ));
    }
    let mut x = field;
    for i in 0..cfg.widths.len() {
        x = graph.conv2d(x, vars[2 * i], Some(vars[2 * i + 1]), 2, 1)?;
        x = graph.leaky_relu(x, cfg.leaky_slope);
    }
    let n = cfg.widths.len();
    let score = graph.conv2d(x, vars[2 * n], Some(vars[2 * n + 1]), 1, 0)?;
    graph.reshape(score, vec![b])
}

/// Generator output for a `[B,1,h,w]` batch, computed on a throwaway graph.
pub fn generator_forward(params: &NetworkParams, lr_batch: &Tensor) -> Result<Tensor> {
    let cfg = params.generator_config()?;
    let mut graph = Graph::new();
    let vars = params.bind(&mut graph, false);
    let lr = graph.constant(lr_batch.clone());
    let out = generator_graph(&mut graph, cfg, &vars, lr)?;
    Ok(graph.value(out).clone())
}

/// Critic scores for a `[B,1,H,W]` batch.
pub fn critic_forward(params: &NetworkParams, field_batch: &Tensor) -> Result<Tensor> {
    let cfg = params.critic_config()?;
    let mut graph = Graph::new();
    let vars = params.bind(&mut graph, false);
    let x = graph.constant(field_batch.clone());
    let out = critic_graph(&mut graph, cfg, &vars, x)?;
    Ok(graph.value(out).clone())
}
