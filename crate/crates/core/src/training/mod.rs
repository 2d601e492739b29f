//! MSE (SRCNN) and WGAN-GP training with Adam, checkpoints and a CSV loss
//! history.

mod history;
mod losses;
mod optim;
mod runner;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

pub use history::{read_history, write_history, HISTORY_HEADER};
pub use losses::{
    critic_loss, critic_loss_graph, generator_loss, generator_loss_graph, interpolate_samples,
    mean_score, mse_graph, srcnn_loss, CriticLossValue, CriticTerms, GeneratorTerms,
};
pub use optim::{Adam, AdamConfig};
pub use runner::{
    epoch_checkpoint_name, load_checkpoint, run_training, Checkpoint, TrainOutcome,
    BEST_GENERATOR_FILE, FINAL_CRITIC_FILE, FINAL_GENERATOR_FILE, HISTORY_FILE,
    LATEST_CHECKPOINT_FILE,
};

use crate::autodiff::{Graph, Tensor};
use crate::data::NormalizedSet;
use crate::error::{Error, Result};
use crate::networks::{
    build_critic, build_generator, generator_forward, generator_graph, CriticConfig,
    GeneratorConfig, NetworkParams,
};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Srcnn,
    Wgan,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Srcnn => "srcnn",
            TrainMode::Wgan => "wgan",
        })
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srcnn" => Ok(TrainMode::Srcnn),
            "wgan" => Ok(TrainMode::Wgan),
            other => Err(Error::Config(format!("unknown training mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Weight of the MSE term in the generator loss.
    pub alpha: f64,
    pub lambda_gp: f64,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub adam: AdamConfig,
    pub epochs: u64,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub critic: CriticConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Wgan,
            alpha: 10.0,
            lambda_gp: 10.0,
            batch_size: 32,
            n_critic: 5,
            adam: AdamConfig::default(),
            epochs: 10,
            seed: 0,
            generator: GeneratorConfig::default(),
            critic: CriticConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.lambda_gp >= 0.0 && self.lambda_gp.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_gp must be >= 0, got {}",
                self.lambda_gp
            )));
        }
        if self.n_critic == 0 {
            return Err(Error::Config("n_critic must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        self.adam.validate()?;
        self.generator.validate()?;
        if self.mode == TrainMode::Wgan {
            self.critic.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Srcnn,
    Critic,
    Generator,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Srcnn => "srcnn",
            RecordKind::Critic => "critic",
            RecordKind::Generator => "generator",
        })
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srcnn" => Ok(RecordKind::Srcnn),
            "critic" => Ok(RecordKind::Critic),
            "generator" => Ok(RecordKind::Generator),
            other => Err(Error::format(format!("unknown record mode '{other}'"))),
        }
    }
}

/// One optimizer update. `total` is the quantity that update minimized.
///
/// Critic rows: `total = -wasserstein + gp`. Generator rows:
/// `total = -mean F(G(z)) + alpha * mse`, with `wasserstein` the estimate on
/// the same batch. Srcnn rows: `total = mse`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub kind: RecordKind,
    pub wasserstein: Option<f64>,
    pub mse: Option<f64>,
    pub gp: Option<f64>,
    pub total: f64,
}

impl LossRecord {
    pub fn generator_loss(&self) -> Option<f64> {
        (self.kind != RecordKind::Critic).then_some(self.total)
    }

    pub fn critic_loss(&self) -> Option<f64> {
        (self.kind == RecordKind::Critic).then_some(self.total)
    }

    fn is_finite(&self) -> bool {
        self.total.is_finite()
            && [self.wasserstein, self.mse, self.gp]
                .iter()
                .all(|v| v.is_none_or(f64::is_finite))
    }
}

/// Networks, optimizer state and the record counter of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: NetworkParams,
    pub generator_opt: Adam,
    pub critic: Option<NetworkParams>,
    pub critic_opt: Option<Adam>,
    records: u64,
    last_finite: Option<LossRecord>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = build_generator(&config.generator, config.seed)?;
        let generator_opt = Adam::new(config.adam, &generator);
        let (critic, critic_opt) = match config.mode {
            TrainMode::Wgan => {
                let c = build_critic(&config.critic, config.seed)?;
                let o = Adam::new(config.adam, &c);
                (Some(c), Some(o))
            }
            TrainMode::Srcnn => (None, None),
        };
        Ok(Self {
            config,
            generator,
            generator_opt,
            critic,
            critic_opt,
            records: 0,
            last_finite: None,
        })
    }

    pub(crate) fn from_parts(
        config: TrainConfig,
        generator: NetworkParams,
        generator_opt: Adam,
        critic: Option<(NetworkParams, Adam)>,
        records: u64,
    ) -> Self {
        let (critic, critic_opt) = critic.unzip();
        Self {
            config,
            generator,
            generator_opt,
            critic,
            critic_opt,
            records,
            last_finite: None,
        }
    }

    /// Number of records emitted so far.
    pub fn records(&self) -> u64 {
        self.records
    }

    fn emit(&mut self, mut rec: LossRecord) -> Result<LossRecord> {
        rec.step = self.records;
        if !rec.is_finite() {
            return Err(Error::Divergence {
                step: rec.step,
                reason: format!("non-finite {} loss {:?}", rec.kind, rec),
                last_finite: self.last_finite.clone().map(Box::new),
            });
        }
        self.records += 1;
        self.last_finite = Some(rec.clone());
        Ok(rec)
    }

    fn check_grads(&self, kind: RecordKind, grads: &[Tensor]) -> Result<()> {
        if grads.iter().all(Tensor::is_finite) {
            return Ok(());
        }
        Err(Error::Divergence {
            step: self.records,
            reason: format!("non-finite {kind} gradient"),
            last_finite: self.last_finite.clone().map(Box::new),
        })
    }

    /// One update on a `(lr, hr)` batch. Srcnn mode takes a single MSE step.
    /// Wgan mode takes `n_critic` critic steps on the batch, each with fresh
    /// interpolation coefficients from `rng`, then one generator step. The
    /// generated fields are computed once since the generator does not move
    /// during the critic steps.
    pub fn train_step(
        &mut self,
        batch: &(Tensor, Tensor),
        rng: &mut Rng,
    ) -> Result<Vec<LossRecord>> {
        match self.config.mode {
            TrainMode::Srcnn => Ok(vec![self.srcnn_update(batch)?]),
            TrainMode::Wgan => {
                let fake = generator_forward(&self.generator, &batch.0)?;
                let mut out = Vec::with_capacity(self.config.n_critic + 1);
                for _ in 0..self.config.n_critic {
                    out.push(self.critic_update(&batch.1, &fake, rng)?);
                }
                out.push(self.generator_update(batch)?);
                Ok(out)
            }
        }
    }

    fn srcnn_update(&mut self, (lr, hr): &(Tensor, Tensor)) -> Result<LossRecord> {
        let mut g = Graph::new();
        let vars = self.generator.bind(&mut g, true);
        let x = g.constant(lr.clone());
        let y = g.constant(hr.clone());
        let out = generator_graph(&mut g, &self.config.generator, &vars, x)?;
        let loss = mse_graph(&mut g, out, y)?;
        let mse = g.value(loss).item()?;
        let rec = self.emit(LossRecord {
            step: 0,
            kind: RecordKind::Srcnn,
            wasserstein: None,
            mse: Some(mse),
            gp: None,
            total: mse,
        })?;
        let grads = g.backward(loss, &vars)?;
        self.check_grads(RecordKind::Srcnn, &grads)?;
        self.generator_opt.update(&mut self.generator, &grads)?;
        Ok(rec)
    }

    fn critic_update(&mut self, hr: &Tensor, fake: &Tensor, rng: &mut Rng) -> Result<LossRecord> {
        let critic = self.critic.as_ref().expect("wgan mode has a critic");
        let eps: Vec<f64> = (0..hr.shape()[0]).map(|_| rng.gen::<f64>()).collect();
        let mut g = Graph::new();
        let vars = critic.bind(&mut g, true);
        let t = critic_loss_graph(
            &mut g,
            &self.config.critic,
            &vars,
            hr,
            fake,
            self.config.lambda_gp,
            &eps,
        )?;
        let rec = LossRecord {
            step: 0,
            kind: RecordKind::Critic,
            wasserstein: Some(g.value(t.wasserstein).item()?),
            mse: None,
            gp: Some(g.value(t.gp).item()?),
            total: g.value(t.loss).item()?,
        };
        let grads = g.backward(t.loss, &vars)?;
        let rec = self.emit(rec)?;
        self.check_grads(RecordKind::Critic, &grads)?;
        let critic = self.critic.as_mut().expect("wgan mode has a critic");
        self.critic_opt
            .as_mut()
            .expect("wgan mode has a critic optimizer")
            .update(critic, &grads)?;
        Ok(rec)
    }

    fn generator_update(&mut self, (lr, hr): &(Tensor, Tensor)) -> Result<LossRecord> {
        let critic = self.critic.as_ref().expect("wgan mode has a critic");
        let real_score = mean_score(critic, hr)?;
        let mut g = Graph::new();
        let gen_vars = self.generator.bind(&mut g, true);
        let critic_vars = critic.bind(&mut g, false);
        let x = g.constant(lr.clone());
        let y = g.constant(hr.clone());
        let out = generator_graph(&mut g, &self.config.generator, &gen_vars, x)?;
        let t = generator_loss_graph(
            &mut g,
            &self.config.critic,
            &critic_vars,
            out,
            y,
            self.config.alpha,
        )?;
        let rec = LossRecord {
            step: 0,
            kind: RecordKind::Generator,
            wasserstein: Some(real_score - g.value(t.mean_score).item()?),
            mse: Some(g.value(t.mse).item()?),
            gp: None,
            total: g.value(t.loss).item()?,
        };
        let grads = g.backward(t.loss, &gen_vars)?;
        let rec = self.emit(rec)?;
        self.check_grads(RecordKind::Generator, &grads)?;
        self.generator_opt.update(&mut self.generator, &grads)?;
        Ok(rec)
    }

    /// One pass over `data` in shuffled mini-batches (the last one possibly
    /// short), drawing the shuffle and interpolation coefficients from the
    /// epoch's own random stream.
    pub fn run_epoch(&mut self, data: &NormalizedSet, epoch: u64) -> Result<Vec<LossRecord>> {
        if data.len == 0 {
            return Err(Error::invalid("empty training set"));
        }
        let mut rng = rng::stream(self.config.seed, rng::tag::EPOCH_BASE + epoch);
        let mut order: Vec<usize> = (0..data.len).collect();
        order.shuffle(&mut rng);
        let mut out = Vec::new();
        for chunk in order.chunks(self.config.batch_size) {
            let batch = data.batch(chunk)?;
            out.extend(self.train_step(&batch, &mut rng)?);
        }
        Ok(out)
    }
}
