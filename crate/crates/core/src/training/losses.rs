//! Training objectives.
//!
//! Sign convention for the critic: the optimizer minimizes
//! `-(mean F(real) - mean F(fake)) + GP`, which maximizes the Wasserstein
//! estimate while pushing gradient norms at interpolated samples towards one.

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::networks::{critic_forward, critic_graph, CriticConfig, NetworkParams};

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Mean squared error over every pixel of every sample, on the tape.
pub fn mse_graph(g: &mut Graph, generated: Var, target: Var) -> Result<Var> {
    same_shape("srcnn_loss", g.shape(generated), g.shape(target))?;
    let d = g.sub(generated, target)?;
    let sq = g.square(d);
    g.mean(sq)
}

pub fn srcnn_loss(generated: &Tensor, target: &Tensor) -> Result<f64> {
    same_shape("srcnn_loss", generated.shape(), target.shape())?;
    let mut g = Graph::new();
    let a = g.constant(generated.clone());
    let b = g.constant(target.clone());
    let l = mse_graph(&mut g, a, b)?;
    g.value(l).item()
}

/// `eps[b] * real[b] + (1 - eps[b]) * fake[b]` for each sample.
pub fn interpolate_samples(real: &Tensor, fake: &Tensor, eps: &[f64]) -> Result<Tensor> {
    same_shape("interpolate_samples", real.shape(), fake.shape())?;
    let b = real.shape().first().copied().unwrap_or(0);
    if eps.len() != b {
        return Err(Error::shape(
            "interpolate_samples",
            format!("{} coefficients for batch {b}", eps.len()),
        ));
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::invalid(format!(
            "interpolation coefficient {e} outside [0, 1]"
        )));
    }
    let inner = real.len() / b.max(1);
    let data = real
        .data()
        .iter()
        .zip(fake.data())
        .enumerate()
        .map(|(i, (&r, &f))| {
            let e = eps[i / inner];
            e * r + (1.0 - e) * f
        })
        .collect();
    Tensor::new(real.shape().to_vec(), data)
}

/// Nodes of the critic objective.
#[derive(Debug, Clone, Copy)]
pub struct CriticTerms {
    /// Quantity minimized by the critic optimizer.
    pub loss: Var,
    /// `mean F(real) - mean F(fake)`.
    pub wasserstein: Var,
    /// `lambda / B * sum_b (|grad F(x_hat_b)| - 1)^2`.
    pub gp: Var,
}

/// Builds the critic loss on `g`. `real` and `fake` are plain tensors, so the
/// generator cannot receive gradients from this objective.
pub fn critic_loss_graph(
    g: &mut Graph,
    cfg: &CriticConfig,
    critic: &[Var],
    real: &Tensor,
    fake: &Tensor,
    lambda_gp: f64,
    eps: &[f64],
) -> Result<CriticTerms> {
    let x_hat = interpolate_samples(real, fake, eps)?;
    let b = real.shape()[0];
    let real = g.constant(real.clone());
    let fake = g.constant(fake.clone());
    let f_real = critic_graph(g, cfg, critic, real)?;
    let f_fake = critic_graph(g, cfg, critic, fake)?;
    let m_real = g.mean(f_real)?;
    let m_fake = g.mean(f_fake)?;
    let wasserstein = g.sub(m_real, m_fake)?;

    let x_hat = g.param(x_hat);
    let f_hat = critic_graph(g, cfg, critic, x_hat)?;
    let s_hat = g.sum(f_hat)?;
    let grad = g.grad(s_hat, &[x_hat], true)?[0];
    let norms = g.l2_norm_per_batch(grad)?;
    if let Some(n) = g.value(norms).data().iter().find(|n| !n.is_finite()) {
        return Err(Error::Gradient(format!(
            "non-finite critic gradient norm {n}"
        )));
    }
    let dev = g.add_scalar(norms, -1.0);
    let sq = g.square(dev);
    let total = g.sum(sq)?;
    let gp = g.scale(total, lambda_gp / b as f64);

    let neg_w = g.neg(wasserstein);
    let loss = g.add(neg_w, gp)?;
    Ok(CriticTerms {
        loss,
        wasserstein,
        gp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLossValue {
    pub loss: f64,
    pub wasserstein: f64,
    pub gp: f64,
}

pub fn critic_loss(
    critic: &NetworkParams,
    real: &Tensor,
    fake: &Tensor,
    lambda_gp: f64,
    eps: &[f64],
) -> Result<CriticLossValue> {
    let cfg = critic.critic_config()?;
    let mut g = Graph::new();
    let vars = critic.bind(&mut g, true);
    let t = critic_loss_graph(&mut g, cfg, &vars, real, fake, lambda_gp, eps)?;
    Ok(CriticLossValue {
        loss: g.value(t.loss).item()?,
        wasserstein: g.value(t.wasserstein).item()?,
        gp: g.value(t.gp).item()?,
    })
}

/// Nodes of the generator objective.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms {
    pub loss: Var,
    /// Mean critic score of the generated batch.
    pub mean_score: Var,
    pub mse: Var,
}

/// `-mean F(generated) + alpha * mse(generated, target)`. The critic
/// variables should be constants so only the generator is updated.
pub fn generator_loss_graph(
    g: &mut Graph,
    cfg: &CriticConfig,
    critic: &[Var],
    generated: Var,
    target: Var,
    alpha: f64,
) -> Result<GeneratorTerms> {
    let mse = mse_graph(g, generated, target)?;
    let scores = critic_graph(g, cfg, critic, generated)?;
    let mean_score = g.mean(scores)?;
    let adv = g.neg(mean_score);
    let weighted = g.scale(mse, alpha);
    let loss = g.add(adv, weighted)?;
    Ok(GeneratorTerms {
        loss,
        mean_score,
        mse,
    })
}

pub fn generator_loss(
    critic: &NetworkParams,
    generated: &Tensor,
    target: &Tensor,
    alpha: f64,
) -> Result<f64> {
    let cfg = critic.critic_config()?;
    let mut g = Graph::new();
    let vars = critic.bind(&mut g, false);
    let gen = g.constant(generated.clone());
    let tgt = g.constant(target.clone());
    let t = generator_loss_graph(&mut g, cfg, &vars, gen, tgt, alpha)?;
    g.value(t.loss).item()
}

/// Mean critic score of a batch.
pub fn mean_score(critic: &NetworkParams, batch: &Tensor) -> Result<f64> {
    let s = critic_forward(critic, batch)?;
    Ok(s.data().iter().sum::<f64>() / s.len() as f64)
}
