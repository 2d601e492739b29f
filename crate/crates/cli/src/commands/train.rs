use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use precip_sr::data::Split;
use precip_sr::training::{run_training, AdamConfig};
use precip_sr::{
    CriticConfig, Dataset, Error, GeneratorConfig, LossRecord, TrainConfig, TrainMode, UpsampleMode,
};

use super::{load_config, load_split, open_corpus};
use crate::config::RunConfig;
use crate::Global;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory written by `synth`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// `srcnn` or `wgan`.
    #[arg(long)]
    pub mode: Option<TrainMode>,
    /// HR/LR side ratio: 2, 4 or 8.
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Continue from the checkpoint in the output directory, if any.
    #[arg(long)]
    pub resume: bool,
}

/// Training configuration from config keys; `hr_size` fixes the critic input.
pub fn train_config(cfg: &mut RunConfig, hr_size: usize) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let g = GeneratorConfig::default();
    let c = CriticConfig::default();
    let a = AdamConfig::default();
    let slope = cfg.get("leaky_slope", g.leaky_slope)?;
    Ok(TrainConfig {
        mode: cfg.get("mode", d.mode)?,
        alpha: cfg.get("alpha", d.alpha)?,
        lambda_gp: cfg.get("lambda_gp", d.lambda_gp)?,
        batch_size: cfg.get("batch_size", d.batch_size)?,
        n_critic: cfg.get("n_critic", d.n_critic)?,
        adam: AdamConfig {
            learning_rate: cfg.get("learning_rate", a.learning_rate)?,
            beta1: cfg.get("beta1", a.beta1)?,
            beta2: cfg.get("beta2", a.beta2)?,
            epsilon: cfg.get("adam_epsilon", a.epsilon)?,
        },
        epochs: cfg.get("epochs", d.epochs)?,
        seed: cfg.get("seed", d.seed)?,
        generator: GeneratorConfig {
            scale_factor: cfg.get("scale", g.scale_factor)?,
            channels: cfg.get_list("generator_channels", &g.channels)?,
            kernel_sizes: cfg.get_list("generator_kernels", &g.kernel_sizes)?,
            upsample_mode: cfg.get::<UpsampleMode>("upsample_mode", g.upsample_mode)?,
            leaky_slope: slope,
        },
        critic: CriticConfig {
            widths: cfg.get_list("critic_widths", &c.widths)?,
            leaky_slope: slope,
            input_size: hr_size,
        },
    })
}

pub fn describe(r: &LossRecord) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    format!(
        "step {} {} wasserstein {} mse {} gp {} total {:.6}",
        r.step,
        r.kind,
        opt(r.wasserstein),
        opt(r.mse),
        opt(r.gp),
        r.total
    )
}

pub fn run(global: &Global, args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(global)?;
    cfg.set_opt("mode", args.mode)?;
    cfg.set_opt("scale", args.scale)?;
    cfg.set_opt("epochs", args.epochs)?;

    let corpus = open_corpus(&args.corpus)?;
    let train_hr = load_split(&corpus, Split::Train)?;
    let val_hr = load_split(&corpus, Split::Validation)?;
    let hr_size = train_hr
        .first()
        .map(|(_, f)| f.size())
        .ok_or_else(|| crate::config::invalid("corpus has no training fields"))?;
    let tc = train_config(&mut cfg, hr_size)?;
    cfg.write_resolved(&global.out)?;

    let scale = tc.generator.scale_factor;
    let train = Dataset::from_hr(Split::Train, train_hr, scale)?;
    let validation = Dataset::from_hr(Split::Validation, val_hr, scale)?;
    println!(
        "train: mode={} scale={} train={} validation={} (after filtering)",
        tc.mode,
        scale,
        train.len(),
        validation.len()
    );

    match run_training(&train, Some(&validation), &tc, &global.out, args.resume) {
        Ok(outcome) => {
            if let Some(last) = outcome.history.last() {
                println!("train: last record {}", describe(last));
            }
            match outcome.best {
                Some((epoch, rmse)) => println!(
                    "train: {} epochs, best validation RMSE {rmse:.6} at epoch {epoch}",
                    outcome.epochs_done
                ),
                None => println!("train: {} epochs", outcome.epochs_done),
            }
            Ok(())
        }
        Err(e) => {
            if let Error::Divergence { last_finite, .. } = &e {
                match last_finite {
                    Some(r) => eprintln!("last finite record: {}", describe(r)),
                    None => eprintln!("last finite record: none"),
                }
            }
            Err(e).with_context(|| format!("training into {}", global.out.display()))
        }
    }
}
