//! The epoch loop with checkpoints and resume.
//!
//! Checkpoint layout: a generator network record, its optimizer state, a
//! metadata block, then the critic record and its optimizer state when the
//! run has a critic. Because the file opens with a plain network record it
//! can be handed to anything that loads a generator.
//!
//! ```text
//! "RDWS" | version u16 | mode u8 | epochs_done u64 | records u64
//!        | best_rmse f64 (NaN when none) | best_epoch u64 | has_critic u8
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{read_history, write_history, Adam, LossRecord, TrainConfig, TrainMode, Trainer};
use crate::binio::*;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::rmse;
use crate::inference::super_resolve;
use crate::networks::{read_network, write_network, NetworkParams};

pub const HISTORY_FILE: &str = "history.csv";
pub const LATEST_CHECKPOINT_FILE: &str = "latest.ckpt";
pub const BEST_GENERATOR_FILE: &str = "best_generator.rdwn";
pub const FINAL_GENERATOR_FILE: &str = "final_generator.rdwn";
pub const FINAL_CRITIC_FILE: &str = "final_critic.rdwn";

/// File name of the checkpoint written after `epoch` epochs.
pub fn epoch_checkpoint_name(epoch: u64) -> String {
    format!("ckpt_epoch_{epoch:04}.ckpt")
}

const META_MAGIC: &[u8; 4] = b"RDWS";
const META_VERSION: u16 = 1;

/// Everything needed to continue a run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub mode: TrainMode,
    pub epochs_done: u64,
    pub records: u64,
    pub best: Option<(u64, f64)>,
    pub generator: NetworkParams,
    pub generator_opt: Adam,
    pub critic: Option<(NetworkParams, Adam)>,
}

impl Checkpoint {
    fn write(&self, w: &mut impl Write) -> Result<()> {
        write_network(w, &self.generator)?;
        self.generator_opt.write(w)?;
        w.write_all(META_MAGIC)?;
        put_u16(w, META_VERSION)?;
        put_u8(w, (self.mode == TrainMode::Wgan) as u8)?;
        put_u64(w, self.epochs_done)?;
        put_u64(w, self.records)?;
        put_f64(w, self.best.map_or(f64::NAN, |b| b.1))?;
        put_u64(w, self.best.map_or(0, |b| b.0))?;
        put_u8(w, self.critic.is_some() as u8)?;
        if let Some((c, o)) = &self.critic {
            write_network(w, c)?;
            o.write(w)?;
        }
        Ok(())
    }

    fn read(r: &mut impl Read) -> Result<Self> {
        let generator = read_network(r)?;
        generator
            .generator_config()
            .map_err(|e| Error::format(e.to_string()))?;
        let generator_opt = Adam::read(r, &generator)?;
        expect_magic(r, META_MAGIC)?;
        let version = get_u16(r)?;
        if version != META_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mode = match get_u8(r)? {
            0 => TrainMode::Srcnn,
            1 => TrainMode::Wgan,
            t => return Err(Error::format(format!("unknown mode tag {t}"))),
        };
        let epochs_done = get_u64(r)?;
        let records = get_u64(r)?;
        let best_rmse = get_f64(r)?;
        let best_epoch = get_u64(r)?;
        let critic = match get_u8(r)? {
            0 => None,
            1 => {
                let c = read_network(r)?;
                c.critic_config()
                    .map_err(|e| Error::format(e.to_string()))?;
                let o = Adam::read(r, &c)?;
                Some((c, o))
            }
            t => return Err(Error::format(format!("bad critic flag {t}"))),
        };
        if (mode == TrainMode::Wgan) != critic.is_some() {
            return Err(Error::format(
                "checkpoint mode and critic presence disagree",
            ));
        }
        Ok(Self {
            mode,
            epochs_done,
            records,
            best: (!best_rmse.is_nan()).then_some((best_epoch, best_rmse)),
            generator,
            generator_opt,
            critic,
        })
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    Checkpoint::read(&mut r)
}

/// Writes through a temporary file so a crash never leaves a torn file.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: NetworkParams,
    pub critic: Option<NetworkParams>,
    pub history: Vec<LossRecord>,
    pub epochs_done: u64,
    /// Epoch (1-based) and mean validation RMSE of the best generator.
    pub best: Option<(u64, f64)>,
    pub history_path: PathBuf,
}

fn validation_rmse(generator: &NetworkParams, val: &Dataset) -> Result<f64> {
    let lr: Vec<_> = val.samples.iter().map(|s| &s.lr).collect();
    let pred = super_resolve(generator, &lr)?;
    let mut total = 0.0;
    for (p, s) in pred.iter().zip(&val.samples) {
        total += rmse(p, &s.hr)?;
    }
    Ok(total / val.len() as f64)
}

/// Trains for `cfg.epochs` epochs, writing the loss history, a checkpoint
/// after every epoch, the generator with the lowest mean validation RMSE and
/// the final networks into `dir`.
///
/// With `resume`, an existing checkpoint in `dir` is continued; since every
/// epoch draws from its own random stream the continuation is identical to
/// an uninterrupted run.
pub fn run_training(
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    dir: &Path,
    resume: bool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if train.scale_factor != cfg.generator.scale_factor {
        return Err(Error::Config(format!(
            "dataset scale {} differs from generator scale {}",
            train.scale_factor, cfg.generator.scale_factor
        )));
    }
    let hr_size = train.hr_size().expect("non-empty");
    if cfg.mode == TrainMode::Wgan && cfg.critic.input_size != hr_size {
        return Err(Error::Config(format!(
            "critic input size {} differs from HR size {hr_size}",
            cfg.critic.input_size
        )));
    }
    let validation = validation.filter(|v| !v.is_empty());
    fs::create_dir_all(dir)?;
    let ckpt_path = dir.join(LATEST_CHECKPOINT_FILE);
    let history_path = dir.join(HISTORY_FILE);

    let (mut trainer, mut history, mut epochs_done, mut best) = if resume && ckpt_path.exists() {
        let ck = load_checkpoint(&ckpt_path)?;
        let gen_cfg = ck.generator.generator_config()?;
        let critic_matches = match (&ck.critic, cfg.mode) {
            (Some((c, _)), TrainMode::Wgan) => c.critic_config()? == &cfg.critic,
            (None, TrainMode::Srcnn) => true,
            _ => false,
        };
        if ck.mode != cfg.mode || gen_cfg != &cfg.generator || !critic_matches {
            return Err(Error::Config(format!(
                "checkpoint {} was written by a different configuration",
                ckpt_path.display()
            )));
        }
        let mut history = read_history(BufReader::new(File::open(&history_path)?))?;
        if (history.len() as u64) < ck.records {
            return Err(Error::format(format!(
                "loss history has {} rows, checkpoint expects {}",
                history.len(),
                ck.records
            )));
        }
        history.truncate(ck.records as usize);
        let trainer = Trainer::from_parts(
            cfg.clone(),
            ck.generator,
            ck.generator_opt,
            ck.critic,
            ck.records,
        );
        (trainer, history, ck.epochs_done, ck.best)
    } else {
        (Trainer::new(cfg.clone())?, Vec::new(), 0, None)
    };
    let data = train.normalized()?;

    write_atomic(&history_path, |w| write_history(w, &history))?;
    while epochs_done < cfg.epochs {
        let records = trainer.run_epoch(&data, epochs_done)?;
        history.extend(records);
        epochs_done += 1;
        if let Some(val) = validation {
            let score = validation_rmse(&trainer.generator, val)?;
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((epochs_done, score));
                write_atomic(&dir.join(BEST_GENERATOR_FILE), |w| {
                    write_network(w, &trainer.generator)
                })?;
            }
        }
        write_atomic(&history_path, |w| write_history(w, &history))?;
        let ck = Checkpoint {
            mode: cfg.mode,
            epochs_done,
            records: trainer.records(),
            best,
            generator: trainer.generator.clone(),
            generator_opt: trainer.generator_opt.clone(),
            critic: trainer.critic.clone().zip(trainer.critic_opt.clone()),
        };
        write_atomic(&dir.join(epoch_checkpoint_name(epochs_done)), |w| {
            ck.write(w)
        })?;
        write_atomic(&ckpt_path, |w| ck.write(w))?;
    }

    write_atomic(&dir.join(FINAL_GENERATOR_FILE), |w| {
        write_network(w, &trainer.generator)
    })?;
    if let Some(c) = &trainer.critic {
        write_atomic(&dir.join(FINAL_CRITIC_FILE), |w| write_network(w, c))?;
    }
    Ok(TrainOutcome {
        generator: trainer.generator,
        critic: trainer.critic,
        history,
        epochs_done,
        best,
        history_path,
    })
}
