//! One module per subcommand.

pub mod coarsen;
pub mod evaluate;
pub mod infer;
pub mod rank;
pub mod synth;
pub mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use precip_sr::data::io::{save_field, Corpus};
use precip_sr::data::Split;
use precip_sr::PrecipField;

use crate::config::RunConfig;
use crate::Global;

/// The config file with command-line overrides and `--seed` applied.
pub fn load_config(global: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(global.config.as_deref())?;
    cfg.apply_overrides(&global.overrides)?;
    cfg.set_opt("seed", global.seed)?;
    Ok(cfg)
}

pub fn open_corpus(dir: &Path) -> Result<Corpus> {
    Corpus::open(dir).with_context(|| format!("opening corpus {}", dir.display()))
}

pub fn load_split(corpus: &Corpus, split: Split) -> Result<Vec<(String, PrecipField)>> {
    corpus
        .load_split(split)
        .with_context(|| format!("loading {split} split of {}", corpus.dir.display()))
}

/// Writes `<id>.pfld` for every field into `dir`.
pub fn write_fields(dir: &Path, fields: &[(String, PrecipField)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (id, f) in fields {
        let path = dir.join(format!("{id}.{}", precip_sr::data::io::FIELD_EXT));
        save_field(&path, f).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
