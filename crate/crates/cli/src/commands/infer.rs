use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use precip_sr::data::io::load_field_dir;
use precip_sr::data::{downsample, Split};
use precip_sr::inference::super_resolve;
use precip_sr::networks::read_network;
use precip_sr::{NetworkParams, PrecipField, Role};

use super::{load_config, load_split, open_corpus, write_fields};
use crate::exit::{with_code, EXIT_MISMATCH};
use crate::Global;

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Generator file, or a training checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of LR field files.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pub input: Option<PathBuf>,
    /// Corpus whose split is coarsened and super-resolved instead.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: Split,
}

/// Reads a generator from a network file or a checkpoint, whose first record
/// is the generator.
pub fn load_generator(path: &Path) -> Result<NetworkParams> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let net = read_network(&mut BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(with_code(EXIT_MISMATCH))?;
    if net.role() != Role::Generator {
        return Err(anyhow::anyhow!(
            "{} holds a {}, not a generator",
            path.display(),
            net.role()
        ))
        .map_err(with_code(EXIT_MISMATCH));
    }
    Ok(net)
}

pub fn run(global: &Global, args: &InferArgs) -> Result<()> {
    let mut cfg = load_config(global)?;
    let generator = load_generator(&args.checkpoint)?;
    let scale = generator.generator_config()?.scale_factor;

    let lr: Vec<(String, PrecipField)> = match (&args.input, &args.corpus) {
        (Some(dir), _) => {
            load_field_dir(dir).with_context(|| format!("reading {}", dir.display()))?
        }
        (None, Some(dir)) => {
            let split: Split = cfg.get("split", args.split)?;
            load_split(&open_corpus(dir)?, split)?
                .into_iter()
                .map(|(id, hr)| Ok((id, downsample(&hr, scale)?)))
                .collect::<Result<_>>()
                .map_err(with_code(EXIT_MISMATCH))?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    if let Some((id, f)) = lr.iter().find(|(_, f)| f.size() != lr[0].1.size()) {
        return Err(anyhow::anyhow!(
            "field {id} is {0}x{0}, expected {1}x{1} like the others",
            f.size(),
            lr[0].1.size()
        ))
        .map_err(with_code(EXIT_MISMATCH));
    }
    cfg.write_resolved(&global.out)?;

    let refs: Vec<&PrecipField> = lr.iter().map(|(_, f)| f).collect();
    let hr = super_resolve(&generator, &refs)?;
    let out: Vec<(String, PrecipField)> = lr.iter().map(|(id, _)| id.clone()).zip(hr).collect();
    write_fields(&global.out, &out)?;
    println!(
        "infer: {} fields at scale {scale} -> {}",
        out.len(),
        global.out.display()
    );
    Ok(())
}
