use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use precip_sr::data::{downsample, upsample_field, Split};
use precip_sr::{PrecipField, UpsampleMode};

use super::{load_config, load_split, open_corpus, write_fields};
use crate::exit::{with_code, EXIT_MISMATCH};
use crate::Global;

#[derive(Debug, Args)]
pub struct CoarsenArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub scale: Option<usize>,
    /// Interpolate back onto the HR grid with this mode instead of writing
    /// the coarse fields.
    #[arg(long)]
    pub upsample: Option<UpsampleMode>,
}

pub fn run(global: &Global, args: &CoarsenArgs) -> Result<()> {
    let mut cfg = load_config(global)?;
    cfg.set_opt("scale", args.scale)?;
    let scale: usize = cfg.get("scale", 4)?;
    let split: Split = cfg.get("split", args.split)?;
    if ![2, 4, 8].contains(&scale) {
        return Err(crate::config::invalid(format!(
            "scale must be 2, 4 or 8, got {scale}"
        )));
    }
    let hr = load_split(&open_corpus(&args.corpus)?, split)?;
    cfg.write_resolved(&global.out)?;
    let out = hr
        .into_iter()
        .map(|(id, f)| {
            let lr = downsample(&f, scale)?;
            let f = match args.upsample {
                Some(mode) => upsample_field(&lr, scale, mode)?,
                None => lr,
            };
            Ok((id, f))
        })
        .collect::<Result<Vec<(String, PrecipField)>>>()
        .map_err(with_code(EXIT_MISMATCH))?;
    write_fields(&global.out, &out)?;
    println!(
        "coarsen: {} fields of {split} at scale {scale} -> {}",
        out.len(),
        global.out.display()
    );
    Ok(())
}
