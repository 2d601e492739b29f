use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use precip_sr::evaluation::{rank_by_critic_difference, MetricsReport};

use super::load_config;
use crate::exit::{with_code, EXIT_CONFIG};
use crate::Global;

pub const RANKING_FILE: &str = "ranking.csv";

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Report CSV written by `evaluate` with a critic.
    #[arg(long)]
    pub report: PathBuf,
    /// Cases listed on each side.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

pub fn run(global: &Global, args: &RankArgs) -> Result<()> {
    let cfg = load_config(global)?;
    let file =
        File::open(&args.report).with_context(|| format!("opening {}", args.report.display()))?;
    let report = MetricsReport::read_csv(BufReader::new(file))
        .with_context(|| format!("reading {}", args.report.display()))
        .map_err(with_code(EXIT_CONFIG))?;
    let ranking = rank_by_critic_difference(&report, args.k)
        .with_context(|| format!("ranking {}", args.report.display()))
        .map_err(with_code(EXIT_CONFIG))?;
    cfg.write_resolved(&global.out)?;
    fs::create_dir_all(&global.out)?;

    let path = global.out.join(RANKING_FILE);
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(w, "side,rank,id,critic_diff")?;
    for (side, cases) in [
        ("negative", &ranking.negative),
        ("positive", &ranking.positive),
    ] {
        for (i, c) in cases.iter().enumerate() {
            let line = format!("{side},{},{},{}", i + 1, c.id, c.critic_diff);
            println!("{line}");
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    if ranking.truncated {
        eprintln!("rank: report has fewer than {} rows", args.k);
    }
    Ok(())
}
