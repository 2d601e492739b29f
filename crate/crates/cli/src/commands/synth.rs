use anyhow::{Context, Result};
use precip_sr::data::{write_corpus, ArtifactConfig, CorpusConfig, SplitCounts};
use precip_sr::SynthConfig;

use super::load_config;
use crate::config::RunConfig;
use crate::Global;

pub fn corpus_config(cfg: &mut RunConfig) -> Result<CorpusConfig> {
    let d = CorpusConfig::default();
    let s = SynthConfig::default();
    let a = ArtifactConfig::default();
    let splits = SplitCounts {
        train: cfg.get("n_train", d.splits.train)?,
        validation: cfg.get("n_validation", d.splits.validation)?,
        test: cfg.get("n_test", d.splits.test)?,
    };
    let synth = SynthConfig {
        size: cfg.get("size", s.size)?,
        n_fields: splits.total(),
        band_fraction: cfg.get("band_fraction", s.band_fraction)?,
        advection_speed: (
            cfg.get("advection_speed_min", s.advection_speed.0)?,
            cfg.get("advection_speed_max", s.advection_speed.1)?,
        ),
        cell_density: cfg.get("cell_density", s.cell_density)?,
        spectral_slope: cfg.get("spectral_slope", s.spectral_slope)?,
        event_hours: cfg.get("event_hours", s.event_hours)?,
        peak_range: (
            cfg.get("peak_min", s.peak_range.0)?,
            cfg.get("peak_max", s.peak_range.1)?,
        ),
        max_retries: cfg.get("max_retries", s.max_retries)?,
        seed: cfg.get("seed", s.seed)?,
    };
    let artifacts = ArtifactConfig {
        fraction: cfg.get("artifact_fraction", a.fraction)?,
        level: cfg.get("artifact_level", a.level)?,
        jitter: cfg.get("artifact_jitter", a.jitter)?,
        min_side: cfg.get("artifact_min_side", a.min_side)?,
        max_side: cfg.get("artifact_max_side", a.max_side)?,
    };
    Ok(CorpusConfig {
        synth,
        splits,
        artifacts,
    })
}

pub fn run(global: &Global) -> Result<()> {
    let mut cfg = load_config(global)?;
    let corpus = corpus_config(&mut cfg)?;
    cfg.write_resolved(&global.out)?;
    let summary = write_corpus(&corpus, &global.out)
        .with_context(|| format!("writing corpus to {}", global.out.display()))?;
    println!(
        "synth: train={} validation={} test={} artifacts={} -> {}",
        summary.splits.train,
        summary.splits.validation,
        summary.splits.test,
        summary.artifacts,
        global.out.display()
    );
    Ok(())
}
