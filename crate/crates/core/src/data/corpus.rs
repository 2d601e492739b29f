//! Writing a synthetic corpus: chronological splits, optional artifacts in
//! part of the test split, one field file per sample plus a manifest.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;

use super::artifact::{inject_artifact, Rect};
use super::dataset::{Split, SplitCounts};
use super::io::{save_field, write_manifest, ManifestEntry, FIELD_EXT, MANIFEST_NAME};
use super::synth::{synth_generate, SynthConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactConfig {
    /// Fraction of test fields that receive an artifact.
    pub fraction: f64,
    /// Intensity inside the rectangle, mm hr⁻¹.
    pub level: f32,
    pub jitter: f32,
    /// Rectangle side range in pixels, inclusive.
    pub min_side: usize,
    pub max_side: usize,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            level: 12.0,
            jitter: 0.5,
            min_side: 8,
            max_side: 16,
        }
    }
}

impl ArtifactConfig {
    pub fn validate(&self, grid: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::Config(format!(
                "artifact fraction {} outside [0, 1]",
                self.fraction
            )));
        }
        if self.min_side == 0 || self.min_side > self.max_side || self.max_side > grid {
            return Err(Error::Config(format!(
                "artifact sides {}..={} do not fit a {grid} grid",
                self.min_side, self.max_side
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub synth: SynthConfig,
    pub splits: SplitCounts,
    pub artifacts: ArtifactConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            splits: SplitCounts {
                train: 70,
                validation: 15,
                test: 15,
            },
            artifacts: ArtifactConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSummary {
    pub splits: SplitCounts,
    pub artifacts: usize,
}

/// File name of the `index`-th field in time order.
pub fn field_file_name(index: usize) -> String {
    format!("f{index:06}.{FIELD_EXT}")
}

/// Generates the corpus described by `cfg` into `dir`.
pub fn write_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<CorpusSummary> {
    let mut synth = cfg.synth.clone();
    synth.n_fields = cfg.splits.total();
    synth.validate()?;
    cfg.artifacts.validate(synth.size)?;
    let mut fields = synth_generate(&synth)?;

    let test_start = cfg.splits.train + cfg.splits.validation;
    let n_artifacts = (cfg.artifacts.fraction * cfg.splits.test as f64).round() as usize;
    let mut pick = rng::stream(synth.seed, rng::tag::ARTIFACT_PICK);
    let mut chosen: Vec<usize> = sample(&mut pick, cfg.splits.test, n_artifacts).into_vec();
    chosen.sort_unstable();
    for &k in &chosen {
        let i = test_start + k;
        let (lo, hi) = (cfg.artifacts.min_side, cfg.artifacts.max_side);
        let height = pick.gen_range(lo..=hi);
        let width = pick.gen_range(lo..=hi);
        let rect = Rect {
            row: pick.gen_range(0..=synth.size - height),
            col: pick.gen_range(0..=synth.size - width),
            height,
            width,
        };
        let seed = synth.seed.wrapping_add(i as u64);
        fields[i] = inject_artifact(
            &fields[i],
            rect,
            cfg.artifacts.level,
            cfg.artifacts.jitter,
            seed,
        )?;
    }

    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        let filename = field_file_name(i);
        save_field(&dir.join(&filename), f)?;
        entries.push(ManifestEntry {
            filename,
            split: cfg.splits.split_of(i).expect("index below total"),
            artifact: f.artifact,
        });
    }
    write_manifest(&dir.join(MANIFEST_NAME), &entries)?;
    Ok(CorpusSummary {
        splits: cfg.splits,
        artifacts: chosen.len(),
    })
}

/// Counts of manifest entries per split.
pub fn split_counts(entries: &[ManifestEntry]) -> SplitCounts {
    let count = |s: Split| entries.iter().filter(|e| e.split == s).count();
    SplitCounts {
        train: count(Split::Train),
        validation: count(Split::Validation),
        test: count(Split::Test),
    }
}
