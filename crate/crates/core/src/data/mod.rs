//! Precipitation fields: file IO, intensity scaling, LR/HR pairing, the
//! rain-fraction filter, chronological splits, synthetic generation and
//! artifact injection.

mod artifact;
mod corpus;
mod dataset;
mod field;
pub mod io;
mod preprocess;
mod synth;

pub use artifact::{inject_artifact, Rect};
pub use corpus::{
    field_file_name, split_counts, write_corpus, ArtifactConfig, CorpusConfig, CorpusSummary,
};
pub use dataset::{Dataset, NormalizedSet, Sample, Split, SplitCounts};
pub use field::PrecipField;
pub use preprocess::{
    denormalize, downsample, normalize, normalize_values, sample_filter, upsample_field,
    NORMALIZATION_CEILING, RAIN_THRESHOLD,
};
pub use synth::{synth_generate, SynthConfig};
