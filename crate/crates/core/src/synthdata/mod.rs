//! Synthetic stand-in for the E-DAIC feature corpus.

mod catalog;
mod corpus;
mod format;
mod generator;

pub use catalog::{feature_catalog, Catalog, FeatureSpec, Modality};
pub use corpus::{
    generate_corpus, Corpus, CorpusConfig, CorpusManifest, ManifestEntry, MANIFEST_FILE,
};
pub use format::{
    decode_feature, encode_feature, encode_raw, read_feature, write_feature, FEATURE_MAGIC,
};
pub use generator::{
    pad_or_truncate, Generator, Partition, PlantedSignal, SessionRecord, SignalStrength, PHQ8_MAX,
    WINDOW_FRACTION,
};
