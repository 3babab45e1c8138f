//! Filesystem formats, the generation-service client, parallel drivers and
//! the `domcf` command line built on top of [`domcf_core`].

pub mod cli;
pub mod client;
pub mod error;
pub mod files;
pub mod parallel;
pub mod stemmer;

pub use client::{ClientConfig, ClientError, ExternalFill, ServiceClient};
pub use error::{Error, Result};
pub use files::{
    load_corpus, read_classifier, read_orientations, read_overrides, read_snapshot,
    write_classifier, write_orientations, write_snapshot, AugmentedRecord, LoadedCorpus,
};
pub use parallel::{augment_parallel, build_stats_parallel, generate_parallel};
pub use stemmer::{stemmer_for, SnowballStemmer};
