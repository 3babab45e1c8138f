//! Domain-counterfactual example generation.
//!
//! The crate turns a labeled example from one domain into rewrites that read
//! as if they came from another domain while keeping the task label. Work is
//! split in two steps: a corruption step masks the n-grams that tie the text
//! to its origin domain, and a reconstruction step fills the masked slots
//! with words related to the destination domain.
//!
//! Everything here is pure computation over in-memory corpora and is
//! `no_std` (with `alloc`). File formats, the stemmer backend, the HTTP
//! client for the neural reconstruction service and the command-line tool
//! live in the `domcf` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod corruption;
pub mod error;
pub mod filter;
mod math;
pub mod orientation;
pub mod pipeline;
pub mod reconstruct;
pub mod stats;

pub use corpus::{
    ngrams, tokenize, CorpusConfig, Document, DomainId, DomainRegistry, IdentityStemmer, NGram,
    Stemmer,
};
pub use corruption::{
    mask, mask_for_training, mask_random, masking_rate, CorruptionConfig, MaskReason, MaskedSpan,
    MaskedTemplate, Segment,
};
pub use error::{Error, Result};
pub use filter::{
    apply_filter, word_overlap, DomainClassifier, FilterConfig, FilterVerdict, RejectReason,
};
pub use orientation::{
    build_orientations, sample_training_orientation, OrientationDescriptor, OrientationSet,
};
pub use pipeline::{
    augment, oracle_match, report, AugmentContext, AugmentedDataset, CounterfactualCandidate,
    ExternalReconstructor, GenerationMode, GenerationPlan, Manifest, Report,
};
pub use reconstruct::{
    build_allowed_vocabulary, fill_native, AllowedVocabulary, CooccurrenceTable, FillVocabulary,
    NativeFill, NativeFillConfig, ReconstructorKind, SurfaceForms,
};
pub use stats::{build_stats, DocFreqCounter, StatsConfig, StatsSnapshot};
