//! Zero-shot classification by aligning weighted image crops with weighted
//! label descriptions, then repeatedly growing the best-aligned crops.
//!
//! The pieces, bottom up:
//!
//! - [`geometry`]: images, square regions, crop sampling and expansion;
//! - [`embedding`]: the [`Encoder`] trait, a deterministic toy encoder and a
//!   client for an external embedding server;
//! - [`alignment`]: softmax weights, the alignment matrix and top-K selection;
//! - [`pipeline`]: the expansion schedule, LGCA similarity and the baseline;
//! - [`bench`]: operation counters and the complexity check;
//! - [`cli`]: manifest-driven batch classification behind the `lgca` binary.

pub mod alignment;
pub mod bench;
pub mod cli;
pub mod config;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod rng;

pub use alignment::{
    build_matrix, select_topk, softmax_weights, AlignmentMatrix, SelectionSet, WeightedCropSet,
    WeightedDescriptionSet,
};
pub use bench::{verify_bound, BenchMode, ComplexityReport, OpCounters};
pub use config::RunConfig;
pub use embedding::{
    EmbedRequest, EmbeddingVector, Encoder, EncoderHandle, EncoderSpec, RemoteEncoder, RemoteOptions, ToyEncoder,
    ToyWorld,
};
pub use error::{Error, Result};
pub use geometry::{expand_region, extract_patch, sample_crops, CropParams, ImageFrame, Region};
pub use pipeline::{
    baseline_q_similarity, classify, expansion_step, lgca_similarity, make_schedule, LabelScore, Lgca, LgcaConfig,
    Schedule, ScheduleMode, SimilarityReport, StepTrace,
};
