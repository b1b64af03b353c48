//! Dynamic-frame-rate scheduling and tokenization for speech feature
//! sequences.
//!
//! The pipeline: a [`FeatureSequence`] of encoder frames is partitioned by the
//! [`scheduler`] into variable-length segments (a [`Scheme`]), each segment is
//! averaged by [`downsample`], the averaged rows are mapped to codes by
//! [`fsq`], and codes plus segment lengths are packed into a [`TokenStream`].
//! [`meltman`] generates random schemes for training-time augmentation and
//! [`streaming`] schedules long inputs chunk by chunk.

pub mod bench;
pub mod cli;
pub mod downsample;
mod error;
pub mod features;
pub mod fsq;
pub mod meltman;
pub mod objective;
pub mod scheduler;
pub mod scheme;
pub mod streaming;
pub mod tokens;

pub use downsample::{
    downsample, downsample_compact, downsample_expanded, downsample_fast, scheme_from_proportions,
    DownsampleMode,
};
pub use error::{Error, Result};
pub use features::{load_features, save_features, FeatureFormat, FeatureSequence};
pub use fsq::{fsq_dequantize, fsq_quantize, fsq_quantize_seq, FsqSpec};
pub use meltman::{cool_bypass, melt_sample, melt_scheme, MeltConfig, MeltSampler};
pub use objective::{
    alignment_cost, objective_cosine, objective_jh, objective_l2, precompute_costs, segment_cost,
    CostTable, Objective, PhoneBoundaries,
};
pub use scheduler::{
    count_states, schedule, schedule_pruned, schedule_vanilla, target_length, Schedule,
    SchedulerParams, StateCounts,
};
pub use scheme::Scheme;
pub use streaming::{chunk_plan, crossfade, stream_schedule, ChunkConfig, ChunkPlan};
pub use tokens::{bitrate, pack, unpack, Bitrate, Token, TokenStream};
