//! Skeleton generation by discrete denoising diffusion over node types and
//! edge states.

pub mod denoiser;
pub mod noise;
pub mod sample;
pub mod schedule;
pub mod train;

pub use denoiser::{Denoiser, DenoiserConfig, Prediction};
pub use noise::{forward_noise, node_pairs, pair_states};
pub use sample::{sample_skeleton, sample_skeletons, sample_with_size};
pub use schedule::{build_schedule, corpus_marginals, cosine_betas, ScheduleSpec, TransitionSchedule};
pub use train::{train_denoiser, DiffusionModel, DiffusionTrainConfig, LossTrace, MODEL_VERSION};
