//! Two-stage generation of heterogeneous graphs with node features: a
//! discrete diffusion model produces typed skeletons, then a GAN assigns each
//! node a feature vector drawn from per-type pools harvested from training
//! data. Includes the evaluation metrics and a small reverse-mode autodiff
//! engine the models are built on.

pub mod corpus;
pub mod diffkit;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod phase2;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{GroundMetric, HeteroGraph, SkeletonGraph, Structure, TypeTable};
