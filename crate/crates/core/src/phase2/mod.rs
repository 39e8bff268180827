//! Feature assignment: a generator picks each node's feature vector from its
//! type's pool, trained adversarially against a graph-level discriminator.

pub mod discriminator;
pub mod generator;
pub mod train;

pub use discriminator::{feature_blocks, Discriminator, DiscriminatorConfig};
pub use generator::{Assignment, Generator, GeneratorConfig, Mode};
pub use train::{generate, train_gan, GanConfig, GanModel, GanTrace, GanTrainer, StepRecord, GAN_VERSION};
