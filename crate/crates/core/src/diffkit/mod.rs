//! Minimal reverse-mode differentiation: a matrix tape, neural layers,
//! Gumbel-softmax sampling, optimizers and a finite-difference checker.

pub mod check;
pub mod gumbel;
pub mod matrix;
pub mod nn;
pub mod optim;
pub mod tape;

pub use check::{grad_check, kink_margin, relative_error};
pub use gumbel::{gumbel_noise, gumbel_softmax};
pub use matrix::Matrix;
pub use nn::{
    Bound, Dense, EdgeIndex, GatLayer, GatStack, HgtLayer, HgtStack, Mlp, ParamId, ParamStore,
    TypeLayout, TypedBlocks,
};
pub use optim::{Optimizer, OptimizerConfig};
pub use tape::{Gradients, Tape, Var};
