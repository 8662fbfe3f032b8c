//! A self-contained laboratory for measuring what activation functions cost.
//!
//! The crate covers the full loop: elementwise kernels ([`activations`]), a
//! small dense-network engine with backprop ([`nncore`]), deterministic
//! workload generation ([`workload`]), a wall-clock timing harness
//! ([`harness`]), derived statistics and table rendering ([`analysis`]), an
//! MNIST-style train-to-threshold experiment ([`mnist`]), and a toy x86
//! micro-op cost model ([`costmodel`]).

pub mod activations;
pub mod analysis;
pub mod clock;
pub mod costmodel;
pub mod fixtures;
pub mod harness;
pub mod matrix;
pub mod mnist;
pub mod nncore;
pub mod workload;

pub use activations::{ActivationKind, EvalMode, FunctionGroup, Hyperparams};
pub use matrix::Matrix;
