//! Small feed-forward networks trained from scratch, with a weight prior
//! that biases the first layer toward dimension-wise comparison of the two
//! halves of the input.
//!
//! The crate covers the whole pipeline of an identity-relation experiment:
//!
//! - [`dataset`]: balanced binary datasets for the identity relation and
//!   simple bit-pattern tasks, with stratified train/test splits.
//! - [`prior`]: the default comparison matrix and the L1/L2 prior losses.
//! - [`model`]: a ReLU MLP with optional difference-unit fusion (early or
//!   mid) and one or two softmax heads.
//! - [`objective`], [`optim`], [`trainer`]: cross-entropy plus prior,
//!   SGD/Adam, and the batch-size-1 training loop.
//!
//! All arithmetic is `f64` and all randomness flows through an explicitly
//! seeded [`Rng`], so a run is a pure function of its configuration.

pub mod dataset;
mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod optim;
pub mod prior;
pub mod trainer;

pub use dataset::{Class, Dataset, Example, PatternKind, Split, Task};
pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
pub use model::{Fusion, Gradients, Init, Mlp, MlpConfig};
pub use objective::LossBreakdown;
pub use optim::{Optimizer, OptimizerKind};
pub use prior::{DefaultPrior, PriorVariant};
pub use trainer::{RunConfig, RunRecord};
