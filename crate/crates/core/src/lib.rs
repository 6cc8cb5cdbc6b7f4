//! Domain-incremental learning for binary real/fake detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`numkernel`]: dense rank-≤2 tensors, a reverse-mode gradient tape and
//!   a central-difference gradient checker.
//! * [`model`]: dense encoder + linear classifier with snapshots and
//!   `.dfil` checkpoints.
//! * [`losses`]: cross-entropy, supervised contrastive, soft-label and
//!   feature distillation terms and their weighted combination.
//! * [`replay`]: entropy / centroid scoring and replay-set selection.
//! * [`trainer`]: the incremental teacher/student loop and the Finetune,
//!   Offline, ER and LwF baselines.
//! * [`metrics`]: ACC, AA, AF and AUC.
//! * [`datasets`]: synthetic domain streams and CSV interchange.
//! * [`verify`]: independent oracle suites used by tests and `dfil verify`.
//!
//! All math is generic over [`Scalar`]; the aliases below fix it to `f64`
//! (the default everywhere) or `f32`.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numkernel;
pub mod replay;
pub mod scalar;
pub mod trainer;
pub mod verify;

pub use scalar::Scalar;

pub type Tensor = numkernel::Tensor<f64>;
pub type Tensor32 = numkernel::Tensor<f32>;
pub type Tape = numkernel::Tape<f64>;
pub type Model = model::Model<f64>;
pub type Model32 = model::Model<f32>;
pub type Prediction = model::Prediction<f64>;
pub type Dataset = datasets::Dataset<f64>;
pub type TaskSequence = datasets::TaskSequence<f64>;
pub type RunRecord = trainer::RunRecord<f64>;
