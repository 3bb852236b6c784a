//! Melanoma Breslow-depth classification over deep-feature vectors.
//!
//! The crate covers the data model, a residual-adapter classifier trained
//! with focal loss and schedule-free Adam, stratified cross-validation,
//! thickness-regression analytics and 2-D feature projections. All numeric
//! code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the crate
//! root fix it to one precision.

pub mod checkpoint;
pub mod data;
pub mod evaluation;
pub mod focal;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod projection;
pub mod regression;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod training;

pub use scalar::Scalar;

pub type FocalConfigF64 = focal::FocalConfig<f64>;
pub type FocalConfigF32 = focal::FocalConfig<f32>;
pub type ModelParamsF64 = model::ModelParams<f64>;
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type MatrixF64 = linalg::Matrix<f64>;
pub type TrainConfigF64 = training::TrainConfig<f64>;
pub type TrainConfigF32 = training::TrainConfig<f32>;
pub type CheckpointF64 = checkpoint::Checkpoint<f64>;
pub type CheckpointF32 = checkpoint::Checkpoint<f32>;
pub type PcaBasisF64 = projection::PcaBasis<f64>;
