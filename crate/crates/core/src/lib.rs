//! Geometrically aligned transfer encoder (GATE) for molecular regression.
//!
//! The crate is organized around a small reverse-mode autodiff core and a
//! set of modules that build on it:
//!
//! - [`autodiff`]: dense rank-<=2 tensors on a linear tape, generic over the
//!   scalar type.
//! - [`smiles`]: SMILES subset parser, molecular graphs, feature vectors,
//!   and scaffold keys.
//! - [`dmpnn`]: directional message passing over bond states.
//! - [`networks`]: the model zoo (shared embedding, per-task encoder /
//!   transfer / inverse-transfer / head) plus the perturbation generator
//!   and checkpoint I/O.
//! - [`losses`]: regression, autoencoder, mapping, consistency, and
//!   distance losses with their weighted total.
//! - [`training`]: AdamW, early stopping, and the GATE / STL / MTL loops.
//! - [`data`]: CSV ingestion, normalization, random and scaffold splits,
//!   label corruption, and a synthetic correlated-task generator.
//! - [`geometry`]: numerical Christoffel symbols, geodesic integration, and
//!   pullback-metric diagnostics of the learned transfer map.
//! - [`stats`]: RMSE and a Jacobi-rotation PCA.
//! - [`experiments`]: cross-validation, ablation, corruption and report
//!   drivers consumed by the CLI.
//!
//! The numeric core is generic over [`scalar::Scalar`]; the aliases below
//! pin the shipped engine at f64, which every file format and tolerance in
//! the project assumes.

pub mod autodiff;
pub mod data;
pub mod dmpnn;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod gradcheck;
mod init;
pub mod losses;
pub mod networks;
pub mod scalar;
pub mod smiles;
pub mod stats;
pub mod training;

pub use error::{GateError, Result};

/// Scalar type of the shipped engine.
pub type Real = f64;

/// Tape over [`Real`].
pub type Tape = autodiff::Tape<Real>;

/// Parameter set over [`Real`].
pub type ParamSet = autodiff::ParamSet<Real>;

pub use autodiff::{ParamId, Shape, Value};
