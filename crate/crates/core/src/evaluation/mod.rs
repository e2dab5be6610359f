//! Representation probes, perceptual path length and image artifacts.
//!
//! Probes (1NN and a one-vs-rest linear SVM) run on encoder features;
//! path length and the grids run on a trained bundle. Everything here is
//! read-only with respect to the bundle and deterministic given its inputs.

mod features;
mod grids;
mod knn;
mod ppl;
mod svm;

use std::path::PathBuf;

use thiserror::Error;

use crate::model_zoo::ModelError;

pub use features::{extract_features, FeatureKind, FeatureSet};
pub use grids::{
    fid_export, generate_samples, reconstruct_batch, site_partition, style_mixing_grid, to_tiles, traversal_grid, ImageGrid,
    Reconstruction, SiteRange,
};
pub use knn::knn_accuracy;
pub use ppl::{
    lerp, path_length_kernel, perceptual_path_length, slerp, ImageDistance, LatentSpace, MeanSquaredPixel, PplConfig,
    PplMode, SquaredEuclidean,
};
pub use svm::{linear_svm_accuracy, SvmConfig, SvmResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("feature mismatch: {0}")]
    Mismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        EvalError::Io {
            path: path.into(),
            reason: err.to_string(),
        }
    }
}
