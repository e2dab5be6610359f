//! Training corpora: flat MNIST vectors with the same-writer /
//! different-writer split protocols, and square image directories with
//! per-level resolution pyramids.

mod batch;
mod idx;
mod images;
pub mod synth;
mod vector;

use std::path::PathBuf;

use thiserror::Error;

pub use batch::{BatchIterator, ImageBatches, VectorBatches};
pub use idx::{read_idx_images, read_idx_labels, IdxImages};
pub use images::{
    build_resolution_pyramid, denormalize, load_image, load_image_corpus, normalize, ImageCorpus, ImageRecord,
    MANIFEST,
};
pub use vector::{load_mnist, make_sw_dw_splits, sw_permutation, SplitMode, VectorDataset, SW_SPLIT_SEED};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot decode image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
