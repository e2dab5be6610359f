//! Encoder features for the representation probes.

use alae_autodiff::{Array, Float};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datasets::VectorDataset;
use crate::model_zoo::NetworkBundle;

/// Rows encoded per forward pass.
const CHUNK: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// The latent code `w`.
    Short,
    /// The encoder's penultimate activations.
    Long,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Short => "short",
            FeatureKind::Long => "long",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    /// `[n, d]`.
    pub matrix: Array<f64>,
    pub labels: Vec<u8>,
}

impl FeatureSet {
    pub fn new(kind: FeatureKind, matrix: Array<f64>, labels: Vec<u8>) -> Result<Self, EvalError> {
        if matrix.ndim() != 2 || matrix.shape()[0] != labels.len() {
            return Err(EvalError::Mismatch(format!(
                "matrix {:?} vs {} labels",
                matrix.shape(),
                labels.len()
            )));
        }
        Ok(FeatureSet { kind, matrix, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.matrix.data()[i * d..(i + 1) * d]
    }
}

/// Encodes every sample of `data` at the bundle's current growth.
pub fn extract_features<T: Float>(
    bundle: &NetworkBundle<T>,
    data: &VectorDataset,
    kind: FeatureKind,
) -> Result<FeatureSet, EvalError> {
    if kind == FeatureKind::Long && bundle.is_style() {
        return Err(EvalError::Config(
            "long features are only defined for the fully connected encoder".into(),
        ));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut dim = 0;
    let n = data.len();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x: Array<T> = data.gather(&idx).cast();
        let out = bundle.encoder_forward(&x, bundle.growth())?;
        let m = match kind {
            FeatureKind::Short => out.w,
            FeatureKind::Long => out
                .long
                .ok_or_else(|| EvalError::Config("encoder exposes no penultimate layer".into()))?,
        };
        dim = m.shape()[1];
        rows.extend(m.data().iter().map(|v| v.as_f64()));
        start = end;
    }
    FeatureSet::new(kind, Array::from_vec(vec![n, dim], rows), data.labels.clone())
}
