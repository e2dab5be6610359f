//! Perceptual path length.
//!
//! For pairs of latent endpoints, the generator is evaluated at `t` and
//! `t + ε` along the interpolation path (spherical in Z, linear in W);
//! the image distance between the two decodings, divided by `ε²`, is
//! averaged over pairs.

use alae_autodiff::{Array, Float};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model_zoo::{NetworkBundle, NoiseSource};
use crate::rng::normal_array;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatentSpace {
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "w")]
    W,
}

impl LatentSpace {
    pub fn name(self) -> &'static str {
        match self {
            LatentSpace::Z => "z",
            LatentSpace::W => "w",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PplMode {
    /// `t ~ U(0, 1)`.
    Full,
    /// `t ∈ {0, 1}`, each with probability 1/2.
    End,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PplConfig {
    pub space: LatentSpace,
    pub mode: PplMode,
    pub epsilon: f64,
    pub n_pairs: usize,
    /// Pairs decoded per forward pass.
    pub batch: usize,
}

impl Default for PplConfig {
    fn default() -> Self {
        PplConfig {
            space: LatentSpace::W,
            mode: PplMode::Full,
            epsilon: 1e-4,
            n_pairs: 10_000,
            batch: 100,
        }
    }
}

/// Distance between two flattened images.
pub trait ImageDistance {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Mean over pixels and channels of the squared difference.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanSquaredPixel;

impl ImageDistance for MeanSquaredPixel {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        SquaredEuclidean.distance(a, b) / a.len().max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredEuclidean;

impl ImageDistance for SquaredEuclidean {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}

pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Spherical interpolation of directions; the norm is interpolated
/// linearly. Falls back to `lerp` for (anti)parallel or zero endpoints.
pub fn slerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return lerp(a, b, t);
    }
    let cos = (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
    let omega = cos.acos();
    let s = omega.sin();
    if s < 1e-12 {
        return lerp(a, b, t);
    }
    let (ka, kb) = (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s);
    let norm = na + t * (nb - na);
    a.iter()
        .zip(b)
        .map(|(x, y)| norm * (ka * x / na + kb * y / nb))
        .collect()
}

fn interpolate(space: LatentSpace, a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    match space {
        LatentSpace::Z => slerp(a, b, t),
        LatentSpace::W => lerp(a, b, t),
    }
}

/// Per-pair path lengths for endpoints `a`, `b` (`[n, d]`) at positions
/// `ts`. `decode` maps a `[2n, d]` stack (all `t` points, then all `t + ε`
/// points) to `2n` images of any shape.
pub fn path_length_kernel(
    a: &Array<f64>,
    b: &Array<f64>,
    ts: &[f64],
    epsilon: f64,
    space: LatentSpace,
    decode: &mut dyn FnMut(&Array<f64>) -> Result<Array<f64>, EvalError>,
    distance: &dyn ImageDistance,
) -> Result<Vec<f64>, EvalError> {
    if !(epsilon > 0.0) {
        return Err(EvalError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if a.shape() != b.shape() || a.ndim() != 2 || a.shape()[0] != ts.len() {
        return Err(EvalError::Mismatch(format!(
            "endpoints {:?} / {:?} with {} positions",
            a.shape(),
            b.shape(),
            ts.len()
        )));
    }
    let (n, d) = (a.shape()[0], a.shape()[1]);
    let row = |m: &Array<f64>, i: usize| m.data()[i * d..(i + 1) * d].to_vec();
    let mut stack = Vec::with_capacity(2 * n * d);
    for shift in [0.0, epsilon] {
        for (i, &t) in ts.iter().enumerate() {
            stack.extend(interpolate(space, &row(a, i), &row(b, i), t + shift));
        }
    }
    let images = decode(&Array::from_vec(vec![2 * n, d], stack))?;
    let per = images.len() / (2 * n).max(1);
    let img = |k: usize| &images.data()[k * per..(k + 1) * per];
    Ok((0..n).map(|i| distance.distance(img(i), img(n + i)) / (epsilon * epsilon)).collect())
}

fn to_f64<T: Float>(a: &Array<T>) -> Array<f64> {
    a.cast()
}

/// Mean path length of the bundle's generator (at its current growth).
/// Noise maps are drawn once per pair and shared by both decodings.
pub fn perceptual_path_length<T: Float>(
    bundle: &NetworkBundle<T>,
    cfg: &PplConfig,
    distance: &dyn ImageDistance,
    rng: &mut ChaCha8Rng,
) -> Result<f64, EvalError> {
    if cfg.n_pairs == 0 || cfg.batch == 0 {
        return Err(EvalError::Config("n_pairs and batch must be positive".into()));
    }
    let d = bundle.latent_dim();
    let level = bundle.growth().level;
    let mut total = 0.0;
    let mut done = 0;
    while done < cfg.n_pairs {
        let n = cfg.batch.min(cfg.n_pairs - done);
        let z1: Array<T> = normal_array(&[n, d], rng);
        let z2: Array<T> = normal_array(&[n, d], rng);
        let ts: Vec<f64> = (0..n)
            .map(|_| match cfg.mode {
                PplMode::Full => rng.gen::<f64>(),
                PplMode::End => f64::from(u8::from(rng.gen::<bool>())),
            })
            .collect();
        let noise: Vec<Array<T>> = bundle
            .sample_noise(n, level, rng)
            .into_iter()
            .map(|m| {
                let mut shape = m.shape().to_vec();
                shape[0] *= 2;
                let mut data = m.data().to_vec();
                data.extend_from_slice(m.data());
                Array::from_vec(shape, data)
            })
            .collect();
        let (a, b) = match cfg.space {
            LatentSpace::Z => (to_f64(&z1), to_f64(&z2)),
            LatentSpace::W => (to_f64(&bundle.mapper_forward(&z1)?), to_f64(&bundle.mapper_forward(&z2)?)),
        };
        let mut decode = |latents: &Array<f64>| -> Result<Array<f64>, EvalError> {
            let l: Array<T> = latents.cast();
            let w = match cfg.space {
                LatentSpace::Z => bundle.mapper_forward(&l)?,
                LatentSpace::W => l,
            };
            let mut src = if noise.is_empty() {
                NoiseSource::Zero
            } else {
                NoiseSource::Maps(&noise)
            };
            Ok(to_f64(&bundle.generate_from(&w, &mut src)?))
        };
        let lengths = path_length_kernel(&a, &b, &ts, cfg.epsilon, cfg.space, &mut decode, distance)?;
        total += lengths.iter().sum::<f64>();
        done += n;
    }
    Ok(total / cfg.n_pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slerp_hits_endpoints_and_keeps_norm() {
        let a = [1.0, 0.0];
        let b = [0.0, 2.0];
        let m = slerp(&a, &b, 0.0);
        assert!((m[0] - 1.0).abs() < 1e-12 && m[1].abs() < 1e-12);
        let m = slerp(&a, &b, 1.0);
        assert!(m[0].abs() < 1e-12 && (m[1] - 2.0).abs() < 1e-12);
        let m = slerp(&a, &b, 0.5);
        let norm = (m[0] * m[0] + m[1] * m[1]).sqrt();
        assert!((norm - 1.5).abs() < 1e-12);
        assert!((m[0] - m[1]).abs() < 1e-12);
    }

    #[test]
    fn identical_endpoints_have_zero_length() {
        let a = Array::from_vec(vec![1, 3], vec![0.3, -1.0, 2.0]);
        let mut decode = |x: &Array<f64>| Ok(x.map(|v| v.tanh()));
        let l = path_length_kernel(&a, &a, &[0.4], 1e-4, LatentSpace::Z, &mut decode, &MeanSquaredPixel).unwrap();
        assert_eq!(l, vec![0.0]);
    }
}
