//! Bias-corrected Adam with per-parameter moments and step counts.
//!
//! A parameter's moments advance only on steps where it receives a
//! gradient, so parameters shared by two training steps (E and G) see one
//! Adam step per update they take part in.

use alae_autodiff::{Array, Float};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.002,
            beta1: 0.0,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub step: u64,
    pub m: Array<T>,
    pub v: Array<T>,
}

impl<T: Float> Moments<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Moments {
            step: 0,
            m: Array::zeros(shape),
            v: Array::zeros(shape),
        }
    }
}

/// One Adam step on `param` in place.
pub fn adam_update<T: Float>(param: &mut Array<T>, grad: &Array<T>, mom: &mut Moments<T>, cfg: &AdamConfig, lr: f64) {
    assert_eq!(param.shape(), grad.shape(), "gradient shape mismatch");
    mom.step += 1;
    let t = mom.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
    let (one_b1, one_b2) = (T::from_f64(1.0 - cfg.beta1), T::from_f64(1.0 - cfg.beta2));
    let step_size = T::from_f64(lr / bc1);
    let inv_bc2_sqrt = T::from_f64(1.0 / bc2.sqrt());
    let eps = T::from_f64(cfg.eps);
    let m = mom.m.data_mut();
    let v = mom.v.data_mut();
    for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        *p -= step_size * *m / (v.sqrt() * inv_bc2_sqrt + eps);
    }
}

/// Moments for every parameter of a store, indexed like the store.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub moments: Vec<Moments<T>>,
}

impl<T: Float> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, moments: Vec::new() }
    }

    /// Clears all moments (used when the network grows).
    pub fn reset(&mut self) {
        self.moments.clear();
    }

    /// Makes sure moments exist for parameters added since the last call.
    pub fn sync(&mut self, shapes: impl Iterator<Item = Vec<usize>>) {
        for (i, s) in shapes.enumerate() {
            if i >= self.moments.len() {
                self.moments.push(Moments::zeros(&s));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let mut p = Array::<f64>::from_f64(vec![1], &[1.0f64]);
        let mut mom = Moments::zeros(&[1]);
        adam_update(&mut p, &Array::from_f64(vec![1], &[0.1]), &mut mom, &cfg, cfg.lr);
        // m_hat = 0.1, v_hat = 0.01 -> step = lr * 0.1 / (0.1 + eps)
        let expected = 1.0 - 0.002 * 0.1 / (0.1 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert!((p.item() - (1.0 - 0.002)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_decays_second_moment() {
        let cfg = AdamConfig::default();
        let mut p = Array::<f64>::from_f64(vec![2], &[1.0f64, -2.0]);
        let mut mom = Moments::zeros(&[2]);
        mom.v = Array::from_f64(vec![2], &[0.5, 0.25]);
        mom.step = 3;
        adam_update(&mut p, &Array::zeros(&[2]), &mut mom, &cfg, cfg.lr);
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert_eq!(mom.v.data(), &[0.5 * 0.99, 0.25 * 0.99]);
    }

    #[test]
    fn no_first_moment_memory() {
        let cfg = AdamConfig::default();
        let mut p = Array::<f64>::from_f64(vec![1], &[0.0f64]);
        let mut mom = Moments::zeros(&[1]);
        adam_update(&mut p, &Array::from_f64(vec![1], &[0.3]), &mut mom, &cfg, cfg.lr);
        let m1 = mom.m.item();
        adam_update(&mut p, &Array::from_f64(vec![1], &[0.3]), &mut mom, &cfg, cfg.lr);
        assert_eq!(mom.m.item(), m1);
    }
}
