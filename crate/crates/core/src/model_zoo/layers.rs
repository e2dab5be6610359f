//! Linear and convolutional layers with runtime weight scaling.
//!
//! Weights are stored with unit variance and multiplied by
//! [`equalized_scale`] on every forward pass, so Adam sees every layer on
//! the same scale.

use alae_autodiff::{Array, Float, Var};
use rand_chacha::ChaCha8Rng;

use crate::params::{Bound, Group, ParamId, ParamStore};
use crate::rng::normal_array;

/// He-style constant applied to unit-variance weights at every forward.
pub fn equalized_scale(fan_in: usize) -> f64 {
    assert!(fan_in >= 1, "fan_in must be positive");
    (2.0 / fan_in as f64).sqrt()
}

pub const LRELU_SLOPE: f64 = 0.2;

/// Fully connected layer `[N, in] -> [N, out]`.
#[derive(Clone, Debug)]
pub struct EqLinear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl EqLinear {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        group: Group,
        fan_in: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self::with_bias(store, name, group, fan_in, fan_out, Array::zeros(&[fan_out]), rng)
    }

    pub fn with_bias<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        group: Group,
        fan_in: usize,
        fan_out: usize,
        bias: Array<T>,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), group, normal_array(&[fan_in, fan_out], rng));
        let bias = store.add(format!("{name}.bias"), group, bias);
        EqLinear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward<'t, T: Float>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Var<'t, T> {
        x.matmul(p[self.weight]).scale(equalized_scale(self.fan_in)) + p[self.bias]
    }
}

/// Stride-1 "same" convolution on NHWC maps.
#[derive(Clone, Debug)]
pub struct EqConv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl EqConv {
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        group: Group,
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let rows = kernel * kernel * in_channels;
        let weight = store.add(format!("{name}.weight"), group, normal_array(&[rows, out_channels], rng));
        let bias = store.add(format!("{name}.bias"), group, Array::zeros(&[out_channels]));
        EqConv {
            weight,
            bias,
            kernel,
            in_channels,
            out_channels,
        }
    }

    pub fn forward<'t, T: Float>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Var<'t, T> {
        let s = x.shape();
        let (n, h, w) = (s[0], s[1], s[2]);
        let cols = if self.kernel == 1 {
            x.reshape(&[n * h * w, self.in_channels])
        } else {
            x.im2col(self.kernel, self.kernel / 2)
        };
        let fan_in = self.kernel * self.kernel * self.in_channels;
        let y = cols.matmul(p[self.weight]).scale(equalized_scale(fan_in)) + p[self.bias];
        y.reshape(&[n, h, w, self.out_channels])
    }
}

/// Stack of [`EqLinear`] layers with leaky-ReLU between them (none after the
/// last layer).
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<EqLinear>,
}

impl Mlp {
    /// `widths` lists every layer boundary, so `widths.len() - 1` layers.
    pub fn new<T: Float>(
        store: &mut ParamStore<T>,
        name: &str,
        group: Group,
        widths: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| EqLinear::new(store, &format!("{name}.{i}"), group, w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out
    }

    /// Output of the last layer and the activation feeding it.
    pub fn forward_with_penultimate<'t, T: Float>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
    ) -> (Var<'t, T>, Var<'t, T>) {
        let mut h = x;
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            h = layer.forward(p, h).leaky_relu(LRELU_SLOPE);
        }
        (self.layers[last].forward(p, h), h)
    }

    pub fn forward<'t, T: Float>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Var<'t, T> {
        self.forward_with_penultimate(p, x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alae_autodiff::Tape;

    #[test]
    fn equalized_scale_values() {
        assert_eq!(equalized_scale(2), 1.0);
        assert_eq!(equalized_scale(8), 0.5);
        assert!((equalized_scale(512) - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = crate::rng::stream(0, "t");
        let mut store = ParamStore::<f64>::new();
        let conv = EqConv::new(&mut store, "c", Group::Encoder, 3, 2, 1, &mut rng);
        let x: Array<f64> = normal_array(&[1, 3, 3, 2], &mut rng);
        let tape = Tape::new();
        let p = store.bind(&tape, &[]);
        let y = conv.forward(&p, tape.constant(x.clone())).value();
        let w = store.get(conv.weight).value.clone();
        let scale = equalized_scale(18);
        // centre pixel sees the whole 3x3 window
        let mut acc = 0.0;
        for ky in 0..3 {
            for kx in 0..3 {
                for c in 0..2 {
                    acc += x.data()[(ky * 3 + kx) * 2 + c] * w.data()[(ky * 3 + kx) * 2 + c];
                }
            }
        }
        assert!((y.data()[4] - acc * scale).abs() < 1e-12);
    }
}
