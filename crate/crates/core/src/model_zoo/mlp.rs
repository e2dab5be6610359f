//! Fully connected variant for flat vector data.

use alae_autodiff::{Float, Var};
use rand_chacha::ChaCha8Rng;

use super::layers::Mlp;
use super::MlpArch;
use crate::params::{Bound, Group, ParamStore};

#[derive(Clone, Debug)]
pub(crate) struct MlpNets {
    pub f: Mlp,
    pub g: Mlp,
    pub e: Mlp,
    pub d: Mlp,
}

fn widths(input: usize, hidden: usize, hidden_layers: usize, output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat(hidden).take(hidden_layers));
    w.push(output);
    w
}

impl MlpNets {
    pub fn new<T: Float>(arch: &MlpArch, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng) -> Self {
        let dw = arch.latent_dim;
        let f = Mlp::new(store, "F", Group::Mapper, &vec![dw; arch.mapping_layers + 1], rng);
        let g = Mlp::new(
            store,
            "G",
            Group::Generator,
            &widths(dw, arch.hidden_dim, arch.hidden_layers, arch.data_dim),
            rng,
        );
        let e = Mlp::new(
            store,
            "E",
            Group::Encoder,
            &widths(arch.data_dim, arch.hidden_dim, arch.hidden_layers, dw),
            rng,
        );
        let mut dwidths = vec![dw; arch.disc_layers];
        dwidths.push(1);
        let d = Mlp::new(store, "D", Group::Discriminator, &dwidths, rng);
        MlpNets { f, g, e, d }
    }

    /// Generator output squashed to [-1, 1].
    pub fn generate<'t, T: Float>(&self, p: &Bound<'t, T>, w: Var<'t, T>) -> Var<'t, T> {
        self.g.forward(p, w).tanh()
    }

    /// Latent code and the penultimate ("long") activation.
    pub fn encode<'t, T: Float>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> (Var<'t, T>, Var<'t, T>) {
        self.e.forward_with_penultimate(p, x)
    }
}
