//! Plain autoencoder control: the same E and G trained only on pixel-space
//! squared error, with no adversarial or latent terms.

use alae_autodiff::{Array, Float, Tape};

use super::adam::{adam_update, Adam, AdamConfig};
use super::{BatchSource, TrainError};
use crate::model_zoo::{Architecture, NetworkBundle, NoiseSource};
use crate::params::Group;
use crate::rng::stream;

pub struct L2Autoencoder<T: Float> {
    pub bundle: NetworkBundle<T>,
    pub adam: Adam<T>,
    pub lr: f64,
    pub iteration: u64,
}

impl<T: Float> L2Autoencoder<T> {
    pub fn new(arch: Architecture, adam: AdamConfig, seed: u64) -> Self {
        let bundle = NetworkBundle::new(arch, &mut stream(seed, crate::rng::INIT));
        let mut opt = Adam::new(adam);
        opt.sync(bundle.params.iter().map(|p| p.value.shape().to_vec()));
        L2Autoencoder {
            bundle,
            adam: opt,
            lr: adam.lr,
            iteration: 0,
        }
    }

    /// One step on `mean_i ||x_i - G(E(x_i))||^2`; returns the loss.
    pub fn step(&mut self, x: &Array<T>) -> Result<f64, TrainError> {
        let growth = self.bundle.growth();
        let (ids, grads, loss) = {
            let tape = Tape::new();
            let p = self.bundle.bind(&tape, &[Group::Encoder, Group::Generator]);
            let xv = tape.constant(x.clone());
            let w = self.bundle.encode(&p, xv, growth)?.w;
            let sites = self.bundle.num_sites();
            let y = self.bundle.generate(&p, &vec![w; sites], growth, &mut NoiseSource::Zero)?;
            let n = x.shape()[0];
            let loss = (y - xv).square().sum().scale(1.0 / n as f64);
            let grads: Vec<Array<T>> = tape
                .grad(loss, &p.trainable_vars(), false)
                .iter()
                .map(|g| (*g.value()).clone())
                .collect();
            (p.trainable().to_vec(), grads, loss.item().as_f64())
        };
        if !loss.is_finite() {
            return Err(TrainError::NonFinite {
                step: "autoencoder",
                iteration: self.iteration,
                detail: loss.to_string(),
            });
        }
        for (id, g) in ids.into_iter().zip(&grads) {
            adam_update(self.bundle.params.value_mut(id), g, &mut self.adam.moments[id.0], &self.adam.cfg, self.lr);
        }
        self.iteration += 1;
        Ok(loss)
    }

    /// Trains for `iterations` batches of `batch` samples.
    pub fn train(&mut self, source: &mut dyn BatchSource<T>, batch: usize, iterations: u64) -> Result<f64, TrainError> {
        let mut last = f64::NAN;
        for _ in 0..iterations {
            last = self.step(&source.next_batch(batch, 0))?;
        }
        Ok(last)
    }
}
