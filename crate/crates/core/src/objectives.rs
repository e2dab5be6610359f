//! Softplus adversarial losses, the R1 gradient penalty and the latent
//! reciprocity loss, as consumed by the three alternating training steps.
//!
//! Each loss comes in two layers: small tape-level kernels operating on
//! scores / codes (`*_from_*`), and bundle-level functions that run the
//! networks. Every batch reduction is an arithmetic mean.

use alae_autodiff::{Array, Float, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_zoo::{GrowthState, ModelError, NetworkBundle, NoiseSource};
use crate::params::Bound;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("non-finite {loss} loss ({value})")]
    NonFinite { loss: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What the R1 gradient is taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum R1Target {
    /// Real inputs `x` (the usual R1 definition).
    #[default]
    Inputs,
    /// The trainable encoder and discriminator parameters, per sample.
    Parameters,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub gamma: f64,
    pub target: R1Target,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            gamma: 10.0,
            target: R1Target::Inputs,
        }
    }
}

/// A scalar loss with its named sub-terms; `value` is their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub components: Vec<(&'static str, f64)>,
}

impl LossValue {
    fn new(loss: &'static str, components: Vec<(&'static str, f64)>) -> Result<Self, ObjectiveError> {
        let value = components.iter().map(|c| c.1).sum::<f64>();
        if let Some(&(_, v)) = components.iter().find(|c| !c.1.is_finite()) {
            return Err(ObjectiveError::NonFinite { loss, value: v });
        }
        if !value.is_finite() {
            return Err(ObjectiveError::NonFinite { loss, value });
        }
        Ok(LossValue { value, components })
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.0 == name).map(|c| c.1)
    }
}

/// `log(1 + exp(t))`, stable for large `|t|`.
pub fn softplus(t: f64) -> f64 {
    alae_autodiff::softplus(t)
}

/// `mean SP(fake) + mean SP(-real)`.
pub fn adversarial_d_from_scores<'t, T: Float>(fake: Var<'t, T>, real: Var<'t, T>) -> Var<'t, T> {
    fake.softplus().mean() + (-real).softplus().mean()
}

/// `mean SP(-fake)`.
pub fn adversarial_g_from_scores<'t, T: Float>(fake: Var<'t, T>) -> Var<'t, T> {
    (-fake).softplus().mean()
}

/// `mean_i ||w_i - w'_i||^2` over rows.
pub fn reciprocity_from_codes<'t, T: Float>(w: Var<'t, T>, w_rec: Var<'t, T>) -> Var<'t, T> {
    let n = w.shape()[0];
    (w - w_rec).square().sum().scale(1.0 / n as f64)
}

/// `gamma/2 * mean_i ||d score_i / d x_i||^2`, where `scores` has one entry
/// per row of `x` and rows do not interact. The result stays differentiable.
pub fn r1_from_inputs<'t, T: Float>(x: Var<'t, T>, scores: Var<'t, T>, gamma: f64) -> Var<'t, T> {
    let tape = x.tape();
    let n = x.shape()[0];
    let g = tape.grad(scores.sum(), &[x], true)[0];
    g.square().sum().scale(0.5 * gamma / n as f64)
}

/// `gamma/2 * mean_i ||d score_i / d theta||^2` over the given parameters.
/// One backward pass per sample.
pub fn r1_from_params<'t, T: Float>(params: &[Var<'t, T>], scores: Var<'t, T>, gamma: f64) -> Var<'t, T> {
    let tape = scores.tape();
    let n = scores.shape()[0];
    let mut total: Option<Var<'t, T>> = None;
    for i in 0..n {
        // select sample i with a one-hot weight so the graph stays differentiable
        let mut onehot = Array::zeros(&[n]);
        onehot.data_mut()[i] = T::one();
        let s = (scores * tape.constant(onehot)).sum();
        for g in tape.grad(s, params, true) {
            let sq = g.square().sum();
            total = Some(match total {
                Some(t) => t + sq,
                None => sq,
            });
        }
    }
    total.unwrap_or_else(|| tape.scalar(0.0)).scale(0.5 * gamma / n as f64)
}

/// Prior draw for one training step. With `mix`, sites at or after the
/// crossover receive the code of the second draw.
#[derive(Clone, Debug)]
pub struct LatentDraw<T> {
    pub z: Array<T>,
    pub mix: Option<(Array<T>, usize)>,
}

impl<T: Float> LatentDraw<T> {
    pub fn plain(z: Array<T>) -> Self {
        LatentDraw { z, mix: None }
    }
}

/// Maps a draw through F and lays out one code per style site.
pub fn site_codes<'t, T: Float>(
    bundle: &NetworkBundle<T>,
    p: &Bound<'t, T>,
    draw: &LatentDraw<T>,
    sites: usize,
) -> Result<Vec<Var<'t, T>>, ModelError> {
    let tape = p.tape();
    let w1 = bundle.map(p, tape.constant(draw.z.clone()))?;
    match &draw.mix {
        None => Ok(vec![w1; sites]),
        Some((z2, k)) => {
            let w2 = bundle.map(p, tape.constant(z2.clone()))?;
            Ok((0..sites).map(|s| if s < *k { w1 } else { w2 }).collect())
        }
    }
}

/// Inputs shared by the bundle-level losses.
pub struct StepContext<'a, 'n, T> {
    pub growth: GrowthState,
    pub noise: &'a mut NoiseSource<'n, T>,
}

/// Step I loss: adversarial terms on D∘E plus the R1 penalty on real data.
/// Fakes are produced without recording history, so only parameters bound
/// as trainable on the encoder/discriminator side receive gradients.
pub fn discriminator_loss<'t, T: Float>(
    bundle: &NetworkBundle<T>,
    p: &Bound<'t, T>,
    x_real: &Array<T>,
    draw: &LatentDraw<T>,
    ctx: StepContext<'_, '_, T>,
    cfg: &PenaltyConfig,
) -> Result<(Var<'t, T>, LossValue), ObjectiveError> {
    let tape = p.tape();
    let sites = bundle.num_sites_at(ctx.growth.level);
    let fake = tape.no_grad(|| -> Result<_, ModelError> {
        let codes = site_codes(bundle, p, draw, sites)?;
        bundle.generate(p, &codes, ctx.growth, ctx.noise)
    })?;
    let fake = tape.constant((*fake.value()).clone());
    let score_fake = bundle.discriminate(p, bundle.encode(p, fake, ctx.growth)?.w)?;

    let input_penalty = cfg.gamma > 0.0 && cfg.target == R1Target::Inputs;
    let x = tape.leaf(x_real.clone(), input_penalty);
    let score_real = bundle.discriminate(p, bundle.encode(p, x, ctx.growth)?.w)?;
    let adv = adversarial_d_from_scores(score_fake, score_real);

    let (loss, r1) = if cfg.gamma > 0.0 {
        let pen = match cfg.target {
            R1Target::Inputs => r1_from_inputs(x, score_real, cfg.gamma),
            R1Target::Parameters => r1_from_params(&p.trainable_vars(), score_real, cfg.gamma),
        };
        (adv + pen, pen.item().as_f64())
    } else {
        (adv, 0.0)
    };
    let value = LossValue::new("discriminator", vec![("adversarial", adv.item().as_f64()), ("r1", r1)])?;
    Ok((loss, value))
}

/// Step II loss: non-saturating adversarial term for F and G.
pub fn generator_loss<'t, T: Float>(
    bundle: &NetworkBundle<T>,
    p: &Bound<'t, T>,
    draw: &LatentDraw<T>,
    ctx: StepContext<'_, '_, T>,
) -> Result<(Var<'t, T>, LossValue), ObjectiveError> {
    let sites = bundle.num_sites_at(ctx.growth.level);
    let codes = site_codes(bundle, p, draw, sites)?;
    let fake = bundle.generate(p, &codes, ctx.growth, ctx.noise)?;
    let score = bundle.discriminate(p, bundle.encode(p, fake, ctx.growth)?.w)?;
    let loss = adversarial_g_from_scores(score);
    let value = LossValue::new("generator", vec![("adversarial", loss.item().as_f64())])?;
    Ok((loss, value))
}

/// Step III loss: `||F(z) - E(G(F(z)))||^2` with `F(z)` held constant.
pub fn reciprocity_loss<'t, T: Float>(
    bundle: &NetworkBundle<T>,
    p: &Bound<'t, T>,
    z: &Array<T>,
    ctx: StepContext<'_, '_, T>,
) -> Result<(Var<'t, T>, LossValue), ObjectiveError> {
    let tape = p.tape();
    let w = tape.no_grad(|| bundle.map(p, tape.constant(z.clone())))?;
    let w = tape.constant((*w.value()).clone());
    let sites = bundle.num_sites_at(ctx.growth.level);
    let x = bundle.generate(p, &vec![w; sites], ctx.growth, ctx.noise)?;
    let w_rec = bundle.encode(p, x, ctx.growth)?.w;
    let loss = reciprocity_from_codes(w, w_rec);
    let value = LossValue::new("reciprocity", vec![("reconstruction", loss.item().as_f64())])?;
    Ok((loss, value))
}
