//! The four networks (mapper F, generator G, encoder E, discriminator head
//! D) in an MLP variant and a progressively grown style variant.
//!
//! Every forward exists in two flavours: a tape-level one used by the
//! objectives (takes a [`Bound`] parameter set and returns [`Var`]s), and an
//! array-level one (`*_forward`) used by evaluation.

pub mod layers;
mod mlp;
pub mod norm;
mod style;

use alae_autodiff::{Array, Float, Tape, Var};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layers::{equalized_scale, EqConv, EqLinear, Mlp, LRELU_SLOPE};
pub use norm::{adain_apply, instance_norm_extract, style_combine, StatVars, StyleStats, VAR_EPS};

use crate::params::{Bound, Group, ParamStore};
use crate::rng::normal_array;
use mlp::MlpNets;
use style::StyleNets;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: expected {expected}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("generator needs {needed} style codes, got {got}")]
    MissingStyleCode { needed: usize, got: usize },
    #[error("input resolution {got} does not match the expected {expected}")]
    ResolutionMismatch { expected: usize, got: usize },
    #[error("cannot grow from level {current} to level {requested}; levels must be added one at a time")]
    LevelSkip { current: usize, requested: usize },
    #[error("level {requested} requested but the model is grown only to level {grown}")]
    LevelNotGrown { requested: usize, grown: usize },
    #[error("level {requested} exceeds the configured maximum level {max}")]
    LevelBeyondMax { requested: usize, max: usize },
    #[error("blend factor {0} is outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("unsupported for this architecture: {0}")]
    Unsupported(&'static str),
}

/// Resolution level plus blend factor of the newest block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthState {
    pub level: usize,
    pub alpha: f64,
}

impl GrowthState {
    pub fn stable(level: usize) -> Self {
        GrowthState { level, alpha: 1.0 }
    }

    pub fn resolution(&self) -> usize {
        4 << self.level
    }
}

impl Default for GrowthState {
    fn default() -> Self {
        Self::stable(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpArch {
    pub data_dim: usize,
    /// Shared dimension of Z and W.
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// Hidden layers in G and in E.
    pub hidden_layers: usize,
    pub mapping_layers: usize,
    pub disc_layers: usize,
}

impl Default for MlpArch {
    fn default() -> Self {
        MlpArch {
            data_dim: 784,
            latent_dim: 50,
            hidden_dim: 1024,
            hidden_layers: 2,
            mapping_layers: 3,
            disc_layers: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleArch {
    pub latent_dim: usize,
    pub mapping_layers: usize,
    pub disc_layers: usize,
    pub image_channels: usize,
    /// Highest level (resolution `4 * 2^max_level`).
    pub max_level: usize,
    /// Channels at level 0; halved per level and clamped.
    pub base_channels: usize,
    pub min_channels: usize,
    pub max_channels: usize,
    pub noise: bool,
}

impl Default for StyleArch {
    fn default() -> Self {
        StyleArch {
            latent_dim: 512,
            mapping_layers: 8,
            disc_layers: 3,
            image_channels: 3,
            max_level: 3,
            base_channels: 256,
            min_channels: 32,
            max_channels: 256,
            noise: true,
        }
    }
}

impl StyleArch {
    pub fn channels(&self, level: usize) -> usize {
        (self.base_channels >> level.min(63)).clamp(self.min_channels, self.max_channels)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Mlp(MlpArch),
    Style(StyleArch),
}

impl Architecture {
    pub fn latent_dim(&self) -> usize {
        match self {
            Architecture::Mlp(a) => a.latent_dim,
            Architecture::Style(a) => a.latent_dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp(_) => "mlp",
            Architecture::Style(_) => "style",
        }
    }
}

/// Where the generator's per-site noise comes from.
pub enum NoiseSource<'a, T> {
    /// No noise (equivalently, all-zero maps).
    Zero,
    /// Fresh Gaussian maps drawn from the given stream, in site order.
    Random(&'a mut ChaCha8Rng),
    /// Caller-supplied maps, one per site, `[N, R, R, 1]`.
    Maps(&'a [Array<T>]),
}

/// Output of the encoder on a tape.
pub struct Encoded<'t, T: Float> {
    pub w: Var<'t, T>,
    /// Penultimate activation (MLP variant only).
    pub long: Option<Var<'t, T>>,
    pub stats: Vec<StatVars<'t, T>>,
}

/// Array-level encoder output.
#[derive(Clone, Debug)]
pub struct EncoderOutput<T> {
    pub w: Array<T>,
    pub long: Option<Array<T>>,
    pub stats: Vec<StyleStats<T>>,
}

#[derive(Clone, Debug)]
enum Nets {
    Mlp(MlpNets),
    Style(StyleNets),
}

/// All parameters of F, G, E, D plus the current growth state.
#[derive(Clone, Debug)]
pub struct NetworkBundle<T: Float> {
    arch: Architecture,
    pub params: ParamStore<T>,
    growth: GrowthState,
    nets: Nets,
}

fn check_dim<T: Float>(what: &'static str, v: &Var<'_, T>, dim: usize) -> Result<(), ModelError> {
    let s = v.shape();
    if s.len() != 2 || s[1] != dim {
        return Err(ModelError::DimensionMismatch {
            what,
            expected: dim,
            got: s.last().copied().unwrap_or(0),
        });
    }
    Ok(())
}

impl<T: Float> NetworkBundle<T> {
    /// Builds a level-0 bundle with freshly initialized parameters.
    pub fn new(arch: Architecture, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new();
        let nets = match &arch {
            Architecture::Mlp(a) => Nets::Mlp(MlpNets::new(a, &mut params, rng)),
            Architecture::Style(a) => Nets::Style(StyleNets::new(a, &mut params, rng)),
        };
        NetworkBundle {
            arch,
            params,
            growth: GrowthState::default(),
            nets,
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn growth(&self) -> GrowthState {
        self.growth
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim()
    }

    /// Highest level whose blocks exist.
    pub fn grown_level(&self) -> usize {
        match &self.nets {
            Nets::Mlp(_) => 0,
            Nets::Style(s) => s.level(),
        }
    }

    pub fn is_style(&self) -> bool {
        matches!(self.nets, Nets::Style(_))
    }

    /// Sets the blend state without adding blocks.
    pub fn set_growth(&mut self, growth: GrowthState) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&growth.alpha) {
            return Err(ModelError::InvalidAlpha(growth.alpha));
        }
        if growth.level > self.grown_level() {
            return Err(ModelError::LevelNotGrown {
                requested: growth.level,
                grown: self.grown_level(),
            });
        }
        self.growth = growth;
        Ok(())
    }

    /// Appends the blocks of `new_level` (which must be the next level) and
    /// resets the blend factor to 0. Existing parameters are untouched.
    pub fn grow_to_level(&mut self, new_level: usize, rng: &mut ChaCha8Rng) -> Result<(), ModelError> {
        let current = self.grown_level();
        let Nets::Style(nets) = &mut self.nets else {
            return Err(ModelError::Unsupported("progressive growing requires the style variant"));
        };
        let Architecture::Style(arch) = &self.arch else { unreachable!() };
        if new_level != current + 1 {
            return Err(ModelError::LevelSkip {
                current,
                requested: new_level,
            });
        }
        if new_level > arch.max_level {
            return Err(ModelError::LevelBeyondMax {
                requested: new_level,
                max: arch.max_level,
            });
        }
        nets.add_level(arch, &mut self.params, rng);
        self.growth = GrowthState {
            level: new_level,
            alpha: 0.0,
        };
        Ok(())
    }

    /// Style sites driven by the generator at `level` (1 for the MLP).
    pub fn num_sites_at(&self, level: usize) -> usize {
        match &self.nets {
            Nets::Mlp(_) => 1,
            Nets::Style(_) => 2 * (level + 1),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites_at(self.growth.level)
    }

    /// Shape of one input sample at `level`.
    pub fn sample_shape(&self, level: usize) -> Vec<usize> {
        match &self.arch {
            Architecture::Mlp(a) => vec![a.data_dim],
            Architecture::Style(a) => {
                let r = 4 << level;
                vec![r, r, a.image_channels]
            }
        }
    }

    /// Shapes of the per-site noise maps for a batch at `level`; empty for
    /// the noise-free variants.
    pub fn noise_shapes(&self, batch: usize, level: usize) -> Vec<Vec<usize>> {
        match &self.arch {
            Architecture::Style(a) if a.noise => (0..2 * (level + 1))
                .map(|s| {
                    let r = 4 << (s / 2);
                    vec![batch, r, r, 1]
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Draws Gaussian noise maps for every site.
    pub fn sample_noise(&self, batch: usize, level: usize, rng: &mut ChaCha8Rng) -> Vec<Array<T>> {
        self.noise_shapes(batch, level).iter().map(|s| normal_array(s, rng)).collect()
    }

    /// Records every parameter on `tape`, with gradients for `trainable`.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: &[Group]) -> Bound<'t, T> {
        self.params.bind(tape, trainable)
    }

    fn mapper(&self) -> &Mlp {
        match &self.nets {
            Nets::Mlp(n) => &n.f,
            Nets::Style(n) => &n.f,
        }
    }

    fn disc(&self) -> &Mlp {
        match &self.nets {
            Nets::Mlp(n) => &n.d,
            Nets::Style(n) => &n.d,
        }
    }

    /// `w = F(z)`.
    pub fn map<'t>(&self, p: &Bound<'t, T>, z: Var<'t, T>) -> Result<Var<'t, T>, ModelError> {
        check_dim("prior sample", &z, self.latent_dim())?;
        Ok(self.mapper().forward(p, z))
    }

    /// `G(w)`, one code per style site (only the first is used by the MLP).
    pub fn generate<'t>(
        &self,
        p: &Bound<'t, T>,
        codes: &[Var<'t, T>],
        growth: GrowthState,
        noise: &mut NoiseSource<'_, T>,
    ) -> Result<Var<'t, T>, ModelError> {
        let needed = self.num_sites_at(growth.level);
        if codes.len() < needed {
            return Err(ModelError::MissingStyleCode {
                needed,
                got: codes.len(),
            });
        }
        for c in codes {
            check_dim("latent code", c, self.latent_dim())?;
        }
        match &self.nets {
            Nets::Mlp(n) => Ok(n.generate(p, codes[0])),
            Nets::Style(n) => n.generate(p, codes, growth, noise),
        }
    }

    /// `E(x)` with the long features (MLP) or per-site statistics (style).
    pub fn encode<'t>(&self, p: &Bound<'t, T>, x: Var<'t, T>, growth: GrowthState) -> Result<Encoded<'t, T>, ModelError> {
        let s = x.shape();
        match (&self.nets, &self.arch) {
            (Nets::Mlp(n), Architecture::Mlp(a)) => {
                check_dim("data sample", &x, a.data_dim)?;
                let (w, long) = n.encode(p, x);
                Ok(Encoded {
                    w,
                    long: Some(long),
                    stats: Vec::new(),
                })
            }
            (Nets::Style(n), Architecture::Style(a)) => {
                let r = growth.resolution();
                if s.len() != 4 || s[1] != r || s[2] != r {
                    return Err(ModelError::ResolutionMismatch {
                        expected: r,
                        got: s.get(1).copied().unwrap_or(0),
                    });
                }
                if s[3] != a.image_channels {
                    return Err(ModelError::DimensionMismatch {
                        what: "image channels",
                        expected: a.image_channels,
                        got: s[3],
                    });
                }
                let (w, stats) = n.encode(p, x, growth)?;
                Ok(Encoded { w, long: None, stats })
            }
            _ => unreachable!("architecture and networks disagree"),
        }
    }

    /// `D(w)`, one score per row: `[N]`.
    pub fn discriminate<'t>(&self, p: &Bound<'t, T>, w: Var<'t, T>) -> Result<Var<'t, T>, ModelError> {
        check_dim("latent code", &w, self.latent_dim())?;
        let n = w.shape()[0];
        Ok(self.disc().forward(p, w).reshape(&[n]))
    }

    // ---- array-level forwards -------------------------------------------

    fn with_tape<R>(&self, f: impl for<'t> FnOnce(&'t Tape<T>, &Bound<'t, T>) -> Result<R, ModelError>) -> Result<R, ModelError> {
        let tape = Tape::new();
        let p = self.bind(&tape, &[]);
        tape.no_grad(|| f(&tape, &p))
    }

    pub fn mapper_forward(&self, z: &Array<T>) -> Result<Array<T>, ModelError> {
        self.with_tape(|tape, p| Ok((*self.map(p, tape.constant(z.clone()))?.value()).clone()))
    }

    /// Generator with one code per site.
    pub fn generator_forward(
        &self,
        codes: &[Array<T>],
        growth: GrowthState,
        noise: &mut NoiseSource<'_, T>,
    ) -> Result<Array<T>, ModelError> {
        self.with_tape(|tape, p| {
            let vars: Vec<Var<T>> = codes.iter().map(|c| tape.constant(c.clone())).collect();
            Ok((*self.generate(p, &vars, growth, noise)?.value()).clone())
        })
    }

    /// Generator with the same code at every site, at the current growth.
    pub fn generate_from(&self, w: &Array<T>, noise: &mut NoiseSource<'_, T>) -> Result<Array<T>, ModelError> {
        let codes = vec![w.clone(); self.num_sites()];
        self.generator_forward(&codes, self.growth, noise)
    }

    pub fn encoder_forward(&self, x: &Array<T>, growth: GrowthState) -> Result<EncoderOutput<T>, ModelError> {
        self.with_tape(|tape, p| {
            let enc = self.encode(p, tape.constant(x.clone()), growth)?;
            Ok(EncoderOutput {
                w: (*enc.w.value()).clone(),
                long: enc.long.map(|l| (*l.value()).clone()),
                stats: enc
                    .stats
                    .iter()
                    .map(|s| StyleStats {
                        level_index: s.level_index,
                        mu: (*s.mu.value()).clone(),
                        sigma: (*s.sigma.value()).clone(),
                    })
                    .collect(),
            })
        })
    }

    pub fn discriminator_forward(&self, w: &Array<T>) -> Result<Array<T>, ModelError> {
        self.with_tape(|tape, p| Ok((*self.discriminate(p, tape.constant(w.clone()))?.value()).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tiny_style() -> StyleArch {
        StyleArch {
            latent_dim: 8,
            mapping_layers: 2,
            disc_layers: 2,
            image_channels: 3,
            max_level: 2,
            base_channels: 8,
            min_channels: 4,
            max_channels: 8,
            noise: true,
        }
    }

    fn tiny_mlp() -> MlpArch {
        MlpArch {
            data_dim: 12,
            latent_dim: 4,
            hidden_dim: 6,
            hidden_layers: 2,
            mapping_layers: 3,
            disc_layers: 3,
        }
    }

    #[test]
    fn channel_schedule() {
        let a = StyleArch {
            base_channels: 256,
            min_channels: 32,
            max_channels: 256,
            ..StyleArch::default()
        };
        assert_eq!((0..5).map(|l| a.channels(l)).collect::<Vec<_>>(), [256, 128, 64, 32, 32]);
    }

    #[test]
    fn mlp_shapes() {
        let mut rng = stream(1, "t");
        let b = NetworkBundle::<f64>::new(Architecture::Mlp(tiny_mlp()), &mut rng);
        let z: Array<f64> = normal_array(&[5, 4], &mut rng);
        let w = b.mapper_forward(&z).unwrap();
        assert_eq!(w.shape(), &[5, 4]);
        let x = b.generate_from(&w, &mut NoiseSource::Zero).unwrap();
        assert_eq!(x.shape(), &[5, 12]);
        assert!(x.data().iter().all(|v| v.abs() <= 1.0));
        let e = b.encoder_forward(&x, b.growth()).unwrap();
        assert_eq!(e.w.shape(), &[5, 4]);
        assert_eq!(e.long.unwrap().shape(), &[5, 6]);
        assert_eq!(b.discriminator_forward(&e.w).unwrap().shape(), &[5]);
        assert!(matches!(
            b.mapper_forward(&Array::zeros(&[2, 3])),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn style_growth_and_blending() {
        let mut rng = stream(2, "t");
        let mut b = NetworkBundle::<f64>::new(Architecture::Style(tiny_style()), &mut rng);
        let w: Array<f64> = normal_array(&[2, 8], &mut rng);
        let x0 = b.generate_from(&w, &mut NoiseSource::Zero).unwrap();
        assert_eq!(x0.shape(), &[2, 4, 4, 3]);
        let before: Vec<_> = b.params.iter().map(|p| p.value.clone()).collect();
        let count = b.params.count();

        assert!(matches!(b.grow_to_level(2, &mut rng), Err(ModelError::LevelSkip { .. })));
        b.grow_to_level(1, &mut rng).unwrap();
        assert!(b.params.count() > count);
        for (old, new) in before.iter().zip(b.params.iter()) {
            assert_eq!(**old, *new.value);
        }
        assert_eq!(b.growth(), GrowthState { level: 1, alpha: 0.0 });
        let x1 = b.generate_from(&w, &mut NoiseSource::Zero).unwrap();
        assert_eq!(x1.shape(), &[2, 8, 8, 3]);
        assert_eq!(x1, x0.up2());

        // encoder at alpha = 0 equals the previous path on the downscaled input
        let img: Array<f64> = normal_array(&[2, 8, 8, 3], &mut rng);
        let e1 = b.encoder_forward(&img, b.growth()).unwrap();
        let e0 = b.encoder_forward(&img.down2(), GrowthState::stable(0)).unwrap();
        assert_eq!(e1.w, e0.w);
        assert_eq!(e1.stats.len(), 4);

        assert!(matches!(
            b.encoder_forward(&img.down2(), b.growth()),
            Err(ModelError::ResolutionMismatch { expected: 8, got: 4 })
        ));
        assert!(matches!(
            b.generator_forward(&[w.clone()], b.growth(), &mut NoiseSource::Zero),
            Err(ModelError::MissingStyleCode { needed: 4, got: 1 })
        ));
    }

    #[test]
    fn constant_image_has_flat_stats() {
        let mut rng = stream(3, "t");
        let mut b = NetworkBundle::<f64>::new(Architecture::Style(tiny_style()), &mut rng);
        b.grow_to_level(1, &mut rng).unwrap();
        b.set_growth(GrowthState::stable(1)).unwrap();
        let img = Array::full(&[1, 8, 8, 3], 0.3);
        let e = b.encoder_forward(&img, b.growth()).unwrap();
        assert_eq!(e.stats.len(), 4);
        for s in &e.stats {
            for &v in s.sigma.data() {
                assert!((v - VAR_EPS.sqrt()).abs() < 1e-9, "sigma {v}");
            }
        }
        assert_eq!(e.w.shape(), &[1, 8]);
    }
}
