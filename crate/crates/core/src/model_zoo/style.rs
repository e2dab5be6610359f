//! Style-based generator with a mirrored, statistics-extracting encoder.
//!
//! Generator level `l` (resolution `4 * 2^l`) owns two style sites; each
//! site adds scaled noise, applies leaky-ReLU and then AdaIN driven by a
//! learned affine map of its latent code. The encoder mirrors it: every
//! convolution is followed by instance normalization whose statistics are
//! folded into the latent code through one coefficient matrix per site.

use alae_autodiff::{Array, Float, Var};
use rand_chacha::ChaCha8Rng;

use super::layers::{EqConv, EqLinear, Mlp, LRELU_SLOPE};
use super::norm::{adain, combine_styles, instance_norm, StatVars};
use super::{GrowthState, ModelError, NoiseSource, StyleArch};
use crate::params::{Bound, Group, ParamId, ParamStore};
use crate::rng::normal_array;

#[derive(Clone, Debug)]
pub(crate) struct GenSite {
    pub style: EqLinear,
    pub noise_scale: Option<ParamId>,
    pub channels: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct GenLevel {
    pub convs: Vec<EqConv>,
    pub sites: [GenSite; 2],
    pub to_rgb: EqConv,
}

#[derive(Clone, Debug)]
pub(crate) struct EncLevel {
    pub from_rgb: EqConv,
    pub conv_a: EqConv,
    pub conv_b: EqConv,
    /// One coefficient matrix per normalization site (`[2C, d_w]`).
    pub combine: [ParamId; 2],
}

#[derive(Clone, Debug)]
pub(crate) struct StyleNets {
    pub f: Mlp,
    pub d: Mlp,
    pub constant: ParamId,
    pub gen: Vec<GenLevel>,
    pub enc: Vec<EncLevel>,
}

impl StyleNets {
    pub fn new<T: Float>(arch: &StyleArch, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng) -> Self {
        let dw = arch.latent_dim;
        let f = Mlp::new(store, "F", Group::Mapper, &vec![dw; arch.mapping_layers + 1], rng);
        let mut dwidths = vec![dw; arch.disc_layers];
        dwidths.push(1);
        let d = Mlp::new(store, "D", Group::Discriminator, &dwidths, rng);
        let c0 = arch.channels(0);
        let constant = store.add("G.const", Group::Generator, Array::ones(&[1, 4, 4, c0]));
        let mut nets = StyleNets {
            f,
            d,
            constant,
            gen: Vec::new(),
            enc: Vec::new(),
        };
        nets.add_level(arch, store, rng);
        nets
    }

    pub fn level(&self) -> usize {
        self.gen.len() - 1
    }

    /// Appends generator and encoder blocks for the next resolution.
    pub fn add_level<T: Float>(&mut self, arch: &StyleArch, store: &mut ParamStore<T>, rng: &mut ChaCha8Rng) {
        let l = self.gen.len();
        let c = arch.channels(l);
        let c_prev = if l == 0 { c } else { arch.channels(l - 1) };
        let dw = arch.latent_dim;

        let gname = format!("G.level{l}");
        let convs = if l == 0 {
            vec![EqConv::new(store, &format!("{gname}.conv0"), Group::Generator, 3, c, c, rng)]
        } else {
            vec![
                EqConv::new(store, &format!("{gname}.conv0"), Group::Generator, 3, c_prev, c, rng),
                EqConv::new(store, &format!("{gname}.conv1"), Group::Generator, 3, c, c, rng),
            ]
        };
        let mut site = |i: usize| {
            let mut bias = vec![T::one(); c];
            bias.extend(std::iter::repeat(T::zero()).take(c));
            let style = EqLinear::with_bias(
                store,
                &format!("{gname}.site{i}.style"),
                Group::Generator,
                dw,
                2 * c,
                Array::from_vec(vec![2 * c], bias),
                rng,
            );
            let noise_scale = arch
                .noise
                .then(|| store.add(format!("{gname}.site{i}.noise"), Group::Generator, Array::zeros(&[c])));
            GenSite {
                style,
                noise_scale,
                channels: c,
            }
        };
        let sites = [site(0), site(1)];
        let to_rgb = EqConv::new(store, &format!("{gname}.to_rgb"), Group::Generator, 1, c, arch.image_channels, rng);
        self.gen.push(GenLevel { convs, sites, to_rgb });

        let ename = format!("E.level{l}");
        let from_rgb = EqConv::new(store, &format!("{ename}.from_rgb"), Group::Encoder, 1, arch.image_channels, c, rng);
        let conv_a = EqConv::new(store, &format!("{ename}.conv0"), Group::Encoder, 3, c, c, rng);
        let conv_b = EqConv::new(store, &format!("{ename}.conv1"), Group::Encoder, 3, c, c_prev, rng);
        let combine = [
            store.add(format!("{ename}.combine0"), Group::Encoder, normal_array(&[2 * c, dw], rng)),
            store.add(format!("{ename}.combine1"), Group::Encoder, normal_array(&[2 * c_prev, dw], rng)),
        ];
        self.enc.push(EncLevel {
            from_rgb,
            conv_a,
            conv_b,
            combine,
        });
    }

    fn site_forward<'t, T: Float>(
        &self,
        p: &Bound<'t, T>,
        site: &GenSite,
        h: Var<'t, T>,
        code: Var<'t, T>,
        noise: Option<Var<'t, T>>,
    ) -> Var<'t, T> {
        let mut h = h;
        if let (Some(scale), Some(noise)) = (site.noise_scale, noise) {
            h = h + noise * p[scale];
        }
        h = h.leaky_relu(LRELU_SLOPE);
        let style = site.style.forward(p, code);
        let c = site.channels;
        adain(h, style.slice_last(0, c), style.slice_last(c, c))
    }

    /// Draws (or looks up) one noise map per site up to `level`.
    fn noise_maps<'t, T: Float>(
        &self,
        tape: &'t alae_autodiff::Tape<T>,
        batch: usize,
        level: usize,
        noise: &mut NoiseSource<'_, T>,
    ) -> Result<Vec<Option<Var<'t, T>>>, ModelError> {
        let sites = 2 * (level + 1);
        let shape = |s: usize| {
            let r = 4usize << (s / 2);
            vec![batch, r, r, 1]
        };
        let mut out = Vec::with_capacity(sites);
        for s in 0..sites {
            let has_noise = self.gen[s / 2].sites[s % 2].noise_scale.is_some();
            let map = match noise {
                _ if !has_noise => None,
                NoiseSource::Zero => None,
                NoiseSource::Random(rng) => Some(tape.constant(normal_array(&shape(s), rng))),
                NoiseSource::Maps(maps) => {
                    let m = maps.get(s).ok_or(ModelError::CountMismatch {
                        what: "noise maps",
                        expected: sites,
                        got: maps.len(),
                    })?;
                    if m.shape() != shape(s).as_slice() {
                        return Err(ModelError::ResolutionMismatch {
                            expected: shape(s)[1],
                            got: m.shape().get(1).copied().unwrap_or(0),
                        });
                    }
                    Some(tape.constant(m.clone()))
                }
            };
            out.push(map);
        }
        Ok(out)
    }

    pub fn generate<'t, T: Float>(
        &self,
        p: &Bound<'t, T>,
        codes: &[Var<'t, T>],
        growth: GrowthState,
        noise: &mut NoiseSource<'_, T>,
    ) -> Result<Var<'t, T>, ModelError> {
        let level = growth.level;
        if level > self.level() {
            return Err(ModelError::LevelNotGrown {
                requested: level,
                grown: self.level(),
            });
        }
        let sites = 2 * (level + 1);
        if codes.len() < sites {
            return Err(ModelError::MissingStyleCode {
                needed: sites,
                got: codes.len(),
            });
        }
        let batch = codes[0].shape()[0];
        let tape = codes[0].tape();
        let maps = self.noise_maps(tape, batch, level, noise)?;

        let c0 = p[self.constant].shape()[3];
        let mut h = p[self.constant].broadcast_to(&[batch, 4, 4, c0]);
        let mut prev: Option<Var<'t, T>> = None;
        for (l, block) in self.gen.iter().enumerate().take(level + 1) {
            if l > 0 {
                prev = Some(h);
                h = h.up2();
                h = block.convs[0].forward(p, h);
            }
            h = self.site_forward(p, &block.sites[0], h, codes[2 * l], maps[2 * l]);
            h = block.convs[block.convs.len() - 1].forward(p, h);
            h = self.site_forward(p, &block.sites[1], h, codes[2 * l + 1], maps[2 * l + 1]);
        }
        let out = self.gen[level].to_rgb.forward(p, h);
        match prev {
            Some(old) if growth.alpha < 1.0 => {
                let old_rgb = self.gen[level - 1].to_rgb.forward(p, old).up2();
                Ok(out.scale(growth.alpha) + old_rgb.scale(1.0 - growth.alpha))
            }
            _ => Ok(out),
        }
    }

    /// Runs the encoder path entered at `level`; returns the latent code and
    /// every site's statistics (highest resolution first).
    fn encode_path<'t, T: Float>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        level: usize,
    ) -> Result<(Var<'t, T>, Vec<StatVars<'t, T>>), ModelError> {
        let mut h = self.enc[level].from_rgb.forward(p, x).leaky_relu(LRELU_SLOPE);
        let mut stats = Vec::new();
        let mut coeffs = Vec::new();
        for l in (0..=level).rev() {
            let block = &self.enc[l];
            h = block.conv_a.forward(p, h).leaky_relu(LRELU_SLOPE);
            let (normed, mu, sigma) = instance_norm(h);
            stats.push(StatVars {
                level_index: l,
                mu,
                sigma,
            });
            coeffs.push(p[block.combine[0]]);
            h = block.conv_b.forward(p, normed).leaky_relu(LRELU_SLOPE);
            if l > 0 {
                h = h.down2();
            }
            let (normed, mu, sigma) = instance_norm(h);
            stats.push(StatVars {
                level_index: l,
                mu,
                sigma,
            });
            coeffs.push(p[block.combine[1]]);
            h = normed;
        }
        Ok((combine_styles(&stats, &coeffs)?, stats))
    }

    pub fn encode<'t, T: Float>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        growth: GrowthState,
    ) -> Result<(Var<'t, T>, Vec<StatVars<'t, T>>), ModelError> {
        let level = growth.level;
        if level > self.level() {
            return Err(ModelError::LevelNotGrown {
                requested: level,
                grown: self.level(),
            });
        }
        let (w_new, stats) = self.encode_path(p, x, level)?;
        if level > 0 && growth.alpha < 1.0 {
            let (w_old, _) = self.encode_path(p, x.down2(), level - 1)?;
            return Ok((w_new.scale(growth.alpha) + w_old.scale(1.0 - growth.alpha), stats));
        }
        Ok((w_new, stats))
    }
}
