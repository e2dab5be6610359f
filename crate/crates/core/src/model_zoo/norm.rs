//! Instance normalization, adaptive instance normalization and the
//! multilinear map from encoder statistics to a latent code.

use alae_autodiff::{Array, Float, Tape, Var};

use super::ModelError;

/// Variance stabilizer; a constant channel yields `sigma = sqrt(VAR_EPS)`.
pub const VAR_EPS: f64 = 1e-8;

/// Per-channel statistics emitted by one encoder normalization site, for a
/// batch: `mu` and `sigma` are `[N, C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleStats<T> {
    pub level_index: usize,
    pub mu: Array<T>,
    pub sigma: Array<T>,
}

impl<T: Float> StyleStats<T> {
    pub fn channels(&self) -> usize {
        self.mu.shape()[1]
    }
}

/// Recorded statistics of one site.
#[derive(Clone, Copy, Debug)]
pub struct StatVars<'t, T: Float> {
    pub level_index: usize,
    pub mu: Var<'t, T>,
    pub sigma: Var<'t, T>,
}

/// Normalizes every channel of an NHWC map over its spatial extent.
/// Returns the normalized map and `[N, C]` mean / standard deviation.
pub fn instance_norm<'t, T: Float>(y: Var<'t, T>) -> (Var<'t, T>, Var<'t, T>, Var<'t, T>) {
    let s = y.shape();
    let (n, c) = (s[0], s[3]);
    let mu = y.mean_axes_keepdim(&[1, 2]);
    let centred = y - mu;
    let sigma = centred.square().mean_axes_keepdim(&[1, 2]).add_scalar(VAR_EPS).sqrt();
    let normed = centred / sigma;
    (normed, mu.reshape(&[n, c]), sigma.reshape(&[n, c]))
}

/// `scale * normalize(y) + bias` with `[N, C]` scale and bias.
pub fn adain<'t, T: Float>(y: Var<'t, T>, scale: Var<'t, T>, bias: Var<'t, T>) -> Var<'t, T> {
    let s = y.shape();
    let (n, c) = (s[0], s[3]);
    let (normed, _, _) = instance_norm(y);
    normed * scale.reshape(&[n, 1, 1, c]) + bias.reshape(&[n, 1, 1, c])
}

/// `w = sum_i C_i [mu_i; sigma_i]` with `C_i` of shape `[2 * C, d_w]`.
pub fn combine_styles<'t, T: Float>(
    stats: &[StatVars<'t, T>],
    coeffs: &[Var<'t, T>],
) -> Result<Var<'t, T>, ModelError> {
    if stats.len() != coeffs.len() || stats.is_empty() {
        return Err(ModelError::CountMismatch {
            what: "style coefficient matrices",
            expected: stats.len(),
            got: coeffs.len(),
        });
    }
    let mut w: Option<Var<'t, T>> = None;
    for (s, c) in stats.iter().zip(coeffs) {
        let ch = s.mu.shape()[1];
        let cs = c.shape();
        if cs[0] != 2 * ch {
            return Err(ModelError::DimensionMismatch {
                what: "style coefficient rows",
                expected: 2 * ch,
                got: cs[0],
            });
        }
        let term = Var::concat_last(&[s.mu, s.sigma]).matmul(*c);
        w = Some(match w {
            Some(acc) => acc + term,
            None => term,
        });
    }
    Ok(w.unwrap())
}

/// Array-level instance normalization of an NHWC map.
pub fn instance_norm_extract<T: Float>(y: &Array<T>, level_index: usize) -> (Array<T>, StyleStats<T>) {
    let tape = Tape::new();
    let (normed, mu, sigma) = instance_norm(tape.constant(y.clone()));
    let stats = StyleStats {
        level_index,
        mu: (*mu.value()).clone(),
        sigma: (*sigma.value()).clone(),
    };
    ((*normed.value()).clone(), stats)
}

/// Array-level AdaIN with `[N, C]` scale and bias.
pub fn adain_apply<T: Float>(y: &Array<T>, scale: &Array<T>, bias: &Array<T>) -> Array<T> {
    let tape = Tape::new();
    let out = adain(
        tape.constant(y.clone()),
        tape.constant(scale.clone()),
        tape.constant(bias.clone()),
    );
    (*out.value()).clone()
}

/// Array-level multilinear style map.
pub fn style_combine<T: Float>(stats: &[StyleStats<T>], coeffs: &[Array<T>]) -> Result<Array<T>, ModelError> {
    let tape = Tape::new();
    let svars: Vec<StatVars<T>> = stats
        .iter()
        .map(|s| StatVars {
            level_index: s.level_index,
            mu: tape.constant(s.mu.clone()),
            sigma: tape.constant(s.sigma.clone()),
        })
        .collect();
    let cvars: Vec<Var<T>> = coeffs.iter().map(|c| tape.constant(c.clone())).collect();
    Ok((*combine_styles(&svars, &cvars)?.value()).clone())
}
