//! One-vs-rest linear SVM with the squared hinge loss.
//!
//! Each binary problem minimizes
//! `f(w) = ½‖w‖² + C Σᵢ max(0, 1 − yᵢ wᵀxᵢ)²` over rows augmented with a
//! constant bias feature. `f` is strongly convex and once differentiable,
//! so it is minimized in the primal by a generalized Newton method: each
//! step solves `H d = −∇f` by conjugate gradients with
//! `H = I + 2C Σ_{active} xᵢxᵢᵀ`, followed by a backtracking line search.
//! Training stops when `‖∇f(w)‖ ≤ tol · ‖∇f(0)‖`.
//!
//! Columns are standardized with the training set's mean and standard
//! deviation by default.

use super::knn::check_pair;
use super::{EvalError, FeatureSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmConfig {
    pub c_reg: f64,
    /// Relative gradient-norm tolerance.
    pub tol: f64,
    /// Newton iterations per binary problem.
    pub max_iter: usize,
    /// Value of the appended bias feature.
    pub bias: f64,
    /// Z-score every column with training-set statistics first.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c_reg: 1.0,
            tol: 1e-4,
            max_iter: 100,
            bias: 1.0,
            standardize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmResult {
    pub accuracy: f64,
    /// False if any binary problem hit the iteration cap.
    pub converged: bool,
    /// Newton iterations used per class, in class order.
    pub iterations: Vec<usize>,
    pub classes: Vec<u8>,
}

/// Row-major design matrix with the bias column included.
struct Design {
    n: usize,
    d: usize,
    x: Vec<f64>,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), w)).collect()
    }
}

struct Binary {
    w: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn objective(w: &[f64], xw: &[f64], y: &[f64], c: f64) -> f64 {
    let loss: f64 = xw
        .iter()
        .zip(y)
        .map(|(m, y)| (1.0 - y * m).max(0.0).powi(2))
        .sum();
    0.5 * dot(w, w) + c * loss
}

fn train_binary(x: &Design, y: &[f64], cfg: &SvmConfig) -> Binary {
    let (n, d, c) = (x.n, x.d, cfg.c_reg);
    let mut w = vec![0.0; d];
    let mut xw = vec![0.0; n];
    let mut f = objective(&w, &xw, y, c);
    let mut g0_norm = None;
    for iter in 0..cfg.max_iter {
        let active: Vec<usize> = (0..n).filter(|&i| y[i] * xw[i] < 1.0).collect();
        // ∇f = w − 2C Σ_active yᵢ(1 − yᵢ xᵢᵀw) xᵢ
        let mut g = w.clone();
        for &i in &active {
            let coef = -2.0 * c * y[i] * (1.0 - y[i] * xw[i]);
            axpy(&mut g, coef, x.row(i));
        }
        let g_norm = dot(&g, &g).sqrt();
        let g0 = *g0_norm.get_or_insert(g_norm);
        if g_norm <= cfg.tol * g0 || g_norm == 0.0 {
            return Binary {
                w,
                iterations: iter,
                converged: true,
            };
        }
        let hess = |v: &[f64]| {
            let mut out = v.to_vec();
            for &i in &active {
                let r = x.row(i);
                axpy(&mut out, 2.0 * c * dot(r, v), r);
            }
            out
        };
        let step = conjugate_gradient(&hess, &g, 0.1, d.max(10));
        let xs = x.margins(&step);
        // Backtracking line search with the Armijo condition.
        let slope = dot(&g, &step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let cand_xw: Vec<f64> = xw.iter().zip(&xs).map(|(a, b)| a + t * b).collect();
            let fc = objective(&cand, &cand_xw, y, c);
            if fc <= f + 0.01 * t * slope || t < 1e-10 {
                w = cand;
                xw = cand_xw;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    Binary {
        w,
        iterations: cfg.max_iter,
        converged: false,
    }
}

/// Approximately solves `H s = −g` for symmetric positive definite `H`,
/// stopping at relative residual `rel_tol`.
fn conjugate_gradient(hess: &dyn Fn(&[f64]) -> Vec<f64>, g: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let mut s = vec![0.0; g.len()];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rel_tol * rel_tol * rr;
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        let hp = hess(&p);
        let alpha = rr / dot(&p, &hp);
        axpy(&mut s, alpha, &p);
        axpy(&mut r, -alpha, &hp);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Per-column mean and standard deviation (identity when disabled;
/// constant columns keep scale 1).
fn column_scaling(train: &FeatureSet, standardize: bool) -> (Vec<f64>, Vec<f64>) {
    let d = train.dim();
    if !standardize {
        return (vec![0.0; d], vec![1.0; d]);
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for i in 0..train.len() {
        axpy(&mut mean, 1.0, train.row(i));
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for i in 0..train.len() {
        for ((s, v), m) in var.iter_mut().zip(train.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn design(set: &FeatureSet, mean: &[f64], scale: &[f64], bias: f64) -> Design {
    let d = set.dim() + 1;
    let mut x = Vec::with_capacity(set.len() * d);
    for i in 0..set.len() {
        x.extend(set.row(i).iter().zip(mean.iter().zip(scale)).map(|(v, (m, s))| (v - m) / s));
        x.push(bias);
    }
    Design { n: set.len(), d, x }
}

/// Trains on `train`, reports accuracy on `test`. Hitting the iteration
/// cap is reported through [`SvmResult::converged`], not as an error.
pub fn linear_svm_accuracy(train: &FeatureSet, test: &FeatureSet, cfg: &SvmConfig) -> Result<SvmResult, EvalError> {
    check_pair(train, test)?;
    if !(cfg.c_reg > 0.0 && cfg.tol > 0.0) {
        return Err(EvalError::Config("C and tol must be positive".into()));
    }
    let (mean, scale) = column_scaling(train, cfg.standardize);
    let x = design(train, &mean, &scale, cfg.bias);
    let mut classes: Vec<u8> = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();

    let models: Vec<Binary> = if classes.len() == 1 {
        vec![Binary {
            w: vec![0.0; x.d],
            iterations: 0,
            converged: true,
        }]
    } else {
        classes
            .iter()
            .map(|&c| {
                let y: Vec<f64> = train.labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                train_binary(&x, &y, cfg)
            })
            .collect()
    };

    let xt = design(test, &mean, &scale, cfg.bias);
    let mut correct = 0usize;
    for i in 0..test.len() {
        let row = xt.row(i);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (ci, m) in models.iter().enumerate() {
            let s = dot(&m.w, row);
            if s > best_score {
                best = ci;
                best_score = s;
            }
        }
        if classes[best] == test.labels[i] {
            correct += 1;
        }
    }
    Ok(SvmResult {
        accuracy: correct as f64 / test.len() as f64,
        converged: models.iter().all(|m| m.converged),
        iterations: models.iter().map(|m| m.iterations).collect(),
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::FeatureKind;
    use alae_autodiff::Array;

    fn set(rows: &[[f64; 2]], labels: &[u8]) -> FeatureSet {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        FeatureSet::new(FeatureKind::Short, Array::from_vec(vec![rows.len(), 2], data), labels.to_vec()).unwrap()
    }

    #[test]
    fn separable_toy_is_solved() {
        let train = set(&[[0.0, 0.0], [0.5, 0.2], [3.0, 3.0], [3.5, 2.5]], &[0, 0, 1, 1]);
        let test = set(&[[0.2, 0.1], [3.2, 2.9]], &[0, 1]);
        let r = linear_svm_accuracy(&train, &test, &SvmConfig::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.converged);
    }

    #[test]
    fn optimum_has_a_vanishing_gradient() {
        // 1-D, no standardization, points ±1 with bias 0: the optimum of
        // ½w² + 2C(1 − w)² (w < 1) is w = 4C / (1 + 4C).
        let train = FeatureSet::new(FeatureKind::Short, Array::from_vec(vec![2, 1], vec![-1.0, 1.0]), vec![0, 1]).unwrap();
        let cfg = SvmConfig {
            bias: 0.0,
            standardize: false,
            tol: 1e-10,
            ..SvmConfig::default()
        };
        let (mean, scale) = column_scaling(&train, false);
        let x = design(&train, &mean, &scale, 0.0);
        let b = train_binary(&x, &[-1.0, 1.0], &cfg);
        assert!(b.converged);
        assert!((b.w[0] - 0.8).abs() < 1e-9, "{}", b.w[0]);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let train = set(&[[0.0, 0.0], [0.1, 0.0], [0.05, 0.0], [0.2, 0.1]], &[0, 1, 0, 1]);
        let cfg = SvmConfig {
            max_iter: 1,
            tol: 1e-14,
            ..SvmConfig::default()
        };
        let r = linear_svm_accuracy(&train, &train, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, vec![1, 1]);
    }
}
