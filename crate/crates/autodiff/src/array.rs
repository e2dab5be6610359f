//! Dense row-major n-dimensional arrays and the numeric kernels behind
//! every tape operation.

use crate::Float;

/// Contiguous row-major array. A rank-0 array (empty shape) holds one
/// element.
#[derive(Clone, Debug, PartialEq)]
pub struct Array<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Numpy-style broadcast of two shapes (right aligned).
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` when viewed inside a broadcast `out` shape: zero for
/// broadcast dimensions.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(offset_a, offset_b, offset_out, inner_len, inner_stride_a,
/// inner_stride_b)` for every innermost row of the broadcast iteration space.
fn for_each_row(
    out: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize, usize, usize, usize),
) {
    let rank = out.len();
    if rank == 0 {
        f(0, 0, 0, 1, 0, 0);
        return;
    }
    let inner = out[rank - 1];
    let rows: usize = out[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank.saturating_sub(1)];
    let (mut oa, mut ob) = (0usize, 0usize);
    for row in 0..rows {
        f(oa, ob, row * inner, inner, sa[rank - 1], sb[rank - 1]);
        // increment the multi-index over the outer dims
        let mut d = rank - 1;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out[d] {
                break;
            }
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

impl<T: Float> Array<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(
            numel(&shape),
            data.len(),
            "data length does not match shape {shape:?}"
        );
        Array { shape, data }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Self {
        Self::from_vec(shape, data.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Array {
            shape: shape.to_vec(),
            data: vec![v; numel(shape)],
        }
    }

    pub fn scalar(v: T) -> Self {
        Array {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// The single element of a one-element array.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on array of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Self {
        assert_eq!(numel(shape), self.data.len(), "cannot reshape {:?} to {shape:?}", self.shape);
        self.shape = shape.to_vec();
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Float>(&self) -> Array<U> {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Elementwise binary op with numpy broadcasting.
    pub fn zip_broadcast(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        if self.shape == other.shape {
            let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
            return Array { shape: self.shape.clone(), data };
        }
        let out_shape = broadcast_shapes(&self.shape, &other.shape).unwrap_or_else(|| {
            panic!("shapes {:?} and {:?} do not broadcast", self.shape, other.shape)
        });
        let sa = broadcast_strides(&self.shape, &out_shape);
        let sb = broadcast_strides(&other.shape, &out_shape);
        let mut data = vec![T::zero(); numel(&out_shape)];
        for_each_row(&out_shape, &sa, &sb, |oa, ob, oo, len, ia, ib| {
            let dst = &mut data[oo..oo + len];
            for (j, d) in dst.iter_mut().enumerate() {
                *d = f(self.data[oa + j * ia], other.data[ob + j * ib]);
            }
        });
        Array { shape: out_shape, data }
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Self {
        if self.shape == shape {
            return self.clone();
        }
        let sa = broadcast_strides(&self.shape, shape);
        let zeros = vec![0; shape.len()];
        let mut data = vec![T::zero(); numel(shape)];
        for_each_row(shape, &sa, &zeros, |oa, _, oo, len, ia, _| {
            let dst = &mut data[oo..oo + len];
            if ia == 0 {
                dst.fill(self.data[oa]);
            } else {
                dst.copy_from_slice(&self.data[oa..oa + len]);
            }
        });
        Array { shape: shape.to_vec(), data }
    }

    /// Sums broadcast dimensions away so the result has `shape`; the inverse
    /// of [`Array::broadcast_to`].
    pub fn sum_to(&self, shape: &[usize]) -> Self {
        if self.shape == shape {
            return self.clone();
        }
        assert!(
            broadcast_shapes(shape, &self.shape).as_deref() == Some(&self.shape[..]),
            "cannot sum {:?} to {shape:?}",
            self.shape
        );
        let st = broadcast_strides(shape, &self.shape);
        let zeros = vec![0; self.shape.len()];
        let mut data = vec![T::zero(); numel(shape)];
        for_each_row(&self.shape, &st, &zeros, |ot, _, oi, len, it, _| {
            let src = &self.data[oi..oi + len];
            if it == 0 {
                let mut acc = T::zero();
                for &v in src {
                    acc += v;
                }
                data[ot] += acc;
            } else {
                for (d, &v) in data[ot..ot + len].iter_mut().zip(src) {
                    *d += v;
                }
            }
        });
        Array { shape: shape.to_vec(), data }
    }

    /// Matrix product of two rank-2 arrays with optional transposition of
    /// either operand.
    pub fn matmul(&self, other: &Self, ta: bool, tb: bool) -> Self {
        assert_eq!(self.ndim(), 2, "matmul lhs must be rank 2, got {:?}", self.shape);
        assert_eq!(other.ndim(), 2, "matmul rhs must be rank 2, got {:?}", other.shape);
        let (r0, c0) = (self.shape[0], self.shape[1]);
        let (r1, c1) = (other.shape[0], other.shape[1]);
        let (m, k, rsa, csa) = if ta { (c0, r0, 1, c0 as isize) } else { (r0, c0, c0 as isize, 1) };
        let (k2, n, rsb, csb) = if tb { (c1, r1, 1, c1 as isize) } else { (r1, c1, c1 as isize, 1) };
        assert_eq!(k, k2, "matmul inner dims differ: {:?} x {:?} (ta={ta}, tb={tb})", self.shape, other.shape);
        let mut out = vec![T::zero(); m * n];
        if m > 0 && n > 0 && k > 0 {
            // SAFETY: strides describe the contiguous buffers checked above.
            unsafe {
                T::gemm(
                    m,
                    k,
                    n,
                    T::one(),
                    self.data.as_ptr(),
                    rsa,
                    csa,
                    other.data.as_ptr(),
                    rsb,
                    csb,
                    T::zero(),
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        Array { shape: vec![m, n], data: out }
    }

    /// Patch extraction for stride-1 square convolutions on NHWC input:
    /// `[N, H, W, C] -> [N*H*W, k*k*C]`. Taps up to `pad` pixels outside the
    /// map read the nearest edge pixel (replicate padding), so constant maps
    /// stay constant.
    pub fn im2col(&self, k: usize, pad: usize) -> Self {
        let (n, h, w, c) = nhwc(&self.shape);
        let cols = k * k * c;
        let mut out = vec![T::zero(); n * h * w * cols];
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let row = ((b * h + y) * w + x) * cols;
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - pad as isize;
                        let sy = sy.clamp(0, h as isize - 1);
                        for kx in 0..k {
                            let sx = x as isize + kx as isize - pad as isize;
                            let sx = sx.clamp(0, w as isize - 1);
                            let src = ((b * h + sy as usize) * w + sx as usize) * c;
                            let dst = row + (ky * k + kx) * c;
                            out[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
                        }
                    }
                }
            }
        }
        Array { shape: vec![n * h * w, cols], data: out }
    }

    /// Adjoint of [`Array::im2col`]: scatters patches back onto a
    /// `[N, H, W, C]` map, accumulating overlaps.
    pub fn col2im(&self, n: usize, h: usize, w: usize, k: usize, pad: usize) -> Self {
        let cols = self.shape[1];
        let c = cols / (k * k);
        assert_eq!(self.shape[0], n * h * w, "col2im row count mismatch");
        let mut out = vec![T::zero(); n * h * w * c];
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let row = ((b * h + y) * w + x) * cols;
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - pad as isize;
                        let sy = sy.clamp(0, h as isize - 1);
                        for kx in 0..k {
                            let sx = x as isize + kx as isize - pad as isize;
                            let sx = sx.clamp(0, w as isize - 1);
                            let dst = ((b * h + sy as usize) * w + sx as usize) * c;
                            let src = row + (ky * k + kx) * c;
                            for (d, &v) in out[dst..dst + c].iter_mut().zip(&self.data[src..src + c]) {
                                *d += v;
                            }
                        }
                    }
                }
            }
        }
        Array { shape: vec![n, h, w, c], data: out }
    }

    /// 2x2 area-average downsampling of an NHWC map.
    pub fn down2(&self) -> Self {
        let (n, h, w, c) = nhwc(&self.shape);
        assert!(h % 2 == 0 && w % 2 == 0, "down2 needs even spatial size, got {h}x{w}");
        let (oh, ow) = (h / 2, w / 2);
        let quarter = T::from_f64(0.25);
        let mut out = vec![T::zero(); n * oh * ow * c];
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    let dst = ((b * oh + y) * ow + x) * c;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let src = ((b * h + 2 * y + dy) * w + 2 * x + dx) * c;
                        for ch in 0..c {
                            out[dst + ch] += self.data[src + ch];
                        }
                    }
                    for v in &mut out[dst..dst + c] {
                        *v *= quarter;
                    }
                }
            }
        }
        Array { shape: vec![n, oh, ow, c], data: out }
    }

    /// Adjoint of [`Array::down2`]: nearest upsampling scaled by 1/4.
    pub fn down2_adjoint(&self) -> Self {
        let (n, h, w, c) = nhwc(&self.shape);
        let (oh, ow) = (h * 2, w * 2);
        let quarter = T::from_f64(0.25);
        let mut out = vec![T::zero(); n * oh * ow * c];
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    let src = ((b * h + y / 2) * w + x / 2) * c;
                    let dst = ((b * oh + y) * ow + x) * c;
                    for ch in 0..c {
                        out[dst + ch] = self.data[src + ch] * quarter;
                    }
                }
            }
        }
        Array { shape: vec![n, oh, ow, c], data: out }
    }

    /// Bilinear 2x upsampling (half-pixel centres, edge clamped) of an NHWC
    /// map.
    pub fn up2(&self) -> Self {
        let (n, h, w, c) = nhwc(&self.shape);
        let (oh, ow) = (2 * h, 2 * w);
        let ty = up2_taps(h);
        let tx = up2_taps(w);
        let mut out = vec![T::zero(); n * oh * ow * c];
        for b in 0..n {
            for (y, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                for (x, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                    let dst = ((b * oh + y) * ow + x) * c;
                    for (sy, wy) in [(y0, wy0), (y1, wy1)] {
                        for (sx, wx) in [(x0, wx0), (x1, wx1)] {
                            let wgt = T::from_f64(wy * wx);
                            let src = ((b * h + sy) * w + sx) * c;
                            for ch in 0..c {
                                out[dst + ch] += wgt * self.data[src + ch];
                            }
                        }
                    }
                }
            }
        }
        Array { shape: vec![n, oh, ow, c], data: out }
    }

    /// Adjoint of [`Array::up2`].
    pub fn up2_adjoint(&self) -> Self {
        let (n, oh, ow, c) = nhwc(&self.shape);
        assert!(oh % 2 == 0 && ow % 2 == 0, "up2 adjoint needs even spatial size");
        let (h, w) = (oh / 2, ow / 2);
        let ty = up2_taps(h);
        let tx = up2_taps(w);
        let mut out = vec![T::zero(); n * h * w * c];
        for b in 0..n {
            for (y, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                for (x, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                    let src = ((b * oh + y) * ow + x) * c;
                    for (sy, wy) in [(y0, wy0), (y1, wy1)] {
                        for (sx, wx) in [(x0, wx0), (x1, wx1)] {
                            let wgt = T::from_f64(wy * wx);
                            let dst = ((b * h + sy) * w + sx) * c;
                            for ch in 0..c {
                                out[dst + ch] += wgt * self.data[src + ch];
                            }
                        }
                    }
                }
            }
        }
        Array { shape: vec![n, h, w, c], data: out }
    }

    /// Concatenates arrays of equal leading shape along the last axis.
    pub fn concat_last(parts: &[&Self]) -> Self {
        assert!(!parts.is_empty(), "concat of nothing");
        let lead = &parts[0].shape[..parts[0].ndim() - 1];
        let rows = numel(lead);
        let widths: Vec<usize> = parts.iter().map(|p| *p.shape.last().unwrap()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &wd) in parts.iter().zip(&widths) {
                assert_eq!(&p.shape[..p.ndim() - 1], lead, "concat leading shapes differ");
                data.extend_from_slice(&p.data[r * wd..(r + 1) * wd]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        Array { shape, data }
    }

    /// Columns `start..start+len` of the last axis.
    pub fn slice_last(&self, start: usize, len: usize) -> Self {
        let width = *self.shape.last().expect("slice of rank-0 array");
        assert!(start + len <= width, "slice {start}+{len} exceeds width {width}");
        let rows = self.data.len() / width.max(1);
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&self.data[r * width + start..r * width + start + len]);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = len;
        Array { shape, data }
    }

    /// Places this array at column offset `start` of a zero array whose last
    /// axis has `total` columns. Adjoint of [`Array::slice_last`].
    pub fn pad_last(&self, start: usize, total: usize) -> Self {
        let len = *self.shape.last().expect("pad of rank-0 array");
        let rows = self.data.len() / len.max(1);
        let mut data = vec![T::zero(); rows * total];
        for r in 0..rows {
            data[r * total + start..r * total + start + len]
                .copy_from_slice(&self.data[r * len..(r + 1) * len]);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = total;
        Array { shape, data }
    }
}

fn nhwc(shape: &[usize]) -> (usize, usize, usize, usize) {
    assert_eq!(shape.len(), 4, "expected an NHWC array, got shape {shape:?}");
    (shape[0], shape[1], shape[2], shape[3])
}

/// Source taps `(i0, i1, w0, w1)` for each output row of a bilinear 2x
/// upsample of a length-`n` axis.
fn up2_taps(n: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = (o as f64 + 0.5) / 2.0 - 0.5;
            let f = src.floor();
            let frac = src - f;
            let i0 = (f.max(0.0) as usize).min(n - 1);
            let i1 = ((f + 1.0).max(0.0) as usize).min(n - 1);
            (i0, i1, 1.0 - frac, frac)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], v: &[f64]) -> Array<f64> {
        Array::from_f64(shape.to_vec(), v)
    }

    #[test]
    fn broadcast_add_bias() {
        let a = arr(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = arr(&[3], &[10., 20., 30.]);
        let c = a.zip_broadcast(&b, |x, y| x + y);
        assert_eq!(c.data(), &[11., 22., 33., 14., 25., 36.]);
        assert_eq!(c.sum_to(&[3]).data(), &[25., 47., 69.]);
        assert_eq!(c.sum_to(&[2, 1]).data(), &[66., 75.]);
    }

    #[test]
    fn broadcast_middle_axes() {
        let a = Array::<f64>::ones(&[2, 2, 2, 3]);
        let s = a.sum_to(&[2, 1, 1, 3]);
        assert_eq!(s.data(), &[4.0; 6]);
        let back = s.broadcast_to(&[2, 2, 2, 3]);
        assert_eq!(back.data(), &[4.0; 24]);
    }

    #[test]
    fn matmul_transposes() {
        let a = arr(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = arr(&[3, 2], &[1., 0., 0., 1., 1., 1.]);
        assert_eq!(a.matmul(&b, false, false).data(), &[4., 5., 10., 11.]);
        // a^T a
        let ata = a.matmul(&a, true, false);
        assert_eq!(ata.shape(), &[3, 3]);
        assert_eq!(ata.data()[0], 17.0);
        let aat = a.matmul(&a, false, true);
        assert_eq!(aat.data(), &[14., 32., 32., 77.]);
    }

    #[test]
    fn down2_of_checkerboard_is_uniform() {
        let mut v = vec![0.0; 16];
        for y in 0..4 {
            for x in 0..4 {
                v[y * 4 + x] = if (y + x) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let d = arr(&[1, 4, 4, 1], &v).down2();
        assert_eq!(d.data(), &[0.0; 4]);
    }

    #[test]
    fn up2_preserves_constants() {
        let a = Array::<f64>::full(&[1, 3, 3, 2], 0.7);
        let u = a.up2();
        assert_eq!(u.shape(), &[1, 6, 6, 2]);
        assert!(u.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn concat_slice_pad() {
        let a = arr(&[2, 1], &[1., 2.]);
        let b = arr(&[2, 2], &[3., 4., 5., 6.]);
        let c = Array::concat_last(&[&a, &b]);
        assert_eq!(c.data(), &[1., 3., 4., 2., 5., 6.]);
        assert_eq!(c.slice_last(1, 2), b);
        assert_eq!(a.pad_last(1, 3).data(), &[0., 1., 0., 0., 2., 0.]);
    }

    /// <Ax, y> == <x, A^T y> for each linear kernel and its adjoint.
    #[test]
    fn linear_kernels_are_adjoint_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut rand_arr = |shape: &[usize]| {
            let n = numel(shape);
            Array::<f64>::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        };
        let dot = |a: &Array<f64>, b: &Array<f64>| -> f64 {
            a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
        };
        let x = rand_arr(&[2, 4, 6, 3]);
        let y = rand_arr(&[2, 2, 3, 3]);
        assert!((dot(&x.down2(), &y) - dot(&x, &y.down2_adjoint())).abs() < 1e-12);
        let y2 = rand_arr(&[2, 8, 12, 3]);
        assert!((dot(&x.up2(), &y2) - dot(&x, &y2.up2_adjoint())).abs() < 1e-12);
        let cols = rand_arr(&[2 * 4 * 6, 27]);
        assert!((dot(&x.im2col(3, 1), &cols) - dot(&x, &cols.col2im(2, 4, 6, 3, 1))).abs() < 1e-12);
    }
}
