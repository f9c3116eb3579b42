//! Dense, convolutional and normalisation layers with explicit backward passes.

use serde::{Deserialize, Serialize};

use super::params::{Init, ParamLayout};
use super::{gemm, Mat, Scalar};

/// Affine map `y = x W + b` with `W: [inp x out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
    pub inp: usize,
    pub out: usize,
}

impl Dense {
    pub fn register(layout: &mut ParamLayout, name: &str, inp: usize, out: usize, gain: f64) -> Dense {
        let w = layout.add(&format!("{name}.w"), &[inp, out], Init::Orthogonal { gain, blocks: 1 });
        let b = layout.add(&format!("{name}.b"), &[out], Init::Zeros);
        Dense { w, b, inp, out }
    }

    pub fn param_count(inp: usize, out: usize) -> usize {
        inp * out + out
    }

    fn weight<'a, S: Scalar>(&self, p: &'a [S]) -> Mat<'a, S> {
        Mat::new(&p[self.w..self.w + self.inp * self.out], self.inp, self.out)
    }

    pub fn forward<S: Scalar>(&self, p: &[S], x: &[S], rows: usize, y: &mut [S]) {
        let b = &p[self.b..self.b + self.out];
        for r in 0..rows {
            y[r * self.out..(r + 1) * self.out].copy_from_slice(b);
        }
        gemm(Mat::new(&x[..rows * self.inp], rows, self.inp), self.weight(p), S::one(), y, self.out);
    }

    /// Same result as [`Dense::forward`], touching only the non-zero inputs.
    pub fn forward_sparse<S: Scalar>(&self, p: &[S], x: &[S], rows: usize, y: &mut [S]) {
        let b = &p[self.b..self.b + self.out];
        for r in 0..rows {
            let yr = &mut y[r * self.out..(r + 1) * self.out];
            yr.copy_from_slice(b);
            for (j, &xj) in x[r * self.inp..(r + 1) * self.inp].iter().enumerate() {
                if xj != S::zero() {
                    let wj = &p[self.w + j * self.out..self.w + (j + 1) * self.out];
                    for (o, &w) in yr.iter_mut().zip(wj) {
                        *o += xj * w;
                    }
                }
            }
        }
    }

    /// Accumulates parameter gradients into `g` and, if given, writes `dx`.
    pub fn backward<S: Scalar>(&self, p: &[S], x: &[S], dy: &[S], rows: usize, g: &mut [S], dx: Option<&mut [S]>) {
        let dyv = Mat::new(&dy[..rows * self.out], rows, self.out);
        gemm(Mat::new(&x[..rows * self.inp], rows, self.inp).t(), dyv, S::one(), &mut g[self.w..self.w + self.inp * self.out], self.out);
        let gb = &mut g[self.b..self.b + self.out];
        for r in 0..rows {
            for (o, &d) in gb.iter_mut().zip(&dy[r * self.out..(r + 1) * self.out]) {
                *o += d;
            }
        }
        if let Some(dx) = dx {
            gemm(dyv, self.weight(p).t(), S::zero(), dx, self.inp);
        }
    }

    /// Parameter gradients for a sparse input; no input gradient.
    pub fn backward_sparse<S: Scalar>(&self, x: &[S], dy: &[S], rows: usize, g: &mut [S]) {
        for r in 0..rows {
            let dyr = &dy[r * self.out..(r + 1) * self.out];
            for (o, &d) in g[self.b..self.b + self.out].iter_mut().zip(dyr) {
                *o += d;
            }
            for (j, &xj) in x[r * self.inp..(r + 1) * self.inp].iter().enumerate() {
                if xj != S::zero() {
                    let gj = &mut g[self.w + j * self.out..self.w + (j + 1) * self.out];
                    for (o, &d) in gj.iter_mut().zip(dyr) {
                        *o += xj * d;
                    }
                }
            }
        }
    }
}

pub fn relu_inplace<S: Scalar>(y: &mut [S]) {
    for v in y {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Zeroes `dy` wherever the relu output `y` was clamped.
pub fn relu_backward<S: Scalar>(y: &[S], dy: &mut [S]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= S::zero() {
            *d = S::zero();
        }
    }
}

/// Per-row normalisation to zero mean and unit variance, no affine part.
/// Stores `1 / sqrt(var + eps)` per row for the backward pass.
pub fn layer_norm<S: Scalar>(x: &[S], rows: usize, dim: usize, eps: f64, y: &mut [S], inv_sigma: &mut [S]) {
    let n = S::of(dim as f64);
    for r in 0..rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let mean = xr.iter().copied().sum::<S>() / n;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
        let is = S::one() / (var + S::of(eps)).sqrt();
        inv_sigma[r] = is;
        for (o, &v) in y[r * dim..(r + 1) * dim].iter_mut().zip(xr) {
            *o = (v - mean) * is;
        }
    }
}

pub fn layer_norm_backward<S: Scalar>(y: &[S], inv_sigma: &[S], dy: &[S], rows: usize, dim: usize, dx: &mut [S]) {
    let n = S::of(dim as f64);
    for r in 0..rows {
        let yr = &y[r * dim..(r + 1) * dim];
        let dyr = &dy[r * dim..(r + 1) * dim];
        let mean_dy = dyr.iter().copied().sum::<S>() / n;
        let mean_dyy = dyr.iter().zip(yr).map(|(&d, &v)| d * v).sum::<S>() / n;
        for ((o, &d), &v) in dx[r * dim..(r + 1) * dim].iter_mut().zip(dyr).zip(yr) {
            *o = inv_sigma[r] * (d - mean_dy - v * mean_dyy);
        }
    }
}

/// 3x3 same-padding convolution over `side x side` channel-last grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv3 {
    pub w: usize,
    pub b: usize,
    pub side: usize,
    pub cin: usize,
    pub cout: usize,
}

impl Conv3 {
    pub fn register(layout: &mut ParamLayout, name: &str, side: usize, cin: usize, cout: usize, gain: f64) -> Conv3 {
        let w = layout.add(&format!("{name}.w"), &[9 * cin, cout], Init::Orthogonal { gain, blocks: 1 });
        let b = layout.add(&format!("{name}.b"), &[cout], Init::Zeros);
        Conv3 { w, b, side, cin, cout }
    }

    pub fn in_len(&self) -> usize {
        self.side * self.side * self.cin
    }

    pub fn out_len(&self) -> usize {
        self.side * self.side * self.cout
    }

    fn patch_len(&self) -> usize {
        9 * self.cin
    }

    /// Unfolds `rows` input grids (row stride `x_stride`) into patch rows.
    pub fn im2col<S: Scalar>(&self, x: &[S], x_stride: usize, rows: usize, cols: &mut [S]) {
        let (s, c, k) = (self.side as isize, self.cin, self.patch_len());
        for r in 0..rows {
            let xr = &x[r * x_stride..r * x_stride + self.in_len()];
            for py in 0..s {
                for px in 0..s {
                    let out = &mut cols[((r * self.side * self.side) + (py * s + px) as usize) * k..][..k];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (iy, ix) = (py + ky - 1, px + kx - 1);
                            let dst = &mut out[(ky * 3 + kx) as usize * c..][..c];
                            if iy < 0 || iy >= s || ix < 0 || ix >= s {
                                dst.fill(S::zero());
                            } else {
                                dst.copy_from_slice(&xr[(iy * s + ix) as usize * c..][..c]);
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<S: Scalar>(&self, dcols: &[S], rows: usize, dx: &mut [S], dx_stride: usize) {
        let (s, c, k) = (self.side as isize, self.cin, self.patch_len());
        for r in 0..rows {
            let dxr = &mut dx[r * dx_stride..r * dx_stride + self.in_len()];
            dxr.fill(S::zero());
            for py in 0..s {
                for px in 0..s {
                    let src = &dcols[((r * self.side * self.side) + (py * s + px) as usize) * k..][..k];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (iy, ix) = (py + ky - 1, px + kx - 1);
                            if iy < 0 || iy >= s || ix < 0 || ix >= s {
                                continue;
                            }
                            let d = &mut dxr[(iy * s + ix) as usize * c..][..c];
                            for (o, &v) in d.iter_mut().zip(&src[(ky * 3 + kx) as usize * c..][..c]) {
                                *o += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Forward from prepared patches into `y` (`rows x out_len`).
    pub fn forward_cols<S: Scalar>(&self, p: &[S], cols: &[S], rows: usize, y: &mut [S]) {
        let n = rows * self.side * self.side;
        let b = &p[self.b..self.b + self.cout];
        for i in 0..n {
            y[i * self.cout..(i + 1) * self.cout].copy_from_slice(b);
        }
        let w = Mat::new(&p[self.w..self.w + self.patch_len() * self.cout], self.patch_len(), self.cout);
        gemm(Mat::new(&cols[..n * self.patch_len()], n, self.patch_len()), w, S::one(), y, self.cout);
    }

    /// Accumulates parameter gradients; writes the input gradient if asked.
    pub fn backward_cols<S: Scalar>(
        &self,
        p: &[S],
        cols: &[S],
        dy: &[S],
        rows: usize,
        g: &mut [S],
        dx: Option<(&mut [S], usize)>,
    ) {
        let n = rows * self.side * self.side;
        let k = self.patch_len();
        let dyv = Mat::new(&dy[..n * self.cout], n, self.cout);
        gemm(Mat::new(&cols[..n * k], n, k).t(), dyv, S::one(), &mut g[self.w..self.w + k * self.cout], self.cout);
        let gb = &mut g[self.b..self.b + self.cout];
        for i in 0..n {
            for (o, &d) in gb.iter_mut().zip(&dy[i * self.cout..(i + 1) * self.cout]) {
                *o += d;
            }
        }
        if let Some((dx, stride)) = dx {
            let mut dcols = vec![S::zero(); n * k];
            let w = Mat::new(&p[self.w..self.w + k * self.cout], k, self.cout);
            gemm(dyv, w.t(), S::zero(), &mut dcols, k);
            self.col2im(&dcols, rows, dx, stride);
        }
    }

    pub fn patches_len(&self, rows: usize) -> usize {
        rows * self.side * self.side * self.patch_len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_gradient_is_closed_form() {
        // L = |xW + b - y|^2 has dL/dW = 2 x^T (xW + b - y).
        let mut layout = ParamLayout::new();
        let d = Dense::register(&mut layout, "l", 3, 2, 1.0);
        let mut p: Vec<f64> = layout.initialise(1);
        p[d.b] = 0.3;
        let x = [0.5, -1.0, 2.0];
        let target = [1.0, -0.5];
        let mut y = [0.0; 2];
        d.forward(&p, &x, 1, &mut y);
        let resid: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
        let mut g = vec![0.0; layout.len()];
        d.backward(&p, &x, &dy, 1, &mut g, None);
        for i in 0..3 {
            for j in 0..2 {
                assert!((g[d.w + i * 2 + j] - 2.0 * resid[j] * x[i]).abs() < 1e-12);
            }
        }
        assert!((g[d.b] - 2.0 * resid[0]).abs() < 1e-12);
    }

    #[test]
    fn sparse_path_matches_dense() {
        let mut layout = ParamLayout::new();
        let d = Dense::register(&mut layout, "l", 6, 4, 1.0);
        let p: Vec<f64> = layout.initialise(2);
        let x = [0.0, 1.0, 0.0, 0.0, 2.5, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0];
        let (mut a, mut b) = (vec![0.0; 8], vec![0.0; 8]);
        d.forward(&p, &x, 2, &mut a);
        d.forward_sparse(&p, &x, 2, &mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let dy: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
        let (mut ga, mut gb) = (vec![0.0; layout.len()], vec![0.0; layout.len()]);
        d.backward(&p, &x, &dy, 2, &mut ga, None);
        d.backward_sparse(&x, &dy, 2, &mut gb);
        for (u, v) in ga.iter().zip(&gb) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_standardises_rows() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0];
        let mut y = [0.0; 8];
        let mut is = [0.0; 2];
        layer_norm::<f64>(&x, 2, 4, 1e-5, &mut y, &mut is);
        let mean: f64 = y[..4].iter().sum::<f64>() / 4.0;
        let var: f64 = y[..4].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-5);
        // A constant row normalises to zeros.
        assert!(y[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_identity_kernel_copies_input() {
        let mut layout = ParamLayout::new();
        let c = Conv3::register(&mut layout, "c", 3, 2, 2, 1.0);
        let mut p = vec![0.0f64; layout.len()];
        // Centre tap, channel i -> channel i.
        for ch in 0..2 {
            p[c.w + (4 * 2 + ch) * 2 + ch] = 1.0;
        }
        let x: Vec<f64> = (0..18).map(|i| i as f64).collect();
        let mut cols = vec![0.0; c.patches_len(1)];
        c.im2col(&x, 18, 1, &mut cols);
        let mut y = vec![0.0; 18];
        c.forward_cols(&p, &cols, 1, &mut y);
        assert_eq!(x, y);
    }
}
