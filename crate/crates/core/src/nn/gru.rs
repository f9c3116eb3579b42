//! GRU cell with fused gate weights and backpropagation through time.
//!
//! Gate order in the fused matrices is update `z`, reset `r`, candidate `c`:
//!
//! ```text
//! z = sigmoid(x Wz + h Uz + bz)
//! r = sigmoid(x Wr + h Ur + br)
//! c = tanh(x Wc + (r * h) Uc + bc)
//! h' = (1 - z) * h + z * c
//! ```

use serde::{Deserialize, Serialize};

use super::params::{Init, ParamLayout};
use super::{gemm, sigmoid, Mat, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruCell {
    /// `[inp x 3H]`
    pub wx: usize,
    /// `[H x 3H]`
    pub wh: usize,
    /// `[3H]`
    pub b: usize,
    pub inp: usize,
    pub hidden: usize,
}

/// Per-row activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct GruTape<S> {
    /// `[rows x 3H]` post-nonlinearity `z | r | c`.
    pub gates: Vec<S>,
    /// `[rows x H]` previous hidden state after episode resets.
    pub h_prev: Vec<S>,
}

impl GruCell {
    pub fn register(layout: &mut ParamLayout, name: &str, inp: usize, hidden: usize) -> GruCell {
        let wx = layout.add(&format!("{name}.wx"), &[inp, 3 * hidden], Init::Orthogonal { gain: 1.0, blocks: 3 });
        let wh = layout.add(&format!("{name}.wh"), &[hidden, 3 * hidden], Init::Orthogonal { gain: 1.0, blocks: 3 });
        let b = layout.add(&format!("{name}.b"), &[3 * hidden], Init::Zeros);
        GruCell { wx, wh, b, inp, hidden }
    }

    pub fn param_count(inp: usize, hidden: usize) -> usize {
        3 * (inp * hidden + hidden * hidden + hidden)
    }

    fn wh_cols<'a, S: Scalar>(&self, p: &'a [S], from: usize, cols: usize) -> Mat<'a, S> {
        let h3 = 3 * self.hidden;
        Mat::cols_of(&p[self.wh..self.wh + self.hidden * h3], self.hidden, h3, from, cols)
    }

    /// Runs `steps` time steps over `batch` rows each (time-major `x`).
    ///
    /// `reset[t * batch + i]` zeroes row `i`'s state before step `t`. Writes the
    /// output states to `h_out` and the tape for [`GruCell::backward`].
    #[allow(clippy::too_many_arguments)]
    pub fn forward<S: Scalar>(
        &self,
        p: &[S],
        x: &[S],
        h0: &[S],
        reset: &[bool],
        steps: usize,
        batch: usize,
        h_out: &mut [S],
        tape: &mut GruTape<S>,
    ) {
        let hd = self.hidden;
        let h3 = 3 * hd;
        let rows = steps * batch;
        tape.gates.resize(rows * h3, S::zero());
        tape.h_prev.resize(rows * hd, S::zero());
        // Input contributions for every row at once.
        let bias = &p[self.b..self.b + h3];
        for r in 0..rows {
            tape.gates[r * h3..(r + 1) * h3].copy_from_slice(bias);
        }
        let wx = Mat::new(&p[self.wx..self.wx + self.inp * h3], self.inp, h3);
        gemm(Mat::new(&x[..rows * self.inp], rows, self.inp), wx, S::one(), &mut tape.gates, h3);

        let mut rh = vec![S::zero(); batch * hd];
        for t in 0..steps {
            let rows_t = t * batch..(t + 1) * batch;
            {
                let hp = &mut tape.h_prev[rows_t.start * hd..rows_t.end * hd];
                let src = if t == 0 { &h0[..batch * hd] } else { &h_out[(t - 1) * batch * hd..t * batch * hd] };
                hp.copy_from_slice(src);
                for i in 0..batch {
                    if reset[t * batch + i] {
                        hp[i * hd..(i + 1) * hd].fill(S::zero());
                    }
                }
            }
            let hp = &tape.h_prev[rows_t.start * hd..rows_t.end * hd];
            let g = &mut tape.gates[rows_t.start * h3..rows_t.end * h3];
            gemm(Mat::new(hp, batch, hd), self.wh_cols(p, 0, 2 * hd), S::one(), g, h3);
            for i in 0..batch {
                for j in 0..2 * hd {
                    g[i * h3 + j] = sigmoid(g[i * h3 + j]);
                }
                for j in 0..hd {
                    rh[i * hd + j] = g[i * h3 + hd + j] * hp[i * hd + j];
                }
            }
            gemm(Mat::new(&rh, batch, hd), self.wh_cols(p, 2 * hd, hd), S::one(), &mut g[2 * hd..], h3);
            let ho = &mut h_out[rows_t.start * hd..rows_t.end * hd];
            for i in 0..batch {
                for j in 0..hd {
                    let c = g[i * h3 + 2 * hd + j].tanh();
                    g[i * h3 + 2 * hd + j] = c;
                    let z = g[i * h3 + j];
                    ho[i * hd + j] = (S::one() - z) * hp[i * hd + j] + z * c;
                }
            }
        }
    }

    /// Backpropagates `dh` (gradient of the loss w.r.t. every output state)
    /// through time. Accumulates parameter gradients into `g` and writes the
    /// input gradient `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<S: Scalar>(
        &self,
        p: &[S],
        x: &[S],
        tape: &GruTape<S>,
        reset: &[bool],
        dh: &[S],
        steps: usize,
        batch: usize,
        g: &mut [S],
        dx: &mut [S],
    ) {
        let hd = self.hidden;
        let h3 = 3 * hd;
        let rows = steps * batch;
        let mut dpre = vec![S::zero(); rows * h3];
        let mut rhm = vec![S::zero(); rows * hd];
        let mut carry = vec![S::zero(); batch * hd];
        let mut d_rh = vec![S::zero(); batch * hd];
        let mut dtot = vec![S::zero(); batch * hd];
        for t in (0..steps).rev() {
            let base = t * batch;
            for i in 0..batch * hd {
                dtot[i] = dh[base * hd + i] + carry[i];
            }
            let gt = &tape.gates[base * h3..(base + batch) * h3];
            let hp = &tape.h_prev[base * hd..(base + batch) * hd];
            let dp = &mut dpre[base * h3..(base + batch) * h3];
            for i in 0..batch {
                for j in 0..hd {
                    let (z, c) = (gt[i * h3 + j], gt[i * h3 + 2 * hd + j]);
                    let d = dtot[i * hd + j];
                    let h = hp[i * hd + j];
                    dp[i * h3 + j] = d * (c - h) * z * (S::one() - z);
                    dp[i * h3 + 2 * hd + j] = d * z * (S::one() - c * c);
                    carry[i * hd + j] = d * (S::one() - z);
                    rhm[(base + i) * hd + j] = gt[i * h3 + hd + j] * h;
                }
            }
            // Through the candidate's recurrent term (r * h) Uc.
            gemm(Mat::cols_of(dp, batch, h3, 2 * hd, hd), self.wh_cols(p, 2 * hd, hd).t(), S::zero(), &mut d_rh, hd);
            for i in 0..batch {
                for j in 0..hd {
                    let r = gt[i * h3 + hd + j];
                    let h = hp[i * hd + j];
                    dp[i * h3 + hd + j] = d_rh[i * hd + j] * h * r * (S::one() - r);
                    carry[i * hd + j] += d_rh[i * hd + j] * r;
                }
            }
            gemm(Mat::cols_of(dp, batch, h3, 0, 2 * hd), self.wh_cols(p, 0, 2 * hd).t(), S::one(), &mut carry, hd);
            for i in 0..batch {
                if reset[base + i] {
                    carry[i * hd..(i + 1) * hd].fill(S::zero());
                }
            }
        }
        let dpv = Mat::new(&dpre, rows, h3);
        gemm(Mat::new(&x[..rows * self.inp], rows, self.inp).t(), dpv, S::one(), &mut g[self.wx..self.wx + self.inp * h3], h3);
        let gwh = &mut g[self.wh..self.wh + hd * h3];
        gemm(Mat::new(&tape.h_prev, rows, hd).t(), Mat::cols_of(&dpre, rows, h3, 0, 2 * hd), S::one(), gwh, h3);
        gemm(Mat::new(&rhm, rows, hd).t(), Mat::cols_of(&dpre, rows, h3, 2 * hd, hd), S::one(), &mut gwh[2 * hd..], h3);
        let gb = &mut g[self.b..self.b + h3];
        for r in 0..rows {
            for (o, &d) in gb.iter_mut().zip(&dpre[r * h3..(r + 1) * h3]) {
                *o += d;
            }
        }
        gemm(dpv, Mat::new(&p[self.wx..self.wx + self.inp * h3], self.inp, h3).t(), S::zero(), dx, self.inp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(inp: usize, hidden: usize) -> (GruCell, ParamLayout) {
        let mut l = ParamLayout::new();
        let c = GruCell::register(&mut l, "gru", inp, hidden);
        (c, l)
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let (c, l) = cell(3, 4);
        let p = vec![0.0f64; l.len()];
        let x = [0.3, -0.2, 0.9];
        let h0 = [0.8, -0.4, 0.2, 1.0];
        let mut h = [0.0; 4];
        c.forward(&p, &x, &h0, &[false], 1, 1, &mut h, &mut GruTape::default());
        for (a, b) in h.iter().zip(&h0) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        c.forward(&p, &x, &[0.0; 4], &[false], 1, 1, &mut h, &mut GruTape::default());
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let (c, l) = cell(3, 5);
        let p: Vec<f64> = l.initialise(4);
        let x = [0.1, 0.2, 0.3, 0.1, 0.2, 0.3];
        let h0 = [0.0; 10];
        let mut h = [0.0; 10];
        c.forward(&p, &x, &h0, &[false, false], 1, 2, &mut h, &mut GruTape::default());
        assert_eq!(h[..5], h[5..]);
    }

    #[test]
    fn reset_flag_clears_state() {
        let (c, l) = cell(2, 3);
        let p: Vec<f64> = l.initialise(5);
        let x = [0.5, -0.5];
        let h0 = [0.9, -0.9, 0.3];
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        c.forward(&p, &x, &h0, &[true], 1, 1, &mut a, &mut GruTape::default());
        c.forward(&p, &x, &[0.0; 3], &[false], 1, 1, &mut b, &mut GruTape::default());
        assert_eq!(a, b);
    }
}
