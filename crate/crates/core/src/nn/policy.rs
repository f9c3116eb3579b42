//! Recurrent actor-critic: encoder, layer norm, FC, GRU (or MLP trunk), and
//! separate two-layer actor and critic heads.

use serde::{Deserialize, Serialize};

use super::gru::{GruCell, GruTape};
use super::layers::{layer_norm, layer_norm_backward, relu_backward, relu_inplace, Conv3, Dense};
use super::params::ParamLayout;
use super::Scalar;
use crate::env::obs::{ObsMode, ObsShape};
use crate::error::{Error, Result};

const RELU_GAIN: f64 = std::f64::consts::SQRT_2;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// One relu affine layer over the flattened observation.
    Affine,
    /// Two relu 3x3 conv layers over the grid part, flat tail appended.
    Conv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trunk {
    Gru,
    /// Stateless two-layer feedforward trunk sized to match the GRU's parameter count.
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub obs: ObsShape,
    pub num_actions: usize,
    pub encoder: EncoderKind,
    /// Affine encoder width.
    pub enc_dim: usize,
    pub conv_channels: usize,
    /// Layer-normalise encoder features.
    pub normalise: bool,
    pub fc_dim: usize,
    pub hidden: usize,
    pub trunk: Trunk,
    pub head_dim: usize,
}

impl PolicyConfig {
    pub fn kitchen(mode: ObsMode, trunk: Trunk) -> Self {
        PolicyConfig {
            obs: ObsShape::kitchen(mode),
            num_actions: crate::env::kitchen::KitchenAction::COUNT,
            encoder: EncoderKind::Affine,
            enc_dim: 128,
            conv_channels: 32,
            normalise: true,
            fc_dim: 128,
            hidden: 128,
            trunk,
            head_dim: 64,
        }
    }

    pub fn coingame(mode: ObsMode, trunk: Trunk) -> Self {
        PolicyConfig {
            obs: ObsShape::coingame(mode),
            num_actions: crate::env::coingame::CoinAction::COUNT,
            hidden: 32,
            ..Self::kitchen(mode, trunk)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder == EncoderKind::Conv && self.obs.grid.is_none() {
            return Err(Error::Config("conv encoder needs a grid observation".into()));
        }
        if self.obs.dim() == 0 || self.num_actions == 0 || self.hidden == 0 || self.fc_dim == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Width of the encoder output fed to the normaliser.
    pub fn enc_out(&self) -> usize {
        match self.encoder {
            EncoderKind::Affine => self.enc_dim,
            EncoderKind::Conv => {
                let (h, w, _) = self.obs.grid.unwrap();
                h * w * self.conv_channels + self.obs.flat
            }
        }
    }

    /// Hidden width of the MLP trunk with the GRU's parameter count.
    pub fn mlp_width(&self) -> usize {
        let (f, h) = (self.fc_dim, self.hidden);
        let target = GruCell::param_count(f, h) - h;
        ((target as f64) / ((f + 1 + h) as f64)).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy)]
enum EncoderNet {
    Affine(Dense),
    Conv(Conv3, Conv3),
}

#[derive(Debug, Clone, Copy)]
enum TrunkNet {
    Gru(GruCell),
    Mlp(Dense, Dense),
}

#[derive(Debug, Clone, Copy)]
struct Net {
    enc: EncoderNet,
    fc: Dense,
    trunk: TrunkNet,
    a1: Dense,
    a2: Dense,
    c1: Dense,
    c2: Dense,
}

impl Net {
    fn build(c: &PolicyConfig) -> (Net, ParamLayout) {
        let mut l = ParamLayout::new();
        let enc = match c.encoder {
            EncoderKind::Affine => EncoderNet::Affine(Dense::register(&mut l, "encoder", c.obs.dim(), c.enc_dim, RELU_GAIN)),
            EncoderKind::Conv => {
                let (side, _, ch) = c.obs.grid.unwrap();
                EncoderNet::Conv(
                    Conv3::register(&mut l, "conv1", side, ch, c.conv_channels, RELU_GAIN),
                    Conv3::register(&mut l, "conv2", side, c.conv_channels, c.conv_channels, RELU_GAIN),
                )
            }
        };
        let fc = Dense::register(&mut l, "fc", c.enc_out(), c.fc_dim, RELU_GAIN);
        let trunk = match c.trunk {
            Trunk::Gru => TrunkNet::Gru(GruCell::register(&mut l, "gru", c.fc_dim, c.hidden)),
            Trunk::Mlp => {
                let m = c.mlp_width();
                TrunkNet::Mlp(
                    Dense::register(&mut l, "mlp1", c.fc_dim, m, RELU_GAIN),
                    Dense::register(&mut l, "mlp2", m, c.hidden, 1.0),
                )
            }
        };
        let a1 = Dense::register(&mut l, "actor1", c.hidden, c.head_dim, RELU_GAIN);
        let a2 = Dense::register(&mut l, "actor2", c.head_dim, c.num_actions, 0.01);
        let c1 = Dense::register(&mut l, "critic1", c.hidden, c.head_dim, RELU_GAIN);
        let c2 = Dense::register(&mut l, "critic2", c.head_dim, 1, 1.0);
        (Net { enc, fc, trunk, a1, a2, c1, c2 }, l)
    }
}

/// Activations of one forward pass, reused across calls.
#[derive(Debug, Clone, Default)]
pub struct Cache<S> {
    pub steps: usize,
    pub batch: usize,
    enc: Vec<S>,
    cols1: Vec<S>,
    act1: Vec<S>,
    cols2: Vec<S>,
    act2: Vec<S>,
    ln: Vec<S>,
    inv_sigma: Vec<S>,
    fc: Vec<S>,
    gru: GruTape<S>,
    mlp: Vec<S>,
    /// `[rows x hidden]` trunk outputs; for the GRU these are the states `h_t`.
    pub hidden: Vec<S>,
    a1: Vec<S>,
    c1: Vec<S>,
    /// `[rows x actions]`
    pub logits: Vec<S>,
    /// `[rows]`
    pub values: Vec<S>,
    reset: Vec<bool>,
}

impl<S: Scalar> Cache<S> {
    pub fn rows(&self) -> usize {
        self.steps * self.batch
    }

    /// States after the last step, one row per batch element.
    pub fn last_hidden(&self, hidden: usize) -> &[S] {
        let r = self.rows();
        &self.hidden[(r - self.batch) * hidden..r * hidden]
    }
}

fn sized<S: Scalar>(v: &mut Vec<S>, n: usize) {
    v.clear();
    v.resize(n, S::zero());
}

/// Output of a single batched step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<S> {
    pub logits: Vec<S>,
    pub values: Vec<S>,
    pub hidden: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct Policy<S> {
    config: PolicyConfig,
    layout: ParamLayout,
    net: Net,
    pub params: Vec<S>,
}

impl<S: Scalar> Policy<S> {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (net, layout) = Net::build(&config);
        let params = layout.initialise(seed);
        Ok(Policy { config, layout, net, params })
    }

    pub fn from_params(config: PolicyConfig, params: Vec<S>) -> Result<Self> {
        config.validate()?;
        let (net, layout) = Net::build(&config);
        if params.len() != layout.len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", layout.len(), params.len())));
        }
        Ok(Policy { config, layout, net, params })
    }

    /// Same network with parameters converted to another precision.
    pub fn cast<T: Scalar>(&self) -> Policy<T> {
        Policy { config: self.config, layout: self.layout.clone(), net: self.net, params: self.params.iter().map(|v| T::of(v.f64())).collect() }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    pub fn is_recurrent(&self) -> bool {
        self.config.trunk == Trunk::Gru
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden
    }

    /// Parameter count of the trunk alone.
    pub fn trunk_params(&self) -> usize {
        let prefix = match self.config.trunk {
            Trunk::Gru => "gru.",
            Trunk::Mlp => "mlp",
        };
        self.layout.specs().iter().filter(|s| s.name.starts_with(prefix)).map(|s| s.len()).sum()
    }

    /// Forward pass over `steps x batch` time-major rows starting from `h0`.
    /// `reset[t * batch + i]` zeroes the state of row `i` before step `t`.
    pub fn forward(&self, obs: &[S], h0: &[S], reset: &[bool], steps: usize, batch: usize, cache: &mut Cache<S>) {
        let c = &self.config;
        let p = &self.params[..];
        let rows = steps * batch;
        let d = c.obs.dim();
        assert!(obs.len() >= rows * d && reset.len() >= rows, "input shorter than steps x batch");
        cache.steps = steps;
        cache.batch = batch;
        cache.reset.clear();
        cache.reset.extend_from_slice(&reset[..rows]);
        let e = c.enc_out();

        sized(&mut cache.enc, rows * e);
        match self.net.enc {
            EncoderNet::Affine(l) => {
                l.forward_sparse(p, obs, rows, &mut cache.enc);
                relu_inplace(&mut cache.enc);
            }
            EncoderNet::Conv(k1, k2) => {
                sized(&mut cache.cols1, k1.patches_len(rows));
                k1.im2col(obs, d, rows, &mut cache.cols1);
                sized(&mut cache.act1, rows * k1.out_len());
                k1.forward_cols(p, &cache.cols1, rows, &mut cache.act1);
                relu_inplace(&mut cache.act1);
                sized(&mut cache.cols2, k2.patches_len(rows));
                k2.im2col(&cache.act1, k1.out_len(), rows, &mut cache.cols2);
                sized(&mut cache.act2, rows * k2.out_len());
                k2.forward_cols(p, &cache.cols2, rows, &mut cache.act2);
                relu_inplace(&mut cache.act2);
                let g = k2.out_len();
                let flat = c.obs.flat;
                let grid = c.obs.grid_len();
                for r in 0..rows {
                    cache.enc[r * e..r * e + g].copy_from_slice(&cache.act2[r * g..(r + 1) * g]);
                    cache.enc[r * e + g..(r + 1) * e].copy_from_slice(&obs[r * d + grid..r * d + grid + flat]);
                }
            }
        }

        sized(&mut cache.ln, rows * e);
        sized(&mut cache.inv_sigma, rows);
        if c.normalise {
            layer_norm(&cache.enc, rows, e, LN_EPS, &mut cache.ln, &mut cache.inv_sigma);
        } else {
            cache.ln.copy_from_slice(&cache.enc);
        }

        sized(&mut cache.fc, rows * c.fc_dim);
        self.net.fc.forward(p, &cache.ln, rows, &mut cache.fc);
        relu_inplace(&mut cache.fc);

        sized(&mut cache.hidden, rows * c.hidden);
        match self.net.trunk {
            TrunkNet::Gru(g) => g.forward(p, &cache.fc, h0, reset, steps, batch, &mut cache.hidden, &mut cache.gru),
            TrunkNet::Mlp(m1, m2) => {
                sized(&mut cache.mlp, rows * m1.out);
                m1.forward(p, &cache.fc, rows, &mut cache.mlp);
                relu_inplace(&mut cache.mlp);
                m2.forward(p, &cache.mlp, rows, &mut cache.hidden);
                for v in &mut cache.hidden {
                    *v = v.tanh();
                }
            }
        }

        let n = &self.net;
        sized(&mut cache.a1, rows * c.head_dim);
        n.a1.forward(p, &cache.hidden, rows, &mut cache.a1);
        relu_inplace(&mut cache.a1);
        sized(&mut cache.logits, rows * c.num_actions);
        n.a2.forward(p, &cache.a1, rows, &mut cache.logits);
        sized(&mut cache.c1, rows * c.head_dim);
        n.c1.forward(p, &cache.hidden, rows, &mut cache.c1);
        relu_inplace(&mut cache.c1);
        sized(&mut cache.values, rows);
        n.c2.forward(p, &cache.c1, rows, &mut cache.values);
    }

    /// One step for `batch` rows without episode resets.
    pub fn step(&self, obs: &[S], h: &[S], batch: usize) -> StepOutput<S> {
        let mut cache = Cache::default();
        self.forward(obs, h, &vec![false; batch], 1, batch, &mut cache);
        StepOutput { logits: cache.logits, values: cache.values, hidden: cache.hidden }
    }

    /// Accumulates into `g` the gradient of a loss whose derivatives w.r.t.
    /// the logits and values of every row of `cache` are `dlogits`, `dvalues`.
    pub fn backward(&self, obs: &[S], cache: &Cache<S>, dlogits: &[S], dvalues: &[S], g: &mut [S]) {
        let c = &self.config;
        let p = &self.params[..];
        let n = &self.net;
        let rows = cache.rows();
        if rows == 0 {
            return;
        }
        let hd = c.hidden;

        let mut da = vec![S::zero(); rows * c.head_dim];
        let mut dh = vec![S::zero(); rows * hd];
        let mut dh_c = vec![S::zero(); rows * hd];
        n.a2.backward(p, &cache.a1, dlogits, rows, g, Some(&mut da));
        relu_backward(&cache.a1, &mut da);
        n.a1.backward(p, &cache.hidden, &da, rows, g, Some(&mut dh));
        n.c2.backward(p, &cache.c1, dvalues, rows, g, Some(&mut da));
        relu_backward(&cache.c1, &mut da);
        n.c1.backward(p, &cache.hidden, &da, rows, g, Some(&mut dh_c));
        for (a, b) in dh.iter_mut().zip(&dh_c) {
            *a += *b;
        }

        let mut dfc = vec![S::zero(); rows * c.fc_dim];
        match n.trunk {
            TrunkNet::Gru(cell) => {
                cell.backward(p, &cache.fc, &cache.gru, &cache.reset, &dh, cache.steps, cache.batch, g, &mut dfc);
            }
            TrunkNet::Mlp(m1, m2) => {
                for (d, &h) in dh.iter_mut().zip(&cache.hidden) {
                    *d *= S::one() - h * h;
                }
                let mut dm = vec![S::zero(); rows * m1.out];
                m2.backward(p, &cache.mlp, &dh, rows, g, Some(&mut dm));
                relu_backward(&cache.mlp, &mut dm);
                m1.backward(p, &cache.fc, &dm, rows, g, Some(&mut dfc));
            }
        }

        relu_backward(&cache.fc, &mut dfc);
        let e = c.enc_out();
        let mut dln = vec![S::zero(); rows * e];
        n.fc.backward(p, &cache.ln, &dfc, rows, g, Some(&mut dln));
        let denc = if c.normalise {
            let mut denc = vec![S::zero(); rows * e];
            layer_norm_backward(&cache.ln, &cache.inv_sigma, &dln, rows, e, &mut denc);
            denc
        } else {
            dln
        };

        match n.enc {
            EncoderNet::Affine(l) => {
                let mut denc = denc;
                relu_backward(&cache.enc, &mut denc);
                l.backward_sparse(obs, &denc, rows, g);
            }
            EncoderNet::Conv(k1, k2) => {
                let gl = k2.out_len();
                let mut d2 = vec![S::zero(); rows * gl];
                for r in 0..rows {
                    d2[r * gl..(r + 1) * gl].copy_from_slice(&denc[r * e..r * e + gl]);
                }
                relu_backward(&cache.act2, &mut d2);
                let mut d1 = vec![S::zero(); rows * k1.out_len()];
                k2.backward_cols(p, &cache.cols2, &d2, rows, g, Some((&mut d1, k1.out_len())));
                relu_backward(&cache.act1, &mut d1);
                k1.backward_cols(p, &cache.cols1, &d1, rows, g, None);
            }
        }
    }
}
