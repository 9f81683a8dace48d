//! A two-layer convolutional noise predictor with hand-written backprop.
//!
//! Input channels are `(Re x, Im x, t)` with `x` divided by `√(a(t)² + v(t))`
//! (a no-op for the VP family); a `k×k` convolution to `hidden` channels,
//! `tanh`, and a `k×k` convolution to `(Re, Im)`. Both convolutions use zero
//! padding and keep the grid size. The network predicts `F_h z`; the deployed
//! score is `−F_h(net(x, t))/√v(t)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::diffusion::{kernel_coeffs, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{apply_fh, ComplexField, Domain, FrequencyMask, RngStream};

/// Smallest time fed to the network; keeps `v(t) > 0`.
pub const TIME_FLOOR: f64 = 1e-3;

const IN_CHANNELS: usize = 3;
const OUT_CHANNELS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    pub kernel: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { hidden: 32, kernel: 3 }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Parameter(format!("need hidden ≥ 1 and an odd kernel, got {self:?}")));
        }
        Ok(())
    }

    fn w1_len(&self) -> usize {
        self.hidden * IN_CHANNELS * self.kernel * self.kernel
    }

    fn w2_len(&self) -> usize {
        OUT_CHANNELS * self.hidden * self.kernel * self.kernel
    }

    /// Named parameter blocks in storage order: `(name, shape)`.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let k = self.kernel;
        vec![
            ("conv1.weight", vec![self.hidden, IN_CHANNELS, k, k]),
            ("conv1.bias", vec![self.hidden]),
            ("conv2.weight", vec![OUT_CHANNELS, self.hidden, k, k]),
            ("conv2.bias", vec![OUT_CHANNELS]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.w1_len() + self.hidden + self.w2_len() + OUT_CHANNELS
    }

    /// Offsets of the four blocks.
    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.w1_len();
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.w2_len();
        [w1, b1, w2, b2]
    }
}

/// Which parameter copy to evaluate with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    Raw,
    Ema,
}

#[derive(Clone, Debug)]
pub struct DenoiserNet {
    pub arch: Architecture,
    pub spec: DiffusionSpec,
    pub params: Vec<f64>,
    pub ema: Vec<f64>,
    pub ema_rate: f64,
    pub seed: u64,
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

/// `out[o] = b[o] + Σ_i w[o][i] ⋆ in[i]`, zero padded.
#[allow(clippy::too_many_arguments)]
fn conv_forward(
    input: &[f64],
    cin: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let plane = rows * cols;
    let pad = k / 2;
    let mut out = vec![0.0; cout * plane];
    for o in 0..cout {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = b[o]);
        for i in 0..cin {
            let src = &input[i * plane..(i + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[((o * cin + i) * k + ky) * k + kx];
                    let (y0, y1) = valid(ky, pad, rows);
                    let (x0, x1) = valid(kx, pad, cols);
                    for y in y0..y1 {
                        let sy = y + ky - pad;
                        let d = &mut dst[y * cols + x0..y * cols + x1];
                        let s = &src[sy * cols + x0 + kx - pad..sy * cols + x1 + kx - pad];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates `dW`, `db` and (optionally) `d input` for [`conv_forward`].
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    cin: usize,
    w: &[f64],
    dout: &[f64],
    cout: usize,
    k: usize,
    rows: usize,
    cols: usize,
    dw: &mut [f64],
    db: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let plane = rows * cols;
    let pad = k / 2;
    for o in 0..cout {
        let g = &dout[o * plane..(o + 1) * plane];
        db[o] += g.iter().sum::<f64>();
        for i in 0..cin {
            let src = &input[i * plane..(i + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let widx = ((o * cin + i) * k + ky) * k + kx;
                    let (y0, y1) = valid(ky, pad, rows);
                    let (x0, x1) = valid(kx, pad, cols);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - pad;
                        let gr = &g[y * cols + x0..y * cols + x1];
                        let sr = &src[sy * cols + x0 + kx - pad..sy * cols + x1 + kx - pad];
                        acc += gr.iter().zip(sr).map(|(a, b)| a * b).sum::<f64>();
                    }
                    dw[widx] += acc;
                    if let Some(din) = din.as_deref_mut() {
                        let wv = w[widx];
                        let dsrc = &mut din[i * plane..(i + 1) * plane];
                        for y in y0..y1 {
                            let sy = y + ky - pad;
                            let gr = &g[y * cols + x0..y * cols + x1];
                            let dr = &mut dsrc[sy * cols + x0 + kx - pad..sy * cols + x1 + kx - pad];
                            for (dv, gv) in dr.iter_mut().zip(gr) {
                                *dv += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output rows (or columns) for which tap `kk` reads inside the grid.
#[inline]
fn valid(kk: usize, pad: usize, n: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kk);
    let hi = (n + pad).saturating_sub(kk).min(n);
    (lo, hi.max(lo))
}

impl DenoiserNet {
    /// Fresh network with scaled-normal weights and zero biases. The EMA copy
    /// starts equal to the raw parameters.
    pub fn new(arch: Architecture, spec: DiffusionSpec, ema_rate: f64, seed: u64) -> Result<Self> {
        arch.validate()?;
        if !(0.0..=1.0).contains(&ema_rate) {
            return Err(Error::Parameter(format!("ema_rate {ema_rate} outside [0, 1]")));
        }
        let mut rng = RngStream::new(seed, 1);
        let [_, b1, w2, b2] = arch.offsets();
        let mut params = vec![0.0; arch.param_count()];
        let k2 = (arch.kernel * arch.kernel) as f64;
        let s1 = 1.0 / (IN_CHANNELS as f64 * k2).sqrt();
        let s2 = 1.0 / (arch.hidden as f64 * k2).sqrt();
        params[..b1].iter_mut().for_each(|p| *p = s1 * rng.normal());
        params[w2..b2].iter_mut().for_each(|p| *p = s2 * rng.normal());
        Ok(Self { arch, spec, ema: params.clone(), params, ema_rate, seed })
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    pub fn weights(&self, which: Weights) -> &[f64] {
        match which {
            Weights::Raw => &self.params,
            Weights::Ema => &self.ema,
        }
    }

    /// `θ̄ ← rate·θ̄ + (1 − rate)·θ`
    pub fn update_ema(&mut self) {
        let r = self.ema_rate;
        for (e, p) in self.ema.iter_mut().zip(&self.params) {
            *e = r * *e + (1.0 - r) * p;
        }
    }

    fn input(&self, x: &ComplexField, t: f64) -> Result<Vec<f64>> {
        if x.domain() != Domain::Image {
            return Err(Error::Domain { expected: "image", found: x.domain().name() });
        }
        let kc = kernel_coeffs(&self.spec, t)?;
        let s = 1.0 / (kc.a * kc.a + kc.v).sqrt();
        let n = x.len();
        let mut input = vec![t; IN_CHANNELS * n];
        for (p, v) in x.data().iter().enumerate() {
            input[p] = v.re * s;
            input[n + p] = v.im * s;
        }
        Ok(input)
    }

    /// Raw network output as a complex field (not yet projected), plus the
    /// activations needed for backprop. `t` is used as given.
    pub(crate) fn forward_with(&self, w: &[f64], x: &ComplexField, t: f64) -> Result<(ComplexField, Cache)> {
        let (rows, cols) = x.shape();
        let [w1, b1, w2, b2] = self.arch.offsets();
        let (h, k) = (self.arch.hidden, self.arch.kernel);
        let input = self.input(x, t)?;
        let mut hidden = conv_forward(&input, IN_CHANNELS, &w[w1..b1], &w[b1..w2], h, k, rows, cols);
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        let out = conv_forward(&hidden, h, &w[w2..b2], &w[b2..], OUT_CHANNELS, k, rows, cols);
        let n = rows * cols;
        let data = (0..n).map(|p| Complex64::new(out[p], out[n + p])).collect();
        let field = ComplexField::from_parts(rows, cols, data, Domain::Image);
        Ok((field, Cache { input, hidden }))
    }

    /// Gradient of a loss with respect to every parameter, given
    /// `∂L/∂out` as a complex field (real part ↔ channel 0).
    pub(crate) fn backward_with(&self, w: &[f64], cache: &Cache, dout: &ComplexField, grad: &mut [f64]) {
        let (rows, cols) = dout.shape();
        let n = rows * cols;
        let [w1, b1, w2, b2] = self.arch.offsets();
        let (h, k) = (self.arch.hidden, self.arch.kernel);
        let mut g_out = vec![0.0; OUT_CHANNELS * n];
        for (p, v) in dout.data().iter().enumerate() {
            g_out[p] = v.re;
            g_out[n + p] = v.im;
        }
        let mut g_hidden = vec![0.0; h * n];
        {
            let (head, tail) = grad.split_at_mut(b2);
            conv_backward(
                &cache.hidden,
                h,
                &w[w2..b2],
                &g_out,
                OUT_CHANNELS,
                k,
                rows,
                cols,
                &mut head[w2..b2],
                &mut tail[..OUT_CHANNELS],
                Some(&mut g_hidden),
            );
        }
        for (g, a) in g_hidden.iter_mut().zip(&cache.hidden) {
            *g *= 1.0 - a * a;
        }
        let (head, tail) = grad.split_at_mut(b1);
        conv_backward(
            &cache.input,
            IN_CHANNELS,
            &w[w1..b1],
            &g_hidden,
            h,
            k,
            rows,
            cols,
            &mut head[w1..b1],
            &mut tail[..h],
            None,
        );
    }

    /// Loss `‖F_h z − F_h net(x_t, t)‖²` of one sample and its gradient
    /// (accumulated into `grad`), for explicit weights `w`.
    pub fn loss_grad(
        &self,
        w: &[f64],
        x_t: &ComplexField,
        t: f64,
        target: &ComplexField,
        m: &FrequencyMask,
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let (out, cache) = self.forward_with(w, x_t, t)?;
        let r = target.sub(&apply_fh(&out, m)?);
        let loss = r.norm_sqr();
        if let Some(grad) = grad {
            let dout = apply_fh(&r, m)?.scaled(-2.0);
            self.backward_with(w, &cache, &dout, grad);
        }
        Ok(loss)
    }

    /// `F_h net(x, t)` with the time clamped to [`TIME_FLOOR`].
    pub fn predict_noise(&self, x: &ComplexField, t: f64, which: Weights) -> Result<ComplexField> {
        let t = t.max(TIME_FLOOR);
        let m = self.spec.freq_mask(x.shape())?;
        let (out, _) = self.forward_with(self.weights(which), x, t)?;
        apply_fh(&out, &m)
    }
}

impl ScoreModel for DenoiserNet {
    /// `−F_h net(x, t)/√v(t)` using the EMA parameters.
    fn score(&self, x: &ComplexField, t: f64) -> Result<ComplexField> {
        let t = t.max(TIME_FLOOR);
        let v = kernel_coeffs(&self.spec, t)?.v;
        let eps = self.predict_noise(x, t, Weights::Ema)?;
        Ok(eps.scaled(-1.0 / v.sqrt()))
    }
}
