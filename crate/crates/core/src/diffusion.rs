//! Noise schedules, perturbation kernels and the discrete forward chain.
//!
//! Four processes share one parametrization. The full-space variants diffuse
//! every Fourier mode; the HFS variants diffuse only the modes outside the
//! low-frequency band `M_l` and leave the band untouched. On the diffused
//! subspace the kernel is `N(a(t)·x0, v(t)·I)` with
//!
//! | variant        | `a(t)`    | `v(t)`                 |
//! |----------------|-----------|------------------------|
//! | VP, HFS-VP     | `e^{k(t)}`| `1 − e^{2k(t)}`        |
//! | VE, HFS-VE     | `1`       | `σ²(t) − σ²(0)`        |
//!
//! where `k(t) = −¼t²(β̄_max − β̄_min) − ½tβ̄_min` and
//! `σ(t) = σ_min (σ_max/σ_min)^t`. For the HFS variants the mean is
//! `x0 + (a − 1)·F_h x0` and the covariance `v·F_h`, which follows from
//! diagonalizing the forward SDE `dx = −½β F_h x dt + √β F_h dw` (or
//! `dx = √(dσ²/dt) F_h dw`) in the Fourier basis, where `F_h` is a
//! coordinate projection.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{apply_fh, fft2_centered, ifft2_centered, Axis, ComplexField, Domain, FrequencyMask, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "vp")]
    Vp,
    #[serde(rename = "ve")]
    Ve,
    #[serde(rename = "hfs-vp")]
    HfsVp,
    #[serde(rename = "hfs-ve")]
    HfsVe,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Vp, Variant::Ve, Variant::HfsVp, Variant::HfsVe];

    pub fn is_hfs(self) -> bool {
        matches!(self, Variant::HfsVp | Variant::HfsVe)
    }

    /// Variance-preserving family (attenuating mean).
    pub fn is_vp(self) -> bool {
        matches!(self, Variant::Vp | Variant::HfsVp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vp => "vp",
            Variant::Ve => "ve",
            Variant::HfsVp => "hfs-vp",
            Variant::HfsVe => "hfs-ve",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "vp" => Ok(Variant::Vp),
            "ve" => Ok(Variant::Ve),
            "hfs-vp" => Ok(Variant::HfsVp),
            "hfs-ve" => Ok(Variant::HfsVe),
            other => Err(Error::Parameter(format!("unknown variant '{other}'"))),
        }
    }
}

/// Continuous-time noise schedule plus the training discretization `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { beta_min: 0.1, beta_max: 20.0, sigma_min: 0.1, sigma_max: 348.0, n: 1000 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max && self.beta_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < beta_min < beta_max, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.n == 0 {
            return Err(Error::Parameter("N must be at least 1".into()));
        }
        Ok(())
    }

    /// `β(t) = β̄_min + t(β̄_max − β̄_min)`
    #[inline]
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `k(t) = −½∫₀ᵗ β(s) ds`, the log of the VP mean coefficient.
    #[inline]
    pub fn log_mean_coeff(&self, t: f64) -> f64 {
        -0.25 * t * t * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min
    }

    /// `σ(t) = σ_min (σ_max/σ_min)^t`
    #[inline]
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma_min * (self.sigma_max / self.sigma_min).powf(t)
    }

    /// Discrete `β_i = β(i/n)/n` for a chain of `n` steps.
    #[inline]
    pub fn beta_discrete(&self, i: usize, n: usize) -> f64 {
        self.beta(i as f64 / n as f64) / n as f64
    }

    /// `α_i = 1 − β_i`.
    #[inline]
    pub fn alpha_discrete(&self, i: usize, n: usize) -> f64 {
        1.0 - self.beta_discrete(i, n)
    }

    /// VE increment `σ²(i/n) − σ²((i−1)/n)`.
    #[inline]
    pub fn sigma2_increment(&self, i: usize, n: usize) -> f64 {
        let hi = self.sigma(i as f64 / n as f64);
        let lo = self.sigma((i - 1) as f64 / n as f64);
        hi * hi - lo * lo
    }
}

/// A diffusion process: variant, schedule and (for HFS variants) the width
/// and axis of the undiffused low-frequency band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub variant: Variant,
    #[serde(flatten)]
    pub schedule: Schedule,
    pub n_l: usize,
    #[serde(default)]
    pub axis: Axis,
}

impl DiffusionSpec {
    pub fn new(variant: Variant, n_l: usize) -> Self {
        Self { variant, schedule: Schedule::default(), n_l, axis: Axis::Rows }
    }

    /// The projector mask seen by this process on a grid of `shape`.
    /// Full-space variants ignore `n_l` and get an empty band, so `F_h` is
    /// the identity for them.
    pub fn freq_mask(&self, shape: (usize, usize)) -> Result<FrequencyMask> {
        let n_l = if self.variant.is_hfs() { self.n_l } else { 0 };
        FrequencyMask::new(n_l, self.axis, shape)
    }
}

/// Kernel coefficients on the diffused subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelCoeffs {
    /// Mean coefficient `a(t)`.
    pub a: f64,
    /// Variance `v(t)` per real/imaginary component.
    pub v: f64,
    pub variant: Variant,
}

pub fn kernel_coeffs(spec: &DiffusionSpec, t: f64) -> Result<KernelCoeffs> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("t = {t} outside [0, 1]")));
    }
    let s = &spec.schedule;
    let (a, v) = if spec.variant.is_vp() {
        let k = s.log_mean_coeff(t);
        (k.exp(), -(2.0 * k).exp_m1())
    } else {
        let (sig, sig0) = (s.sigma(t), s.sigma_min);
        (1.0, sig * sig - sig0 * sig0)
    };
    Ok(KernelCoeffs { a, v, variant: spec.variant })
}

/// Samples `x(t)` given `x(0)` from the perturbation kernel.
pub fn perturb(x0: &ComplexField, t: f64, spec: &DiffusionSpec, rng: &mut RngStream) -> Result<ComplexField> {
    let z = rng.normal_field(x0.rows(), x0.cols(), Domain::Image);
    perturb_with_noise(x0, t, spec, &z)
}

/// [`perturb`] with an explicit standard-normal draw `z`.
pub fn perturb_with_noise(x0: &ComplexField, t: f64, spec: &DiffusionSpec, z: &ComplexField) -> Result<ComplexField> {
    if x0.domain() != Domain::Image {
        return Err(Error::Domain { expected: "image", found: x0.domain().name() });
    }
    z.require_shape(x0.shape())?;
    let kc = kernel_coeffs(spec, t)?;
    let m = spec.freq_mask(x0.shape())?;
    if spec.variant.is_hfs() {
        let mut out = x0.clone();
        out.axpy(kc.a - 1.0, &apply_fh(x0, &m)?);
        out.axpy(kc.v.sqrt(), &apply_fh(z, &m)?);
        Ok(out)
    } else {
        let mut out = x0.scaled(kc.a);
        out.axpy(kc.v.sqrt(), z);
        Ok(out)
    }
}

/// Runs the discrete forward chain
/// `x_i = F_l x_{i−1} + c_i F_h x_{i−1} + d_i F_h z_{i−1}` for `i = 1..=steps`,
/// with `c_i = √(1 − β_i)`, `d_i = √β_i` for the VP family and `c_i = 1`,
/// `d_i = √(σ²_i − σ²_{i−1})` for the VE family, using the schedule's `N`.
///
/// Iterates in the Fourier basis, where `F_h` is diagonal, and draws the
/// noise there directly: a unitary image of i.i.d. complex normals is again
/// i.i.d. complex normal, so the law is the same as drawing in the image
/// domain and projecting.
pub fn forward_chain(
    x0: &ComplexField,
    spec: &DiffusionSpec,
    steps: usize,
    rng: &mut RngStream,
) -> Result<ComplexField> {
    spec.schedule.validate()?;
    let n = spec.schedule.n;
    if steps > n {
        return Err(Error::Range(format!("{steps} steps exceed N = {n}")));
    }
    let coeffs: Vec<(f64, f64)> = (1..=steps)
        .map(|i| {
            if spec.variant.is_vp() {
                let b = spec.schedule.beta_discrete(i, n);
                ((1.0 - b).sqrt(), b.sqrt())
            } else {
                (1.0, spec.schedule.sigma2_increment(i, n).sqrt())
            }
        })
        .collect();
    let m = spec.freq_mask(x0.shape())?;
    run_chain(x0, &m, &coeffs, rng)
}

/// VP-family chain driven by an explicit sequence `β_1, …, β_n`.
pub fn forward_chain_with_betas(
    x0: &ComplexField,
    m: &FrequencyMask,
    betas: &[f64],
    rng: &mut RngStream,
) -> Result<ComplexField> {
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::Parameter(format!("beta {b} outside [0, 1]")));
    }
    let coeffs: Vec<(f64, f64)> = betas.iter().map(|&b| ((1.0 - b).sqrt(), b.sqrt())).collect();
    run_chain(x0, m, &coeffs, rng)
}

fn run_chain(x0: &ComplexField, m: &FrequencyMask, coeffs: &[(f64, f64)], rng: &mut RngStream) -> Result<ComplexField> {
    x0.require_shape(m.shape())?;
    if m.is_full() || coeffs.is_empty() {
        return Ok(x0.clone());
    }
    let mut k = fft2_centered(x0)?;
    let cols = k.cols();
    let high: Vec<usize> = (0..k.len()).filter(|&p| !m.is_low(p / cols, p % cols)).collect();
    let data = k.data_mut();
    let mut buf: Vec<Complex64> = high.iter().map(|&p| data[p]).collect();
    for &(c, d) in coeffs {
        for v in buf.iter_mut() {
            *v = *v * c + rng.complex_normal() * d;
        }
    }
    for (&p, v) in high.iter().zip(buf) {
        data[p] = v;
    }
    ifft2_centered(&k)
}
