use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::diffusion::{kernel_coeffs, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{fft2_centered, ifft2_centered, ComplexField, Domain, FrequencyMask, RngStream};

/// Independent Gaussian prior on the centered Fourier modes of an image.
///
/// Mode `k` has mean `m_k` and variance `σ_k²` on each of its real and
/// imaginary parts. Because the transform is unitary, the same law is a
/// Gaussian on the image with covariance `F⁻¹ diag(σ²) F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    rows: usize,
    cols: usize,
    means: Vec<Complex64>,
    vars: Vec<f64>,
}

impl GaussianPrior {
    /// `means` and `vars` are row-major over centered k-space.
    pub fn new(rows: usize, cols: usize, means: Vec<Complex64>, vars: Vec<f64>) -> Result<Self> {
        let n = rows * cols;
        if n == 0 || means.len() != n || vars.len() != n {
            return Err(Error::Dimension(format!(
                "prior of {rows}x{cols} needs {n} means and variances, got {} and {}",
                means.len(),
                vars.len()
            )));
        }
        if let Some(p) = vars.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Parameter(format!("mode {p} has variance {}", vars[p])));
        }
        if means.iter().any(|m| !(m.re.is_finite() && m.im.is_finite())) {
            return Err(Error::Parameter("non-finite prior mean".into()));
        }
        Ok(Self { rows, cols, means, vars })
    }

    /// Prior centered on an image-domain mean.
    pub fn from_image_mean(mean: &ComplexField, vars: Vec<f64>) -> Result<Self> {
        let k = fft2_centered(mean)?;
        Self::new(mean.rows(), mean.cols(), k.into_vec(), vars)
    }

    /// Per-mode sample mean and variance of a training set, with `floor`
    /// added to every variance.
    pub fn fit(samples: &[ComplexField], floor: f64) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Parameter("cannot fit a prior to zero samples".into()))?;
        let (rows, cols) = first.shape();
        let n = samples.len() as f64;
        let ks = samples.iter().map(fft2_centered).collect::<Result<Vec<_>>>()?;
        let mut means = vec![Complex64::new(0.0, 0.0); rows * cols];
        for k in &ks {
            k.require_shape((rows, cols))?;
            for (m, v) in means.iter_mut().zip(k.data()) {
                *m += v / n;
            }
        }
        let mut vars = vec![floor; rows * cols];
        for k in &ks {
            for ((s, v), m) in vars.iter_mut().zip(k.data()).zip(&means) {
                // Per-component variance is half the complex variance.
                *s += (v - m).norm_sqr() / (2.0 * n);
            }
        }
        Self::new(rows, cols, means, vars)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn means(&self) -> &[Complex64] {
        &self.means
    }

    pub fn vars(&self) -> &[f64] {
        &self.vars
    }

    /// Image-domain mean.
    pub fn mean_image(&self) -> ComplexField {
        let k = ComplexField::from_parts(self.rows, self.cols, self.means.clone(), Domain::KSpace);
        ifft2_centered(&k).expect("k-space field")
    }

    /// One image-domain draw.
    pub fn sample(&self, rng: &mut RngStream) -> ComplexField {
        let data = self.means.iter().zip(&self.vars).map(|(m, v)| m + rng.complex_normal() * v.sqrt()).collect();
        let k = ComplexField::from_parts(self.rows, self.cols, data, Domain::KSpace);
        ifft2_centered(&k).expect("k-space field")
    }

    /// Mode-wise marginal `(mean, per-component variance)` of `x(t)` under
    /// `spec`, for Fourier mode `p`.
    fn marginal(&self, p: usize, low: bool, a: f64, v: f64) -> (Complex64, f64) {
        if low {
            (self.means[p], self.vars[p])
        } else {
            (self.means[p] * a, a * a * self.vars[p] + v)
        }
    }

    /// `log p_t(x)` up to the additive normalizing constant.
    pub fn log_density(&self, x: &ComplexField, spec: &DiffusionSpec, t: f64) -> Result<f64> {
        let (k, m, kc) = self.prepare(x, spec, t)?;
        let cols = self.cols;
        Ok(k.data()
            .iter()
            .enumerate()
            .map(|(p, xk)| {
                let (mu, var) = self.marginal(p, m.is_low(p / cols, p % cols), kc.a, kc.v);
                -(xk - mu).norm_sqr() / (2.0 * var)
            })
            .sum())
    }

    fn prepare(
        &self,
        x: &ComplexField,
        spec: &DiffusionSpec,
        t: f64,
    ) -> Result<(ComplexField, FrequencyMask, crate::diffusion::KernelCoeffs)> {
        if x.shape() != self.shape() {
            return Err(Error::Dimension(format!("field {:?} against prior {:?}", x.shape(), self.shape())));
        }
        let kc = kernel_coeffs(spec, t)?;
        let m = spec.freq_mask(x.shape())?;
        Ok((fft2_centered(x)?, m, kc))
    }

    /// Score in k-space; `project` zeroes the low band.
    fn score_kspace(&self, x: &ComplexField, spec: &DiffusionSpec, t: f64, project: bool) -> Result<ComplexField> {
        let (mut k, m, kc) = self.prepare(x, spec, t)?;
        let cols = self.cols;
        for (p, xk) in k.data_mut().iter_mut().enumerate() {
            let low = m.is_low(p / cols, p % cols);
            if low && project {
                *xk = Complex64::new(0.0, 0.0);
                continue;
            }
            let (mu, var) = self.marginal(p, low, kc.a, kc.v);
            if var <= 0.0 {
                return Err(Error::Singularity(format!("zero marginal variance at mode {p}, t = {t}")));
            }
            *xk = -(*xk - mu) / var;
        }
        Ok(k)
    }
}

/// Exact score `∇ₓ log p_t(x)` of the prior pushed through the perturbation
/// kernel of `spec`. For HFS variants the low-band modes are undiffused and
/// return the prior score there, independent of `t`.
pub fn gaussian_score(prior: &GaussianPrior, spec: &DiffusionSpec, x: &ComplexField, t: f64) -> Result<ComplexField> {
    ifft2_centered(&prior.score_kspace(x, spec, t, false)?)
}

/// [`gaussian_score`] packaged as a [`ScoreModel`]. For HFS variants the
/// output is restricted to the high band, like a network trained on the HFS
/// loss.
#[derive(Clone, Debug)]
pub struct GaussianScore {
    pub prior: GaussianPrior,
    pub spec: DiffusionSpec,
}

impl GaussianScore {
    pub fn new(prior: GaussianPrior, spec: DiffusionSpec) -> Self {
        Self { prior, spec }
    }
}

impl ScoreModel for GaussianScore {
    fn score(&self, x: &ComplexField, t: f64) -> Result<ComplexField> {
        ifft2_centered(&self.prior.score_kspace(x, &self.spec, t, self.spec.variant.is_hfs())?)
    }
}
