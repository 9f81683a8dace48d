use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire, make_csm, make_phantom, make_undersampling_mask, MaskKind, PhantomKind};
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::field::{
    fft2_centered, ifft2_centered, Axis, CoilKSpace, CoilSet, ComplexField, Domain, RngStream, SamplingMask,
};
use crate::sampler::Problem;
use crate::score::{DenoiserNet, GaussianPrior, GaussianScore, ScoreModel};

/// A reconstruction problem with known ground truth and a score model for
/// any diffusion spec it supports.
pub trait Testbed: Sync {
    fn truth(&self) -> &ComplexField;
    fn problem(&self) -> Problem<'_>;
    /// `None` when no model exists for `spec`.
    fn model(&self, spec: &DiffusionSpec) -> Option<Box<dyn ScoreModel + '_>>;
}

/// Parameters of [`GaussianTestbed`]. Widths are in k-space samples from the
/// center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestbedConfig {
    pub rows: usize,
    pub cols: usize,
    pub factor: f64,
    pub acs_lines: usize,
    pub axis: Axis,
    pub coils: usize,
    pub noise_std: f64,
    /// Gaussian low-pass applied to the truth to form the prior mean.
    pub mean_width: f64,
    pub var_scale: f64,
    pub var_width: f64,
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            rows: 16,
            cols: 16,
            factor: 2.0,
            acs_lines: 4,
            axis: Axis::Rows,
            coils: 1,
            noise_std: 0.0,
            mean_width: 3.0,
            var_scale: 0.05,
            var_width: 4.0,
            var_floor: 0.0005,
            seed: 0,
        }
    }
}

impl TestbedConfig {
    /// Larger grid whose ACS block holds every `n_l` up to 32.
    pub fn ablation() -> Self {
        Self { rows: 64, cols: 64, factor: 4.0, acs_lines: 32, mean_width: 8.0, var_width: 12.0, ..Self::default() }
    }
}

/// Shepp–Logan truth observed through an undersampled acquisition, with an
/// independent-mode Gaussian prior centered on a smoothed copy of the truth.
/// The analytic prior score makes the exact posterior available.
#[derive(Clone, Debug)]
pub struct GaussianTestbed {
    pub config: TestbedConfig,
    pub truth: ComplexField,
    pub prior: GaussianPrior,
    pub csm: CoilSet,
    pub mask: SamplingMask,
    pub y: CoilKSpace,
}

fn radius2(r: usize, c: usize, rows: usize, cols: usize) -> f64 {
    let dr = r as f64 - (rows / 2) as f64;
    let dc = c as f64 - (cols / 2) as f64;
    dr * dr + dc * dc
}

impl GaussianTestbed {
    pub fn new(config: TestbedConfig) -> Result<Self> {
        let (rows, cols) = (config.rows, config.cols);
        let mut rng = RngStream::new(config.seed, 0);
        let truth = make_phantom(PhantomKind::SheppLogan, rows, cols, &mut rng)?.image;
        let kt = fft2_centered(&truth)?;
        let mut means = Vec::with_capacity(rows * cols);
        let mut vars = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let d2 = radius2(r, c, rows, cols);
                means.push(kt.get(r, c) * (-d2 / (2.0 * config.mean_width.powi(2))).exp());
                vars.push(config.var_scale * (-d2 / (2.0 * config.var_width.powi(2))).exp() + config.var_floor);
            }
        }
        let prior = GaussianPrior::new(rows, cols, means, vars)?;
        let csm = make_csm(config.coils, rows, cols)?;
        let mask = make_undersampling_mask(
            MaskKind::Uniform,
            config.factor,
            config.acs_lines,
            config.axis,
            (rows, cols),
            &mut rng,
        )?;
        let y = acquire(&truth, &csm, &mask, config.noise_std, &mut rng.substream(1))?;
        Ok(Self { config, truth, prior, csm, mask, y })
    }

    /// Exact posterior mean `E[x | y]`. Single coil only, where the modes
    /// decouple.
    pub fn posterior_mean(&self) -> Result<ComplexField> {
        if self.csm.count() != 1 {
            return Err(Error::Parameter("closed-form posterior needs a single coil".into()));
        }
        let (rows, cols) = self.prior.shape();
        let s2 = self.config.noise_std.powi(2);
        let y = &self.y.coils()[0];
        let data: Vec<Complex64> = (0..rows * cols)
            .map(|p| {
                let (r, c) = (p / cols, p % cols);
                let m = self.prior.means()[p];
                if self.mask.is_sampled(r, c) {
                    let v = self.prior.vars()[p];
                    (y.get(r, c) * v + m * s2) / (v + s2)
                } else {
                    m
                }
            })
            .collect();
        ifft2_centered(&ComplexField::from_vec(rows, cols, data, Domain::KSpace)?)
    }
}

impl Testbed for GaussianTestbed {
    fn truth(&self) -> &ComplexField {
        &self.truth
    }

    fn problem(&self) -> Problem<'_> {
        Problem { y: &self.y, csm: &self.csm, mu: &self.mask }
    }

    fn model(&self, spec: &DiffusionSpec) -> Option<Box<dyn ScoreModel + '_>> {
        Some(Box::new(GaussianScore::new(self.prior.clone(), *spec)))
    }
}

/// A fixed acquisition paired with trained denoisers, one per diffusion
/// spec they were trained for.
pub struct TrainedTestbed {
    pub truth: ComplexField,
    pub csm: CoilSet,
    pub mask: SamplingMask,
    pub y: CoilKSpace,
    pub models: Vec<DenoiserNet>,
}

impl Testbed for TrainedTestbed {
    fn truth(&self) -> &ComplexField {
        &self.truth
    }

    fn problem(&self) -> Problem<'_> {
        Problem { y: &self.y, csm: &self.csm, mu: &self.mask }
    }

    /// Matches on variant and `n_l`; the schedule may differ only in `N`.
    fn model(&self, spec: &DiffusionSpec) -> Option<Box<dyn ScoreModel + '_>> {
        self.models
            .iter()
            .find(|m| {
                let s = &m.spec;
                s.variant == spec.variant
                    && s.n_l == spec.n_l
                    && s.axis == spec.axis
                    && s.schedule.beta_min == spec.schedule.beta_min
                    && s.schedule.beta_max == spec.schedule.beta_max
                    && s.schedule.sigma_min == spec.schedule.sigma_min
                    && s.schedule.sigma_max == spec.schedule.sigma_max
            })
            .map(|m| Box::new(m.clone()) as Box<dyn ScoreModel + '_>)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_posterior_matches_data_and_prior() {
        let tb = GaussianTestbed::new(TestbedConfig::default()).unwrap();
        let k = fft2_centered(&tb.posterior_mean().unwrap()).unwrap();
        let y = &tb.y.coils()[0];
        for r in 0..16 {
            for c in 0..16 {
                let want = if tb.mask.is_sampled(r, c) { y.get(r, c) } else { tb.prior.means()[r * 16 + c] };
                assert!((k.get(r, c) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn multicoil_posterior_is_refused() {
        let tb = GaussianTestbed::new(TestbedConfig { coils: 2, ..Default::default() }).unwrap();
        assert!(tb.posterior_mean().is_err());
    }
}
