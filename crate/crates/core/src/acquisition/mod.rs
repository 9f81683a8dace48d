//! Simulated acquisitions: phantoms, coil sensitivities, undersampling masks
//! and noisy multicoil k-space, plus an on-disk dataset layout.

mod dataset;
mod phantom;

pub use dataset::{Dataset, DATASET_FILES};
pub use phantom::{complex_std, make_phantom, Phantom, PhantomKind};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{encode, Axis, CoilKSpace, CoilSet, ComplexField, Domain, RngStream, SamplingMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    /// Every `factor`-th line at offset `⌊factor/2⌋`.
    Uniform,
    /// Random lines drawn with a center-peaked Gaussian weight.
    GaussianDensity,
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskKind::Uniform => "uniform",
            MaskKind::GaussianDensity => "gaussian_density",
        })
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(MaskKind::Uniform),
            "gaussian_density" | "gaussian" => Ok(MaskKind::GaussianDensity),
            other => Err(Error::Parameter(format!("unknown mask kind '{other}'"))),
        }
    }
}

/// Everything needed to synthesize one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Per-component standard deviation of the k-space noise.
    pub noise_std: f64,
    pub coils: usize,
    pub mask: MaskKind,
    pub factor: f64,
    pub acs_lines: usize,
    pub axis: Axis,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { noise_std: 0.0, coils: 1, mask: MaskKind::Uniform, factor: 4.0, acs_lines: 4, axis: Axis::Rows, seed: 0 }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Parameter(format!("noise_std must be ≥ 0, got {}", self.noise_std)));
        }
        if !(self.factor >= 1.0 && self.factor.is_finite()) {
            return Err(Error::Parameter(format!("factor must be ≥ 1, got {}", self.factor)));
        }
        if self.coils == 0 {
            return Err(Error::Parameter("at least one coil is required".into()));
        }
        Ok(())
    }
}

/// Smooth Gaussian-lobe sensitivities placed on a ring around the field of
/// view, with a linear phase per coil referenced to coil 0, then normalized
/// to unit sum-of-squares.
pub fn make_csm(n_coils: usize, rows: usize, cols: usize) -> Result<CoilSet> {
    if n_coils == 0 {
        return Err(Error::Parameter("at least one coil is required".into()));
    }
    if n_coils == 1 {
        return Ok(CoilSet::unit(rows, cols));
    }
    let maps = (0..n_coils)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_coils as f64;
            let (cy, cx) = (0.9 * theta.sin(), 0.9 * theta.cos());
            let slope = 0.6 * j as f64 / n_coils as f64;
            ComplexField::from_fn(rows, cols, Domain::Image, |r, c| {
                let x = (2.0 * c as f64 + 1.0) / cols as f64 - 1.0;
                let y = 1.0 - (2.0 * r as f64 + 1.0) / rows as f64;
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                // A small floor keeps far pixels from vanishing before normalization.
                let mag = (-d2 / 1.2).exp() + 1e-3;
                Complex64::from_polar(mag, slope * (x - y))
            })
        })
        .collect();
    CoilSet::normalized(maps)
}

/// Undersampling pattern over the lines of `axis`.
///
/// The ACS block is always included. For [`MaskKind::GaussianDensity`] the
/// total budget is `⌈n/factor⌉` lines (or the ACS size if larger), the rest
/// chosen by weighted reservoir sampling with weights `exp(−d²/(2(n/4)²))`.
pub fn make_undersampling_mask(
    kind: MaskKind,
    factor: f64,
    acs_lines: usize,
    axis: Axis,
    shape: (usize, usize),
    rng: &mut RngStream,
) -> Result<SamplingMask> {
    let n = axis.extent(shape);
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::Parameter(format!("factor must be ≥ 1, got {factor}")));
    }
    if factor > n as f64 {
        return Err(Error::Parameter(format!("factor {factor} exceeds the {n} lines")));
    }
    if acs_lines > n {
        return Err(Error::Parameter(format!("{acs_lines} ACS lines exceed the {n} lines")));
    }
    let acs_start = (n / 2).saturating_sub(acs_lines / 2).min(n - acs_lines);
    let mut sampled: BTreeSet<usize> = (acs_start..acs_start + acs_lines).collect();
    match kind {
        MaskKind::Uniform => {
            let f = factor.round() as usize;
            if (f as f64 - factor).abs() > 1e-12 {
                return Err(Error::Parameter(format!("uniform masks need an integer factor, got {factor}")));
            }
            sampled.extend((0..n).filter(|i| i % f == f / 2));
        }
        MaskKind::GaussianDensity => {
            let budget = ((n as f64 / factor).ceil() as usize).max(sampled.len());
            let want = budget - sampled.len();
            let center = (n / 2) as f64;
            let width = n as f64 / 4.0;
            // A-Res: key u^(1/w), keep the largest keys.
            let mut keyed: Vec<(f64, usize)> = (0..n)
                .filter(|i| !sampled.contains(i))
                .map(|i| {
                    let d = i as f64 - center;
                    let w = (-d * d / (2.0 * width * width)).exp();
                    (rng.uniform().ln() / w, i)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            sampled.extend(keyed.into_iter().take(want).map(|(_, i)| i));
        }
    }
    SamplingMask::new(sampled, factor, acs_lines, axis, shape)
}

/// `y_j = M_u F(csm_j x) + ε_j`, with noise only on sampled entries.
pub fn acquire(
    x: &ComplexField,
    csm: &CoilSet,
    mu: &SamplingMask,
    noise_std: f64,
    rng: &mut RngStream,
) -> Result<CoilKSpace> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Parameter(format!("noise_std must be ≥ 0, got {noise_std}")));
    }
    let mut y = encode(x, csm, mu)?;
    if noise_std > 0.0 {
        for k in y.coils_mut() {
            let cols = k.cols();
            for (i, v) in k.data_mut().iter_mut().enumerate() {
                if mu.is_sampled(i / cols, i % cols) {
                    *v += rng.complex_normal() * noise_std;
                }
            }
        }
    }
    Ok(y)
}
