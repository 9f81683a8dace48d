//! Frequency-split projectors, the encoding operator and its adjoint.

use num_complex::Complex64;

use super::coil::SOS_TOLERANCE;
use super::{fft2_centered, ifft2_centered, CoilKSpace, CoilSet, ComplexField, Domain, FrequencyMask, SamplingMask};
use crate::error::{Error, Result};

/// Which side of `M_l` to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    High,
    Low,
}

fn check_operand(x: &ComplexField, m: &FrequencyMask) -> Result<()> {
    x.require_domain(Domain::Image)?;
    x.require_shape(m.shape())
}

/// Zeroes every k-space sample outside `band` in place.
pub(crate) fn keep_band(k: &mut ComplexField, m: &FrequencyMask, band: Band) {
    let low = m.low_lines();
    let axis = m.axis();
    let cols = k.cols();
    for (i, v) in k.data_mut().iter_mut().enumerate() {
        let is_low = low.contains(&axis.line_of(i / cols, i % cols));
        if is_low != (band == Band::Low) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

fn project(x: &ComplexField, m: &FrequencyMask, band: Band) -> Result<ComplexField> {
    check_operand(x, m)?;
    // Degenerate masks short-circuit so that n_l = 0 makes F_h the exact
    // identity, not the identity up to FFT round-off.
    let keep_all = match band {
        Band::High => m.is_empty(),
        Band::Low => m.is_full(),
    };
    let keep_none = match band {
        Band::High => m.is_full(),
        Band::Low => m.is_empty(),
    };
    if keep_all {
        return Ok(x.clone());
    }
    if keep_none {
        return Ok(ComplexField::zeros(x.rows(), x.cols(), Domain::Image));
    }
    let mut k = fft2_centered(x)?;
    keep_band(&mut k, m, band);
    ifft2_centered(&k)
}

/// `F_h(x) = F⁻¹((1 − M_l)·F x)`
pub fn apply_fh(x: &ComplexField, m: &FrequencyMask) -> Result<ComplexField> {
    project(x, m, Band::High)
}

/// `F_l(x) = F⁻¹(M_l·F x)`
pub fn apply_fl(x: &ComplexField, m: &FrequencyMask) -> Result<ComplexField> {
    project(x, m, Band::Low)
}

fn check_coils(x: &ComplexField, csm: &CoilSet) -> Result<()> {
    x.require_domain(Domain::Image)?;
    x.require_shape(csm.shape())?;
    let dev = csm.sos_deviation();
    if dev > SOS_TOLERANCE {
        return Err(Error::Validation(format!("coil maps are not SOS-normalized (max deviation {dev:.3e})")));
    }
    Ok(())
}

fn multicoil_project(x: &ComplexField, csm: &CoilSet, m: &FrequencyMask, band: Band) -> Result<ComplexField> {
    check_coils(x, csm)?;
    check_operand(x, m)?;
    let mut acc = ComplexField::zeros(x.rows(), x.cols(), Domain::Image);
    for map in csm.maps() {
        let mut k = fft2_centered(&x.mul(map))?;
        keep_band(&mut k, m, band);
        let back = ifft2_centered(&k)?;
        acc.axpy(1.0, &back.mul_conj(map));
    }
    Ok(acc)
}

/// Coil-weighted high-frequency operator
/// `Σ_j csm_j* · F⁻¹((1 − M_l)·F(csm_j · x))`.
///
/// Together with [`multicoil_fl`] it partitions the identity under SOS
/// normalization, but unlike [`apply_fh`] it is not idempotent unless the
/// coil maps are constant.
pub fn multicoil_fh(x: &ComplexField, csm: &CoilSet, m: &FrequencyMask) -> Result<ComplexField> {
    multicoil_project(x, csm, m, Band::High)
}

/// Coil-weighted low-frequency operator, see [`multicoil_fh`].
pub fn multicoil_fl(x: &ComplexField, csm: &CoilSet, m: &FrequencyMask) -> Result<ComplexField> {
    multicoil_project(x, csm, m, Band::Low)
}

fn apply_sampling(k: &mut ComplexField, mu: &SamplingMask) {
    let cols = k.cols();
    for (i, v) in k.data_mut().iter_mut().enumerate() {
        if !mu.is_sampled(i / cols, i % cols) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Encoding operator `A x = M_u · F(csm_j · x)` for every coil.
pub fn encode(x: &ComplexField, csm: &CoilSet, mu: &SamplingMask) -> Result<CoilKSpace> {
    x.require_domain(Domain::Image)?;
    x.require_shape(csm.shape())?;
    x.require_shape(mu.shape())?;
    let coils = csm
        .maps()
        .iter()
        .map(|map| {
            let mut k = fft2_centered(&x.mul(map))?;
            apply_sampling(&mut k, mu);
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?;
    CoilKSpace::new(coils)
}

/// Adjoint `A^H y = Σ_j csm_j* · F⁻¹(M_u · y_j)`.
pub fn adjoint(y: &CoilKSpace, csm: &CoilSet, mu: &SamplingMask) -> Result<ComplexField> {
    if y.count() != csm.count() {
        return Err(Error::Dimension(format!("{} coils of data for {} sensitivity maps", y.count(), csm.count())));
    }
    let shape = csm.shape();
    if y.shape() != shape || mu.shape() != shape {
        return Err(Error::Dimension(format!(
            "data {:?}, maps {:?} and mask {:?} disagree",
            y.shape(),
            shape,
            mu.shape()
        )));
    }
    let mut acc = ComplexField::zeros(shape.0, shape.1, Domain::Image);
    for (yj, map) in y.coils().iter().zip(csm.maps()) {
        let mut k = yj.clone();
        apply_sampling(&mut k, mu);
        acc.axpy(1.0, &ifft2_centered(&k)?.mul_conj(map));
    }
    Ok(acc)
}

/// Closed form of the operator exponential `e^{k F_h} = (e^k − 1)·F_h + I`,
/// valid because `F_h` is idempotent: the low band passes through and the
/// high band is scaled by `e^k`.
pub fn exp_fh(k: f64, x: &ComplexField, m: &FrequencyMask) -> Result<ComplexField> {
    if !k.is_finite() {
        return Err(Error::Parameter(format!("exponent {k} is not finite")));
    }
    let high = apply_fh(x, m)?;
    let mut out = x.clone();
    out.axpy(k.exp_m1(), &high);
    Ok(out)
}
