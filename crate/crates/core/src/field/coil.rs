use num_complex::Complex64;

use super::{ComplexField, Domain};
use crate::error::{Error, Result};

/// Tolerance on `Σ_j |csm_j|² = 1` accepted by [`CoilSet::new`].
pub const SOS_TOLERANCE: f64 = 1e-6;

/// Coil sensitivity maps, sum-of-squares normalized at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilSet {
    maps: Vec<ComplexField>,
}

impl CoilSet {
    /// Validates shape agreement, image domain and SOS normalization.
    pub fn new(maps: Vec<ComplexField>) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::Parameter("coil set needs at least one map".into()))?;
        let shape = first.shape();
        for m in &maps {
            m.require_shape(shape)?;
            m.require_domain(Domain::Image)?;
            m.ensure_finite()?;
        }
        let set = Self { maps };
        let dev = set.sos_deviation();
        if dev > SOS_TOLERANCE {
            return Err(Error::Validation(format!("coil maps are not SOS-normalized (max deviation {dev:.3e})")));
        }
        Ok(set)
    }

    /// Normalizes arbitrary non-vanishing profiles to unit sum-of-squares.
    pub fn normalized(mut maps: Vec<ComplexField>) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::Parameter("coil set needs at least one map".into()))?;
        let (rows, cols) = first.shape();
        for m in &maps {
            m.require_shape((rows, cols))?;
        }
        for p in 0..rows * cols {
            let sos: f64 = maps.iter().map(|m| m.data()[p].norm_sqr()).sum::<f64>().sqrt();
            if sos == 0.0 || !sos.is_finite() {
                return Err(Error::Validation(format!("coil profiles vanish at pixel {p}")));
            }
            for m in maps.iter_mut() {
                m.data_mut()[p] /= sos;
            }
        }
        Self::new(maps)
    }

    /// One coil of constant sensitivity 1.
    pub fn unit(rows: usize, cols: usize) -> Self {
        Self { maps: vec![ComplexField::constant(rows, cols, Complex64::new(1.0, 0.0), Domain::Image)] }
    }

    pub fn maps(&self) -> &[ComplexField] {
        &self.maps
    }

    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }

    /// Largest `|Σ_j |csm_j|² − 1|` over pixels.
    pub fn sos_deviation(&self) -> f64 {
        let n = self.maps[0].len();
        (0..n)
            .map(|p| {
                let s: f64 = self.maps.iter().map(|m| m.data()[p].norm_sqr()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Per-coil k-space data, one field per coil.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilKSpace {
    coils: Vec<ComplexField>,
}

impl CoilKSpace {
    pub fn new(coils: Vec<ComplexField>) -> Result<Self> {
        let first = coils.first().ok_or_else(|| Error::Parameter("k-space data needs at least one coil".into()))?;
        let shape = first.shape();
        for c in &coils {
            c.require_shape(shape)?;
            c.require_domain(Domain::KSpace)?;
        }
        Ok(Self { coils })
    }

    pub fn coils(&self) -> &[ComplexField] {
        &self.coils
    }

    pub fn coils_mut(&mut self) -> &mut [ComplexField] {
        &mut self.coils
    }

    pub fn count(&self) -> usize {
        self.coils.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coils[0].shape()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coils.iter().map(ComplexField::norm_sqr).sum()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coils.iter().zip(&other.coils).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { coils: self.coils.iter().zip(&other.coils).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coils: self.coils.iter().map(|c| c.scaled(s)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { coils: self.coils.iter().zip(&other.coils).map(|(a, b)| a.add(b)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unnormalized_maps_are_rejected() {
        let m = ComplexField::constant(4, 4, Complex64::new(0.9, 0.0), Domain::Image);
        assert!(matches!(CoilSet::new(vec![m]), Err(Error::Validation(_))));
    }

    #[test]
    fn normalization_fixes_sos() {
        let a = ComplexField::from_fn(4, 4, Domain::Image, |r, c| Complex64::new(1.0 + r as f64, c as f64));
        let b = ComplexField::from_fn(4, 4, Domain::Image, |r, _| Complex64::new(0.5, -(r as f64)));
        let set = CoilSet::normalized(vec![a, b]).unwrap();
        assert!(set.sos_deviation() < 1e-14);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = ComplexField::zeros(4, 4, Domain::Image);
        let b = ComplexField::zeros(4, 5, Domain::Image);
        assert!(matches!(CoilSet::normalized(vec![a, b]), Err(Error::Dimension(_))));
    }
}
