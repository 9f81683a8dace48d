//! Complex 2D fields and the Fourier-domain machinery built on them.
//!
//! A [`ComplexField`] is a row-major `rows × cols` grid of `Complex64`
//! tagged with the domain it lives in. Image-domain fields become k-space
//! fields only through [`fft2_centered`] and come back through
//! [`ifft2_centered`]; every other operation preserves the tag.

mod cfl;
mod coil;
mod fft;
mod mask;
mod ops;
mod rng;

pub use cfl::{read_cfl, read_cfl_raw, write_cfl, write_cfl_raw, CflArray};
pub use coil::{CoilKSpace, CoilSet};
pub use fft::{fft2_centered, ifft2_centered};
pub use mask::{Axis, FrequencyMask, SamplingMask};
pub(crate) use ops::keep_band;
pub use ops::{adjoint, apply_fh, apply_fl, encode, exp_fh, multicoil_fh, multicoil_fl, Band};
pub use rng::RngStream;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which domain a field's samples belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Image,
    KSpace,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Image => "image",
            Domain::KSpace => "kspace",
        }
    }
}

/// Row-major complex grid with a domain tag.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    domain: Domain,
}

impl ComplexField {
    /// All-zero field. Panics on an empty shape; use [`ComplexField::from_vec`]
    /// for validated construction from untrusted input.
    pub fn zeros(rows: usize, cols: usize, domain: Domain) -> Self {
        assert!(rows > 0 && cols > 0, "field shape must be non-empty");
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols], domain }
    }

    pub fn constant(rows: usize, cols: usize, value: Complex64, domain: Domain) -> Self {
        let mut f = Self::zeros(rows, cols, domain);
        f.data.fill(value);
        f
    }

    /// Builds a field from row-major samples, rejecting empty shapes,
    /// length mismatches and non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} samples for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        let f = Self { rows, cols, data, domain };
        f.ensure_finite()?;
        Ok(f)
    }

    pub fn from_fn(rows: usize, cols: usize, domain: Domain, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(rows, cols, domain);
        for r in 0..rows {
            for c in 0..cols {
                out.data[r * cols + c] = f(r, c);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<Complex64>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data, domain }
    }

    pub(crate) fn require_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::Domain { expected: expected.name(), found: self.domain.name() });
        }
        Ok(())
    }

    pub(crate) fn require_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Dimension(format!(
                "shape mismatch: field is {}x{}, expected {}x{}",
                self.rows, self.cols, shape.0, shape.1
            )));
        }
        Ok(())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            Some(i) => Err(Error::Validation(format!("non-finite sample at ({}, {})", i / self.cols, i % self.cols))),
            None => Ok(()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Squared Euclidean norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Inner product `Σ conj(self)·other`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s·other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b * s);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a *= b);
        out
    }

    /// Elementwise `conj(other)·self`.
    pub fn mul_conj(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a *= b.conj());
        out
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    /// `‖self − other‖₂`
    pub fn distance(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}
