use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ifft2_centered, Axis, ComplexField, Domain, FrequencyMask, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhantomKind {
    SheppLogan,
    GaussianBlobs,
    /// Band-limited to the `n_l` central lines along `axis`.
    LowfreqOnly {
        n_l: usize,
        axis: Axis,
    },
    /// Large constant-intensity areas.
    FlatRegions,
}

impl PhantomKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::GaussianBlobs => "gaussian_blobs",
            PhantomKind::LowfreqOnly { .. } => "lowfreq_only",
            PhantomKind::FlatRegions => "flat_regions",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    /// `lowfreq_only` takes its band as `lowfreq_only:<n_l>`, rows axis.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        match s.split_once(':') {
            Some(("lowfreq_only", n)) => {
                let n_l = n.parse().map_err(|_| Error::Parameter(format!("bad band width in '{s}'")))?;
                Ok(PhantomKind::LowfreqOnly { n_l, axis: Axis::Rows })
            }
            _ => match s.as_str() {
                "shepp_logan" => Ok(PhantomKind::SheppLogan),
                "gaussian_blobs" => Ok(PhantomKind::GaussianBlobs),
                "flat_regions" => Ok(PhantomKind::FlatRegions),
                "lowfreq_only" => Ok(PhantomKind::LowfreqOnly { n_l: 16, axis: Axis::Rows }),
                _ => Err(Error::Parameter(format!("unknown phantom kind '{s}'"))),
            },
        }
    }
}

/// A test object normalized to unit standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub image: ComplexField,
    pub kind: PhantomKind,
    /// Standard deviation of the raw image before division.
    pub std: f64,
}

/// `sqrt(mean |x − mean x|²)`.
pub fn complex_std(x: &ComplexField) -> f64 {
    let n = x.len() as f64;
    let mean: Complex64 = x.data().iter().sum::<Complex64>() / n;
    (x.data().iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n).sqrt()
}

// Modified Shepp–Logan: (intensity, a, b, x0, y0, phi in degrees).
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Pixel-center coordinates in `[-1, 1]`, `y` pointing up.
fn coords(r: usize, c: usize, rows: usize, cols: usize) -> (f64, f64) {
    let x = (2.0 * c as f64 + 1.0) / cols as f64 - 1.0;
    let y = 1.0 - (2.0 * r as f64 + 1.0) / rows as f64;
    (x, y)
}

fn shepp_logan(rows: usize, cols: usize) -> ComplexField {
    ComplexField::from_fn(rows, cols, Domain::Image, |r, c| {
        let (x, y) = coords(r, c, rows, cols);
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|(_, a, b, x0, y0, phi)| {
                let (s, co) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                (u / a).powi(2) + (w / b).powi(2) <= 1.0
            })
            .map(|e| e.0)
            .sum();
        Complex64::new(v, 0.0)
    })
}

fn gaussian_blobs(rows: usize, cols: usize, rng: &mut RngStream) -> ComplexField {
    let blobs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let x0 = 1.2 * rng.uniform() - 0.6;
            let y0 = 1.2 * rng.uniform() - 0.6;
            let w = 0.1 + 0.25 * rng.uniform();
            let amp = 0.3 + rng.uniform();
            (x0, y0, w, amp)
        })
        .collect();
    let phase_slope = 0.5 * (rng.uniform() - 0.5);
    ComplexField::from_fn(rows, cols, Domain::Image, |r, c| {
        let (x, y) = coords(r, c, rows, cols);
        let mag: f64 =
            blobs.iter().map(|(x0, y0, w, a)| a * (-((x - x0).powi(2) + (y - y0).powi(2)) / (2.0 * w * w)).exp()).sum();
        Complex64::from_polar(mag, phase_slope * (x + y))
    })
}

fn lowfreq_only(rows: usize, cols: usize, n_l: usize, axis: Axis, rng: &mut RngStream) -> Result<ComplexField> {
    let m = FrequencyMask::new(n_l, axis, (rows, cols))?;
    if m.is_empty() {
        return Err(Error::Parameter("a low-frequency phantom needs n_l ≥ 1".into()));
    }
    let mut k = ComplexField::zeros(rows, cols, Domain::KSpace);
    for r in 0..rows {
        for c in 0..cols {
            if m.is_low(r, c) {
                // Decay along the unmasked axis keeps the image smooth.
                let d = match axis {
                    Axis::Rows => c as f64 - (cols / 2) as f64,
                    Axis::Cols => r as f64 - (rows / 2) as f64,
                };
                let scale = (-d * d / 8.0).exp();
                k.set(r, c, rng.complex_normal() * scale);
            }
        }
    }
    ifft2_centered(&k)
}

fn flat_regions(rows: usize, cols: usize) -> ComplexField {
    // Dark background, a large grey slab and a bright disk inside it.
    ComplexField::from_fn(rows, cols, Domain::Image, |r, c| {
        let (x, y) = coords(r, c, rows, cols);
        let v = if x.abs() > 0.8 || y.abs() > 0.8 {
            0.0
        } else if (x - 0.3).powi(2) + (y - 0.3).powi(2) < 0.09 {
            1.0
        } else {
            0.5
        };
        Complex64::new(v, 0.0)
    })
}

/// Builds a phantom of `kind` and divides it by its standard deviation.
pub fn make_phantom(kind: PhantomKind, rows: usize, cols: usize, rng: &mut RngStream) -> Result<Phantom> {
    if rows < 8 || cols < 8 {
        return Err(Error::Dimension(format!("phantoms need at least 8x8, got {rows}x{cols}")));
    }
    let raw = match kind {
        PhantomKind::SheppLogan => shepp_logan(rows, cols),
        PhantomKind::GaussianBlobs => gaussian_blobs(rows, cols, rng),
        PhantomKind::LowfreqOnly { n_l, axis } => lowfreq_only(rows, cols, n_l, axis, rng)?,
        PhantomKind::FlatRegions => flat_regions(rows, cols),
    };
    let std = complex_std(&raw);
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Parameter(format!("{kind} phantom has zero variance at {rows}x{cols}")));
    }
    Ok(Phantom { image: raw.scaled(1.0 / std), kind, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::apply_fh;

    #[test]
    fn every_kind_is_unit_std() {
        let kinds = [
            PhantomKind::SheppLogan,
            PhantomKind::GaussianBlobs,
            PhantomKind::LowfreqOnly { n_l: 4, axis: Axis::Rows },
            PhantomKind::FlatRegions,
        ];
        for kind in kinds {
            let p = make_phantom(kind, 16, 16, &mut RngStream::new(3, 0)).unwrap();
            assert!((complex_std(&p.image) - 1.0).abs() < 1e-10, "{kind}");
        }
    }

    #[test]
    fn lowfreq_phantom_has_no_high_band() {
        let kind = PhantomKind::LowfreqOnly { n_l: 4, axis: Axis::Rows };
        let p = make_phantom(kind, 16, 16, &mut RngStream::new(1, 0)).unwrap();
        let m = FrequencyMask::new(4, Axis::Rows, (16, 16)).unwrap();
        assert!(apply_fh(&p.image, &m).unwrap().norm() <= 1e-12 * p.image.norm());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_phantom(PhantomKind::GaussianBlobs, 12, 10, &mut RngStream::new(8, 0)).unwrap();
        let b = make_phantom(PhantomKind::GaussianBlobs, 12, 10, &mut RngStream::new(8, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parsing_kinds() {
        assert_eq!("shepp-logan".parse::<PhantomKind>().unwrap(), PhantomKind::SheppLogan);
        assert_eq!(
            "lowfreq_only:6".parse::<PhantomKind>().unwrap(),
            PhantomKind::LowfreqOnly { n_l: 6, axis: Axis::Rows }
        );
        assert!(matches!("zebra".parse::<PhantomKind>(), Err(Error::Parameter(_))));
    }

    #[test]
    fn tiny_grids_are_rejected() {
        assert!(make_phantom(PhantomKind::SheppLogan, 4, 16, &mut RngStream::new(0, 0)).is_err());
    }
}
