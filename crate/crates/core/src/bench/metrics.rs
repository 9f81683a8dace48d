use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Returned by [`psnr`] when the estimate matches the reference exactly.
pub const PSNR_CAP: f64 = 300.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

fn check_pair(x: &ComplexField, reference: &ComplexField) -> Result<()> {
    if x.shape() != reference.shape() {
        return Err(Error::Dimension(format!(
            "estimate {:?} and reference {:?} differ in shape",
            x.shape(),
            reference.shape()
        )));
    }
    if reference.norm_sqr() == 0.0 {
        return Err(Error::Metric("reference is all zero".into()));
    }
    Ok(())
}

/// `‖x − ref‖² / ‖ref‖²` on the complex samples.
pub fn nmse(x: &ComplexField, reference: &ComplexField) -> Result<f64> {
    check_pair(x, reference)?;
    Ok(x.distance(reference).powi(2) / reference.norm_sqr())
}

/// Peak SNR of the magnitude images, peak `max|ref|`, capped at [`PSNR_CAP`].
pub fn psnr(x: &ComplexField, reference: &ComplexField) -> Result<f64> {
    check_pair(x, reference)?;
    let a = x.magnitude();
    let b = reference.magnitude();
    let mse = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / a.len() as f64;
    let peak = b.iter().cloned().fold(0.0, f64::max);
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> Vec<f64> {
    let h = (SSIM_WINDOW / 2) as i64;
    let w: Vec<f64> = (-h..=h).map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian filter with reflect padding.
fn blur(img: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let h = (w.len() / 2) as i64;
    let mut tmp = vec![0.0; img.len()];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * img[r * cols + reflect(c as i64 + k as i64 - h, cols as i64)])
                .sum();
        }
    }
    let mut out = vec![0.0; img.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * tmp[reflect(r as i64 + k as i64 - h, rows as i64) * cols + c])
                .sum();
        }
    }
    out
}

/// Gaussian-window SSIM of the magnitude images, averaged over every pixel,
/// with dynamic range `max|ref|`.
pub fn ssim(x: &ComplexField, reference: &ComplexField) -> Result<f64> {
    check_pair(x, reference)?;
    let (rows, cols) = x.shape();
    let a = x.magnitude();
    let b = reference.magnitude();
    let range = b.iter().cloned().fold(0.0, f64::max);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let w = gaussian_window();
    let prod = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = blur(&a, rows, cols, &w);
    let mu_b = blur(&b, rows, cols, &w);
    let e_aa = blur(&prod(&a, &a), rows, cols, &w);
    let e_bb = blur(&prod(&b, &b), rows, cols, &w);
    let e_ab = blur(&prod(&a, &b), rows, cols, &w);
    let total: f64 = (0..a.len())
        .map(|p| {
            let (ma, mb) = (mu_a[p], mu_b[p]);
            let va = e_aa[p] - ma * ma;
            let vb = e_bb[p] - mb * mb;
            let cov = e_ab[p] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / a.len() as f64)
}

pub fn metrics(x: &ComplexField, reference: &ComplexField) -> Result<MetricsReport> {
    Ok(MetricsReport { nmse: nmse(x, reference)?, psnr: psnr(x, reference)?, ssim: ssim(x, reference)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Domain, RngStream};

    fn field(seed: u64) -> ComplexField {
        RngStream::new(seed, 0).normal_field(12, 12, Domain::Image)
    }

    #[test]
    fn identical_inputs() {
        let x = field(1);
        let m = metrics(&x, &x).unwrap();
        assert_eq!(m.nmse, 0.0);
        assert_eq!(m.psnr, PSNR_CAP);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_estimate_has_unit_nmse() {
        let x = field(2);
        let z = ComplexField::zeros(12, 12, Domain::Image);
        assert!((nmse(&z, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let z = ComplexField::zeros(4, 4, Domain::Image);
        assert!(matches!(nmse(&z, &z), Err(Error::Metric(_))));
        assert!(matches!(ssim(&z, &z), Err(Error::Metric(_))));
    }

    #[test]
    fn nmse_is_scale_invariant() {
        let (x, r) = (field(3), field(4));
        let a = nmse(&x, &r).unwrap();
        let b = nmse(&x.scaled(-3.5), &r.scaled(-3.5)).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn psnr_decreases_with_error() {
        let r = field(5);
        let noise = field(6);
        let mut last = f64::INFINITY;
        for s in [0.01, 0.1, 0.5, 1.0] {
            let mut x = r.clone();
            x.axpy(s, &noise);
            let p = psnr(&x, &r).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_is_bounded_above() {
        let (x, r) = (field(7), field(8));
        assert!(ssim(&x, &r).unwrap() <= 1.0);
    }

    #[test]
    fn reflection_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }
}
