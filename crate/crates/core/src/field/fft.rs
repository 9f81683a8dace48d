//! Centered, unitary 2D DFT.
//!
//! The DC sample sits at `(⌊rows/2⌋, ⌊cols/2⌋)` and both directions carry a
//! `1/√(rows·cols)` factor, so the transform is an isometry and its adjoint
//! is its inverse. Centering is a cyclic gather before and after the
//! uncentered transform:
//!
//! ```text
//! X[k] = (1/√n) Σ_m x[m] · exp(−2πi (k − c)(m − c) / n),   c = ⌊n/2⌋
//! ```

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{ComplexField, Domain};
use crate::error::Result;

thread_local! {
    // Plans are immutable once built; the planner memoizes them per size.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Image → k-space.
pub fn fft2_centered(x: &ComplexField) -> Result<ComplexField> {
    x.require_domain(Domain::Image)?;
    let data = transform(x.data(), x.rows(), x.cols(), FftDirection::Forward);
    Ok(ComplexField::from_parts(x.rows(), x.cols(), data, Domain::KSpace))
}

/// k-space → image. Exact inverse of [`fft2_centered`].
pub fn ifft2_centered(x: &ComplexField) -> Result<ComplexField> {
    x.require_domain(Domain::KSpace)?;
    let data = transform(x.data(), x.rows(), x.cols(), FftDirection::Inverse);
    Ok(ComplexField::from_parts(x.rows(), x.cols(), data, Domain::Image))
}

fn transform(input: &[Complex64], rows: usize, cols: usize, dir: FftDirection) -> Vec<Complex64> {
    let (row_plan, col_plan) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(cols, dir), p.plan_fft(rows, dir))
    });
    let sr = rows / 2;
    let sc = cols / 2;

    // Pre-rotation: buf[r][c] = x[(r + sr) % rows][(c + sc) % cols].
    // The same cyclic shift appears on both sides for either direction.
    let mut buf = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let src = ((r + sr) % rows) * cols;
        buf.extend_from_slice(&input[src + sc..src + cols]);
        buf.extend_from_slice(&input[src..src + sc]);
    }

    let scratch_len = row_plan.get_inplace_scratch_len().max(col_plan.get_inplace_scratch_len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
    row_plan.process_with_scratch(&mut buf, &mut scratch);

    let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = buf[r * cols + c];
        }
    }
    col_plan.process_with_scratch(&mut t, &mut scratch);

    // Post-rotation (the inverse of the pre-rotation) fused with the transpose.
    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    for k in 0..rows {
        let kr = (k + rows - sr) % rows;
        for l in 0..cols {
            let lc = (l + cols - sc) % cols;
            buf[k * cols + l] = t[lc * rows + kr] * norm;
        }
    }
    buf
}
