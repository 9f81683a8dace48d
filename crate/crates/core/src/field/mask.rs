use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid axis a 1D line mask indexes. `Rows` (axis 0, phase-encode rows) means
/// line `i` is the whole row `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Rows,
    Cols,
}

impl Axis {
    pub fn extent(self, shape: (usize, usize)) -> usize {
        match self {
            Axis::Rows => shape.0,
            Axis::Cols => shape.1,
        }
    }

    /// Line index of grid position `(r, c)`.
    #[inline]
    pub fn line_of(self, r: usize, c: usize) -> usize {
        match self {
            Axis::Rows => r,
            Axis::Cols => c,
        }
    }
}

/// Start of a contiguous block of `width` lines centered at `⌊extent/2⌋`.
pub(crate) fn centered_start(extent: usize, width: usize) -> usize {
    (extent / 2).saturating_sub(width / 2).min(extent - width)
}

/// The low-frequency line mask `M_l`: `n_l` contiguous lines centered on the
/// k-space center are low, all others high.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyMask {
    n_l: usize,
    axis: Axis,
    rows: usize,
    cols: usize,
}

impl FrequencyMask {
    pub fn new(n_l: usize, axis: Axis, shape: (usize, usize)) -> Result<Self> {
        let (rows, cols) = shape;
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
        }
        let extent = axis.extent(shape);
        if n_l > extent {
            return Err(Error::Parameter(format!("n_l = {n_l} exceeds the {extent} lines along {axis:?}")));
        }
        Ok(Self { n_l, axis, rows, cols })
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn extent(&self) -> usize {
        self.axis.extent(self.shape())
    }

    /// Half-open range of low-frequency line indices.
    pub fn low_lines(&self) -> std::ops::Range<usize> {
        let start = centered_start(self.extent(), self.n_l);
        start..start + self.n_l
    }

    #[inline]
    pub fn is_low_line(&self, line: usize) -> bool {
        self.low_lines().contains(&line)
    }

    #[inline]
    pub fn is_low(&self, r: usize, c: usize) -> bool {
        self.is_low_line(self.axis.line_of(r, c))
    }

    /// No low lines: the high-frequency projector is the identity.
    pub fn is_empty(&self) -> bool {
        self.n_l == 0
    }

    /// Every line is low: the high-frequency projector is zero.
    pub fn is_full(&self) -> bool {
        self.n_l == self.extent()
    }

    /// `M_l` as a 0/1 weight per grid position (row-major).
    pub fn weights(&self) -> Vec<f64> {
        let low = self.low_lines();
        let mut w = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                w.push(if low.contains(&self.axis.line_of(r, c)) { 1.0 } else { 0.0 });
            }
        }
        w
    }
}

/// Undersampling pattern `M_u`: a set of fully acquired lines plus the
/// bookkeeping that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMask {
    sampled: BTreeSet<usize>,
    /// Nominal acceleration requested when the mask was generated.
    factor: f64,
    acs_lines: usize,
    axis: Axis,
    rows: usize,
    cols: usize,
}

impl SamplingMask {
    pub fn new(
        sampled: BTreeSet<usize>,
        factor: f64,
        acs_lines: usize,
        axis: Axis,
        shape: (usize, usize),
    ) -> Result<Self> {
        let (rows, cols) = shape;
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
        }
        let extent = axis.extent(shape);
        if sampled.is_empty() {
            return Err(Error::Parameter("sampling mask selects no lines".into()));
        }
        if let Some(&last) = sampled.iter().next_back() {
            if last >= extent {
                return Err(Error::Dimension(format!("sampled line {last} outside the {extent} available")));
            }
        }
        if acs_lines > extent {
            return Err(Error::Parameter(format!("{acs_lines} ACS lines exceed the {extent} available")));
        }
        let m = Self { sampled, factor, acs_lines, axis, rows, cols };
        if !m.acs_range().all(|l| m.sampled.contains(&l)) {
            return Err(Error::Validation("ACS block is not fully sampled".into()));
        }
        Ok(m)
    }

    /// Every line sampled.
    pub fn full(axis: Axis, shape: (usize, usize)) -> Result<Self> {
        let extent = axis.extent(shape);
        Self::new((0..extent).collect(), 1.0, 0, axis, shape)
    }

    pub fn sampled_lines(&self) -> &BTreeSet<usize> {
        &self.sampled
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn acs_lines(&self) -> usize {
        self.acs_lines
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn total_lines(&self) -> usize {
        self.axis.extent(self.shape())
    }

    pub fn acs_range(&self) -> std::ops::Range<usize> {
        let start = centered_start(self.total_lines(), self.acs_lines);
        start..start + self.acs_lines
    }

    /// Effective acceleration `total_lines / |sampled_lines|`.
    pub fn acceleration(&self) -> f64 {
        self.total_lines() as f64 / self.sampled.len() as f64
    }

    #[inline]
    pub fn is_sampled(&self, r: usize, c: usize) -> bool {
        self.sampled.contains(&self.axis.line_of(r, c))
    }

    /// `M_u` as a 0/1 weight per grid position (row-major).
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                w.push(if self.is_sampled(r, c) { 1.0 } else { 0.0 });
            }
        }
        w
    }

    /// True when every line of `m` is acquired by this mask.
    pub fn covers(&self, m: &FrequencyMask) -> bool {
        m.axis() == self.axis && m.low_lines().all(|l| self.sampled.contains(&l))
    }
}
