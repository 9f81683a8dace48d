//! BART-compatible `.hdr`/`.cfl` array files.
//!
//! The header is text: a `# Dimensions` line followed by one line of
//! space-separated extents. The data file is raw interleaved little-endian
//! `f32` (real, imag) in column-major order (first dimension fastest).
//! Fields are written as `[rows, cols]`; coil stacks as `[rows, cols, 1, n]`,
//! the coil axis being BART's dimension 3.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};

use super::{ComplexField, Domain};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CflArray {
    pub dims: Vec<usize>,
    /// Column-major samples.
    pub data: Vec<Complex32>,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

impl CflArray {
    pub fn from_field(f: &ComplexField) -> Self {
        Self::from_stack(std::slice::from_ref(f), false)
    }

    /// Stacks equally-shaped fields along BART dimension 3.
    pub fn from_stack(fields: &[ComplexField], coil_axis: bool) -> Self {
        let (rows, cols) = fields[0].shape();
        let mut data = Vec::with_capacity(rows * cols * fields.len());
        for f in fields {
            for c in 0..cols {
                for r in 0..rows {
                    let v = f.get(r, c);
                    data.push(Complex32::new(v.re as f32, v.im as f32));
                }
            }
        }
        let dims = if coil_axis { vec![rows, cols, 1, fields.len()] } else { vec![rows, cols] };
        Self { dims, data }
    }

    fn plane_shape(&self) -> Result<(usize, usize, usize)> {
        let rows = *self.dims.first().unwrap_or(&1);
        let cols = *self.dims.get(1).unwrap_or(&1);
        let planes: usize = self.dims.iter().skip(2).product();
        if rows == 0 || cols == 0 || rows * cols * planes != self.data.len() {
            return Err(Error::Dimension(format!("dims {:?} do not match {} samples", self.dims, self.data.len())));
        }
        Ok((rows, cols, planes))
    }

    /// Every `rows × cols` plane, in storage order.
    pub fn to_stack(&self, domain: Domain) -> Result<Vec<ComplexField>> {
        let (rows, cols, planes) = self.plane_shape()?;
        (0..planes)
            .map(|p| {
                let off = p * rows * cols;
                let mut v = vec![Complex64::new(0.0, 0.0); rows * cols];
                for c in 0..cols {
                    for r in 0..rows {
                        let s = self.data[off + r + rows * c];
                        v[r * cols + c] = Complex64::new(s.re as f64, s.im as f64);
                    }
                }
                ComplexField::from_vec(rows, cols, v, domain)
            })
            .collect()
    }

    pub fn to_field(&self, domain: Domain) -> Result<ComplexField> {
        let (_, _, planes) = self.plane_shape()?;
        if planes != 1 {
            return Err(Error::Dimension(format!("expected a single 2D plane, dims are {:?}", self.dims)));
        }
        Ok(self.to_stack(domain)?.remove(0))
    }
}

/// Writes `<base>.hdr` and `<base>.cfl`.
pub fn write_cfl_raw(base: &Path, a: &CflArray) -> Result<()> {
    let hdr = with_ext(base, "hdr");
    let cfl = with_ext(base, "cfl");
    let dims: Vec<String> = a.dims.iter().map(usize::to_string).collect();
    let header = format!("# Dimensions\n{}\n", dims.join(" "));
    fs::write(&hdr, header).map_err(|e| Error::io(&hdr, e))?;
    let mut bytes = Vec::with_capacity(a.data.len() * 8);
    for v in &a.data {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = fs::File::create(&cfl).map_err(|e| Error::io(&cfl, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&cfl, e))?;
    Ok(())
}

pub fn read_cfl_raw(base: &Path) -> Result<CflArray> {
    let hdr = with_ext(base, "hdr");
    let cfl = with_ext(base, "cfl");
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let mut lines = text.lines();
    lines
        .by_ref()
        .find(|l| l.trim() == "# Dimensions")
        .ok_or_else(|| Error::format(&hdr, "missing '# Dimensions' line"))?;
    let dim_line = lines.next().ok_or_else(|| Error::format(&hdr, "missing dimension line"))?;
    let dims = dim_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(&hdr, format!("bad extent: {e}")))?;
    if dims.is_empty() {
        return Err(Error::format(&hdr, "no extents listed"));
    }
    let n: usize = dims.iter().product();
    let bytes = fs::read(&cfl).map_err(|e| Error::io(&cfl, e))?;
    if bytes.len() != n * 8 {
        return Err(Error::format(
            &cfl,
            format!("expected {} bytes for dims {:?}, found {}", n * 8, dims, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| {
            Complex32::new(f32::from_le_bytes([b[0], b[1], b[2], b[3]]), f32::from_le_bytes([b[4], b[5], b[6], b[7]]))
        })
        .collect();
    Ok(CflArray { dims, data })
}

pub fn write_cfl(base: &Path, f: &ComplexField) -> Result<()> {
    write_cfl_raw(base, &CflArray::from_field(f))
}

pub fn read_cfl(base: &Path, domain: Domain) -> Result<ComplexField> {
    read_cfl_raw(base)?.to_field(domain)
}
