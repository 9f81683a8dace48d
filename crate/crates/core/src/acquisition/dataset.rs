use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{read_cfl_raw, write_cfl_raw, CflArray, CoilKSpace, CoilSet, ComplexField, Domain, SamplingMask};
use crate::manifest::{RunManifest, MANIFEST_FILE};

use super::AcquisitionConfig;

/// Base names of the arrays in a dataset folder; each is a `.cfl/.hdr` pair.
pub const DATASET_FILES: [&str; 4] = ["phantom", "csm", "mask", "y"];

/// A simulated acquisition with its ground truth.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub phantom: ComplexField,
    pub csm: CoilSet,
    pub mask: SamplingMask,
    pub y: CoilKSpace,
    pub config: AcquisitionConfig,
}

fn mask_field(mu: &SamplingMask) -> ComplexField {
    let (rows, cols) = mu.shape();
    ComplexField::from_fn(rows, cols, Domain::KSpace, |r, c| {
        Complex64::new(if mu.is_sampled(r, c) { 1.0 } else { 0.0 }, 0.0)
    })
}

impl Dataset {
    /// Writes the four arrays and a manifest carrying `config` and digests.
    pub fn write(&self, dir: &Path, mut manifest: RunManifest) -> Result<RunManifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let arrays = [
            CflArray::from_field(&self.phantom),
            CflArray::from_stack(self.csm.maps(), true),
            CflArray::from_field(&mask_field(&self.mask)),
            CflArray::from_stack(self.y.coils(), true),
        ];
        for (name, a) in DATASET_FILES.iter().zip(&arrays) {
            let base = dir.join(name);
            write_cfl_raw(&base, a)?;
            manifest.add_output(&dir.join(format!("{name}.cfl")))?;
            manifest.add_output(&dir.join(format!("{name}.hdr")))?;
        }
        manifest.params = serde_json::json!({ "acquisition": self.config });
        manifest.seeds = vec![self.config.seed];
        manifest.write(dir)?;
        Ok(manifest)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
        let config: AcquisitionConfig = serde_json::from_value(
            manifest
                .params
                .get("acquisition")
                .cloned()
                .ok_or_else(|| Error::format(dir.join(MANIFEST_FILE), "no acquisition parameters"))?,
        )?;
        let phantom = read_cfl_raw(&dir.join("phantom"))?.to_field(Domain::Image)?;
        // Stored in single precision; renormalize rather than fail the SOS check.
        let csm = CoilSet::normalized(read_cfl_raw(&dir.join("csm"))?.to_stack(Domain::Image)?)?;
        let mask_path = dir.join("mask");
        let m = read_cfl_raw(&mask_path)?.to_field(Domain::KSpace)?;
        let (rows, cols) = m.shape();
        let lines: BTreeSet<usize> = (0..config.axis.extent((rows, cols)))
            .filter(|&l| {
                let (r, c) = match config.axis {
                    crate::field::Axis::Rows => (l, 0),
                    crate::field::Axis::Cols => (0, l),
                };
                m.get(r, c).re > 0.5
            })
            .collect();
        let mask = SamplingMask::new(lines, config.factor, config.acs_lines, config.axis, (rows, cols))
            .map_err(|e| Error::format(&mask_path, e.to_string()))?;
        let y = CoilKSpace::new(read_cfl_raw(&dir.join("y"))?.to_stack(Domain::KSpace)?)?;
        if y.count() != csm.count() || y.shape() != phantom.shape() || csm.shape() != phantom.shape() {
            return Err(Error::format(dir, "dataset arrays disagree in shape or coil count"));
        }
        Ok(Self { phantom, csm, mask, y, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{acquire, make_csm, make_undersampling_mask, MaskKind};
    use crate::field::{Axis, RngStream};

    #[test]
    fn write_then_read() {
        let mut rng = RngStream::new(2, 0);
        let x = rng.normal_field(16, 16, Domain::Image);
        let csm = make_csm(3, 16, 16).unwrap();
        let mask = make_undersampling_mask(MaskKind::Uniform, 4.0, 4, Axis::Rows, (16, 16), &mut rng).unwrap();
        let y = acquire(&x, &csm, &mask, 0.01, &mut rng).unwrap();
        let config = AcquisitionConfig { coils: 3, acs_lines: 4, ..Default::default() };
        let ds = Dataset { phantom: x, csm, mask, y, config };
        let dir = tempfile::tempdir().unwrap();
        let m = ds.write(dir.path(), RunManifest::new("acquire", serde_json::Value::Null)).unwrap();
        assert_eq!(m.outputs.len(), 8);
        let back = Dataset::read(dir.path()).unwrap();
        assert_eq!(back.mask, ds.mask);
        assert_eq!(back.config, ds.config);
        assert!(back.phantom.distance(&ds.phantom) < 1e-5 * ds.phantom.norm());
        assert!(back.csm.sos_deviation() < 1e-12);
    }
}
