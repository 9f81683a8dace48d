//! Denoiser checkpoints: `model.json` plus a raw `model.bin` of
//! little-endian `f64`, EMA parameters first, then the raw parameters, each
//! in the block order of [`Architecture::layout`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::net::{Architecture, DenoiserNet};
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "model.json";
pub const BLOB_FILE: &str = "model.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub arch: Architecture,
    pub spec: DiffusionSpec,
    pub ema_rate: f64,
    pub seed: u64,
    pub param_count: usize,
    pub layout: Vec<ParamBlock>,
    pub blob: String,
    pub blob_sha256: String,
}

pub fn save_checkpoint(net: &DenoiserNet, dir: &Path) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::with_capacity(16 * net.param_count());
    for v in net.ema.iter().chain(&net.params) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let blob = dir.join(BLOB_FILE);
    fs::write(&blob, &bytes).map_err(|e| Error::io(&blob, e))?;
    let mut offset = 0;
    let layout = net
        .arch
        .layout()
        .into_iter()
        .map(|(name, shape)| {
            let b = ParamBlock { name: name.to_string(), offset, shape: shape.clone() };
            offset += shape.iter().product::<usize>();
            b
        })
        .collect();
    let manifest = CheckpointManifest {
        kind: "denoiser".into(),
        arch: net.arch,
        spec: net.spec,
        ema_rate: net.ema_rate,
        seed: net.seed,
        param_count: net.param_count(),
        layout,
        blob: BLOB_FILE.into(),
        blob_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<DenoiserNet> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.param_count != manifest.arch.param_count() {
        return Err(Error::format(&path, "parameter count disagrees with the architecture"));
    }
    let blob = dir.join(&manifest.blob);
    let bytes = fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    if bytes.len() != 16 * manifest.param_count {
        return Err(Error::format(
            &blob,
            format!("expected {} bytes, found {}", 16 * manifest.param_count, bytes.len()),
        ));
    }
    if hex::encode(Sha256::digest(&bytes)) != manifest.blob_sha256 {
        return Err(Error::format(&blob, "digest mismatch"));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let (ema, params) = values.split_at(manifest.param_count);
    let mut net = DenoiserNet::new(manifest.arch, manifest.spec, manifest.ema_rate, manifest.seed)?;
    net.ema = ema.to_vec();
    net.params = params.to_vec();
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Variant;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DiffusionSpec::new(Variant::HfsVp, 4);
        let mut net = DenoiserNet::new(Architecture { hidden: 3, kernel: 3 }, spec, 0.5, 7).unwrap();
        net.params.iter_mut().for_each(|p| *p *= 1.5);
        net.update_ema();
        let manifest = save_checkpoint(&net, dir.path()).unwrap();
        assert_eq!(manifest.layout[2].offset, 3 * 3 * 9 + 3);
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.params, net.params);
        assert_eq!(back.ema, net.ema);
        assert_eq!(back.spec, net.spec);
    }

    #[test]
    fn corrupted_blob_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DiffusionSpec::new(Variant::Vp, 0);
        let net = DenoiserNet::new(Architecture { hidden: 2, kernel: 3 }, spec, 0.5, 1).unwrap();
        save_checkpoint(&net, dir.path()).unwrap();
        let blob = dir.path().join(BLOB_FILE);
        let mut bytes = fs::read(&blob).unwrap();
        bytes[3] ^= 1;
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format { .. })));
    }
}
