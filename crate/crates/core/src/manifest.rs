//! Run manifests: what was run, with which parameters, on which inputs, and
//! the SHA-256 of every output array.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments as given, enough to rerun the command.
    pub args: serde_json::Value,
    /// Resolved module configurations.
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// File name → SHA-256 (hex) of consumed files.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// File name → SHA-256 (hex) of produced files.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, args: serde_json::Value) -> Self {
        Self {
            tool: "hfsdiff".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            ..Self::default()
        }
    }

    /// Records the digest of `path` under its file name.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let d = digest_file(path)?;
        self.outputs.insert(file_key(path), d);
        Ok(())
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let d = digest_file(path)?;
        self.inputs.insert(file_key(path), d);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Names of outputs whose digest in `other` differs or is missing.
    pub fn output_mismatches(&self, other: &RunManifest) -> Vec<String> {
        self.outputs.iter().filter(|(k, v)| other.outputs.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect()
    }
}

fn file_key(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(digest_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn round_trip_and_mismatch_detection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        fs::write(&p, [1u8, 2, 3]).unwrap();
        let mut m = RunManifest::new("test", serde_json::json!({"seed": 1}));
        m.add_output(&p).unwrap();
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        let mut other = back.clone();
        other.outputs.insert("x.bin".into(), "00".into());
        assert_eq!(m.output_mismatches(&other), vec!["x.bin".to_string()]);
    }
}
