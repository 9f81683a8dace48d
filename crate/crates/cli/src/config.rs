//! The `--config` file and flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use hfsdiff::acquisition::AcquisitionConfig;
use hfsdiff::bench::{AblationConfig, SweepConfig, TestbedConfig};
use hfsdiff::diffusion::{DiffusionSpec, Schedule, Variant};
use hfsdiff::sampler::SamplerConfig;
use hfsdiff::score::TrainConfig;
use hfsdiff::{Error, Result};

use crate::Common;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self { kind: "shepp_logan".into(), rows: 64, cols: 64 }
    }
}

/// Everything a run can be configured with. Every section is optional in
/// the file; missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub phantom: PhantomSection,
    pub acquisition: AcquisitionConfig,
    pub variant: Variant,
    /// Low-band width; defaults to `min(16, ACS lines)` of the data.
    pub n_l: Option<usize>,
    pub schedule: Schedule,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    /// Added to every fitted variance of a Gaussian prior.
    pub prior_floor: f64,
    /// Training images generated by `train`.
    pub train_count: usize,
    pub testbed: Option<TestbedConfig>,
    pub sweep: SweepConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomSection::default(),
            acquisition: AcquisitionConfig::default(),
            variant: Variant::HfsVp,
            n_l: None,
            schedule: Schedule::default(),
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            prior_floor: 1e-3,
            train_count: 64,
            testbed: None,
            sweep: SweepConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads the file (if any) and applies the common flags on top.
    pub fn resolve(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => load(path)?,
            None => Self::default(),
        };
        cfg.apply(common);
        cfg.acquisition.validate()?;
        cfg.schedule.validate()?;
        cfg.sampler.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, c: &Common) {
        if let Some(seed) = c.seed {
            self.acquisition.seed = seed;
            self.sampler.seed = seed;
            self.train.seed = seed;
            self.sweep.seed_base = seed;
            self.ablation.seed_base = seed;
            if let Some(tb) = self.testbed.as_mut() {
                tb.seed = seed;
            }
        }
        if let Some(v) = c.variant {
            self.variant = v;
        }
        if let Some(n) = c.nl {
            self.n_l = Some(n);
            self.sweep.n_l = n;
        }
        if let Some(n) = c.steps {
            self.sampler.steps = n;
            self.ablation.steps = n;
        }
        if let Some(m) = c.correctors {
            self.sampler.correctors = m;
        }
        if let Some(f) = c.factor {
            self.acquisition.factor = f;
        }
        if let Some(a) = c.acs {
            self.acquisition.acs_lines = a;
        }
        if let Some(l) = c.lambda1 {
            self.sampler.lambda1 = l;
        }
        if let Some(l) = c.lambda2 {
            self.sampler.lambda2 = l;
        }
        if let Some(r) = c.snr_r {
            self.sampler.snr = r;
        }
        if c.no_dc {
            self.sampler.dc = false;
        }
        self.sweep.schedule = self.schedule;
        self.sweep.sampler = self.sampler;
        self.ablation.schedule = self.schedule;
        self.ablation.sampler = self.sampler;
    }

    /// Diffusion spec for the configured variant; `default_nl` is used when
    /// no width was configured.
    pub fn spec(&self, default_nl: usize) -> DiffusionSpec {
        let n_l = if self.variant.is_hfs() { self.n_l.unwrap_or(default_nl) } else { 0 };
        let mut spec = DiffusionSpec::new(self.variant, n_l);
        spec.schedule = self.schedule;
        spec.axis = self.acquisition.axis;
        spec
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))
}
