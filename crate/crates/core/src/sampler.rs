//! Predictor–corrector posterior sampling with gradient data consistency.
//!
//! One reconstruction runs `N` predictor steps, each followed by `M`
//! Langevin corrector sub-steps. With `j` the index of the current iterate
//! and `t_j = j/N`:
//!
//! ```text
//! predictor  x ← x + ½β_j F_h x + β_j (g − εG) + √β_j F_h z,   ε  = λ1‖g‖/‖G‖
//! corrector  x ← x + ε1 (g − ε2 G) + √(2ε1) F_h z,            ε1 = 2α_j (r‖z‖/‖g‖)²,
//!                                                              ε2 = ‖g‖/(λ2‖G‖)
//! ```
//!
//! where `g = F_h s(x, t)`, `G = Σ_j csm_j*·F⁻¹(M_u F(csm_j x) − y_j)` and
//! `β_j = β(t_j)/N`, `α_j = 1 − β_j`. The VE family replaces the predictor
//! with `x ← x + Δσ²(g − εG) + √Δσ² F_h z`, `Δσ² = σ²(t_j) − σ²(t_{j−1})`,
//! and uses `α = 1`. Full-space variants have `F_h = I`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{kernel_coeffs, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{
    apply_fh, encode, ifft2_centered, keep_band, write_cfl, Band, CoilKSpace, CoilSet, ComplexField, Domain,
    FrequencyMask, RngStream, SamplingMask,
};
use crate::score::ScoreModel;

/// Norms below this are treated as zero before dividing by them.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Corrector signal-to-noise ratio `r`.
    pub snr: f64,
    /// Predictor steps `N`.
    pub steps: usize,
    /// Corrector sub-steps per predictor step `M`.
    pub correctors: usize,
    pub dc: bool,
    pub seed: u64,
    /// Keep a copy of the iterate every this many predictor steps (0: never).
    pub snapshot_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 1.0, snr: 0.16, steps: 1000, correctors: 1, dc: true, seed: 0, snapshot_every: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::Parameter(format!("lambda1 = {} must be ≥ 0", self.lambda1)));
        }
        if !(self.lambda2 > 0.0 && self.lambda2.is_finite()) {
            return Err(Error::Parameter(format!("lambda2 = {} must be > 0", self.lambda2)));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::Parameter(format!("snr = {} must be > 0", self.snr)));
        }
        if self.steps == 0 {
            return Err(Error::Parameter("at least one predictor step is required".into()));
        }
        Ok(())
    }
}

/// One row per predictor step (`k = 0`) and per corrector sub-step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Index of the iterate produced.
    pub i: usize,
    pub k: usize,
    pub norm_g: f64,
    #[serde(rename = "norm_G")]
    pub norm_big_g: f64,
    pub nmse: Option<f64>,
}

/// Current iterate `x_i^k` and the chain's random stream.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub x: ComplexField,
    pub i: usize,
    pub k: usize,
    pub rng: RngStream,
    /// Corrector sub-steps whose `‖g‖` fell below [`NORM_FLOOR`].
    pub warnings: usize,
}

/// Acquired data and acquisition model.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub y: &'a CoilKSpace,
    pub csm: &'a CoilSet,
    pub mu: &'a SamplingMask,
}

#[derive(Clone, Debug)]
pub struct ReconReport {
    pub recon: ComplexField,
    pub trace: Vec<TraceRow>,
    pub wall_ms: f64,
    pub config: SamplerConfig,
    pub spec: DiffusionSpec,
    pub warnings: usize,
    /// `(index, iterate)` pairs when snapshots were requested.
    pub snapshots: Vec<(usize, ComplexField)>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a SamplerConfig,
    spec: &'a DiffusionSpec,
    wall_ms: f64,
    warnings: usize,
    trace_rows: usize,
    snapshots: Vec<usize>,
}

impl ReconReport {
    /// Writes `recon.{hdr,cfl}`, `trace.csv`, `report.json` and any
    /// snapshots `snap_<i>.{hdr,cfl}` into `dir`. Returns the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        write_cfl(&dir.join("recon"), &self.recon)?;
        written.push(dir.join("recon.cfl"));
        let trace = dir.join("trace.csv");
        let mut w = csv::Writer::from_path(&trace)?;
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&trace, e))?;
        written.push(trace);
        for (i, x) in &self.snapshots {
            let base = dir.join(format!("snap_{i:05}"));
            write_cfl(&base, x)?;
            written.push(dir.join(format!("snap_{i:05}.cfl")));
        }
        let json = ReportJson {
            config: &self.config,
            spec: &self.spec,
            wall_ms: self.wall_ms,
            warnings: self.warnings,
            trace_rows: self.trace.len(),
            snapshots: self.snapshots.iter().map(|(i, _)| *i).collect(),
        };
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(&json)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

pub struct Sampler<'a> {
    problem: Problem<'a>,
    model: &'a dyn ScoreModel,
    spec: DiffusionSpec,
    cfg: SamplerConfig,
    mask: FrequencyMask,
    reference: Option<&'a ComplexField>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        problem: Problem<'a>,
        model: &'a dyn ScoreModel,
        spec: DiffusionSpec,
        cfg: SamplerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        spec.schedule.validate()?;
        if cfg.steps > spec.schedule.n {
            return Err(Error::Range(format!(
                "{} sampling steps exceed the schedule's N = {}",
                cfg.steps, spec.schedule.n
            )));
        }
        if spec.variant.is_vp() && cfg.correctors > 0 {
            let n = cfg.steps;
            if let Some(i) = (0..n).find(|&i| spec.schedule.alpha_discrete(i, n) <= 0.0) {
                return Err(Error::Parameter(format!(
                    "{n} steps give α_{i} = 1 − β_{i} ≤ 0; use more steps or no correctors"
                )));
            }
        }
        let shape = problem.csm.shape();
        if problem.y.count() != problem.csm.count() {
            return Err(Error::Dimension(format!(
                "{} coils of data for {} sensitivity maps",
                problem.y.count(),
                problem.csm.count()
            )));
        }
        if problem.y.shape() != shape || problem.mu.shape() != shape {
            return Err(Error::Dimension(format!(
                "data {:?}, maps {shape:?} and mask {:?} disagree",
                problem.y.shape(),
                problem.mu.shape()
            )));
        }
        let mask = spec.freq_mask(shape)?;
        Ok(Self { problem, model, spec, cfg, mask, reference: None })
    }

    /// Record NMSE against `x` in every trace row.
    pub fn with_reference(mut self, x: &'a ComplexField) -> Self {
        self.reference = Some(x);
        self
    }

    pub fn mask(&self) -> &FrequencyMask {
        &self.mask
    }

    fn shape(&self) -> (usize, usize) {
        self.problem.csm.shape()
    }

    /// Coil-combined zero-filled low-band image `Σ_j csm_j*·F⁻¹(M_l y_j)`
    /// for HFS variants, zero otherwise: the mean of the initial iterate.
    pub fn init_mean(&self) -> Result<ComplexField> {
        let (rows, cols) = self.shape();
        let mut acc = ComplexField::zeros(rows, cols, Domain::Image);
        if !self.spec.variant.is_hfs() || self.mask.is_empty() {
            return Ok(acc);
        }
        if !self.problem.mu.covers(&self.mask) {
            return Err(Error::Initialization(format!(
                "the {} low-frequency lines are not all acquired",
                self.mask.n_l()
            )));
        }
        let mut energy = 0.0;
        for (yj, map) in self.problem.y.coils().iter().zip(self.problem.csm.maps()) {
            let mut k = yj.clone();
            keep_band(&mut k, &self.mask, Band::Low);
            energy += k.norm_sqr();
            acc.axpy(1.0, &ifft2_centered(&k)?.mul_conj(map));
        }
        if energy == 0.0 {
            return Err(Error::Initialization("the low-frequency region of y is empty".into()));
        }
        Ok(acc)
    }

    /// Draws `x_N`: `init_mean + c·F_h z` with `c = √v(1)` for the VE family
    /// and `1` for the VP family.
    pub fn init_state(&self) -> Result<SamplerState> {
        let mut rng = RngStream::new(self.cfg.seed, 0);
        let (rows, cols) = self.shape();
        let z = rng.normal_field(rows, cols, Domain::Image);
        let mut x = self.init_mean()?;
        let scale = if self.spec.variant.is_vp() { 1.0 } else { kernel_coeffs(&self.spec, 1.0)?.v.sqrt() };
        x.axpy(scale, &apply_fh(&z, &self.mask)?);
        Ok(SamplerState { x, i: self.cfg.steps, k: 0, rng, warnings: 0 })
    }

    /// Data-consistency gradient `Σ_j csm_j*·F⁻¹(M_u F(csm_j x) − y_j)`.
    pub fn dc_gradient(&self, x: &ComplexField) -> Result<ComplexField> {
        let ax = encode(x, self.problem.csm, self.problem.mu)?;
        let (rows, cols) = self.shape();
        let mut acc = ComplexField::zeros(rows, cols, Domain::Image);
        for ((axj, yj), map) in ax.coils().iter().zip(self.problem.y.coils()).zip(self.problem.csm.maps()) {
            acc.axpy(1.0, &ifft2_centered(&axj.sub(yj))?.mul_conj(map));
        }
        Ok(acc)
    }

    fn time(&self, j: usize) -> f64 {
        j as f64 / self.cfg.steps as f64
    }

    fn nmse(&self, x: &ComplexField) -> Option<f64> {
        self.reference.map(|r| x.distance(r).powi(2) / r.norm_sqr())
    }

    fn row(&self, i: usize, k: usize, g: f64, big_g: f64, x: &ComplexField) -> TraceRow {
        TraceRow { i, k, norm_g: g, norm_big_g: big_g, nmse: self.nmse(x) }
    }

    fn check(&self, x: &ComplexField, row: TraceRow) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence { step: row.i, corrector: row.k, trace: vec![row] })
        }
    }

    /// Predictor update from index `j` to `j − 1` with an explicit draw `z`.
    pub fn predictor_update(&self, x: &ComplexField, j: usize, z: &ComplexField) -> Result<(ComplexField, TraceRow)> {
        if j == 0 || j > self.cfg.steps {
            return Err(Error::Range(format!("predictor index {j} outside 1..={}", self.cfg.steps)));
        }
        let n = self.cfg.steps;
        let g = apply_fh(&self.model.score(x, self.time(j))?, &self.mask)?;
        let big_g = self.dc_gradient(x)?;
        let (ng, nbg) = (g.norm(), big_g.norm());
        let eps = if self.cfg.dc && nbg >= NORM_FLOOR { self.cfg.lambda1 * ng / nbg } else { 0.0 };
        let sched = &self.spec.schedule;
        let (drift_step, noise_std, linear) = if self.spec.variant.is_vp() {
            let b = sched.beta_discrete(j, n);
            (b, b.sqrt(), 0.5 * b)
        } else {
            let d = sched.sigma2_increment(j, n);
            (d, d.sqrt(), 0.0)
        };
        let mut out = x.clone();
        if linear != 0.0 {
            out.axpy(linear, &apply_fh(x, &self.mask)?);
        }
        out.axpy(drift_step, &g);
        out.axpy(-drift_step * eps, &big_g);
        out.axpy(noise_std, &apply_fh(z, &self.mask)?);
        let row = self.row(j - 1, 0, ng, nbg, &out);
        self.check(&out, row)?;
        Ok((out, row))
    }

    /// Corrector sub-step `k` at index `i` with an explicit draw `z`. The
    /// boolean is true when `‖g‖` was floored.
    pub fn corrector_update(
        &self,
        x: &ComplexField,
        i: usize,
        k: usize,
        z: &ComplexField,
    ) -> Result<(ComplexField, TraceRow, bool)> {
        let n = self.cfg.steps;
        let g = apply_fh(&self.model.score(x, self.time(i))?, &self.mask)?;
        let big_g = self.dc_gradient(x)?;
        let (ng, nbg) = (g.norm(), big_g.norm());
        let alpha = if self.spec.variant.is_vp() { self.spec.schedule.alpha_discrete(i, n) } else { 1.0 };
        let floored = ng < NORM_FLOOR;
        let ratio = self.cfg.snr * z.norm() / ng.max(NORM_FLOOR);
        let eps1 = 2.0 * alpha * ratio * ratio;
        let eps2 = if self.cfg.dc && nbg >= NORM_FLOOR { ng / (self.cfg.lambda2 * nbg) } else { 0.0 };
        let mut out = x.clone();
        out.axpy(eps1, &g);
        out.axpy(-eps1 * eps2, &big_g);
        out.axpy((2.0 * eps1).sqrt(), &apply_fh(z, &self.mask)?);
        let row = self.row(i, k, ng, nbg, &out);
        self.check(&out, row)?;
        Ok((out, row, floored))
    }

    pub fn predictor_step(&self, state: &mut SamplerState) -> Result<TraceRow> {
        let (rows, cols) = self.shape();
        let z = state.rng.normal_field(rows, cols, Domain::Image);
        let (x, row) = self.predictor_update(&state.x, state.i, &z)?;
        state.x = x;
        state.i -= 1;
        state.k = 0;
        Ok(row)
    }

    pub fn corrector_step(&self, state: &mut SamplerState) -> Result<TraceRow> {
        let (rows, cols) = self.shape();
        let z = state.rng.normal_field(rows, cols, Domain::Image);
        let (x, row, floored) = self.corrector_update(&state.x, state.i, state.k + 1, &z)?;
        if floored {
            if state.warnings == 0 {
                log::warn!("score norm below {NORM_FLOOR:e} at step {}; corrector step size floored", state.i);
            }
            state.warnings += 1;
        }
        state.x = x;
        state.k += 1;
        Ok(row)
    }

    pub fn run(&self) -> Result<ReconReport> {
        let start = Instant::now();
        let mut state = self.init_state()?;
        let mut trace = Vec::with_capacity(self.cfg.steps * (1 + self.cfg.correctors));
        let mut snapshots = Vec::new();
        let attach = |e: Error, trace: &mut Vec<TraceRow>| match e {
            Error::Divergence { step, corrector, trace: last } => {
                trace.extend(last);
                Error::Divergence { step, corrector, trace: std::mem::take(trace) }
            }
            other => other,
        };
        while state.i > 0 {
            match self.predictor_step(&mut state) {
                Ok(row) => trace.push(row),
                Err(e) => return Err(attach(e, &mut trace)),
            }
            for _ in 0..self.cfg.correctors {
                match self.corrector_step(&mut state) {
                    Ok(row) => trace.push(row),
                    Err(e) => return Err(attach(e, &mut trace)),
                }
            }
            let done = self.cfg.steps - state.i;
            if self.cfg.snapshot_every > 0 && done % self.cfg.snapshot_every == 0 {
                snapshots.push((state.i, state.x.clone()));
            }
        }
        Ok(ReconReport {
            recon: state.x,
            trace,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            config: self.cfg,
            spec: self.spec,
            warnings: state.warnings,
            snapshots,
        })
    }
}

/// Runs a full reconstruction.
pub fn reconstruct(
    problem: Problem<'_>,
    model: &dyn ScoreModel,
    spec: &DiffusionSpec,
    cfg: &SamplerConfig,
) -> Result<ReconReport> {
    Sampler::new(problem, model, *spec, *cfg)?.run()
}

/// Relative L2 error between the low-band k-space of `A x` and that of `y`.
pub fn low_band_error(x: &ComplexField, problem: Problem<'_>, m: &FrequencyMask) -> Result<f64> {
    let ax = encode(x, problem.csm, problem.mu)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, y) in ax.coils().iter().zip(problem.y.coils()) {
        let mut d = a.sub(y);
        keep_band(&mut d, m, Band::Low);
        let mut yl = y.clone();
        keep_band(&mut yl, m, Band::Low);
        num += d.norm_sqr();
        den += yl.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::Metric("acquired low band is zero".into()));
    }
    Ok((num / den).sqrt())
}
