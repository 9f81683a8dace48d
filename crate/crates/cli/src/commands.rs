use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hfsdiff::acquisition::{acquire, make_csm, make_phantom, make_undersampling_mask, Dataset, MaskKind, PhantomKind};
use hfsdiff::bench::{
    ablation_nl, convergence_sweep, metrics, time_reconstructions, timing_report, write_csv, write_pgm16,
    GaussianTestbed, Testbed, TestbedConfig,
};
use hfsdiff::diffusion::{DiffusionSpec, Variant};
use hfsdiff::field::{read_cfl, write_cfl_raw, CflArray, ComplexField, Domain, RngStream};
use hfsdiff::manifest::RunManifest;
use hfsdiff::sampler::{reconstruct, Problem, SamplerConfig};
use hfsdiff::score::{
    load_checkpoint, save_checkpoint, train_denoiser, DenoiserNet, GaussianPrior, GaussianScore, ScoreModel,
};
use hfsdiff::{Error, Result};

use crate::config::RunConfig;
use crate::{Cli, Command, ModelKind};

const PRIOR_FILE: &str = "prior.json";

/// On-disk Gaussian prior.
#[derive(Serialize, Deserialize)]
struct PriorFile {
    kind: String,
    prior: GaussianPrior,
}

enum Model {
    Gaussian(GaussianPrior),
    Net(DenoiserNet),
}

impl Model {
    fn load(dir: &Path) -> Result<Self> {
        if dir.join("model.json").exists() {
            return Ok(Model::Net(load_checkpoint(dir)?));
        }
        let path = if dir.is_dir() { dir.join(PRIOR_FILE) } else { dir.to_path_buf() };
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let file: PriorFile = serde_json::from_str(&text)?;
        Ok(Model::Gaussian(file.prior))
    }

    /// Score model for `spec`, or `None` when a denoiser was trained for a
    /// different process.
    fn for_spec(&self, spec: &DiffusionSpec) -> Option<Box<dyn ScoreModel + '_>> {
        match self {
            Model::Gaussian(p) => Some(Box::new(GaussianScore::new(p.clone(), *spec))),
            Model::Net(net) => {
                let s = &net.spec;
                let same = s.variant == spec.variant
                    && s.n_l == spec.n_l
                    && s.axis == spec.axis
                    && s.schedule.beta_min == spec.schedule.beta_min
                    && s.schedule.beta_max == spec.schedule.beta_max
                    && s.schedule.sigma_min == spec.schedule.sigma_min
                    && s.schedule.sigma_max == spec.schedule.sigma_max;
                same.then(|| Box::new(net.clone()) as Box<dyn ScoreModel + '_>)
            }
        }
    }
}

/// A dataset on disk with one or more models.
struct DataTestbed {
    data: Dataset,
    models: Vec<Model>,
}

impl Testbed for DataTestbed {
    fn truth(&self) -> &ComplexField {
        &self.data.phantom
    }

    fn problem(&self) -> Problem<'_> {
        Problem { y: &self.data.y, csm: &self.data.csm, mu: &self.data.mask }
    }

    fn model(&self, spec: &DiffusionSpec) -> Option<Box<dyn ScoreModel + '_>> {
        self.models.iter().find_map(|m| m.for_spec(spec))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn parse_kind(s: &str) -> Result<PhantomKind> {
    s.parse()
}

/// Default low-band width: 16, or the ACS size when that is smaller.
fn default_nl(acs_lines: usize) -> usize {
    16.min(acs_lines)
}

fn write_array(dir: &Path, name: &str, a: &CflArray, manifest: &mut RunManifest) -> Result<()> {
    write_cfl_raw(&dir.join(name), a)?;
    manifest.add_output(&dir.join(format!("{name}.cfl")))?;
    manifest.add_output(&dir.join(format!("{name}.hdr")))
}

fn set_param(manifest: &mut RunManifest, key: &str, value: impl Serialize) -> Result<()> {
    if !manifest.params.is_object() {
        manifest.params = serde_json::json!({});
    }
    manifest.params[key] = serde_json::to_value(value)?;
    Ok(())
}

pub fn run(cli: &Cli, manifest: &mut RunManifest) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.common)?;
    let out = cli.common.out.clone();
    ensure_dir(&out)?;
    log::info!("{} into {}", cli.command.name(), out.display());
    log::debug!("{cfg:?}");
    match &cli.command {
        Command::Phantom { kind, rows, cols } => {
            let kind = parse_kind(kind.as_deref().unwrap_or(&cfg.phantom.kind))?;
            let (rows, cols) = (rows.unwrap_or(cfg.phantom.rows), cols.unwrap_or(cfg.phantom.cols));
            let p = make_phantom(kind, rows, cols, &mut RngStream::new(cfg.acquisition.seed, 0))?;
            write_array(&out, "phantom", &CflArray::from_field(&p.image), manifest)?;
            let scale = write_pgm16(&out.join("phantom.pgm"), &p.image)?;
            manifest.add_output(&out.join("phantom.pgm"))?;
            set_param(manifest, "phantom", serde_json::json!({ "kind": kind, "rows": rows, "cols": cols }))?;
            set_param(manifest, "raw_std", p.std)?;
            set_param(manifest, "pgm_scale", scale)?;
            manifest.seeds = vec![cfg.acquisition.seed];
        }
        Command::Csm { coils, rows, cols } => {
            let n = coils.unwrap_or(cfg.acquisition.coils);
            let (rows, cols) = (rows.unwrap_or(cfg.phantom.rows), cols.unwrap_or(cfg.phantom.cols));
            let csm = make_csm(n, rows, cols)?;
            write_array(&out, "csm", &CflArray::from_stack(csm.maps(), true), manifest)?;
            set_param(manifest, "csm", serde_json::json!({ "coils": n, "rows": rows, "cols": cols }))?;
        }
        Command::Mask { kind, rows, cols } => {
            let mut acq = cfg.acquisition.clone();
            if let Some(k) = kind {
                acq.mask = k.parse::<MaskKind>()?;
            }
            let shape = (rows.unwrap_or(cfg.phantom.rows), cols.unwrap_or(cfg.phantom.cols));
            let mu = make_undersampling_mask(
                acq.mask,
                acq.factor,
                acq.acs_lines,
                acq.axis,
                shape,
                &mut RngStream::new(acq.seed, 0),
            )?;
            let field = ComplexField::from_vec(
                shape.0,
                shape.1,
                mu.weights().into_iter().map(|w| w.into()).collect(),
                Domain::KSpace,
            )?;
            write_array(&out, "mask", &CflArray::from_field(&field), manifest)?;
            let summary = serde_json::json!({
                "kind": acq.mask,
                "factor": acq.factor,
                "acs_lines": acq.acs_lines,
                "total_lines": mu.total_lines(),
                "sampled_lines": mu.sampled_lines().len(),
                "acceleration": mu.acceleration(),
                "lines": mu.sampled_lines(),
            });
            println!(
                "{} of {} lines sampled, acceleration {:.4}",
                mu.sampled_lines().len(),
                mu.total_lines(),
                mu.acceleration()
            );
            set_param(manifest, "acquisition", &acq)?;
            set_param(manifest, "mask", summary)?;
            manifest.seeds = vec![acq.seed];
        }
        Command::Acquire { kind, rows, cols, coils, noise, mask } => {
            let mut acq = cfg.acquisition.clone();
            if let Some(n) = coils {
                acq.coils = *n;
            }
            if let Some(s) = noise {
                acq.noise_std = *s;
            }
            if let Some(k) = mask {
                acq.mask = k.parse()?;
            }
            acq.validate()?;
            let kind = parse_kind(kind.as_deref().unwrap_or(&cfg.phantom.kind))?;
            let (rows, cols) = (rows.unwrap_or(cfg.phantom.rows), cols.unwrap_or(cfg.phantom.cols));
            let mut rng = RngStream::new(acq.seed, 0);
            let phantom = make_phantom(kind, rows, cols, &mut rng)?.image;
            let csm = make_csm(acq.coils, rows, cols)?;
            let mu = make_undersampling_mask(acq.mask, acq.factor, acq.acs_lines, acq.axis, (rows, cols), &mut rng)?;
            let y = acquire(&phantom, &csm, &mu, acq.noise_std, &mut rng.substream(1))?;
            println!(
                "{} coils, {} of {} lines, acceleration {:.4}",
                acq.coils,
                mu.sampled_lines().len(),
                mu.total_lines(),
                mu.acceleration()
            );
            let data = Dataset { phantom, csm, mask: mu, y, config: acq };
            let written = data.write(&out, manifest.clone())?;
            *manifest = written;
            write_pgm16(&out.join("phantom.pgm"), &data.phantom)?;
            manifest.add_output(&out.join("phantom.pgm"))?;
            set_param(manifest, "phantom", serde_json::json!({ "kind": kind, "rows": rows, "cols": cols }))?;
        }
        Command::Train { model, kind, count, rows, cols, iterations } => {
            let kind = parse_kind(kind.as_deref().unwrap_or("gaussian_blobs"))?;
            let (rows, cols) = (rows.unwrap_or(cfg.phantom.rows), cols.unwrap_or(cfg.phantom.cols));
            let count = count.unwrap_or(cfg.train_count);
            let mut rng = RngStream::new(cfg.train.seed, 0);
            let images =
                (0..count).map(|_| Ok(make_phantom(kind, rows, cols, &mut rng)?.image)).collect::<Result<Vec<_>>>()?;
            set_param(
                manifest,
                "training_set",
                serde_json::json!({ "kind": kind, "count": count, "rows": rows, "cols": cols }),
            )?;
            manifest.seeds = vec![cfg.train.seed];
            match model {
                ModelKind::Gaussian => {
                    let prior = GaussianPrior::fit(&images, cfg.prior_floor)?;
                    let path = out.join(PRIOR_FILE);
                    let file = PriorFile { kind: "gaussian".into(), prior };
                    fs::write(&path, serde_json::to_string(&file)?).map_err(|e| io_error(&path, e))?;
                    manifest.add_output(&path)?;
                    set_param(manifest, "prior_floor", cfg.prior_floor)?;
                }
                ModelKind::Denoiser => {
                    let mut train = cfg.train;
                    if let Some(n) = iterations {
                        train.iterations = *n;
                    }
                    let spec = cfg.spec(default_nl(cfg.acquisition.acs_lines));
                    let (net, report) = train_denoiser(&images, &spec, &train)?;
                    save_checkpoint(&net, &out)?;
                    write_csv(&out.join("train_loss.csv"), &report.history)?;
                    for f in ["model.json", "model.bin", "train_loss.csv"] {
                        manifest.add_output(&out.join(f))?;
                    }
                    println!(
                        "running loss {:.4} → {:.4} over {} iterations",
                        report.initial_running_loss, report.final_running_loss, train.iterations
                    );
                    set_param(manifest, "train", train)?;
                    set_param(manifest, "spec", spec)?;
                }
            }
        }
        Command::Reconstruct { data, model, snapshot_every } => {
            let dataset = Dataset::read(data)?;
            manifest.add_input(&data.join("y.cfl"))?;
            let model = Model::load(model)?;
            let spec = match (&model, cli.common.variant.is_some() || cli.common.nl.is_some() || cfg.n_l.is_some()) {
                (Model::Net(net), false) => DiffusionSpec { schedule: cfg.schedule, ..net.spec },
                _ => cfg.spec(default_nl(dataset.mask.acs_lines())),
            };
            let score = model.for_spec(&spec).ok_or_else(|| {
                Error::Parameter(format!(
                    "the model was trained for a different process than {} with n_l = {}",
                    spec.variant, spec.n_l
                ))
            })?;
            let sampler = SamplerConfig { snapshot_every: *snapshot_every, ..cfg.sampler };
            set_param(manifest, "spec", spec)?;
            set_param(manifest, "sampler", sampler)?;
            manifest.seeds = vec![sampler.seed];
            let problem = Problem { y: &dataset.y, csm: &dataset.csm, mu: &dataset.mask };
            let report = match reconstruct(problem, score.as_ref(), &spec, &sampler) {
                Ok(r) => r,
                Err(Error::Divergence { step, corrector, trace }) => {
                    let path = out.join("trace.csv");
                    write_csv(&path, &trace)?;
                    manifest.add_output(&path)?;
                    return Err(Error::Divergence { step, corrector, trace });
                }
                Err(e) => return Err(e),
            };
            for p in report.write_to(&out)? {
                // report.json carries the wall-clock time
                if p.file_name().is_some_and(|f| f != "report.json") {
                    manifest.add_output(&p)?;
                }
            }
            let m = metrics(&report.recon, &dataset.phantom)?;
            let scale = write_pgm16(&out.join("recon.pgm"), &report.recon)?;
            manifest.add_output(&out.join("recon.pgm"))?;
            write_metrics(&out, &m)?;
            manifest.add_output(&out.join("metrics.json"))?;
            set_param(manifest, "pgm_scale", scale)?;
            set_param(manifest, "metrics", m)?;
            println!("nmse {:.6}  psnr {:.3} dB  ssim {:.4}  ({:.0} ms)", m.nmse, m.psnr, m.ssim, report.wall_ms);
        }
        Command::Sweep { steps_list, variants, chains, data, model } => {
            let mut sweep = cfg.sweep.clone();
            if let Some(s) = steps_list {
                sweep.step_counts = s.clone();
            }
            if let Some(v) = variants {
                sweep.variants = v.clone();
            }
            if let Some(c) = chains {
                sweep.chains = *c;
            }
            let rows = with_testbed(&cfg, data.as_deref(), model, false, |tb| {
                if cfg.n_l.is_none() {
                    sweep.n_l = default_nl(tb.problem().mu.acs_lines());
                }
                convergence_sweep(tb, &sweep)
            })?;
            write_csv(&out.join("sweep.csv"), &rows)?;
            manifest.add_output(&out.join("sweep.csv"))?;
            for r in rows.iter().filter(|r| r.seed == "mean") {
                println!("{:<7} N={:<5} nmse {:.6}  psnr {:.3}", r.variant, r.steps, r.nmse, r.psnr);
            }
            set_param(manifest, "sweep", &sweep)?;
            manifest.seeds = (0..sweep.chains as u64).map(|c| sweep.seed_base + c).collect();
        }
        Command::AblateNl { nl_list, chains, data, model } => {
            let mut abl = cfg.ablation.clone();
            abl.variant = if cfg.variant.is_hfs() { cfg.variant } else { Variant::HfsVp };
            if let Some(l) = nl_list {
                abl.nl_values = l.clone();
            }
            if let Some(c) = chains {
                abl.chains = *c;
            }
            let (rows, warnings) = with_testbed(&cfg, data.as_deref(), model, true, |tb| ablation_nl(tb, &abl))?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            write_csv(&out.join("ablation.csv"), &rows)?;
            manifest.add_output(&out.join("ablation.csv"))?;
            for r in rows.iter().filter(|r| r.agg == 0) {
                println!("n_l={:<3} {:?} nmse {:.6}", r.n_l, r.status, r.nmse);
            }
            set_param(manifest, "ablation", &abl)?;
            set_param(manifest, "warnings", &warnings)?;
            manifest.seeds = (0..abl.chains as u64).map(|c| abl.seed_base + c).collect();
        }
        Command::Metrics { recon, reference } => {
            let x = read_cfl(&cfl_base(recon), Domain::Image)?;
            let r = read_cfl(&cfl_base(reference), Domain::Image)?;
            manifest.add_input(&cfl_file(recon))?;
            manifest.add_input(&cfl_file(reference))?;
            let m = metrics(&x, &r)?;
            write_metrics(&out, &m)?;
            set_param(manifest, "metrics", m)?;
            println!("nmse {:.6}  psnr {:.3} dB  ssim {:.4}", m.nmse, m.psnr, m.ssim);
        }
        Command::Timing { steps_list, repeats, data, model } => {
            let runs = with_testbed(&cfg, data.as_deref(), model, false, |tb| {
                let spec = cfg.spec(default_nl(tb.problem().mu.acs_lines()));
                time_reconstructions(tb, &spec, &cfg.sampler, steps_list, *repeats)
            })?;
            let rows = timing_report(&runs);
            write_csv(&out.join("timing.csv"), &rows)?;
            for r in &rows {
                match r.ratio {
                    Some(q) => println!("{:<14} {:>10.1} ms  ratio {q:.2}", r.label, r.wall_ms),
                    None => println!("{:<14} {:>10.1} ms", r.label, r.wall_ms),
                }
            }
            set_param(manifest, "steps", steps_list)?;
            set_param(manifest, "timing", &rows)?;
        }
    }
    set_param(manifest, "config", &cfg)?;
    log::info!("{} outputs recorded", manifest.outputs.len());
    manifest.write(&out)
}

fn with_testbed<T>(
    cfg: &RunConfig,
    data: Option<&Path>,
    models: &[PathBuf],
    ablation: bool,
    f: impl FnOnce(&dyn Testbed) -> Result<T>,
) -> Result<T> {
    match data {
        Some(dir) => {
            let tb = DataTestbed {
                data: Dataset::read(dir)?,
                models: models.iter().map(|m| Model::load(m)).collect::<Result<_>>()?,
            };
            f(&tb)
        }
        None => {
            let default = if ablation { TestbedConfig::ablation() } else { TestbedConfig::default() };
            let tb = GaussianTestbed::new(cfg.testbed.clone().unwrap_or(default))?;
            f(&tb)
        }
    }
}

fn write_metrics(out: &Path, m: &hfsdiff::bench::MetricsReport) -> Result<()> {
    let path = out.join("metrics.json");
    fs::write(&path, serde_json::to_string_pretty(m)?).map_err(|e| io_error(&path, e))
}

fn cfl_base(p: &Path) -> PathBuf {
    if p.extension().is_some_and(|e| e == "cfl" || e == "hdr") {
        p.with_extension("")
    } else {
        p.to_path_buf()
    }
}

fn cfl_file(p: &Path) -> PathBuf {
    cfl_base(p).with_extension("cfl")
}
