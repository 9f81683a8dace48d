use serde::{Deserialize, Serialize};

use super::net::{Architecture, DenoiserNet, TIME_FLOOR};
use crate::diffusion::{perturb_with_noise, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{apply_fh, ComplexField, Domain, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub ema_rate: f64,
    /// Training times are drawn uniformly from `[time_floor, 1]`.
    pub time_floor: f64,
    pub seed: u64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            iterations: 2000,
            batch_size: 4,
            ema_rate: 0.995,
            time_floor: TIME_FLOOR,
            seed: 0,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("iterations and batch size must be at least 1".into()));
        }
        if !(self.time_floor > 0.0 && self.time_floor < 1.0) {
            return Err(Error::Parameter(format!("time floor {} outside (0, 1)", self.time_floor)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!("learning rate {}", self.learning_rate)));
        }
        self.arch.validate()
    }
}

/// Mean batch loss of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of every iteration.
    pub history: Vec<LossTerms>,
    /// Mean loss over the first window of iterations.
    pub initial_running_loss: f64,
    /// Mean loss over the last window of iterations.
    pub final_running_loss: f64,
    pub window: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a [`DenoiserNet`] on the mean score-matching loss with Adam and
/// returns it with its EMA parameters. The batch order, training times and
/// noise all come from one stream seeded by `cfg.seed`, so reruns are
/// bit-identical.
pub fn train_denoiser(
    dataset: &[ComplexField],
    spec: &DiffusionSpec,
    cfg: &TrainConfig,
) -> Result<(DenoiserNet, TrainReport)> {
    cfg.validate()?;
    let first = dataset.first().ok_or_else(|| Error::Parameter("training set is empty".into()))?;
    let shape = first.shape();
    for x in dataset {
        x.require_shape(shape)?;
        if x.domain() != Domain::Image {
            return Err(Error::Domain { expected: "image", found: x.domain().name() });
        }
    }
    let m = spec.freq_mask(shape)?;
    let mut net = DenoiserNet::new(cfg.arch, *spec, cfg.ema_rate, cfg.seed)?;
    let mut adam = Adam::new(net.param_count());
    let mut rng = RngStream::new(cfg.seed, 2);
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut grad = vec![0.0; net.param_count()];

    for it in 0..cfg.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let x0 = &dataset[rng.index(dataset.len())];
            let t = cfg.time_floor + (1.0 - cfg.time_floor) * rng.uniform();
            let z = rng.normal_field(shape.0, shape.1, Domain::Image);
            let xt = perturb_with_noise(x0, t, spec, &z)?;
            let target = apply_fh(&z, &m)?;
            loss += net.loss_grad(&net.params, &xt, t, &target, &m, Some(&mut grad))?;
        }
        let b = cfg.batch_size as f64;
        loss /= b;
        grad.iter_mut().for_each(|g| *g /= b);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training { iteration: it, loss });
        }
        adam.step(&mut net.params, &grad, cfg.learning_rate);
        net.update_ema();
        history.push(LossTerms { iteration: it, loss });
        if it % 100 == 0 {
            log::debug!("iteration {it}: loss {loss:.4}");
        }
    }

    let window = (cfg.iterations / 20).max(1);
    let mean = |s: &[LossTerms]| s.iter().map(|l| l.loss).sum::<f64>() / s.len() as f64;
    let report = TrainReport {
        initial_running_loss: mean(&history[..window]),
        final_running_loss: mean(&history[history.len() - window..]),
        history,
        window,
    };
    Ok((net, report))
}
