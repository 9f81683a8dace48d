use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use hfsdiff::acquisition::{acquire, make_phantom, PhantomKind};
use hfsdiff::diffusion::{kernel_coeffs, DiffusionSpec, Variant};
use hfsdiff::field::{apply_fl, Axis, CoilKSpace, CoilSet, ComplexField, Domain, RngStream, SamplingMask};
use hfsdiff::sampler::{reconstruct, Problem, Sampler, SamplerConfig};
use hfsdiff::score::{GaussianPrior, GaussianScore, ScoreModel};
use hfsdiff::Error;

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

const N: usize = 4;
/// Predictor steps of the toy; keeps every α_i = 1 − β_i positive.
const STEPS: usize = 40;

/// Centered unitary 1D DFT: X_k = n^{-1/2} Σ_j x_j exp(-2πi (k-c)(j-c)/n), c = n/2.
fn dft(n: usize) -> CMat {
    let c = (n / 2) as f64;
    CMat::from_fn(n, n, |k, j| {
        let phase = -2.0 * std::f64::consts::PI * (k as f64 - c) * (j as f64 - c) / n as f64;
        Complex64::from_polar(1.0 / (n as f64).sqrt(), phase)
    })
}

/// 2D transform on row-major vectors: F_rows ⊗ F_cols.
fn dft2(rows: usize, cols: usize) -> CMat {
    dft(rows).kronecker(&dft(cols))
}

fn vec_of(x: &ComplexField) -> CVec {
    CVec::from_column_slice(x.data())
}

fn diag(w: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(w.len(), w.iter().map(|v| Complex64::new(*v, 0.0))))
}

fn rel(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm()
}

struct Toy {
    truth: ComplexField,
    prior: GaussianPrior,
    csm: CoilSet,
    mu: SamplingMask,
    y: CoilKSpace,
}

fn toy() -> Toy {
    let mut rng = RngStream::new(5, 0);
    let truth = rng.normal_field(N, N, Domain::Image);
    let means: Vec<Complex64> = (0..N * N).map(|_| rng.complex_normal() * 0.3).collect();
    let vars: Vec<f64> = (0..N * N).map(|p| 0.2 + 0.1 * (p % 5) as f64).collect();
    let prior = GaussianPrior::new(N, N, means, vars).unwrap();
    let csm = CoilSet::unit(N, N);
    let mu = SamplingMask::new(BTreeSet::from([0, 1, 2]), 2.0, 2, Axis::Rows, (N, N)).unwrap();
    let y = acquire(&truth, &csm, &mu, 0.05, &mut rng).unwrap();
    Toy { truth, prior, csm, mu, y }
}

impl Toy {
    fn problem(&self) -> Problem<'_> {
        Problem { y: &self.y, csm: &self.csm, mu: &self.mu }
    }
}

/// Dense pieces of one update for a single unit coil.
struct Dense {
    f: CMat,
    fh: CMat,
    mu: CMat,
    y: CVec,
}

impl Dense {
    fn new(toy: &Toy, spec: &DiffusionSpec) -> Self {
        let f = dft2(N, N);
        let m = spec.freq_mask((N, N)).unwrap();
        let high: Vec<f64> = (0..N * N).map(|p| if m.is_low(p / N, p % N) { 0.0 } else { 1.0 }).collect();
        let fh = f.adjoint() * diag(&high) * &f;
        let mu = diag(&toy.mu.weights());
        Self { f, fh, mu, y: vec_of(&toy.y.coils()[0]) }
    }

    /// F_h-projected prior score in matrix form.
    fn score(&self, toy: &Toy, spec: &DiffusionSpec, x: &CVec, t: f64) -> CVec {
        let kc = kernel_coeffs(spec, t).unwrap();
        let m = spec.freq_mask((N, N)).unwrap();
        let fx = &self.f * x;
        let k = CVec::from_fn(N * N, |p, _| {
            if m.is_low(p / N, p % N) {
                Complex64::new(0.0, 0.0)
            } else {
                let var = kc.a * kc.a * toy.prior.vars()[p] + kc.v;
                -(fx[p] - toy.prior.means()[p] * kc.a) / var
            }
        });
        &self.fh * (self.f.adjoint() * k)
    }

    fn big_g(&self, x: &CVec) -> CVec {
        self.f.adjoint() * (&self.mu * (&self.f * x) - &self.y)
    }
}

#[test]
fn predictor_matches_dense_evaluation() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: STEPS, lambda1: 0.7, ..Default::default() };
    let sampler = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
    let mut rng = RngStream::new(9, 4);
    let x = rng.normal_field(N, N, Domain::Image);
    let z = rng.normal_field(N, N, Domain::Image);
    let j = 27;
    let (got, row) = sampler.predictor_update(&x, j, &z).unwrap();

    let d = Dense::new(&toy, &spec);
    let (xv, zv) = (vec_of(&x), vec_of(&z));
    let t = j as f64 / STEPS as f64;
    let beta = (0.1 + t * (20.0 - 0.1)) / STEPS as f64;
    let g = d.score(&toy, &spec, &xv, t);
    let gg = d.big_g(&xv);
    let eps = 0.7 * g.norm() / gg.norm();
    let c = |v: f64| Complex64::new(v, 0.0);
    let want = &xv + &d.fh * &xv * c(0.5 * beta) + (&g - &gg * c(eps)) * c(beta) + &d.fh * &zv * c(beta.sqrt());
    assert!(rel(&vec_of(&got), &want) < 1e-12);
    assert!((row.norm_g - g.norm()).abs() < 1e-12 * g.norm());
    assert!((row.norm_big_g - gg.norm()).abs() < 1e-12 * gg.norm());
    assert_eq!(row.i, j - 1);
}

#[test]
fn corrector_matches_dense_evaluation() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: STEPS, lambda2: 1.3, snr: 0.2, ..Default::default() };
    let sampler = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
    let mut rng = RngStream::new(10, 4);
    let x = rng.normal_field(N, N, Domain::Image);
    let z = rng.normal_field(N, N, Domain::Image);
    let i = 31;
    let (got, _, floored) = sampler.corrector_update(&x, i, 1, &z).unwrap();
    assert!(!floored);

    let d = Dense::new(&toy, &spec);
    let (xv, zv) = (vec_of(&x), vec_of(&z));
    let t = i as f64 / STEPS as f64;
    let alpha = 1.0 - (0.1 + t * (20.0 - 0.1)) / STEPS as f64;
    let g = d.score(&toy, &spec, &xv, t);
    let gg = d.big_g(&xv);
    let eps1 = 2.0 * alpha * (0.2 * zv.norm() / g.norm()).powi(2);
    let eps2 = g.norm() / (1.3 * gg.norm());
    let c = |v: f64| Complex64::new(v, 0.0);
    let want = &xv + (&g - &gg * c(eps2)) * c(eps1) + &d.fh * &zv * c((2.0 * eps1).sqrt());
    assert!(rel(&vec_of(&got), &want) < 1e-12);
}

#[test]
fn ve_predictor_uses_variance_increments() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVe, 2);
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: 10, dc: false, ..Default::default() };
    let sampler = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
    let mut rng = RngStream::new(11, 0);
    let x = rng.normal_field(N, N, Domain::Image).scaled(50.0);
    let z = rng.normal_field(N, N, Domain::Image);
    let (got, _) = sampler.predictor_update(&x, 5, &z).unwrap();

    let d = Dense::new(&toy, &spec);
    let (xv, zv) = (vec_of(&x), vec_of(&z));
    let sigma = |t: f64| 0.1 * (348.0f64 / 0.1).powf(t);
    let ds2 = sigma(0.5).powi(2) - sigma(0.4).powi(2);
    let g = d.score(&toy, &spec, &xv, 0.5);
    let c = |v: f64| Complex64::new(v, 0.0);
    let want = &xv + &g * c(ds2) + &d.fh * &zv * c(ds2.sqrt());
    assert!(rel(&vec_of(&got), &want) < 1e-12);
}

#[test]
fn zero_sized_hfs_band_reproduces_vp_steps_bitwise() {
    let toy = toy();
    let hfs = DiffusionSpec::new(Variant::HfsVp, 0);
    let vp = DiffusionSpec::new(Variant::Vp, 0);
    let (mh, mv) = (GaussianScore::new(toy.prior.clone(), hfs), GaussianScore::new(toy.prior.clone(), vp));
    let cfg = SamplerConfig { steps: 20, ..Default::default() };
    let sh = Sampler::new(toy.problem(), &mh, hfs, cfg).unwrap();
    let sv = Sampler::new(toy.problem(), &mv, vp, cfg).unwrap();
    let mut rng = RngStream::new(3, 0);
    let x = rng.normal_field(N, N, Domain::Image);
    let z = rng.normal_field(N, N, Domain::Image);
    assert_eq!(sh.predictor_update(&x, 13, &z).unwrap().0, sv.predictor_update(&x, 13, &z).unwrap().0);
    assert_eq!(sh.corrector_update(&x, 13, 1, &z).unwrap().0, sv.corrector_update(&x, 13, 1, &z).unwrap().0);
    let a = reconstruct(toy.problem(), &mh, &hfs, &cfg).unwrap();
    let b = reconstruct(toy.problem(), &mv, &vp, &cfg).unwrap();
    assert_eq!(a.recon, b.recon);
}

#[test]
fn low_band_is_frozen_without_data_consistency() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let m = spec.freq_mask((N, N)).unwrap();
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: 50, correctors: 2, dc: false, seed: 4, ..Default::default() };
    let sampler = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
    let mut state = sampler.init_state().unwrap();
    let low0 = apply_fl(&state.x, &m).unwrap();
    while state.i > 0 {
        sampler.predictor_step(&mut state).unwrap();
        for _ in 0..2 {
            sampler.corrector_step(&mut state).unwrap();
            assert!(apply_fl(&state.x, &m).unwrap().distance(&low0) <= 1e-12 * low0.norm());
        }
    }
    let report = sampler.run().unwrap();
    assert!(apply_fl(&report.recon, &m).unwrap().distance(&low0) <= 1e-10 * low0.norm());
}

#[test]
fn corrector_drift_scales_inversely_with_the_score() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let base = GaussianScore::new(toy.prior.clone(), spec);
    let c = 3.0;
    let scaled = move |x: &ComplexField, t: f64| base.score(x, t).map(|s| s.scaled(c));
    let base = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: STEPS, dc: false, ..Default::default() };
    let s1 = Sampler::new(toy.problem(), &base, spec, cfg).unwrap();
    let sc = Sampler::new(toy.problem(), &scaled, spec, cfg).unwrap();
    let mut rng = RngStream::new(12, 0);
    let x = rng.normal_field(N, N, Domain::Image);
    let z = rng.normal_field(N, N, Domain::Image);
    let minus_z = z.scaled(-1.0);
    // Averaging the ±z updates cancels the noise and leaves x + ε1·g.
    let drift = |s: &Sampler| {
        let a = s.corrector_update(&x, 6, 1, &z).unwrap().0;
        let b = s.corrector_update(&x, 6, 1, &minus_z).unwrap().0;
        a.add(&b).scaled(0.5).sub(&x)
    };
    let (d1, dc) = (drift(&s1), drift(&sc));
    assert!(dc.distance(&d1.scaled(1.0 / c)) <= 1e-12 * d1.norm());
}

#[test]
fn trace_length_and_determinism() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let cfg = SamplerConfig { steps: 30, correctors: 2, seed: 77, ..Default::default() };
    let a = Sampler::new(toy.problem(), &model, spec, cfg).unwrap().with_reference(&toy.truth).run().unwrap();
    let b = Sampler::new(toy.problem(), &model, spec, cfg).unwrap().with_reference(&toy.truth).run().unwrap();
    assert_eq!(a.trace.len(), 30 * 3);
    assert_eq!(a.recon, b.recon);
    assert_eq!(a.trace, b.trace);
    assert!(a.trace.iter().all(|r| r.nmse.is_some()));
    let indices: Vec<usize> = a.trace.iter().filter(|r| r.k == 0).map(|r| r.i).collect();
    assert_eq!(indices, (0..30).rev().collect::<Vec<_>>());
}

#[test]
fn init_noise_lives_in_the_high_band() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let m = spec.freq_mask((N, N)).unwrap();
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let mut low = None;
    for seed in 0..5 {
        let cfg = SamplerConfig { seed, ..Default::default() };
        let s = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
        let mean = s.init_mean().unwrap();
        let x = s.init_state().unwrap().x;
        // Single unit coil: the mean is exactly the zero-filled low band of y.
        let mut k = toy.y.coils()[0].clone();
        for r in 0..N {
            for c in 0..N {
                if !m.is_low(r, c) {
                    k.set(r, c, Complex64::new(0.0, 0.0));
                }
            }
        }
        let zero_filled = hfsdiff::field::ifft2_centered(&k).unwrap();
        assert!(mean.distance(&zero_filled) <= 1e-14 * zero_filled.norm());
        let l = apply_fl(&x, &m).unwrap();
        assert!(l.distance(&zero_filled) <= 1e-12 * zero_filled.norm());
        if let Some(prev) = &low {
            assert!(l.distance(prev) <= 1e-12 * prev.norm());
        }
        low = Some(l);
    }
}

#[test]
fn init_variance_is_one_per_high_component() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let m = spec.freq_mask((N, N)).unwrap();
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let draws = 10_000;
    let mut sum = vec![Complex64::new(0.0, 0.0); N * N];
    let mut sq = vec![(0.0, 0.0); N * N];
    for seed in 0..draws {
        let cfg = SamplerConfig { seed, ..Default::default() };
        let s = Sampler::new(toy.problem(), &model, spec, cfg).unwrap();
        let k = hfsdiff::field::fft2_centered(&s.init_state().unwrap().x).unwrap();
        for (p, v) in k.data().iter().enumerate() {
            sum[p] += v;
            sq[p].0 += v.re * v.re;
            sq[p].1 += v.im * v.im;
        }
    }
    let n = draws as f64;
    for p in 0..N * N {
        if m.is_low(p / N, p % N) {
            continue;
        }
        let mean = sum[p] / n;
        let var_re = sq[p].0 / n - mean.re * mean.re;
        let var_im = sq[p].1 / n - mean.im * mean.im;
        assert!((var_re - 1.0).abs() < 0.05 && (var_im - 1.0).abs() < 0.05, "mode {p}: {var_re} {var_im}");
    }
}

#[test]
fn band_limited_truth_is_recovered_from_its_low_band() {
    let (rows, cols, n_l) = (16, 16, 4);
    let kind = PhantomKind::LowfreqOnly { n_l, axis: Axis::Rows };
    let truth = make_phantom(kind, rows, cols, &mut RngStream::new(21, 0)).unwrap().image;
    let csm = CoilSet::unit(rows, cols);
    let mu = SamplingMask::new((6..10).collect(), 4.0, 4, Axis::Rows, (rows, cols)).unwrap();
    let y = acquire(&truth, &csm, &mu, 0.0, &mut RngStream::new(0, 0)).unwrap();
    let prior =
        GaussianPrior::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols], vec![1e-6; rows * cols]).unwrap();
    let spec = DiffusionSpec::new(Variant::HfsVp, n_l);
    let model = GaussianScore::new(prior, spec);
    let cfg = SamplerConfig { seed: 3, ..Default::default() };
    let r = reconstruct(Problem { y: &y, csm: &csm, mu: &mu }, &model, &spec, &cfg).unwrap();
    let nmse = r.recon.distance(&truth).powi(2) / truth.norm_sqr();
    assert!(nmse <= 1e-3, "nmse {nmse}");
}

#[test]
fn non_finite_scores_report_divergence_with_trace() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let bad = |x: &ComplexField, t: f64| -> hfsdiff::Result<ComplexField> {
        let v = if t < 0.5 { f64::NAN } else { 0.1 };
        Ok(ComplexField::constant(x.rows(), x.cols(), Complex64::new(v, 0.0), Domain::Image))
    };
    let cfg = SamplerConfig { steps: STEPS, ..Default::default() };
    match reconstruct(toy.problem(), &bad, &spec, &cfg) {
        Err(Error::Divergence { step, trace, .. }) => {
            // The corrector at i = 19 is the first evaluation with t < 0.5.
            assert_eq!(step, 19);
            assert_eq!(trace.len(), 42);
            assert_eq!((trace.last().unwrap().i, trace.last().unwrap().k), (19, 1));
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn vanishing_scores_floor_the_corrector_and_warn() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let zero = |x: &ComplexField, _t: f64| -> hfsdiff::Result<ComplexField> {
        Ok(ComplexField::zeros(x.rows(), x.cols(), Domain::Image))
    };
    let cfg = SamplerConfig { steps: STEPS, dc: false, ..Default::default() };
    let r = reconstruct(toy.problem(), &zero, &spec, &cfg).unwrap();
    assert_eq!(r.warnings, STEPS);
    assert!(r.recon.is_finite());
}

#[test]
fn configuration_errors() {
    let toy = toy();
    let spec = DiffusionSpec::new(Variant::HfsVp, 2);
    let model = GaussianScore::new(toy.prior.clone(), spec);
    let too_many = SamplerConfig { steps: 1001, ..Default::default() };
    assert!(matches!(Sampler::new(toy.problem(), &model, spec, too_many), Err(Error::Range(_))));
    let coarse = SamplerConfig { steps: 10, ..Default::default() };
    assert!(matches!(Sampler::new(toy.problem(), &model, spec, coarse), Err(Error::Parameter(_))));
    let coarse_no_corrector = SamplerConfig { steps: 10, correctors: 0, ..Default::default() };
    assert!(Sampler::new(toy.problem(), &model, spec, coarse_no_corrector).is_ok());
    let bad_lambda = SamplerConfig { lambda2: 0.0, ..Default::default() };
    assert!(matches!(Sampler::new(toy.problem(), &model, spec, bad_lambda), Err(Error::Parameter(_))));
    // Lines {0, 1, 2} are acquired; the n_l = 4 band also needs line 3.
    let wide = DiffusionSpec::new(Variant::HfsVp, 4);
    let s = Sampler::new(toy.problem(), &model, wide, SamplerConfig::default()).unwrap();
    assert!(matches!(s.init_state(), Err(Error::Initialization(_))));
    let y0 = CoilKSpace::new(vec![ComplexField::zeros(N, N, Domain::KSpace)]).unwrap();
    let empty = Problem { y: &y0, csm: &toy.csm, mu: &toy.mu };
    let s = Sampler::new(empty, &model, spec, SamplerConfig::default()).unwrap();
    assert!(matches!(s.init_state(), Err(Error::Initialization(_))));
}
