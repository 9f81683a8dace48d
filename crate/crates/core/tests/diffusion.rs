use num_complex::Complex64;
use rayon::prelude::*;

use hfsdiff::diffusion::{forward_chain, kernel_coeffs, perturb, DiffusionSpec, Schedule, Variant};
use hfsdiff::field::{apply_fl, fft2_centered, ComplexField, Domain, FrequencyMask, RngStream};

/// Per-mode sample mean and per-component variance of the k-space of `draws`.
fn mode_stats(draws: &[ComplexField]) -> (Vec<Complex64>, Vec<f64>) {
    let n = draws.len() as f64;
    let ks: Vec<ComplexField> = draws.iter().map(|x| fft2_centered(x).unwrap()).collect();
    let len = ks[0].len();
    let mean: Vec<Complex64> = (0..len).map(|p| ks.iter().map(|k| k.data()[p]).sum::<Complex64>() / n).collect();
    let var = (0..len)
        .map(|p| ks.iter().map(|k| (k.data()[p] - mean[p]).norm_sqr()).sum::<f64>() / (2.0 * (n - 1.0)))
        .collect();
    (mean, var)
}

/// Checks per-mode means within `4` standard errors and variances within 5%
/// against the closed-form kernel at `t`.
fn check_against_kernel(draws: &[ComplexField], x0: &ComplexField, spec: &DiffusionSpec, t: f64) {
    let kc = kernel_coeffs(spec, t).unwrap();
    let m = spec.freq_mask(x0.shape()).unwrap();
    let k0 = fft2_centered(x0).unwrap();
    let (mean, var) = mode_stats(draws);
    let cols = x0.cols();
    let n = draws.len() as f64;
    for p in 0..k0.len() {
        let low = m.is_low(p / cols, p % cols);
        let (mu, v) = if low { (k0.data()[p], 0.0) } else { (k0.data()[p] * kc.a, kc.v) };
        if low {
            assert!((mean[p] - mu).norm() <= 1e-12 * k0.norm());
            assert!(var[p] <= 1e-24 * k0.norm_sqr());
            continue;
        }
        let se = (v / n).sqrt();
        assert!((mean[p].re - mu.re).abs() <= 4.0 * se, "mode {p}: mean {} vs {}", mean[p], mu);
        assert!((mean[p].im - mu.im).abs() <= 4.0 * se, "mode {p}: mean {} vs {}", mean[p], mu);
        assert!((var[p] - v).abs() <= 0.05 * v, "mode {p}: variance {} vs {v}", var[p]);
    }
}

#[test]
fn documented_kernel_values() {
    let kc = kernel_coeffs(&DiffusionSpec::new(Variant::HfsVp, 4), 1.0).unwrap();
    assert!((kc.a - (-5.025f64).exp()).abs() <= 1e-15);
    assert!((kc.a - 6.571_586e-3).abs() < 5e-10);
    assert!((kc.v - 0.9999568).abs() < 5e-8);
    let ve = kernel_coeffs(&DiffusionSpec::new(Variant::Ve, 0), 1.0).unwrap();
    assert!((ve.v - 121_103.99).abs() < 1e-6);
    assert_eq!(ve.a, 1.0);
}

#[test]
fn perturbation_samples_match_the_kernel() {
    let spec = DiffusionSpec::new(Variant::HfsVp, 4);
    let x0 = RngStream::new(1, 0).normal_field(16, 16, Domain::Image);
    let draws: Vec<ComplexField> =
        (0..20_000u64).into_par_iter().map(|i| perturb(&x0, 0.5, &spec, &mut RngStream::new(2, i)).unwrap()).collect();
    check_against_kernel(&draws, &x0, &spec, 0.5);
}

#[test]
fn discrete_chain_approaches_the_kernel() {
    let spec = DiffusionSpec::new(Variant::HfsVp, 4);
    let x0 = RngStream::new(3, 0).normal_field(16, 16, Domain::Image);
    let n = spec.schedule.n;
    assert_eq!(n, 1000);
    let draws: Vec<ComplexField> = (0..20_000u64)
        .into_par_iter()
        .map(|i| forward_chain(&x0, &spec, n, &mut RngStream::new(4, i)).unwrap())
        .collect();
    check_against_kernel(&draws, &x0, &spec, 1.0);
}

#[test]
fn zero_width_band_degenerates_to_vp() {
    let mut rng = RngStream::new(5, 0);
    let hfs = DiffusionSpec::new(Variant::HfsVp, 0);
    let vp = DiffusionSpec::new(Variant::Vp, 0);
    for _ in 0..100 {
        let t = rng.uniform();
        let (a, b) = (kernel_coeffs(&hfs, t).unwrap(), kernel_coeffs(&vp, t).unwrap());
        assert_eq!(a.a.to_bits(), b.a.to_bits());
        assert_eq!(a.v.to_bits(), b.v.to_bits());
    }
}

#[test]
fn vp_family_preserves_variance_and_is_monotone() {
    for variant in [Variant::Vp, Variant::HfsVp] {
        let spec = DiffusionSpec::new(variant, 2);
        let mut last = kernel_coeffs(&spec, 0.0).unwrap();
        assert_eq!((last.a, last.v), (1.0, 0.0));
        for i in 1..=1000 {
            let kc = kernel_coeffs(&spec, i as f64 / 1000.0).unwrap();
            assert!(kc.a < last.a && kc.v > last.v && kc.v < 1.0);
            assert!(kc.a * kc.a + kc.v <= 1.0 + 1e-12);
            last = kc;
        }
    }
}

#[test]
fn low_band_is_invariant_under_the_forward_process() {
    let x0 = RngStream::new(6, 0).normal_field(12, 10, Domain::Image);
    for variant in [Variant::HfsVp, Variant::HfsVe] {
        let spec = DiffusionSpec::new(variant, 4);
        let m = spec.freq_mask((12, 10)).unwrap();
        let want = apply_fl(&x0, &m).unwrap();
        let mut rng = RngStream::new(7, 0);
        let a = perturb(&x0, 0.8, &spec, &mut rng).unwrap();
        let b = forward_chain(&x0, &spec, 500, &mut rng).unwrap();
        for x in [a, b] {
            assert!(apply_fl(&x, &m).unwrap().distance(&want) <= 1e-12 * want.norm());
        }
    }
}

#[test]
fn full_band_chain_is_the_identity() {
    let x0 = RngStream::new(8, 0).normal_field(8, 8, Domain::Image);
    let spec = DiffusionSpec::new(Variant::HfsVp, 8);
    let x = forward_chain(&x0, &spec, 1000, &mut RngStream::new(9, 0)).unwrap();
    assert_eq!(x, x0);
    assert!(FrequencyMask::new(8, spec.axis, (8, 8)).unwrap().is_full());
}

#[test]
fn discretization_matches_the_lazy_schedule() {
    let s = Schedule::default();
    let n = s.n;
    let table: Vec<f64> = (1..=n).map(|i| s.beta((i as f64) / n as f64) / n as f64).collect();
    for (i, b) in table.iter().enumerate() {
        assert!((s.beta_discrete(i + 1, n) - b).abs() <= 1e-14);
    }
    assert!((table[0] - 1.199e-4).abs() < 1e-15);
    assert!((table[n - 1] - 0.02).abs() < 1e-15);
}
