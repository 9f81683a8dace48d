use std::collections::BTreeMap;

use hfsdiff::acquisition::{
    acquire, complex_std, make_csm, make_phantom, make_undersampling_mask, MaskKind, PhantomKind,
};
use hfsdiff::field::{apply_fh, multicoil_fh, multicoil_fl, Axis, FrequencyMask, RngStream, SamplingMask};

fn uniform(factor: f64, acs: usize, shape: (usize, usize)) -> SamplingMask {
    let mut rng = RngStream::new(0, 0);
    make_undersampling_mask(MaskKind::Uniform, factor, acs, Axis::Rows, shape, &mut rng).unwrap()
}

#[test]
fn uniform_mask_counts_follow_set_arithmetic() {
    for (factor, acs, lines, accel) in [(10, 24, 54, 5.93), (12, 22, 47, 6.81)] {
        let m = uniform(factor as f64, acs, (320, 8));
        let regular: Vec<usize> = (0..320).filter(|i| i % factor == factor / 2).collect();
        let block: Vec<usize> = (160 - acs / 2..160 + acs / 2).collect();
        let union: std::collections::BTreeSet<usize> = regular.into_iter().chain(block.iter().copied()).collect();
        assert_eq!(m.sampled_lines(), &union);
        assert_eq!(m.sampled_lines().len(), lines);
        assert_eq!(m.acceleration(), 320.0 / lines as f64);
        assert!((m.acceleration() - accel).abs() < 5e-3);
        assert!(block.iter().all(|l| m.sampled_lines().contains(l)));
    }
}

#[test]
fn flat_regions_have_large_constant_areas() {
    let p = make_phantom(PhantomKind::FlatRegions, 64, 64, &mut RngStream::new(1, 0)).unwrap();
    let mut histogram: BTreeMap<u64, usize> = BTreeMap::new();
    for v in p.image.data() {
        *histogram.entry(v.re.to_bits()).or_default() += 1;
        assert_eq!(v.im, 0.0);
    }
    let large = histogram.values().filter(|&&n| n * 5 >= 64 * 64).count();
    assert!(large >= 2, "{histogram:?}");
}

#[test]
fn lowfreq_phantom_has_no_high_band() {
    let p =
        make_phantom(PhantomKind::LowfreqOnly { n_l: 4, axis: Axis::Rows }, 16, 16, &mut RngStream::new(2, 0)).unwrap();
    let m = FrequencyMask::new(4, Axis::Rows, (16, 16)).unwrap();
    assert!(apply_fh(&p.image, &m).unwrap().norm() <= 1e-12 * p.image.norm());
    assert!((complex_std(&p.image) - 1.0).abs() <= 1e-10);
}

#[test]
fn every_phantom_is_deterministic_and_normalized() {
    for kind in [
        PhantomKind::SheppLogan,
        PhantomKind::GaussianBlobs,
        PhantomKind::LowfreqOnly { n_l: 6, axis: Axis::Cols },
        PhantomKind::FlatRegions,
    ] {
        let a = make_phantom(kind, 24, 20, &mut RngStream::new(3, 0)).unwrap();
        let b = make_phantom(kind, 24, 20, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(a.image, b.image);
        assert!((complex_std(&a.image) - 1.0).abs() <= 1e-10, "{kind}");
    }
}

#[test]
fn coil_maps_keep_the_multicoil_partition() {
    let csm = make_csm(4, 16, 16).unwrap();
    assert!(csm.sos_deviation() <= 1e-10);
    let m = FrequencyMask::new(4, Axis::Rows, (16, 16)).unwrap();
    let x = RngStream::new(4, 0).normal_field(16, 16, hfsdiff::field::Domain::Image);
    let s = multicoil_fh(&x, &csm, &m).unwrap().add(&multicoil_fl(&x, &csm, &m).unwrap());
    assert!(s.distance(&x) <= 1e-12 * x.norm());
}

#[test]
fn noise_has_the_requested_spread() {
    let x = make_phantom(PhantomKind::SheppLogan, 16, 16, &mut RngStream::new(5, 0)).unwrap().image;
    let csm = make_csm(1, 16, 16).unwrap();
    let mu = uniform(4.0, 4, (16, 16));
    let clean = acquire(&x, &csm, &mu, 0.0, &mut RngStream::new(6, 0)).unwrap();
    let (r, c) = (8, 3);
    assert!(mu.is_sampled(r, c));
    let mut rng = RngStream::new(7, 0);
    let reps = 10_000;
    let (mut re, mut im) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    for _ in 0..reps {
        let y = acquire(&x, &csm, &mu, 0.1, &mut rng).unwrap();
        let e = y.coils()[0].get(r, c) - clean.coils()[0].get(r, c);
        re.push(e.re);
        im.push(e.im);
        assert_eq!(y.coils()[0].get(1, c).norm(), 0.0);
    }
    for v in [re, im] {
        let mean = v.iter().sum::<f64>() / reps as f64;
        let sd = (v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((sd - 0.1).abs() <= 0.003, "{sd}");
    }
}

#[test]
fn noiseless_acquisition_is_linear() {
    let mut rng = RngStream::new(8, 0);
    let x = rng.normal_field(16, 12, hfsdiff::field::Domain::Image);
    let z = rng.normal_field(16, 12, hfsdiff::field::Domain::Image);
    let csm = make_csm(3, 16, 12).unwrap();
    let mu = make_undersampling_mask(MaskKind::GaussianDensity, 3.0, 4, Axis::Rows, (16, 12), &mut rng).unwrap();
    let (a, b) = (0.7, -1.9);
    let mut comb = x.scaled(a);
    comb.axpy(b, &z);
    let lhs = acquire(&comb, &csm, &mu, 0.0, &mut rng).unwrap();
    let rhs = acquire(&x, &csm, &mu, 0.0, &mut rng)
        .unwrap()
        .scaled(a)
        .add(&acquire(&z, &csm, &mu, 0.0, &mut rng).unwrap().scaled(b));
    assert!(lhs.sub(&rhs).norm_sqr().sqrt() <= 1e-12 * rhs.norm_sqr().sqrt());
}

#[test]
fn gaussian_density_masks_are_reproducible() {
    let a =
        make_undersampling_mask(MaskKind::GaussianDensity, 6.0, 24, Axis::Rows, (320, 8), &mut RngStream::new(9, 0))
            .unwrap();
    let b =
        make_undersampling_mask(MaskKind::GaussianDensity, 6.0, 24, Axis::Rows, (320, 8), &mut RngStream::new(9, 0))
            .unwrap();
    assert_eq!(a.sampled_lines(), b.sampled_lines());
    assert_eq!(a.sampled_lines().len(), 54);
    assert!((148..172).all(|l| a.sampled_lines().contains(&l)));
}
