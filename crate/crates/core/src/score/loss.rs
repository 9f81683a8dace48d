use super::ScoreModel;
use crate::diffusion::{kernel_coeffs, perturb_with_noise, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{apply_fh, ComplexField};

/// Denoising score-matching loss of one `(x0, t, z)` draw:
/// `‖F_h z + √v(t)·F_h s(x(t), t)‖²` with `x(t)` the perturbation of `x0`
/// by `z`. Full-space variants have `F_h = I`. Zero exactly when
/// `s = −F_h z/√v`.
pub fn dsm_loss(
    model: &dyn ScoreModel,
    x0: &ComplexField,
    t: f64,
    z: &ComplexField,
    spec: &DiffusionSpec,
) -> Result<f64> {
    let v = kernel_coeffs(spec, t)?.v;
    if v <= 0.0 {
        return Err(Error::DegenerateTime(t));
    }
    let m = spec.freq_mask(x0.shape())?;
    let xt = perturb_with_noise(x0, t, spec, z)?;
    let s = model.score(&xt, t)?;
    s.require_shape(x0.shape())?;
    let mut r = apply_fh(z, &m)?;
    r.axpy(v.sqrt(), &apply_fh(&s, &m)?);
    Ok(r.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Variant;
    use crate::field::{Domain, RngStream};

    #[test]
    fn zero_model_leaves_the_noise_term() {
        let spec = DiffusionSpec::new(Variant::HfsVp, 4);
        let mut rng = RngStream::new(2, 0);
        let x0 = rng.normal_field(8, 8, Domain::Image);
        let z = rng.normal_field(8, 8, Domain::Image);
        let zero = |x: &ComplexField, _t: f64| Ok(ComplexField::zeros(x.rows(), x.cols(), Domain::Image));
        let loss = dsm_loss(&zero, &x0, 0.5, &z, &spec).unwrap();
        let m = spec.freq_mask((8, 8)).unwrap();
        let expect = apply_fh(&z, &m).unwrap().norm_sqr();
        assert!((loss - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn zero_time_is_degenerate() {
        let spec = DiffusionSpec::new(Variant::Vp, 0);
        let x0 = ComplexField::zeros(4, 4, Domain::Image);
        let zero = |x: &ComplexField, _t: f64| Ok(x.clone());
        assert!(matches!(dsm_loss(&zero, &x0, 0.0, &x0, &spec), Err(Error::DegenerateTime(_))));
    }
}
