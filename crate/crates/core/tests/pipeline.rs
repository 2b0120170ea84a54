use mriq::model::{Architecture, DenoiseModel};
use mriq::recon::{denoise_image, denoise_region, dl_components};
use mriq::{
    forward_fft, inverse_fft, reconstruct, truncate_kspace, zero_fill, ComplexField, Domain, ReconConfig, Roi, WindowSpec,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn field_from(w: usize, h: usize, domain: Domain, values: &[(f64, f64)]) -> ComplexField {
    ComplexField::from_fn(w, h, domain, |x, y| {
        let (re, im) = values[(y * w + x) % values.len()];
        Complex64::new(re, im)
    })
}

fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.samples().iter().zip(b.samples()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

fn small_model() -> DenoiseModel {
    DenoiseModel::new(Architecture { depth: 3, hidden_channels: 6, ..Default::default() }, 11)
}

fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_roundtrip_and_parseval(w in 1usize..40, h in 1usize..40, v in values()) {
        let x = field_from(w, h, Domain::Image, &v);
        let k = forward_fft(&x).unwrap();
        prop_assert!((k.energy() - x.energy()).abs() <= 1e-9 * x.energy().max(1.0));
        prop_assert!(max_diff(&inverse_fft(&k).unwrap(), &x) < 1e-9);
    }

    #[test]
    fn truncate_undoes_zero_fill(w in 1usize..24, h in 1usize..24, pw in 0usize..9, ph in 0usize..9, v in values()) {
        let k = field_from(w, h, Domain::KSpace, &v);
        let padded = zero_fill(&k, w + pw, h + ph).unwrap();
        prop_assert_eq!(padded.energy(), k.energy());
        prop_assert_eq!(truncate_kspace(&padded, w, h).unwrap(), k);
    }

    #[test]
    fn constant_image_survives_interpolation(w in 2usize..20, h in 2usize..20, scale in 1usize..4, c in -3.0..3.0f64) {
        let k = forward_fft(&ComplexField::from_fn(w, h, Domain::Image, |_, _| Complex64::new(c, 0.0))).unwrap();
        let cfg = ReconConfig::conventional(WindowSpec::Rect).with_output_dims(w * scale, h * scale);
        let img = reconstruct(&k, None, &cfg).unwrap().image;
        prop_assert!(img.samples().iter().all(|s| (s - Complex64::new(c, 0.0)).norm() < 1e-9));
    }

    #[test]
    fn level_is_linear_and_output_is_homogeneous(v in values(), d1 in 0.0..1.0f64, d2 in 0.0..1.0f64, a in 0.1..10.0f64) {
        let model = small_model();
        let k = forward_fft(&field_from(12, 10, Domain::Image, &v)).unwrap();
        let recon = |k: &ComplexField, d: f64| reconstruct(k, Some(&model), &ReconConfig::deep_learning(d)).unwrap().image;
        let noise = dl_components(&k, &model, &ReconConfig::deep_learning(0.0)).unwrap().noise;
        let diff = recon(&k, d1).sub(&recon(&k, d2)).unwrap();
        prop_assert!(max_diff(&diff, &noise.scale(d2 - d1)) < 1e-9);
        let scaled = recon(&k.scale(a), d1);
        let tol = 1e-4 * (1.0 + a * recon(&k, d1).samples().iter().map(|s| s.norm()).fold(0.0, f64::max));
        prop_assert!(max_diff(&scaled, &recon(&k, d1).scale(a)) < tol);
    }
}

#[test]
fn region_denoising_matches_full_frame_crop() {
    let model = small_model();
    let img = field_from(40, 36, Domain::Image, &[(1.0, 0.2), (-0.4, 0.3), (2.5, -1.0), (0.0, 0.7), (0.9, 0.1)]);
    let full = denoise_image(&img, &model, 0.6).unwrap();
    for roi in [Roi::new(10, 8, 12, 12), Roi::new(0, 0, 8, 8), Roi::new(30, 26, 10, 10)] {
        let region = denoise_region(&img, &model, 0.6, roi).unwrap();
        let crop = full.crop(roi.x, roi.y, roi.width, roi.height).unwrap();
        assert!(max_diff(&region, &crop) < 1e-5, "{roi:?}");
    }
}

#[test]
fn deep_learning_without_model_is_rejected() {
    let k = forward_fft(&ComplexField::zeros(8, 8, Domain::Image)).unwrap();
    assert!(reconstruct(&k, None, &ReconConfig::deep_learning(0.5)).is_err());
}
