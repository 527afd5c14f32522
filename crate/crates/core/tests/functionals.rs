use num_complex::Complex;
use sewkit::control::Partition;
use sewkit::fbm::{FbmParams, FbmSampler};
use sewkit::functionals::{functional_riemann, germ_value, ProfileKind, ProfileSpec};
use sewkit::spectral::GridSpec;

// A_{s,t} - A_{s,u} is F_s-measurable and E_s A_{u,t} must equal it.
#[test]
fn germ_defect_has_zero_conditional_mean() {
    let h = 0.3;
    let sampler = FbmSampler::new(FbmParams::new(h, 1, 1.0, 64)).unwrap();
    let base = sampler.sample(1);
    let spec = GridSpec::new(1, 6.0, 64).unwrap();
    let prof = ProfileSpec::new(ProfileKind::PlaneWave { k: [2, 0] }).build(spec).unwrap();
    let (s, u, t) = (0.25, 0.5, 1.0);
    let target = germ_value(&prof, &base, s, t, 1).unwrap().combine(1.0, &germ_value(&prof, &base, s, u, 1).unwrap(), -1.0).unwrap();
    let trials = 4000;
    let mut mean = vec![Complex::new(0.0, 0.0); spec.n];
    let mut sq = vec![0.0; spec.n];
    for k in 0..trials {
        let p = sampler.resample_after(&base, s, 1000 + k).unwrap();
        let a = germ_value(&prof, &p, u, t, 1).unwrap();
        for (i, z) in a.values().iter().enumerate() {
            mean[i] += z / trials as f64;
            sq[i] += z.norm_sqr() / trials as f64;
        }
    }
    for i in (0..spec.n).step_by(7) {
        let se = ((sq[i] - mean[i].norm_sqr()) / trials as f64).sqrt();
        let err = (mean[i] - target.values()[i]).norm();
        assert!(err < 4.0 * se + 1e-12, "node {i}: {err} vs se {se}");
    }
}

#[test]
fn riemann_sum_over_concatenation_adds() {
    let sampler = FbmSampler::new(FbmParams::new(0.6, 1, 1.0, 128)).unwrap();
    let p = sampler.sample(4);
    let prof = ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.4, center: [0.2, 0.0] }).build(GridSpec::new(1, 5.0, 128).unwrap()).unwrap();
    let a = Partition::uniform(0.0, 0.375, 3).unwrap();
    let b = Partition::uniform(0.375, 1.0, 5).unwrap();
    let whole = functional_riemann(&prof, &p, &a.concat(&b).unwrap(), 1).unwrap();
    let parts = functional_riemann(&prof, &p, &a, 1).unwrap().combine(1.0, &functional_riemann(&prof, &p, &b, 1).unwrap(), 1.0).unwrap();
    assert!(whole.combine(1.0, &parts, -1.0).unwrap().lp_norm(f64::INFINITY) < 1e-12);
}
