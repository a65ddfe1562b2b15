mod common;

use common::{binomial, c, degrade, fock_quasiprobability, origin_value, random_point, random_s};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phasebell::bell::{Correlator, PhaseSpaceModel};
use phasebell::fock_oracle::{build_state, coherent_amplitudes, number_state, FockCutoff, FockState};
use phasebell::noise::{
    convolution_check, damped_w3, effective_s_damping, effective_s_detection, measured_w3_detection,
    DetectionEfficiency, NoiseModel, ThermalChannel,
};
use phasebell::optimize::random_settings;
use phasebell::states::{w1_marginal, w3, Mode, PhasePoint3, SParameter, StateModel, StateSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Applies photon loss with transmission `eta` to every mode of `rho`.
fn lossy(rho: &FockState, eta: f64) -> FockState {
    let d = rho.dim();
    let modes = rho.modes();
    let mut m = rho.density_matrix();
    for mode in 0..modes {
        let stride = d.pow((modes - 1 - mode) as u32);
        let occ = |idx: usize| (idx / stride) % d;
        let n = m.nrows();
        let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v.norm() == 0.0 {
                    continue;
                }
                let (ni, nj) = (occ(i), occ(j));
                for k in 0..=ni.min(nj) {
                    let amp = (binomial(ni, k) * binomial(nj, k)).sqrt()
                        * eta.powf(0.5 * (ni + nj - 2 * k) as f64)
                        * (1.0 - eta).powi(k as i32);
                    out[(i - k * stride, j - k * stride)] += v * amp;
                }
            }
        }
        m = out;
    }
    FockState::from_density(d, modes, m).unwrap()
}

#[test]
fn origin_identity_for_degraded_photon_statistics() {
    let cutoff = FockCutoff::new(25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut states: Vec<Vec<f64>> = vec![
        number_state(1, cutoff).unwrap().iter().map(|a| a.norm_sqr()).collect(),
        number_state(3, cutoff).unwrap().iter().map(|a| a.norm_sqr()).collect(),
        coherent_amplitudes(c(0.7, 0.3), cutoff).iter().map(|a| a.norm_sqr()).collect(),
    ];
    let raw: Vec<f64> = (0..cutoff.dim()).map(|n| rng.random::<f64>() * 0.5f64.powi(n as i32)).collect();
    let total: f64 = raw.iter().sum();
    states.push(raw.iter().map(|x| x / total).collect());
    for p in &states {
        for _ in 0..10 {
            let s = random_s(&mut rng);
            let eta = rng.random_range(0.05..1.0);
            let lhs = origin_value(&degrade(p, eta), s.value());
            let sp = effective_s_detection(s, eta).unwrap().value();
            let rhs = origin_value(p, sp) / eta;
            assert!((lhs - rhs).abs() < 1e-8, "eta={eta} s={}: {lhs} vs {rhs}", s.value());
        }
    }
    // closed-form single-mode marginal of the W state as the undegraded side
    let spec = StateSpec::SinglePhotonW { p: 1.0 };
    let p = [2.0 / 3.0, 1.0 / 3.0];
    for (s, eta) in [(0.0, 0.9), (-1.0, 0.6), (-0.3, 0.35)] {
        let sp = SParameter::new(s).unwrap();
        let lhs = origin_value(&degrade(&p, eta), s);
        let shifted = effective_s_detection(sp, eta).unwrap();
        let rhs = w1_marginal(spec, Mode::B, c(0.0, 0.0), shifted).unwrap() / eta;
        assert!((lhs - rhs).abs() < 1e-8);
    }
}

#[test]
fn detection_shifts_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let s = random_s(&mut rng);
        let (e1, e2) = (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
        let twice = effective_s_detection(effective_s_detection(s, e1).unwrap(), e2).unwrap().value();
        let once = effective_s_detection(s, e1 * e2).unwrap().value();
        assert!((twice - once).abs() <= 1e-12 * once.abs().max(1.0));
    }
}

#[test]
fn damping_is_a_semigroup() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for spec in [StateSpec::GhzEcs { zeta: 0.8 }, StateSpec::SqueezedVacuum3 { r: 0.4 }, StateSpec::SinglePhotonW { p: 0.7 }] {
        for nbar in [0.0, 0.6] {
            let (g1, g2) = (0.15, 0.35);
            let ch2 = ThermalChannel::new(g2, nbar).unwrap();
            let both = ThermalChannel::new(g1 + g2, nbar).unwrap();
            for _ in 0..20 {
                let s = SParameter::new(-rng.random::<f64>()).unwrap();
                let p = [random_point(&mut rng, 1.5), random_point(&mut rng, 1.5), random_point(&mut rng, 1.5)];
                let direct = damped_w3(spec, PhasePoint3::new(p[0], p[1], p[2]), s, both).unwrap();
                let (s2, t2) = effective_s_damping(s, ch2);
                let inner = PhasePoint3::new(p[0] / t2, p[1] / t2, p[2] / t2);
                let staged = damped_w3(spec, inner, SParameter::new(s2).unwrap(), ThermalChannel::new(g1, nbar).unwrap())
                    .unwrap()
                    / t2.powi(6);
                assert!((direct - staged).abs() < 1e-8, "{spec:?} nbar={nbar}");
            }
        }
    }
}

#[test]
fn ideal_noise_reduces_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let spec = StateSpec::GhzEcs { zeta: 1.1 };
    for _ in 0..50 {
        let s = random_s(&mut rng);
        let p = PhasePoint3::new(random_point(&mut rng, 2.0), random_point(&mut rng, 2.0), random_point(&mut rng, 2.0));
        let ideal = w3(spec, p, s).unwrap();
        let eff = DetectionEfficiency::symmetric(1.0).unwrap();
        assert_eq!(measured_w3_detection(spec, p, s, eff).unwrap(), ideal);
        assert_eq!(damped_w3(spec, p, s, ThermalChannel::new(0.0, 0.4).unwrap()).unwrap(), ideal);
    }
    let s = SParameter::new(-0.7).unwrap();
    let base = PhaseSpaceModel::ideal(spec, s).unwrap();
    let unit = PhaseSpaceModel::new(spec, s, NoiseModel::detection(DetectionEfficiency::symmetric(1.0).unwrap())).unwrap();
    let still = PhaseSpaceModel::new(spec, s, NoiseModel::damping(ThermalChannel::new(0.0, 0.0).unwrap())).unwrap();
    for _ in 0..20 {
        let st = random_settings(&mut rng, 1.0);
        assert_eq!(base.mk(&st), unit.mk(&st));
        assert_eq!(base.mk(&st), still.mk(&st));
    }
}

#[test]
fn noisy_marginals_match_explicit_loss() {
    let eta = 0.7;
    let noise = NoiseModel::detection(DetectionEfficiency::symmetric(eta).unwrap());
    let spec = StateSpec::SinglePhotonW { p: 0.6 };
    let rho = lossy(&build_state(&spec, FockCutoff::for_state(&spec)).unwrap(), eta);
    let model = StateModel::new(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let root = eta.sqrt();
    for _ in 0..20 {
        let s = random_s(&mut rng);
        let p = [random_point(&mut rng, 1.5), random_point(&mut rng, 1.5), random_point(&mut rng, 1.5)];
        // displacement precedes the lossy detector: the lossy state is probed at √η·δ
        let w3m = noise.marginal(&model, &Mode::ALL, s).unwrap().eval(&p);
        let fock = fock_quasiprobability(&rho, &[Some(root * p[0]), Some(root * p[1]), Some(root * p[2])], s);
        assert!((w3m - fock).abs() < 1e-10);
        let w2m = noise.marginal(&model, &[Mode::A, Mode::C], s).unwrap().eval(&[p[0], p[2]]);
        let fock = fock_quasiprobability(&rho, &[Some(root * p[0]), None, Some(root * p[2])], s);
        assert!((w2m - fock).abs() < 1e-10);
        let w1m = noise.marginal(&model, &[Mode::B], s).unwrap().eval(&[p[1]]);
        let fock = fock_quasiprobability(&rho, &[None, Some(root * p[1]), None], s);
        assert!((w1m - fock).abs() < 1e-10);
    }
    // a single ECS mode, where the cutoff is larger
    let ecs = StateSpec::GhzEcs { zeta: 0.9 };
    let single = build_state(&ecs, FockCutoff::for_state(&ecs)).unwrap().partial_trace(2).unwrap().partial_trace(1).unwrap();
    let single = lossy(&single, eta);
    let model = StateModel::new(ecs).unwrap();
    for _ in 0..20 {
        let s = random_s(&mut rng);
        let a = random_point(&mut rng, 1.5);
        let closed = noise.marginal(&model, &[Mode::A], s).unwrap().eval(&[a]);
        assert!((closed - fock_quasiprobability(&single, &[Some(root * a)], s)).abs() < 1e-9);
    }
}

#[test]
fn convolution_agrees_with_rescaling() {
    let spec = StateSpec::GhzEcs { zeta: 0.3 };
    let ch = ThermalChannel::new(0.1, 0.0).unwrap();
    let origin = PhasePoint3::origin();
    let conv = convolution_check(spec, origin, SParameter::WIGNER, ch, 10).unwrap();
    let closed = damped_w3(spec, origin, SParameter::WIGNER, ch).unwrap();
    assert!((conv - closed).abs() < 1e-3, "{conv} vs {closed}");
    let warm = ThermalChannel::new(0.2, 0.5).unwrap();
    let p = PhasePoint3::new(c(0.2, -0.1), c(0.0, 0.3), c(-0.25, 0.0));
    let conv = convolution_check(spec, p, SParameter::new(-0.5).unwrap(), warm, 10).unwrap();
    let closed = damped_w3(spec, p, SParameter::new(-0.5).unwrap(), warm).unwrap();
    assert!((conv - closed).abs() < 1e-3, "{conv} vs {closed}");
}

#[test]
fn hotter_baths_flatten_the_peak() {
    let spec = StateSpec::SqueezedVacuum3 { r: 0.5 };
    let origin = PhasePoint3::origin();
    let peaks: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&nbar| damped_w3(spec, origin, SParameter::WIGNER, ThermalChannel::new(0.3, nbar).unwrap()).unwrap().abs())
        .collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
}

#[test]
fn inefficiency_lowers_the_optimum() {
    use phasebell::optimize::{maximize_model, Inequality, OptimizerConfig};
    let spec = StateSpec::GhzEcs { zeta: 1.0 };
    let cfg = OptimizerConfig::default();
    let ideal = PhaseSpaceModel::ideal(spec, SParameter::WIGNER).unwrap();
    let lossy = PhaseSpaceModel::new(spec, SParameter::WIGNER, NoiseModel::detection(DetectionEfficiency::symmetric(0.9).unwrap())).unwrap();
    let a = maximize_model(&ideal, &spec, Inequality::Svetlichny, &cfg, &[]).unwrap();
    let b = maximize_model(&lossy, &spec, Inequality::Svetlichny, &cfg, &[a.settings]).unwrap();
    assert!(b.value < a.value);
}

#[test]
fn product_vacuum_origin_value_after_loss() {
    // vacuum is invariant under loss
    let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let rho = FockState::product_pure(&[v]).unwrap();
    let out = lossy(&rho, 0.4);
    assert!((out.density_matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
}
