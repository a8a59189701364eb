use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

fn normals(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn interpolation_endpoints() {
    let (x0, eps) = (vec![1.0, -2.0], vec![3.0, 4.0]);
    assert_eq!(interpolate_state(&x0, &eps, 0.0).unwrap().z, x0);
    assert_eq!(interpolate_state(&x0, &eps, 1.0).unwrap().z, eps);
    assert_eq!(interpolate_state(&[0.0], &[2.0], 0.5).unwrap().z, vec![1.0]);
    assert!(interpolate_state(&[0.0], &[2.0, 1.0], 0.5).is_err());
    assert!(interpolate_state(&[0.0], &[2.0], 1.5).is_err());
}

#[test]
fn dirac_velocity_closed_forms() {
    let c = vec![0.7, -1.3, 2.0];
    let f = dirac_velocity(c.clone());
    let t = 0.37;
    let on_mode: Vec<f64> = c.iter().map(|c| (1.0 - t) * c).collect();
    for (v, c) in f.velocity(&on_mode, t, None).iter().zip(&c) {
        assert!((v + c).abs() < 1e-12);
    }
    let eps = [0.2, 0.9, -1.1];
    for t in [0.05, 0.5, 0.95] {
        let z: Vec<f64> = c.iter().zip(&eps).map(|(c, e)| (1.0 - t) * c + t * e).collect();
        for ((v, c), e) in f.velocity(&z, t, None).iter().zip(&c).zip(&eps) {
            assert!((v - (e - c)).abs() < 1e-12);
        }
    }
    let zero = dirac_velocity(vec![0.0; 3]);
    let z: Vec<f64> = eps.iter().map(|e| 0.4 * e).collect();
    for (v, e) in zero.velocity(&z, 0.4, None).iter().zip(&eps) {
        assert!((v - e).abs() < 1e-12);
    }
    // Below the floor the field is evaluated at the floor.
    assert_eq!(f.velocity(&on_mode, 0.0, None), f.velocity(&on_mode, T_FLOOR, None));
}

#[test]
fn fm_loss_cases() {
    let c = vec![1.0, -0.5];
    let f = dirac_velocity(c.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch: Vec<FmSample> = (0..100)
        .map(|i| FmSample {
            x0: c.clone(),
            eps: normals(&mut rng, 2),
            t: 0.01 + 0.98 * i as f64 / 99.0,
            cond: None,
        })
        .collect();
    assert!(fm_loss(&f, &batch).unwrap() < 1e-12);
    assert_eq!(fm_loss(&f, &[]), Err(FlowError::EmptyBatch));

    // Conditional form: the target travels in the condition.
    let cf = dirac_velocity(vec![0.0, 0.0]);
    let cond_batch: Vec<FmSample> = batch.iter().map(|s| FmSample { cond: Some(c.clone()), ..s.clone() }).collect();
    assert!(fm_loss(&cf, &cond_batch).unwrap() < 1e-12);
    assert!(fm_loss(&cf, &batch).unwrap() > 0.1);
}

#[test]
fn zero_field_loss_is_noise_energy() {
    let d = 4;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch: Vec<FmSample> = (0..n)
        .map(|_| FmSample {
            x0: vec![0.0; d],
            eps: normals(&mut rng, d),
            t: 0.5,
            cond: None,
        })
        .collect();
    let loss = fm_loss(&ZeroField, &batch).unwrap();
    // ‖ε‖² ~ χ²_d has variance 2d.
    let se = (2.0 * d as f64 / n as f64).sqrt();
    assert!((loss - d as f64).abs() < 3.0 * se, "{loss}");
}

#[test]
fn score_identities() {
    let c = vec![0.3, -1.0];
    let f = dirac_velocity(c.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in [0.1, 0.5, 0.9] {
        let z = normals(&mut rng, 2);
        let v = f.velocity(&z, t, None);
        let s = score_from_velocity(&FlowState { z: z.clone(), t }, &v).unwrap();
        for j in 0..2 {
            let exact = -(z[j] - (1.0 - t) * c[j]) / (t * t);
            assert!(((s[j] - exact) / exact).abs() < 1e-10);
        }
    }
    let t = 0.6;
    let mode: Vec<f64> = c.iter().map(|c| (1.0 - t) * c).collect();
    let neg_c: Vec<f64> = c.iter().map(|c| -c).collect();
    let s = score_from_velocity(&FlowState { z: mode, t }, &neg_c).unwrap();
    assert!(s.iter().all(|v| v.abs() < 1e-12));
    let s = score_from_velocity(&FlowState { z: vec![1.5, -2.0], t: 1.0 }, &[9.0, 9.0]).unwrap();
    assert_eq!(s, vec![-1.5, 2.0]);
    assert!(score_from_velocity(&FlowState { z: vec![1.0], t: 0.0 }, &[0.0]).is_err());
}

#[test]
fn ode_is_exact_for_dirac() {
    let c = vec![0.25, -3.0, 1.5];
    let f = dirac_velocity(c.clone());
    for steps in [1, 2, 7, 25, 100] {
        let z = sample_ode(&f, &[2.0, 0.1, -0.7], steps, None).unwrap();
        for (a, b) in z.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12, "steps {steps}");
        }
    }
    assert_eq!(sample_ode(&ZeroField, &[1.0, 2.0], 25, None).unwrap(), vec![1.0, 2.0]);
    assert!(sample_ode(&f, &[0.0; 3], 0, None).is_err());
}

#[test]
fn zero_noise_sde_equals_ode() {
    let f = dirac_velocity(vec![0.5, -0.25]);
    let z1 = [1.3, -0.4];
    for steps in [1, 25, 200] {
        let ode = sample_ode(&f, &z1, steps, None).unwrap();
        for s in [NoiseSchedule::Zero, NoiseSchedule::Constant(0.0), NoiseSchedule::FlowGrpo(0.0)] {
            let sde = sample_sde(&f, &z1, steps, &s, 42, None).unwrap();
            assert_eq!(ode.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), sde.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn sde_is_seeded() {
    let f = dirac_velocity(vec![0.5]);
    let s = NoiseSchedule::FlowGrpo(0.7);
    let a = sample_sde(&f, &[1.0], 50, &s, 9, None).unwrap();
    assert_eq!(a, sample_sde(&f, &[1.0], 50, &s, 9, None).unwrap());
    assert_ne!(a, sample_sde(&f, &[1.0], 50, &s, 10, None).unwrap());
}

#[test]
fn schedules() {
    assert_eq!(NoiseSchedule::Zero.sigma(0.5), 0.0);
    assert_eq!(NoiseSchedule::Constant(0.3).sigma(0.9), 0.3);
    assert!((NoiseSchedule::Sqrt(2.0).sigma(0.25) - 1.0).abs() < 1e-12);
    assert!((NoiseSchedule::FlowGrpo(0.7).sigma(0.5) - 0.7).abs() < 1e-12);
    let top = NoiseSchedule::FlowGrpo(1.0).sigma(1.0);
    assert!((top - (0.999f64 / 0.001).sqrt()).abs() < 1e-9);
    assert!((NoiseSchedule::FlowGrpo(1.0).sigma(0.0) - (0.001f64 / 0.999).sqrt()).abs() < 1e-12);
    let json = serde_json::to_string(&NoiseSchedule::FlowGrpo(0.7)).unwrap();
    assert_eq!(serde_json::from_str::<NoiseSchedule>(&json).unwrap(), NoiseSchedule::FlowGrpo(0.7));
}

#[test]
fn fit_reduces_loss_and_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<Vec<f64>> = (0..2000).map(|_| normals(&mut rng, 1)).collect();
    let rep = fit_field(&data, 10, 5000, 1e-2, 3).unwrap();
    assert_eq!(rep.losses.len(), 5000);
    let head: f64 = rep.losses[..100].iter().sum::<f64>() / 100.0;
    let tail: f64 = rep.losses[4900..].iter().sum::<f64>() / 100.0;
    assert!(tail < head, "{head} -> {tail}");
    assert_eq!(rep.field, fit_field(&data, 10, 5000, 1e-2, 3).unwrap().field);
    assert!(fit_field(&[], 10, 10, 1e-2, 0).is_err());
    assert!(fit_field(&[vec![1.0], vec![1.0, 2.0]], 10, 10, 1e-2, 0).is_err());
    assert!(matches!(
        fit_field(&data, 10, 100, 1e6, 0),
        Err(FlowError::NonFiniteLoss { .. })
    ));
    let cfg = FitConfig { batch: 0, ..Default::default() };
    assert!(fit_field_with(&data, &cfg).is_err());
}

#[test]
fn optimal_slope_points() {
    assert_eq!(gaussian_optimal_slope(0.5), 0.0);
    assert!((gaussian_optimal_slope(0.0) + 1.0).abs() < 1e-12);
    assert!((gaussian_optimal_slope(1.0) - 1.0).abs() < 1e-12);
}

#[test]
fn batch_moments_and_determinism() {
    let f = dirac_velocity(vec![0.5, -1.0]);
    let s = NoiseSchedule::FlowGrpo(0.7);
    let a = sample_sde_batch(&f, 2, 500, 50, &s, 3, None).unwrap();
    assert_eq!(a, sample_sde_batch(&f, 2, 500, 50, &s, 3, None).unwrap());
    let m = Moments::of(&a).unwrap();
    assert_eq!(m.count, 500);
    assert!((m.mean[0] - 0.5).abs() < 0.05 && (m.mean[1] + 1.0).abs() < 0.05);
    let direct = Moments::of(&[vec![1.0, 2.0], vec![3.0, 2.0]]).unwrap();
    assert_eq!(direct.mean, vec![2.0, 2.0]);
    assert_eq!(direct.var, vec![1.0, 0.0]);
    assert!(Moments::of(&[]).is_err());
}

proptest! {
    #[test]
    fn fm_loss_nonnegative(
        x in prop::collection::vec(-3.0f64..3.0, 3), e in prop::collection::vec(-3.0f64..3.0, 3),
        t in 0.01f64..1.0, c in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let f = dirac_velocity(c);
        let s = FmSample { x0: x, eps: e, t, cond: None };
        prop_assert!(fm_loss(&f, &[s]).unwrap() >= 0.0);
    }

    #[test]
    fn ode_exact_any_steps(steps in 1usize..60, c in -5.0f64..5.0, z in -5.0f64..5.0) {
        let out = sample_ode(&dirac_velocity(vec![c]), &[z], steps, None).unwrap();
        prop_assert!((out[0] - c).abs() < 1e-9);
    }
}
