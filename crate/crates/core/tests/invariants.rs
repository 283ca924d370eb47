use proptest::prelude::*;

use risbeam::dataset::Dataset;
use risbeam::linalg::{CMat, CVec};
use risbeam::pi::{extract_theta, objective, on_grid, pi_step, quantize_hard, quantize_soft_theta};
use risbeam::rng::{from_seed, gaussian_matrix, random_phases};
use risbeam::wmmse::{lift, scale_power, total_power};
use risbeam::{PhaseResolution, SystemConfig, TrainableParams, Variant, C64};

fn phases() -> impl Strategy<Value = CVec> {
    prop::collection::vec(0.0..std::f64::consts::TAU, 1..24)
        .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|p| C64::from_polar(1.0, p))))
}

fn unit(v: &CVec) -> bool {
    v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12)
}

proptest! {
    #[test]
    fn hard_quantizer_is_nearest_grid_point(theta in phases(), bits in 1u32..6) {
        let q = quantize_hard(&theta, bits);
        prop_assert!(unit(&q));
        prop_assert!(on_grid(&q, bits, 1e-9));
        let half = std::f64::consts::PI / (1u64 << bits) as f64;
        for (a, b) in theta.iter().zip(q.iter()) {
            prop_assert!((a * b.conj()).arg().abs() <= half + 1e-12);
        }
        prop_assert_eq!(quantize_hard(&q, bits), q);
    }

    #[test]
    fn soft_quantizer_stays_unimodular(theta in phases(), bits in 1u32..4) {
        prop_assert!(unit(&quantize_soft_theta(&theta, bits, 100.0)));
    }

    #[test]
    fn lift_extract_round_trip(theta in phases(), rot in 0.0..std::f64::consts::TAU) {
        // extraction is invariant to a common phase on the lifted vector
        let x = lift(&theta) * C64::from_polar(1.0, rot);
        let back = extract_theta(&x);
        prop_assert!((back - &theta).norm() < 1e-12);
    }

    #[test]
    fn power_iteration_step_ascends(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = from_seed(seed);
        let a = gaussian_matrix(&mut rng, n, n);
        let r: CMat = &a * a.adjoint();
        let x = random_phases(&mut rng, n);
        let y = pi_step(&x, &r);
        prop_assert!(unit(&y));
        let (f0, f1) = (objective(&x, &r), objective(&y, &r));
        prop_assert!(f1 >= f0 - 1e-9 * f0.abs().max(1.0));
    }

    #[test]
    fn power_scaling_hits_budget(seed in any::<u64>(), m in 1usize..9, k in 1usize..5, pt in 1e-4..10.0f64) {
        let w = gaussian_matrix(&mut from_seed(seed), m, k);
        let s = scale_power(&w, pt).unwrap();
        prop_assert!((total_power(&s) - pt).abs() <= 1e-12 * pt.max(1.0));
    }

    #[test]
    fn unconstrained_round_trip(seed in any::<u64>(), m in 1usize..5, i_o in 1usize..6, v in 0usize..3) {
        let variant = [Variant::Pinet, Variant::PinetPlus, Variant::PinetImcsi][v];
        let p = TrainableParams::init(m, i_o, variant, &mut from_seed(seed));
        let back = p.with_unconstrained(&p.to_unconstrained()).unwrap();
        for (a, b) in p.flatten().iter().zip(back.flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn config_json_round_trip(m in 1usize..9, k in 1usize..5, n in 0usize..40, dbm in -10.0..30.0f64, bits in 0u32..5) {
        let config = SystemConfig {
            m,
            k,
            n,
            phase_bits: if bits == 0 { PhaseResolution::Continuous } else { PhaseResolution::Bits(bits) },
            ..SystemConfig::default()
        }
        .with_pt_dbm(dbm);
        let back = SystemConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(back.m, m);
        prop_assert_eq!(back.phase_bits, config.phase_bits);
        prop_assert!((back.pt_dbm() - dbm).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_json_is_lossless(seed in any::<u64>(), count in 1usize..4, n in 1usize..10) {
        let config = SystemConfig { m: 2, k: 2, n, ..SystemConfig::default() };
        let data = Dataset::generate(&config, count, seed).unwrap();
        let back = Dataset::from_json(&data.to_json()).unwrap();
        prop_assert_eq!(back.samples, data.samples);
        prop_assert_eq!(back.seed, seed);
    }
}
