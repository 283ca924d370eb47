//! Solvers against brute force, and the SPSA trainer on known functions.

use risbeam::channel::{sample_channels, sample_los};
use risbeam::learn::spsa::{spsa_gradient, spsa_step, Adam};
use risbeam::linalg::CVec;
use risbeam::rng::{from_seed, split};
use risbeam::solvers::{wmmse_pi, wsr_fixed_theta, SolveOptions};
use risbeam::{PhaseResolution, SystemConfig, C64};

#[test]
fn wmmse_pi_close_to_exhaustive_on_tiny_instances() {
    let config = SystemConfig {
        m: 2,
        k: 2,
        n: 2,
        phase_bits: PhaseResolution::Bits(2),
        ..SystemConfig::default()
    };
    let opts = SolveOptions::from_config(&config);
    let step = std::f64::consts::TAU / 4.0;
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let mut rng = split(11, seed);
        let los = sample_los(&config, &mut rng).unwrap();
        let ch = sample_channels(&los, &config, &mut rng).unwrap();
        let best = (0..16usize)
            .map(|c| {
                let theta = CVec::from_fn(2, |i, _| C64::from_polar(1.0, step * ((c >> (2 * i)) & 3) as f64));
                wsr_fixed_theta(&ch, &theta, opts.pt, 50, 0.0).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let ours = wmmse_pi(&ch, &opts, 20, &mut rng).unwrap().wsr;
        ratios.push(ours / best);
    }
    ratios.sort_by(f64::total_cmp);
    assert!(ratios[10] >= 0.9, "{ratios:?}");
}

#[test]
fn spsa_adam_minimises_a_quadratic() {
    let target: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 3.0).collect();
    let curv: Vec<f64> = (0..10).map(|i| 0.5 + 0.3 * i as f64).collect();
    let f = |z: &[f64]| -> risbeam::Result<f64> {
        Ok(z.iter().zip(&target).zip(&curv).map(|((a, b), c)| c * (a - b).powi(2)).sum())
    };
    let mut z = vec![0.0; 10];
    let mut adam = Adam::uniform(10, 0.01);
    let mut rng = from_seed(21);
    for _ in 0..5000 {
        let (g, _) = spsa_step(&z, &f, 1e-3, None, &mut rng).unwrap();
        adam.step(&mut z, &g);
    }
    let loss = f(&z).unwrap();
    assert!(loss < 1e-2, "loss {loss}");
}

#[test]
fn spsa_is_unbiased_on_smooth_functions() {
    // 10⁴ directions on a smooth 10-dimensional function: each coordinate
    // within 10% of the analytic gradient. Per-coordinate variance is the sum
    // of the other squared partials, so the gradient is kept balanced.
    let f = |z: &[f64]| -> risbeam::Result<f64> {
        Ok(z.iter().map(|v| v * v + 0.5 * (2.0 * v).sin()).sum::<f64>() + 0.1 * z[0] * z[9])
    };
    let z: Vec<f64> = (0..10).map(|i| 0.8 + 0.05 * i as f64).collect();
    let mut truth: Vec<f64> = z.iter().map(|v| 2.0 * v + (2.0 * v).cos()).collect();
    truth[0] += 0.1 * z[9];
    truth[9] += 0.1 * z[0];
    let (g, _) = spsa_gradient(&z, &f, 1e-3, 10_000, None, &mut from_seed(22)).unwrap();
    for (a, b) in g.iter().zip(&truth) {
        assert!((a - b).abs() < 0.1 * b.abs(), "{g:?} vs {truth:?}");
    }
}
