//! Monte-Carlo checks of the channel and CSI-error laws.

use risbeam::channel::{corrupt_channels, sample_channels, sample_los};
use risbeam::rng::{from_seed, split};
use risbeam::{SystemConfig, C64};

fn small() -> SystemConfig {
    SystemConfig {
        m: 4,
        k: 2,
        n: 16,
        ..SystemConfig::default()
    }
}

#[test]
fn cascaded_link_second_moment() {
    let config = small();
    let los = sample_los(&config, &mut from_seed(1)).unwrap();
    let draws = 4000;
    let mut power = 0.0;
    let mut mean = C64::from(0.0);
    for i in 0..draws {
        let ch = sample_channels(&los, &config, &mut split(2, i)).unwrap();
        power += ch.g.iter().map(|z| z.norm_sqr()).sum::<f64>();
        mean += ch.g[(3, 1)];
    }
    let entries = (draws as usize * config.m * config.n) as f64;
    // E|G_ij|² = L1² regardless of κ
    let rel = power / entries / (los.l1 * los.l1) - 1.0;
    assert!(rel.abs() < 0.05, "second moment off by {rel:.4}");
    // the mean is the scaled line-of-sight entry
    let want = los.g_los[(3, 1)] * (los.l1 * (config.kappa / (config.kappa + 1.0)).sqrt());
    let got = mean / draws as f64;
    assert!((got - want).norm() < 0.05 * want.norm(), "{got} vs {want}");
}

#[test]
fn direct_link_is_rayleigh() {
    let config = small();
    let los = sample_los(&config, &mut from_seed(3)).unwrap();
    let draws = 4000;
    let mut power = vec![0.0; config.k];
    for i in 0..draws {
        let ch = sample_channels(&los, &config, &mut split(4, i)).unwrap();
        for (p, h) in power.iter_mut().zip(&ch.h_d) {
            *p += h.norm_squared();
        }
    }
    for (k, p) in power.iter().enumerate() {
        let rel = p / (draws as f64 * config.m as f64) / (los.ld[k] * los.ld[k]) - 1.0;
        assert!(rel.abs() < 0.05, "user {k}: {rel:.4}");
    }
}

#[test]
fn corruption_law() {
    // estimated fading keeps unit variance and correlates √(1/(ϱ+1)) with
    // the truth; line-of-sight parts are untouched
    let config = small();
    let los = sample_los(&config, &mut from_seed(5)).unwrap();
    let varrho: f64 = 0.2;
    let draws = 3000;
    let keep = (1.0 / (1.0 + varrho)).sqrt();
    let (mut var, mut corr, mut err, mut resid) = (0.0, 0.0, 0.0, 0.0);
    let mut count = 0.0;
    for i in 0..draws {
        let mut rng = split(6, i);
        let truth = sample_channels(&los, &config, &mut rng).unwrap();
        let est = corrupt_channels(&truth, varrho, &mut rng).unwrap();
        let (tp, ep) = (truth.parts.as_ref().unwrap(), est.channels.parts.as_ref().unwrap());
        assert_eq!(tp.g_los, ep.g_los);
        assert_eq!(tp.h_los_r, ep.h_los_r);
        for (t, e) in tp.g_nlos.iter().zip(ep.g_nlos.iter()) {
            var += e.norm_sqr();
            corr += (e * t.conj()).re;
            err += (e - t).norm_sqr();
            resid += (e - t * keep).norm_sqr();
            count += 1.0;
        }
    }
    let want_resid = varrho / (1.0 + varrho);
    assert!((resid / count - want_resid).abs() < 0.05 * want_resid, "residual {}", resid / count);
    assert!((var / count - 1.0).abs() < 0.03, "variance {}", var / count);
    assert!((corr / count - keep).abs() < 0.02, "correlation {}", corr / count);
    let want_err = 2.0 * (1.0 - keep);
    assert!((err / count - want_err).abs() < 0.05 * want_err, "error power {}", err / count);
}
