//! Simultaneous-perturbation gradient estimates and the Adam update.

use rand::Rng;

use crate::Result;

/// `±1` entries where `mask` is set (all entries when `mask` is `None`),
/// zeros elsewhere.
pub fn rademacher<R: Rng + ?Sized>(rng: &mut R, len: usize, mask: Option<&[bool]>) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            match mask {
                Some(m) if !m[i] => 0.0,
                _ => s,
            }
        })
        .collect()
}

/// One two-sided estimate along a fresh Rademacher direction `Δ`:
/// `(f(z + cΔ) − f(z − cΔ)) / (2c) · Δ`. The two evaluations run in
/// parallel. Also returns their mean as a cheap loss reading at `z`.
pub fn spsa_step<F, R>(z: &[f64], loss: &F, c: f64, mask: Option<&[bool]>, rng: &mut R) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    assert!(c > 0.0, "perturbation scale must be positive");
    let delta = rademacher(rng, z.len(), mask);
    let plus: Vec<f64> = z.iter().zip(&delta).map(|(v, d)| v + c * d).collect();
    let minus: Vec<f64> = z.iter().zip(&delta).map(|(v, d)| v - c * d).collect();
    let (fp, fm) = rayon::join(|| loss(&plus), || loss(&minus));
    let (fp, fm) = (fp?, fm?);
    let scale = (fp - fm) / (2.0 * c);
    Ok((delta.iter().map(|d| scale * d).collect(), 0.5 * (fp + fm)))
}

/// Average of `directions` independent [`spsa_step`] estimates.
pub fn spsa_gradient<F, R>(z: &[f64], loss: &F, c: f64, directions: usize, mask: Option<&[bool]>, rng: &mut R) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    let directions = directions.max(1);
    let mut grad = vec![0.0; z.len()];
    let mut level = 0.0;
    for _ in 0..directions {
        let (g, l) = spsa_step(z, loss, c, mask, rng)?;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b / directions as f64;
        }
        level += l / directions as f64;
    }
    Ok((grad, level))
}

/// Adam with per-coordinate learning rates and bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(lr: Vec<f64>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let n = lr.len();
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn uniform(len: usize, lr: f64) -> Self {
        Adam::new(vec![lr; len], 0.9, 0.999, 1e-8)
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// Descends along `grad` in place.
    pub fn step(&mut self, z: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..z.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            z[i] -= self.lr[i] * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn linear_function_exact() {
        // on a linear function every estimate is Δ Δᵀ g; averaging many
        // directions recovers g
        let g = [1.0, -2.0, 0.5];
        let f = |z: &[f64]| Ok(z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>());
        let mut rng = from_seed(0);
        let (est, _) = spsa_gradient(&[0.3, 0.1, -0.7], &f, 1e-6, 4000, None, &mut rng).unwrap();
        for (e, t) in est.iter().zip(&g) {
            assert!((e - t).abs() < 0.15, "{est:?}");
        }
        // single direction: the estimate is exactly (Δ·g) Δ
        let mut r1 = from_seed(7);
        let delta = rademacher(&mut r1, 3, None);
        let (est, _) = spsa_step(&[0.0; 3], &f, 1e-3, None, &mut from_seed(7)).unwrap();
        let proj: f64 = delta.iter().zip(&g).map(|(d, b)| d * b).sum();
        for (e, d) in est.iter().zip(&delta) {
            assert!((e - proj * d).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_coordinates_untouched() {
        let f = |z: &[f64]| Ok(z.iter().map(|v| v * v).sum::<f64>());
        let mask = [true, false, true];
        let (g, _) = spsa_step(&[1.0, 1.0, 1.0], &f, 0.1, Some(&mask), &mut from_seed(1)).unwrap();
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn adam_zero_rate_is_identity() {
        let mut z = vec![0.5, -1.0];
        let mut adam = Adam::uniform(2, 0.0);
        adam.step(&mut z, &[3.0, -4.0]);
        assert_eq!(z, vec![0.5, -1.0]);
    }

    #[test]
    fn adam_first_step_is_lr_signed() {
        let mut z = vec![0.0, 0.0];
        let mut adam = Adam::uniform(2, 0.1);
        adam.step(&mut z, &[3.0, -4.0]);
        assert!((z[0] + 0.1).abs() < 1e-6 && (z[1] - 0.1).abs() < 1e-6);
    }
}
