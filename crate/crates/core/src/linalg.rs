//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Maximum entrywise deviation of `m` from its conjugate transpose.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// 2-norm condition number from singular values; `inf` when singular.
pub fn condition_number(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` for Hermitian positive-definite `a`, falling back to LU.
pub fn solve_hermitian(a: &CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Ok(x);
        }
    }
    let lu = a.clone().lu();
    match lu.solve(b) {
        Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => Ok(x),
        _ => Err(Error::Singular {
            context,
            condition: condition_number(a),
        }),
    }
}

/// Unit-modulus phasor of `z`; `fallback` when `z` is exactly zero.
#[inline]
pub fn unit_phase(z: C64, fallback: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 || !n.is_finite() {
        fallback
    } else {
        z / n
    }
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(phi: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = phi.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_identity() {
        let a = CMat::identity(3, 3);
        let b = CMat::from_fn(3, 1, |i, _| C64::new(i as f64, 1.0));
        let x = solve_hermitian(&a, &b, "test").unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn singular_reports_condition() {
        let a = CMat::zeros(2, 2);
        let b = CMat::from_element(2, 1, ONE);
        match solve_hermitian(&a, &b, "zero") {
            Err(Error::Singular { condition, .. }) => assert!(condition.is_infinite()),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn eigenvalues_of_diag() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(3.0, 0.0), C64::new(-1.0, 0.0)]));
        let e = hermitian_eigenvalues(&a);
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!(wrap_angle(-1e-18) < std::f64::consts::TAU);
        assert!((wrap_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
    }
}
