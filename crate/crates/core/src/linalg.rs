//! Small dense linear-algebra helpers shared across modules.

use nalgebra::Cholesky;

use crate::{CMatrix, CVector, Error, Result, C64};

/// Residual tolerance for Hermitian linear solves.
pub const SOLVE_TOLERANCE: f64 = 1e-9;

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Hermitian quadratic form `xᴴ M x`.
pub fn quadratic_form(x: &CVector, m: &CMatrix) -> C64 {
    x.dotc(&(m * x))
}

/// Outer product `x yᴴ`.
pub fn outer(x: &CVector, y: &CVector) -> CMatrix {
    x * y.adjoint()
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() <= tol * scale
}

/// Extracts the real part of a quantity that must be real, failing when the
/// imaginary residue exceeds `tol` relative to its magnitude.
pub fn real_part(value: C64, tol: f64, what: &str) -> Result<f64> {
    let scale = value.norm().max(f64::MIN_POSITIVE);
    if value.im.abs() > tol * scale && value.im.abs() > f64::EPSILON {
        return Err(Error::Numerical(format!(
            "{what} has imaginary residue {:e} (relative {:e})",
            value.im,
            value.im.abs() / scale
        )));
    }
    Ok(value.re)
}

/// Solves `A X = B` for Hermitian positive definite `A` by Cholesky
/// factorisation, checking the residual.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| {
        Error::Numerical("matrix is not Hermitian positive definite".to_string())
    })?;
    let x = chol.solve(b);
    let residual = (a * &x - b).norm();
    let scale = b.norm().max(f64::MIN_POSITIVE);
    if !residual.is_finite() || residual > SOLVE_TOLERANCE * scale {
        return Err(Error::Numerical(format!(
            "Hermitian solve residual {:e} exceeds tolerance",
            residual / scale
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_product_matches_dense_product() {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 1.0));
        let dense = trace(&(&a * &b));
        assert!((trace_of_product(&a, &b) - dense).norm() < 1e-12);
    }

    #[test]
    fn real_part_rejects_complex_values() {
        assert!(real_part(C64::new(1.0, 1e-12), 1e-9, "x").is_ok());
        assert!(real_part(C64::new(1.0, 1e-3), 1e-9, "x").is_err());
    }

    #[test]
    fn hermitian_solve_recovers_identity() {
        let a = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(3.0, 0.0)
            } else if i < j {
                C64::new(0.2, 0.1)
            } else {
                C64::new(0.2, -0.1)
            }
        });
        let x = hermitian_solve(&a, &a).unwrap();
        assert!((x - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_solve_rejects_indefinite() {
        let a = CMatrix::from_diagonal_element(2, 2, C64::new(-1.0, 0.0));
        assert!(hermitian_solve(&a, &a).is_err());
    }
}
