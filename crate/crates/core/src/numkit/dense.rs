//! Small dense linear algebra for oracles: materialized operators and exact
//! inverses. Only meant for desk-scale dimensions.

use nalgebra::{DMatrix, DVector};

use super::cg::LinearOperator;
use super::vector::Vector;
use crate::error::{Error, Result};

/// Largest dimension the dense routines accept.
pub const MAX_DENSE_DIM: usize = 200;

/// Materializes `op` column by column from unit-vector products.
pub fn materialize<O: LinearOperator>(op: &O) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > MAX_DENSE_DIM {
        return Err(Error::invalid(format!(
            "dense materialization limited to dim <= {MAX_DENSE_DIM}, got {n}"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    Ok(m)
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::invalid("inverse of non-square matrix"));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix has no inverse", a.nrows(), a.ncols())))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("inverse has non-finite entries".into()));
    }
    Ok(inv)
}

pub fn solve(a: &DMatrix<f64>, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.dim() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.dim(),
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::Singular("dense solve failed".into()))?;
    Vector::new(x.iter().copied().collect())
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).iter().copied().collect()
}

/// First-order Neumann approximation `A⁻¹ − ε A⁻¹ B A⁻¹` of `(A + εB)⁻¹`.
pub fn neumann_first_order(a: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let a_inv = inverse(a)?;
    Ok(&a_inv - (&a_inv * b * &a_inv) * eps)
}

/// Frobenius error of the first-order Neumann approximation against the
/// exact inverse of `A + εB`.
pub fn neumann_error(a: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let exact = inverse(&(a + b * eps))?;
    Ok((exact - neumann_first_order(a, b, eps)?).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::cg::{cg_solve, CgConfig, Diagonal, FnOperator, SpdOperator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m.transpose() * &m + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn materialize_diagonal() {
        let m = materialize(&Diagonal(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])));
    }

    #[test]
    fn cg_matches_dense_solve_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 10);
            let b = Vector::new((0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let op = SpdOperator::new(FnOperator::new(10, |x: &[f64]| mat_vec(&a, x)), 0.0).unwrap();
            let cg = cg_solve(&op, &b, &CgConfig::new(1e-12, 100).unwrap()).unwrap();
            assert!(cg.converged);
            let direct = solve(&a, &b).unwrap();
            let rel = cg.solution.sub(&direct).norm() / direct.norm();
            assert!(rel <= 1e-8, "relative error {rel}");
        }
    }

    #[test]
    fn neumann_error_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 10);
        let raw = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let b = (&raw + raw.transpose()) * 0.5;
        let e1 = neumann_error(&a, &b, 1e-2).unwrap();
        let e2 = neumann_error(&a, &b, 5e-3).unwrap();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn singular_inverse_is_an_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(inverse(&a).is_err());
    }

    #[test]
    fn guard_rejects_large_operators() {
        assert!(materialize(&Diagonal(vec![1.0; MAX_DENSE_DIM + 1])).is_err());
    }
}
