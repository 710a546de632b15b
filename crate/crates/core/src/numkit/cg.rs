use serde::{Deserialize, Serialize};

use super::vector::{axpy, dot, norm, Vector};
use crate::error::{Error, Result};

/// Damping added to Hessians before inversion unless configured otherwise.
pub const DEFAULT_DAMPING: f64 = 0.01;
pub const DEFAULT_REL_TOLERANCE: f64 = 1e-8;

/// Matrix-free linear map on `R^dim`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
}

/// Symmetric PSD operator plus `damping * I`.
#[derive(Debug, Clone)]
pub struct SpdOperator<O> {
    inner: O,
    damping: f64,
}

impl<O: LinearOperator> SpdOperator<O> {
    pub fn new(inner: O, damping: f64) -> Result<Self> {
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(Error::invalid(format!("damping must be >= 0, got {damping}")));
        }
        Ok(SpdOperator { inner, damping })
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    /// Action of the undamped operator.
    pub fn apply_undamped(&self, x: &[f64]) -> Vec<f64> {
        self.inner.apply(x)
    }
}

impl<O: LinearOperator> LinearOperator for SpdOperator<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.inner.apply(x);
        if self.damping != 0.0 {
            axpy(self.damping, x, &mut y);
        }
        y
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Diagonal matrix as an operator.
#[derive(Debug, Clone)]
pub struct Diagonal(pub Vec<f64>);

impl LinearOperator for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().zip(x).map(|(d, v)| d * v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl CgConfig {
    pub fn new(rel_tolerance: f64, max_iterations: usize) -> Result<Self> {
        if !(rel_tolerance > 0.0) {
            return Err(Error::invalid("cg rel_tolerance must be > 0"));
        }
        if max_iterations == 0 {
            return Err(Error::invalid("cg max_iterations must be >= 1"));
        }
        Ok(CgConfig {
            rel_tolerance,
            max_iterations,
        })
    }

    /// Default tolerance with an iteration budget of twice the dimension.
    pub fn for_dim(dim: usize) -> Self {
        CgConfig {
            rel_tolerance: DEFAULT_REL_TOLERANCE,
            max_iterations: (2 * dim).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub solution: Vector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CgResult {
    /// Turns a non-converged result into an error.
    pub fn into_converged(self, cfg: &CgConfig, b_norm: f64) -> Result<Vector> {
        if self.converged {
            Ok(self.solution)
        } else {
            Err(Error::CgNotConverged {
                residual: self.residual_norm,
                iterations: self.iterations,
                target: cfg.rel_tolerance * b_norm,
            })
        }
    }
}

/// Solves `op · s = b` by conjugate gradient, starting from zero.
///
/// `residual_norm` is the true residual `‖b − op·s‖`, recomputed at the end.
/// When the recursive residual meets the target but the true one does not,
/// the iteration restarts from the current iterate until the budget runs out.
pub fn cg_solve<O: LinearOperator>(op: &O, b: &Vector, cfg: &CgConfig) -> Result<CgResult> {
    let n = op.dim();
    b.check_dim(n)?;
    let b_norm = b.norm();
    let target = cfg.rel_tolerance * b_norm;

    if b_norm == 0.0 {
        return Ok(CgResult {
            solution: Vector::zeros(n),
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut r: Vec<f64> = b.to_vec();

    loop {
        let mut p = r.clone();
        let mut rs = dot(&r, &r);
        while rs.sqrt() > target && iterations < cfg.max_iterations {
            let ap = op.apply(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                // operator not positive definite along p
                break;
            }
            let alpha = rs / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rs_next = dot(&r, &r);
            let beta = rs_next / rs;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rs = rs_next;
            iterations += 1;
        }

        let ax = op.apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_res = norm(&r);
        let converged = true_res <= target;
        if converged || iterations >= cfg.max_iterations || !(rs.sqrt() <= target) {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("conjugate gradient produced non-finite iterate"));
            }
            return Ok(CgResult {
                solution: Vector::from_raw(x),
                residual_norm: true_res,
                iterations,
                converged,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs).unwrap()
    }

    #[test]
    fn diagonal_system() {
        let op = SpdOperator::new(Diagonal(vec![2.0, 4.0]), 0.0).unwrap();
        let res = cg_solve(&op, &v(&[2.0, 4.0]), &CgConfig::for_dim(2)).unwrap();
        assert!(res.converged);
        assert!((res.solution[0] - 1.0).abs() < 1e-12);
        assert!((res.solution[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn damped_diagonal_system() {
        let op = SpdOperator::new(Diagonal(vec![2.0, 4.0]), 0.01).unwrap();
        let res = cg_solve(&op, &v(&[2.0, 4.0]), &CgConfig::for_dim(2)).unwrap();
        // closed form: b_i / (a_i + λ)
        assert!((res.solution[0] - 2.0 / 2.01).abs() < 1e-12);
        assert!((res.solution[1] - 4.0 / 4.01).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let op = SpdOperator::new(Diagonal(vec![2.0, 4.0, 1.0]), 0.0).unwrap();
        let res = cg_solve(&op, &Vector::zeros(3), &CgConfig::for_dim(3)).unwrap();
        assert_eq!(res.solution, Vector::zeros(3));
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let op = SpdOperator::new(Diagonal(vec![1.0, 1.0]), 0.0).unwrap();
        assert!(matches!(
            cg_solve(&op, &v(&[1.0]), &CgConfig::for_dim(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_is_flagged_not_failed() {
        let diag: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let op = SpdOperator::new(Diagonal(diag), 0.0).unwrap();
        let b = Vector::new(vec![1.0; 20]).unwrap();
        let cfg = CgConfig::new(1e-14, 2).unwrap();
        let res = cg_solve(&op, &b, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert!(res.residual_norm > cfg.rel_tolerance * b.norm());
        assert!(res.into_converged(&cfg, b.norm()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CgConfig::new(0.0, 5).is_err());
        assert!(CgConfig::new(1e-6, 0).is_err());
        assert!(SpdOperator::new(Diagonal(vec![1.0]), -1.0).is_err());
    }
}
