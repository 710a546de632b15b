use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Rejects NaN and infinite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite vector entry {} at index {i}",
                entries[i]
            )));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    /// Builds a vector from values produced by arithmetic on finite inputs.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()), "non-finite result");
        Vector(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * factor).collect())
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub(crate) fn axpy_in_place(&mut self, factor: f64, other: &[f64]) {
        axpy(factor, other, &mut self.0);
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::Dimension {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sums `vectors` left to right in index order.
///
/// The fixed order makes the result bit-reproducible for identical inputs; a
/// permuted input agrees only up to floating-point reassociation.
pub fn deterministic_sum(dim: usize, vectors: &[Vector]) -> Result<Vector> {
    let mut acc = vec![0.0; dim];
    for v in vectors {
        v.check_dim(dim)?;
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    Ok(Vector(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::seq::SliceRandom;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Vector::new(vec![0.0, -2.0]).is_ok());
    }

    #[test]
    fn sum_of_unit_vectors() {
        let vs = vec![
            Vector::new(vec![1.0, 0.0]).unwrap(),
            Vector::new(vec![0.0, 1.0]).unwrap(),
        ];
        assert_eq!(deterministic_sum(2, &vs).unwrap().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(deterministic_sum(3, &[]).unwrap(), Vector::zeros(3));
    }

    #[test]
    fn sum_rejects_mixed_dimensions() {
        let vs = vec![Vector::zeros(2), Vector::zeros(3)];
        assert_eq!(
            deterministic_sum(2, &vs),
            Err(Error::Dimension {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn permuted_sum_agrees_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut vs: Vec<Vector> = (0..100)
            .map(|_| Vector::new((0..5).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap())
            .collect();
        let first = deterministic_sum(5, &vs).unwrap();
        let again = deterministic_sum(5, &vs).unwrap();
        assert_eq!(first, again);

        // recompute directly, coordinate by coordinate
        let direct: Vec<f64> = (0..5).map(|j| vs.iter().map(|v| v[j]).sum()).collect();
        vs.shuffle(&mut rng);
        let permuted = deterministic_sum(5, &vs).unwrap();
        for j in 0..5 {
            assert!((permuted[j] - direct[j]).abs() <= 1e-12);
        }
    }
}
