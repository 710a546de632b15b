//! Replay-buffer update policies.
//!
//! The influence-driven selectors (`ours`, `vanilla_if` and the regularizer
//! ablations) run a greedy drop loop over an [`InfluenceContext`];
//! `reservoir` and `ring` are the sampling baselines. [`select_exhaustive`]
//! is a brute-force reference for small candidate sets.

mod exhaustive;
mod greedy;
mod reservoir;
mod ring;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Sample;

pub use exhaustive::{select_exhaustive, select_exhaustive_with, SubsetSize, EXHAUSTIVE_LIMIT};
pub use greedy::{select_greedy, select_greedy_with, GreedyOptions, HessianRefresh};
pub use reservoir::select_reservoir;
pub use ring::{ring_quotas, select_ring};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    samples: Vec<Sample>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer capacity must be >= 1"));
        }
        Ok(ReplayBuffer {
            samples: Vec::new(),
            capacity,
        })
    }

    pub fn from_samples(samples: Vec<Sample>, capacity: usize) -> Result<Self> {
        let mut buf = ReplayBuffer::new(capacity)?;
        for s in samples {
            buf.push(s)?;
        }
        Ok(buf)
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if self.samples.len() >= self.capacity {
            return Err(Error::invalid(format!("buffer full at capacity {}", self.capacity)));
        }
        if self.contains(sample.id) {
            return Err(Error::invalid(format!("sample {} already buffered", sample.id)));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() >= self.capacity
    }

    pub fn contains(&self, id: u64) -> bool {
        self.samples.iter().any(|s| s.id == id)
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub(crate) fn replace(&mut self, slot: usize, sample: Sample) {
        self.samples[slot] = sample;
    }

    /// Checks the capacity and unique-id invariants.
    pub fn check(&self) -> Result<()> {
        if self.samples.len() > self.capacity {
            return Err(Error::invalid(format!(
                "buffer holds {} samples, capacity {}",
                self.samples.len(),
                self.capacity
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.samples {
            if !seen.insert(s.id) {
                return Err(Error::invalid(format!("duplicate id {} in buffer", s.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    /// First-order influence plus the Hessian-aware regularizer.
    Ours,
    /// First-order influence only.
    VanillaIf,
    /// Influence plus the gradient-matching regularizer (`mu = 0`).
    IfGradMatch,
    /// Influence plus the norm of the kept-set gradient.
    IfDiversity,
    /// Influence plus a weighted sum of the matching and diversity terms.
    IfBoth,
    Reservoir,
    Ring,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 7] = [
        SelectorKind::Ours,
        SelectorKind::VanillaIf,
        SelectorKind::IfGradMatch,
        SelectorKind::IfDiversity,
        SelectorKind::IfBoth,
        SelectorKind::Reservoir,
        SelectorKind::Ring,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorKind::Ours => "ours",
            SelectorKind::VanillaIf => "vanilla_if",
            SelectorKind::IfGradMatch => "if_grad_match",
            SelectorKind::IfDiversity => "if_diversity",
            SelectorKind::IfBoth => "if_both",
            SelectorKind::Reservoir => "reservoir",
            SelectorKind::Ring => "ring",
        }
    }

    /// Whether the selector runs the greedy influence loop.
    pub fn is_influence_based(&self) -> bool {
        !matches!(self, SelectorKind::Reservoir | SelectorKind::Ring)
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectorKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selector `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Dropped sample ids with the score that selected them, in drop order.
    pub drop_order: Vec<(u64, f64)>,
    /// Regularizer value before each drop.
    pub r_values: Vec<f64>,
    pub final_criterion: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_invariants() {
        let mut b = ReplayBuffer::new(2).unwrap();
        b.push(Sample::scalar(1, 0.0)).unwrap();
        assert!(b.push(Sample::scalar(1, 0.0)).is_err());
        b.push(Sample::scalar(2, 0.0)).unwrap();
        assert!(b.is_full());
        assert!(b.push(Sample::scalar(3, 0.0)).is_err());
        assert_eq!(b.ids(), vec![1, 2]);
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn selector_names_round_trip() {
        for k in SelectorKind::ALL {
            assert_eq!(k.as_str().parse::<SelectorKind>().unwrap(), k);
        }
        assert!("gem".parse::<SelectorKind>().is_err());
    }
}
