use serde::{Deserialize, Serialize};

use super::ReplayBuffer;
use crate::error::{Error, Result};
use crate::influence::{CriterionConfig, InfluenceContext};
use crate::numkit::Vector;

/// Largest candidate set the brute-force search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSize {
    /// Subsets of exactly `budget` samples.
    #[default]
    Exact,
    /// Non-empty subsets of at most `budget` samples.
    AtMost,
}

pub fn select_exhaustive(ctx: &InfluenceContext, cfg: &CriterionConfig) -> Result<ReplayBuffer> {
    select_exhaustive_with(ctx, cfg, SubsetSize::Exact).map(|(buf, _)| buf)
}

/// Exact minimizer of `Σ_{kept} I(z) + nu · R` over all admissible subsets.
///
/// Ties go to the lexicographically smallest sorted id list. Returns the
/// buffer and its objective value.
pub fn select_exhaustive_with(
    ctx: &InfluenceContext,
    cfg: &CriterionConfig,
    size: SubsetSize,
) -> Result<(ReplayBuffer, f64)> {
    cfg.validate()?;
    let n = ctx.len();
    if n == 0 {
        return Err(Error::invalid("no candidates to select from"));
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::invalid(format!(
            "exhaustive search limited to {EXHAUSTIVE_LIMIT} candidates, got {n}"
        )));
    }

    // candidate positions sorted by id so enumeration order is lexicographic in ids
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ctx.candidates()[i].id);

    let influences = ctx.candidate_influences();
    let directions: Vec<Vector> = (0..n).map(|i| ctx.direction(i, cfg.mu)).collect();
    let dim = ctx.spec().param_dim();

    let objective = |kept: &[usize]| -> f64 {
        let mut in_set = vec![false; n];
        for &k in kept {
            in_set[k] = true;
        }
        let mut discarded = vec![0.0; dim];
        let mut kept_influence = 0.0;
        for i in 0..n {
            if in_set[i] {
                kept_influence += influences[i];
            } else {
                crate::numkit::axpy(1.0, &directions[i], &mut discarded);
            }
        }
        kept_influence + cfg.nu * crate::numkit::norm(&discarded)
    };

    let sizes: Vec<usize> = match size {
        SubsetSize::Exact => vec![cfg.budget.min(n)],
        SubsetSize::AtMost => (1..=cfg.budget.min(n)).collect(),
    };

    let mut best: Option<(f64, Vec<u64>, Vec<usize>)> = None;
    for k in sizes {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let kept: Vec<usize> = combo.iter().map(|&c| order[c]).collect();
            let value = objective(&kept);
            let ids: Vec<u64> = kept.iter().map(|&i| ctx.candidates()[i].id).collect();
            let better = match &best {
                None => true,
                Some((bv, bids, _)) => value < *bv || (value == *bv && ids < *bids),
            };
            if better {
                best = Some((value, ids, kept));
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }

    let (value, _, kept) = best.expect("at least one subset");
    let mut kept = kept;
    kept.sort_unstable();
    let samples = kept.iter().map(|&i| ctx.candidates()[i].clone()).collect();
    Ok((ReplayBuffer::from_samples(samples, cfg.budget)?, value))
}

/// Advances `combo` (strictly increasing positions below `n`) to the next
/// combination in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
