use super::ReplayBuffer;
use crate::error::{Error, Result};
use crate::models::Sample;

/// Per-class slot counts: `capacity / num_classes` each, with the remainder
/// going one slot at a time to the lowest class indices.
pub fn ring_quotas(capacity: usize, num_classes: usize) -> Vec<usize> {
    let base = capacity / num_classes;
    let extra = capacity % num_classes;
    (0..num_classes).map(|c| base + usize::from(c < extra)).collect()
}

/// Class-balanced FIFO update: each class keeps its newest samples up to its
/// quota. The result lists samples in arrival order.
pub fn select_ring(buffer: &ReplayBuffer, incoming: &[Sample], num_classes: usize) -> Result<ReplayBuffer> {
    if num_classes == 0 {
        return Err(Error::invalid("ring buffer needs at least one class"));
    }
    let quotas = ring_quotas(buffer.capacity(), num_classes);

    let mut arrivals: Vec<&Sample> = buffer.samples().iter().collect();
    for s in incoming {
        if s.label >= num_classes {
            return Err(Error::invalid(format!(
                "sample {} label {} out of range [0, {num_classes})",
                s.id, s.label
            )));
        }
        if !arrivals.iter().any(|a| a.id == s.id) {
            arrivals.push(s);
        }
    }

    // walk newest to oldest, keeping up to each class's quota
    let mut used = vec![0usize; num_classes];
    let mut keep = vec![false; arrivals.len()];
    for (i, s) in arrivals.iter().enumerate().rev() {
        if used[s.label] < quotas[s.label] {
            used[s.label] += 1;
            keep[i] = true;
        }
    }
    let kept = arrivals
        .into_iter()
        .zip(keep)
        .filter(|&(_s, k)| k).map(|(s, _k)| s.clone())
        .collect();
    ReplayBuffer::from_samples(kept, buffer.capacity())
}
