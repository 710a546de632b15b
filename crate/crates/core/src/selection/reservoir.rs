use rand::Rng;

use super::ReplayBuffer;
use crate::models::Sample;

/// Single-pass reservoir update (Vitter's algorithm R).
///
/// `seen_count` is the number of stream items offered before `incoming`. Item
/// `k` (1-indexed over the whole stream) enters a full buffer with
/// probability `m / k`, replacing a uniformly chosen slot. Returns the updated
/// buffer and stream count.
pub fn select_reservoir<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    incoming: &[Sample],
    seen_count: u64,
    rng: &mut R,
) -> (ReplayBuffer, u64) {
    let mut out = buffer.clone();
    let mut seen = seen_count;
    for sample in incoming {
        seen += 1;
        if out.contains(sample.id) {
            continue;
        }
        if !out.is_full() {
            out.push(sample.clone()).expect("room checked above");
        } else {
            let slot = rng.random_range(0..seen);
            if (slot as usize) < out.capacity() {
                out.replace(slot as usize, sample.clone());
            }
        }
    }
    (out, seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stream(n: u64) -> Vec<Sample> {
        (0..n).map(|i| Sample::scalar(i, i as f64)).collect()
    }

    #[test]
    fn fills_before_evicting() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (buf, seen) = select_reservoir(&ReplayBuffer::new(5).unwrap(), &stream(3), 0, &mut rng);
        assert_eq!(buf.ids(), vec![0, 1, 2]);
        assert_eq!(seen, 3);
    }

    #[test]
    fn same_seed_same_buffer() {
        let items = stream(500);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            select_reservoir(&ReplayBuffer::new(20).unwrap(), &items, 0, &mut rng).0
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4).ids(), run(5).ids());
    }

    #[test]
    fn chunked_stream_matches_single_pass() {
        let items = stream(300);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (whole, _) = select_reservoir(&ReplayBuffer::new(10).unwrap(), &items, 0, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut buf = ReplayBuffer::new(10).unwrap();
        let mut seen = 0;
        for chunk in items.chunks(37) {
            (buf, seen) = select_reservoir(&buf, chunk, seen, &mut rng);
        }
        assert_eq!(seen, 300);
        assert_eq!(buf, whole);
    }
}
