use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one seed.
///
/// Each name selects a distinct ChaCha stream, so draws from one never shift
/// the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    /// Synthetic data generation.
    Data,
    /// Model initialization.
    Init,
    /// Epoch shuffling and replay-batch sampling.
    Train,
    /// The reservoir selector baseline.
    Reservoir,
    /// The oracle reservoir used for rank-correlation checkpoints.
    Oracle,
}

impl RngStream {
    fn id(self) -> u64 {
        match self {
            RngStream::Data => 1,
            RngStream::Init => 2,
            RngStream::Train => 3,
            RngStream::Reservoir => 4,
            RngStream::Oracle => 5,
        }
    }
}

pub fn named_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
