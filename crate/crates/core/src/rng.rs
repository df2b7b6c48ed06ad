use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for `(seed, stream)`. Distinct streams of one seed
/// are independent, so parallel work can draw without sharing state.
pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const SPLIT: u64 = 1;
    pub const FOLDS: u64 = 2;
    /// Synthetic databases, offset by source.
    pub const SYNTH: u64 = 1 << 16;
    /// Tree sampling streams start here and are offset by tree index.
    pub const TREES: u64 = 1 << 32;
}
