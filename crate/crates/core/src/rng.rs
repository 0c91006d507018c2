use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used for one chunk of primaries.
pub type ChunkRng = ChaCha8Rng;

/// Independent stream for chunk `chunk` of a run seeded with `seed`.
///
/// Streams are keyed by chunk rather than by worker so a run reproduces
/// bit-for-bit whatever number of threads traces it.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChunkRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Uniform sample in `[0, 1)` with 53 random mantissa bits.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
