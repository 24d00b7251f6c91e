//! Seed handling. Every stochastic object draws from a ChaCha stream keyed
//! by a 64-bit seed; sub-streams (modes, realizations, trajectory blocks)
//! get seeds derived with a SplitMix64 step so that results never depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` under `base`. For a fixed base the map
/// stream -> seed is injective (SplitMix64 finalization is a bijection).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
