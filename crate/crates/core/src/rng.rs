use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the generator behind every [`RngStream`].
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Seeded, platform-independent random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Derives an independent child stream, advancing this one.
    pub fn fork(&mut self) -> RngStream {
        let seed = self.inner.next_u64();
        RngStream::new(seed)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer, used to derive per-trial seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of a run started from `base_seed`.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ splitmix64(index)
}
