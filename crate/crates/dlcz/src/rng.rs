//! Counter-based random streams.
//!
//! A stream is keyed by (seed, index) and produces the SplitMix64 sequence
//! started from that key, so any trial's draws can be regenerated without
//! touching its neighbours. Results never depend on how work is split across threads.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream number `index` under master `seed`.
    pub fn new(seed: u64, index: u64) -> Self {
        let key = mix(mix(seed ^ 0x5851_f42d_4c95_7f2d).wrapping_add(index.wrapping_mul(GOLDEN)));
        Self { key, counter: 0 }
    }

    /// Sub-stream for a named purpose, so different consumers never share draws.
    pub fn derived(seed: u64, domain: u64, index: u64) -> Self {
        Self::new(mix(seed.wrapping_add(domain.wrapping_mul(GOLDEN))), index)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

/// Worker-thread cap from the `DLCZ_THREADS` environment variable, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var("DLCZ_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs `f` on a pool sized by `DLCZ_THREADS` (default: rayon's choice).
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}
