//! Counter-based random streams.
//!
//! A stream is keyed by `(seed, scenario id, replicate)`; the n-th draw is a
//! pure function of the key and `n`, so replicates can run on any thread in
//! any order and still reproduce bit for bit.

use rand::RngCore;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit id for a scenario or experiment name.
pub fn stream_id(name: &str) -> u64 {
    // FNV-1a, then mixed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    k1: u64,
    k2: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64, scenario: u64, replicate: u64) -> Self {
        let mut k = mix64(seed ^ 0x243f_6a88_85a3_08d3);
        k = mix64(k ^ scenario.wrapping_mul(GAMMA));
        k = mix64(k ^ replicate.wrapping_add(0x1319_8a2e_0370_7344));
        StreamRng {
            k1: k,
            k2: mix64(k ^ 0xa409_3822_299f_31d0),
            counter: 0,
        }
    }

    /// Independent child stream, e.g. one per generation inside a replicate.
    pub fn child(&self, id: u64) -> Self {
        StreamRng::new(self.k1, self.k2, id)
    }

    /// Value of draw number `n` without advancing.
    pub fn at(&self, n: u64) -> u64 {
        mix64(mix64(n.wrapping_mul(GAMMA) ^ self.k1).wrapping_add(self.k2))
    }

    /// Number of 64-bit draws taken so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
