//! Counter-based random numbers.
//!
//! Every variate is a pure function of `(seed, path, step)`, so ensembles are
//! reproducible and do not depend on the order in which paths are generated or
//! on how work is split across threads.

use crate::special::std_normal_quantile;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = (PHILOX_M0 as u64) * (ctr[0] as u64);
        let p1 = (PHILOX_M1 as u64) * (ctr[2] as u64);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// A seeded family of independent streams, one per path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamRng {
    seed: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform variate in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, path: u64, step: u64) -> f64 {
        let key = [self.seed as u32, (self.seed >> 32) as u32];
        let ctr = [
            step as u32,
            (step >> 32) as u32,
            path as u32,
            (path >> 32) as u32,
        ];
        let out = philox4x32(ctr, key);
        let bits = ((out[0] as u64) << 32 | out[1] as u64) >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate by inversion of the uniform at the same counter.
    #[inline]
    pub fn normal(&self, path: u64, step: u64) -> f64 {
        std_normal_quantile(self.uniform(path, step))
    }
}
