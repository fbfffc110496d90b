//! Seeds and the portable random stream used by every generator.
//!
//! Instance seeds are derived as
//! `SHA-256(base_seed as 8 big-endian bytes || "family|m|n|index")`, keeping the
//! first 8 digest bytes as a big-endian `u64`. The per-instance stream is
//! xoshiro256** initialised from that value by SplitMix64 expansion. All
//! sampling helpers below consume `next_u64` in a fixed, documented way so the
//! same seed yields the same instance on any platform and in any language.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::taskgen::Family;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

pub fn derive_instance_seed(base: Seed, family: Family, m: usize, n: usize, index: usize) -> Seed {
    let mut hasher = Sha256::new();
    hasher.update(base.0.to_be_bytes());
    hasher.update(format!("{}|{}|{}|{}", family.as_str(), m, n, index).as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    Seed(u64::from_be_bytes(head))
}

/// Hash-mixes two seeds with a domain tag; used for baseline solvers and jitter.
pub(crate) fn mix_seeds(a: Seed, b: Seed, tag: &str) -> Seed {
    let mut hasher = Sha256::new();
    hasher.update(a.0.to_be_bytes());
    hasher.update(b.0.to_be_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    Seed(u64::from_be_bytes(head))
}

/// xoshiro256** stream with explicit, version-stable sampling routines.
#[derive(Clone, Debug)]
pub struct InstanceRng(Xoshiro256StarStar);

impl InstanceRng {
    pub fn new(seed: Seed) -> Self {
        InstanceRng(Xoshiro256StarStar::seed_from_u64(seed.0))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound`: draws below `2^64 mod bound` are rejected
    /// and the accepted draw is reduced modulo `bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return (x % bound) as usize;
            }
        }
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Forward partial Fisher-Yates: for `i` in `0..k`, swap slot `i` with slot
    /// `i + below(len - i)`. The first `k` slots are the sample, in draw order.
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let len = items.len();
        for i in 0..k.min(len) {
            let j = i + self.below(len - i);
            items.swap(i, j);
        }
    }

    pub fn sample_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..len).collect();
        self.partial_shuffle(&mut idx, k);
        idx.truncate(k);
        idx
    }

    /// Two distinct indices in `0..len`, in draw order.
    pub fn distinct_pair(&mut self, len: usize) -> (usize, usize) {
        assert!(len >= 2);
        let i = self.below(len);
        let mut j = self.below(len - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let len = items.len();
        self.partial_shuffle(items, len);
    }
}
