use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Maps text to a fixed-width feature vector.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode<T: Scalar>(&self, text: &str) -> Vec<T>;

    /// Short identifier recorded in model fingerprints.
    fn id(&self) -> String;
}

/// Hashed bag of character n-grams with signed feature hashing.
///
/// Text is lowercased and padded with one space on each side so word
/// boundaries produce their own n-grams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgramEncoder {
    pub buckets: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for HashedNgramEncoder {
    fn default() -> Self {
        Self {
            buckets: 2048,
            min_n: 2,
            max_n: 4,
        }
    }
}

impl HashedNgramEncoder {
    /// Visit every (bucket, sign) feature of `text`.
    pub fn for_each_feature(&self, text: &str, mut f: impl FnMut(usize, bool)) {
        let mut chars = Vec::with_capacity(text.len() + 2);
        chars.push(' ');
        chars.extend(text.chars().flat_map(char::to_lowercase));
        chars.push(' ');
        for n in self.min_n..=self.max_n {
            for gram in chars.windows(n) {
                let h = fnv1a(gram);
                let bucket = (h % self.buckets as u64) as usize;
                f(bucket, h >> 63 == 1);
            }
        }
    }
}

impl TextEncoder for HashedNgramEncoder {
    fn dim(&self) -> usize {
        self.buckets
    }

    fn encode<T: Scalar>(&self, text: &str) -> Vec<T> {
        let mut v = vec![T::zero(); self.buckets];
        self.for_each_feature(text, |bucket, negative| {
            if negative {
                v[bucket] = v[bucket] - T::one();
            } else {
                v[bucket] = v[bucket] + T::one();
            }
        });
        v
    }

    fn id(&self) -> String {
        format!("hashed-ngram:{}:{}-{}", self.buckets, self.min_n, self.max_n)
    }
}

fn fnv1a(chars: &[char]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &c in chars {
        for byte in u32::from(c).to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    // final avalanche so the sign bit is usable
    hash ^= hash >> 33;
    hash = hash.wrapping_mul(0xff51_afd7_ed55_8ccd);
    hash ^= hash >> 33;
    hash
}

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        None
    } else {
        Some(dot / (na * nb))
    }
}
