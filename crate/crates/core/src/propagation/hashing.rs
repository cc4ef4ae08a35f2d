use serde::{Deserialize, Serialize};

use crate::features::tokenize;
use crate::sparse::SparseVector;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `std` hashers.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Maps text to an L2-normalized count vector over hashed word unigrams and
/// character n-grams of boundary-padded tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedFeaturizer {
    pub dim: usize,
    pub char_min: usize,
    pub char_max: usize,
    pub words: bool,
}

impl HashedFeaturizer {
    fn bucket(&self, namespace: u8, key: &str) -> u32 {
        let mut buf = Vec::with_capacity(key.len() + 1);
        buf.push(namespace);
        buf.extend_from_slice(key.as_bytes());
        (fnv1a(&buf) % self.dim as u64) as u32
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        let mut entries = Vec::new();
        for tok in tokenize(text) {
            if self.words {
                entries.push((self.bucket(b'w', &tok), 1.0));
            }
            let padded: Vec<char> = format!(" {tok} ").chars().collect();
            for n in self.char_min..=self.char_max {
                for gram in padded.windows(n) {
                    let gram: String = gram.iter().collect();
                    entries.push((self.bucket(b'c', &gram), 1.0));
                }
            }
        }
        let mut v = SparseVector::from_unsorted(self.dim, entries);
        let norm = v.entries.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut v.entries {
                e.1 /= norm;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn featurizer() -> HashedFeaturizer {
        HashedFeaturizer { dim: 1 << 18, char_min: 3, char_max: 5, words: true }
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn unit_norm_and_empty() {
        let v = featurizer().featurize("Estou muito cansado hoje");
        let norm: f64 = v.entries.iter().map(|e| e.1 * e.1).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(featurizer().featurize("   ").entries.is_empty());
    }

    #[test]
    fn feature_count_for_single_word() {
        // "abc" padded to " abc " (5 chars): 3 trigrams + 2 four-grams + 1 five-gram + 1 word.
        let f = HashedFeaturizer { dim: u32::MAX as usize, ..featurizer() };
        assert_eq!(f.featurize("abc").entries.len(), 7);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(featurizer().featurize("Insônia"), featurizer().featurize("insônia"));
    }
}
