//! Hashed n-gram featurizer.
//!
//! Answers are mapped into a fixed `2^18`-dimensional hashed space from
//! character 2–4-grams plus whitespace-token unigrams, term-frequency
//! weighted and L2-normalized. The hashing is FNV-1a, so vectors are stable
//! across platforms and toolchain versions.

use std::collections::HashMap;

/// Dimension of the hashed feature space.
pub const FEATURE_DIM: u32 = 1 << 18;

/// Sparse feature vector; entries are sorted by index and indices are
/// unique and below [`FEATURE_DIM`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn bucket(tag: u8, gram: &[u8]) -> u32 {
    let mut bytes = Vec::with_capacity(gram.len() + 1);
    bytes.push(tag);
    bytes.extend_from_slice(gram);
    (fnv1a(&bytes) % u64::from(FEATURE_DIM)) as u32
}

/// Featurize one answer text. Deterministic; empty text gives the zero
/// vector.
pub fn featurize(text: &str) -> FeatureVector {
    let mut counts: HashMap<u32, f64> = HashMap::new();

    let chars: Vec<char> = text.chars().collect();
    let mut gram_buf = String::new();
    for n in 2..=4usize {
        if chars.len() < n {
            break;
        }
        for window in chars.windows(n) {
            gram_buf.clear();
            gram_buf.extend(window.iter());
            *counts.entry(bucket(b'c', gram_buf.as_bytes())).or_default() += 1.0;
        }
    }
    for token in text.split_whitespace() {
        *counts.entry(bucket(b't', token.as_bytes())).or_default() += 1.0;
    }

    let mut entries: Vec<(u32, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|(i, _)| *i);

    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    FeatureVector { entries }
}
