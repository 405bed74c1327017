//! Hashed unigram/bigram features for tweet text.
//!
//! Recipe, in order:
//! 1. lowercase the text;
//! 2. replace URLs with `<url>` and `@mentions` with `<user>`;
//! 3. tokenize into `<url>`, `<user>`, cashtags (`$eurusd`), hashtags and
//!    alphanumeric words (inner `.`, `,` and `'` kept, so `1.1050` is one token);
//! 4. emit every unigram as `1:<tok>` and every adjacent pair as `2:<a> <b>`;
//! 5. hash each feature string with 64-bit FNV-1a and reduce modulo the dimension;
//! 6. L2-normalize the term counts.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::StanceError;
use crate::text::{replace_mentions, replace_urls};

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"<url>|<user>|[$#]?[\p{L}\p{N}_]+(?:[.,'][\p{L}\p{N}_]+)*").expect("token regex")
});

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Sparse, L2-normalized feature vector. Indices are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn zero(dim: usize) -> Self {
        FeatureVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from (index, value) pairs; duplicate indices are summed.
    /// Values are taken as given (no normalization).
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, StanceError> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i as usize >= dim {
                return Err(StanceError::DimensionMismatch {
                    expected: dim,
                    found: i as usize + 1,
                });
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Ok(FeatureVector { dim, indices, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Dot product with a dense vector of length at least `dim`.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }
}

/// Lowercased, normalized tokens of a tweet.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let no_urls = replace_urls(&lower);
    let normalized = replace_mentions(&no_urls);
    TOKEN_RE
        .find_iter(&normalized)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Featurizer with a fixed hash dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    dim: usize,
}

impl FeatureHasher {
    pub const MIN_DIM: usize = 1 << 10;

    /// `dim` must be a power of two and at least 1024.
    pub fn new(dim: usize) -> Result<Self, StanceError> {
        if dim < Self::MIN_DIM || !dim.is_power_of_two() || dim > u32::MAX as usize {
            return Err(StanceError::InvalidDimension(dim));
        }
        Ok(FeatureHasher { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, feature: &str) -> u32 {
        (fnv1a64(feature.as_bytes()) & (self.dim as u64 - 1)) as u32
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let tokens = tokenize(text);
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for tok in &tokens {
            *counts.entry(self.index(&format!("1:{tok}"))).or_insert(0.0) += 1.0;
        }
        for pair in tokens.windows(2) {
            *counts
                .entry(self.index(&format!("2:{} {}", pair[0], pair[1])))
                .or_insert(0.0) += 1.0;
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        let (indices, values) = counts.into_iter().map(|(i, c)| (i, c / norm)).unzip();
        FeatureVector {
            dim: self.dim,
            indices,
            values,
        }
    }
}

/// Convenience wrapper: validates `dim` and featurizes `text`.
pub fn featurize(text: &str, dim: usize) -> Result<FeatureVector, StanceError> {
    Ok(FeatureHasher::new(dim)?.featurize(text))
}
