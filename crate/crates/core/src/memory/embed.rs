//! Hashing bag-of-tokens embedding.
//!
//! Text is split on non-alphanumeric boundaries and lowercased. Each token is
//! hashed with 64-bit FNV-1a over its UTF-8 bytes, reduced modulo the
//! dimension, and counted. The count vector is scaled to unit length. Word
//! order does not matter and the result is identical on every platform.

use super::MemoryError;

pub const DEFAULT_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn bucket(token: &str, dim: usize) -> usize {
    (fnv1a64(token.as_bytes()) % dim as u64) as usize
}

/// Fails with [`MemoryError::EmptyText`] when `text` has no tokens.
pub fn embed(text: &str, dim: usize) -> Result<Vec<f64>, MemoryError> {
    assert!(dim > 0, "embedding dimension must be positive");
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(MemoryError::EmptyText);
    }
    let mut v = vec![0.0; dim];
    for t in &tokens {
        v[bucket(t, dim)] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Cosine similarity, clamped to [-1, 1]. Zero vectors score 0.
pub fn similarity(u: &[f64], v: &[f64]) -> Result<f64, MemoryError> {
    if u.len() != v.len() {
        return Err(MemoryError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
