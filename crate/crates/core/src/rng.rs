//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator seeded from a SplitMix64 hash of the
//! user seed, a purpose tag and a list of indices (restart, trial, block...).
//! Streams for different indices are independent of the order in which they
//! are created, so parallel and serial runs draw identical numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub type Stream = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Hashes `(seed, tag, indices)` to a single word.
pub fn hash_key(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    derive(splitmix64(seed ^ splitmix64(tag_hash(tag))), indices)
}

/// Mixes further indices into an already hashed key.
pub fn derive(base: u64, indices: &[u64]) -> u64 {
    let mut h = base;
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x5151)));
    }
    h
}

/// Opens the stream identified by `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> Stream {
    let mut key = [0u8; 32];
    let mut h = hash_key(seed, tag, indices);
    for chunk in key.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform double in [0, 1) derived from a hashed key, for random-access draws.
pub fn unit_from_key(key: u64) -> f64 {
    (splitmix64(key) >> 11) as f64 / (1u64 << 53) as f64
}

/// Draws an index from a pmf using a uniform variate `u` in [0, 1).
pub fn sample_index(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // roundoff: fall back to the last symbol with positive mass
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample<R: Rng + ?Sized>(rng: &mut R, pmf: &[f64]) -> usize {
    sample_index(pmf, rng.random::<f64>())
}

/// Symmetric Dirichlet(`alpha`) draw of dimension `k`, via normalized Gamma variates.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    loop {
        let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return g.into_iter().map(|x| x / s).collect();
        }
    }
}

/// `rows` independent Dirichlet rows of dimension `k`, concatenated.
pub fn dirichlet_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, k: usize, alpha: f64) -> Vec<f64> {
    (0..rows).flat_map(|_| dirichlet(rng, k, alpha)).collect()
}
