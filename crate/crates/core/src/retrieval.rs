//! Dense retrieval over the document memory.
//!
//! Memory entries are scored against the query by a softmax over cosine
//! similarities of unit-normalized embeddings, and the best one is handed to
//! the generator as extra context.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::memory::{DocumentMemory, EventRecord};

const NORM_TOLERANCE: f64 = 1e-6;

/// Unit-length embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Scales `values` to unit length; `None` for a zero or non-finite vector.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        for v in &mut values {
            *v /= norm;
        }
        Some(Embedding(values))
    }

    /// First basis vector of dimension `dim`.
    pub fn basis(dim: usize) -> Self {
        let mut values = vec![0.0; dim.max(1)];
        values[0] = 1.0;
        Embedding(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &[String]) -> Result<Embedding>;
}

/// FNV-1a, used wherever a hash must be stable across runs and platforms.
pub(crate) fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Hashed bag-of-words embedder with IDF weights; an offline stand-in for a
/// sentence encoder. Terms are lowercased before hashing.
#[derive(Debug, Clone)]
pub struct HashedTfIdfEmbedder {
    dim: usize,
    doc_count: u64,
    doc_freq: HashMap<String, u64>,
}

impl HashedTfIdfEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    /// Unfitted embedder: every term has the same weight.
    pub fn new(dim: usize) -> Self {
        HashedTfIdfEmbedder {
            dim: dim.max(1),
            doc_count: 0,
            doc_freq: HashMap::new(),
        }
    }

    /// Fits document frequencies on `texts`, one text per "document".
    pub fn fit<'a, I, T>(dim: usize, texts: I) -> Self
    where
        I: IntoIterator<Item = &'a T>,
        T: AsRef<[String]> + 'a + ?Sized,
    {
        let mut out = Self::new(dim);
        for text in texts {
            out.doc_count += 1;
            let mut terms: Vec<String> = text.as_ref().iter().map(|t| t.to_lowercase()).collect();
            terms.sort();
            terms.dedup();
            for t in terms {
                *out.doc_freq.entry(t).or_default() += 1;
            }
        }
        out
    }

    /// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0);
        ((1 + self.doc_count) as f64 / (1 + df) as f64).ln() + 1.0
    }

    fn bucket(&self, term: &str) -> usize {
        (stable_hash(term.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for HashedTfIdfEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for HashedTfIdfEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &[String]) -> Result<Embedding> {
        // Ordered so that bucket sums are accumulated in a fixed order.
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in text {
            *tf.entry(t.to_lowercase()).or_default() += 1.0;
        }
        let mut values = vec![0.0; self.dim];
        for (term, count) in &tf {
            values[self.bucket(term)] += count * self.idf(term);
        }
        Ok(Embedding::normalized(values).unwrap_or_else(|| Embedding::basis(self.dim)))
    }
}

pub fn embed_default(embedder: &HashedTfIdfEmbedder, text: &[String]) -> Embedding {
    embedder
        .embed(text)
        .expect("hashed embedder is infallible")
}

fn check_unit(e: &Embedding) -> Result<()> {
    if (e.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Protocol(format!(
            "embedding norm {} is not 1",
            e.norm()
        )));
    }
    Ok(())
}

/// Cosine similarity of the query to every memory record.
pub fn similarities(x: &[String], mem: &DocumentMemory, e: &dyn Embedder) -> Result<Vec<f64>> {
    let q = e.embed(x)?;
    check_unit(&q)?;
    mem.records()
        .iter()
        .map(|r| {
            let m = e.embed(&r.sequence_tokens)?;
            check_unit(&m)?;
            Ok(q.dot(&m))
        })
        .collect()
}

/// Softmax over cosine similarities, in record order.
pub fn score_memory(x: &[String], mem: &DocumentMemory, e: &dyn Embedder) -> Result<Vec<(usize, f64)>> {
    if mem.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let f = similarities(x, mem, e)?;
    Ok(softmax(&f).into_iter().enumerate().collect())
}

pub(crate) fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Index of the most similar record; ties go to the lowest index.
pub fn retrieve_index(x: &[String], mem: &DocumentMemory, e: &dyn Embedder) -> Result<Option<usize>> {
    if mem.is_empty() {
        return Ok(None);
    }
    // Softmax is monotone, so the argmax over raw similarities is the same
    // record and avoids ties introduced by rounding in exp.
    let f = similarities(x, mem, e)?;
    let mut best = 0;
    for (i, v) in f.iter().enumerate().skip(1) {
        if *v > f[best] {
            best = i;
        }
    }
    Ok(Some(best))
}

pub fn retrieve<'m>(x: &[String], mem: &'m DocumentMemory, e: &dyn Embedder) -> Result<Option<&'m EventRecord>> {
    Ok(retrieve_index(x, mem, e)?.map(|i| &mem.records()[i]))
}

/// Uniformly random record drawn from a generator seeded with `seed`.
pub fn retrieve_random(mem: &DocumentMemory, seed: u64) -> Option<&EventRecord> {
    if mem.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(&mem.records()[rng.gen_range(0..mem.len())])
}
