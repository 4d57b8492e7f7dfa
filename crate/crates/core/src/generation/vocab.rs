use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{RESERVED, UNK};

/// Closed token inventory. Reserved tokens take the first ids; the remaining
/// words follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let rest: BTreeSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w| !RESERVED.contains(&w.as_str()))
            .collect();
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|t| t.to_string())
            .chain(rest)
            .collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    /// This vocabulary plus `more`, with ids reassigned.
    pub fn extended<I, S>(&self, more: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            self.tokens
                .iter()
                .cloned()
                .chain(more.into_iter().map(Into::into)),
        )
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    vocab: Arc<Vocabulary>,
    probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(vocab: Arc<Vocabulary>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != vocab.len() {
            return Err(Error::Validation(format!(
                "distribution has {} entries for a vocabulary of {}",
                probs.len(),
                vocab.len()
            )));
        }
        Ok(TokenDistribution { vocab, probs })
    }

    /// Tokens outside the vocabulary contribute their mass to `<unk>`.
    pub fn from_map(vocab: Arc<Vocabulary>, map: &BTreeMap<String, f64>) -> Self {
        let mut probs = vec![0.0; vocab.len()];
        let unk = vocab.id(UNK).expect("reserved token");
        for (tok, p) in map {
            probs[vocab.id(tok).unwrap_or(unk)] += p;
        }
        TokenDistribution { vocab, probs }
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.vocab.id(token).map_or(0.0, |i| self.probs[i])
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_non_negative(&self) -> bool {
        self.probs.iter().all(|p| p.is_finite() && *p >= 0.0)
    }

    /// Scales to unit mass; a zero-mass distribution is left unchanged.
    pub fn renormalize(&mut self) {
        let sum = self.sum();
        if sum > 0.0 {
            for p in &mut self.probs {
                *p /= sum;
            }
        }
    }

    /// Most probable token; ties go to the lexicographically smallest.
    pub fn argmax(&self) -> &str {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            let b = self.probs[best];
            if p > b || (p == b && self.vocab.token(i) < self.vocab.token(best)) {
                best = i;
            }
        }
        self.vocab.token(best)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.vocab.token(i), p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_tokens_first() {
        let v = Vocabulary::new(["zeta", "alpha", "<unk>", "alpha"]);
        assert_eq!(v.len(), RESERVED.len() + 2);
        assert_eq!(v.id("<arg>"), Some(0));
        assert_eq!(v.token(RESERVED.len()), "alpha");
        assert_eq!(v.token(RESERVED.len() + 1), "zeta");
    }

    #[test]
    fn unknown_mass_goes_to_unk() {
        let v = Arc::new(Vocabulary::new(["a"]));
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 0.5);
        m.insert("zz".to_string(), 0.25);
        m.insert("<unk>".to_string(), 0.25);
        let d = TokenDistribution::from_map(v, &m);
        assert_eq!(d.prob("<unk>"), 0.5);
        assert_eq!(d.prob("a"), 0.5);
        assert_eq!(d.prob("zz"), 0.0);
    }
}
