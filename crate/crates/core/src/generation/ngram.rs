//! Count-based generator: a backoff n-gram over target sequences mixed with a
//! copy distribution over the memory and context segments.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::ARG_PLACEHOLDER;
use crate::template::{Provenance, ARG_SEPARATOR};

use super::{is_reserved, Generator, GeneratorInput, TokenDistribution, TrainingPair, Vocabulary, EOS, UNK};

const KEY_SEP: char = '\u{1f}';
const SHAPES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    /// Mixture weight of the copy distribution.
    pub copy_weight: f64,
    pub add_k: f64,
    /// History tokens seen fewer times than this in targets read as `<unk>`.
    pub min_history_count: u64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 3,
            copy_weight: 0.3,
            add_k: 0.01,
            min_history_count: 2,
        }
    }
}

impl NgramConfig {
    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.copy_weight) {
            return Err(Error::Config(format!("copy weight {} outside [0, 1)", self.copy_weight)));
        }
        if !(self.add_k > 0.0 && self.add_k.is_finite()) {
            return Err(Error::Config(format!("add-k constant {} must be positive", self.add_k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Model {
    config: NgramConfig,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    history_vocab: BTreeSet<String>,
    copy_propensity: [f64; SHAPES],
    targets: BTreeSet<String>,
}

impl Model {
    fn history_token(&self, t: &str) -> String {
        if self.history_vocab.contains(t) {
            t.to_string()
        } else {
            UNK.to_string()
        }
    }
}

#[derive(Debug, Clone)]
pub struct NgramGenerator {
    model: Model,
    totals: HashMap<String, u64>,
    vocab: Arc<Vocabulary>,
}

fn shape(tok: &str) -> usize {
    match tok.chars().next() {
        Some(c) if c.is_uppercase() => 0,
        Some(c) if c.is_lowercase() => 1,
        Some(c) if c.is_ascii_digit() => 2,
        Some(_) if tok.chars().all(|c| c.is_ascii_punctuation()) => 3,
        _ => 4,
    }
}

fn bos_symbol(template_segment: &[String]) -> String {
    format!("<bos:{}>", template_segment.join("_"))
}

fn sources(input: &GeneratorInput) -> impl Iterator<Item = &[String]> {
    input
        .memory_segment
        .as_deref()
        .into_iter()
        .chain(std::iter::once(input.context_segment.as_slice()))
}

impl NgramGenerator {
    pub fn train(pairs: &[TrainingPair], config: NgramConfig) -> Result<Self> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for (_, target) in pairs {
            for t in target.tokens.iter().map(String::as_str).chain([EOS]) {
                *freq.entry(t).or_default() += 1;
            }
        }
        let history_vocab: BTreeSet<String> = freq
            .iter()
            .filter(|(_, c)| **c >= config.min_history_count)
            .map(|(t, _)| t.to_string())
            .collect();
        let targets: BTreeSet<String> = freq.keys().map(|t| t.to_string()).collect();

        let mut model = Model {
            config,
            counts: BTreeMap::new(),
            history_vocab,
            copy_propensity: [0.0; SHAPES],
            targets,
        };
        let mut copied = [0.0f64; SHAPES];
        let mut seen = [0.0f64; SHAPES];
        let mut source_words = BTreeSet::new();
        for (input, target) in pairs {
            let mut hist = vec![bos_symbol(&input.template_segment); config.order - 1];
            for t in target.tokens.iter().map(String::as_str).chain([EOS]) {
                for n in 0..config.order {
                    let key = hist[hist.len() - n..].join(&KEY_SEP.to_string());
                    *model.counts.entry(key).or_default().entry(t.to_string()).or_default() += 1;
                }
                if config.order > 1 {
                    hist.remove(0);
                    hist.push(model.history_token(t));
                }
            }

            let mut present = HashSet::new();
            for seg in sources(input) {
                for t in seg.iter().filter(|t| !is_reserved(t)) {
                    seen[shape(t)] += 1.0;
                    present.insert(t.as_str());
                    source_words.insert(t.clone());
                }
            }
            for (t, p) in target.tokens.iter().zip(&target.provenance) {
                if matches!(p, Provenance::SlotContent(_))
                    && t != ARG_SEPARATOR
                    && present.contains(t.as_str())
                {
                    copied[shape(t)] += 1.0;
                }
            }
        }
        for s in 0..SHAPES {
            model.copy_propensity[s] = (copied[s] + 1.0) / (seen[s] + 2.0);
        }
        let generator = Self::from_model(model);
        Ok(generator.with_words(source_words))
    }

    fn from_model(model: Model) -> Self {
        let totals = model
            .counts
            .iter()
            .map(|(k, m)| (k.clone(), m.values().sum()))
            .collect();
        let vocab = Arc::new(Vocabulary::new(model.targets.iter().cloned()));
        NgramGenerator { model, totals, vocab }
    }

    /// Rebinds to a larger vocabulary so that copy candidates outside the
    /// training targets can be emitted.
    pub fn with_words<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.vocab = Arc::new(self.vocab.extended(words));
        self
    }

    pub fn config(&self) -> &NgramConfig {
        &self.model.config
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.model)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        model.config.validate()?;
        Ok(Self::from_model(model))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn ngram_probs(&self, template_segment: &[String], prefix: &[String]) -> Vec<f64> {
        let order = self.model.config.order;
        let mut hist = vec![bos_symbol(template_segment); order - 1];
        hist.extend(prefix.iter().map(|t| self.model.history_token(t)));
        let hist = &hist[hist.len() - (order - 1)..];
        let v = self.vocab.len() as f64;
        let k = self.model.config.add_k;
        for n in (0..order).rev() {
            let key = hist[hist.len() - n..].join(&KEY_SEP.to_string());
            let (Some(counts), Some(&total)) = (self.model.counts.get(&key), self.totals.get(&key)) else {
                continue;
            };
            let denom = total as f64 + k * v;
            let mut probs = vec![k / denom; self.vocab.len()];
            for (tok, c) in counts {
                if let Some(id) = self.vocab.id(tok) {
                    probs[id] += *c as f64 / denom;
                }
            }
            return probs;
        }
        vec![1.0 / v; self.vocab.len()]
    }

    fn copy_probs(&self, input: &GeneratorInput, prefix: &[String]) -> Option<Vec<f64>> {
        let literals: HashSet<&str> = input
            .template_segment
            .iter()
            .map(String::as_str)
            .filter(|t| *t != ARG_PLACEHOLDER)
            .collect();
        let prop = &self.model.copy_propensity;
        let mut w = vec![0.0; self.vocab.len()];
        let mut any = false;

        let continuing = prefix
            .last()
            .filter(|p| !literals.contains(p.as_str()) && *p != ARG_SEPARATOR && !is_reserved(p));
        if let Some(prev) = continuing {
            for seg in sources(input) {
                for pair in seg.windows(2) {
                    if pair[0] == *prev && !is_reserved(&pair[1]) {
                        if let Some(id) = self.vocab.id(&pair[1]) {
                            w[id] += prop[shape(&pair[1])];
                            any = true;
                        }
                    }
                }
            }
        }
        if !any {
            for seg in sources(input) {
                for t in seg.iter().filter(|t| !is_reserved(t)) {
                    if let Some(id) = self.vocab.id(t) {
                        w[id] += prop[shape(t)];
                        any = true;
                    }
                }
            }
        }
        if !any {
            return None;
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
        Some(w)
    }
}

impl Generator for NgramGenerator {
    fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next_distribution(&self, input: &GeneratorInput, prefix: &[String]) -> Result<TokenDistribution> {
        let mut probs = self.ngram_probs(&input.template_segment, prefix);
        if let Some(copy) = self.copy_probs(input, prefix) {
            let lambda = self.model.config.copy_weight;
            for (p, c) in probs.iter_mut().zip(copy) {
                *p = (1.0 - lambda) * *p + lambda * c;
            }
        }
        TokenDistribution::new(self.vocab.clone(), probs)
    }
}
