use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

use super::{Generator, GeneratorInput, TokenDistribution, Vocabulary, EOS};

/// One row of a lookup table: the distribution to emit after `prefix`,
/// optionally restricted to a template or trigger text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    pub prefix: Vec<String>,
    pub probs: BTreeMap<String, f64>,
}

impl TableRule {
    fn matches(&self, template: &str, trigger: &str, prefix: &[String]) -> bool {
        self.prefix == prefix
            && self.template.as_deref().is_none_or(|t| t == template)
            && self.trigger.as_deref().is_none_or(|t| t == trigger)
    }

    fn specificity(&self) -> usize {
        usize::from(self.template.is_some()) + usize::from(self.trigger.is_some())
    }
}

/// Deterministic generator driven by a rule table. Unmatched prefixes emit
/// `[EOS]` with probability one.
#[derive(Debug, Clone)]
pub struct TableGenerator {
    rules: Vec<TableRule>,
    vocab: Arc<Vocabulary>,
}

impl TableGenerator {
    pub fn new(rules: Vec<TableRule>) -> Result<Self> {
        Self::with_words(rules, std::iter::empty::<String>())
    }

    pub fn with_words<I, S>(rules: Vec<TableRule>, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for (i, r) in rules.iter().enumerate() {
            if r.probs.values().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Validation(format!("rule {i} has a negative or non-finite probability")));
            }
        }
        let vocab = Vocabulary::new(
            words
                .into_iter()
                .map(Into::into)
                .chain(rules.iter().flat_map(|r| r.probs.keys().cloned())),
        );
        Ok(TableGenerator {
            rules,
            vocab: Arc::new(vocab),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(jsonl::read(path)?)
    }

    /// Emits `sequence` then `[EOS]` regardless of input.
    pub fn scripted(sequence: &[String]) -> Self {
        let rules = (0..=sequence.len())
            .map(|i| {
                let next = sequence.get(i).map_or(EOS, String::as_str);
                TableRule {
                    template: None,
                    trigger: None,
                    prefix: sequence[..i].to_vec(),
                    probs: [(next.to_string(), 1.0)].into_iter().collect(),
                }
            })
            .collect();
        Self::new(rules).expect("scripted rules are valid")
    }

    pub fn rules(&self) -> &[TableRule] {
        &self.rules
    }
}

impl Generator for TableGenerator {
    fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next_distribution(&self, input: &GeneratorInput, prefix: &[String]) -> Result<TokenDistribution> {
        let template = input.template_segment.join(" ");
        let trigger = input.trigger_words().join(" ");
        let mut best: Option<&TableRule> = None;
        for rule in &self.rules {
            if rule.matches(&template, &trigger, prefix)
                && best.is_none_or(|b| rule.specificity() > b.specificity())
            {
                best = Some(rule);
            }
        }
        Ok(match best {
            Some(rule) => TokenDistribution::from_map(self.vocab.clone(), &rule.probs),
            None => {
                let eos = [(EOS.to_string(), 1.0)].into_iter().collect();
                TokenDistribution::from_map(self.vocab.clone(), &eos)
            }
        })
    }
}
