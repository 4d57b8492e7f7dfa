//! Annotated documents: loading, validation, dataset statistics and
//! adversarial sentence splicing.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::ontology::Ontology;

/// Half-open token interval `[start, end)`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    fn shifted(self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }

    fn check(&self, len: usize, context: impl FnOnce() -> String) -> Result<()> {
        if self.start < self.end && self.end <= len {
            Ok(())
        } else {
            Err(Error::SpanOutOfBounds {
                start: self.start,
                end: self.end,
                len,
                context: context(),
            })
        }
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldArgument {
    pub role: String,
    pub span: Span,
    #[serde(default, rename = "head", skip_serializing_if = "Option::is_none")]
    pub head_span: Option<Span>,
    pub entity_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub event_id: String,
    pub event_type: String,
    pub trigger: Span,
    #[serde(default)]
    pub arguments: Vec<GoldArgument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefCluster {
    pub cluster_id: String,
    pub entity_id: String,
    pub mentions: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub sentence_bounds: Vec<Span>,
    #[serde(default)]
    pub events: Vec<EventMention>,
    #[serde(default)]
    pub clusters: Vec<CorefCluster>,
}

impl Document {
    /// Validates every span and sorts events by trigger start.
    pub fn normalized(mut self) -> Result<Self> {
        self.validate()?;
        self.events.sort_by_key(|e| e.trigger.start);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.tokens.len();
        let mut expected = 0;
        for (i, s) in self.sentence_bounds.iter().enumerate() {
            if s.start != expected {
                return Err(Error::Validation(format!(
                    "doc {}: sentence {i} starts at {} but the previous one ended at {expected}",
                    self.doc_id, s.start
                )));
            }
            s.check(len, || format!("doc {} sentence {i}", self.doc_id))?;
            expected = s.end;
        }
        if expected != len {
            return Err(Error::Validation(format!(
                "doc {}: sentences cover {expected} of {len} tokens",
                self.doc_id
            )));
        }
        let mut ids = HashSet::new();
        for ev in &self.events {
            if !ids.insert(ev.event_id.as_str()) {
                return Err(Error::Validation(format!(
                    "doc {}: duplicate event id {}",
                    self.doc_id, ev.event_id
                )));
            }
            ev.trigger
                .check(len, || format!("doc {} event {} trigger", self.doc_id, ev.event_id))?;
            for arg in &ev.arguments {
                let ctx = || format!("doc {} event {} role {}", self.doc_id, ev.event_id, arg.role);
                arg.span.check(len, ctx)?;
                if let Some(head) = arg.head_span {
                    head.check(len, ctx)?;
                    if !arg.span.contains(&head) {
                        return Err(Error::Validation(format!("{}: head outside span", ctx())));
                    }
                }
            }
        }
        for c in &self.clusters {
            if c.mentions.is_empty() {
                return Err(Error::Validation(format!(
                    "doc {}: cluster {} has no mentions",
                    self.doc_id, c.cluster_id
                )));
            }
            for m in &c.mentions {
                m.check(len, || format!("doc {} cluster {}", self.doc_id, c.cluster_id))?;
            }
        }
        Ok(())
    }

    /// Checks event types and argument roles against the ontology.
    pub fn validate_against(&self, ontology: &Ontology) -> Result<()> {
        for ev in &self.events {
            let def = ontology.event_type(&ev.event_type)?;
            for arg in &ev.arguments {
                if def.role(&arg.role).is_none() {
                    return Err(Error::Validation(format!(
                        "doc {} event {}: role `{}` is not defined for {}",
                        self.doc_id, ev.event_id, arg.role, ev.event_type
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn span_tokens(&self, span: Span) -> &[String] {
        &self.tokens[span.start.min(self.tokens.len())..span.end.min(self.tokens.len())]
    }

    pub fn span_text(&self, span: Span) -> String {
        self.span_tokens(span).join(" ")
    }

    pub fn event(&self, event_id: &str) -> Option<&EventMention> {
        self.events.iter().find(|e| e.event_id == event_id)
    }

    pub fn cluster_of(&self, entity_id: &str) -> Option<&CorefCluster> {
        self.clusters.iter().find(|c| c.entity_id == entity_id)
    }
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let raw: Vec<Document> = jsonl::read(path)?;
    raw.into_iter().map(Document::normalized).collect()
}

pub fn save_documents(path: &Path, docs: &[Document]) -> Result<()> {
    jsonl::write(path, docs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub doc_count: usize,
    pub sentence_count: usize,
    pub event_count: usize,
    pub token_count: usize,
    /// `None` for an empty collection.
    pub avg_events: Option<f64>,
    pub avg_tokens: Option<f64>,
}

pub fn dataset_stats(docs: &[Document]) -> DatasetStats {
    let doc_count = docs.len();
    let sentence_count = docs.iter().map(|d| d.sentence_bounds.len()).sum();
    let event_count: usize = docs.iter().map(|d| d.events.len()).sum();
    let token_count: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let mean = |total: usize| (doc_count > 0).then(|| total as f64 / doc_count as f64);
    DatasetStats {
        doc_count,
        sentence_count,
        event_count,
        token_count,
        avg_events: mean(event_count),
        avg_tokens: mean(token_count),
    }
}

/// Whole sentences (and the events they carry) to splice into a document.
/// Spans inside `events` and `clusters` are relative to the first inserted token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialInsertion {
    pub doc_id: String,
    pub insert_after_sentence: usize,
    pub sentence_tokens: Vec<Vec<String>>,
    #[serde(default)]
    pub events: Vec<EventMention>,
    #[serde(default)]
    pub clusters: Vec<CorefCluster>,
}

impl AdversarialInsertion {
    pub fn token_count(&self) -> usize {
        self.sentence_tokens.iter().map(Vec::len).sum()
    }
}

pub fn load_insertions(path: &Path) -> Result<Vec<AdversarialInsertion>> {
    jsonl::read(path)
}

pub fn splice_adversarial(doc: &Document, insertion: &AdversarialInsertion) -> Result<Document> {
    let shift = insertion.token_count();
    if shift == 0 && insertion.events.is_empty() && insertion.clusters.is_empty() {
        return Ok(doc.clone());
    }
    let sentence = insertion.insert_after_sentence;
    let Some(anchor) = doc.sentence_bounds.get(sentence) else {
        return Err(Error::SpanOutOfBounds {
            start: sentence,
            end: sentence + 1,
            len: doc.sentence_bounds.len(),
            context: format!("insertion sentence index for doc {}", doc.doc_id),
        });
    };
    let at = anchor.end;
    for ev in &insertion.events {
        let ctx = || format!("inserted event {} in doc {}", ev.event_id, doc.doc_id);
        ev.trigger.check(shift, ctx)?;
        for arg in &ev.arguments {
            arg.span.check(shift, ctx)?;
            if let Some(h) = arg.head_span {
                h.check(shift, ctx)?;
            }
        }
        if doc.event(&ev.event_id).is_some() {
            return Err(Error::Validation(format!(
                "inserted event id {} already exists in doc {}",
                ev.event_id, doc.doc_id
            )));
        }
    }
    for c in &insertion.clusters {
        for m in &c.mentions {
            m.check(shift, || format!("inserted cluster {} in doc {}", c.cluster_id, doc.doc_id))?;
        }
    }

    let remap = |s: Span| -> Result<Span> {
        if s.start >= at {
            Ok(s.shifted(shift))
        } else if s.end <= at {
            Ok(s)
        } else {
            Err(Error::Validation(format!(
                "span [{}, {}) in doc {} crosses the insertion point {at}",
                s.start, s.end, doc.doc_id
            )))
        }
    };

    let mut out = doc.clone();
    out.tokens = doc.tokens[..at]
        .iter()
        .chain(insertion.sentence_tokens.iter().flatten())
        .chain(doc.tokens[at..].iter())
        .cloned()
        .collect();

    let mut bounds: Vec<Span> = doc.sentence_bounds[..=sentence].to_vec();
    let mut cursor = at;
    for s in insertion.sentence_tokens.iter().filter(|s| !s.is_empty()) {
        bounds.push(Span::new(cursor, cursor + s.len()));
        cursor += s.len();
    }
    bounds.extend(doc.sentence_bounds[sentence + 1..].iter().map(|s| s.shifted(shift)));
    out.sentence_bounds = bounds;

    for ev in &mut out.events {
        ev.trigger = remap(ev.trigger)?;
        for arg in &mut ev.arguments {
            arg.span = remap(arg.span)?;
            arg.head_span = arg.head_span.map(remap).transpose()?;
        }
    }
    for c in &mut out.clusters {
        for m in &mut c.mentions {
            *m = remap(*m)?;
        }
    }

    for ev in &insertion.events {
        let mut ev = ev.clone();
        ev.trigger = ev.trigger.shifted(at);
        for arg in &mut ev.arguments {
            arg.span = arg.span.shifted(at);
            arg.head_span = arg.head_span.map(|h| h.shifted(at));
        }
        out.events.push(ev);
    }
    out.events.sort_by_key(|e| e.trigger.start);

    for c in &insertion.clusters {
        let mentions = c.mentions.iter().map(|m| m.shifted(at));
        match out.clusters.iter_mut().find(|x| x.entity_id == c.entity_id) {
            Some(existing) => existing.mentions.extend(mentions),
            None => out.clusters.push(CorefCluster {
                cluster_id: c.cluster_id.clone(),
                entity_id: c.entity_id.clone(),
                mentions: mentions.collect(),
            }),
        }
    }
    out.validate()?;
    Ok(out)
}
