use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::Result;
use crate::jsonl;
use crate::memory::EventRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedArgument {
    pub role: String,
    pub text: String,
    /// Document offsets when the text occurs verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub event_id: String,
    pub event_type: String,
    pub arguments: Vec<PredictedArgument>,
}

fn distance(a: Span, b: Span) -> usize {
    b.start.saturating_sub(a.end).max(a.start.saturating_sub(b.end))
}

/// Occurrence of `words` closest to `anchor`; ties go to the earlier one.
pub fn resolve_span(doc: &Document, words: &[String], anchor: Span) -> Option<Span> {
    if words.is_empty() || words.len() > doc.tokens.len() {
        return None;
    }
    doc.tokens
        .windows(words.len())
        .enumerate()
        .filter(|(_, w)| *w == words)
        .map(|(i, _)| Span::new(i, i + words.len()))
        .min_by_key(|s| (distance(*s, anchor), s.start))
}

impl Prediction {
    pub fn from_record(doc: &Document, record: &EventRecord) -> Self {
        let anchor = doc
            .event(&record.event_id)
            .map_or(Span::new(0, 0), |e| e.trigger);
        let arguments = record
            .role_assignments
            .iter()
            .flat_map(|(role, texts)| {
                texts.iter().map(move |text| {
                    let words: Vec<String> = text.split_whitespace().map(String::from).collect();
                    PredictedArgument {
                        role: role.clone(),
                        text: text.clone(),
                        span: resolve_span(doc, &words, anchor),
                    }
                })
            })
            .collect();
        Prediction {
            doc_id: doc.doc_id.clone(),
            event_id: record.event_id.clone(),
            event_type: record.event_type.clone(),
            arguments,
        }
    }
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    jsonl::read(path)
}

pub fn save_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    jsonl::write(path, predictions)
}
