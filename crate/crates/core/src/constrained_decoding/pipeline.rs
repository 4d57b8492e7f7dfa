use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::corpus::{Document, EventMention};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::generation::{build_input, decode_greedy, query_window, Generator, GeneratorInput, TrainingPair};
use crate::memory::{DocumentMemory, EventRecord, RecordSource};
use crate::ontology::{EventTemplate, EventTypeDef, Ontology};
use crate::retrieval::{retrieve, retrieve_random, stable_hash, Embedder};
use crate::template::{gold_target, parse_decoded, SlotState};

use super::adjust::{adjust, AdjustConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    NoRetrieval,
    RandomMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub ablation: Ablation,
    pub constrained: bool,
    pub adjust: AdjustConfig,
    pub max_input_length: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            ablation: Ablation::None,
            constrained: true,
            adjust: AdjustConfig::default(),
            max_input_length: 512,
            max_steps: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub record: EventRecord,
    pub input: GeneratorInput,
    /// Event id of the memory record placed in the input.
    pub retrieved: Option<String>,
}

#[derive(Debug)]
pub struct DocumentExtraction {
    pub doc_id: String,
    pub events: Vec<EventOutcome>,
    /// Events that failed; processing continued without them.
    pub errors: Vec<Error>,
}

impl DocumentExtraction {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().map(|e| &e.record)
    }
}

/// Seed for the random-memory draw of one event, independent of processing
/// order across documents.
fn memory_seed(seed: u64, doc_id: &str, event_index: usize) -> u64 {
    seed ^ stable_hash(doc_id.as_bytes()).rotate_left(17) ^ (event_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Number of leading tokens the template automaton accepts before derailing.
pub fn consumed_prefix(tokens: &[String], template: &EventTemplate) -> usize {
    let mut state = SlotState::new(template);
    for (i, t) in tokens.iter().enumerate() {
        if state.advance(template, t).is_err() {
            return i;
        }
    }
    tokens.len()
}

/// Shared read-only resources of an extraction run.
pub struct Pipeline<'a> {
    pub ontology: &'a Ontology,
    pub generator: &'a dyn Generator,
    pub embedder: &'a dyn Embedder,
    pub constraints: &'a ConstraintSet,
    pub options: ExtractOptions,
}

impl<'a> Pipeline<'a> {
    fn memory_record<'m>(
        &self,
        def: &EventTypeDef,
        doc: &Document,
        event: &EventMention,
        event_index: usize,
        mem: &'m DocumentMemory,
    ) -> Result<Option<&'m EventRecord>> {
        match self.options.ablation {
            Ablation::NoRetrieval => Ok(None),
            Ablation::RandomMemory => Ok(retrieve_random(
                mem,
                memory_seed(self.options.seed, &doc.doc_id, event_index),
            )),
            Ablation::None => {
                let query = query_window(&def.template, doc, event.trigger, self.options.max_input_length);
                retrieve(&query, mem, self.embedder)
            }
        }
    }

    /// Decodes one event against the current memory and writes the result
    /// back into it.
    pub fn extract_event(
        &self,
        doc: &Document,
        event: &EventMention,
        event_index: usize,
        mem: &mut DocumentMemory,
    ) -> Result<EventOutcome> {
        self.try_extract(doc, event, event_index, mem)
            .map_err(|e| e.in_event(&event.event_id))
    }

    fn try_extract(
        &self,
        doc: &Document,
        event: &EventMention,
        event_index: usize,
        mem: &mut DocumentMemory,
    ) -> Result<EventOutcome> {
        let def = self.ontology.event_type(&event.event_type)?;
        let m_r = self.memory_record(def, doc, event, event_index, mem)?;
        let retrieved = m_r.map(|r| r.event_id.clone());
        let input = build_input(m_r, &def.template, doc, event.trigger, self.options.max_input_length)?;
        let tokens = if self.options.constrained {
            let (cs, cfg, memory) = (self.constraints, &self.options.adjust, &*mem);
            let mut hook = |d, s: &SlotState| adjust(d, s, def, memory, cs, cfg);
            decode_greedy(self.generator, &input, &def.template, Some(&mut hook), self.options.max_steps)?
        } else {
            decode_greedy(self.generator, &input, &def.template, None, self.options.max_steps)?
        };
        let keep = consumed_prefix(&tokens, &def.template);
        let parsed = parse_decoded(&tokens[..keep], &def.template);
        let record = EventRecord::from_parsed(&event.event_id, def, tokens, &parsed, RecordSource::Generated);
        mem.add_event(record.clone());
        Ok(EventOutcome {
            record,
            input,
            retrieved,
        })
    }

    /// Processes events in trigger order with a fresh memory.
    pub fn extract_document(&self, doc: &Document) -> DocumentExtraction {
        let mut mem = DocumentMemory::new();
        let mut events = Vec::new();
        let mut errors = Vec::new();
        let mut order: Vec<&EventMention> = doc.events.iter().collect();
        order.sort_by_key(|e| (e.trigger.start, e.trigger.end));
        for (i, event) in order.into_iter().enumerate() {
            match self.extract_event(doc, event, i, &mut mem) {
                Ok(outcome) => events.push(outcome),
                Err(e) => errors.push(e),
            }
        }
        DocumentExtraction {
            doc_id: doc.doc_id.clone(),
            events,
            errors,
        }
    }

    pub fn extract_corpus(&self, docs: &[Document], execution: Execution) -> Vec<DocumentExtraction> {
        exec::map(execution, docs, |d| self.extract_document(d))
    }
}

/// Gold-memory training pairs: each event's input carries the record
/// retrieved from the gold records of earlier events in the same document.
pub fn training_pairs(
    ontology: &Ontology,
    docs: &[Document],
    embedder: &dyn Embedder,
    options: &ExtractOptions,
) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for doc in docs {
        let mut mem = DocumentMemory::new();
        let mut order: Vec<&EventMention> = doc.events.iter().collect();
        order.sort_by_key(|e| (e.trigger.start, e.trigger.end));
        for (i, event) in order.into_iter().enumerate() {
            let def = ontology.event_type(&event.event_type)?;
            let m_r = match options.ablation {
                Ablation::NoRetrieval => None,
                Ablation::RandomMemory => retrieve_random(&mem, memory_seed(options.seed, &doc.doc_id, i)),
                Ablation::None => {
                    let query = query_window(&def.template, doc, event.trigger, options.max_input_length);
                    retrieve(&query, &mem, embedder)?
                }
            };
            let input = build_input(m_r, &def.template, doc, event.trigger, options.max_input_length)
                .map_err(|e| e.in_event(&event.event_id))?;
            let target = gold_target(def, doc, event)?;
            pairs.push((input, target));
            mem.add_event(EventRecord::gold(def, doc, event)?);
        }
    }
    Ok(pairs)
}
