//! Per-document memory of extracted events and the entity → role index used
//! by constrained decoding.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::RoleKey;
use crate::corpus::{Document, EventMention};
use crate::error::Result;
use crate::jsonl;
use crate::ontology::EventTypeDef;
use crate::template::{gold_target, ParsedSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Gold,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub event_type: String,
    pub sequence_tokens: Vec<String>,
    /// Role name → entity texts (words joined by single spaces).
    pub role_assignments: BTreeMap<String, Vec<String>>,
    pub source: RecordSource,
}

impl EventRecord {
    /// Builds a record from a parsed sequence, naming slots by their roles.
    pub fn from_parsed(
        event_id: &str,
        def: &EventTypeDef,
        sequence_tokens: Vec<String>,
        parsed: &ParsedSequence,
        source: RecordSource,
    ) -> Self {
        let mut role_assignments = BTreeMap::new();
        for (slot, args) in &parsed.slots {
            if let Some(role) = def.role_for_slot(*slot) {
                role_assignments.insert(
                    role.name.clone(),
                    args.iter().map(|a| a.join(" ")).collect(),
                );
            }
        }
        EventRecord {
            event_id: event_id.to_string(),
            event_type: def.event_type.clone(),
            sequence_tokens,
            role_assignments,
            source,
        }
    }

    /// Gold-standard record: the template filled with the annotated arguments.
    pub fn gold(def: &EventTypeDef, doc: &Document, event: &EventMention) -> Result<Self> {
        let target = gold_target(def, doc, event)?;
        let parsed = crate::template::parse_decoded(&target.tokens, &def.template);
        Ok(Self::from_parsed(
            &event.event_id,
            def,
            target.tokens,
            &parsed,
            RecordSource::Gold,
        ))
    }

    /// `(entity text, role)` pairs in role order.
    pub fn entities(&self) -> impl Iterator<Item = (&str, RoleKey)> + '_ {
        self.role_assignments.iter().flat_map(move |(role, texts)| {
            texts
                .iter()
                .map(move |t| (t.as_str(), RoleKey::new(&self.event_type, role)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCount {
    pub event_type: String,
    pub role: String,
    pub count: u64,
}

impl RoleCount {
    pub fn key(&self) -> RoleKey {
        RoleKey::new(&self.event_type, &self.role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Promotion {
    pub entity: String,
    pub event_type: String,
    pub role: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentMemory {
    records: Vec<EventRecord>,
    entity_index: BTreeMap<String, Vec<RoleCount>>,
}

impl DocumentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn entity_index(&self) -> &BTreeMap<String, Vec<RoleCount>> {
        &self.entity_index
    }

    pub fn add_event(&mut self, rec: EventRecord) {
        for (entity, key) in rec.entities() {
            let roles = self.entity_index.entry(entity.to_string()).or_default();
            match roles
                .iter_mut()
                .find(|r| r.event_type == key.event_type && r.role == key.role)
            {
                Some(r) => r.count += 1,
                None => roles.push(RoleCount {
                    event_type: key.event_type,
                    role: key.role,
                    count: 1,
                }),
            }
        }
        self.records.push(rec);
    }

    /// Roles recorded for an exact (case-sensitive) entity text.
    pub fn entity_roles(&self, entity: &str) -> &[RoleCount] {
        self.entity_index.get(entity).map_or(&[], Vec::as_slice)
    }

    /// Entity/role combinations seen strictly more than `min_count` times.
    pub fn promotion_candidates(&self, min_count: u64) -> Vec<Promotion> {
        self.entity_index
            .iter()
            .flat_map(|(entity, roles)| {
                roles.iter().filter(|r| r.count > min_count).map(move |r| Promotion {
                    entity: entity.clone(),
                    event_type: r.event_type.clone(),
                    role: r.role.clone(),
                })
            })
            .collect()
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.records)
    }
}
