//! Event ontology: event types, typed argument roles and description templates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder written in filled sequences for a slot without an argument.
pub const ARG_PLACEHOLDER: &str = "<arg>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSpec {
    pub name: String,
    pub entity_types: BTreeSet<String>,
    /// 1-based position of `<argN>` in the template.
    pub slot_index: usize,
}

impl RoleSpec {
    pub fn shares_entity_type(&self, other: &RoleSpec) -> bool {
        !self.entity_types.is_disjoint(&other.entity_types)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Literal(String),
    Slot(usize),
}

impl TemplateToken {
    pub fn as_literal(&self) -> Option<&str> {
        match self {
            TemplateToken::Literal(word) => Some(word),
            TemplateToken::Slot(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventTemplate {
    tokens: Vec<TemplateToken>,
}

impl EventTemplate {
    pub fn tokens(&self) -> &[TemplateToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.tokens.iter().filter_map(|t| match t {
            TemplateToken::Slot(i) => Some(*i),
            TemplateToken::Literal(_) => None,
        })
    }

    pub fn slot_count(&self) -> usize {
        self.slots().count()
    }

    pub fn has_slot(&self, slot: usize) -> bool {
        self.slots().any(|s| s == slot)
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().filter_map(TemplateToken::as_literal)
    }

    /// True when two slots follow each other with no literal between them.
    /// Such templates cannot be split unambiguously when parsing output.
    pub fn has_adjacent_slots(&self) -> bool {
        self.tokens
            .windows(2)
            .any(|w| matches!(w, [TemplateToken::Slot(_), TemplateToken::Slot(_)]))
    }

    /// Renders with numbered placeholders, the form accepted by [`parse_template`].
    pub fn render(&self) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(w) => w.clone(),
                TemplateToken::Slot(i) => format!("<arg{i}>"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Word sequence fed to generators: every slot becomes `<arg>`.
    pub fn placeholder_tokens(&self) -> Vec<String> {
        self.tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(w) => w.clone(),
                TemplateToken::Slot(_) => ARG_PLACEHOLDER.to_string(),
            })
            .collect()
    }
}

impl fmt::Display for EventTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn placeholder_index(word: &str) -> Option<usize> {
    let digits = word.strip_prefix("<arg")?.strip_suffix('>')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Splits a template on whitespace; `<argN>` words become slots bound to the
/// role whose `slot_index` is `N`.
pub fn parse_template(text: &str, roles: &[RoleSpec]) -> Result<EventTemplate> {
    let mut tokens = Vec::new();
    let mut last_slot = 0;
    for word in text.split_whitespace() {
        match placeholder_index(word) {
            Some(idx) => {
                if !roles.iter().any(|r| r.slot_index == idx) {
                    return Err(Error::Validation(format!(
                        "placeholder <arg{idx}> has no matching role"
                    )));
                }
                if idx <= last_slot {
                    return Err(Error::Validation(format!(
                        "placeholder <arg{idx}> repeated or out of order after <arg{last_slot}>"
                    )));
                }
                last_slot = idx;
                tokens.push(TemplateToken::Slot(idx));
            }
            None => tokens.push(TemplateToken::Literal(word.to_string())),
        }
    }
    if !tokens.iter().any(|t| matches!(t, TemplateToken::Literal(_))) {
        return Err(Error::Validation(format!(
            "template `{text}` has no literal words"
        )));
    }
    Ok(EventTemplate { tokens })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTypeDef {
    pub event_type: String,
    pub roles: Vec<RoleSpec>,
    pub template: EventTemplate,
    pub parent: Option<String>,
}

impl EventTypeDef {
    pub fn role(&self, name: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn role_for_slot(&self, slot: usize) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.slot_index == slot)
    }
}

/// One line of the ontology file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyRecord {
    pub event_type: String,
    pub roles: Vec<RoleRecord>,
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRecord {
    pub name: String,
    pub entity_types: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    types: BTreeMap<String, EventTypeDef>,
}

impl Ontology {
    pub fn from_records(records: impl IntoIterator<Item = OntologyRecord>) -> Result<Self> {
        let mut types = BTreeMap::new();
        for record in records {
            let def = validate_record(record)?;
            if types.contains_key(&def.event_type) {
                return Err(Error::Validation(format!(
                    "duplicate event type `{}`",
                    def.event_type
                )));
            }
            types.insert(def.event_type.clone(), def);
        }
        Ok(Ontology { types })
    }

    pub fn to_records(&self) -> Vec<OntologyRecord> {
        self.types
            .values()
            .map(|def| OntologyRecord {
                event_type: def.event_type.clone(),
                roles: def
                    .roles
                    .iter()
                    .map(|r| RoleRecord {
                        name: r.name.clone(),
                        entity_types: r.entity_types.iter().cloned().collect(),
                    })
                    .collect(),
                template: def.template.render(),
                parent: def.parent.clone(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Event types in identifier order.
    pub fn event_types(&self) -> impl Iterator<Item = &EventTypeDef> + '_ {
        self.types.values()
    }

    pub fn get(&self, event_type: &str) -> Option<&EventTypeDef> {
        self.types.get(event_type)
    }

    pub fn event_type(&self, event_type: &str) -> Result<&EventTypeDef> {
        self.types
            .get(event_type)
            .ok_or_else(|| Error::UnknownEventType(event_type.to_string()))
    }

    pub fn template_of(&self, event_type: &str) -> Result<&EventTemplate> {
        self.event_type(event_type).map(|def| &def.template)
    }

    pub fn contains(&self, event_type: &str) -> bool {
        self.types.contains_key(event_type)
    }
}

fn validate_record(record: OntologyRecord) -> Result<EventTypeDef> {
    let OntologyRecord {
        event_type,
        roles,
        template,
        parent,
    } = record;
    if event_type.is_empty() {
        return Err(Error::Validation("empty event_type".into()));
    }
    let mut specs: Vec<RoleSpec> = Vec::with_capacity(roles.len());
    for (i, role) in roles.into_iter().enumerate() {
        if role.entity_types.is_empty() {
            return Err(Error::Validation(format!(
                "{event_type}: role `{}` declares no entity types",
                role.name
            )));
        }
        if specs.iter().any(|s| s.name == role.name) {
            return Err(Error::Validation(format!(
                "{event_type}: duplicate role `{}`",
                role.name
            )));
        }
        specs.push(RoleSpec {
            name: role.name,
            entity_types: role.entity_types.into_iter().collect(),
            slot_index: i + 1,
        });
    }
    let template = parse_template(&template, &specs)
        .map_err(|e| Error::Validation(format!("{event_type}: {e}")))?;
    for spec in &specs {
        if !template.has_slot(spec.slot_index) {
            return Err(Error::Validation(format!(
                "{event_type}: role `{}` (<arg{}>) does not appear in the template",
                spec.name, spec.slot_index
            )));
        }
    }
    Ok(EventTypeDef {
        event_type,
        roles: specs,
        template,
        parent,
    })
}

pub fn load_ontology(path: &Path) -> Result<Ontology> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut types: BTreeMap<String, EventTypeDef> = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OntologyRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e))?;
        let def = validate_record(record)
            .map_err(|e| Error::Validation(format!("line {}: {e}", idx + 1)))?;
        if types.contains_key(&def.event_type) {
            return Err(Error::Validation(format!(
                "line {}: duplicate event type `{}`",
                idx + 1,
                def.event_type
            )));
        }
        types.insert(def.event_type.clone(), def);
    }
    Ok(Ontology { types })
}
