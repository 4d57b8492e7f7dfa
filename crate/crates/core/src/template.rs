//! Filling templates into target sequences, parsing generated sequences back
//! into slot assignments, and the slot automaton followed during decoding.

use std::collections::BTreeMap;

use crate::corpus::{Document, EventMention};
use crate::error::{Error, Result};
use crate::ontology::{EventTemplate, EventTypeDef, TemplateToken, ARG_PLACEHOLDER};

/// Joins multiple arguments that fill the same slot.
pub const ARG_SEPARATOR: &str = "and";

/// Slot index → argument texts (each a word list) in output order.
pub type SlotAssignment = BTreeMap<usize, Vec<Vec<String>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Literal,
    SlotContent(usize),
    UnfilledPlaceholder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSequence {
    pub tokens: Vec<String>,
    pub provenance: Vec<Provenance>,
}

impl TargetSequence {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn fill_template(template: &EventTemplate, assignment: &SlotAssignment) -> Result<TargetSequence> {
    if let Some(&slot) = assignment.keys().find(|s| !template.has_slot(**s)) {
        return Err(Error::UnknownSlot(slot));
    }
    let mut tokens = Vec::new();
    let mut provenance = Vec::new();
    for tok in template.tokens() {
        match tok {
            TemplateToken::Literal(w) => {
                tokens.push(w.clone());
                provenance.push(Provenance::Literal);
            }
            TemplateToken::Slot(i) => {
                let args = assignment
                    .get(i)
                    .map(|a| a.iter().filter(|x| !x.is_empty()).collect::<Vec<_>>())
                    .unwrap_or_default();
                if args.is_empty() {
                    tokens.push(ARG_PLACEHOLDER.to_string());
                    provenance.push(Provenance::UnfilledPlaceholder(*i));
                    continue;
                }
                for (n, arg) in args.iter().enumerate() {
                    if n > 0 {
                        tokens.push(ARG_SEPARATOR.to_string());
                        provenance.push(Provenance::SlotContent(*i));
                    }
                    tokens.extend(arg.iter().cloned());
                    provenance.extend(std::iter::repeat_n(Provenance::SlotContent(*i), arg.len()));
                }
            }
        }
    }
    Ok(TargetSequence { tokens, provenance })
}

/// Gold arguments of `event` grouped by slot, each slot ordered by span start.
pub fn gold_assignment(def: &EventTypeDef, doc: &Document, event: &EventMention) -> SlotAssignment {
    let mut args: Vec<_> = event.arguments.iter().collect();
    args.sort_by_key(|a| (a.span.start, a.span.end));
    let mut out = SlotAssignment::new();
    for arg in args {
        if let Some(role) = def.role(&arg.role) {
            out.entry(role.slot_index)
                .or_default()
                .push(doc.span_tokens(arg.span).to_vec());
        }
    }
    out
}

/// Gold target sequence used as the training output for one event.
pub fn gold_target(def: &EventTypeDef, doc: &Document, event: &EventMention) -> Result<TargetSequence> {
    fill_template(&def.template, &gold_assignment(def, doc, event))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSequence {
    pub slots: SlotAssignment,
    /// False when some template literal could not be found in the output.
    pub aligned: bool,
}

/// Recovers slot contents by anchoring template literals left to right on
/// their first occurrence.
pub fn parse_decoded(tokens: &[String], template: &EventTemplate) -> ParsedSequence {
    let mut slots = SlotAssignment::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut pos = 0;
    for tok in template.tokens() {
        match tok {
            TemplateToken::Slot(i) => pending.push(*i),
            TemplateToken::Literal(w) => {
                let Some(offset) = tokens[pos..].iter().position(|t| t == w) else {
                    return ParsedSequence {
                        slots,
                        aligned: false,
                    };
                };
                assign_content(&mut slots, &pending, &tokens[pos..pos + offset]);
                pending.clear();
                pos += offset + 1;
            }
        }
    }
    assign_content(&mut slots, &pending, &tokens[pos..]);
    ParsedSequence {
        slots,
        aligned: true,
    }
}

fn is_separator(tok: &str) -> bool {
    tok == ARG_SEPARATOR || tok == ARG_PLACEHOLDER
}

fn split_arguments(content: &[String]) -> Vec<Vec<String>> {
    content
        .split(|t| is_separator(t))
        .filter(|piece| !piece.is_empty())
        .map(<[String]>::to_vec)
        .collect()
}

fn assign_content(slots: &mut SlotAssignment, pending: &[usize], content: &[String]) {
    match pending {
        [] => {}
        [slot] => {
            let args = split_arguments(content);
            if !args.is_empty() {
                slots.insert(*slot, args);
            }
        }
        _ => {
            // Adjacent slots: every `<arg>` is a unit of its own, every run of
            // other tokens is one unit; surplus units go to the last slot.
            let mut units: Vec<&[String]> = Vec::new();
            let mut start = 0;
            for (i, t) in content.iter().enumerate() {
                if t == ARG_PLACEHOLDER {
                    if start < i {
                        units.push(&content[start..i]);
                    }
                    units.push(&content[i..=i]);
                    start = i + 1;
                }
            }
            if start < content.len() {
                units.push(&content[start..]);
            }
            for (n, slot) in pending.iter().enumerate() {
                let piece: Vec<String> = if n + 1 == pending.len() {
                    units.get(n..).unwrap_or(&[]).concat()
                } else {
                    units.get(n).map(|u| u.to_vec()).unwrap_or_default()
                };
                let args = split_arguments(&piece);
                if !args.is_empty() {
                    slots.insert(*slot, args);
                }
            }
        }
    }
}

/// Position of the decoder inside the template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotState {
    pub template_pos: usize,
    pub active_slot: Option<usize>,
    pub slot_prefix: Vec<String>,
    pub derailed: bool,
}

impl SlotState {
    pub fn new(template: &EventTemplate) -> Self {
        let mut state = SlotState {
            template_pos: 0,
            active_slot: None,
            slot_prefix: Vec::new(),
            derailed: false,
        };
        state.enter(template);
        state
    }

    fn enter(&mut self, template: &EventTemplate) {
        self.slot_prefix.clear();
        self.active_slot = match template.tokens().get(self.template_pos) {
            Some(TemplateToken::Slot(i)) => Some(*i),
            _ => None,
        };
    }

    fn derail(&mut self, expected: &str, emitted: &str) -> Error {
        self.derailed = true;
        self.active_slot = None;
        Error::InconsistentState {
            expected: expected.to_string(),
            emitted: emitted.to_string(),
        }
    }

    /// Feeds one emitted token. A token that contradicts the template marks the
    /// state derailed (and is reported once); later tokens are ignored.
    pub fn advance(&mut self, template: &EventTemplate, emitted: &str) -> Result<()> {
        if self.derailed {
            return Ok(());
        }
        let tokens = template.tokens();
        match tokens.get(self.template_pos) {
            None => Err(self.derail("<end of template>", emitted)),
            Some(TemplateToken::Literal(w)) => {
                if w == emitted {
                    self.template_pos += 1;
                    self.enter(template);
                    Ok(())
                } else {
                    let w = w.clone();
                    Err(self.derail(&w, emitted))
                }
            }
            Some(TemplateToken::Slot(_)) => {
                let next_literal = tokens[self.template_pos..]
                    .iter()
                    .position(|t| matches!(t, TemplateToken::Literal(_)))
                    .map(|off| self.template_pos + off);
                match next_literal {
                    Some(q) if tokens[q].as_literal() == Some(emitted) => {
                        self.template_pos = q + 1;
                        self.enter(template);
                    }
                    _ => self.slot_prefix.push(emitted.to_string()),
                }
                Ok(())
            }
        }
    }

    /// Returns the state after `emitted` without mutating `self`.
    pub fn advanced(&self, template: &EventTemplate, emitted: &str) -> Result<SlotState> {
        let mut next = self.clone();
        next.advance(template, emitted).map(|_| next)
    }

    /// True when only slots (or nothing) remain, i.e. the sequence may end here.
    pub fn is_terminal(&self, template: &EventTemplate) -> bool {
        !self.derailed
            && template.tokens()[self.template_pos.min(template.len())..]
                .iter()
                .all(|t| matches!(t, TemplateToken::Slot(_)))
    }

    /// Tokens of the argument currently being written inside the active slot.
    pub fn current_argument(&self) -> &[String] {
        let start = self
            .slot_prefix
            .iter()
            .rposition(|t| is_separator(t))
            .map_or(0, |i| i + 1);
        &self.slot_prefix[start..]
    }
}
