use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, RoleKey};
use crate::error::{Error, Result};
use crate::generation::{is_reserved, TokenDistribution, EOS};
use crate::memory::DocumentMemory;
use crate::ontology::{EventTypeDef, TemplateToken};
use crate::template::{SlotState, ARG_SEPARATOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjustConfig {
    /// Factor applied to tokens of conflicting entities; 0 blocks them.
    pub penalty: f64,
    /// Factor applied to tokens of heavily repeated, co-supported entities.
    pub boost: f64,
    pub promotion_min_count: u64,
    pub penalize: bool,
    pub promote: bool,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        AdjustConfig {
            penalty: 0.01,
            boost: 1.5,
            promotion_min_count: 5,
            penalize: true,
            promote: true,
        }
    }
}

impl AdjustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.penalty) {
            return Err(Error::Config(format!("penalty {} outside [0, 1]", self.penalty)));
        }
        if !(self.boost >= 1.0 && self.boost.is_finite()) {
            return Err(Error::Config(format!("boost {} must be finite and at least 1", self.boost)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TrieNode {
    children: BTreeMap<String, TrieNode>,
    /// Entities ending here with the role that put them in the index.
    entries: Vec<(String, RoleKey)>,
}

/// Prefix tree over the token sequences of indexed entities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockIndex {
    root: TrieNode,
}

impl BlockIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.root.children.is_empty()
    }

    pub fn insert(&mut self, entity: &str, evidence: RoleKey) {
        if entity.split_whitespace().next().is_none() {
            return;
        }
        let mut node = &mut self.root;
        for tok in entity.split_whitespace() {
            node = node.children.entry(tok.to_string()).or_default();
        }
        node.entries.push((entity.to_string(), evidence));
    }

    /// Entities whose role conflicts with `active` under `cs`.
    pub fn conflicts(active: &RoleKey, mem: &DocumentMemory, cs: &ConstraintSet) -> Self {
        let mut index = Self::new();
        for (entity, roles) in mem.entity_index() {
            for rc in roles {
                let key = rc.key();
                if cs.is_improbable(active, &key) {
                    index.insert(entity, key);
                }
            }
        }
        index
    }

    /// Entities seen more than `min_count` times in a role whose probable
    /// partner is `active`.
    pub fn promotions(active: &RoleKey, mem: &DocumentMemory, cs: &ConstraintSet, min_count: u64) -> Self {
        let mut index = Self::new();
        for p in mem.promotion_candidates(min_count) {
            let key = RoleKey::new(&p.event_type, &p.role);
            if cs.probable_partner(&key) == Some(active) {
                index.insert(&p.entity, key);
            }
        }
        index
    }

    /// Tokens that would extend a prefix match of an indexed entity, given the
    /// tokens of the argument written so far. First tokens always qualify.
    pub fn extending_tokens(&self, current: &[String]) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for start in 0..=current.len() {
            let mut node = Some(&self.root);
            for tok in &current[start..] {
                node = node.and_then(|n| n.children.get(tok));
            }
            if let Some(n) = node {
                out.extend(n.children.keys().map(String::as_str));
            }
        }
        out
    }
}

/// Role of the active slot, if the decoder is writing one.
fn active_role(slot: &SlotState, def: &EventTypeDef) -> Option<RoleKey> {
    if slot.derailed {
        return None;
    }
    let role = def.role_for_slot(slot.active_slot?)?;
    Some(RoleKey::new(&def.event_type, &role.name))
}

/// Tokens that never become argument content: separators and the literal
/// that closes the active slot.
fn structural_tokens<'a>(slot: &SlotState, def: &'a EventTypeDef) -> Vec<&'a str> {
    let mut out = vec![ARG_SEPARATOR];
    if let Some(lit) = def.template.tokens()[slot.template_pos..]
        .iter()
        .find_map(TemplateToken::as_literal)
    {
        out.push(lit);
    }
    out
}

/// Rewrites the next-token distribution for the active slot: tokens
/// continuing an entity that conflicts with the slot's role are scaled by the
/// penalty, tokens continuing a promoted entity by the boost (penalty takes
/// precedence), then the distribution is renormalized. Returns `dist`
/// untouched when nothing applies.
pub fn adjust(
    dist: TokenDistribution,
    slot: &SlotState,
    def: &EventTypeDef,
    mem: &DocumentMemory,
    cs: &ConstraintSet,
    cfg: &AdjustConfig,
) -> TokenDistribution {
    let Some(active) = active_role(slot, def) else {
        return dist;
    };
    if cs.is_empty() || mem.is_empty() {
        return dist;
    }
    let current = slot.current_argument();
    let skip = structural_tokens(slot, def);
    let keep = |t: &&str| !is_reserved(t) && !skip.contains(t);

    let blocked: BTreeSet<String> = if cfg.penalize {
        BlockIndex::conflicts(&active, mem, cs)
            .extending_tokens(current)
            .into_iter()
            .filter(keep)
            .map(String::from)
            .collect()
    } else {
        BTreeSet::new()
    };
    let boosted: BTreeSet<String> = if cfg.promote {
        BlockIndex::promotions(&active, mem, cs, cfg.promotion_min_count)
            .extending_tokens(current)
            .into_iter()
            .filter(keep)
            .filter(|t| !blocked.contains(*t))
            .map(String::from)
            .collect()
    } else {
        BTreeSet::new()
    };
    let vocab = dist.vocabulary().clone();
    let blocked_ids: Vec<usize> = blocked.iter().filter_map(|t| vocab.id(t)).collect();
    let boosted_ids: Vec<usize> = boosted.iter().filter_map(|t| vocab.id(t)).collect();
    if blocked_ids.is_empty() && boosted_ids.is_empty() {
        return dist;
    }

    let mut dist = dist;
    let probs = dist.probs_mut();
    for &i in &boosted_ids {
        probs[i] *= cfg.boost;
    }
    for &i in &blocked_ids {
        probs[i] *= cfg.penalty;
    }
    if dist.sum() > 0.0 {
        dist.renormalize();
        return dist;
    }
    // Every token with mass was blocked: close the slot instead, either with
    // the next template literal or by ending the sequence.
    let close = skip
        .get(1)
        .and_then(|t| vocab.id(t))
        .unwrap_or_else(|| vocab.id(EOS).expect("reserved token"));
    let probs = dist.probs_mut();
    probs.iter_mut().for_each(|p| *p = 0.0);
    probs[close] = 1.0;
    dist
}
