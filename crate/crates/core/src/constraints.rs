//! Argument-pair knowledge constraints.
//!
//! Pairs of `(event type, role)` slots are harvested from the ontology and
//! training co-occurrence statistics: for every two event types that occur in
//! the same training document, every pair of their roles that can hold the
//! same entity type is scored by how often one entity actually filled both.
//! Pairs scoring above the threshold are *probable*, the rest *improbable*.
//! A curation overlay can then relabel, add or drop pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::jsonl;
use crate::ontology::Ontology;

/// An `(event type, role)` slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[String; 2]", into = "[String; 2]")]
pub struct RoleKey {
    pub event_type: String,
    pub role: String,
}

impl RoleKey {
    pub fn new(event_type: impl Into<String>, role: impl Into<String>) -> Self {
        RoleKey {
            event_type: event_type.into(),
            role: role.into(),
        }
    }
}

impl From<[String; 2]> for RoleKey {
    fn from([event_type, role]: [String; 2]) -> Self {
        RoleKey { event_type, role }
    }
}

impl From<RoleKey> for [String; 2] {
    fn from(k: RoleKey) -> Self {
        [k.event_type, k.role]
    }
}

impl fmt::Display for RoleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.event_type, self.role)
    }
}

/// Unordered pair of role slots, stored with `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[RoleKey; 2]", into = "[RoleKey; 2]")]
pub struct ArgPair {
    a: RoleKey,
    b: RoleKey,
}

impl ArgPair {
    pub fn new(x: RoleKey, y: RoleKey) -> Self {
        if x <= y {
            ArgPair { a: x, b: y }
        } else {
            ArgPair { a: y, b: x }
        }
    }

    pub fn a(&self) -> &RoleKey {
        &self.a
    }

    pub fn b(&self) -> &RoleKey {
        &self.b
    }

    pub fn contains(&self, k: &RoleKey) -> bool {
        &self.a == k || &self.b == k
    }

    /// The other side of the pair when `k` is one of its members.
    pub fn partner_of(&self, k: &RoleKey) -> Option<&RoleKey> {
        if &self.a == k {
            Some(&self.b)
        } else if &self.b == k {
            Some(&self.a)
        } else {
            None
        }
    }
}

impl From<[RoleKey; 2]> for ArgPair {
    fn from([x, y]: [RoleKey; 2]) -> Self {
        ArgPair::new(x, y)
    }
}

impl From<ArgPair> for [RoleKey; 2] {
    fn from(p: ArgPair) -> Self {
        [p.a, p.b]
    }
}

impl fmt::Display for ArgPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | {})", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairStats {
    /// `(document, entity)` incidences where one entity fills both slots.
    pub cnt_args: u64,
    /// Training documents containing both event types.
    pub cnt_events: u64,
}

impl PairStats {
    pub fn ratio(&self) -> f64 {
        if self.cnt_events == 0 {
            0.0
        } else {
            self.cnt_args as f64 / self.cnt_events as f64
        }
    }
}

/// Which side of the threshold counts as probable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Pairs whose normalized count exceeds the threshold are probable.
    #[default]
    AboveIsProbable,
    /// Mirror image, for replicating the alternative labeling.
    AboveIsImprobable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestConfig {
    pub threshold: f64,
    pub orientation: Orientation,
    pub execution: Execution,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            threshold: 0.001,
            orientation: Orientation::AboveIsProbable,
            execution: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintSet {
    improbable: BTreeSet<ArgPair>,
    probable: BTreeSet<ArgPair>,
    stats: BTreeMap<ArgPair, PairStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Probable,
    Improbable,
    /// Known statistics but no label, e.g. after a curation drop.
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationTarget {
    Probable,
    Improbable,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationEntry {
    pub pair: ArgPair,
    pub target_label: CurationTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ConstraintRecord {
    pair: ArgPair,
    label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cnt_args: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cnt_events: Option<u64>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn improbable(&self) -> &BTreeSet<ArgPair> {
        &self.improbable
    }

    pub fn probable(&self) -> &BTreeSet<ArgPair> {
        &self.probable
    }

    pub fn stats(&self) -> &BTreeMap<ArgPair, PairStats> {
        &self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.improbable.is_empty() && self.probable.is_empty()
    }

    pub fn label(&self, pair: &ArgPair) -> Option<Label> {
        if self.improbable.contains(pair) {
            Some(Label::Improbable)
        } else if self.probable.contains(pair) {
            Some(Label::Probable)
        } else if self.stats.contains_key(pair) {
            Some(Label::Unlabeled)
        } else {
            None
        }
    }

    /// Puts `pair` into exactly one of the two sets.
    pub fn insert(&mut self, pair: ArgPair, label: Label) {
        self.improbable.remove(&pair);
        self.probable.remove(&pair);
        match label {
            Label::Improbable => {
                self.improbable.insert(pair);
            }
            Label::Probable => {
                self.probable.insert(pair);
            }
            Label::Unlabeled => {}
        }
    }

    pub fn set_stats(&mut self, pair: ArgPair, stats: PairStats) {
        self.stats.insert(pair, stats);
    }

    pub fn is_improbable(&self, a: &RoleKey, b: &RoleKey) -> bool {
        self.improbable
            .contains(&ArgPair::new(a.clone(), b.clone()))
    }

    /// Probable partner of `a` with the largest `cnt_args`; ties go to the
    /// smaller partner.
    pub fn probable_partner(&self, a: &RoleKey) -> Option<&RoleKey> {
        let mut best: Option<(u64, &RoleKey)> = None;
        for pair in self.probable.iter().filter(|p| p.contains(a)) {
            let partner = pair.partner_of(a).expect("pair contains a");
            let count = self.stats.get(pair).map_or(0, |s| s.cnt_args);
            let better = match best {
                None => true,
                Some((c, p)) => count > c || (count == c && partner < p),
            };
            if better {
                best = Some((count, partner));
            }
        }
        best.map(|(_, p)| p)
    }

    pub fn apply_curation(&self, overlay: &[CurationEntry]) -> ConstraintSet {
        let mut out = self.clone();
        for entry in overlay {
            let label = match entry.target_label {
                CurationTarget::Probable => Label::Probable,
                CurationTarget::Improbable => Label::Improbable,
                CurationTarget::Drop => Label::Unlabeled,
            };
            out.insert(entry.pair.clone(), label);
        }
        out
    }

    fn to_records(&self) -> Vec<ConstraintRecord> {
        let pairs: BTreeSet<&ArgPair> = self
            .improbable
            .iter()
            .chain(&self.probable)
            .chain(self.stats.keys())
            .collect();
        pairs
            .into_iter()
            .map(|p| {
                let stats = self.stats.get(p);
                ConstraintRecord {
                    pair: p.clone(),
                    label: self.label(p).unwrap_or(Label::Unlabeled),
                    cnt_args: stats.map(|s| s.cnt_args),
                    cnt_events: stats.map(|s| s.cnt_events),
                }
            })
            .collect()
    }

    fn from_records(records: Vec<ConstraintRecord>) -> Result<Self> {
        let mut out = ConstraintSet::new();
        let mut seen = BTreeSet::new();
        for r in records {
            if !seen.insert(r.pair.clone()) {
                return Err(Error::Validation(format!("duplicate constraint pair {}", r.pair)));
            }
            match (r.cnt_args, r.cnt_events) {
                (Some(cnt_args), Some(cnt_events)) => out.set_stats(
                    r.pair.clone(),
                    PairStats {
                        cnt_args,
                        cnt_events,
                    },
                ),
                (None, None) => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "pair {} has only one of cnt_args/cnt_events",
                        r.pair
                    )))
                }
            }
            out.insert(r.pair, r.label);
        }
        Ok(out)
    }

    pub fn write_to(&self, writer: impl std::io::Write) -> Result<()> {
        jsonl::write_to(writer, &self.to_records())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(jsonl::read(path)?)
    }

    pub fn read_from(reader: impl std::io::BufRead) -> Result<Self> {
        Self::from_records(jsonl::read_from(reader, Path::new("<reader>"))?)
    }
}

pub fn load_curation(path: &Path) -> Result<Vec<CurationEntry>> {
    jsonl::read(path)
}

pub fn apply_curation(cs: &ConstraintSet, overlay: &[CurationEntry]) -> ConstraintSet {
    cs.apply_curation(overlay)
}

pub fn is_improbable(cs: &ConstraintSet, a: &RoleKey, b: &RoleKey) -> bool {
    cs.is_improbable(a, b)
}

pub fn probable_partner<'a>(cs: &'a ConstraintSet, a: &RoleKey) -> Option<&'a RoleKey> {
    cs.probable_partner(a)
}

#[derive(Default)]
struct Counts {
    type_pairs: HashMap<(String, String), u64>,
    arg_pairs: HashMap<ArgPair, u64>,
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        for (k, v) in other.type_pairs {
            *self.type_pairs.entry(k).or_default() += v;
        }
        for (k, v) in other.arg_pairs {
            *self.arg_pairs.entry(k).or_default() += v;
        }
        self
    }
}

fn count_document(ontology: &Ontology, doc: &Document) -> Counts {
    let mut counts = Counts::default();
    let types: BTreeSet<&str> = doc
        .events
        .iter()
        .map(|e| e.event_type.as_str())
        .filter(|t| ontology.contains(t))
        .collect();
    let types: Vec<&str> = types.into_iter().collect();
    for (i, ti) in types.iter().enumerate() {
        for tj in &types[i + 1..] {
            counts
                .type_pairs
                .insert((ti.to_string(), tj.to_string()), 1);
        }
    }

    let mut by_entity: BTreeMap<&str, BTreeSet<RoleKey>> = BTreeMap::new();
    for ev in doc.events.iter().filter(|e| ontology.contains(&e.event_type)) {
        for arg in &ev.arguments {
            by_entity
                .entry(arg.entity_id.as_str())
                .or_default()
                .insert(RoleKey::new(&ev.event_type, &arg.role));
        }
    }
    for keys in by_entity.values() {
        let keys: Vec<&RoleKey> = keys.iter().collect();
        for (i, x) in keys.iter().enumerate() {
            for y in &keys[i + 1..] {
                if x.event_type != y.event_type {
                    *counts
                        .arg_pairs
                        .entry(ArgPair::new((*x).clone(), (*y).clone()))
                        .or_default() += 1;
                }
            }
        }
    }
    counts
}

/// Harvests probable and improbable argument pairs.
pub fn harvest(ontology: &Ontology, docs: &[Document], cfg: &HarvestConfig) -> ConstraintSet {
    let per_doc = exec::map(cfg.execution, docs, |d| count_document(ontology, d));
    let counts = per_doc.into_iter().fold(Counts::default(), Counts::merge);

    let mut out = ConstraintSet::new();
    let defs: Vec<_> = ontology.event_types().collect();
    for (i, ei) in defs.iter().enumerate() {
        for ej in &defs[i + 1..] {
            let key = (ei.event_type.clone(), ej.event_type.clone());
            let cnt_events = counts.type_pairs.get(&key).copied().unwrap_or(0);
            if cnt_events == 0 {
                continue;
            }
            for rk in &ei.roles {
                for rh in &ej.roles {
                    if !rk.shares_entity_type(rh) {
                        continue;
                    }
                    let pair = ArgPair::new(
                        RoleKey::new(&ei.event_type, &rk.name),
                        RoleKey::new(&ej.event_type, &rh.name),
                    );
                    let cnt_args = counts.arg_pairs.get(&pair).copied().unwrap_or(0);
                    let stats = PairStats {
                        cnt_args,
                        cnt_events,
                    };
                    let above = stats.ratio() > cfg.threshold;
                    let label = match (cfg.orientation, above) {
                        (Orientation::AboveIsProbable, true)
                        | (Orientation::AboveIsImprobable, false) => Label::Probable,
                        _ => Label::Improbable,
                    };
                    out.set_stats(pair.clone(), stats);
                    out.insert(pair, label);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(t: &str, r: &str) -> RoleKey {
        RoleKey::new(t, r)
    }

    fn pair(a: (&str, &str), b: (&str, &str)) -> ArgPair {
        ArgPair::new(key(a.0, a.1), key(b.0, b.1))
    }

    #[test]
    fn pair_is_canonical() {
        assert_eq!(pair(("B", "x"), ("A", "y")), pair(("A", "y"), ("B", "x")));
        assert_eq!(pair(("B", "x"), ("A", "y")).a(), &key("A", "y"));
    }

    #[test]
    fn improbable_lookup_is_symmetric() {
        let mut cs = ConstraintSet::new();
        cs.insert(
            pair(
                ("Justice.ArrestJailDetain.Unspecified", "Jailer"),
                ("Conflict.Attack.DetonateExplode", "Attacker"),
            ),
            Label::Improbable,
        );
        let a = key("Justice.ArrestJailDetain.Unspecified", "Jailer");
        let b = key("Conflict.Attack.DetonateExplode", "Attacker");
        assert!(cs.is_improbable(&a, &b));
        assert!(cs.is_improbable(&b, &a));
        assert!(!cs.is_improbable(&a, &a));
    }

    #[test]
    fn self_pair_on_empty_set() {
        let k = key("A", "r");
        assert!(!ConstraintSet::new().is_improbable(&k, &k));
    }

    #[test]
    fn curation_moves_pairs() {
        let mut cs = ConstraintSet::new();
        let p1 = pair(("A", "r"), ("B", "r"));
        let p2 = pair(("A", "r"), ("C", "r"));
        let p3 = pair(("B", "r"), ("C", "r"));
        let p4 = pair(("C", "s"), ("D", "r"));
        cs.insert(p1.clone(), Label::Improbable);
        cs.insert(p2, Label::Improbable);
        cs.insert(p3.clone(), Label::Improbable);
        cs.insert(p4, Label::Probable);
        assert_eq!(cs.apply_curation(&[]), cs);
        let out = cs.apply_curation(&[CurationEntry {
            pair: p1.clone(),
            target_label: CurationTarget::Probable,
        }]);
        assert_eq!((out.improbable().len(), out.probable().len()), (2, 2));
        let out = out.apply_curation(&[
            CurationEntry {
                pair: p3,
                target_label: CurationTarget::Drop,
            },
            CurationEntry {
                pair: pair(("X", "a"), ("Y", "b")),
                target_label: CurationTarget::Improbable,
            },
        ]);
        assert_eq!((out.improbable().len(), out.probable().len()), (2, 2));
        assert_eq!(out.label(&p1), Some(Label::Probable));
    }

    #[test]
    fn partner_with_highest_count() {
        let a = key("A", "r");
        let mut cs = ConstraintSet::new();
        let p7 = ArgPair::new(a.clone(), key("C", "s"));
        let p2 = ArgPair::new(a.clone(), key("B", "s"));
        cs.insert(p7.clone(), Label::Probable);
        cs.insert(p2.clone(), Label::Probable);
        cs.set_stats(p7, PairStats { cnt_args: 7, cnt_events: 9 });
        cs.set_stats(p2.clone(), PairStats { cnt_args: 2, cnt_events: 9 });
        assert_eq!(cs.probable_partner(&a), Some(&key("C", "s")));

        cs.set_stats(p2, PairStats { cnt_args: 7, cnt_events: 9 });
        assert_eq!(cs.probable_partner(&a), Some(&key("B", "s")));

        assert_eq!(cs.probable_partner(&key("Z", "z")), None);
    }

    #[test]
    fn save_load_is_byte_identical() {
        let mut cs = ConstraintSet::new();
        let p = pair(("A", "r"), ("B", "s"));
        cs.insert(p.clone(), Label::Improbable);
        cs.set_stats(p, PairStats { cnt_args: 0, cnt_events: 4 });
        cs.insert(pair(("A", "q"), ("C", "s")), Label::Probable);
        cs.set_stats(pair(("B", "x"), ("C", "y")), PairStats { cnt_args: 1, cnt_events: 1 });
        let mut buf = Vec::new();
        cs.write_to(&mut buf).unwrap();
        let back = ConstraintSet::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, cs);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
        let first = String::from_utf8(buf).unwrap();
        assert_eq!(
            first.lines().next().unwrap(),
            r#"{"pair":[["A","q"],["C","s"]],"label":"probable"}"#
        );
    }
}
