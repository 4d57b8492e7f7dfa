//! Shared fixtures and independent oracles for the integration and
//! acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use docie::constraints::{ArgPair, ConstraintSet, Label, PairStats, RoleKey};
use docie::corpus::{CorefCluster, Document, EventMention, GoldArgument, Span};
use docie::generation::{Generator, GeneratorInput, TokenDistribution, Vocabulary, EOS};
use docie::memory::EventRecord;
use docie::ontology::{EventTemplate, Ontology, OntologyRecord, RoleRecord, TemplateToken};
use docie::retrieval::{Embedder, Embedding};
use docie::template::{SlotState, ARG_SEPARATOR};
use docie::Result;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const ENTITY_TYPES: [&str; 3] = ["PER", "ORG", "LOC"];

/// Entity names; several share a first token so prefix handling is exercised.
pub const NAMES: [&str; 10] = [
    "Ann", "Ann Ray", "Bob", "Bob Sue Tor", "Cy", "Cy Ray", "Dee", "Eli Sue", "Fay", "Fay Tor",
];

pub fn type_name(t: usize) -> String {
    format!("T{t}")
}

/// `<arg1> vTa1 <arg2> vTa2 ... <argN> vTend`: a literal after every slot.
pub fn template_text(t: usize, roles: usize) -> String {
    let mut parts = Vec::new();
    for k in 1..=roles {
        parts.push(format!("<arg{k}>"));
        if k < roles {
            parts.push(format!("v{t}a{k}"));
        }
    }
    parts.push(format!("v{t}end"));
    parts.join(" ")
}

pub fn random_ontology(r: &mut ChaCha8Rng, max_types: usize, max_roles: usize) -> Ontology {
    let n_types = r.gen_range(1..=max_types);
    let records = (0..n_types).map(|t| {
        let n_roles = r.gen_range(1..=max_roles);
        let roles = (0..n_roles)
            .map(|k| {
                let mut types: Vec<String> = ENTITY_TYPES
                    .iter()
                    .filter(|_| r.gen_bool(0.5))
                    .map(|s| s.to_string())
                    .collect();
                if types.is_empty() {
                    types.push(ENTITY_TYPES[r.gen_range(0..ENTITY_TYPES.len())].to_string());
                }
                RoleRecord {
                    name: format!("r{k}"),
                    entity_types: types,
                }
            })
            .collect();
        OntologyRecord {
            event_type: type_name(t),
            roles,
            template: template_text(t, n_roles),
            parent: None,
        }
    });
    let records: Vec<_> = records.collect();
    Ontology::from_records(records).expect("generated ontology is valid")
}

/// A random corpus over `ontology`: every event is one sentence holding its
/// trigger and the mentions of its arguments.
pub fn random_documents(r: &mut ChaCha8Rng, ontology: &Ontology, max_docs: usize, max_events: usize) -> Vec<Document> {
    let types: Vec<_> = ontology.event_types().collect();
    let n_docs = r.gen_range(1..=max_docs);
    (0..n_docs)
        .map(|d| {
            let n_entities = r.gen_range(1..=5);
            let mut names: Vec<&str> = NAMES.to_vec();
            names.shuffle(r);
            let names = &names[..n_entities];
            let mut tokens: Vec<String> = Vec::new();
            let mut bounds = Vec::new();
            let mut events = Vec::new();
            let mut mentions: BTreeMap<usize, Vec<Span>> = BTreeMap::new();
            let n_events = r.gen_range(0..=max_events);
            for e in 0..n_events {
                let start = tokens.len();
                let def = types[r.gen_range(0..types.len())];
                tokens.push(format!("trg{e}"));
                let trigger = Span::new(start, start + 1);
                let mut arguments = Vec::new();
                for role in &def.roles {
                    for _ in 0..r.gen_range(0..=2usize) {
                        if !r.gen_bool(0.6) {
                            continue;
                        }
                        let ent = r.gen_range(0..n_entities);
                        let s = tokens.len();
                        tokens.extend(words(names[ent]));
                        let span = Span::new(s, tokens.len());
                        tokens.push(",".into());
                        mentions.entry(ent).or_default().push(span);
                        arguments.push(GoldArgument {
                            role: role.name.clone(),
                            span,
                            head_span: None,
                            entity_id: format!("n{ent}"),
                        });
                    }
                }
                tokens.push(".".into());
                bounds.push(Span::new(start, tokens.len()));
                events.push(EventMention {
                    event_id: format!("e{e}"),
                    event_type: def.event_type.clone(),
                    trigger,
                    arguments,
                });
            }
            let start = tokens.len();
            tokens.extend(words("nothing else happened ."));
            bounds.push(Span::new(start, tokens.len()));
            let clusters = mentions
                .into_iter()
                .map(|(ent, spans)| CorefCluster {
                    cluster_id: format!("c{ent}"),
                    entity_id: format!("n{ent}"),
                    mentions: spans,
                })
                .collect();
            Document {
                doc_id: format!("d{d:02}"),
                tokens,
                sentence_bounds: bounds,
                events,
                clusters,
            }
            .normalized()
            .expect("generated document is valid")
        })
        .collect()
}

/// Harvest computed by enumerating `(document, entity, event type, role)`
/// incidences directly.
pub fn brute_force_harvest(ontology: &Ontology, docs: &[Document], threshold: f64) -> ConstraintSet {
    let mut incidences: BTreeSet<(usize, &str, &str, &str)> = BTreeSet::new();
    let mut doc_types: Vec<BTreeSet<&str>> = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        let mut present = BTreeSet::new();
        for ev in &doc.events {
            present.insert(ev.event_type.as_str());
            for a in &ev.arguments {
                incidences.insert((d, &a.entity_id, &ev.event_type, &a.role));
            }
        }
        doc_types.push(present);
    }
    let entities: BTreeSet<(usize, &str)> = incidences.iter().map(|(d, e, _, _)| (*d, *e)).collect();

    let mut out = ConstraintSet::new();
    let defs: Vec<_> = ontology.event_types().collect();
    for ei in &defs {
        for ej in &defs {
            if ei.event_type >= ej.event_type {
                continue;
            }
            let cnt_events = doc_types
                .iter()
                .filter(|t| t.contains(ei.event_type.as_str()) && t.contains(ej.event_type.as_str()))
                .count() as u64;
            if cnt_events == 0 {
                continue;
            }
            for rk in &ei.roles {
                for rh in &ej.roles {
                    if rk.entity_types.intersection(&rh.entity_types).next().is_none() {
                        continue;
                    }
                    let cnt_args = entities
                        .iter()
                        .filter(|(d, e)| {
                            incidences.contains(&(*d, e, &ei.event_type, &rk.name))
                                && incidences.contains(&(*d, e, &ej.event_type, &rh.name))
                        })
                        .count() as u64;
                    let pair = ArgPair::new(
                        RoleKey::new(&ei.event_type, &rk.name),
                        RoleKey::new(&ej.event_type, &rh.name),
                    );
                    out.set_stats(pair.clone(), PairStats { cnt_args, cnt_events });
                    let label = if cnt_args as f64 / cnt_events as f64 > threshold {
                        Label::Probable
                    } else {
                        Label::Improbable
                    };
                    out.insert(pair, label);
                }
            }
        }
    }
    out
}

/// Every cross-type role pair of the ontology labeled at random.
pub fn random_constraints(r: &mut ChaCha8Rng, ontology: &Ontology, p_improbable: f64) -> ConstraintSet {
    let mut cs = ConstraintSet::new();
    let defs: Vec<_> = ontology.event_types().collect();
    for (i, ei) in defs.iter().enumerate() {
        for ej in &defs[i + 1..] {
            for rk in &ei.roles {
                for rh in &ej.roles {
                    let label = if r.gen_bool(p_improbable) {
                        Label::Improbable
                    } else {
                        Label::Probable
                    };
                    cs.insert(
                        ArgPair::new(
                            RoleKey::new(&ei.event_type, &rk.name),
                            RoleKey::new(&ej.event_type, &rh.name),
                        ),
                        label,
                    );
                }
            }
        }
    }
    cs
}

fn mix(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ 0xff
}

/// Template-aware random generator: at every step it proposes only tokens
/// that keep the output well formed (template literals, entity names from a
/// fixed pool, `and`, `<arg>`), with weights drawn from a generator seeded by
/// the input and prefix. Deterministic for a given seed.
pub struct WanderingGenerator {
    vocab: Arc<Vocabulary>,
    templates: HashMap<String, EventTemplate>,
    entities: Vec<Vec<String>>,
    seed: u64,
}

impl WanderingGenerator {
    pub fn new(ontology: &Ontology, names: &[&str], seed: u64) -> Self {
        let entities: Vec<Vec<String>> = names.iter().map(|n| words(n)).collect();
        let mut all: Vec<String> = entities.iter().flatten().cloned().collect();
        all.push(ARG_SEPARATOR.to_string());
        let mut templates = HashMap::new();
        for def in ontology.event_types() {
            all.extend(def.template.literals().map(String::from));
            templates.insert(def.template.placeholder_tokens().join(" "), def.template.clone());
        }
        WanderingGenerator {
            vocab: Arc::new(Vocabulary::new(all)),
            templates,
            entities,
            seed,
        }
    }

    fn options(&self, template: &EventTemplate, prefix: &[String]) -> Vec<String> {
        let mut state = SlotState::new(template);
        for t in prefix {
            if state.advance(template, t).is_err() {
                return vec![EOS.into()];
            }
        }
        let tokens = template.tokens();
        let closing = tokens[state.template_pos..]
            .iter()
            .find_map(|t| t.as_literal())
            .map_or_else(|| EOS.to_string(), String::from);
        match (tokens.get(state.template_pos), state.active_slot) {
            (None, _) => vec![EOS.into()],
            (Some(TemplateToken::Literal(w)), _) => vec![w.clone()],
            (Some(TemplateToken::Slot(_)), _) => {
                if state.slot_prefix.last().is_some_and(|t| t == "<arg>") {
                    return vec![closing];
                }
                let cur = state.current_argument();
                let mut out: BTreeSet<String> = self
                    .entities
                    .iter()
                    .filter(|e| e.len() > cur.len() && e.starts_with(cur))
                    .map(|e| e[cur.len()].clone())
                    .collect();
                if cur.is_empty() && state.slot_prefix.is_empty() {
                    out.insert("<arg>".into());
                }
                if !cur.is_empty() && self.entities.iter().any(|e| e.as_slice() == cur) {
                    out.insert(closing.clone());
                    if !state.slot_prefix.iter().any(|t| t == ARG_SEPARATOR) {
                        out.insert(ARG_SEPARATOR.into());
                    }
                }
                if out.is_empty() {
                    out.insert(closing);
                }
                out.into_iter().collect()
            }
        }
    }
}

impl Generator for WanderingGenerator {
    fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next_distribution(&self, input: &GeneratorInput, prefix: &[String]) -> Result<TokenDistribution> {
        let key = input.template_segment.join(" ");
        let template = &self.templates[&key];
        let options = self.options(template, prefix);
        let mut h = mix(self.seed ^ 0xcbf2_9ce4_8422_2325, key.as_bytes());
        h = mix(h, input.trigger_words().join(" ").as_bytes());
        for t in prefix {
            h = mix(h, t.as_bytes());
            h = mix(h, b"\x1f");
        }
        let mut r = ChaCha8Rng::seed_from_u64(h);
        let weights: Vec<f64> = options.iter().map(|_| r.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let map: BTreeMap<String, f64> = options.into_iter().zip(weights).map(|(t, w)| (t, w / total)).collect();
        Ok(TokenDistribution::from_map(self.vocab.clone(), &map))
    }
}

/// Role assignments that contradict an improbable pair given the records
/// decoded before them, as `(event_id, role, entity)`.
pub fn violations(records: &[EventRecord], cs: &ConstraintSet) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        for (role, texts) in &rec.role_assignments {
            let key = RoleKey::new(&rec.event_type, role);
            for text in texts {
                let clash = records[..i].iter().any(|earlier| {
                    earlier.role_assignments.iter().any(|(r, ts)| {
                        ts.contains(text) && cs.is_improbable(&key, &RoleKey::new(&earlier.event_type, r))
                    })
                });
                if clash {
                    out.push((rec.event_id.clone(), role.clone(), text.clone()));
                }
            }
        }
    }
    out
}

/// Embedder backed by a table of vectors keyed by the joined text.
pub struct LookupEmbedder {
    pub dim: usize,
    pub table: HashMap<String, Vec<f64>>,
}

impl Embedder for LookupEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &[String]) -> Result<Embedding> {
        let v = self
            .table
            .get(&text.join(" "))
            .cloned()
            .unwrap_or_else(|| vec![1.0; self.dim]);
        Ok(Embedding::normalized(v).unwrap_or_else(|| Embedding::basis(self.dim)))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn gold(role: &str, span: [usize; 2], head: Option<[usize; 2]>, entity: &str) -> GoldArgument {
    GoldArgument {
        role: role.into(),
        span: span.into(),
        head_span: head.map(Span::from),
        entity_id: entity.into(),
    }
}

fn mention(id: &str, event_type: &str, trigger: [usize; 2], arguments: Vec<GoldArgument>) -> EventMention {
    EventMention {
        event_id: id.into(),
        event_type: event_type.into(),
        trigger: trigger.into(),
        arguments,
    }
}

fn single_sentence_doc(id: &str, text: &str, events: Vec<EventMention>, clusters: Vec<CorefCluster>) -> Document {
    let tokens = words(text);
    let n = tokens.len();
    Document {
        doc_id: id.into(),
        tokens,
        sentence_bounds: vec![Span::new(0, n)],
        events,
        clusters,
    }
}

pub fn predicted(role: &str, text: &str, span: [usize; 2]) -> docie::constrained_decoding::PredictedArgument {
    docie::constrained_decoding::PredictedArgument {
        role: role.into(),
        text: text.into(),
        span: Some(span.into()),
    }
}

/// Three documents with 9 gold and 8 predicted arguments. Per configuration
/// (tp, fp, fn), worked by hand:
///
/// | config    | d1      | d2      | d3      | total   |
/// |-----------|---------|---------|---------|---------|
/// | id/exact  | 1, 2, 2 | 1, 2, 2 | 2, 0, 1 | 4, 4, 5 |
/// | id/head   | 2, 1, 1 | 2, 1, 1 | 2, 0, 1 | 6, 2, 3 |
/// | id/coref  | 3, 0, 0 | 2, 1, 1 | 2, 0, 1 | 7, 1, 2 |
/// | cls/exact | 0, 3, 3 | 1, 2, 2 | 2, 0, 1 | 3, 5, 6 |
/// | cls/head  | 1, 2, 2 | 2, 1, 1 | 2, 0, 1 | 5, 3, 4 |
/// | cls/coref | 2, 1, 1 | 2, 1, 1 | 2, 0, 1 | 6, 2, 3 |
pub fn hand_fixture() -> (Vec<Document>, Vec<docie::constrained_decoding::Prediction>) {
    use docie::constrained_decoding::Prediction;
    let d1 = single_sentence_doc(
        "d1",
        "Police officers arrested John Smith in Boston . He was charged .",
        vec![mention(
            "e1",
            "Arrest",
            [2, 3],
            vec![
                gold("Jailer", [0, 2], Some([1, 2]), "police"),
                gold("Detainee", [3, 5], None, "smith"),
                gold("Place", [6, 7], None, "boston"),
            ],
        )],
        vec![CorefCluster {
            cluster_id: "c1".into(),
            entity_id: "smith".into(),
            mentions: vec![Span::new(3, 5), Span::new(8, 9)],
        }],
    );
    let d2 = single_sentence_doc(
        "d2",
        "Rebels attacked the base ; two soldiers died .",
        vec![
            mention(
                "e1",
                "Attack",
                [1, 2],
                vec![gold("Attacker", [0, 1], None, "rebels"), gold("Target", [2, 4], None, "base")],
            ),
            mention("e2", "Die", [7, 8], vec![gold("Victim", [5, 7], None, "soldiers")]),
        ],
        vec![],
    );
    let d3 = single_sentence_doc(
        "d3",
        "Police detained Ali and Omar .",
        vec![mention(
            "e1",
            "Arrest",
            [1, 2],
            vec![
                gold("Jailer", [0, 1], None, "police"),
                gold("Detainee", [2, 3], None, "ali"),
                gold("Detainee", [4, 5], None, "omar"),
            ],
        )],
        vec![],
    );
    let preds = vec![
        Prediction {
            doc_id: "d1".into(),
            event_id: "e1".into(),
            event_type: "Arrest".into(),
            arguments: vec![
                predicted("Jailer", "officers", [1, 2]),
                predicted("Detainee", "He", [8, 9]),
                predicted("Crime", "Boston", [6, 7]),
            ],
        },
        Prediction {
            doc_id: "d2".into(),
            event_id: "e1".into(),
            event_type: "Attack".into(),
            arguments: vec![
                predicted("Attacker", "Rebels", [0, 1]),
                predicted("Target", "base", [3, 4]),
                predicted("Place", "soldiers", [6, 7]),
            ],
        },
        Prediction {
            doc_id: "d3".into(),
            event_id: "e1".into(),
            event_type: "Arrest".into(),
            arguments: vec![predicted("Detainee", "Ali", [2, 3]), predicted("Detainee", "Omar", [4, 5])],
        },
    ];
    (vec![d1, d2, d3], preds)
}

/// Expected totals `(tp, fp, fn)` of [`hand_fixture`], in `MatchConfig::all()` order.
pub const HAND_TOTALS: [(u64, u64, u64); 6] = [(4, 4, 5), (6, 2, 3), (7, 1, 2), (3, 5, 6), (5, 3, 4), (6, 2, 3)];

/// Random gold documents with noisy predictions for ordering checks.
pub fn random_scoring_fixture(r: &mut ChaCha8Rng) -> (Vec<Document>, Vec<docie::constrained_decoding::Prediction>) {
    use docie::constrained_decoding::Prediction;
    let roles = ["A", "B", "C"];
    let n_docs = r.gen_range(1..=4);
    let mut docs = Vec::new();
    let mut preds = Vec::new();
    for d in 0..n_docs {
        let len = r.gen_range(8..30);
        let vocab = ["x", "y", "z", "w", ","];
        let tokens: Vec<String> = (0..len).map(|_| vocab[r.gen_range(0..vocab.len())].to_string()).collect();
        let random_span = |r: &mut ChaCha8Rng| {
            let s = r.gen_range(0..len - 1);
            let e = r.gen_range(s + 1..=(s + 3).min(len));
            Span::new(s, e)
        };
        let n_entities = r.gen_range(1..=4);
        let clusters: Vec<CorefCluster> = (0..n_entities)
            .map(|k| CorefCluster {
                cluster_id: format!("c{k}"),
                entity_id: format!("n{k}"),
                mentions: (0..r.gen_range(1..=3)).map(|_| random_span(r)).collect(),
            })
            .collect();
        let n_events = r.gen_range(1..=3);
        let mut events = Vec::new();
        for e in 0..n_events {
            let arguments: Vec<GoldArgument> = (0..r.gen_range(0..=4))
                .map(|_| {
                    let k = r.gen_range(0..n_entities);
                    let span = clusters[k].mentions[r.gen_range(0..clusters[k].mentions.len())];
                    GoldArgument {
                        role: roles[r.gen_range(0..roles.len())].into(),
                        span,
                        head_span: if r.gen_bool(0.3) { Some(Span::new(span.end - 1, span.end)) } else { None },
                        entity_id: format!("n{k}"),
                    }
                })
                .collect();
            let event_id = format!("e{e}");
            let arguments_pred = (0..r.gen_range(0..=4))
                .map(|_| {
                    let span = if r.gen_bool(0.5) && !arguments.is_empty() {
                        let g: &GoldArgument = &arguments[r.gen_range(0..arguments.len())];
                        if r.gen_bool(0.5) { g.span } else { random_span(r) }
                    } else {
                        random_span(r)
                    };
                    docie::constrained_decoding::PredictedArgument {
                        role: roles[r.gen_range(0..roles.len())].into(),
                        text: tokens[span.start..span.end].join(" "),
                        span: Some(span),
                    }
                })
                .collect();
            preds.push(Prediction {
                doc_id: format!("r{d}"),
                event_id: event_id.clone(),
                event_type: "E".into(),
                arguments: arguments_pred,
            });
            events.push(EventMention {
                event_id,
                event_type: "E".into(),
                trigger: Span::new(e.min(len - 1), e.min(len - 1) + 1),
                arguments,
            });
        }
        docs.push(Document {
            doc_id: format!("r{d}"),
            tokens,
            sentence_bounds: vec![Span::new(0, len)],
            events,
            clusters,
        });
    }
    (docs, preds)
}

/// A random template with a literal between consecutive slots, and an
/// assignment whose words never collide with literals or separators.
pub fn random_template_case(r: &mut ChaCha8Rng) -> (EventTemplate, docie::template::SlotAssignment) {
    use docie::ontology::{parse_template, RoleSpec};
    let n_slots = r.gen_range(1..=5);
    let mut parts: Vec<String> = Vec::new();
    let mut lit = 0;
    let literal = |parts: &mut Vec<String>, lit: &mut usize| {
        parts.push(format!("lit{lit}"));
        *lit += 1;
    };
    if r.gen_bool(0.5) {
        literal(&mut parts, &mut lit);
    }
    for k in 1..=n_slots {
        parts.push(format!("<arg{k}>"));
        let extra = if k < n_slots { r.gen_range(1..=2) } else { r.gen_range(0..=2) };
        for _ in 0..extra {
            literal(&mut parts, &mut lit);
        }
    }
    if lit == 0 {
        literal(&mut parts, &mut lit);
    }
    let roles: Vec<RoleSpec> = (1..=n_slots)
        .map(|k| RoleSpec {
            name: format!("r{k}"),
            entity_types: ["PER".to_string()].into_iter().collect(),
            slot_index: k,
        })
        .collect();
    let template = parse_template(&parts.join(" "), &roles).unwrap();
    let mut assignment = docie::template::SlotAssignment::new();
    for k in 1..=n_slots {
        let args: Vec<Vec<String>> = (0..r.gen_range(0..=3))
            .map(|_| (0..r.gen_range(1..=3)).map(|_| format!("w{}", r.gen_range(0..10))).collect())
            .collect();
        if !args.is_empty() {
            assignment.insert(k, args);
        }
    }
    (template, assignment)
}

/// Slots the automaton occupies while reading `tokens`, with consecutive
/// repeats collapsed.
pub fn slot_visits(template: &EventTemplate, tokens: &[String]) -> Vec<usize> {
    let mut state = SlotState::new(template);
    let mut visits: Vec<usize> = Vec::new();
    let note = |s: &SlotState, visits: &mut Vec<usize>| {
        if let Some(slot) = s.active_slot {
            if visits.last() != Some(&slot) {
                visits.push(slot);
            }
        }
    };
    note(&state, &mut visits);
    for t in tokens {
        state.advance(template, t).unwrap();
        note(&state, &mut visits);
    }
    visits
}

/// Memory of `n` generated records assigning pool names to random roles.
pub fn random_memory(r: &mut ChaCha8Rng, ontology: &Ontology, n: usize) -> docie::memory::DocumentMemory {
    let defs: Vec<_> = ontology.event_types().collect();
    let mut mem = docie::memory::DocumentMemory::new();
    for i in 0..n {
        let def = defs[r.gen_range(0..defs.len())];
        let mut role_assignments = BTreeMap::new();
        for role in &def.roles {
            if r.gen_bool(0.6) {
                role_assignments.insert(role.name.clone(), vec![NAMES[r.gen_range(0..NAMES.len())].to_string()]);
            }
        }
        mem.add_event(EventRecord {
            event_id: format!("m{i}"),
            event_type: def.event_type.clone(),
            sequence_tokens: vec![format!("tok{i}")],
            role_assignments,
            source: docie::memory::RecordSource::Generated,
        });
    }
    mem
}

const SYLLABLES: [&str; 12] = ["Ka", "Lo", "Mi", "Ne", "Ru", "Sa", "To", "Va", "Bel", "Dor", "Fen", "Gar"];
const PLACES: [&str; 6] = ["harbor", "market", "bridge", "station", "school", "square"];

/// Distinct for every `i` below 12^3.
fn name(i: usize) -> String {
    let n = SYLLABLES.len();
    let s = |k: usize| SYLLABLES[(i / n.pow(k as u32)) % n].to_lowercase();
    format!("{}{}{}", SYLLABLES[i % n], s(1), s(2))
}

struct DocBuilder {
    tokens: Vec<String>,
    bounds: Vec<Span>,
    events: Vec<EventMention>,
    mentions: BTreeMap<String, Vec<Span>>,
}

impl DocBuilder {
    fn new() -> Self {
        DocBuilder {
            tokens: vec![],
            bounds: vec![],
            events: vec![],
            mentions: BTreeMap::new(),
        }
    }

    /// Appends a sentence and returns the absolute offset of its first token.
    fn sentence(&mut self, text: &str) -> usize {
        let start = self.tokens.len();
        self.tokens.extend(words(text));
        self.bounds.push(Span::new(start, self.tokens.len()));
        start
    }

    fn find(&self, sentence: usize, phrase: &str) -> Span {
        let w = words(phrase);
        let s = self.bounds[sentence];
        (s.start..=s.end - w.len())
            .find(|&i| self.tokens[i..i + w.len()] == w[..])
            .map(|i| Span::new(i, i + w.len()))
            .unwrap_or_else(|| panic!("`{phrase}` not in sentence {sentence}"))
    }

    fn mention(&mut self, entity: &str, span: Span) {
        let spans = self.mentions.entry(entity.to_string()).or_default();
        if !spans.contains(&span) {
            spans.push(span);
        }
    }

    fn event(&mut self, event_type: &str, sentence: usize, trigger: &str, args: &[(&str, usize, &str, &str)]) {
        let trigger = self.find(sentence, trigger);
        let arguments = args
            .iter()
            .map(|(role, s, phrase, entity)| {
                let span = self.find(*s, phrase);
                self.mention(entity, span);
                GoldArgument {
                    role: role.to_string(),
                    span,
                    head_span: Some(Span::new(span.end - 1, span.end)),
                    entity_id: entity.to_string(),
                }
            })
            .collect();
        let id = format!("e{}", self.events.len() + 1);
        self.events.push(EventMention {
            event_id: id,
            event_type: event_type.into(),
            trigger,
            arguments,
        });
    }

    fn build(self, doc_id: String) -> Document {
        let clusters = self
            .mentions
            .into_iter()
            .map(|(entity, mentions)| CorefCluster {
                cluster_id: format!("c-{entity}"),
                entity_id: entity,
                mentions,
            })
            .collect();
        Document {
            doc_id,
            tokens: self.tokens,
            sentence_bounds: self.bounds,
            events: self.events,
            clusters,
        }
        .normalized()
        .expect("constructed document is valid")
    }
}

pub const DIE: &str = "Life.Die.Unspecified";
pub const ATTACK: &str = "Conflict.Attack.Unspecified";

const FILLER: [&str; 4] = [
    "officials said little about the case on monday .",
    "the police kept the area closed for hours .",
    "a local radio show aired several reports about it .",
    "residents were asked to stay inside that night .",
];

/// Training and adversarial documents over the fixture ontology. In training,
/// a dead victim is sometimes the target of a later attack but never its
/// attacker. Each adversarial document names nobody near the attack, so the
/// only name reachable at that event is the victim's, through memory.
pub fn dependency_corpus(seed: u64, n_train: usize, n_test: usize) -> (Vec<Document>, Vec<Document>) {
    let mut r = rng(seed);
    let mut next_name = r.gen_range(0..SYLLABLES.len());
    let mut fresh = || {
        next_name += 1;
        name(next_name)
    };
    let mut train = Vec::new();
    for i in 0..n_train {
        let (victim, attacker) = (fresh(), fresh());
        let (p1, p2) = (PLACES[r.gen_range(0..PLACES.len())], PLACES[r.gen_range(0..PLACES.len())]);
        let place2 = if p1 == p2 { "p1" } else { "p2" };
        let mut b = DocBuilder::new();
        b.sentence(&format!("{victim} died at the {p1} on sunday ."));
        b.sentence(FILLER[r.gen_range(0..FILLER.len())]);
        b.event(DIE, 0, "died", &[("Victim", 0, &victim, "v"), ("Place", 0, &format!("the {p1}"), "p1")]);
        if r.gen_bool(0.05) {
            b.sentence(&format!("later he was attacked near the {p2} ."));
            b.event(
                ATTACK,
                2,
                "attacked",
                &[("Target", 0, &victim, "v"), ("Place", 2, &format!("the {p2}"), place2)],
            );
            let he = b.find(2, "he");
            b.mention("v", he);
        } else {
            let target = if r.gen_bool(0.5) { victim.clone() } else { fresh() };
            let target_entity = if target == victim { "v" } else { "t" };
            b.sentence(&format!("{attacker} attacked {target} near the {p2} ."));
            b.event(
                ATTACK,
                2,
                "attacked",
                &[
                    ("Attacker", 2, &attacker, "a"),
                    ("Target", 2, &target, target_entity),
                    ("Place", 2, &format!("the {p2}"), place2),
                ],
            );
        }
        train.push(b.build(format!("train{i:03}")));
    }
    let mut test = Vec::new();
    for i in 0..n_test {
        let victim = fresh();
        let (p1, p2) = (PLACES[r.gen_range(0..PLACES.len())], PLACES[r.gen_range(0..PLACES.len())]);
        let mut b = DocBuilder::new();
        b.sentence(&format!("{victim} died at the {p1} on sunday ."));
        for f in FILLER {
            b.sentence(f);
        }
        b.sentence(&format!("later he was attacked near the {p2} ."));
        let he = FILLER.len() + 1;
        b.event(DIE, 0, "died", &[("Victim", 0, &victim, "v"), ("Place", 0, &format!("the {p1}"), "p1")]);
        let place2 = if p1 == p2 { "p1" } else { "p2" };
        b.event(
            ATTACK,
            he,
            "attacked",
            &[("Target", 0, &victim, "v"), ("Place", he, &format!("the {p2}"), place2)],
        );
        let he_span = b.find(he, "he");
        b.mention("v", he_span);
        test.push(b.build(format!("adv{i:03}")));
    }
    (train, test)
}
