//! Argument scoring, paired bootstrap significance and error analyses.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constrained_decoding::{PredictedArgument, Prediction};
use crate::corpus::{Document, EventMention, GoldArgument, Span};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub const DOC_LENGTH_BUCKET: usize = 250;
pub const EVENT_COUNT_BUCKET: usize = 5;
pub const DISTANCE_BUCKET: usize = 25;

/// Independent random streams used by the bootstrap, fixed so results do
/// not depend on the thread count.
const BOOTSTRAP_SHARDS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Identification,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Exact,
    Head,
    Coref,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchConfig {
    pub mode: Mode,
    pub criterion: Criterion,
}

impl MatchConfig {
    pub const fn new(mode: Mode, criterion: Criterion) -> Self {
        MatchConfig { mode, criterion }
    }

    pub fn all() -> [MatchConfig; 6] {
        use Criterion::*;
        use Mode::*;
        [
            Self::new(Identification, Exact),
            Self::new(Identification, Head),
            Self::new(Identification, Coref),
            Self::new(Classification, Exact),
            Self::new(Classification, Head),
            Self::new(Classification, Coref),
        ]
    }
}

fn is_punctuation(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| !c.is_alphanumeric())
}

/// Last token that is not punctuation (the last token if all are).
pub fn head_of(words: &[String]) -> Result<&str> {
    let last = words.last().ok_or(Error::EmptySpan)?;
    Ok(words
        .iter()
        .rev()
        .find(|w| !is_punctuation(w))
        .unwrap_or(last))
}

fn head_index(doc: &Document, span: Span) -> usize {
    (span.start..span.end)
        .rev()
        .find(|&i| !is_punctuation(&doc.tokens[i]))
        .unwrap_or(span.end.saturating_sub(1))
}

fn gold_head<'d>(doc: &'d Document, gold: &GoldArgument) -> &'d str {
    match gold.head_span {
        Some(h) if !h.is_empty() => &doc.tokens[h.start],
        _ => &doc.tokens[head_index(doc, gold.span)],
    }
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// Whether `pred` earns credit for `gold` under `cfg`.
pub fn arg_matches(pred: &PredictedArgument, gold: &GoldArgument, doc: &Document, cfg: MatchConfig) -> bool {
    if cfg.mode == Mode::Classification && pred.role != gold.role {
        return false;
    }
    span_matches(pred, gold, doc, cfg.criterion)
}

fn span_matches(pred: &PredictedArgument, gold: &GoldArgument, doc: &Document, criterion: Criterion) -> bool {
    let exact = pred.span == Some(gold.span);
    if criterion == Criterion::Exact || exact {
        return exact;
    }
    let pred_words = words(&pred.text);
    let head = head_of(&pred_words).is_ok_and(|h| h == gold_head(doc, gold));
    if criterion == Criterion::Head || head {
        return head;
    }
    doc.cluster_of(&gold.entity_id).is_some_and(|c| {
        c.mentions
            .iter()
            .any(|m| pred.span == Some(*m) || doc.span_tokens(*m) == pred_words.as_slice())
    })
}

/// Maximum bipartite matching; `adj[l]` lists the right nodes of left `l` in
/// preference order. Returns the partner of every left node.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], right_of: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if right_of[r].is_none_or(|other| augment(other, adj, seen, right_of)) {
                right_of[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut right_of = vec![None; n_right];
    for l in 0..adj.len() {
        let mut seen = vec![false; n_right];
        augment(l, adj, &mut seen, &mut right_of);
    }
    let mut left_of = vec![None; adj.len()];
    for (r, l) in right_of.iter().enumerate() {
        if let Some(l) = l {
            left_of[*l] = Some(r);
        }
    }
    left_of
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// One gold event paired with the predicted arguments for it.
#[derive(Debug, Clone)]
pub struct EventPair<'a> {
    pub doc: &'a Document,
    pub event: &'a EventMention,
    pub predicted: Vec<&'a PredictedArgument>,
}

/// Groups predictions by gold event, in document then trigger order. Events
/// without predictions get an empty list.
pub fn align<'a>(preds: &'a [Prediction], docs: &'a [Document]) -> Result<Vec<EventPair<'a>>> {
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut sorted_docs: Vec<&Document> = docs.iter().collect();
    sorted_docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    for doc in sorted_docs {
        let mut events: Vec<&EventMention> = doc.events.iter().collect();
        events.sort_by(|a, b| (a.trigger, &a.event_id).cmp(&(b.trigger, &b.event_id)));
        for event in events {
            index.insert((&doc.doc_id, &event.event_id), pairs.len());
            pairs.push(EventPair {
                doc,
                event,
                predicted: Vec::new(),
            });
        }
    }
    for p in preds {
        let i = *index
            .get(&(p.doc_id.as_str(), p.event_id.as_str()))
            .ok_or_else(|| Error::KeyMismatch {
                doc_id: p.doc_id.clone(),
                event_id: p.event_id.clone(),
            })?;
        pairs[i].predicted.extend(p.arguments.iter());
    }
    for pair in &mut pairs {
        pair.predicted
            .sort_by(|a, b| (&a.role, a.span, &a.text).cmp(&(&b.role, b.span, &b.text)));
    }
    Ok(pairs)
}

fn sorted_golds(event: &EventMention) -> Vec<&GoldArgument> {
    let mut golds: Vec<&GoldArgument> = event.arguments.iter().collect();
    golds.sort_by(|a, b| (&a.role, a.span).cmp(&(&b.role, b.span)));
    golds
}

fn match_event(
    doc: &Document,
    preds: &[&PredictedArgument],
    golds: &[&GoldArgument],
    cfg: MatchConfig,
) -> Vec<Option<usize>> {
    let adj: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| {
            golds
                .iter()
                .enumerate()
                .filter(|(_, g)| arg_matches(p, g, doc, cfg))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    max_matching(&adj, golds.len())
}

pub fn event_counts(pair: &EventPair<'_>, cfg: MatchConfig) -> Counts {
    let golds = sorted_golds(pair.event);
    let matching = match_event(pair.doc, &pair.predicted, &golds, cfg);
    let tp = matching.iter().flatten().count() as u64;
    Counts {
        tp,
        fp: pair.predicted.len() as u64 - tp,
        fn_: golds.len() as u64 - tp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Inclusive lower bound of the bucket.
    pub from: usize,
    pub counts: Counts,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub config: MatchConfig,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_document: BTreeMap<String, Counts>,
    pub by_doc_length: Vec<Bucket>,
    pub by_event_count: Vec<Bucket>,
}

fn buckets(map: BTreeMap<usize, Counts>) -> Vec<Bucket> {
    map.into_iter()
        .map(|(from, counts)| Bucket {
            from,
            counts,
            f1: counts.f1(),
        })
        .collect()
}

pub fn score(preds: &[Prediction], docs: &[Document], cfg: MatchConfig) -> Result<ScoreReport> {
    let pairs = align(preds, docs)?;
    let mut counts = Counts::default();
    let mut per_document: BTreeMap<String, Counts> = BTreeMap::new();
    for pair in &pairs {
        let c = event_counts(pair, cfg);
        counts.add(c);
        per_document.entry(pair.doc.doc_id.clone()).or_default().add(c);
    }
    let mut by_length: BTreeMap<usize, Counts> = BTreeMap::new();
    let mut by_events: BTreeMap<usize, Counts> = BTreeMap::new();
    for doc in docs {
        let c = per_document.entry(doc.doc_id.clone()).or_default();
        let len_bucket = doc.tokens.len() / DOC_LENGTH_BUCKET * DOC_LENGTH_BUCKET;
        let ev_bucket = doc.events.len() / EVENT_COUNT_BUCKET * EVENT_COUNT_BUCKET;
        by_length.entry(len_bucket).or_default().add(*c);
        by_events.entry(ev_bucket).or_default().add(*c);
    }
    Ok(ScoreReport {
        config: cfg,
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        per_document,
        by_doc_length: buckets(by_length),
        by_event_count: buckets(by_events),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub f1_a: f64,
    pub f1_b: f64,
    /// Share of resamples in which system b scores at least as well as a.
    pub p_value: f64,
    pub samples: usize,
}

/// Paired bootstrap over events: both systems are scored on the same
/// resampled event lists.
pub fn bootstrap_significance(
    preds_a: &[Prediction],
    preds_b: &[Prediction],
    docs: &[Document],
    cfg: MatchConfig,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<BootstrapResult> {
    let a: Vec<Counts> = align(preds_a, docs)?.iter().map(|p| event_counts(p, cfg)).collect();
    let b: Vec<Counts> = align(preds_b, docs)?.iter().map(|p| event_counts(p, cfg)).collect();
    let total = |cs: &[Counts]| {
        let mut t = Counts::default();
        cs.iter().for_each(|c| t.add(*c));
        t
    };
    let (f1_a, f1_b) = (total(&a).f1(), total(&b).f1());
    if samples == 0 || a.is_empty() {
        return Ok(BootstrapResult {
            f1_a,
            f1_b,
            p_value: 1.0,
            samples,
        });
    }
    let shards: Vec<u64> = (0..BOOTSTRAP_SHARDS).collect();
    let per_shard = samples as u64 / BOOTSTRAP_SHARDS;
    let extra = samples as u64 % BOOTSTRAP_SHARDS;
    let hits = exec::map(execution, &shards, |&shard| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard);
        let runs = per_shard + u64::from(shard < extra);
        let mut hits = 0u64;
        for _ in 0..runs {
            let (mut ta, mut tb) = (Counts::default(), Counts::default());
            for _ in 0..a.len() {
                let i = rng.gen_range(0..a.len());
                ta.add(a[i]);
                tb.add(b[i]);
            }
            if tb.f1() >= ta.f1() {
                hits += 1;
            }
        }
        hits
    });
    Ok(BootstrapResult {
        f1_a,
        f1_b,
        p_value: hits.iter().sum::<u64>() as f64 / samples as f64,
        samples,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub missing: u64,
    pub spurious: u64,
    pub misclassified: u64,
}

/// Gold argument that no prediction located.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingArgument {
    pub doc_id: String,
    pub event_id: String,
    pub role: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub breakdown: ErrorBreakdown,
    pub missing: Vec<MissingArgument>,
}

/// Splits classification errors: correct credits are removed first, then
/// remaining predictions that locate a remaining gold are misclassified.
pub fn error_breakdown(preds: &[Prediction], docs: &[Document], criterion: Criterion) -> Result<ErrorAnalysis> {
    let mut breakdown = ErrorBreakdown::default();
    let mut missing = Vec::new();
    for pair in align(preds, docs)? {
        let golds = sorted_golds(pair.event);
        let full = match_event(pair.doc, &pair.predicted, &golds, MatchConfig::new(Mode::Classification, criterion));
        let mut gold_used = vec![false; golds.len()];
        for g in full.iter().flatten() {
            gold_used[*g] = true;
        }
        let rest_preds: Vec<&PredictedArgument> = pair
            .predicted
            .iter()
            .zip(&full)
            .filter(|(_, m)| m.is_none())
            .map(|(p, _)| *p)
            .collect();
        let rest_golds: Vec<&GoldArgument> = golds
            .iter()
            .zip(&gold_used)
            .filter(|(_, u)| !**u)
            .map(|(g, _)| *g)
            .collect();
        let located = match_event(
            pair.doc,
            &rest_preds,
            &rest_golds,
            MatchConfig::new(Mode::Identification, criterion),
        );
        let mut located_gold = vec![false; rest_golds.len()];
        for g in located.iter().flatten() {
            located_gold[*g] = true;
        }
        let mis = located.iter().flatten().count() as u64;
        breakdown.misclassified += mis;
        breakdown.spurious += rest_preds.len() as u64 - mis;
        breakdown.missing += rest_golds.len() as u64 - mis;
        for (g, found) in rest_golds.iter().zip(&located_gold) {
            if !found {
                missing.push(MissingArgument {
                    doc_id: pair.doc.doc_id.clone(),
                    event_id: pair.event.event_id.clone(),
                    role: g.role.clone(),
                    span: g.span,
                });
            }
        }
    }
    Ok(ErrorAnalysis { breakdown, missing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub bucket_width: usize,
    /// `(bucket lower bound, count)` over all gold arguments.
    pub histogram_all: Vec<(usize, u64)>,
    pub histogram_missing: Vec<(usize, u64)>,
    pub mean_all: Option<f64>,
    pub mean_missing: Option<f64>,
}

/// Token distance from the trigger start to the argument head.
pub fn argument_distance(doc: &Document, event: &EventMention, gold: &GoldArgument) -> usize {
    let head = match gold.head_span {
        Some(h) if !h.is_empty() => h.start,
        _ => head_index(doc, gold.span),
    };
    head.abs_diff(event.trigger.start)
}

pub fn distance_distribution(docs: &[Document], missing: &[MissingArgument], bucket_width: usize) -> DistanceReport {
    let width = bucket_width.max(1);
    let missing_keys: std::collections::HashSet<(&str, &str, &str, Span)> = missing
        .iter()
        .map(|m| (m.doc_id.as_str(), m.event_id.as_str(), m.role.as_str(), m.span))
        .collect();
    let mut all = Vec::new();
    let mut miss = Vec::new();
    for doc in docs {
        for event in &doc.events {
            for gold in &event.arguments {
                let d = argument_distance(doc, event, gold);
                all.push(d);
                if missing_keys.contains(&(doc.doc_id.as_str(), event.event_id.as_str(), gold.role.as_str(), gold.span)) {
                    miss.push(d);
                }
            }
        }
    }
    let histogram = |ds: &[usize]| {
        let mut h: BTreeMap<usize, u64> = BTreeMap::new();
        for d in ds {
            *h.entry(d / width * width).or_default() += 1;
        }
        h.into_iter().collect::<Vec<_>>()
    };
    let mean = |ds: &[usize]| (!ds.is_empty()).then(|| ds.iter().sum::<usize>() as f64 / ds.len() as f64);
    DistanceReport {
        bucket_width: width,
        histogram_all: histogram(&all),
        histogram_missing: histogram(&miss),
        mean_all: mean(&all),
        mean_missing: mean(&miss),
    }
}
