//! Generator interface, model input construction and greedy decoding.

mod ngram;
mod sidecar;
mod table;
mod vocab;

pub use ngram::{NgramConfig, NgramGenerator};
pub use sidecar::{SidecarClient, SidecarEmbedder, SidecarGenerator, DEFAULT_TIMEOUT};
pub use table::{TableGenerator, TableRule};
pub use vocab::{TokenDistribution, Vocabulary};

use std::sync::Arc;

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};
use crate::memory::EventRecord;
use crate::ontology::{EventTemplate, ARG_PLACEHOLDER};
use crate::template::{SlotState, TargetSequence};

pub const SEG_OPEN: &str = "<S>";
pub const SEG_CLOSE: &str = "</S>";
pub const EOS: &str = "[EOS]";
pub const UNK: &str = "<unk>";
pub const TRG_OPEN: &str = "<trg>";
pub const TRG_CLOSE: &str = "</trg>";

/// Tokens every vocabulary carries, in id order.
pub const RESERVED: [&str; 7] = [ARG_PLACEHOLDER, SEG_OPEN, SEG_CLOSE, EOS, UNK, TRG_OPEN, TRG_CLOSE];

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Allowed deviation of a generator distribution from unit mass.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorInput {
    pub memory_segment: Option<Vec<String>>,
    pub template_segment: Vec<String>,
    /// Document window with the trigger wrapped in `<trg>` … `</trg>`.
    pub context_segment: Vec<String>,
    /// `<S> m </S> <S> T </S> x [EOS]`; the memory block is omitted when absent.
    pub rendered: Vec<String>,
}

impl GeneratorInput {
    pub fn new(
        memory_segment: Option<Vec<String>>,
        template_segment: Vec<String>,
        context_segment: Vec<String>,
    ) -> Self {
        let mut rendered = Vec::new();
        if let Some(m) = &memory_segment {
            rendered.push(SEG_OPEN.to_string());
            rendered.extend(m.iter().cloned());
            rendered.push(SEG_CLOSE.to_string());
        }
        rendered.push(SEG_OPEN.to_string());
        rendered.extend(template_segment.iter().cloned());
        rendered.push(SEG_CLOSE.to_string());
        rendered.extend(context_segment.iter().cloned());
        rendered.push(EOS.to_string());
        GeneratorInput {
            memory_segment,
            template_segment,
            context_segment,
            rendered,
        }
    }

    /// Words between the trigger markers.
    pub fn trigger_words(&self) -> &[String] {
        let open = self.context_segment.iter().position(|t| t == TRG_OPEN);
        let close = self.context_segment.iter().position(|t| t == TRG_CLOSE);
        match (open, close) {
            (Some(o), Some(c)) if o < c => &self.context_segment[o + 1..c],
            _ => &[],
        }
    }
}

/// Token range `[start, end)` of a window of at most `budget` document tokens
/// around `trigger`, trimmed evenly from both sides.
pub fn context_window(doc_len: usize, trigger: Span, budget: usize) -> (usize, usize) {
    let rem = budget.saturating_sub(trigger.len());
    let left_avail = trigger.start;
    let right_avail = doc_len - trigger.end;
    if left_avail + right_avail <= rem {
        return (0, doc_len);
    }
    let mut left = rem / 2;
    let mut right = rem - left;
    if left > left_avail {
        right += left - left_avail;
        left = left_avail;
    } else if right > right_avail {
        left += right - right_avail;
        right = right_avail;
    }
    (trigger.start - left, trigger.end + right)
}

fn fixed_overhead(memory: Option<&[String]>, template: &EventTemplate) -> usize {
    memory.map_or(0, |m| m.len() + 2) + template.len() + 2 + 1
}

/// Document-context budget left once the template (and no memory) is placed,
/// excluding the two trigger markers. Used to build retrieval queries.
pub fn query_window(template: &EventTemplate, doc: &Document, trigger: Span, max_len: usize) -> Vec<String> {
    let budget = max_len
        .saturating_sub(fixed_overhead(None, template))
        .saturating_sub(2);
    let (s, e) = context_window(doc.tokens.len(), trigger, budget);
    doc.tokens[s..e].to_vec()
}

pub fn build_input(
    m_r: Option<&EventRecord>,
    template: &EventTemplate,
    doc: &Document,
    trigger: Span,
    max_len: usize,
) -> Result<GeneratorInput> {
    if trigger.is_empty() || trigger.end > doc.tokens.len() {
        return Err(Error::SpanOutOfBounds {
            start: trigger.start,
            end: trigger.end,
            len: doc.tokens.len(),
            context: format!("trigger in doc {}", doc.doc_id),
        });
    }
    let memory = m_r.map(|r| r.sequence_tokens.clone());
    let overhead = fixed_overhead(memory.as_deref(), template);
    let marked_trigger = trigger.len() + 2;
    if overhead > max_len {
        return Err(Error::InputTooLong {
            required: overhead,
            max_len,
        });
    }
    if overhead + marked_trigger > max_len {
        return Err(Error::InputTooLong {
            required: overhead + marked_trigger,
            max_len,
        });
    }
    let budget = max_len - overhead - 2;
    let (start, end) = context_window(doc.tokens.len(), trigger, budget);
    let mut context = Vec::with_capacity(end - start + 2);
    context.extend(doc.tokens[start..trigger.start].iter().cloned());
    context.push(TRG_OPEN.to_string());
    context.extend(doc.tokens[trigger.start..trigger.end].iter().cloned());
    context.push(TRG_CLOSE.to_string());
    context.extend(doc.tokens[trigger.end..end].iter().cloned());
    Ok(GeneratorInput::new(memory, template.placeholder_tokens(), context))
}

pub trait Generator: Send + Sync {
    fn vocabulary(&self) -> &Arc<Vocabulary>;

    fn next_distribution(&self, input: &GeneratorInput, prefix: &[String]) -> Result<TokenDistribution>;
}

/// Per-step rewrite of the next-token distribution.
pub trait AdjustHook {
    fn adjust(&mut self, dist: TokenDistribution, slot: &SlotState) -> TokenDistribution;
}

impl<F> AdjustHook for F
where
    F: FnMut(TokenDistribution, &SlotState) -> TokenDistribution,
{
    fn adjust(&mut self, dist: TokenDistribution, slot: &SlotState) -> TokenDistribution {
        self(dist, slot)
    }
}

/// Greedy decoding: repeatedly takes the most probable token (ties to the
/// lexicographically smallest) until `[EOS]` or `max_steps` tokens.
pub fn decode_greedy(
    g: &dyn Generator,
    input: &GeneratorInput,
    template: &EventTemplate,
    mut adjuster: Option<&mut dyn AdjustHook>,
    max_steps: usize,
) -> Result<Vec<String>> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    let mut state = SlotState::new(template);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..max_steps {
        let mut dist = g.next_distribution(input, &out)?;
        let sum = dist.sum();
        if !dist.is_non_negative() || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::DegenerateDistribution { sum });
        }
        dist.renormalize();
        if let Some(hook) = adjuster.as_deref_mut() {
            dist = hook.adjust(dist, &state);
        }
        let token = dist.argmax().to_string();
        if token == EOS {
            break;
        }
        // A derailed state stops constraining; the error itself is not fatal.
        let _ = state.advance(template, &token);
        out.push(token);
    }
    Ok(out)
}

/// Training pair for offline generators.
pub type TrainingPair = (GeneratorInput, TargetSequence);
