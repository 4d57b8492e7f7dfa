//! Constraint-aware decoding and the per-document extraction loop.

mod adjust;
mod pipeline;
mod prediction;

pub use adjust::{adjust, AdjustConfig, BlockIndex};
pub use pipeline::{
    consumed_prefix, training_pairs, Ablation, DocumentExtraction, EventOutcome, ExtractOptions, Pipeline,
};
pub use prediction::{load_predictions, resolve_span, save_predictions, PredictedArgument, Prediction};
