//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use docie::constrained_decoding::{Ablation, AdjustConfig, ExtractOptions};

pub const DEFAULT_SEED: u64 = 13;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ontology: Option<PathBuf>,
    pub documents: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
    pub curation: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub generator: Option<String>,
    pub embedder: Option<String>,
    pub max_input_length: Option<usize>,
    pub max_steps: Option<usize>,
    pub ablation: Option<Ablation>,
    pub constrained: Option<bool>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub threshold: Option<f64>,
    #[serde(default)]
    pub adjust: AdjustOverrides,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustOverrides {
    pub penalty: Option<f64>,
    pub boost: Option<f64>,
    pub promotion_min_count: Option<u64>,
    pub penalize: Option<bool>,
    pub promote: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Takes the flag value, then the file value.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

pub fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    match path {
        Some(p) => Ok(p),
        None => bail!("no {what} given (flag or config file)"),
    }
}

pub fn existing(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = require(path, what)?;
    if !p.exists() {
        bail!("{what} {} does not exist", p.display());
    }
    Ok(p)
}

/// Extraction flags that may override the file.
#[derive(Debug, Clone, Default)]
pub struct ExtractFlags {
    pub max_input_length: Option<usize>,
    pub max_steps: Option<usize>,
    pub ablation: Option<Ablation>,
    pub constrained: Option<bool>,
    pub seed: Option<u64>,
    pub penalty: Option<f64>,
    pub boost: Option<f64>,
    pub promotion_min_count: Option<u64>,
}

pub fn extract_options(flags: &ExtractFlags, file: &FileConfig) -> Result<ExtractOptions> {
    let defaults = ExtractOptions::default();
    let adjust_defaults = AdjustConfig::default();
    let adjust = AdjustConfig {
        penalty: pick(flags.penalty, &file.adjust.penalty).unwrap_or(adjust_defaults.penalty),
        boost: pick(flags.boost, &file.adjust.boost).unwrap_or(adjust_defaults.boost),
        promotion_min_count: pick(flags.promotion_min_count, &file.adjust.promotion_min_count)
            .unwrap_or(adjust_defaults.promotion_min_count),
        penalize: file.adjust.penalize.unwrap_or(adjust_defaults.penalize),
        promote: file.adjust.promote.unwrap_or(adjust_defaults.promote),
    };
    adjust.validate()?;
    let options = ExtractOptions {
        ablation: pick(flags.ablation, &file.ablation).unwrap_or(defaults.ablation),
        constrained: pick(flags.constrained, &file.constrained).unwrap_or(defaults.constrained),
        adjust,
        max_input_length: pick(flags.max_input_length, &file.max_input_length)
            .unwrap_or(defaults.max_input_length),
        max_steps: pick(flags.max_steps, &file.max_steps).unwrap_or(defaults.max_steps),
        seed: pick(flags.seed, &file.seed).unwrap_or(DEFAULT_SEED),
    };
    if options.max_steps == 0 {
        bail!("max_steps must be at least 1");
    }
    Ok(options)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorSpec {
    Table(PathBuf),
    Ngram(PathBuf),
    /// Endpoint, or `None` to read it from the environment.
    Sidecar(Option<String>),
}

impl std::str::FromStr for GeneratorSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sidecar" {
            return Ok(GeneratorSpec::Sidecar(None));
        }
        match s.split_once(':') {
            Some(("table", p)) if !p.is_empty() => Ok(GeneratorSpec::Table(p.into())),
            Some(("ngram", p)) if !p.is_empty() => Ok(GeneratorSpec::Ngram(p.into())),
            Some(("sidecar", e)) if !e.is_empty() => Ok(GeneratorSpec::Sidecar(Some(e.into()))),
            _ => bail!("generator `{s}` must be table:PATH, ngram:PATH or sidecar[:ENDPOINT]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderSpec {
    Hashed(usize),
    Sidecar(Option<String>),
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Hashed(docie::retrieval::HashedTfIdfEmbedder::DEFAULT_DIM)
    }
}

impl std::str::FromStr for EmbedderSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "hashed" => Ok(EmbedderSpec::default()),
            None if s == "sidecar" => Ok(EmbedderSpec::Sidecar(None)),
            Some(("hashed", dim)) => {
                let dim: usize = dim.parse().with_context(|| format!("bad embedding size `{dim}`"))?;
                if dim == 0 {
                    bail!("embedding size must be positive");
                }
                Ok(EmbedderSpec::Hashed(dim))
            }
            Some(("sidecar", e)) if !e.is_empty() => Ok(EmbedderSpec::Sidecar(Some(e.into()))),
            _ => bail!("embedder `{s}` must be hashed[:DIM] or sidecar[:ENDPOINT]"),
        }
    }
}
