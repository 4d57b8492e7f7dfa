mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use docie::constrained_decoding::{
    save_predictions, load_predictions, training_pairs, Ablation, DocumentExtraction, ExtractOptions, Pipeline,
    Prediction,
};
use docie::constraints::{harvest, load_curation, ConstraintSet, HarvestConfig, Orientation};
use docie::corpus::{dataset_stats, load_documents, load_insertions, save_documents, splice_adversarial, Document};
use docie::evaluation::{
    bootstrap_significance, distance_distribution, error_breakdown, score, BootstrapResult, Criterion,
    DistanceReport, ErrorBreakdown, MatchConfig, Mode, ScoreReport, DISTANCE_BUCKET,
};
use docie::generation::{
    Generator, NgramConfig, NgramGenerator, SidecarClient, SidecarEmbedder, SidecarGenerator, TableGenerator,
    DEFAULT_TIMEOUT,
};
use docie::ontology::{load_ontology, Ontology};
use docie::retrieval::{Embedder, HashedTfIdfEmbedder};
use docie::{jsonl, Execution};

use config::{existing, extract_options, pick, require, EmbedderSpec, ExtractFlags, FileConfig, GeneratorSpec};

#[derive(Parser)]
#[command(name = "docie", version, about = "Document-level event argument extraction with event memory")]
struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Documents processed in parallel (1 = sequential).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest probable/improbable argument pairs from training documents.
    Harvest(HarvestArgs),
    /// Fit the n-gram generator on gold targets.
    Train(TrainArgs),
    /// Extract arguments for every annotated trigger.
    Extract(ExtractArgs),
    /// Score predictions against gold arguments.
    Eval(EvalArgs),
    /// Dataset statistics.
    Stats(StatsArgs),
    /// Splice adversarial sentences into documents, then extract and score.
    Adversarial(AdversarialArgs),
    /// Paired bootstrap comparison of two prediction files.
    Compare(CompareArgs),
}

#[derive(Args)]
struct HarvestArgs {
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    /// Curation overlay applied after harvesting.
    #[arg(long)]
    curation: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Label above-threshold pairs improbable instead of probable.
    #[arg(long)]
    above_is_improbable: bool,
}

#[derive(Args, Default)]
struct ExtractSettings {
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// table:PATH, ngram:PATH or sidecar[:ENDPOINT]
    #[arg(long)]
    generator: Option<String>,
    /// hashed[:DIM] or sidecar[:ENDPOINT]
    #[arg(long)]
    embedder: Option<String>,
    /// none, no_retrieval or random_memory
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    constrained: Option<bool>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    boost: Option<f64>,
    #[arg(long)]
    promotion_min_count: Option<u64>,
    #[arg(long)]
    max_input_length: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write every rendered model input here.
    #[arg(long)]
    dump_inputs: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    #[arg(long)]
    max_input_length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = NgramConfig::default().order)]
    order: usize,
    #[arg(long, default_value_t = NgramConfig::default().copy_weight)]
    copy_weight: f64,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    settings: ExtractSettings,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    predictions: PathBuf,
    /// JSON report destination.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Document files; defaults to the configured documents.
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct AdversarialArgs {
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    insertions: PathBuf,
    /// JSON report destination.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the spliced documents.
    #[arg(long)]
    spliced: Option<PathBuf>,
    /// Also write the predictions on the spliced documents.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[command(flatten)]
    settings: ExtractSettings,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    documents: Option<PathBuf>,
    /// Candidate system.
    #[arg(long)]
    a: PathBuf,
    /// Baseline system.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines destination, one line per scoring configuration.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    match s {
        "none" => Ok(Ablation::None),
        "no_retrieval" => Ok(Ablation::NoRetrieval),
        "random_memory" => Ok(Ablation::RandomMemory),
        _ => Err(format!("unknown ablation `{s}` (none, no_retrieval, random_memory)")),
    }
}

enum Status {
    Done,
    Partial,
}

struct RunContext {
    file: FileConfig,
    execution: Execution,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let workers = pick(cli.workers, &file.workers).unwrap_or(1);
    let ctx = RunContext {
        execution: Execution::with_workers(workers),
        file,
    };
    match cli.command {
        Command::Harvest(a) => cmd_harvest(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Extract(a) => cmd_extract(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Adversarial(a) => cmd_adversarial(&ctx, a),
        Command::Compare(a) => cmd_compare(&ctx, a),
    }
}

fn read_ontology(path: Option<PathBuf>, file: &FileConfig) -> Result<Ontology> {
    let p = existing(pick(path, &file.ontology), "ontology")?;
    load_ontology(&p).with_context(|| format!("loading ontology {}", p.display()))
}

fn read_documents(path: Option<PathBuf>, file: &FileConfig) -> Result<Vec<Document>> {
    let p = existing(pick(path, &file.documents), "documents")?;
    load_documents(&p).with_context(|| format!("loading documents {}", p.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_harvest(ctx: &RunContext, a: HarvestArgs) -> Result<Status> {
    let ontology = read_ontology(a.ontology, &ctx.file)?;
    let docs = read_documents(a.documents, &ctx.file)?;
    for d in &docs {
        d.validate_against(&ontology)?;
    }
    let output = require(pick(a.output, &ctx.file.output).or(ctx.file.constraints.clone()), "output")?;
    let cfg = HarvestConfig {
        threshold: pick(a.threshold, &ctx.file.threshold).unwrap_or(HarvestConfig::default().threshold),
        orientation: if a.above_is_improbable {
            Orientation::AboveIsImprobable
        } else {
            Orientation::AboveIsProbable
        },
        execution: ctx.execution,
    };
    let mut cs = harvest(&ontology, &docs, &cfg);
    println!("{:<12}{:>10}{:>10}", "", "improbable", "probable");
    println!("{:<12}{:>10}{:>10}", "harvested", cs.improbable().len(), cs.probable().len());
    if let Some(cur) = pick(a.curation, &ctx.file.curation) {
        let overlay = load_curation(&cur).with_context(|| format!("loading curation {}", cur.display()))?;
        cs = cs.apply_curation(&overlay);
        println!("{:<12}{:>10}{:>10}", "curated", cs.improbable().len(), cs.probable().len());
    }
    cs.save(&output)?;
    Ok(Status::Done)
}

fn build_embedder(spec: Option<String>, file: &FileConfig, docs: &[Document]) -> Result<Box<dyn Embedder>> {
    let spec: EmbedderSpec = match pick(spec, &file.embedder) {
        Some(s) => s.parse()?,
        None => EmbedderSpec::default(),
    };
    Ok(match spec {
        EmbedderSpec::Hashed(dim) => Box::new(HashedTfIdfEmbedder::fit(dim, docs.iter().map(|d| &d.tokens))),
        EmbedderSpec::Sidecar(endpoint) => {
            let client = SidecarClient::from_env(endpoint.as_deref(), DEFAULT_TIMEOUT)?;
            Box::new(SidecarEmbedder::new(Arc::new(client)))
        }
    })
}

fn corpus_words(docs: &[Document]) -> BTreeSet<String> {
    docs.iter().flat_map(|d| d.tokens.iter().cloned()).collect()
}

fn build_generator(spec: Option<String>, file: &FileConfig, docs: &[Document]) -> Result<Box<dyn Generator>> {
    let Some(spec) = pick(spec, &file.generator) else {
        bail!("no generator given (flag or config file)");
    };
    let words = corpus_words(docs);
    Ok(match spec.parse::<GeneratorSpec>()? {
        GeneratorSpec::Table(p) => {
            let rules = jsonl::read(&p).with_context(|| format!("loading table {}", p.display()))?;
            Box::new(TableGenerator::with_words(rules, words)?)
        }
        GeneratorSpec::Ngram(p) => {
            let g = NgramGenerator::load(&p).with_context(|| format!("loading model {}", p.display()))?;
            Box::new(g.with_words(words))
        }
        GeneratorSpec::Sidecar(endpoint) => {
            let client = SidecarClient::from_env(endpoint.as_deref(), DEFAULT_TIMEOUT)?;
            Box::new(SidecarGenerator::new(Arc::new(client), words))
        }
    })
}

fn cmd_train(ctx: &RunContext, a: TrainArgs) -> Result<Status> {
    let ontology = read_ontology(a.ontology, &ctx.file)?;
    let docs = read_documents(a.documents, &ctx.file)?;
    let output = require(a.output, "output")?;
    let flags = ExtractFlags {
        max_input_length: a.max_input_length,
        ablation: a.ablation,
        seed: a.seed,
        ..Default::default()
    };
    let options = extract_options(&flags, &ctx.file)?;
    let embedder = build_embedder(a.embedder, &ctx.file, &docs)?;
    let pairs = training_pairs(&ontology, &docs, embedder.as_ref(), &options)?;
    let cfg = NgramConfig {
        order: a.order,
        copy_weight: a.copy_weight,
        ..NgramConfig::default()
    };
    let model = NgramGenerator::train(&pairs, cfg)?;
    model.save(&output)?;
    println!("trained on {} target sequences", pairs.len());
    Ok(Status::Done)
}

#[derive(Serialize)]
struct InputDump<'a> {
    doc_id: &'a str,
    event_id: &'a str,
    retrieved: Option<&'a str>,
    input: String,
}

struct ExtractionRun {
    extractions: Vec<DocumentExtraction>,
    predictions: Vec<Prediction>,
}

fn run_extraction(ctx: &RunContext, docs: &[Document], s: ExtractSettings) -> Result<ExtractionRun> {
    let ontology = read_ontology(s.ontology, &ctx.file)?;
    for d in docs {
        d.validate_against(&ontology)?;
    }
    let flags = ExtractFlags {
        max_input_length: s.max_input_length,
        max_steps: s.max_steps,
        ablation: s.ablation,
        constrained: s.constrained,
        seed: s.seed,
        penalty: s.penalty,
        boost: s.boost,
        promotion_min_count: s.promotion_min_count,
    };
    let options: ExtractOptions = extract_options(&flags, &ctx.file)?;
    let constraints = match pick(s.constraints, &ctx.file.constraints) {
        Some(p) => ConstraintSet::load(&p).with_context(|| format!("loading constraints {}", p.display()))?,
        None => ConstraintSet::new(),
    };
    let generator = build_generator(s.generator, &ctx.file, docs)?;
    let embedder = build_embedder(s.embedder, &ctx.file, docs)?;
    let pipeline = Pipeline {
        ontology: &ontology,
        generator: generator.as_ref(),
        embedder: embedder.as_ref(),
        constraints: &constraints,
        options,
    };
    let extractions = pipeline.extract_corpus(docs, ctx.execution);
    let mut predictions = Vec::new();
    let mut dumps = Vec::new();
    for (doc, ex) in docs.iter().zip(&extractions) {
        for e in &ex.errors {
            eprintln!("warning: {}: {e}", ex.doc_id);
        }
        for outcome in &ex.events {
            predictions.push(Prediction::from_record(doc, &outcome.record));
            dumps.push(InputDump {
                doc_id: &doc.doc_id,
                event_id: &outcome.record.event_id,
                retrieved: outcome.retrieved.as_deref(),
                input: outcome.input.rendered.join(" "),
            });
        }
    }
    if let Some(p) = s.dump_inputs {
        jsonl::write(&p, &dumps)?;
    }
    Ok(ExtractionRun {
        extractions,
        predictions,
    })
}

fn status_of(run: &ExtractionRun) -> Status {
    if run.extractions.iter().any(DocumentExtraction::is_partial) {
        Status::Partial
    } else {
        Status::Done
    }
}

fn cmd_extract(ctx: &RunContext, a: ExtractArgs) -> Result<Status> {
    let docs = read_documents(a.documents, &ctx.file)?;
    let output = require(pick(a.output, &ctx.file.output), "output")?;
    let run = run_extraction(ctx, &docs, a.settings)?;
    save_predictions(&output, &run.predictions)?;
    let failed: usize = run.extractions.iter().map(|e| e.errors.len()).sum();
    println!("{} events extracted, {} failed", run.predictions.len(), failed);
    Ok(status_of(&run))
}

#[derive(Debug, Serialize)]
struct EvalReport {
    scores: Vec<ScoreReport>,
    errors: ErrorBreakdown,
    distances: DistanceReport,
}

fn evaluate(preds: &[Prediction], docs: &[Document]) -> Result<EvalReport> {
    let scores = MatchConfig::all()
        .into_iter()
        .map(|cfg| score(preds, docs, cfg))
        .collect::<docie::Result<Vec<_>>>()?;
    let analysis = error_breakdown(preds, docs, Criterion::Head)?;
    let distances = distance_distribution(docs, &analysis.missing, DISTANCE_BUCKET);
    Ok(EvalReport {
        scores,
        errors: analysis.breakdown,
        distances,
    })
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Identification => "identification",
        Mode::Classification => "classification",
    }
}

fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Exact => "exact",
        Criterion::Head => "head",
        Criterion::Coref => "coref",
    }
}

fn print_report(r: &EvalReport) {
    println!("{:<16}{:<8}{:>8}{:>8}{:>8}", "", "", "P", "R", "F1");
    for s in &r.scores {
        println!(
            "{:<16}{:<8}{:>8.2}{:>8.2}{:>8.2}",
            mode_name(s.config.mode),
            criterion_name(s.config.criterion),
            100.0 * s.precision,
            100.0 * s.recall,
            100.0 * s.f1
        );
    }
    println!(
        "errors (head): missing {}, spurious {}, misclassified {}",
        r.errors.missing, r.errors.spurious, r.errors.misclassified
    );
}

fn cmd_eval(ctx: &RunContext, a: EvalArgs) -> Result<Status> {
    let docs = read_documents(a.documents, &ctx.file)?;
    let preds = load_predictions(&a.predictions)?;
    let report = evaluate(&preds, &docs)?;
    print_report(&report);
    if let Some(out) = a.output {
        write_json(&out, &report)?;
    }
    Ok(Status::Done)
}

fn cmd_stats(ctx: &RunContext, a: StatsArgs) -> Result<Status> {
    let files = if a.files.is_empty() {
        vec![require(ctx.file.documents.clone(), "documents")?]
    } else {
        a.files
    };
    println!(
        "{:<24}{:>8}{:>10}{:>8}{:>12}{:>12}",
        "file", "docs", "sentences", "events", "avg events", "avg tokens"
    );
    for f in files {
        let docs = load_documents(&f).with_context(|| format!("loading documents {}", f.display()))?;
        let s = dataset_stats(&docs);
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        let name = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
        println!(
            "{:<24}{:>8}{:>10}{:>8}{:>12}{:>12}",
            name,
            s.doc_count,
            s.sentence_count,
            s.event_count,
            fmt(s.avg_events),
            fmt(s.avg_tokens)
        );
    }
    Ok(Status::Done)
}

fn cmd_adversarial(ctx: &RunContext, a: AdversarialArgs) -> Result<Status> {
    let mut docs = read_documents(a.documents, &ctx.file)?;
    let insertions = load_insertions(&a.insertions)?;
    for ins in &insertions {
        let Some(doc) = docs.iter_mut().find(|d| d.doc_id == ins.doc_id) else {
            bail!("insertion targets unknown document {}", ins.doc_id);
        };
        *doc = splice_adversarial(doc, ins)?;
    }
    if let Some(p) = &a.spliced {
        save_documents(p, &docs)?;
    }
    let run = run_extraction(ctx, &docs, a.settings)?;
    if let Some(p) = &a.predictions {
        save_predictions(p, &run.predictions)?;
    }
    let report = evaluate(&run.predictions, &docs)?;
    print_report(&report);
    if let Some(out) = a.output {
        write_json(&out, &report)?;
    }
    Ok(status_of(&run))
}

#[derive(Serialize)]
struct Comparison {
    mode: Mode,
    criterion: Criterion,
    #[serde(flatten)]
    result: BootstrapResult,
}

fn cmd_compare(ctx: &RunContext, a: CompareArgs) -> Result<Status> {
    let docs = read_documents(a.documents, &ctx.file)?;
    let preds_a = load_predictions(&a.a)?;
    let preds_b = load_predictions(&a.b)?;
    let seed = pick(a.seed, &ctx.file.seed).unwrap_or(config::DEFAULT_SEED);
    println!("{:<16}{:<8}{:>8}{:>8}{:>10}", "", "", "F1 a", "F1 b", "p");
    let mut lines = Vec::new();
    for cfg in MatchConfig::all() {
        let r = bootstrap_significance(&preds_a, &preds_b, &docs, cfg, a.samples, seed, ctx.execution)?;
        println!(
            "{:<16}{:<8}{:>8.2}{:>8.2}{:>10.4}",
            mode_name(cfg.mode),
            criterion_name(cfg.criterion),
            100.0 * r.f1_a,
            100.0 * r.f1_b,
            r.p_value
        );
        lines.push(Comparison {
            mode: cfg.mode,
            criterion: cfg.criterion,
            result: r,
        });
    }
    if let Some(out) = a.output {
        jsonl::write(&out, &lines)?;
    }
    Ok(Status::Done)
}
