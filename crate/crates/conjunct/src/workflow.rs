//! Operations behind the CLI subcommands, usable as a library.

use std::collections::BTreeMap;
use std::time::Instant;

use conjunct_core::evaluation::{score_dataset, span_prf, Counts, EvalError, EvalOptions, EvalReport};
use conjunct_core::lexicon::PairedLexicon;
use conjunct_core::models::{DetectorModel, IdentifierModel, ModelError};
use conjunct_core::pipeline::{AnnotatedSentence, Pipeline};
use conjunct_core::schema::{CoordinatorKind, Token};
use conjunct_core::treebank::{
    convert_tree, instances_from_annotation, parse_forest, ConversionWarning, ExceptionError, ExceptionList,
    InstanceError, ParseError, TrainingInstance,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formats::InputSentence;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{file}:{line}:{column}: {error}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        error: ParseError,
    },
    #[error("tree {tree}: {source}")]
    Instance { tree: usize, source: InstanceError },
    #[error("tree {tree}: {source}")]
    Exception { tree: usize, source: ExceptionError },
    #[error("sentence {index}: {source}")]
    Model { index: usize, source: ModelError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// 1-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelSummary {
    pub trees: usize,
    pub instances: usize,
    pub coordinators: BTreeMap<String, usize>,
    pub warnings: usize,
    pub exceptions_applied: usize,
}

#[derive(Clone, Debug, Default)]
pub struct LabelOutput {
    pub sentences: Vec<AnnotatedSentence>,
    pub instances: Vec<TrainingInstance>,
    pub warnings: Vec<(usize, ConversionWarning)>,
    pub summary: LabelSummary,
}

/// Converts a bracketed treebank into gold annotations and training
/// instances.
pub fn labelgen(
    text: &str,
    file: &str,
    exceptions: Option<&ExceptionList>,
    lexicon: &PairedLexicon,
) -> Result<LabelOutput, WorkflowError> {
    let forest = parse_forest(text).map_err(|error| {
        let (line, column) = line_column(text, error.offset);
        WorkflowError::Parse {
            file: file.to_string(),
            line,
            column,
            error,
        }
    })?;
    let mut out = LabelOutput::default();
    for kind in CoordinatorKind::ALL {
        out.summary.coordinators.insert(kind.as_str().to_string(), 0);
    }
    for (i, (_, tree)) in forest.iter().enumerate() {
        let mut conv = convert_tree(tree, lexicon);
        if let Some(ex) = exceptions {
            out.summary.exceptions_applied += ex
                .apply(&mut conv.sentence)
                .map_err(|source| WorkflowError::Exception { tree: i + 1, source })?;
        }
        let instances =
            instances_from_annotation(&conv.sentence).map_err(|source| WorkflowError::Instance { tree: i + 1, source })?;
        for c in &conv.sentence.coordinators {
            *out.summary.coordinators.entry(c.kind.as_str().to_string()).or_default() += 1;
        }
        out.warnings.extend(conv.warnings.into_iter().map(|w| (i + 1, w)));
        out.instances.extend(instances);
        out.sentences.push(conv.sentence);
    }
    out.summary.trees = forest.len();
    out.summary.instances = out.instances.len();
    out.summary.warnings = out.warnings.len();
    Ok(out)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, WorkflowError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| WorkflowError::Threads(e.to_string()))
}

/// Runs the pipeline over every input, in input order. With
/// `gold_coordinators`, coordinators given in the input replace the
/// identifier. `threads = 0` uses every logical core.
pub fn predict(
    pipeline: &Pipeline,
    inputs: &[InputSentence],
    gold_coordinators: bool,
    threads: usize,
) -> Result<Vec<AnnotatedSentence>, WorkflowError> {
    pool(threads)?.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(index, input)| {
                let tokens = input.tokens();
                let gold = if gold_coordinators {
                    Some(input.coordinators.as_deref().unwrap_or(&[]))
                } else {
                    None
                };
                pipeline
                    .run(&tokens, gold)
                    .map_err(|source| WorkflowError::Model { index, source })
            })
            .collect()
    })
}

/// Predicts on the gold sentences and scores the result. Inference time is
/// measured around prediction only.
pub fn evaluate_dataset(
    pipeline: &Pipeline,
    gold: &[AnnotatedSentence],
    options: EvalOptions,
    gold_coordinators: bool,
    threads: usize,
) -> Result<(EvalReport, Vec<AnnotatedSentence>), WorkflowError> {
    let inputs: Vec<InputSentence> = gold
        .iter()
        .map(|s| InputSentence {
            tokens: Some(s.tokens.iter().map(|t| t.text.clone()).collect()),
            coordinators: Some(s.coordinators.clone()),
            ..InputSentence::default()
        })
        .collect();
    let started = Instant::now();
    let pred = predict(pipeline, &inputs, gold_coordinators, threads)?;
    let seconds = started.elapsed().as_secs_f64();
    let mut report = score_dataset(gold, &pred, options)?;
    report.inference_seconds = Some(seconds);
    Ok((report, pred))
}

/// Token accuracy of the identifier on distinct instance sentences.
pub fn identifier_accuracy(model: &IdentifierModel, data: &[TrainingInstance]) -> Result<f64, ModelError> {
    let mut seen = BTreeMap::new();
    for inst in data {
        let key: Vec<&str> = inst.tokens.iter().map(|t| t.text.as_str()).collect();
        seen.entry(key).or_insert(inst);
    }
    let (mut right, mut total) = (0usize, 0usize);
    for inst in seen.values() {
        let pred = model.predict_labels(&inst.tokens)?;
        right += pred.iter().zip(&inst.identifier_labels).filter(|(a, b)| a == b).count();
        total += pred.len();
    }
    Ok(if total == 0 { 0.0 } else { right as f64 / total as f64 })
}

/// Conjunct-span counts of the detector on instances, with gold
/// coordinators as flags.
pub fn detector_counts(model: &DetectorModel, data: &[TrainingInstance]) -> Result<Counts, WorkflowError> {
    let mut total = Counts::default();
    for (index, inst) in data.iter().enumerate() {
        let gold = inst
            .coordination()
            .map_err(|e| WorkflowError::Instance { tree: index + 1, source: e.into() })?;
        let pred = model
            .detect(&inst.tokens, &inst.target, &inst.coordinators)
            .map_err(|source| WorkflowError::Model { index, source })?;
        total.add(span_prf(&[gold], &[pred.coordination]).0);
    }
    Ok(total)
}

pub fn words(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}
