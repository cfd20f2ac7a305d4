//! Line-oriented file formats: JSONL instances and annotations, a CoNLL
//! rendering of instances, and prediction input.

use std::io::{BufRead, Write};

use conjunct_core::pipeline::AnnotatedSentence;
use conjunct_core::schema::{
    tokenize_whitespace, tokens_from_words, CoordinatorKind, CoordinatorSpan, DetectorLabel, IdentifierLabel, Token,
    TokenSpan,
};
use conjunct_core::splitter::Substitution;
use conjunct_core::treebank::{InstanceError, TrainingInstance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Instance { line: usize, source: InstanceError },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum InstanceFormat {
    #[default]
    Jsonl,
    Conll,
}

impl InstanceFormat {
    /// `.conll` files are CoNLL, everything else JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("conll") => InstanceFormat::Conll,
            _ => InstanceFormat::Jsonl,
        }
    }
}

fn write_json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<(), FormatError> {
    serde_json::to_writer(&mut *w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, values: &[T]) -> Result<(), FormatError> {
    for v in values {
        write_json_line(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances_jsonl<R: BufRead>(r: R) -> Result<Vec<TrainingInstance>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: TrainingInstance =
            serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 1, source })?;
        inst.check().map_err(|source| FormatError::Instance { line: i + 1, source })?;
        out.push(inst);
    }
    Ok(out)
}

fn span_text(s: TokenSpan) -> String {
    format!("{}:{}", s.start, s.end)
}

fn parse_span(text: &str, line: usize) -> Result<TokenSpan, FormatError> {
    let bad = || FormatError::Syntax {
        line,
        message: format!("bad span `{text}`"),
    };
    let (s, e) = text.split_once(':').ok_or_else(bad)?;
    let (s, e) = (s.parse().map_err(|_| bad())?, e.parse().map_err(|_| bad())?);
    TokenSpan::new(s, e).map_err(|_| bad())
}

fn coordinator_text(c: &CoordinatorSpan) -> String {
    let mut s = format!("{}/{}", span_text(c.span), c.kind.as_str());
    if let Some(p) = c.partner {
        s.push('/');
        s.push_str(&span_text(p));
    }
    s
}

fn parse_coordinator(text: &str, line: usize) -> Result<CoordinatorSpan, FormatError> {
    let parts: Vec<&str> = text.split('/').collect();
    let bad = |m: &str| FormatError::Syntax {
        line,
        message: format!("coordinator `{text}`: {m}"),
    };
    if parts.len() < 2 || parts.len() > 3 {
        return Err(bad("expected span/kind[/partner]"));
    }
    let span = parse_span(parts[0], line)?;
    let kind = CoordinatorKind::ALL
        .into_iter()
        .find(|k| k.as_str() == parts[1])
        .ok_or_else(|| bad("unknown kind"))?;
    let partner = parts.get(2).map(|p| parse_span(p, line)).transpose()?;
    Ok(CoordinatorSpan { span, kind, partner })
}

/// One block per instance: a `# target` and a `# coordinators` comment,
/// then `word<TAB>identifier label<TAB>detector label` lines and a blank
/// line.
pub fn write_instances_conll<W: Write>(mut w: W, instances: &[TrainingInstance]) -> Result<(), FormatError> {
    for inst in instances {
        writeln!(w, "# target = {}", coordinator_text(&inst.target))?;
        let coords: Vec<String> = inst.coordinators.iter().map(coordinator_text).collect();
        writeln!(w, "# coordinators = {}", coords.join(" "))?;
        for ((t, id), det) in inst.tokens.iter().zip(&inst.identifier_labels).zip(&inst.labels) {
            writeln!(w, "{}\t{}\t{}", t.text, id.as_str(), det.as_str())?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances_conll<R: BufRead>(r: R) -> Result<Vec<TrainingInstance>, FormatError> {
    struct Block {
        start: usize,
        target: Option<CoordinatorSpan>,
        coordinators: Vec<CoordinatorSpan>,
        words: Vec<String>,
        ids: Vec<IdentifierLabel>,
        labels: Vec<DetectorLabel>,
    }
    let new_block = |start| Block {
        start,
        target: None,
        coordinators: Vec::new(),
        words: Vec::new(),
        ids: Vec::new(),
        labels: Vec::new(),
    };
    let finish = |b: Block| -> Result<TrainingInstance, FormatError> {
        let target = b.target.ok_or(FormatError::Syntax {
            line: b.start,
            message: "missing `# target`".into(),
        })?;
        let inst = TrainingInstance {
            tokens: tokens_from_words(&b.words),
            target,
            coordinators: b.coordinators,
            labels: b.labels,
            identifier_labels: b.ids,
        };
        inst.check().map_err(|source| FormatError::Instance { line: b.start, source })?;
        Ok(inst)
    };

    let mut out = Vec::new();
    let mut block: Option<Block> = None;
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                out.push(finish(b)?);
            }
            continue;
        }
        let b = block.get_or_insert_with(|| new_block(n));
        if let Some(rest) = line.strip_prefix("# target = ") {
            b.target = Some(parse_coordinator(rest.trim(), n)?);
        } else if let Some(rest) = line.strip_prefix("# coordinators = ") {
            b.coordinators = rest
                .split_whitespace()
                .map(|c| parse_coordinator(c, n))
                .collect::<Result<_, _>>()?;
        } else if line.starts_with('#') {
            continue;
        } else {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(FormatError::Syntax {
                    line: n,
                    message: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            let id = match cols[1] {
                "O" => IdentifierLabel::O,
                "C" => IdentifierLabel::C,
                other => {
                    return Err(FormatError::Syntax {
                        line: n,
                        message: format!("unknown identifier label `{other}`"),
                    })
                }
            };
            let det: DetectorLabel = cols[2].parse().map_err(|_| FormatError::Syntax {
                line: n,
                message: format!("unknown detector label `{}`", cols[2]),
            })?;
            b.words.push(cols[0].to_string());
            b.ids.push(id);
            b.labels.push(det);
        }
    }
    if let Some(b) = block.take() {
        out.push(finish(b)?);
    }
    Ok(out)
}

pub fn read_instances<R: BufRead>(r: R, format: InstanceFormat) -> Result<Vec<TrainingInstance>, FormatError> {
    match format {
        InstanceFormat::Jsonl => read_instances_jsonl(r),
        InstanceFormat::Conll => read_instances_conll(r),
    }
}

pub fn write_instances<W: Write>(w: W, instances: &[TrainingInstance], format: InstanceFormat) -> Result<(), FormatError> {
    match format {
        InstanceFormat::Jsonl => write_jsonl(w, instances),
        InstanceFormat::Conll => write_instances_conll(w, instances),
    }
}

/// One prediction request: pre-split `tokens` or raw `text` split on
/// whitespace, optionally with known coordinators. Other fields (for
/// example the `coordinations` of a gold annotation) are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
pub struct InputSentence {
    #[serde(default)]
    pub id: Option<serde_json::Value>,
    #[serde(default)]
    pub tokens: Option<Vec<String>>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub coordinators: Option<Vec<CoordinatorSpan>>,
}

impl InputSentence {
    pub fn tokens(&self) -> Vec<Token> {
        match (&self.tokens, &self.text) {
            (Some(words), _) => tokens_from_words(words),
            (None, Some(text)) => tokenize_whitespace(text),
            (None, None) => Vec::new(),
        }
    }
}

pub fn read_inputs<R: BufRead>(r: R) -> Result<Vec<InputSentence>, FormatError> {
    let inputs: Vec<InputSentence> = read_jsonl(r)?;
    Ok(inputs)
}

pub fn read_annotations<R: BufRead>(r: R) -> Result<Vec<AnnotatedSentence>, FormatError> {
    read_jsonl(r)
}

/// One line of `predict` output: the annotation plus the input id, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prediction {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<serde_json::Value>,
    #[serde(flatten)]
    pub sentence: AnnotatedSentence,
}

/// A sub-sentence with where it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub source_id: serde_json::Value,
    pub text: String,
    pub tokens: Vec<String>,
    pub substitutions: Vec<Substitution>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitStats {
    pub sentences: usize,
    pub written: usize,
    pub skipped: usize,
}

#[derive(Deserialize)]
struct SplitInput {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(flatten)]
    sentence: AnnotatedSentence,
}

/// Streams annotated sentences to sub-sentence records. Lines that fail to
/// parse or split are skipped and counted.
pub fn split_corpus<R: BufRead, W: Write>(r: R, mut w: W) -> Result<SplitStats, FormatError> {
    let mut stats = SplitStats::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let input: SplitInput = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("line {}: skipped: {e}", i + 1);
                stats.skipped += 1;
                continue;
            }
        };
        let subs = match conjunct_core::splitter::split_sentence(&input.sentence) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("line {}: skipped: {e}", i + 1);
                stats.skipped += 1;
                continue;
            }
        };
        stats.sentences += 1;
        let source_id = input.id.unwrap_or_else(|| serde_json::Value::from(i + 1));
        for s in subs {
            write_json_line(
                &mut w,
                &SplitRecord {
                    source_id: source_id.clone(),
                    text: s.text(),
                    tokens: s.tokens.iter().map(|t| t.text.clone()).collect(),
                    substitutions: s.substitutions,
                },
            )?;
            stats.written += 1;
        }
    }
    w.flush()?;
    Ok(stats)
}
