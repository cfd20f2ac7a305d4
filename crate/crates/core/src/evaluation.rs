//! Exact-match span scoring.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::AnnotatedSentence;
use crate::schema::{Coordination, Token};
use crate::treebank::{classify_target, Complexity};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} sentences, predictions have {predicted}")]
    SentenceCount { gold: usize, predicted: usize },
    #[error("sentence {index}: gold and predicted tokens differ")]
    TokenMismatch { index: usize },
    #[error("no reports to summarize")]
    NoRuns,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.matched += other.matched;
    }

    pub fn prf(&self) -> Prf {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        Prf::new(pct(self.matched, self.predicted), pct(self.matched, self.gold))
    }
}

/// Percentages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Micro,
    /// Mean of per-sentence scores over sentences with a gold or
    /// predicted span.
    Macro,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub averaging: Averaging,
    /// Also score the target coordinator spans themselves.
    pub score_targets: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub simple: Counts,
    pub complex: Counts,
}

impl SplitCounts {
    pub fn total(&self) -> Counts {
        let mut c = self.simple;
        c.add(self.complex);
        c
    }

    fn slot(&mut self, c: Complexity) -> &mut Counts {
        match c {
            Complexity::Simple => &mut self.simple,
            Complexity::Complex => &mut self.complex,
        }
    }
}

/// Conjunct-span counts for one sentence. A predicted conjunct matches
/// only a gold conjunct under the same target span. Subsets follow the
/// gold target; predictions under a target absent from gold follow their
/// own.
pub fn sentence_counts(
    tokens: &[Token],
    gold: &[Coordination],
    pred: &[Coordination],
    options: EvalOptions,
) -> SplitCounts {
    let mut out = SplitCounts::default();
    let extra = usize::from(options.score_targets);
    for g in gold {
        let slot = out.slot(classify_target(tokens, &g.target));
        slot.gold += g.conjuncts.len() + extra;
        if let Some(p) = pred.iter().find(|p| p.target.span == g.target.span) {
            slot.matched += g.conjuncts.iter().filter(|c| p.conjuncts.contains(c)).count() + extra;
        }
    }
    for p in pred {
        let bucket = match gold.iter().find(|g| g.target.span == p.target.span) {
            Some(g) => classify_target(tokens, &g.target),
            None => classify_target(tokens, &p.target),
        };
        out.slot(bucket).predicted += p.conjuncts.len() + extra;
    }
    out
}

/// Precision, recall and F1 of one aligned gold/predicted pair.
pub fn span_prf(gold: &[Coordination], pred: &[Coordination]) -> (Counts, Prf) {
    let c = sentence_counts(&[], gold, pred, EvalOptions::default()).total();
    (c, c.prf())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SubsetScore {
    fn micro(counts: Counts) -> Self {
        let p = counts.prf();
        Self {
            counts,
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub averaging: Averaging,
    pub sentences: usize,
    pub overall: SubsetScore,
    pub simple: SubsetScore,
    pub complex: SubsetScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_seconds: Option<f64>,
}

impl EvalReport {
    pub fn subset(&self, c: Option<Complexity>) -> &SubsetScore {
        match c {
            None => &self.overall,
            Some(Complexity::Simple) => &self.simple,
            Some(Complexity::Complex) => &self.complex,
        }
    }
}

fn macro_average(per_sentence: &[Counts], total: Counts) -> SubsetScore {
    let active: Vec<Prf> = per_sentence
        .iter()
        .filter(|c| c.gold + c.predicted > 0)
        .map(Counts::prf)
        .collect();
    if active.is_empty() {
        return SubsetScore {
            counts: total,
            ..SubsetScore::default()
        };
    }
    let n = active.len() as f64;
    SubsetScore {
        counts: total,
        precision: active.iter().map(|p| p.precision).sum::<f64>() / n,
        recall: active.iter().map(|p| p.recall).sum::<f64>() / n,
        f1: active.iter().map(|p| p.f1).sum::<f64>() / n,
    }
}

/// Scores predictions against gold, sentence by sentence.
pub fn score_dataset(
    gold: &[AnnotatedSentence],
    pred: &[AnnotatedSentence],
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            predicted: pred.len(),
        });
    }
    let mut per: Vec<SplitCounts> = Vec::with_capacity(gold.len());
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.tokens.len() != p.tokens.len() || g.tokens.iter().zip(&p.tokens).any(|(a, b)| a.text != b.text) {
            return Err(EvalError::TokenMismatch { index: i });
        }
        per.push(sentence_counts(&g.tokens, &g.coordinations, &p.coordinations, options));
    }
    let mut total = SplitCounts::default();
    for c in &per {
        total.simple.add(c.simple);
        total.complex.add(c.complex);
    }
    let (overall, simple, complex) = match options.averaging {
        Averaging::Micro => (
            SubsetScore::micro(total.total()),
            SubsetScore::micro(total.simple),
            SubsetScore::micro(total.complex),
        ),
        Averaging::Macro => {
            let all: Vec<Counts> = per.iter().map(SplitCounts::total).collect();
            let s: Vec<Counts> = per.iter().map(|c| c.simple).collect();
            let x: Vec<Counts> = per.iter().map(|c| c.complex).collect();
            (
                macro_average(&all, total.total()),
                macro_average(&s, total.simple),
                macro_average(&x, total.complex),
            )
        }
    };
    Ok(EvalReport {
        averaging: options.averaging,
        sentences: gold.len(),
        overall,
        simple,
        complex,
        inference_seconds: None,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    } else {
        0.0
    };
    MeanStd { mean, std }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

/// Mean and sample standard deviation over repeated runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub overall: PrfSummary,
    pub simple: PrfSummary,
    pub complex: PrfSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_seconds: Option<MeanStd>,
}

pub fn summarize_runs(reports: &[EvalReport]) -> Result<RunSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let summary = |pick: fn(&EvalReport) -> &SubsetScore| {
        let col = |f: fn(&SubsetScore) -> f64| mean_std(&reports.iter().map(|r| f(pick(r))).collect::<Vec<_>>());
        PrfSummary {
            precision: col(|s| s.precision),
            recall: col(|s| s.recall),
            f1: col(|s| s.f1),
        }
    };
    let times: Option<Vec<f64>> = reports.iter().map(|r| r.inference_seconds).collect();
    Ok(RunSummary {
        runs: reports.len(),
        overall: summary(|r| &r.overall),
        simple: summary(|r| &r.simple),
        complex: summary(|r| &r.complex),
        inference_seconds: times.map(|t| mean_std(&t)),
    })
}

/// Aligned text table with P, R, F1 and Time columns.
pub fn render_table(report: &EvalReport, subset: Option<Complexity>) -> String {
    let mut s = format!("{:<10}{:>8}{:>8}{:>8}{:>10}\n", "", "P", "R", "F1", "Time");
    let time = match report.inference_seconds {
        Some(t) => format!("{t:.3}"),
        None => String::from("-"),
    };
    let rows: Vec<(&str, &SubsetScore)> = match subset {
        None => alloc::vec![
            ("Overall", &report.overall),
            ("Simple", &report.simple),
            ("Complex", &report.complex),
        ],
        Some(Complexity::Simple) => alloc::vec![("Simple", &report.simple)],
        Some(Complexity::Complex) => alloc::vec![("Complex", &report.complex)],
    };
    for (i, (name, r)) in rows.into_iter().enumerate() {
        let t = if i == 0 { time.as_str() } else { "" };
        s.push_str(&format!(
            "{:<10}{:>8.1}{:>8.1}{:>8.1}{:>10}\n",
            name, r.precision, r.recall, r.f1, t
        ));
    }
    s
}

/// Same layout for a multi-run summary, `mean±std`.
pub fn render_summary(summary: &RunSummary) -> String {
    let mut s = format!("{:<10}{:>14}{:>14}{:>14}{:>16}\n", "", "P", "R", "F1", "Time");
    let cell = |m: MeanStd| format!("{:.1}±{:.1}", m.mean, m.std);
    for (i, (name, r)) in [
        ("Overall", &summary.overall),
        ("Simple", &summary.simple),
        ("Complex", &summary.complex),
    ]
    .into_iter()
    .enumerate()
    {
        let t = match (i, summary.inference_seconds) {
            (0, Some(t)) => format!("{:.3}±{:.3}", t.mean, t.std),
            (0, None) => String::from("-"),
            _ => String::new(),
        };
        s.push_str(&format!(
            "{:<10}{:>14}{:>14}{:>14}{:>16}\n",
            name,
            cell(r.precision),
            cell(r.recall),
            cell(r.f1),
            t
        ));
    }
    s
}
