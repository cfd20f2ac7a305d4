//! Fixture loading and checks shared by the integration tests and the
//! acceptance target.

#![allow(dead_code)]

pub mod e2e;
pub mod learning;
pub mod metrics;

use std::path::PathBuf;

use conjunct::workflow::labelgen;
use conjunct_core::lexicon::PairedLexicon;
use conjunct_core::pipeline::AnnotatedSentence;
use conjunct_core::schema::{CoordinatorKind, TokenSpan};
use conjunct_core::splitter::split_sentence;
use conjunct_core::treebank::{augment, AugmentOutcome, TrainingInstance};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectedInstance {
    pub kind: CoordinatorKind,
    pub target: TokenSpan,
    pub partner: Option<TokenSpan>,
    pub conjuncts: Vec<TokenSpan>,
}

#[derive(Clone, Debug)]
pub struct ExpectedTree {
    pub text: String,
    pub instances: Vec<ExpectedInstance>,
    pub split: usize,
}

fn span(s: &str) -> TokenSpan {
    let (a, b) = s.split_once(':').expect("span is start:end");
    TokenSpan::new(a.parse().unwrap(), b.parse().unwrap()).unwrap()
}

fn kind(s: &str) -> CoordinatorKind {
    match s {
        "contiguous" => CoordinatorKind::Contiguous,
        "paired_left" => CoordinatorKind::PairedLeft,
        "paired_right" => CoordinatorKind::PairedRight,
        "respectively" => CoordinatorKind::Respectively,
        other => panic!("unknown kind {other}"),
    }
}

pub fn expected_trees() -> Vec<ExpectedTree> {
    let text = std::fs::read_to_string(fixture_path("expected.txt")).unwrap();
    let mut out: Vec<ExpectedTree> = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(sentence) = line.strip_prefix("# ") {
            out.push(ExpectedTree {
                text: sentence.to_string(),
                instances: Vec::new(),
                split: 0,
            });
            continue;
        }
        let tree = out.last_mut().expect("block header first");
        if let Some(n) = line.strip_prefix("split ") {
            tree.split = n.parse().unwrap();
            continue;
        }
        let (left, right) = line.split_once(" : ").or_else(|| line.strip_suffix(" :").map(|l| (l, ""))).unwrap();
        let mut parts = left.split_whitespace();
        let k = kind(parts.next().unwrap());
        let target = span(parts.next().unwrap());
        let partner = parts.next().map(|p| span(p.trim_start_matches('~')));
        tree.instances.push(ExpectedInstance {
            kind: k,
            target,
            partner,
            conjuncts: right.split_whitespace().map(span).collect(),
        });
    }
    out
}

pub struct Fixture {
    pub sentences: Vec<AnnotatedSentence>,
    pub instances: Vec<TrainingInstance>,
    /// Instances grouped by tree.
    pub per_tree: Vec<Vec<TrainingInstance>>,
}

pub fn fixture() -> Fixture {
    let text = std::fs::read_to_string(fixture_path("trees.mrg")).unwrap();
    let out = labelgen(&text, "trees.mrg", None, &PairedLexicon::default()).unwrap();
    let per_tree = out
        .sentences
        .iter()
        .map(|s| conjunct_core::treebank::instances_from_annotation(s).unwrap())
        .collect();
    Fixture {
        sentences: out.sentences,
        instances: out.instances,
        per_tree,
    }
}

fn observed(inst: &TrainingInstance) -> ExpectedInstance {
    ExpectedInstance {
        kind: inst.target.kind,
        target: inst.target.span,
        partner: inst.target.partner,
        conjuncts: inst.coordination().unwrap().conjuncts,
    }
}

/// Mismatches between the converted fixture and the hand-written sets.
pub fn conversion_mismatches() -> Vec<String> {
    let fx = fixture();
    let expected = expected_trees();
    let mut problems = Vec::new();
    if fx.sentences.len() != expected.len() {
        problems.push(format!("{} trees converted, {} expected", fx.sentences.len(), expected.len()));
        return problems;
    }
    for (i, ((sentence, insts), exp)) in fx.sentences.iter().zip(&fx.per_tree).zip(&expected).enumerate() {
        let words: Vec<&str> = sentence.tokens.iter().map(|t| t.text.as_str()).collect();
        if words.join(" ") != exp.text {
            problems.push(format!("tree {}: text `{}`", i + 1, words.join(" ")));
        }
        let mut got: Vec<ExpectedInstance> = insts.iter().map(observed).collect();
        let mut want = exp.instances.clone();
        got.sort_by_key(|e| e.target);
        want.sort_by_key(|e| e.target);
        if got != want {
            problems.push(format!("tree {}: got {got:?}, expected {want:?}", i + 1));
        }
    }
    problems
}

/// Per-tree sub-sentence counts that differ from the expectation, and
/// coordination-free trees whose split is not the identity.
pub fn splitter_mismatches() -> Vec<String> {
    let fx = fixture();
    let expected = expected_trees();
    let mut problems = Vec::new();
    for (i, (s, exp)) in fx.sentences.iter().zip(&expected).enumerate() {
        let subs = match split_sentence(s) {
            Ok(v) => v,
            Err(e) => {
                problems.push(format!("tree {}: {e}", i + 1));
                continue;
            }
        };
        if subs.len() != exp.split {
            problems.push(format!("tree {}: {} sub-sentences, expected {}", i + 1, subs.len(), exp.split));
        }
        if s.coordinations.is_empty() {
            let once = subs.iter().map(|x| x.text()).collect::<Vec<_>>();
            if once != vec![exp.text.clone()] {
                problems.push(format!("tree {}: not the identity: {once:?}", i + 1));
            }
            let again = AnnotatedSentence::new(subs[0].tokens.clone());
            if split_sentence(&again).map(|v| v.iter().map(|x| x.text()).collect::<Vec<_>>()) != Ok(once) {
                problems.push(format!("tree {}: second split differs", i + 1));
            }
        }
    }
    problems
}

fn multiset(inst: &TrainingInstance) -> Vec<String> {
    let mut w: Vec<String> = inst.tokens.iter().map(|t| t.text.clone()).collect();
    w.sort();
    w
}

/// `None` when augmenting twice returns the instance and the token
/// multiset is kept; otherwise a description of the failure.
pub fn augmentation_failure(inst: &TrainingInstance) -> Option<String> {
    let (once, outcome) = match augment(inst) {
        Ok(v) => v,
        Err(e) => return Some(format!("augment: {e}")),
    };
    if multiset(&once) != multiset(inst) {
        return Some("token multiset changed".into());
    }
    let (twice, _) = match augment(&once) {
        Ok(v) => v,
        Err(e) => return Some(format!("second augment: {e}")),
    };
    if &twice != inst {
        return Some(format!("not an involution ({outcome:?})"));
    }
    if outcome != AugmentOutcome::Swapped && &once != inst {
        return Some("unswapped instance changed".into());
    }
    None
}
