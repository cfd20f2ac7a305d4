//! Rewrites a sentence with coordinations into simple sub-sentences, one
//! per choice of conjunct.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{find_conflicts, AnnotatedSentence};
use crate::schema::{Coordination, CoordinatorKind, Token, TokenSpan};

pub const DEFAULT_MAX_COMBINATIONS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("coordinations at {first} and {second} cross")]
    Conflict { first: TokenSpan, second: TokenSpan },
    #[error("span {span} outside a sentence of {len} tokens")]
    OutOfRange { span: TokenSpan, len: usize },
    #[error("respectively link at {0} refers to a missing coordination")]
    BrokenLink(TokenSpan),
    #[error("{count} combinations exceed the limit of {limit}")]
    TooManyCombinations { count: usize, limit: usize },
}

/// Which conjunct was kept for one coordination (for a `respectively`
/// unit, the index into both aligned groups).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Substitution {
    pub coordination_index: usize,
    pub conjunct_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSentence {
    #[serde(with = "crate::schema::serde_tokens")]
    pub tokens: Vec<Token>,
    pub substitutions: Vec<Substitution>,
}

impl SubSentence {
    pub fn text(&self) -> String {
        let words: Vec<&str> = self.tokens.iter().map(|t| t.text.as_str()).collect();
        words.join(" ")
    }
}

struct Unit {
    index: usize,
    /// Region removed for each choice, except what `keep` lists.
    regions: Vec<TokenSpan>,
    /// `keep[j]`: spans retained when choice `j` is taken.
    keep: Vec<Vec<TokenSpan>>,
    extra: Vec<usize>,
}

fn removal_region(c: &Coordination) -> TokenSpan {
    let mut r = c.region();
    if c.target.kind == CoordinatorKind::PairedRight {
        if let Some(p) = c.target.partner {
            r.start = r.start.min(p.start);
            r.end = r.end.max(p.end);
        }
    }
    r
}

fn build_units(sentence: &AnnotatedSentence) -> Result<Vec<Unit>, SplitError> {
    let n = sentence.tokens.len();
    let coords = &sentence.coordinations;
    for c in coords {
        let r = removal_region(c);
        if r.end > n || c.conjuncts.iter().any(|k| k.end > n) {
            return Err(SplitError::OutOfRange { span: r, len: n });
        }
    }
    if let Some(c) = find_conflicts(coords).first() {
        return Err(SplitError::Conflict {
            first: c.first,
            second: c.second,
        });
    }

    let mut linked = BTreeSet::new();
    let mut units = Vec::new();
    for link in &sentence.respectively {
        let find = |span: TokenSpan| {
            coords
                .iter()
                .position(|c| c.target.span == span)
                .ok_or(SplitError::BrokenLink(link.target))
        };
        let (i, j) = (find(link.first)?, find(link.second)?);
        if link.target.end > n {
            return Err(SplitError::OutOfRange { span: link.target, len: n });
        }
        let (a, b) = (&coords[i], &coords[j]);
        let mut extra = vec![link.target.start];
        if link.target.start > 0 && sentence.tokens[link.target.start - 1].text == "," {
            extra.push(link.target.start - 1);
        }
        let pairs = a.conjuncts.len().min(b.conjuncts.len());
        units.push(Unit {
            index: i.min(j),
            regions: vec![removal_region(a), removal_region(b)],
            keep: (0..pairs).map(|k| vec![a.conjuncts[k], b.conjuncts[k]]).collect(),
            extra,
        });
        linked.insert(i);
        linked.insert(j);
    }
    for (i, c) in coords.iter().enumerate() {
        if linked.contains(&i) || c.conjuncts.is_empty() {
            continue;
        }
        units.push(Unit {
            index: i,
            regions: vec![removal_region(c)],
            keep: c.conjuncts.iter().map(|k| vec![*k]).collect(),
            extra: Vec::new(),
        });
    }
    units.sort_by_key(|u| u.index);
    Ok(units)
}

/// Splits with the default combination limit.
pub fn split_sentence(sentence: &AnnotatedSentence) -> Result<Vec<SubSentence>, SplitError> {
    split_sentence_with_limit(sentence, DEFAULT_MAX_COMBINATIONS)
}

/// Every combination of one conjunct per coordination, in lexicographic
/// order of the choices, with duplicate texts removed. A `respectively`
/// link counts as a single coordination whose i-th choice keeps the i-th
/// conjunct of both aligned groups.
pub fn split_sentence_with_limit(sentence: &AnnotatedSentence, limit: usize) -> Result<Vec<SubSentence>, SplitError> {
    let units = build_units(sentence)?;
    let count = units
        .iter()
        .try_fold(1usize, |acc, u| acc.checked_mul(u.keep.len()))
        .unwrap_or(usize::MAX);
    if count > limit {
        return Err(SplitError::TooManyCombinations { count, limit });
    }

    let n = sentence.tokens.len();
    let mut out: Vec<SubSentence> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut choice = vec![0usize; units.len()];
    loop {
        let mut removed = vec![false; n];
        for (u, &j) in units.iter().zip(&choice) {
            for r in &u.regions {
                for (i, gone) in removed.iter_mut().enumerate().take(r.end).skip(r.start) {
                    if !u.keep[j].iter().any(|k| k.contains(i)) {
                        *gone = true;
                    }
                }
            }
            for &i in &u.extra {
                removed[i] = true;
            }
        }
        let words: Vec<&str> = (0..n)
            .filter(|&i| !removed[i])
            .map(|i| sentence.tokens[i].text.as_str())
            .collect();
        let text = words.join(" ");
        if seen.insert(text) {
            let substitutions = units
                .iter()
                .zip(&choice)
                .filter(|(u, &j)| u.keep[j].iter().any(|k| (k.start..k.end).any(|i| !removed[i])))
                .map(|(u, &j)| Substitution {
                    coordination_index: u.index,
                    conjunct_index: j,
                })
                .collect();
            out.push(SubSentence {
                tokens: crate::schema::tokens_from_words(&words),
                substitutions,
            });
        }

        let mut k = units.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < units[k].keep.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::PairedLexicon;
    use crate::treebank::{convert_tree, parse_bracketed};

    fn split_texts(tree: &str) -> Vec<String> {
        let conv = convert_tree(&parse_bracketed(tree).unwrap(), &PairedLexicon::default());
        split_sentence(&conv.sentence).unwrap().iter().map(SubSentence::text).collect()
    }

    #[test]
    fn list_splits_into_three() {
        let t = "(S (NP (PRP$ My) (NN sister)) (VP (VBZ likes) (NP (NP (NNS apples)) (, ,) (NP (NNS pears)) (, ,) (CC and) (NP (NNS grapes)))) (. .))";
        assert_eq!(
            split_texts(t),
            vec!["My sister likes apples .", "My sister likes pears .", "My sister likes grapes ."]
        );
    }

    #[test]
    fn paired_removes_left_half() {
        let t = "(S (NP (PRP She)) (VP (MD can) (VP (VB have) (NP (CC either) (NP (JJ green) (NN tea)) (CC or) (NP (JJ hot) (NN chocolate))))) (. .))";
        assert_eq!(
            split_texts(t),
            vec!["She can have green tea .", "She can have hot chocolate ."]
        );
    }

    #[test]
    fn respectively_is_pairwise() {
        let t = "(S (NP (NP (DT The) (NN dog)) (CC and) (NP (DT the) (NN cat))) (VP (VBD were) (VP (VBN named) (S (NP (NP (NNP Jack)) (CC and) (NP (NNP Sam))) (ADVP (RB respectively))))) (. .))";
        assert_eq!(
            split_texts(t),
            vec!["The dog were named Jack .", "the cat were named Sam ."]
        );
    }

    #[test]
    fn no_coordination_is_identity() {
        let t = "(S (NP (NNS cats)) (VP (VBP sleep)) (. .))";
        assert_eq!(split_texts(t), vec!["cats sleep ."]);
    }

    #[test]
    fn too_many_combinations() {
        let t = "(S (NP (NP (NNS apples)) (CC and) (NP (NNS pears))) (VP (VBP grow)) (. .))";
        let conv = convert_tree(&parse_bracketed(t).unwrap(), &PairedLexicon::default());
        assert_eq!(
            split_sentence_with_limit(&conv.sentence, 1),
            Err(SplitError::TooManyCombinations { count: 2, limit: 1 })
        );
    }
}
