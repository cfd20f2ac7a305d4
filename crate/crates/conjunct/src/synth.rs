//! Seeded generator of small bracketed treebanks covering every
//! coordinator kind: lists, pairs, paired coordinators, `respectively`,
//! verb phrase and clause coordination, nesting and coordination-free
//! sentences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &["Mary", "John", "Alice", "Bob", "Sam", "Jack", "Lena", "Omar", "Kim", "Ravi"];
const NOUNS: &[&str] = &[
    "apples", "pears", "grapes", "books", "tools", "maps", "songs", "coins", "shoes", "lamps", "kites", "plums",
];
const ANIMALS: &[&str] = &["dog", "cat", "horse", "bird", "goat", "fox", "owl", "cow"];
const ADJS: &[&str] = &["red", "green", "small", "old", "bright", "quiet", "heavy", "cheap"];
const VERBS_T: &[&str] = &["likes", "sells", "buys", "paints", "finds", "keeps"];
const VERBS_I: &[&str] = &["sang", "danced", "slept", "laughed", "waited", "left"];
const CCS: &[&str] = &["and", "or", "but"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty word list")
}

fn distinct<'a, R: Rng>(rng: &mut R, items: &[&'a str], n: usize) -> Vec<&'a str> {
    items.choose_multiple(rng, n).copied().collect()
}

fn np_noun<R: Rng>(rng: &mut R, noun: &str) -> String {
    if rng.gen_bool(0.4) {
        format!("(NP (JJ {}) (NNS {noun}))", pick(rng, ADJS))
    } else {
        format!("(NP (NNS {noun}))")
    }
}

fn list<R: Rng>(rng: &mut R, items: &[String], cc: &str) -> String {
    let mut parts = Vec::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 && i + 1 < items.len() {
            parts.push("(, ,)".to_string());
        }
        if i + 1 == items.len() {
            if items.len() > 2 && rng.gen_bool(0.5) {
                parts.push("(, ,)".to_string());
            }
            parts.push(format!("(CC {cc})"));
        }
        parts.push(item.clone());
    }
    format!("(NP {})", parts.join(" "))
}

fn object_list<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(2..=4);
    let nouns = distinct(rng, NOUNS, n);
    let items: Vec<String> = nouns.iter().map(|w| np_noun(rng, w)).collect();
    let cc = if rng.gen_bool(0.8) { "and" } else { "or" };
    format!(
        "(S (NP (NNP {})) (VP (VBZ {}) {}) (. .))",
        pick(rng, NAMES),
        pick(rng, VERBS_T),
        list(rng, &items, cc)
    )
}

fn subject_pair<R: Rng>(rng: &mut R) -> String {
    let a = distinct(rng, ANIMALS, 2);
    format!(
        "(S (NP (NP (DT the) (NN {})) (CC {}) (NP (DT the) (NN {}))) (VP (VBD {})) (. .))",
        a[0],
        pick(rng, &CCS[..2]),
        a[1],
        pick(rng, VERBS_I)
    )
}

fn paired<R: Rng>(rng: &mut R) -> String {
    let (left, right) = *[("either", "or"), ("both", "and"), ("neither", "nor")].choose(rng).unwrap();
    let n = distinct(rng, NOUNS, 2);
    let adjs = distinct(rng, ADJS, 2);
    format!(
        "(S (NP (NNP {})) (VP (VBZ {}) (NP (CC {left}) (NP (JJ {}) (NNS {})) (CC {right}) (NP (JJ {}) (NNS {})))) (. .))",
        pick(rng, NAMES),
        pick(rng, VERBS_T),
        adjs[0],
        n[0],
        adjs[1],
        n[1]
    )
}

fn respectively<R: Rng>(rng: &mut R) -> String {
    let a = distinct(rng, ANIMALS, 2);
    let names = distinct(rng, NAMES, 2);
    format!(
        "(S (NP (NP (DT The) (NN {})) (CC and) (NP (DT the) (NN {}))) (VP (VBD were) (VP (VBN named) (S (NP (NP (NNP {})) (CC and) (NP (NNP {}))) (ADVP (RB respectively))))) (. .))",
        a[0], a[1], names[0], names[1]
    )
}

fn verb_phrases<R: Rng>(rng: &mut R) -> String {
    let v = distinct(rng, VERBS_I, 2);
    format!(
        "(S (NP (NNP {})) (VP (VP (VBD {})) (CC {}) (VP (VBD {}))) (. .))",
        pick(rng, NAMES),
        v[0],
        pick(rng, &CCS[..2]),
        v[1]
    )
}

fn clauses<R: Rng>(rng: &mut R) -> String {
    let names = distinct(rng, NAMES, 2);
    let v = distinct(rng, VERBS_I, 2);
    format!(
        "(S (S (NP (NNP {})) (VP (VBD {}))) (, ,) (CC but) (S (NP (NNP {})) (VP (VBD {}))) (. .))",
        names[0], v[0], names[1], v[1]
    )
}

fn nested<R: Rng>(rng: &mut R) -> String {
    let n = distinct(rng, NOUNS, 3);
    format!(
        "(S (NP (NNP {})) (VP (VBZ {}) (NP (NP (NP (NNS {})) (CC and) (NP (NNS {}))) (CC or) (NP (NNS {})))) (. .))",
        pick(rng, NAMES),
        pick(rng, VERBS_T),
        n[0],
        n[1],
        n[2]
    )
}

fn adjectives<R: Rng>(rng: &mut R) -> String {
    let a = distinct(rng, ADJS, 2);
    format!(
        "(S (NP (DT the) (NNS {})) (VP (VBD were) (ADJP (JJ {}) (CC and) (JJ {}))) (. .))",
        pick(rng, NOUNS),
        a[0],
        a[1]
    )
}

fn plain<R: Rng>(rng: &mut R) -> String {
    format!(
        "(S (NP (NNP {})) (VP (VBZ {}) (NP (NNS {}))) (. .))",
        pick(rng, NAMES),
        pick(rng, VERBS_T),
        pick(rng, NOUNS)
    )
}

/// `count` trees, one per line, fully determined by `seed`. The first ten
/// cycle through every template so that even small corpora cover them all.
pub fn synthetic_treebank(count: usize, seed: u64) -> Vec<String> {
    type Template = fn(&mut ChaCha8Rng) -> String;
    const TEMPLATES: [Template; 10] = [
        object_list,
        subject_pair,
        paired,
        respectively,
        verb_phrases,
        clauses,
        nested,
        adjectives,
        plain,
        object_list,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = if i < TEMPLATES.len() {
                TEMPLATES[i]
            } else {
                TEMPLATES[rng.gen_range(0..TEMPLATES.len())]
            };
            t(&mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use conjunct_core::lexicon::PairedLexicon;
    use conjunct_core::treebank::{convert_tree, parse_bracketed};

    #[test]
    fn trees_parse_and_convert_cleanly() {
        for t in synthetic_treebank(60, 7) {
            let tree = parse_bracketed(&t).unwrap_or_else(|e| panic!("{t}: {e}"));
            let conv = convert_tree(&tree, &PairedLexicon::default());
            assert!(conv.warnings.is_empty(), "{t}: {:?}", conv.warnings);
            conv.sentence.check().unwrap();
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synthetic_treebank(20, 1), synthetic_treebank(20, 1));
        assert_ne!(synthetic_treebank(20, 1), synthetic_treebank(20, 2));
    }
}
