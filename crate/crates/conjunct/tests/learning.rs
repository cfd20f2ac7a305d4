mod support;

use support::learning::*;

#[test]
fn synthetic_corpus_is_learned() {
    let out = learning_sanity(13);
    assert!(out.passes(), "{out:?}");
}

#[test]
fn passes_on_other_corpora() {
    for seed in [0, 1, 2] {
        let out = learning_sanity(seed);
        assert!(out.passes(), "seed {seed}: {out:?}");
    }
}

