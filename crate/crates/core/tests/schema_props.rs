mod common;

use common::*;
use conjunct_core::schema::{
    decode_labels, encode_labels, validate_labels, CoordinatorKind, CoordinatorSpan, DetectorLabel, LabelWarning,
    TokenSpan,
};
use conjunct_core::treebank::{augment, AugmentOutcome, TrainingInstance};
use conjunct_core::schema::tokens_from_words;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn label() -> impl Strategy<Value = DetectorLabel> {
    (0usize..6).prop_map(|i| DetectorLabel::ALL[i])
}

proptest! {
    #[test]
    fn round_trip(seed in any::<u64>(), n in 3usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_coordination(&mut rng, n);
        c.check(n).unwrap();
        let labels = encode_labels(n, &c).unwrap();
        prop_assert_eq!(decode_labels(&labels, &c.target).unwrap(), c);
    }

    #[test]
    fn validator_agrees_with_regex(labels in prop::collection::vec(label(), 1..12), s in 0usize..12, w in 1usize..3) {
        let oracle = GrammarOracle::default();
        let target = TokenSpan::new(s, s + w).unwrap();
        let verdict = validate_labels(&labels, &CoordinatorSpan::contiguous(target));
        prop_assert_eq!(verdict.is_valid(), oracle.accepts(&labels, target));
        if verdict.is_valid() {
            let warned = verdict.warnings.contains(&LabelWarning::NoConjunctAfter);
            prop_assert_eq!(warned, !oracle.has_after(&labels));
        }
    }

    #[test]
    fn mutated_valid_sequences(seed in any::<u64>(), n in 3usize..=15, pos in 0usize..15, l in label()) {
        let oracle = GrammarOracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_coordination(&mut rng, n);
        let mut labels = encode_labels(n, &c).unwrap();
        labels[pos % n] = l;
        let verdict = validate_labels(&labels, &c.target);
        prop_assert_eq!(verdict.is_valid(), oracle.accepts(&labels, c.target.span));
        if c.target.kind == CoordinatorKind::Respectively && verdict.is_valid() {
            prop_assert!(verdict.warnings.is_empty());
        }
    }

    #[test]
    fn augmentation_is_an_involution(seed in any::<u64>(), n in 3usize..=25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_coordination(&mut rng, n);
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let mut coords = vec![c.target];
        coords.extend(c.target.partner.map(|p| CoordinatorSpan::paired(p, c.target.span).0));
        coords.sort_by_key(|c| c.span);
        let inst = TrainingInstance::new(tokens_from_words(&words), coords, &c).unwrap();
        let (once, outcome) = augment(&inst).unwrap();
        let (twice, _) = augment(&once).unwrap();
        prop_assert_eq!(&twice, &inst);
        let mut a: Vec<_> = inst.tokens.iter().map(|t| t.text.clone()).collect();
        let mut b: Vec<_> = once.tokens.iter().map(|t| t.text.clone()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        if c.conjuncts.len() >= 2 && outcome == AugmentOutcome::Swapped {
            once.check().unwrap();
        }
    }
}
