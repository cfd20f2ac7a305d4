mod support;

use conjunct::formats::{read_instances, write_instances, InstanceFormat};
use conjunct_core::treebank::Complexity;
use support::*;

#[test]
fn conversion_matches_hand_written_instances() {
    let problems = conversion_mismatches();
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

#[test]
fn instance_counts_per_kind() {
    let fx = fixture();
    let expected = expected_trees();
    // paired → 2, respectively (two inner coordinators) → 3, contiguous → 1
    let counts: Vec<usize> = fx.per_tree.iter().map(Vec::len).collect();
    assert_eq!(counts[0], 1);
    assert_eq!(counts[1], 2);
    assert_eq!(counts[2], 3);
    assert_eq!(counts, expected.iter().map(|e| e.instances.len()).collect::<Vec<_>>());
    assert_eq!(fx.instances.len(), counts.iter().sum::<usize>());
}

#[test]
fn splitter_counts_and_identity() {
    let problems = splitter_mismatches();
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

#[test]
fn augmentation_on_fixture() {
    for inst in fixture().instances {
        assert_eq!(augmentation_failure(&inst), None, "{:?}", inst.tokens);
    }
}

#[test]
fn complexity_partition_is_exhaustive() {
    let fx = fixture();
    let simple = fx.instances.iter().filter(|i| i.complexity() == Complexity::Simple).count();
    let complex = fx.instances.iter().filter(|i| i.complexity() == Complexity::Complex).count();
    assert_eq!(simple + complex, fx.instances.len());
    // "as well as", "rather than", the paired and respectively targets
    assert_eq!(complex, 2 + 2 * 6 + 4);
}

#[test]
fn conll_and_jsonl_agree() {
    let fx = fixture();
    for format in [InstanceFormat::Jsonl, InstanceFormat::Conll] {
        let mut buf = Vec::new();
        write_instances(&mut buf, &fx.instances, format).unwrap();
        let back = read_instances(buf.as_slice(), format).unwrap();
        assert_eq!(back, fx.instances, "{format:?}");
    }
}
