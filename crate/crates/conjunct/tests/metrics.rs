mod support;

use support::metrics::*;

#[test]
fn hand_computed_scores() {
    assert_eq!(metric_cases().len(), 10);
    let problems = metric_mismatches();
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}
