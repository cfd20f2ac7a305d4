use conjunct_core::evaluation::{span_prf, Prf};
use conjunct_core::schema::{Coordination, CoordinatorSpan, TokenSpan};

/// Absolute tolerance on percentages.
pub const METRIC_TOLERANCE: f64 = 1e-9;

fn c(target: usize, conj: &[(usize, usize)]) -> Coordination {
    Coordination::new(
        CoordinatorSpan::contiguous(TokenSpan::unit(target)),
        conj.iter().map(|&(s, e)| TokenSpan::new(s, e).unwrap()).collect(),
    )
}

pub struct MetricCase {
    pub name: &'static str,
    pub gold: Vec<Coordination>,
    pub pred: Vec<Coordination>,
    pub expected: (f64, f64, f64),
}

/// Constructed pairs with precision, recall and F1 worked out by hand.
pub fn metric_cases() -> Vec<MetricCase> {
    vec![
        MetricCase {
            name: "off by one on the last conjunct",
            gold: vec![c(6, &[(0, 1), (2, 3), (4, 5), (7, 8)])],
            pred: vec![c(6, &[(0, 1), (2, 3), (4, 5), (7, 9)])],
            expected: (75.0, 75.0, 75.0),
        },
        MetricCase {
            name: "no predictions",
            gold: vec![c(1, &[(0, 1), (2, 3)])],
            pred: vec![],
            expected: (0.0, 0.0, 0.0),
        },
        MetricCase {
            name: "exact match",
            gold: vec![c(3, &[(0, 1), (2, 3), (4, 6)])],
            pred: vec![c(3, &[(0, 1), (2, 3), (4, 6)])],
            expected: (100.0, 100.0, 100.0),
        },
        MetricCase {
            name: "spurious coordination",
            gold: vec![c(1, &[(0, 1), (2, 3)])],
            pred: vec![c(1, &[(0, 1), (2, 3)]), c(5, &[(4, 5), (6, 7)])],
            expected: (50.0, 100.0, 200.0 / 3.0),
        },
        MetricCase {
            name: "right conjuncts under the wrong target",
            gold: vec![c(1, &[(0, 1), (2, 3)])],
            pred: vec![c(3, &[(0, 1), (2, 3)])],
            expected: (0.0, 0.0, 0.0),
        },
        MetricCase {
            name: "one conjunct missing",
            gold: vec![c(4, &[(0, 1), (2, 3), (5, 6)])],
            pred: vec![c(4, &[(0, 1), (5, 6)])],
            expected: (100.0, 200.0 / 3.0, 80.0),
        },
        MetricCase {
            name: "two coordinations, one partly wrong",
            gold: vec![c(1, &[(0, 1), (2, 3)]), c(7, &[(4, 5), (6, 7), (8, 9)])],
            pred: vec![c(1, &[(0, 1), (2, 3)]), c(7, &[(3, 5), (5, 7), (8, 9)])],
            expected: (60.0, 60.0, 60.0),
        },
        MetricCase {
            name: "predictions without gold",
            gold: vec![],
            pred: vec![c(1, &[(0, 1), (2, 3)])],
            expected: (0.0, 0.0, 0.0),
        },
        MetricCase {
            name: "both empty",
            gold: vec![],
            pred: vec![],
            expected: (0.0, 0.0, 0.0),
        },
        MetricCase {
            name: "one extra conjunct",
            gold: vec![c(2, &[(0, 2), (3, 4)])],
            pred: vec![c(2, &[(0, 1), (0, 2), (3, 4)])],
            expected: (200.0 / 3.0, 100.0, 80.0),
        },
    ]
}

/// Cases whose computed scores differ from the hand values.
pub fn metric_mismatches() -> Vec<String> {
    metric_cases()
        .into_iter()
        .filter_map(|case| {
            let (_, Prf { precision, recall, f1 }) = span_prf(&case.gold, &case.pred);
            let (p, r, f) = case.expected;
            let close = |a: f64, b: f64| (a - b).abs() <= METRIC_TOLERANCE;
            (!(close(precision, p) && close(recall, r) && close(f1, f)))
                .then(|| format!("{}: got ({precision}, {recall}, {f1}), expected ({p}, {r}, {f})", case.name))
        })
        .collect()
}
