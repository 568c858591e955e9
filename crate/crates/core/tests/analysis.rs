use std::collections::BTreeMap;

use pathlattice::analysis::{
    fixed_defaults, partial2d, probability_scores, roc_auc, segmented_loss, PlotData, PlotPayload,
};
use pathlattice::data::{Column, Dataset, Value};
use pathlattice::fit::{fit_graph, pointwise_loss, predict, FitConfig};
use pathlattice::graph::{GraphBuilder, InteractionKind, SemanticType, Task};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// P(s⁺ > s⁻) + ½·P(s⁺ = s⁻) by enumerating every positive/negative pair.
fn pairwise_auc(y: &[f64], s: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1.0 && y[j] == 0.0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..200).prop_flat_map(|n| {
        (
            proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], n),
            // a small value set forces ties
            proptest::collection::vec(prop_oneof![(0u8..8).prop_map(|k| f64::from(k) / 8.0), 0.0..1.0f64], n),
        )
            .prop_filter("both classes", |(y, _)| y.contains(&0.0) && y.contains(&1.0))
    })
}

proptest! {
    #[test]
    fn trapezoid_equals_pairwise_count((y, s) in labelled_scores()) {
        let roc = roc_auc(&y, &s).unwrap();
        prop_assert!((roc.auc - pairwise_auc(&y, &s)).abs() < 1e-12);
        prop_assert_eq!(roc.fpr.len(), roc.tpr.len());
        prop_assert_eq!(roc.thresholds.len() + 1, roc.fpr.len());
        prop_assert_eq!((roc.fpr[0], roc.tpr[0]), (0.0, 0.0));
        prop_assert_eq!((*roc.fpr.last().unwrap(), *roc.tpr.last().unwrap()), (1.0, 1.0));
        prop_assert!(roc.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(roc.tpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(roc.thresholds.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps((y, s) in labelled_scores()) {
        let a = roc_auc(&y, &s).unwrap().auc;
        let mapped: Vec<f64> = s.iter().map(|x| (3.0 * x - 1.0).exp()).collect();
        prop_assert_eq!(a, roc_auc(&y, &mapped).unwrap().auc);
    }

    #[test]
    fn score_histograms_count_each_class((y, s) in labelled_scores(), bins in 1usize..40) {
        let h = probability_scores(&y, &s, bins).unwrap();
        let pos = y.iter().filter(|v| **v == 1.0).count() as u64;
        prop_assert_eq!(h.counts1.iter().sum::<u64>(), pos);
        prop_assert_eq!(h.counts0.iter().sum::<u64>(), y.len() as u64 - pos);
        prop_assert_eq!(h.edges.len(), bins + 1);
    }
}

#[test]
fn better_separation_means_less_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..2000).map(|i| f64::from(i % 2)).collect();
    let noise: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut last = (0.0, f64::INFINITY);
    for shift in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let s: Vec<f64> = y
            .iter()
            .zip(&noise)
            .map(|(c, e)| 1.0 / (1.0 + (-(e + shift * (2.0 * c - 1.0))).exp()))
            .collect();
        let auc = roc_auc(&y, &s).unwrap().auc;
        let overlap = probability_scores(&y, &s, 20).unwrap().overlap();
        assert!(auc > last.0 && overlap < last.1, "shift {shift}: auc {auc}, overlap {overlap}");
        last = (auc, overlap);
    }
}

fn two_feature_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(a, b)| f64::from(u8::from(a * 0.3 + b + rng.random_range(-0.5..0.5) > 1.5)))
        .collect();
    Dataset::from_numeric(vec![("a", a), ("b", b), ("y", y)]).unwrap()
}

fn fitted_classifier(data: &Dataset) -> pathlattice::Graph {
    let mut g = GraphBuilder::new(Task::Classifier);
    let a = g.input("a", SemanticType::Numerical);
    let b = g.input("b", SemanticType::Numerical);
    let s = g.interaction(InteractionKind::Add, &[a, b]);
    let graph = g.output("y", s);
    fit_graph(&graph, data, &FitConfig { epochs: 300, learning_rate: 0.05, ..FitConfig::default() }).unwrap()
}

#[test]
fn segmented_loss_matches_filter_and_average() {
    let data = two_feature_data(300, 1);
    let g = fitted_classifier(&data);
    let seg = segmented_loss(&g, &data, "a", 25).unwrap();
    assert_eq!(seg.counts.iter().sum::<u64>(), 300);
    let edges = seg.edges.clone().unwrap();
    assert_eq!(edges.len(), 26);
    let preds = predict(&g, &data).unwrap();
    let xs = data.numeric("a").unwrap();
    let ys = preds.targets.unwrap();
    for b in 0..25 {
        let (lo, hi) = (edges[b], edges[b + 1]);
        let members: Vec<usize> = (0..300)
            .filter(|&i| {
                let x = xs[i].unwrap();
                x >= lo && (x < hi || (b == 24 && x <= hi))
            })
            .collect();
        assert_eq!(members.len() as u64, seg.counts[b], "bin {b}");
        let expected = if members.is_empty() {
            None
        } else {
            Some(
                members
                    .iter()
                    .map(|&i| pointwise_loss(Task::Classifier, ys[i], preds.values[i]).unwrap())
                    .sum::<f64>()
                    / members.len() as f64,
            )
        };
        match (expected, seg.mean_loss[b]) {
            (None, None) => {}
            (Some(e), Some(m)) => assert!((e - m).abs() < 1e-12, "bin {b}: {e} vs {m}"),
            other => panic!("bin {b}: {other:?}"),
        }
    }
}

#[test]
fn segmented_loss_on_categories() {
    let data = Dataset::new(vec![
        ("c".into(), Column::Categorical(["u", "v", "u", "w"].iter().map(|s| Some(s.to_string())).collect())),
        ("y".into(), Column::Numerical(vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)])),
    ])
    .unwrap();
    let mut b = GraphBuilder::new(Task::Classifier);
    let c = b.input("c", SemanticType::Categorical);
    let g = fit_graph(&b.output("y", c), &data, &FitConfig::default()).unwrap();
    let seg = segmented_loss(&g, &data, "c", 25).unwrap();
    assert_eq!(seg.categories.as_deref(), Some(&["u".to_string(), "v".into(), "w".into()][..]));
    assert_eq!(seg.counts, vec![2, 1, 1]);
    assert!(seg.edges.is_none());
    assert!(segmented_loss(&g, &data, "nope", 5).is_err());
}

#[test]
fn partial2d_grid_and_scatter() {
    let data = two_feature_data(200, 2);
    let g = fitted_classifier(&data);
    let p = partial2d(&g, &data, "a", "b", 30, &BTreeMap::new()).unwrap();
    assert_eq!(p.grid.len(), 30);
    assert!(p.grid.iter().all(|r| r.len() == 30));
    assert!(p.grid.iter().flatten().all(|v| *v > 0.0 && *v < 1.0));
    assert_eq!(p.x_edges.len(), 31);
    assert_eq!(p.scatter.len(), 200);
    let a_max = data.numeric("a").unwrap().iter().flatten().fold(f64::MIN, |m, x| m.max(*x));
    assert!(*p.x_edges.last().unwrap() > a_max);
    assert!(p.scatter.iter().all(|s| s.label == 0.0 || s.label == 1.0));
    assert!(partial2d(&g, &data, "a", "a", 10, &BTreeMap::new()).is_err());
    assert!(partial2d(&g, &data, "a", "b", 1, &BTreeMap::new()).is_err());
}

#[test]
fn partial2d_needs_values_for_other_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = cols[0].iter().map(|v| v * 2.0).collect();
    let data = Dataset::from_numeric(vec![("p", cols[0].clone()), ("q", cols[1].clone()), ("r", cols[2].clone()), ("y", y)])
        .unwrap();
    let mut b = GraphBuilder::new(Task::Regressor);
    let (p, q, r) = (
        b.input("p", SemanticType::Numerical),
        b.input("q", SemanticType::Numerical),
        b.input("r", SemanticType::Numerical),
    );
    let m = b.interaction(InteractionKind::Multiply, &[p, q]);
    let s = b.interaction(InteractionKind::Add, &[m, r]);
    let g = fit_graph(&b.output("y", s), &data, &FitConfig::default()).unwrap();
    assert!(partial2d(&g, &data, "p", "q", 5, &BTreeMap::new()).is_err());
    let fixed = fixed_defaults(&g, &data, &["p", "q"]).unwrap();
    let mut sorted = cols[2].clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(fixed["r"], Value::Num((sorted[24] + sorted[25]) / 2.0));
    let plot = partial2d(&g, &data, "p", "q", 5, &fixed).unwrap();
    assert_eq!(plot.grid.iter().flatten().count(), 25);
}

#[test]
fn plot_data_meta() {
    let data = two_feature_data(100, 4);
    let g = fitted_classifier(&data);
    let p = predict(&g, &data).unwrap();
    let roc = roc_auc(&p.targets.unwrap(), &p.values).unwrap();
    let plot = PlotData::new(PlotPayload::Roc(roc), &g, "valid", vec!["a".into(), "b".into()]);
    let v = serde_json::to_value(&plot).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["kind"], "roc");
    assert!(v["payload"]["auc"].as_f64().unwrap() > 0.5);
    assert_eq!(v["meta"]["structure_hash"], g.structure_hash().0);
}
