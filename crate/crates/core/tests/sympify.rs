use pathlattice::data::{Column, Dataset, Sample, Value};
use pathlattice::fit::{fit_graph, FitConfig};
use pathlattice::graph::{GraphBuilder, InteractionKind, SemanticType, Task};
use pathlattice::lattice::{GraphSpec, LatticeConfig, LatticeState};
use pathlattice::sympify::{eval_expression, render, to_expression, Expression, Format};
use pathlattice::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num = |rng: &mut ChaCha8Rng| (0..n).map(|_| Some(rng.random_range(-2.0..3.0))).collect::<Vec<_>>();
    let a = num(&mut rng);
    let b = num(&mut rng);
    let c: Vec<Option<String>> = (0..n).map(|_| Some(["x", "y", "z"][rng.random_range(0..3)].to_string())).collect();
    let t: Vec<Option<f64>> = (0..n).map(|i| Some(f64::from(u8::from(a[i].unwrap() * b[i].unwrap() > 0.5)))).collect();
    Dataset::new(vec![
        ("a".into(), Column::Numerical(a)),
        ("b".into(), Column::Numerical(b)),
        ("c".into(), Column::Categorical(c)),
        ("t".into(), Column::Numerical(t)),
    ])
    .unwrap()
}

fn random_sample(rng: &mut ChaCha8Rng) -> Sample {
    let mut s = Sample::new();
    // a wider range than training exercises the register clip
    s.insert("a".into(), Value::Num(rng.random_range(-6.0..8.0)));
    s.insert("b".into(), Value::Num(rng.random_range(-6.0..8.0)));
    s.insert("c".into(), Value::Cat(["x", "y", "z", "unseen"][rng.random_range(0..4)].into()));
    s
}

#[test]
fn expressions_reproduce_the_forward_pass() {
    let data = dataset(150, 1);
    let mut lattice = LatticeState::new(LatticeConfig { seed: 12, ..LatticeConfig::default() }).unwrap();
    let spec = GraphSpec {
        inputs: vec![
            ("a".into(), SemanticType::Numerical),
            ("b".into(), SemanticType::Numerical),
            ("c".into(), SemanticType::Categorical),
        ],
        output: "t".into(),
        task: Task::Classifier,
        max_depth: 3,
        allowed_kinds: InteractionKind::ALL.into_iter().collect(),
    };
    lattice.register_features(&spec.inputs, "t").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 20 {
        let g = lattice.sample_graph(&spec, &[]).unwrap();
        let g = fit_graph(&g, &data, &FitConfig::default()).unwrap();
        if g.unusable {
            continue;
        }
        let e = to_expression(&g).unwrap();
        for _ in 0..100 {
            let s = random_sample(&mut rng);
            match (g.eval(&s), eval_expression(&e, &s)) {
                (Ok(a), Ok(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b} for {}", g.canonical_form()),
                (Err(_), Err(_)) => {}
                other => panic!("disagreement {other:?}"),
            }
        }
        checked += 1;
    }
}

#[test]
fn linear_classifier_renders_as_logistic_of_a_sum() {
    let data = dataset(200, 3);
    let mut b = GraphBuilder::new(Task::Classifier);
    let x = b.input("a", SemanticType::Numerical);
    let y = b.input("b", SemanticType::Numerical);
    let s = b.interaction(InteractionKind::Add, &[x, y]);
    let g = fit_graph(&b.output("t", s), &data, &FitConfig::default()).unwrap();
    let text = render(&to_expression(&g).unwrap(), 3, Format::Text);
    assert!(text.starts_with("logistic("), "{text}");
    assert!(text.contains("*a") && text.contains("*b"), "{text}");
    assert_eq!(text.matches('(').count(), 1, "{text}");
    let latex = render(&to_expression(&g).unwrap(), 3, Format::Latex);
    assert!(latex.contains("\\operatorname{logistic}"), "{latex}");
}

#[test]
fn product_graph_renders_as_a_product() {
    let mut b = GraphBuilder::new(Task::Regressor);
    let x0 = b.input("x0", SemanticType::Numerical);
    let x1 = b.input("x1", SemanticType::Numerical);
    let m = b.interaction(InteractionKind::Multiply, &[x0, x1]);
    let mut g = b.output("y", m);
    use pathlattice::graph::Params;
    g.nodes[0].params = Params::Scaling { min: -1.0, max: 1.0, w: 1.0, b: 0.0 };
    g.nodes[1].params = Params::Scaling { min: -1.0, max: 1.0, w: 1.0, b: 0.0 };
    g.nodes[3].params = Params::Affine { w: 1.0, b: 0.0 };
    g.train_loss = Some(0.0);
    let e = to_expression(&g).unwrap();
    assert_eq!(render(&e, 3, Format::Text), "x0*x1");
}

#[test]
fn unfitted_graph_is_refused() {
    let mut b = GraphBuilder::new(Task::Regressor);
    let x = b.input("x", SemanticType::Numerical);
    let g = b.output("y", x);
    assert!(matches!(to_expression(&g), Err(Error::Precondition(_))));
}

#[test]
fn expression_json_is_tagged() {
    let data = dataset(50, 4);
    let mut b = GraphBuilder::new(Task::Classifier);
    let c = b.input("c", SemanticType::Categorical);
    let g = fit_graph(&b.output("t", c), &data, &FitConfig::default()).unwrap();
    let e = to_expression(&g).unwrap();
    let v = serde_json::to_value(&e).unwrap();
    assert_eq!(v["op"], "logistic");
    assert_eq!(v["arg"]["arg"]["op"], "lookup");
    let back: Expression = serde_json::from_value(v).unwrap();
    assert_eq!(back, e);
    let text = render(&e, 3, Format::Text);
    assert!(text.contains("cat_c(c)") && text.contains("\ncat_c = {x: "), "{text}");
}
