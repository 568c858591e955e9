use pathlattice::graph::{eval_interaction, InteractionKind, SINGULARITY_EPSILON};
use proptest::prelude::*;

/// The interaction table written out independently of the library.
fn reference(kind: InteractionKind, x: &[f64], p: &[f64]) -> f64 {
    use std::f64::consts::E;
    match kind {
        InteractionKind::Add => x[0] + x[1],
        InteractionKind::Multiply => x[0] * x[1],
        InteractionKind::Squared => x[0].powi(2),
        InteractionKind::Linear => p[0] * x[0] + p[1],
        InteractionKind::Tanh => (E.powf(2.0 * x[0]) - 1.0) / (E.powf(2.0 * x[0]) + 1.0),
        InteractionKind::Gaussian1 => E.powf(-x[0].powi(2)),
        InteractionKind::Gaussian2 => E.powf(-(x[0].powi(2) + x[1].powi(2))),
        InteractionKind::Exp => E.powf(x[0]),
        InteractionKind::Log => x[0].ln(),
        InteractionKind::Inverse => x[0].powi(-1),
    }
}

fn safe_input(kind: InteractionKind) -> BoxedStrategy<f64> {
    match kind {
        InteractionKind::Log => (1e-6..50.0f64).boxed(),
        InteractionKind::Inverse => prop_oneof![-50.0..-1e-3f64, 1e-3..50.0f64].boxed(),
        InteractionKind::Tanh => (-15.0..15.0f64).boxed(),
        _ => (-5.0..5.0f64).boxed(),
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() / a.abs().max(b.abs()) < 1e-12 || (a - b).abs() < 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn table_conformance(k in 0usize..10, seed_a in any::<u64>(), w in -3.0..3.0f64, b in -3.0..3.0f64) {
        let kind = InteractionKind::ALL[k];
        let mut runner = proptest::test_runner::TestRunner::new_with_rng(
            Default::default(),
            proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &{
                let mut s = [0u8; 32];
                s[..8].copy_from_slice(&seed_a.to_le_bytes());
                s
            }),
        );
        let strat = safe_input(kind);
        let x = [
            strat.new_tree(&mut runner).unwrap().current(),
            strat.new_tree(&mut runner).unwrap().current(),
        ];
        let inputs = &x[..kind.arity()];
        let params: &[f64] = if kind == InteractionKind::Linear { &[w, b] } else { &[] };
        let got = eval_interaction(kind, inputs, params).unwrap();
        let want = reference(kind, inputs, params);
        prop_assert!(close(got, want), "{kind}({inputs:?}) = {got}, reference {want}");
    }
}

#[test]
fn poles_are_guarded() {
    for x in [0.0, SINGULARITY_EPSILON, -3.0] {
        assert!(eval_interaction(InteractionKind::Log, &[x], &[]).is_err());
    }
    for x in [0.0, SINGULARITY_EPSILON, -SINGULARITY_EPSILON] {
        assert!(eval_interaction(InteractionKind::Inverse, &[x], &[]).is_err());
    }
    assert!(eval_interaction(InteractionKind::Log, &[2.0 * SINGULARITY_EPSILON], &[]).is_ok());
}
