use super::*;
use crate::persist::{replay, SessionFile};

/// 120 rows: two numerical features, one categorical, a binary target that
/// depends on `a` and `b`.
fn csv_text() -> String {
    let mut out = String::from("a,b,c,t\n");
    for i in 0..120 {
        let a = (i as f64 * 0.37).sin() * 2.0;
        let b = (i as f64 * 0.11).cos();
        let c = ["u", "v", "w"][i % 3];
        let t = u8::from(a + 0.5 * b > 0.2);
        out.push_str(&format!("{a},{b},{c},{t}\n"));
    }
    out
}

fn split() -> SplitSpec {
    SplitSpec {
        fractions: [0.6, 0.2, 0.2],
        stratify_by: Some("t".into()),
        seed: 1,
    }
}

fn small_question() -> Question {
    Question {
        capacity: Some(12),
        ..Question::new(&["a", "b", "c"], "t", Task::Classifier, 2)
    }
}

fn loaded() -> Session {
    let mut s = Session::with_id("s".into(), LatticeConfig { seed: 5, ..LatticeConfig::default() }).unwrap();
    s.load_data(DEFAULT_DATASET, &csv_text(), &BTreeMap::new(), &split()).unwrap();
    s
}

fn fitted() -> (Session, String) {
    let mut s = loaded();
    let p = s.pose_question(&small_question()).unwrap();
    s.fit(&p, 2, 2, true).unwrap();
    (s, p)
}

#[test]
fn loading_records_a_manifest_and_rejects_duplicates() {
    let mut s = loaded();
    let d = s.dataset(DEFAULT_DATASET).unwrap();
    assert_eq!(d.manifest.rows, 120);
    assert_eq!(d.indices.train.len() + d.indices.valid.len() + d.indices.holdout.len(), 120);
    assert!(matches!(
        s.load_data(DEFAULT_DATASET, &csv_text(), &BTreeMap::new(), &split()),
        Err(LabError::BadRequest(_))
    ));
    assert_eq!(s.history().iter().filter(|e| e.name() == "data_loaded").count(), 1);
}

#[test]
fn questions_take_types_from_the_dataset() {
    let mut s = loaded();
    let p = s.pose_question(&small_question()).unwrap();
    assert_eq!(p, "p0");
    let spec = &s.pool(&p).unwrap().pool.spec;
    assert_eq!(spec.inputs[2], ("c".to_string(), SemanticType::Categorical));
    assert_eq!(s.pool(&p).unwrap().pool.len(), 12);
    let mut bad = small_question();
    bad.inputs.push("nope".into());
    assert!(matches!(s.pose_question(&bad), Err(LabError::BadRequest(_))));
    let mut cat_out = small_question();
    cat_out.inputs = vec!["a".into()];
    cat_out.output = "c".into();
    assert!(s.pose_question(&cat_out).is_err());
    assert_eq!(s.pose_question(&small_question()).unwrap(), "p1");
    assert_eq!(s.latest_pool(), Some("p1"));
}

#[test]
fn unknown_ids_are_not_found() {
    let (s, p) = fitted();
    assert!(matches!(s.pool("p9"), Err(LabError::NotFound { what: "pool", .. })));
    assert!(matches!(s.member(&p, 999_999), Err(LabError::NotFound { what: "graph", .. })));
    assert!(matches!(s.dataset("other"), Err(LabError::NotFound { what: "dataset", .. })));
}

#[test]
fn history_has_one_event_per_round_and_update() {
    let (mut s, p) = fitted();
    let names: Vec<&str> = s.history().iter().map(Event::name).collect();
    assert_eq!(
        names,
        [
            "session_created",
            "data_loaded",
            "question_posed",
            "fit_round",
            "update_applied",
            "fit_round",
            "update_applied"
        ]
    );
    s.fit(&p, 3, 1, false).unwrap();
    assert_eq!(s.history().iter().filter(|e| e.name() == "fit_round").count(), 5);
    assert_eq!(s.history().iter().filter(|e| e.name() == "update_applied").count(), 2);
}

#[test]
fn auto_update_reinforces_with_best() {
    let mut s = loaded();
    let p = s.pose_question(&small_question()).unwrap();
    let mut oracle = s.lattice().clone();
    let rounds = s.fit(&p, 1, 2, true).unwrap();
    let best: Vec<u64> = s.pool(&p).unwrap().pool.best().unwrap().iter().map(|m| m.id).collect();
    assert_eq!(rounds[0].updated_with, best);
    let structures: Vec<Structure> = best.iter().map(|&id| s.member(&p, id).unwrap().graph.structure()).collect();
    oracle.update(&structures).unwrap();
    assert_eq!(oracle.snapshot(), s.lattice().snapshot());
}

#[test]
fn manual_update_uses_exactly_the_chosen_members() {
    let (mut s, p) = fitted();
    let chosen = [s.member_at(&p, 3).unwrap().id, s.member_at(&p, 1).unwrap().id];
    let mut oracle = s.lattice().clone();
    let structures: Vec<Structure> = chosen.iter().map(|&id| s.member(&p, id).unwrap().graph.structure()).collect();
    oracle.update(&structures).unwrap();
    s.update(&p, &chosen).unwrap();
    assert_eq!(oracle.snapshot(), s.lattice().snapshot());
    match s.history().last().unwrap() {
        Event::UpdateApplied { members, auto, .. } => {
            assert_eq!(members, &chosen);
            assert!(!auto);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn failed_update_changes_nothing() {
    let (mut s, p) = fitted();
    let before = (s.lattice().snapshot(), s.history().len());
    let real = s.member_at(&p, 0).unwrap().id;
    assert!(s.update(&p, &[real, 424_242]).is_err());
    assert!(s.update(&p, &[]).is_err());
    assert_eq!(before, (s.lattice().snapshot(), s.history().len()));
}

#[test]
fn stale_fit_is_refused() {
    let (mut s, p) = fitted();
    let job = s.prepare_fit(&p, 1, false).unwrap();
    s.unlock_holdout();
    let outcome = job.run().unwrap();
    let before = s.pool(&p).unwrap().clone();
    assert!(s.commit_fit(outcome).is_err());
    assert_eq!(&before, s.pool(&p).unwrap());
}

#[test]
fn holdout_gate() {
    let (mut s, p) = fitted();
    let id = s.member_at(&p, 0).unwrap().id;
    let holdout = PlotRequest { dataset: Some(SplitName::Holdout), ..PlotRequest::default() };
    for kind in [PlotKind::Roc, PlotKind::ProbabilityScores, PlotKind::Partial2d, PlotKind::SegmentedLoss] {
        assert!(matches!(s.plot(&p, id, kind, &holdout), Err(LabError::HoldoutLocked)));
    }
    assert!(matches!(s.split(&p, SplitName::Holdout), Err(LabError::HoldoutLocked)));
    assert!(s.unlock_holdout());
    assert!(!s.unlock_holdout());
    assert_eq!(s.history().iter().filter(|e| matches!(e, Event::HoldoutUnlocked)).count(), 1);
    let roc = s.plot(&p, id, PlotKind::Roc, &holdout).unwrap();
    assert_eq!(roc.meta.dataset, "holdout");
}

#[test]
fn every_plot_kind_on_valid() {
    let (s, p) = fitted();
    let g = s.member_at(&p, 0).unwrap();
    let numeric: Vec<String> = g
        .graph
        .inputs()
        .into_iter()
        .filter(|(_, t)| *t == SemanticType::Numerical)
        .map(|(n, _)| n)
        .collect();
    let req = PlotRequest::default();
    let roc = s.plot(&p, g.id, PlotKind::Roc, &req).unwrap();
    assert_eq!((roc.plot.kind(), roc.meta.dataset.as_str()), ("roc", "valid"));
    let h = s.plot(&p, g.id, PlotKind::ProbabilityScores, &req).unwrap();
    let PlotPayload::ProbabilityScores(h) = h.plot else { panic!() };
    let valid_rows = s.split(&p, SplitName::Valid).unwrap().n_rows() as u64;
    assert_eq!(h.counts0.iter().chain(&h.counts1).sum::<u64>(), valid_rows);
    let seg = s.plot(&p, g.id, PlotKind::SegmentedLoss, &req).unwrap();
    assert_eq!(seg.meta.features.len(), 1);
    let partial = s.plot(
        &p,
        g.id,
        PlotKind::Partial2d,
        &PlotRequest { x: Some("a".into()), y: Some("b".into()), resolution: Some(6), ..req.clone() },
    );
    if g.graph.inputs().contains_key("a") && g.graph.inputs().contains_key("b") {
        let PlotPayload::Partial2d(pd) = partial.unwrap().plot else { panic!() };
        assert_eq!(pd.grid.len(), 6);
    }
    if numeric.len() >= 2 {
        let pd = s.plot(&p, g.id, PlotKind::Partial2d, &req).unwrap();
        assert_eq!(pd.meta.features, numeric[..2].to_vec());
    } else {
        assert!(s.plot(&p, g.id, PlotKind::Partial2d, &req).is_err());
    }
}

#[test]
fn equation_views() {
    let (s, p) = fitted();
    let id = s.member_at(&p, 0).unwrap().id;
    let eq = s.equation(&p, id, 3, Format::Text).unwrap();
    assert!(eq.text.starts_with("logistic("), "{}", eq.text);
    assert_eq!(eq.text, render(&eq.expression, 3, Format::Text));
    assert!(s.equation(&p, id, 3, Format::Latex).unwrap().text.contains("\\operatorname{logistic}"));
    assert!(matches!(s.equation(&p, id, 0, Format::Text), Err(LabError::BadRequest(_))));
}

#[test]
fn graph_summaries_follow_pool_order() {
    let (s, p) = fitted();
    let g = s.graphs(&p, 4).unwrap();
    assert_eq!(g.len(), 4);
    let pool = &s.pool(&p).unwrap().pool;
    for (i, summary) in g.iter().enumerate() {
        assert_eq!(summary.rank, i);
        assert_eq!(summary.id, pool.members()[i].id);
        assert_eq!(summary.params, pool.members()[i].graph.param_count());
    }
    let mut fresh = loaded();
    let q = fresh.pose_question(&small_question()).unwrap();
    assert!(matches!(fresh.graphs(&q, 3), Err(LabError::Core(pathlattice::Error::FitBeforeBest))));
}

#[test]
fn save_and_resume_round_trip() {
    let (mut s, p) = fitted();
    s.unlock_holdout();
    let file = s.to_file().unwrap();
    let back = Session::from_file(&SessionFile::from_json(&file.to_json().unwrap()).unwrap()).unwrap();
    assert_eq!(back.summary(), s.summary());
    assert_eq!(back.lattice().snapshot(), s.lattice().snapshot());
    assert_eq!(back.pools(), s.pools());
    assert_eq!(back.history(), s.history());
    assert_eq!(back.graphs(&p, 6).unwrap(), s.graphs(&p, 6).unwrap());
    for cell in s.lattice().cells() {
        assert_eq!(s.lattice().sampling_distribution(cell).unwrap(), back.lattice().sampling_distribution(cell).unwrap());
    }
    assert_eq!(back.to_file().unwrap(), file);
}

#[test]
fn resumed_sessions_continue_identically() {
    let (mut s, p) = fitted();
    let mut back = Session::from_file(&s.to_file().unwrap()).unwrap();
    s.fit(&p, 2, 3, true).unwrap();
    back.fit(&p, 2, 1, true).unwrap();
    assert_eq!(s.pools(), back.pools());
    assert_eq!(s.lattice().snapshot(), back.lattice().snapshot());
}

#[test]
fn tampering_is_detected() {
    let (s, _) = fitted();
    let file = s.to_file().unwrap();

    let mut bad = file.clone();
    bad.body["holdout_unlocked"] = serde_json::Value::Bool(true);
    assert!(matches!(Session::from_file(&bad), Err(LabError::Integrity(_))));

    let mut bad = file.clone();
    bad.digest = "0".repeat(64);
    assert!(matches!(Session::from_file(&bad), Err(LabError::Integrity(_))));

    let mut bad = file.clone();
    bad.version = 2;
    assert!(matches!(Session::from_file(&bad), Err(LabError::Version { found: 2, expected: 1 })));
}

#[test]
fn inconsistent_but_sealed_bodies_are_refused() {
    let (s, _) = fitted();
    let mut file = s.to_file().unwrap();
    file.body["holdout_unlocked"] = serde_json::Value::Bool(true);
    let reseal = |f: &mut SessionFile| {
        use sha2::Digest;
        f.digest = hex::encode(sha2::Sha256::digest(serde_json::to_vec(&f.body).unwrap()));
    };
    reseal(&mut file);
    assert!(matches!(Session::from_file(&file), Err(LabError::Integrity(_))));

    let mut file = s.to_file().unwrap();
    let csv = file.body["history"][1]["csv"].as_str().unwrap().replacen("\n", "\n1,", 1);
    file.body["history"][1]["csv"] = serde_json::Value::String(csv);
    reseal(&mut file);
    assert!(Session::from_file(&file).is_err());
}

#[test]
fn replaying_history_rebuilds_the_session() {
    let (mut s, p) = fitted();
    let chosen = s.member_at(&p, 2).unwrap().id;
    s.update(&p, &[chosen]).unwrap();
    s.fit(&p, 1, 2, false).unwrap();
    s.unlock_holdout();
    let r = replay(s.history(), 3).unwrap();
    assert_eq!(r.lattice().snapshot(), s.lattice().snapshot());
    assert_eq!(r.pools(), s.pools());
    assert_eq!(r.history(), s.history());
    assert!(r.holdout_unlocked());
}

#[test]
fn replay_detects_a_forged_report() {
    let (s, _) = fitted();
    let mut history = s.history().to_vec();
    if let Event::FitRound { report, .. } = &mut history[3] {
        report.unusable += 1;
    }
    assert!(matches!(replay(&history, 1), Err(LabError::Integrity(_))));
    assert!(replay(&history[1..], 1).is_err());
}

#[test]
fn event_json_is_tagged() {
    let v = serde_json::to_value(Event::HoldoutUnlocked).unwrap();
    assert_eq!(v, serde_json::json!({"event": "holdout_unlocked"}));
    let (s, _) = fitted();
    let v = serde_json::to_value(&s.history()[2]).unwrap();
    assert_eq!(v["event"], "question_posed");
    assert_eq!(v["pool"], "p0");
}
