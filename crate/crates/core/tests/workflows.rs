use std::fs;
use std::sync::Arc;

use bal_core::analysis::{na_oracle, walk_law_oracle, OracleInstance, StaircasePlan};
use bal_core::graph::{complete, cycle, hypercube, Graph};
use bal_core::harness::{load_config, run_experiment};
use bal_core::process::{run, HeightEngine, LoadVector, TokenState};
use bal_core::schedule::{
    check_smoothing, estimate_goodness, spectral_report, Matching, ScheduleModel,
};

#[test]
fn config_to_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&format!(
        r#"{{"graph":{{"family":"torus","a":3,"b":4}},"model":"random_matching",
            "initial":{{"kind":"random","K":20,"seed":4}},"rounds":"staircase","multiplier":1,
            "trials":3,"seed":9,"out":{:?}}}"#,
        dir.path()
    ))
    .unwrap();
    let art = run_experiment(&cfg).unwrap();
    let written = art.write_to(cfg.out.as_ref().unwrap()).unwrap();
    assert_eq!(written.len(), 3);
    assert_eq!(art.summary.final_disc.len(), 3);

    let csv = fs::read_to_string(dir.path().join("stages.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("trial,stage,round,threshold,observed,pass")
    );
    assert_eq!(lines.count(), 3 * 7);

    for line in fs::read_to_string(dir.path().join("trace.jsonl"))
        .unwrap()
        .lines()
    {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["trial"].as_u64().unwrap() < 3);
        assert!(v["disc"].as_i64().unwrap() >= 0);
    }
}

#[test]
fn realised_schedules_replay_identically() {
    let model = ScheduleModel::async_edge(Arc::new(hypercube(4).unwrap()), 17);
    let text = model.replay_to_json(50);
    let replay = ScheduleModel::replay_from_json(model.graph().clone(), &text).unwrap();
    for t in 1..=50 {
        assert_eq!(replay.matching(t), model.matching(t));
    }
    assert_eq!(replay.window_product(1, 50), model.window_product(1, 50));
}

#[test]
fn replay_rejects_non_edges() {
    let g = Arc::new(cycle(5).unwrap());
    assert!(ScheduleModel::replay_from_json(g.clone(), "[[[0,2]]]").is_err());
    assert!(ScheduleModel::replay_from_json(g, "[[[0,1],[1,2]]]").is_err());
}

#[test]
fn spectral_examples() {
    let r = spectral_report(
        &ScheduleModel::circuit(Arc::new(complete(2).unwrap())),
        4.0,
        8.0,
        None,
    )
    .unwrap();
    assert_eq!(r.lambda, 0.0);
    assert!(r.tau_spectral >= 1);

    let cube = ScheduleModel::circuit(Arc::new(hypercube(5).unwrap()));
    assert_eq!(
        spectral_report(&cube, 100.0, 8.0, None).unwrap().lambda,
        0.0
    );

    let ring = ScheduleModel::random_matching(Arc::new(cycle(16).unwrap()), 1);
    let r = spectral_report(&ring, 256.0, 8.0, None).unwrap();
    assert!(r.lambda > 0.9 && r.lambda < 1.0);
    assert!(r.p_min.unwrap() > 0.0);
}

#[test]
fn staircase_plan_for_the_reference_cube() {
    let model = ScheduleModel::circuit(Arc::new(hypercube(8).unwrap()));
    let p = StaircasePlan::for_model(&model, 65536.0, 8.0, None).unwrap();
    assert_eq!((p.tau_global, p.tau_local), (355, 110));
    assert_eq!(
        (p.t0, p.phase1, p.t1, p.t2, p.t3),
        (3329, 4041, 6176, 9023, 16855)
    );
}

#[test]
fn good_windows_give_smoothing() {
    let g = Arc::new(hypercube(4).unwrap());
    let model = ScheduleModel::random_matching(g, 3);
    let n = 16.0f64;
    let windows: Vec<u64> = (1..=300).collect();
    let starts: Vec<u64> = (0..40).map(|i| i * 37).collect();
    let report = estimate_goodness(&model, &windows, &[1], &starts);
    let tau_g = report
        .tau_global_estimate
        .expect("some window is globally good");
    assert!((0.0..=1.0).contains(&report.gamma_g_pass));

    let k = 2.0 * n * n;
    let eps = 1.0;
    let t_star = (3.0 * (k / eps).ln() / n.ln() * tau_g as f64).ceil() as u64;
    let passed = (0..100)
        .filter(|&s| check_smoothing(&model.with_seed(s), t_star, k, eps).pass)
        .count();
    assert!(
        passed >= 95,
        "{passed}/100 realisations smoothing after {t_star} rounds"
    );
}

#[test]
fn ceil_lands_on_each_endpoint_half_the_time() {
    let g = Arc::new(complete(2).unwrap());
    let model = ScheduleModel::replay(g, vec![vec![(0, 1)]]).unwrap();
    let x = LoadVector::new(vec![9, 4]).unwrap();
    let trials = 20_000;
    let mut on_zero = 0;
    for seed in 0..trials {
        let mut e = HeightEngine::new(&x, seed);
        run(&mut e, &model, 1, |_, _| {}).unwrap();
        let loads = e.tokens.loads();
        assert_eq!(loads.iter().sum::<i64>(), 13);
        assert!(loads == [7, 6] || loads == [6, 7]);
        on_zero += u64::from(loads[0] == 7);
    }
    let freq = on_zero as f64 / trials as f64;
    let sigma = (0.25 / trials as f64).sqrt();
    assert!((freq - 0.5).abs() <= 3.0 * sigma, "{freq}");
}

#[test]
fn oracle_on_a_path() {
    let graph = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let initial = TokenState::new(&LoadVector::new(vec![3, 0, 0]).unwrap());
    let inst = OracleInstance {
        graph,
        sequence: vec![(0, 1), (1, 2), (0, 1)],
        initial,
        subset: vec![0, 1, 2],
        dest: vec![2],
    };
    let r = na_oracle(&inst).unwrap();
    assert!(r.pass && r.joint <= r.product);
    for token in 0..3 {
        assert!(walk_law_oracle(&inst, token).unwrap().equal);
    }
}

#[test]
fn circuit_rounds_cycle_through_the_coloring() {
    let model = ScheduleModel::circuit(Arc::new(cycle(6).unwrap()));
    let width = model.delta() as u64;
    for t in 1..=3 * width {
        assert_eq!(model.matching(t).pairs, model.matching(t + width).pairs);
        assert!(!Matching::new(t, model.matching(t).pairs).is_empty());
    }
}
