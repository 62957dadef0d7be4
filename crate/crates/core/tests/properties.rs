use std::sync::Arc;

use bal_core::analysis::{gap_above, gap_below, metrics, y_at_level};
use bal_core::graph::{edge_color, random_regular, Graph, GraphFamily};
use bal_core::matrix::{row_dist_uniform_sq, row_norm_sq};
use bal_core::process::{
    coupled_flip_run, reconstruct_from_errors, run, ContinuousEngine, HeightEngine, LoadVector,
    StandardEngine,
};
use bal_core::schedule::{check_smoothing, ScheduleModel};
use bal_core::Dyadic;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = GraphFamily> {
    prop_oneof![
        (1u32..=6).prop_map(|d| GraphFamily::Hypercube { d }),
        (3usize..=24).prop_map(|n| GraphFamily::Cycle { n }),
        (3usize..=5, 3usize..=5).prop_map(|(a, b)| GraphFamily::Torus { a, b }),
        (2usize..=10).prop_map(|n| GraphFamily::Complete { n }),
        (3usize..=12, 0u64..1000).prop_map(|(h, seed)| GraphFamily::RandomRegular {
            n: 2 * h,
            d: 3,
            seed
        }),
    ]
}

fn graph() -> impl Strategy<Value = Graph> {
    family().prop_map(|f| Graph::build(&f).expect("feasible family"))
}

fn model() -> impl Strategy<Value = ScheduleModel> {
    (graph(), 0u8..3, any::<u64>()).prop_map(|(g, kind, seed)| {
        let g = Arc::new(g);
        match kind {
            0 => ScheduleModel::circuit(g),
            1 => ScheduleModel::random_matching(g, seed),
            _ => ScheduleModel::async_edge(g, seed),
        }
    })
}

/// A model together with a load vector on its nodes.
fn loaded(max: i64) -> impl Strategy<Value = (ScheduleModel, LoadVector)> {
    model().prop_flat_map(move |m| {
        let n = m.n();
        (
            Just(m),
            prop::collection::vec(0..=max, n).prop_map(|v| LoadVector::new(v).unwrap()),
        )
    })
}

fn trajectory(model: &ScheduleModel, x: &LoadVector, seed: u64, rounds: u64) -> Vec<LoadVector> {
    let mut out = Vec::new();
    run(
        &mut StandardEngine::new(x.clone(), seed),
        model,
        rounds,
        |_, y| out.push(y.clone()),
    )
    .unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_are_connected_and_colorings_proper(g in graph()) {
        prop_assert_eq!(g.reachable_from(0), g.n());
        let true_max = (0..g.n()).map(|u| g.degree(u)).max().unwrap();
        prop_assert_eq!(true_max, g.max_degree());
        let c = edge_color(&g);
        prop_assert!(c.is_proper_for(&g));
        let covered: usize = c.classes.iter().map(Vec::len).sum();
        prop_assert_eq!(covered, g.edge_count());
        prop_assert!(c.width() < 2 * g.max_degree());
    }

    #[test]
    fn random_regular_is_deterministic(h in 3usize..20, d in 3usize..5, seed in any::<u64>()) {
        let n = 2 * h;
        prop_assume!(d < n);
        prop_assert_eq!(random_regular(n, d, seed).unwrap(), random_regular(n, d, seed).unwrap());
    }

    #[test]
    fn matchings_are_valid(m in model(), t in 1u64..500) {
        let mt = m.matching(t);
        prop_assert!(mt.is_valid_for(m.n()));
        for &(u, v) in &mt.pairs {
            prop_assert!(m.graph().has_edge(u, v));
        }
    }

    #[test]
    fn windows_are_doubly_stochastic(m in model(), t1 in 1u64..40, len in 0u64..80) {
        prop_assert!(m.window_product(t1, t1 + len).is_doubly_stochastic(1e-12));
    }

    #[test]
    fn row_distances_follow_the_l2_identity_and_shrink(m in model(), rounds in 1u64..120) {
        let n = m.n() as f64;
        let mut prev: Option<Vec<f64>> = None;
        for t in [0, rounds / 4, rounds / 2, rounds] {
            let w = m.window_product(1, t);
            let d: Vec<f64> = w.rows().map(row_dist_uniform_sq).collect();
            for (row, dist) in w.rows().zip(&d) {
                prop_assert!((dist - (row_norm_sq(row) - 1.0 / n)).abs() < 1e-12);
            }
            if let Some(p) = &prev {
                for (a, b) in p.iter().zip(&d) {
                    prop_assert!(*b <= a + 1e-12);
                }
            }
            prev = Some(d);
        }
    }

    #[test]
    fn close_rows_imply_smoothing(m in model(), k in 1.0f64..64.0, t in 1u64..400) {
        let n = m.n() as f64;
        let limit = (1.0 / (2.0 * k * n)).powi(2);
        if m.window_product(1, t).rows().all(|r| row_dist_uniform_sq(r) <= limit) {
            prop_assert!(check_smoothing(&m, t, k, 1.0).pass);
        }
    }

    #[test]
    fn engines_conserve_load((m, x) in loaded(40), seed in any::<u64>(), rounds in 0u64..80) {
        let total = x.total();
        for y in trajectory(&m, &x, seed, rounds) {
            prop_assert_eq!(y.total(), total);
        }
        let mut ok = true;
        run(&mut HeightEngine::new(&x, seed), &m, rounds, |_, s| {
            ok &= s.loads().iter().sum::<i64>() == total && s.check_invariants().is_ok();
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn height_engine_has_standard_marginals((m, x) in loaded(30), seed in any::<u64>(), rounds in 0u64..60) {
        let mut std = StandardEngine::new(x.clone(), seed);
        let mut h = HeightEngine::new(&x, seed);
        run(&mut std, &m, rounds, |_, _| {}).unwrap();
        run(&mut h, &m, rounds, |_, _| {}).unwrap();
        prop_assert_eq!(h.tokens.load_vector(), std.loads);
    }

    #[test]
    fn heights_and_y_never_increase((m, x) in loaded(20), seed in any::<u64>(), rounds in 1u64..60) {
        let mut heights = HeightEngine::new(&x, seed).tokens.heights().to_vec();
        let mut ys: Vec<i64> = (0..=x.max()).map(|l| y_at_level(x.loads(), l)).collect();
        let mut ok = true;
        run(&mut HeightEngine::new(&x, seed), &m, rounds, |_, s| {
            ok &= s.heights().iter().zip(&heights).all(|(now, before)| now <= before);
            heights = s.heights().to_vec();
            let loads = s.loads();
            for (l, y) in ys.iter_mut().enumerate() {
                let now = y_at_level(&loads, l as i64);
                ok &= now <= *y;
                *y = now;
            }
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn shift_and_domination_couplings(
        (m, x) in loaded(30), seed in any::<u64>(), alpha in 1i64..50, bump in prop::collection::vec(0i64..4, 64),
    ) {
        let rounds = 50;
        let up = x.shifted(alpha).unwrap();
        let dom = LoadVector::new(x.loads().iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        let base = trajectory(&m, &x, seed, rounds);
        for (a, b) in base.iter().zip(trajectory(&m, &up, seed, rounds)) {
            prop_assert_eq!(a.shifted(alpha).unwrap(), b);
        }
        for (a, b) in base.iter().zip(trajectory(&m, &dom, seed, rounds)) {
            prop_assert!(a.loads().iter().zip(b.loads()).all(|(p, q)| p <= q));
        }
    }

    #[test]
    fn flip_coupling_and_gap_symmetry((m, x) in loaded(30), seed in any::<u64>()) {
        let k = x.max().max(1);
        let (orig, flipped) = coupled_flip_run(&x, k, &m, 40, seed).unwrap();
        for (a, b) in orig.iter().zip(&flipped) {
            prop_assert_eq!(&a.complement(k).unwrap(), b);
            prop_assert_eq!(gap_below(a), gap_above(b));
        }
    }

    #[test]
    fn continuous_matches_matrix_product((m, x) in loaded(100), rounds in 0u64..60) {
        let mut eng = ContinuousEngine { loads: x.to_frac::<f64>() };
        run(&mut eng, &m, rounds, |_, _| {}).unwrap();
        let xs: Vec<f64> = x.loads().iter().map(|&v| v as f64).collect();
        let expect = m.window_product(1, rounds).left_mul_vec(&xs);
        for (a, b) in eng.loads.loads.iter().zip(&expect) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rounding_errors_reconstruct_exactly((m, x) in loaded(200), seed in any::<u64>(), t in 1u64..=64) {
        let mut eng = StandardEngine::new(x.clone(), seed).recording();
        run(&mut eng, &m, t, |_, _| {}).unwrap();
        let trace = eng.trace.as_ref().unwrap();
        prop_assert!(trace.entries.iter().all(|e| e.phi == 1 || e.phi == -1));
        let r = reconstruct_from_errors::<Dyadic>(&x, &m, trace, t).unwrap();
        prop_assert!(r.is_exact());
        prop_assert_eq!(&r.final_loads, &eng.loads);
    }

    #[test]
    fn metrics_are_shift_invariant(loads in prop::collection::vec(0i64..1000, 1..40), alpha in 0i64..1000, level in 0i64..1000) {
        let x = LoadVector::new(loads).unwrap();
        let y = x.shifted(alpha).unwrap();
        prop_assert_eq!(metrics(&x, None).disc, metrics(&y, None).disc);
        prop_assert_eq!(metrics(&x, None).disc, x.disc());
        prop_assert_eq!(y_at_level(x.loads(), level), y_at_level(y.loads(), level + alpha));
        prop_assert!(y_at_level(x.loads(), level + 1) <= y_at_level(x.loads(), level));
    }
}
