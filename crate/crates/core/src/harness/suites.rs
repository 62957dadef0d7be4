use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    exhaustive_family, gap_above, gap_below, l2_profile_check, psi_identity_check, y_at_level,
};
use crate::exact::Dyadic;
use crate::graph::{
    complete, cycle, edge_color, hypercube, random_regular, torus, Graph, GraphFamily,
};
use crate::matrix::row_dist_uniform_sq;
use crate::process::{
    coupled_flip_run, reconstruct_from_errors, run, HeightEngine, LoadVector, StandardEngine,
};
use crate::schedule::{check_smoothing, ScheduleModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub pass: bool,
    pub detail: String,
}

impl SuiteOutcome {
    fn from(r: Result<String, String>) -> Self {
        match r {
            Ok(detail) => Self { pass: true, detail },
            Err(detail) => Self {
                pass: false,
                detail,
            },
        }
    }
}

/// A named invariant check run by `verify`.
pub struct Suite {
    pub name: &'static str,
    pub module: &'static str,
    pub run: fn() -> SuiteOutcome,
}

pub const SUITES: &[Suite] = &[
    Suite {
        name: "graph-families",
        module: "graph",
        run: || SuiteOutcome::from(graph_families()),
    },
    Suite {
        name: "window-products",
        module: "schedule",
        run: || SuiteOutcome::from(window_products(20, 1)),
    },
    Suite {
        name: "l2-profile",
        module: "schedule",
        run: || SuiteOutcome::from(l2_profiles(20, 200, 32, 2)),
    },
    Suite {
        name: "smoothing-sufficient",
        module: "schedule",
        run: || SuiteOutcome::from(smoothing_sufficient(20, 3)),
    },
    Suite {
        name: "conservation",
        module: "process",
        run: || SuiteOutcome::from(conservation(50, 4)),
    },
    Suite {
        name: "couplings",
        module: "process",
        run: || SuiteOutcome::from(couplings(20, 5)),
    },
    Suite {
        name: "height-monotonicity",
        module: "process",
        run: || SuiteOutcome::from(height_monotonicity(20_000, 6)),
    },
    Suite {
        name: "rounding-identity",
        module: "process",
        run: || SuiteOutcome::from(rounding_identity(50, 7)),
    },
    Suite {
        name: "na-oracle",
        module: "analysis",
        run: || SuiteOutcome::from(na_family(false)),
    },
    Suite {
        name: "walk-law",
        module: "analysis",
        run: || SuiteOutcome::from(na_family(true)),
    },
    Suite {
        name: "psi-identity",
        module: "analysis",
        run: || SuiteOutcome::from(psi_draws(100, 8)),
    },
    Suite {
        name: "gap-symmetry",
        module: "analysis",
        run: || SuiteOutcome::from(gap_symmetry(20, 9)),
    },
];

pub fn find_suite(name: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.name == name)
}

/// A small connected graph drawn from the named families.
pub fn random_graph(rng: &mut impl Rng, max_n: usize) -> Graph {
    loop {
        let family = match rng.random_range(0..5) {
            0 => GraphFamily::Cycle {
                n: rng.random_range(3..=max_n),
            },
            1 => GraphFamily::Hypercube {
                d: rng.random_range(1..=max_n.ilog2()),
            },
            2 => GraphFamily::Complete {
                n: rng.random_range(2..=max_n.min(12)),
            },
            3 => GraphFamily::Torus {
                a: 3,
                b: rng.random_range(3..=(max_n / 3).max(3)),
            },
            _ => GraphFamily::RandomRegular {
                n: 2 * rng.random_range(3..=max_n / 2),
                d: 3,
                seed: rng.random(),
            },
        };
        if let Ok(g) = Graph::build(&family) {
            if g.n() <= max_n {
                return g;
            }
        }
    }
}

pub fn random_model(rng: &mut impl Rng, g: Graph) -> ScheduleModel {
    let g = Arc::new(g);
    match rng.random_range(0..3) {
        0 => ScheduleModel::circuit(g),
        1 => ScheduleModel::random_matching(g, rng.random()),
        _ => ScheduleModel::async_edge(g, rng.random()),
    }
}

/// A random model on a random graph with at most `max_n` nodes.
pub fn random_instance(rng: &mut impl Rng, max_n: usize) -> ScheduleModel {
    let g = random_graph(rng, max_n);
    random_model(rng, g)
}

fn random_loads(rng: &mut impl Rng, n: usize, max: i64) -> LoadVector {
    LoadVector::new((0..n).map(|_| rng.random_range(0..=max)).collect()).expect("small loads")
}

pub fn graph_families() -> Result<String, String> {
    let mut graphs = Vec::new();
    graphs.extend((1..=6).map(|d| hypercube(d).unwrap()));
    graphs.extend((3..=10).map(|n| cycle(n).unwrap()));
    graphs.extend((2..=8).map(|n| complete(n).unwrap()));
    graphs.push(torus(3, 4).unwrap());
    graphs.extend((0..5).map(|s| random_regular(20, 3, s).unwrap()));
    for g in &graphs {
        if g.reachable_from(0) != g.n() {
            return Err(format!("graph with {} nodes is not connected", g.n()));
        }
        let true_max = (0..g.n()).map(|u| g.degree(u)).max().unwrap_or(0);
        if true_max != g.max_degree() {
            return Err("max_degree is stale".into());
        }
        let c = edge_color(g);
        if !c.is_proper_for(g) || c.width() > (2 * g.max_degree()).saturating_sub(1).max(1) {
            return Err(format!("bad coloring of width {}", c.width()));
        }
        if Graph::parse(&g.to_edge_list()).as_ref() != Ok(g) {
            return Err("edge list does not round-trip".into());
        }
    }
    if random_regular(30, 4, 9) != random_regular(30, 4, 9) {
        return Err("random_regular is not deterministic".into());
    }
    Ok(format!("{} graphs", graphs.len()))
}

pub fn window_products(draws: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        let model = random_instance(&mut rng, 16);
        let t1 = rng.random_range(1..30);
        let t2 = t1 + rng.random_range(0..60);
        if !model.window_product(t1, t2).is_doubly_stochastic(1e-12) {
            return Err(format!("window [{t1},{t2}] is not doubly stochastic"));
        }
        if model.window_product(t2 + 1, t2) != crate::matrix::AveragingMatrix::identity(model.n()) {
            return Err("empty window is not the identity".into());
        }
    }
    Ok(format!("{draws} windows"))
}

/// Row identity `‖r − 1/n‖² = ‖r‖² − 1/n` and monotone distances along prefixes.
pub fn l2_profiles(schedules: usize, rounds: u64, n: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..schedules {
        let g = match i % 3 {
            0 => hypercube(n.ilog2()).unwrap(),
            1 => cycle(n).unwrap(),
            _ => random_regular(n, 3, rng.random()).unwrap(),
        };
        let model = if i % 2 == 0 {
            ScheduleModel::random_matching(Arc::new(g), rng.random())
        } else {
            ScheduleModel::async_edge(Arc::new(g), rng.random())
        };
        let r = l2_profile_check(&model, rounds);
        worst = worst.max(r.max_identity_residual);
        if r.max_identity_residual >= 1e-12 {
            return Err(format!("identity residual {}", r.max_identity_residual));
        }
        if !r.monotone {
            return Err(format!("distance increased by {}", r.max_increase));
        }
    }
    Ok(format!(
        "{schedules} schedules, worst identity residual {worst:e}"
    ))
}

/// Rows within `(ε/(2Kn))²` of uniform imply `(K, ε)`-smoothing.
pub fn smoothing_sufficient(draws: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut applicable = 0;
    for _ in 0..draws {
        let model = random_instance(&mut rng, 16);
        let n = model.n() as f64;
        let (k, eps) = (rng.random_range(1.0..100.0), 1.0);
        for t in [1, 10, 50, 200, 800] {
            let m = model.window_product(1, t);
            let limit = (eps / (2.0 * k * n)).powi(2);
            if m.rows().all(|r| row_dist_uniform_sq(r) <= limit) {
                applicable += 1;
                if !check_smoothing(&model, t, k, eps).pass {
                    return Err(format!(
                        "rows are close to uniform at t = {t} but smoothing fails"
                    ));
                }
            }
        }
    }
    Ok(format!("{applicable} applicable windows"))
}

pub fn conservation(runs: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..runs {
        let model = random_instance(&mut rng, 16);
        let x0 = random_loads(&mut rng, model.n(), 30);
        let total = x0.total();
        let s: u64 = rng.random();
        let mut ok = true;
        run(
            &mut StandardEngine::new(x0.clone(), s),
            &model,
            100,
            |_, x| ok &= x.total() == total,
        )
        .map_err(|e| e.to_string())?;
        run(&mut HeightEngine::new(&x0, s), &model, 100, |_, st| {
            ok &= st.loads().iter().sum::<i64>() == total && st.check_invariants().is_ok()
        })
        .map_err(|e| e.to_string())?;
        if !ok {
            return Err("total load changed".into());
        }
    }
    Ok(format!("{runs} runs"))
}

/// Flip, shift and domination couplings; `runs` runs of each.
pub fn couplings(runs: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = 60;
    for _ in 0..runs {
        let model = random_instance(&mut rng, 16);
        let n = model.n();
        let k = rng.random_range(1..40);
        let x = random_loads(&mut rng, n, k);
        let s: u64 = rng.random();
        let (orig, flipped) =
            coupled_flip_run(&x, k, &model, rounds, s).map_err(|e| e.to_string())?;
        if orig
            .iter()
            .zip(&flipped)
            .any(|(a, b)| a.complement(k).as_ref() != Ok(b))
        {
            return Err("flipped run is not K·1 − X".into());
        }

        let alpha = rng.random_range(1..20);
        let shifted = x.shifted(alpha).unwrap();
        let dominating = LoadVector::new(
            x.loads()
                .iter()
                .map(|v| v + rng.random_range(0..5))
                .collect(),
        )
        .unwrap();
        let trajectory = |start: &LoadVector| {
            let mut out = Vec::new();
            run(
                &mut StandardEngine::new(start.clone(), s),
                &model,
                rounds,
                |_, y| out.push(y.clone()),
            )
            .unwrap();
            out
        };
        let (base, up, dom) = (
            trajectory(&x),
            trajectory(&shifted),
            trajectory(&dominating),
        );
        if base
            .iter()
            .zip(&up)
            .any(|(a, b)| a.shifted(alpha).as_ref() != Ok(b))
        {
            return Err("shifted run does not differ by α·1".into());
        }
        if base
            .iter()
            .zip(&dom)
            .any(|(a, b)| a.loads().iter().zip(b.loads()).any(|(p, q)| p > q))
        {
            return Err("domination is not preserved".into());
        }
    }
    Ok(format!("{runs} runs of each coupling"))
}

/// Runs the height engine for at least `rounds` rounds in total, checking
/// that no height increases and that `Y` is non-increasing at every level.
pub fn height_monotonicity(rounds: u64, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0u64;
    let mut tokens_checked = 0u64;
    while done < rounds {
        let model = random_instance(&mut rng, 16);
        let x0 = random_loads(&mut rng, model.n(), 20);
        let len = 2_000.min(rounds - done);
        let levels: Vec<i64> = (0..=x0.max()).collect();
        let mut heights = HeightEngine::new(&x0, 0).tokens.heights().to_vec();
        let mut ys: Vec<i64> = levels.iter().map(|&l| y_at_level(x0.loads(), l)).collect();
        let mut violation = None;
        run(
            &mut HeightEngine::new(&x0, rng.random()),
            &model,
            len,
            |t, st| {
                for (h, &now) in heights.iter_mut().zip(st.heights()) {
                    if now > *h && violation.is_none() {
                        violation = Some(format!("height rose from {h} to {now} in round {t}"));
                    }
                    *h = now;
                }
                tokens_checked += st.token_count() as u64;
                let loads = st.loads();
                for (y, &l) in ys.iter_mut().zip(&levels) {
                    let now = y_at_level(&loads, l);
                    if now > *y && violation.is_none() {
                        violation = Some(format!(
                            "Y at level {l} rose from {y} to {now} in round {t}"
                        ));
                    }
                    *y = now;
                }
            },
        )
        .map_err(|e| e.to_string())?;
        if let Some(v) = violation {
            return Err(v);
        }
        done += len;
    }
    Ok(format!(
        "{done} rounds, {tokens_checked} token heights, zero violations"
    ))
}

/// Exact rounding-error decomposition on random runs with `n ≤ 16`, `t ≤ 64`.
pub fn rounding_identity(runs: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..runs {
        let model = random_instance(&mut rng, 16);
        let x0 = random_loads(&mut rng, model.n(), 50);
        let t = rng.random_range(1..=64);
        let mut eng = StandardEngine::new(x0.clone(), rng.random()).recording();
        run(&mut eng, &model, t, |_, _| {}).map_err(|e| e.to_string())?;
        let r = reconstruct_from_errors::<Dyadic>(&x0, &model, eng.trace.as_ref().unwrap(), t)
            .map_err(|e| e.to_string())?;
        if !r.is_exact() || r.final_loads != eng.loads {
            return Err(format!("run {i}: decomposition is not exact"));
        }
    }
    Ok(format!("{runs} runs exact"))
}

fn na_family(walk: bool) -> Result<String, String> {
    let s = exhaustive_family(4, 3, 4).map_err(|e| e.to_string())?;
    let (checks, failures) = if walk {
        (s.walk_checks, s.walk_failures)
    } else {
        (s.na_checks, s.na_failures)
    };
    if failures > 0 {
        return Err(format!(
            "{failures} of {checks} checks failed: {:?}",
            s.examples
        ));
    }
    Ok(format!("{} instances, {checks} checks", s.instances))
}

/// Potential identity and norm bounds on random stochastic `a` and schedules.
pub fn psi_draws(draws: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let model = random_instance(&mut rng, 32);
        let n = model.n();
        let mut a: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    rng.random::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        a[rng.random_range(0..n)] += 0.1;
        let sum: f64 = a.iter().sum();
        a.iter_mut().for_each(|x| *x /= sum);
        let t = rng.random_range(1..=50);
        let r = psi_identity_check(&a, &model, t);
        worst = worst.max(r.max_residual);
        if r.max_residual >= 1e-10 || !r.statement1_pass || !r.statement2_pass {
            return Err(format!("{r:?}"));
        }
    }
    Ok(format!("{draws} draws, worst residual {worst:e}"))
}

/// Lower gap of each run equals the upper gap of its flipped run, per round.
pub fn gap_symmetry(runs: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..runs {
        let model = random_instance(&mut rng, 16);
        let k = rng.random_range(1..30);
        let x = random_loads(&mut rng, model.n(), k);
        let (orig, flipped) =
            coupled_flip_run(&x, k, &model, 50, rng.random()).map_err(|e| e.to_string())?;
        if orig
            .iter()
            .zip(&flipped)
            .any(|(a, b)| gap_below(a) != gap_above(b))
        {
            return Err("gaps differ".into());
        }
    }
    Ok(format!("{runs} runs"))
}
