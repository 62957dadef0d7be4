use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{EngineKind, ExperimentConfig, GraphSpec, InitialSpec, ModelKind, RoundsSpec};
use super::HarnessError;
use crate::analysis::{above_avg, staircase_observed, y_at_level, StageVerdict, StaircasePlan};
use crate::graph::Graph;
use crate::process::{
    run, ContinuousEngine, FracLoadVector, HeightEngine, LoadVector, StandardEngine, TraceRecord,
};
use crate::rng::{derive_seed, CounterRng, Purpose};
use crate::schedule::{spectral_report, ScheduleModel};

/// Everything resolved from a config before trials start.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: Arc<Graph>,
    pub model: ScheduleModel,
    pub x0: LoadVector,
    pub k: i64,
    pub rounds: u64,
    pub plan: Option<StaircasePlan>,
    pub p_min: Option<f64>,
}

pub fn build_graph(spec: &GraphSpec) -> Result<Graph, HarnessError> {
    Ok(match spec {
        GraphSpec::Family(f) => Graph::build(f)?,
        GraphSpec::File(p) => Graph::parse(&read(p)?)?,
    })
}

fn read(p: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(p).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))
}

pub fn initial_loads(spec: &InitialSpec, n: usize) -> Result<LoadVector, HarnessError> {
    let loads = match spec {
        InitialSpec::Point { k } => {
            let mut v = vec![0; n];
            v[0] = *k;
            v
        }
        InitialSpec::TwoBlock { k } => (0..n)
            .map(|u| if u < n.div_ceil(2) { *k } else { 0 })
            .collect(),
        InitialSpec::Random { k, seed } => (0..n)
            .map(|u| {
                CounterRng::new(*seed, 0, u as u64, Purpose::Trial).below(*k as u64 + 1) as i64
            })
            .collect(),
        InitialSpec::Explicit { loads } => {
            if loads.len() != n {
                return Err(HarnessError::Invalid(format!(
                    "initial loads have length {}, graph has {n} nodes",
                    loads.len()
                )));
            }
            loads.clone()
        }
    };
    Ok(LoadVector::new(loads)?)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let graph = Arc::new(build_graph(&cfg.graph)?);
    let model = match cfg.model.kind {
        ModelKind::Circuit => ScheduleModel::circuit(graph.clone()),
        ModelKind::RandomMatching => ScheduleModel::random_matching(graph.clone(), cfg.seed),
        ModelKind::Async => ScheduleModel::async_edge(graph.clone(), cfg.seed),
        ModelKind::Replay => {
            let path = cfg.model.path.as_ref().expect("validated");
            ScheduleModel::replay_from_json(graph.clone(), &read(path)?)?
        }
    };
    let x0 = initial_loads(&cfg.initial, graph.n())?;
    let p_min = match cfg.model.measure_p_min {
        Some(r) => Some(model.measure_p_min(r)?.min),
        None => None,
    };
    let k = cfg.k;
    let (rounds, plan) = match cfg.rounds {
        RoundsSpec::Explicit(r) => (r, None),
        RoundsSpec::TauSpectral { multiplier } => (
            spectral_report(&model, k as f64, multiplier, p_min)?.tau_spectral,
            None,
        ),
        RoundsSpec::Staircase { multiplier } => {
            let plan = StaircasePlan::for_model(&model, k as f64, multiplier, p_min)?;
            (plan.final_round(), Some(plan))
        }
    };
    Ok(Prepared {
        graph,
        model,
        x0,
        k,
        rounds,
        plan,
        p_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quantiles {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((p * (v.len() - 1) as f64).round()) as usize];
        Self {
            min: v[0],
            p50: q(0.5),
            p90: q(0.9),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub round: u64,
    pub mean_disc: f64,
    pub max_disc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: &'static str,
    pub round: u64,
    pub threshold: f64,
    pub passed: usize,
    pub worst_observed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub trials: usize,
    pub rounds: u64,
    pub n: usize,
    pub k: i64,
    pub initial_disc: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    pub final_disc: Vec<f64>,
    pub quantiles: Quantiles,
    pub curves: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<StaircasePlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageSummary>>,
    /// Elapsed time; kept out of `summary.json` so reruns are byte-identical.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Trace line tagged with its trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialTraceRecord {
    pub trial: usize,
    #[serde(flatten)]
    pub record: TraceRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct FracTraceRecord {
    pub trial: usize,
    pub round: u64,
    pub disc: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone)]
pub enum TraceLine {
    Discrete(TrialTraceRecord),
    Continuous(FracTraceRecord),
}

impl TraceLine {
    fn round_disc(&self) -> (u64, f64) {
        match self {
            TraceLine::Discrete(r) => (r.record.round, r.record.disc as f64),
            TraceLine::Continuous(r) => (r.round, r.disc),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            TraceLine::Discrete(r) => serde_json::to_string(r),
            TraceLine::Continuous(r) => serde_json::to_string(r),
        }
        .expect("trace serialises")
    }
}

struct TrialResult {
    final_disc: f64,
    trace: Vec<TraceLine>,
    stages: Option<Vec<StageVerdict>>,
}

/// Summary plus the raw per-trial artefacts.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub trace: Vec<TraceLine>,
    pub stages: Vec<(usize, StageVerdict)>,
}

impl RunArtifacts {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serialises") + "\n"
    }

    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|l| l.to_json() + "\n").collect()
    }

    /// `trial,stage,round,threshold,observed,pass`.
    pub fn stages_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(["trial", "stage", "round", "threshold", "observed", "pass"])
            .expect("in-memory csv");
        for (trial, verdict) in &self.stages {
            w.write_record([
                trial.to_string(),
                verdict.stage.to_string(),
                verdict.round.to_string(),
                verdict.threshold.to_string(),
                verdict.observed.to_string(),
                verdict.pass.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Writes `summary.json`, `trace.jsonl` and, for staircase runs, `stages.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut written = vec![dir.join("summary.json"), dir.join("trace.jsonl")];
        fs::write(&written[0], self.summary_json()).map_err(io)?;
        fs::write(&written[1], self.trace_jsonl()).map_err(io)?;
        if self.summary.stages.is_some() {
            let p = dir.join("stages.csv");
            fs::write(&p, self.stages_csv()).map_err(io)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BAL_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            HarnessError::Invalid(format!("BAL_THREADS must be a positive integer, got {v:?}"))
        })?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| HarnessError::Invalid(e.to_string()))
}

fn discrete_record(trial: usize, round: u64, x: &LoadVector, level: Option<i64>) -> TraceLine {
    TraceLine::Discrete(TrialTraceRecord {
        trial,
        record: TraceRecord {
            round,
            disc: x.disc(),
            max: x.max(),
            min: x.min(),
            above_avg: above_avg(x).to_f64().unwrap_or(f64::NAN),
            y_count: level.map(|l| y_at_level(x.loads(), l)),
        },
    })
}

fn frac_record(trial: usize, round: u64, x: &FracLoadVector) -> TraceLine {
    let max = x.loads.iter().copied().fold(f64::MIN, f64::max);
    let min = x.loads.iter().copied().fold(f64::MAX, f64::min);
    TraceLine::Continuous(FracTraceRecord {
        trial,
        round,
        disc: max - min,
        max,
        min,
    })
}

fn run_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    trial: usize,
) -> Result<TrialResult, HarnessError> {
    let model = prep
        .model
        .with_seed(derive_seed(cfg.seed, trial as u64, Purpose::Schedule));
    let seed = derive_seed(cfg.seed, trial as u64, Purpose::Trial);
    let cadence = cfg.observers.cadence;
    let level = cfg.observers.y_level;
    let observed = |t: u64| t % cadence == 0 || t == prep.rounds;
    let mut trace = Vec::new();

    if let Some(plan) = &prep.plan {
        let report = staircase_observed(&model, &prep.x0, plan, seed, |t, x, is_stage| {
            if t == 0 || is_stage {
                trace.push(discrete_record(trial, t, x, level));
            }
        })?;
        return Ok(TrialResult {
            final_disc: report.final_disc as f64,
            trace,
            stages: Some(report.stages),
        });
    }

    let final_disc = match cfg.engine {
        EngineKind::Standard => {
            let mut eng = StandardEngine::new(prep.x0.clone(), seed);
            run(&mut eng, &model, prep.rounds, |t, x| {
                if observed(t) {
                    trace.push(discrete_record(trial, t, x, level));
                }
            })?;
            eng.loads.disc() as f64
        }
        EngineKind::Height => {
            let mut eng = HeightEngine::new(&prep.x0, seed);
            run(&mut eng, &model, prep.rounds, |t, s| {
                if observed(t) {
                    trace.push(discrete_record(trial, t, &s.load_vector(), level));
                }
            })?;
            eng.tokens.load_vector().disc() as f64
        }
        EngineKind::Continuous => {
            let mut eng = ContinuousEngine {
                loads: prep.x0.to_frac::<f64>(),
            };
            run(&mut eng, &model, prep.rounds, |t, x| {
                if observed(t) {
                    trace.push(frac_record(trial, t, x));
                }
            })?;
            let l = &eng.loads.loads;
            l.iter().copied().fold(f64::MIN, f64::max) - l.iter().copied().fold(f64::MAX, f64::min)
        }
    };
    Ok(TrialResult {
        final_disc,
        trace,
        stages: None,
    })
}

/// Runs every trial of `cfg`; output is independent of the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let start = Instant::now();
    let prep = prepare(cfg)?;
    let pool = thread_pool()?;
    let results: Vec<TrialResult> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &prep, i))
            .collect::<Result<_, _>>()
    })?;

    let final_disc: Vec<f64> = results.iter().map(|r| r.final_disc).collect();
    let mut by_round: std::collections::BTreeMap<u64, (f64, f64, usize)> = Default::default();
    for line in results.iter().flat_map(|r| &r.trace) {
        let (round, disc) = line.round_disc();
        let e = by_round.entry(round).or_insert((0.0, f64::MIN, 0));
        e.0 += disc;
        e.1 = e.1.max(disc);
        e.2 += 1;
    }
    let curves = by_round
        .into_iter()
        .map(|(round, (sum, max, count))| CurvePoint {
            round,
            mean_disc: sum / count as f64,
            max_disc: max,
        })
        .collect();

    let mut stage_rows = Vec::new();
    let stages = prep.plan.map(|_| {
        let mut agg: Vec<StageSummary> = Vec::new();
        for (trial, r) in results.iter().enumerate() {
            for v in r.stages.as_deref().unwrap_or_default() {
                stage_rows.push((trial, v.clone()));
                match agg.iter_mut().find(|s| s.stage == v.stage) {
                    Some(s) => {
                        s.passed += usize::from(v.pass);
                        s.worst_observed = s.worst_observed.max(v.observed);
                    }
                    None => agg.push(StageSummary {
                        stage: v.stage,
                        round: v.round,
                        threshold: v.threshold,
                        passed: usize::from(v.pass),
                        worst_observed: v.observed,
                    }),
                }
            }
        }
        agg
    });

    let summary = RunSummary {
        trials: cfg.trials,
        rounds: prep.rounds,
        n: prep.graph.n(),
        k: prep.k,
        initial_disc: prep.x0.disc(),
        p_min: prep.p_min,
        quantiles: Quantiles::of(&final_disc),
        final_disc,
        curves,
        plan: prep.plan,
        stages,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(RunArtifacts {
        summary,
        trace: results.into_iter().flat_map(|r| r.trace).collect(),
        stages: stage_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::load_config;

    fn cfg(extra: &str) -> ExperimentConfig {
        load_config(&format!(
            r#"{{"graph":{{"family":"cycle","n":6}},"model":"random_matching","initial":{{"kind":"point","K":30}}{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_rounds_keep_initial_disc() {
        let a = run_experiment(&cfg(r#","trials":1,"rounds":0"#)).unwrap();
        assert_eq!(a.summary.final_disc, vec![30.0]);
        assert_eq!(a.trace.len(), 1);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let c = cfg(r#","trials":4,"rounds":25,"observers":{"cadence":5,"y_level":5}"#);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.summary_json(), b.summary_json());
        assert_eq!(a.trace_jsonl(), b.trace_jsonl());
        assert_eq!(a.summary.trials, 4);
        assert_eq!(a.trace.len(), 4 * 6);
        assert!(a
            .trace_jsonl()
            .lines()
            .next()
            .unwrap()
            .contains("\"y_count\""));
    }

    #[test]
    fn engines_agree_on_conservation() {
        for engine in ["standard", "height", "continuous"] {
            let a = run_experiment(&cfg(&format!(
                r#","trials":2,"rounds":40,"engine":"{engine}""#
            )))
            .unwrap();
            assert!(a.summary.final_disc.iter().all(|d| *d <= 30.0), "{engine}");
        }
    }

    #[test]
    fn initial_kinds() {
        assert_eq!(
            initial_loads(&InitialSpec::Point { k: 5 }, 3)
                .unwrap()
                .loads(),
            &[5, 0, 0]
        );
        assert_eq!(
            initial_loads(&InitialSpec::TwoBlock { k: 2 }, 5)
                .unwrap()
                .loads(),
            &[2, 2, 2, 0, 0]
        );
        let r = initial_loads(&InitialSpec::Random { k: 4, seed: 1 }, 50).unwrap();
        assert!(r.loads().iter().all(|&x| (0..=4).contains(&x)));
        assert!(initial_loads(&InitialSpec::Explicit { loads: vec![1] }, 2).is_err());
    }

    #[test]
    fn staircase_run_writes_stage_csv() {
        let c = load_config(
            r#"{"graph":{"family":"hypercube","d":4},"model":"circuit","initial":{"kind":"point","K":64},
                "rounds":{"kind":"staircase","multiplier":1},"trials":2}"#,
        )
        .unwrap();
        let a = run_experiment(&c).unwrap();
        let stages = a.summary.stages.as_ref().unwrap();
        assert_eq!(stages.len(), 7);
        let dir = tempfile::tempdir().unwrap();
        let files = a.write_to(dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(dir.path().join("stages.csv")).unwrap();
        assert!(csv.starts_with("trial,stage,round,threshold,observed,pass\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * 7);
    }
}
