//! Configuration, experiment orchestration and artefact output.

pub mod config;
mod experiment;
pub mod suites;

use serde::Serialize;

use crate::analysis::AnalysisError;
use crate::graph::GraphError;
use crate::process::ProcessError;
use crate::schedule::{ScheduleError, SpectralError};

pub use config::{
    load_config, parse_config, ConfigError, EngineKind, ExperimentConfig, GraphSpec, InitialSpec,
    ModelKind, ModelSpec, Observers, RoundsSpec,
};
pub use experiment::{
    build_graph, initial_loads, prepare, run_experiment, CurvePoint, FracTraceRecord, Prepared,
    Quantiles, RunArtifacts, RunSummary, StageSummary, TraceLine, TrialTraceRecord,
};
pub use suites::{find_suite, Suite, SuiteOutcome, SUITES};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
}

impl HarnessError {
    /// Whether the error comes from the user's input rather than a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_) | HarnessError::UnknownSuite(_) | HarnessError::Invalid(_)
        )
    }
}

/// Runs one named suite, or all of them.
pub fn verify(suite: Option<&str>) -> Result<Vec<(&'static str, SuiteOutcome)>, HarnessError> {
    let chosen: Vec<&Suite> = match suite {
        Some(name) => {
            vec![find_suite(name).ok_or_else(|| HarnessError::UnknownSuite(name.to_string()))?]
        }
        None => SUITES.iter().collect(),
    };
    Ok(chosen.into_iter().map(|s| (s.name, (s.run)())).collect())
}

/// Axes of a sweep; an empty axis keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub multipliers: Vec<f64>,
    pub ks: Vec<i64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub multiplier: Option<f64>,
    pub k: i64,
    pub seed: u64,
    pub rounds: u64,
    pub final_disc_max: f64,
    pub final_disc_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages_pass: Option<bool>,
}

fn with_k(initial: &InitialSpec, k: i64) -> InitialSpec {
    match initial {
        InitialSpec::Point { .. } => InitialSpec::Point { k },
        InitialSpec::TwoBlock { .. } => InitialSpec::TwoBlock { k },
        InitialSpec::Random { seed, .. } => InitialSpec::Random { k, seed: *seed },
        InitialSpec::Explicit { loads } => InitialSpec::Explicit {
            loads: loads.clone(),
        },
    }
}

/// Every combination of the grid applied to `base`, one run each.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>, HarnessError> {
    let base_mult = match base.rounds {
        RoundsSpec::TauSpectral { multiplier } | RoundsSpec::Staircase { multiplier } => {
            Some(multiplier)
        }
        RoundsSpec::Explicit(_) => None,
    };
    let mults: Vec<Option<f64>> = if grid.multipliers.is_empty() || base_mult.is_none() {
        vec![base_mult]
    } else {
        grid.multipliers.iter().map(|&m| Some(m)).collect()
    };
    let ks = if grid.ks.is_empty() {
        vec![base.k]
    } else {
        grid.ks.clone()
    };
    let seeds = if grid.seeds.is_empty() {
        vec![base.seed]
    } else {
        grid.seeds.clone()
    };

    let mut rows = Vec::new();
    for &m in &mults {
        for &k in &ks {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.rounds = match (base.rounds, m) {
                    (RoundsSpec::TauSpectral { .. }, Some(multiplier)) => {
                        RoundsSpec::TauSpectral { multiplier }
                    }
                    (RoundsSpec::Staircase { .. }, Some(multiplier)) => {
                        RoundsSpec::Staircase { multiplier }
                    }
                    (r, _) => r,
                };
                cfg.k = k;
                cfg.initial = with_k(&base.initial, k);
                cfg.seed = seed;
                cfg.out = None;
                let s = run_experiment(&cfg)?.summary;
                rows.push(SweepRow {
                    multiplier: m,
                    k,
                    seed,
                    rounds: s.rounds,
                    final_disc_max: s.quantiles.max,
                    final_disc_mean: s.quantiles.mean,
                    stages_pass: s
                        .stages
                        .as_ref()
                        .map(|st| st.iter().all(|v| v.passed == s.trials)),
                });
            }
        }
    }
    Ok(rows)
}
