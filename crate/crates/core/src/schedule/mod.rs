//! Matching schedules: balancing circuits, random matchings, the asynchronous
//! single-edge model, and replayed sequences.

mod mixing;
mod spectral;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::Scalar;
use crate::graph::{edge_color, EdgeColoring, Graph};
use crate::matrix::{AveragingMatrix, DenseMatrix};
use crate::rng::{CounterRng, Purpose};

pub use mixing::{
    check_goodness, check_smoothing, estimate_goodness, smoothing_worst_disc, GoodnessReport,
    SmoothingResult,
};
pub use spectral::{
    diffusion_matrix, lambda, spectral_report, tau_spectral, SpectralError, SpectralReport,
    TauInputs, TauKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("round {round}: {{{u}, {v}}} is not an edge of the graph")]
    NotAnEdge { round: usize, u: usize, v: usize },
    #[error("round {round}: node {node} appears in two pairs")]
    NotAMatching { round: usize, node: usize },
    #[error("inclusion frequencies are only defined for random schedules, not {0}")]
    NotRandom(&'static str),
    #[error("invalid replay document: {0}")]
    Replay(String),
}

/// Node-disjoint edges balanced in one round. Pairs are `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub round: u64,
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn new(round: u64, pairs: Vec<(usize, usize)>) -> Self {
        Self { round, pairs }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs are disjoint, canonical (`u < v`) and below `n`.
    pub fn is_valid_for(&self, n: usize) -> bool {
        let mut used = vec![false; n];
        self.pairs.iter().all(|&(u, v)| {
            let ok = u < v && v < n && !used[u] && !used[v];
            if ok {
                used[u] = true;
                used[v] = true;
            }
            ok
        })
    }

    pub fn matrix(&self, n: usize) -> AveragingMatrix {
        AveragingMatrix::from_matching(n, &self.pairs)
    }
}

/// How the matching sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// Periodic sequence of the coloring classes.
    Circuit(EdgeColoring),
    /// Every node proposes to a uniform neighbour; mutual proposals are matched.
    RandomMatching { seed: u64 },
    /// One uniformly random edge per round.
    AsyncEdge { seed: u64 },
    /// Stored rounds; rounds past the end are empty.
    Replay(Vec<Vec<(usize, usize)>>),
}

/// A matching sequence bound to its graph.
#[derive(Debug, Clone)]
pub struct ScheduleModel {
    graph: Arc<Graph>,
    kind: ScheduleKind,
}

impl ScheduleModel {
    /// Balancing circuit from the graph's edge coloring.
    pub fn circuit(graph: Arc<Graph>) -> Self {
        let coloring = edge_color(&graph);
        Self {
            graph,
            kind: ScheduleKind::Circuit(coloring),
        }
    }

    pub fn circuit_with(graph: Arc<Graph>, coloring: EdgeColoring) -> Result<Self, ScheduleError> {
        Self::validate_rounds(&graph, &coloring.classes)?;
        Ok(Self {
            graph,
            kind: ScheduleKind::Circuit(coloring),
        })
    }

    pub fn random_matching(graph: Arc<Graph>, seed: u64) -> Self {
        Self {
            graph,
            kind: ScheduleKind::RandomMatching { seed },
        }
    }

    pub fn async_edge(graph: Arc<Graph>, seed: u64) -> Self {
        Self {
            graph,
            kind: ScheduleKind::AsyncEdge { seed },
        }
    }

    pub fn replay(
        graph: Arc<Graph>,
        rounds: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self, ScheduleError> {
        let rounds: Vec<Vec<(usize, usize)>> = rounds
            .into_iter()
            .map(|r| r.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect())
            .collect();
        Self::validate_rounds(&graph, &rounds)?;
        Ok(Self {
            graph,
            kind: ScheduleKind::Replay(rounds),
        })
    }

    /// Parses a replay document: a JSON array of rounds, each an array of `[u, v]` pairs.
    pub fn replay_from_json(graph: Arc<Graph>, text: &str) -> Result<Self, ScheduleError> {
        let rounds: Vec<Vec<[usize; 2]>> =
            serde_json::from_str(text).map_err(|e| ScheduleError::Replay(e.to_string()))?;
        Self::replay(
            graph,
            rounds
                .into_iter()
                .map(|r| r.into_iter().map(|[u, v]| (u, v)).collect())
                .collect(),
        )
    }

    fn validate_rounds(graph: &Graph, rounds: &[Vec<(usize, usize)>]) -> Result<(), ScheduleError> {
        for (i, pairs) in rounds.iter().enumerate() {
            let mut used = vec![false; graph.n()];
            for &(u, v) in pairs {
                if !graph.has_edge(u, v) {
                    return Err(ScheduleError::NotAnEdge { round: i + 1, u, v });
                }
                for w in [u, v] {
                    if used[w] {
                        return Err(ScheduleError::NotAMatching {
                            round: i + 1,
                            node: w,
                        });
                    }
                    used[w] = true;
                }
            }
        }
        Ok(())
    }

    /// Records rounds `1..=rounds` of this schedule as a replay.
    pub fn realize(&self, rounds: u64) -> Self {
        Self {
            graph: self.graph.clone(),
            kind: ScheduleKind::Replay((1..=rounds).map(|t| self.matching(t).pairs).collect()),
        }
    }

    /// Replay rounds as the JSON document accepted by [`Self::replay_from_json`].
    pub fn replay_to_json(&self, rounds: u64) -> String {
        let doc: Vec<Vec<[usize; 2]>> = (1..=rounds)
            .map(|t| {
                self.matching(t)
                    .pairs
                    .into_iter()
                    .map(|(u, v)| [u, v])
                    .collect()
            })
            .collect();
        serde_json::to_string(&doc).expect("replay serialises")
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScheduleKind::Circuit(_) => "circuit",
            ScheduleKind::RandomMatching { .. } => "random_matching",
            ScheduleKind::AsyncEdge { .. } => "async",
            ScheduleKind::Replay(_) => "replay",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(
            self.kind,
            ScheduleKind::RandomMatching { .. } | ScheduleKind::AsyncEdge { .. }
        )
    }

    /// The Δ that enters the round bounds: the number of coloring classes for
    /// circuits, the maximum degree otherwise.
    pub fn delta(&self) -> usize {
        match &self.kind {
            ScheduleKind::Circuit(c) => c.width(),
            _ => self.graph.max_degree(),
        }
    }

    /// Same schedule family with a different seed (no-op for deterministic kinds).
    pub fn with_seed(&self, seed: u64) -> Self {
        let kind = match &self.kind {
            ScheduleKind::RandomMatching { .. } => ScheduleKind::RandomMatching { seed },
            ScheduleKind::AsyncEdge { .. } => ScheduleKind::AsyncEdge { seed },
            other => other.clone(),
        };
        Self {
            graph: self.graph.clone(),
            kind,
        }
    }

    /// Matching of round `round ≥ 1`. Random kinds are a pure function of
    /// `(seed, round)`.
    pub fn matching(&self, round: u64) -> Matching {
        assert!(round >= 1, "rounds are numbered from 1");
        let pairs = match &self.kind {
            ScheduleKind::Circuit(c) => {
                let width = c.width() as u64;
                if width == 0 {
                    Vec::new()
                } else {
                    c.classes[((round - 1) % width) as usize].clone()
                }
            }
            ScheduleKind::RandomMatching { seed } => self.mutual_proposals(*seed, round),
            ScheduleKind::AsyncEdge { seed } => {
                let m = self.graph.edge_count() as u64;
                let idx = CounterRng::new(*seed, round, 0, Purpose::AsyncEdge).below(m);
                vec![self.graph.edges()[idx as usize]]
            }
            ScheduleKind::Replay(rounds) => rounds
                .get((round - 1) as usize)
                .cloned()
                .unwrap_or_default(),
        };
        Matching { round, pairs }
    }

    fn mutual_proposals(&self, seed: u64, round: u64) -> Vec<(usize, usize)> {
        let g = &*self.graph;
        let proposal: Vec<usize> = (0..g.n())
            .map(|u| {
                let nb = g.neighbors(u);
                let k = CounterRng::new(seed, round, u as u64, Purpose::Proposal)
                    .below(nb.len() as u64);
                nb[k as usize]
            })
            .collect();
        (0..g.n())
            .filter_map(|u| {
                let v = proposal[u];
                (u < v && proposal[v] == u).then_some((u, v))
            })
            .collect()
    }

    /// Sequential cursor starting at round 1.
    pub fn stream(&self) -> ScheduleStream<'_> {
        ScheduleStream {
            model: self,
            next_round: 1,
        }
    }

    /// Exact probability that edge `{u, v}` is in a round's matching, for random kinds.
    pub fn inclusion_probability(&self, u: usize, v: usize) -> Option<f64> {
        match self.kind {
            ScheduleKind::RandomMatching { .. } => {
                Some(1.0 / (self.graph.degree(u) as f64 * self.graph.degree(v) as f64))
            }
            ScheduleKind::AsyncEdge { .. } => Some(1.0 / self.graph.edge_count() as f64),
            _ => None,
        }
    }

    /// Smallest exact per-edge inclusion probability, for random kinds.
    pub fn p_min(&self) -> Option<f64> {
        self.graph
            .edges()
            .iter()
            .map(|&(u, v)| self.inclusion_probability(u, v))
            .try_fold(f64::INFINITY, |acc, p| p.map(|p| acc.min(p)))
    }

    /// Empirical per-edge inclusion frequencies over rounds `1..=rounds`.
    pub fn measure_p_min(&self, rounds: u64) -> Result<InclusionFrequencies, ScheduleError> {
        if !self.is_random() {
            return Err(ScheduleError::NotRandom(self.kind_name()));
        }
        let g = &*self.graph;
        let mut counts = std::collections::HashMap::with_capacity(g.edge_count());
        for t in 1..=rounds {
            for e in self.matching(t).pairs {
                *counts.entry(e).or_insert(0u64) += 1;
            }
        }
        let edges: Vec<EdgeFrequency> = g
            .edges()
            .iter()
            .map(|&(u, v)| EdgeFrequency {
                u,
                v,
                frequency: counts.get(&(u, v)).copied().unwrap_or(0) as f64 / rounds as f64,
            })
            .collect();
        let min = edges
            .iter()
            .map(|e| e.frequency)
            .fold(f64::INFINITY, f64::min);
        Ok(InclusionFrequencies { rounds, edges, min })
    }

    /// `M^[t1,t2]`; the identity when `t1 > t2`.
    pub fn window_product(&self, t1: u64, t2: u64) -> AveragingMatrix {
        self.window_product_in::<f64>(t1, t2)
    }

    /// `M^[t1,t2]` over any scalar (e.g. exact dyadics).
    pub fn window_product_in<T: Scalar>(&self, t1: u64, t2: u64) -> DenseMatrix<T> {
        assert!(t1 >= 1, "rounds are numbered from 1");
        let mut m = DenseMatrix::<T>::identity(self.n());
        for t in t1..=t2 {
            m.right_apply_matching(&self.matching(t).pairs);
        }
        m
    }
}

/// Iterator-style access to consecutive matchings.
#[derive(Debug, Clone)]
pub struct ScheduleStream<'a> {
    model: &'a ScheduleModel,
    next_round: u64,
}

impl ScheduleStream<'_> {
    pub fn next_matching(&mut self) -> Matching {
        let m = self.model.matching(self.next_round);
        self.next_round += 1;
        m
    }

    pub fn round(&self) -> u64 {
        self.next_round - 1
    }
}

impl Iterator for ScheduleStream<'_> {
    type Item = Matching;
    fn next(&mut self) -> Option<Matching> {
        Some(self.next_matching())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeFrequency {
    pub u: usize,
    pub v: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionFrequencies {
    pub rounds: u64,
    pub edges: Vec<EdgeFrequency>,
    /// Smallest observed frequency; the measured `p_min`.
    pub min: f64,
}
