//! Balancing engines: continuous averaging, the standard randomized-rounding
//! process, and the height-sensitive token process.

mod couplings;
mod height;
mod rounding;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::Scalar;
use crate::rng::{edge_stream, CounterRng, Purpose};
use crate::schedule::{Matching, ScheduleModel};

pub use couplings::coupled_flip_run;
pub use height::{pair_choice_count, step_height, TokenState};
pub use rounding::{reconstruct_from_errors, Reconstruction, RoundingEntry, RoundingTrace};

/// Loads are kept below this total so sums of two loads never overflow.
pub const MAX_TOTAL: i64 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProcessError {
    #[error("node {node} has negative load {load}")]
    NegativeLoad { node: usize, load: i64 },
    #[error("total load must stay below 2^62")]
    Overflow,
    #[error("matching pair ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: usize, v: usize, n: usize },
    #[error("K = {k} is smaller than the maximum load {max}")]
    KTooSmall { k: i64, max: i64 },
    #[error("rounding trace does not match the schedule: {0}")]
    ScheduleMismatch(String),
}

/// Integer token counts per node with a cached total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LoadVector {
    loads: Vec<i64>,
    #[serde(skip)]
    total: i64,
}

impl LoadVector {
    pub fn new(loads: Vec<i64>) -> Result<Self, ProcessError> {
        let mut total: i64 = 0;
        for (node, &load) in loads.iter().enumerate() {
            if load < 0 {
                return Err(ProcessError::NegativeLoad { node, load });
            }
            total = total
                .checked_add(load)
                .filter(|t| *t < MAX_TOTAL)
                .ok_or(ProcessError::Overflow)?;
        }
        Ok(Self { loads, total })
    }

    pub fn uniform(n: usize, value: i64) -> Result<Self, ProcessError> {
        Self::new(vec![value; n])
    }

    pub fn loads(&self) -> &[i64] {
        &self.loads
    }

    pub fn into_loads(self) -> Vec<i64> {
        self.loads
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn total(&self) -> i64 {
        self.total
    }

    /// Exact average `x̄`.
    pub fn average(&self) -> Ratio<i128> {
        Ratio::new(i128::from(self.total), self.loads.len().max(1) as i128)
    }

    pub fn max(&self) -> i64 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> i64 {
        self.loads.iter().copied().min().unwrap_or(0)
    }

    pub fn disc(&self) -> i64 {
        self.max() - self.min()
    }

    /// `x + alpha·1`.
    pub fn shifted(&self, alpha: i64) -> Result<Self, ProcessError> {
        Self::new(self.loads.iter().map(|x| x + alpha).collect())
    }

    /// `k·1 − x`.
    pub fn complement(&self, k: i64) -> Result<Self, ProcessError> {
        if k < self.max() {
            return Err(ProcessError::KTooSmall { k, max: self.max() });
        }
        Self::new(self.loads.iter().map(|x| k - x).collect())
    }

    pub fn to_frac<T: Scalar>(&self) -> FracLoadVector<T> {
        FracLoadVector {
            loads: self.loads.iter().map(|&x| T::from_i64(x)).collect(),
        }
    }
}

/// Divisible loads for the continuous process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FracLoadVector<T = f64> {
    pub loads: Vec<T>,
}

impl<T: Scalar> FracLoadVector<T> {
    pub fn new(loads: Vec<T>) -> Self {
        Self { loads }
    }

    pub fn total(&self) -> T {
        self.loads.iter().cloned().fold(T::zero(), |a, b| a + b)
    }
}

fn check_pairs(n: usize, m: &Matching) -> Result<(), ProcessError> {
    match m.pairs.iter().find(|&&(u, v)| u >= n || v >= n) {
        Some(&(u, v)) => Err(ProcessError::NodeOutOfRange { u, v, n }),
        None => Ok(()),
    }
}

/// Orientation of `{u, v}` in `round`: `+1` gives the ceil to the smaller id.
pub fn orientation(seed: u64, round: u64, u: usize, v: usize) -> i8 {
    let (a, b) = (u.min(v), u.max(v));
    if CounterRng::new(seed, round, edge_stream(a, b), Purpose::Orientation).coin() {
        1
    } else {
        -1
    }
}

/// One round of the standard process. With `flip` every orientation is negated.
pub fn step_standard(
    x: &mut LoadVector,
    m: &Matching,
    seed: u64,
    flip: bool,
    mut trace: Option<&mut RoundingTrace>,
) -> Result<(), ProcessError> {
    check_pairs(x.n(), m)?;
    for &(p, q) in &m.pairs {
        let (u, v) = (p.min(q), p.max(q));
        let mut phi = orientation(seed, m.round, u, v);
        if flip {
            phi = -phi;
        }
        let s = x.loads[u] + x.loads[v];
        let (lo, hi) = (s / 2, s - s / 2);
        if phi > 0 {
            x.loads[u] = hi;
            x.loads[v] = lo;
        } else {
            x.loads[u] = lo;
            x.loads[v] = hi;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.entries.push(RoundingEntry {
                round: m.round,
                u,
                v,
                phi,
                odd: s % 2 == 1,
            });
        }
    }
    Ok(())
}

/// One round of the continuous process: matched pairs move to their mean.
pub fn step_continuous<T: Scalar>(xi: &mut FracLoadVector<T>, m: &Matching) {
    for &(u, v) in &m.pairs {
        let mean = (xi.loads[u].clone() + xi.loads[v].clone()).half();
        xi.loads[u] = mean.clone();
        xi.loads[v] = mean;
    }
}

/// A balancing process advanced one matching at a time.
pub trait Engine {
    type State;
    fn state(&self) -> &Self::State;
    fn step(&mut self, m: &Matching) -> Result<(), ProcessError>;
}

#[derive(Debug, Clone)]
pub struct StandardEngine {
    pub loads: LoadVector,
    pub seed: u64,
    pub flip: bool,
    pub trace: Option<RoundingTrace>,
}

impl StandardEngine {
    pub fn new(loads: LoadVector, seed: u64) -> Self {
        Self {
            loads,
            seed,
            flip: false,
            trace: None,
        }
    }

    pub fn flipped(mut self) -> Self {
        self.flip = true;
        self
    }

    pub fn recording(mut self) -> Self {
        self.trace = Some(RoundingTrace::default());
        self
    }
}

impl Engine for StandardEngine {
    type State = LoadVector;
    fn state(&self) -> &LoadVector {
        &self.loads
    }
    fn step(&mut self, m: &Matching) -> Result<(), ProcessError> {
        step_standard(
            &mut self.loads,
            m,
            self.seed,
            self.flip,
            self.trace.as_mut(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousEngine<T = f64> {
    pub loads: FracLoadVector<T>,
}

impl<T: Scalar> Engine for ContinuousEngine<T> {
    type State = FracLoadVector<T>;
    fn state(&self) -> &FracLoadVector<T> {
        &self.loads
    }
    fn step(&mut self, m: &Matching) -> Result<(), ProcessError> {
        check_pairs(self.loads.loads.len(), m)?;
        step_continuous(&mut self.loads, m);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HeightEngine {
    pub tokens: TokenState,
    pub seed: u64,
}

impl HeightEngine {
    pub fn new(x: &LoadVector, seed: u64) -> Self {
        Self {
            tokens: TokenState::new(x),
            seed,
        }
    }
}

impl Engine for HeightEngine {
    type State = TokenState;
    fn state(&self) -> &TokenState {
        &self.tokens
    }
    fn step(&mut self, m: &Matching) -> Result<(), ProcessError> {
        check_pairs(self.tokens.n(), m)?;
        step_height(&mut self.tokens, m, self.seed);
        Ok(())
    }
}

/// Applies rounds `first..=last` of `model`, calling `observe` after each round.
pub fn run_rounds<E: Engine>(
    engine: &mut E,
    model: &ScheduleModel,
    first: u64,
    last: u64,
    mut observe: impl FnMut(u64, &E::State),
) -> Result<(), ProcessError> {
    for t in first..=last {
        engine.step(&model.matching(t))?;
        observe(t, engine.state());
    }
    Ok(())
}

/// Rounds `1..=rounds`; `observe` also sees the initial state as round 0.
pub fn run<E: Engine>(
    engine: &mut E,
    model: &ScheduleModel,
    rounds: u64,
    mut observe: impl FnMut(u64, &E::State),
) -> Result<(), ProcessError> {
    observe(0, engine.state());
    run_rounds(engine, model, 1, rounds, observe)
}

/// One line of a JSONL run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: u64,
    pub disc: i64,
    pub max: i64,
    pub min: i64,
    pub above_avg: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y_count: Option<i64>,
}
