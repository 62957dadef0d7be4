//! Load metrics, statistical bound checks and exhaustive small-instance oracles.

mod oracle;
mod potential;
mod staircase;
mod tail;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::process::{LoadVector, ProcessError};

pub use oracle::{
    collision_exact, connected_graphs, enumerate_outcomes, exhaustive_family, na_oracle,
    walk_law_oracle, FamilySummary, NaResult, OracleInstance, Outcome, WalkLaw, BIT_BUDGET,
};
pub use potential::{l2_profile_check, psi_identity_check, L2Check, PsiCheck};
pub use staircase::{
    staircase_observed, staircase_report, StageVerdict, StaircasePlan, StaircaseReport,
};
pub use tail::{collision_bound_check, hoeffding_check, CollisionCheck, TailCheck};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("enumeration needs more than the {budget}-bit budget of random choices")]
    BitBudget { budget: u32 },
    #[error(
        "smoothing precondition fails: worst-case discrepancy {worst_disc} exceeds kappa = {kappa}"
    )]
    SmoothingPrecondition { worst_disc: f64, kappa: f64 },
    #[error("node {0} holds no token")]
    NoTokenOnNode(usize),
    #[error("coefficients must be nonnegative and sum to 1")]
    NotStochastic,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Spectral(#[from] crate::schedule::SpectralError),
}

fn ratio_as_f64<S: Serializer>(r: &Ratio<i128>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(r.to_f64().unwrap_or(f64::NAN))
}

/// Summary statistics of one load vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub disc: i64,
    pub max: i64,
    pub min: i64,
    #[serde(serialize_with = "ratio_as_f64")]
    pub above_avg: Ratio<i128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_at_level: Option<i64>,
}

pub fn metrics(x: &LoadVector, level: Option<i64>) -> Metrics {
    Metrics {
        disc: x.disc(),
        max: x.max(),
        min: x.min(),
        above_avg: above_avg(x),
        y_at_level: level.map(|l| y_at_level(x.loads(), l)),
    }
}

/// `Σ_w max(X_w − x̄, 0)` with exact `x̄`.
pub fn above_avg(x: &LoadVector) -> Ratio<i128> {
    let avg = x.average();
    x.loads()
        .iter()
        .map(|&v| Ratio::from_integer(i128::from(v)) - avg)
        .filter(|d| *d > Ratio::from_integer(0))
        .sum()
}

/// `Σ_u max(X_u − level, 0)`.
pub fn y_at_level(loads: &[i64], level: i64) -> i64 {
    loads.iter().map(|&x| (x - level).max(0)).sum()
}

/// `⌊x̄⌋ − min X`.
pub fn gap_below(x: &LoadVector) -> i64 {
    x.average().floor().to_integer() as i64 - x.min()
}

/// `max X − ⌈x̄⌉`.
pub fn gap_above(x: &LoadVector) -> i64 {
    x.max() - x.average().ceil().to_integer() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[i64]) -> LoadVector {
        LoadVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn metric_examples() {
        assert_eq!(metrics(&lv(&[5, 2, 2, 3]), None).disc, 3);
        assert_eq!(above_avg(&lv(&[4, 0, 0, 0])), Ratio::from_integer(3));
        assert_eq!(y_at_level(&[3, 1, 0], 2), 1);
        assert_eq!(above_avg(&lv(&[1, 0, 0])), Ratio::new(2, 3));
        let m = metrics(&lv(&[3, 1, 0]), Some(2));
        assert_eq!(m.y_at_level, Some(1));
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"disc":3,"max":3,"min":0,"above_avg":1.6666666666666667,"y_at_level":1}"#
        );
    }

    #[test]
    fn gaps() {
        let x = lv(&[5, 0, 1]);
        assert_eq!(gap_below(&x), 2);
        assert_eq!(gap_above(&x), 3);
        assert_eq!(gap_above(&x.complement(5).unwrap()), gap_below(&x));
    }
}
