use serde::Serialize;

use crate::matrix::{row_dist_uniform_sq, row_norm_sq, AveragingMatrix};
use crate::schedule::ScheduleModel;

/// Per-round potential identity and the two summary bounds for one draw.
#[derive(Debug, Clone, Serialize)]
pub struct PsiCheck {
    pub max_residual: f64,
    /// `Σ_s Σ_{[u:v]} (Σ_k a_k (M^[s+1,t]_{u,k} − M^[s+1,t]_{v,k}))²`.
    pub statement1_sum: f64,
    pub statement1_bound: f64,
    pub statement1_pass: bool,
    /// `max_{t1} Σ_w (Σ_k a_k M^[t1+1,t]_{w,k})²`.
    pub statement2_max: f64,
    pub statement2_bound: f64,
    pub statement2_pass: bool,
}

fn psi(b: &[f64]) -> f64 {
    row_dist_uniform_sq(b)
}

/// Walks `s = t, …, 1` keeping `b = M^[s+1,t]·a`.
pub fn psi_identity_check(a: &[f64], model: &ScheduleModel, t: u64) -> PsiCheck {
    const TOL: f64 = 1e-12;
    let norm = row_norm_sq(a);
    let mut b = a.to_vec();
    let mut max_residual = 0.0f64;
    let mut statement1_sum = 0.0;
    let mut statement2_max = norm;
    let mut psi_s = psi(&b);
    for s in (1..=t).rev() {
        let pairs = model.matching(s).pairs;
        let drop: f64 = pairs.iter().map(|&(u, v)| (b[u] - b[v]).powi(2)).sum();
        statement1_sum += drop;
        for &(u, v) in &pairs {
            let mean = (b[u] + b[v]) / 2.0;
            b[u] = mean;
            b[v] = mean;
        }
        let psi_prev = psi(&b);
        max_residual = max_residual.max((psi_s - psi_prev - drop / 2.0).abs());
        statement2_max = statement2_max.max(row_norm_sq(&b));
        psi_s = psi_prev;
    }
    PsiCheck {
        max_residual,
        statement1_sum,
        statement1_bound: 2.0 * norm,
        statement1_pass: statement1_sum <= 2.0 * norm + TOL,
        statement2_max,
        statement2_bound: norm,
        statement2_pass: statement2_max <= norm + TOL,
    }
}

/// Row distances to uniform along `M^[1,t]`, `t = 1..=rounds`.
#[derive(Debug, Clone, Serialize)]
pub struct L2Check {
    pub rounds: u64,
    /// Largest `|‖row − 1/n‖² − (‖row‖² − 1/n)|` seen.
    pub max_identity_residual: f64,
    /// Largest one-round increase of any row's distance.
    pub max_increase: f64,
    pub monotone: bool,
}

pub fn l2_profile_check(model: &ScheduleModel, rounds: u64) -> L2Check {
    let n = model.n();
    let inv = 1.0 / n as f64;
    let mut m = AveragingMatrix::identity(n);
    let mut prev: Vec<f64> = m.rows().map(row_dist_uniform_sq).collect();
    let mut max_identity_residual = 0.0f64;
    let mut max_increase = f64::NEG_INFINITY;
    for t in 1..=rounds {
        m.right_apply_matching(&model.matching(t).pairs);
        for (u, row) in m.rows().enumerate() {
            let d = row_dist_uniform_sq(row);
            max_identity_residual = max_identity_residual.max((d - (row_norm_sq(row) - inv)).abs());
            max_increase = max_increase.max(d - prev[u]);
            prev[u] = d;
        }
    }
    L2Check {
        rounds,
        max_identity_residual,
        max_increase,
        monotone: max_increase <= 1e-12,
    }
}
