use rayon::prelude::*;
use serde::Serialize;

use super::AnalysisError;
use crate::matrix::row_norm_sq;
use crate::process::{run_rounds, HeightEngine, LoadVector, StandardEngine};
use crate::rng::{derive_seed, Purpose};
use crate::schedule::{check_smoothing, ScheduleModel};

/// Empirical tails of `|Σ a_w X_w − x̄|` against the analytic bound.
#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub a: Vec<f64>,
    pub kappa: f64,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub empirical: Vec<f64>,
    pub bound: Vec<f64>,
    pub sigma: Vec<f64>,
    pub pass: bool,
}

/// `2·exp(−(δ−κ)²/(4‖a‖²))` for `δ > κ`; the statement is vacuous otherwise.
pub fn tail_bound(delta: f64, kappa: f64, a_norm_sq: f64) -> f64 {
    if delta <= kappa {
        2.0
    } else {
        2.0 * (-(delta - kappa).powi(2) / (4.0 * a_norm_sq)).exp()
    }
}

fn check_stochastic(a: &[f64]) -> Result<(), AnalysisError> {
    let sum: f64 = a.iter().sum();
    if a.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-12 {
        return Err(AnalysisError::NotStochastic);
    }
    Ok(())
}

/// Runs `trials` standard processes over the first `t` rounds of `model`
/// (matchings fixed, rounding varies per trial) and compares tails.
#[allow(clippy::too_many_arguments)]
pub fn hoeffding_check(
    model: &ScheduleModel,
    x0: &LoadVector,
    t: u64,
    a: &[f64],
    kappa: f64,
    deltas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<TailCheck, AnalysisError> {
    check_stochastic(a)?;
    if a.len() != x0.n() {
        return Err(AnalysisError::InvalidInstance(
            "coefficient vector length differs from n".into(),
        ));
    }
    let smooth = check_smoothing(model, t, x0.disc() as f64, kappa);
    if !smooth.pass {
        return Err(AnalysisError::SmoothingPrecondition {
            worst_disc: smooth.worst_disc,
            kappa,
        });
    }
    let fixed = model.realize(t);
    let mean = x0.total() as f64 / x0.n() as f64;
    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut eng =
                StandardEngine::new(x0.clone(), derive_seed(seed, i as u64, Purpose::Trial));
            run_rounds(&mut eng, &fixed, 1, t, |_, _| {}).expect("validated schedule");
            let s: f64 = a
                .iter()
                .zip(eng.loads.loads())
                .map(|(w, &x)| w * x as f64)
                .sum();
            (s - mean).abs()
        })
        .collect();
    let norm = row_norm_sq(a);
    let mut empirical = Vec::new();
    let mut bound = Vec::new();
    let mut sigma = Vec::new();
    let mut pass = true;
    for &d in deltas {
        let e = deviations.iter().filter(|&&v| v >= d).count() as f64 / trials as f64;
        let b = tail_bound(d, kappa, norm);
        let p = b.min(1.0);
        let s = (p * (1.0 - p) / trials as f64).sqrt();
        pass &= e <= b + 3.0 * s;
        empirical.push(e);
        bound.push(b);
        sigma.push(s);
    }
    Ok(TailCheck {
        a: a.to_vec(),
        kappa,
        deltas: deltas.to_vec(),
        trials,
        empirical,
        bound,
        sigma,
        pass,
    })
}

/// Empirical collisions of the top token on `u` over one window against the
/// analytic right-hand side.
#[derive(Debug, Clone, Serialize)]
pub struct CollisionCheck {
    pub token: u32,
    pub trials: usize,
    pub empirical_mean: f64,
    pub sigma: f64,
    pub rhs: f64,
    pub coefficients: Vec<f64>,
    pub pass: bool,
}

/// Height process from `x` over rounds `start+1..=start+window` of `model`.
/// The tracked token is the top token on `u` in the canonical numbering.
#[allow(clippy::too_many_arguments)]
pub fn collision_bound_check(
    model: &ScheduleModel,
    x: &LoadVector,
    start: u64,
    u: usize,
    window: u64,
    trials: usize,
    seed: u64,
) -> Result<CollisionCheck, AnalysisError> {
    if x.loads()[u] == 0 {
        return Err(AnalysisError::NoTokenOnNode(u));
    }
    let fixed = model.realize(start + window);
    let token = HeightEngine::new(x, 0)
        .tokens
        .stack(u)
        .last()
        .copied()
        .expect("non-empty stack");
    let zs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut eng = HeightEngine::new(x, derive_seed(seed, i as u64, Purpose::Trial));
            run_rounds(&mut eng, &fixed, start + 1, start + window, |_, _| {})
                .expect("validated schedule");
            let s = &eng.tokens;
            (s.load(s.location(token)) - 1) as f64
        })
        .collect();
    let m = fixed.window_product(start + 1, start + window);
    let n = x.n();
    let coefficients: Vec<f64> = (0..n)
        .map(|w| (0..n).map(|v| m.get(u, v) * m.get(w, v)).sum())
        .collect();
    let rhs: f64 = coefficients
        .iter()
        .zip(x.loads())
        .map(|(a, &l)| a * l as f64)
        .sum();
    let mean = zs.iter().sum::<f64>() / trials as f64;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (trials.max(2) - 1) as f64;
    let sigma = (var / trials as f64).sqrt();
    Ok(CollisionCheck {
        token,
        trials,
        empirical_mean: mean,
        sigma,
        rhs,
        coefficients,
        pass: mean <= rhs + 3.0 * sigma + 1e-12,
    })
}
