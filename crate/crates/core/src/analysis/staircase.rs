use serde::Serialize;

use super::{above_avg, y_at_level, AnalysisError};
use crate::process::{run, LoadVector, StandardEngine};
use crate::schedule::{spectral_report, ScheduleModel, SpectralError};

/// Stage round counts of the discrepancy staircase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaircasePlan {
    pub n: usize,
    pub k: f64,
    pub tau_global: u64,
    pub tau_local: u64,
    /// `ln n / ln ln n`.
    pub ell: f64,
    pub t0: u64,
    pub phase1: u64,
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
}

/// `ln ln n`, floored at 1 so small graphs keep positive windows.
fn lnln(n: usize) -> f64 {
    (n as f64).ln().ln().max(1.0)
}

impl StaircasePlan {
    pub fn from_windows(n: usize, k: f64, tau_global: u64, tau_local: u64) -> Self {
        let ln = (n as f64).ln().max(1.0);
        let ell = ln / lnln(n);
        let (g, l) = (tau_global as f64, tau_local as f64);
        let t0 = (3.0 * g * (2.0 * k * n as f64).ln() / ln).ceil() as u64;
        let phase1 = t0 + (g + ell * l).ceil() as u64;
        let step = (2.0 * g + 6.0 * ell * l).ceil() as u64;
        let t1 = t0 + step;
        let t2 = t1 + step;
        let t3 = t2 + (2.0 * g + 20.0 * ell * l).ceil() as u64;
        Self {
            n,
            k,
            tau_global,
            tau_local,
            ell,
            t0,
            phase1,
            t1,
            t2,
            t3,
        }
    }

    /// Windows scaled from the model's spectral time unit:
    /// `τ_global = ⌈m·ln n·unit⌉`, `τ_local = ⌈m·ln ln n·unit⌉`.
    pub fn for_model(
        model: &ScheduleModel,
        k: f64,
        multiplier: f64,
        p_min: Option<f64>,
    ) -> Result<Self, SpectralError> {
        let r = spectral_report(model, k, multiplier, p_min)?;
        let gap = 1.0 - r.lambda;
        let unit = match r.p_min {
            Some(p) => 1.0 / (p * r.delta as f64 * gap),
            None => r.delta as f64 / gap,
        };
        let n = model.n();
        let tau_global = (multiplier * (n as f64).ln().max(1.0) * unit).ceil() as u64;
        let tau_local = (multiplier * lnln(n) * unit).ceil() as u64;
        Ok(Self::from_windows(
            n,
            k,
            tau_global.max(1),
            tau_local.max(1),
        ))
    }

    pub fn final_round(&self) -> u64 {
        self.t3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageVerdict {
    pub stage: &'static str,
    pub round: u64,
    pub threshold: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StaircaseReport {
    pub plan: StaircasePlan,
    pub stages: Vec<StageVerdict>,
    pub final_disc: i64,
}

impl StaircaseReport {
    pub fn pass(&self) -> bool {
        self.stages.iter().all(|s| s.pass)
    }

    pub fn stage(&self, name: &str) -> Option<&StageVerdict> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// CSV with columns `stage,round,threshold,observed,pass`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.stages {
            w.serialize(s).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

type Check = fn(&LoadVector) -> f64;

fn stage_table(plan: &StaircasePlan, x0: &LoadVector) -> Vec<(&'static str, u64, f64, Check)> {
    let n = plan.n as f64;
    let ceil_avg = x0.average().ceil().to_integer() as f64;
    vec![
        (
            "smoothing_disc",
            plan.t0,
            (48.0 * n.ln()).sqrt() + 1.0,
            |x| x.disc() as f64,
        ),
        ("linear_tokens", plan.t0, 16.0 * n, |x| {
            num_traits::ToPrimitive::to_f64(&above_avg(x)).unwrap_or(f64::NAN)
        }),
        ("phase1_excess", plan.phase1, n / n.ln(), |x| {
            let level = x.average().ceil().to_integer() as i64 + 17;
            y_at_level(x.loads(), level) as f64
        }),
        ("max_load", plan.t1, ceil_avg + 18.0, |x| x.max() as f64),
        ("disc_38", plan.t1, 38.0, |x| x.disc() as f64),
        ("disc_4", plan.t2, 4.0, |x| x.disc() as f64),
        ("disc_3", plan.t3, 3.0, |x| x.disc() as f64),
    ]
}

/// Runs the standard process through the final stage and records each
/// stage's threshold and observation.
pub fn staircase_report(
    model: &ScheduleModel,
    x0: &LoadVector,
    plan: &StaircasePlan,
    seed: u64,
) -> Result<StaircaseReport, AnalysisError> {
    staircase_observed(model, x0, plan, seed, |_, _, _| {})
}

/// [`staircase_report`] that also shows every round to `observe`, flagging stage rounds.
pub fn staircase_observed(
    model: &ScheduleModel,
    x0: &LoadVector,
    plan: &StaircasePlan,
    seed: u64,
    mut observe: impl FnMut(u64, &LoadVector, bool),
) -> Result<StaircaseReport, AnalysisError> {
    let table = stage_table(plan, x0);
    let mut stages = Vec::with_capacity(table.len());
    let mut eng = StandardEngine::new(x0.clone(), seed);
    run(&mut eng, model, plan.t3, |t, x| {
        observe(t, x, table.iter().any(|e| e.1 == t));
        for &(stage, round, threshold, f) in &table {
            if round == t {
                let observed = f(x);
                stages.push(StageVerdict {
                    stage,
                    round,
                    threshold,
                    observed,
                    pass: observed <= threshold,
                });
            }
        }
    })?;
    stages.sort_by_key(|s| table.iter().position(|e| e.0 == s.stage));
    Ok(StaircaseReport {
        plan: *plan,
        stages,
        final_disc: eng.loads.disc(),
    })
}
