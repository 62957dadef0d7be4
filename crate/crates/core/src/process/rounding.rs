use serde::{Deserialize, Serialize};

use super::{LoadVector, ProcessError};
use crate::exact::Scalar;
use crate::matrix::DenseMatrix;
use crate::schedule::ScheduleModel;

/// Orientation drawn for one matched edge. The rounding error is
/// `E = ½·odd·phi`, where `odd` is the parity of the pair's total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingEntry {
    pub round: u64,
    pub u: usize,
    pub v: usize,
    pub phi: i8,
    #[serde(skip)]
    pub odd: bool,
}

impl RoundingEntry {
    /// `E` in units of one half: −1, 0 or +1.
    pub fn error_halves(&self) -> i8 {
        if self.odd {
            self.phi
        } else {
            0
        }
    }

    pub fn error<T: Scalar>(&self) -> T {
        T::from_i64(i64::from(self.error_halves())).half()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoundingTrace {
    pub entries: Vec<RoundingEntry>,
}

impl RoundingTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serialises")
    }

    /// Parses a trace; parities are restored by [`reconstruct_from_errors`].
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Both sides of the rounding-error decomposition at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T> {
    /// `X^(t) − x^(0)·M^[1,t]`.
    pub lhs: Vec<T>,
    /// `Σ_s Σ_{[u:v]} E^(s)_{u,v}·(M^[s+1,t]_{u,·} − M^[s+1,t]_{v,·})`.
    pub rhs: Vec<T>,
    pub final_loads: LoadVector,
}

impl<T: Scalar> Reconstruction<T> {
    pub fn max_residual(&self) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_exact(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// Replays the recorded orientations over rounds `1..=t` of `model` and
/// evaluates both sides of the decomposition in `T`.
pub fn reconstruct_from_errors<T: Scalar>(
    x0: &LoadVector,
    model: &ScheduleModel,
    trace: &RoundingTrace,
    t: u64,
) -> Result<Reconstruction<T>, ProcessError> {
    let n = x0.n();
    if model.n() != n {
        return Err(ProcessError::ScheduleMismatch(format!(
            "schedule has {} nodes, loads have {n}",
            model.n()
        )));
    }
    let mut rounds: Vec<Vec<RoundingEntry>> = vec![Vec::new(); t as usize + 1];
    for e in &trace.entries {
        if e.round == 0 {
            return Err(ProcessError::ScheduleMismatch("round 0 in trace".into()));
        }
        if e.round <= t {
            rounds[e.round as usize].push(*e);
        }
    }

    let mut x = x0.loads().to_vec();
    for (s, entries) in rounds.iter_mut().enumerate().skip(1) {
        let mut want = model.matching(s as u64).pairs;
        let mut got: Vec<(usize, usize)> = entries.iter().map(|e| (e.u, e.v)).collect();
        want.sort_unstable();
        got.sort_unstable();
        if want != got {
            return Err(ProcessError::ScheduleMismatch(format!(
                "round {s}: trace has {got:?}, schedule has {want:?}"
            )));
        }
        for e in entries.iter_mut() {
            if e.phi.abs() != 1 {
                return Err(ProcessError::ScheduleMismatch(format!(
                    "round {s}: phi = {}",
                    e.phi
                )));
            }
            let sum = x[e.u] + x[e.v];
            e.odd = sum % 2 == 1;
            let (lo, hi) = (sum / 2, sum - sum / 2);
            (x[e.u], x[e.v]) = if e.phi > 0 { (hi, lo) } else { (lo, hi) };
        }
    }
    let final_loads = LoadVector::new(x).expect("replay conserves load");

    let x0f: Vec<T> = x0.loads().iter().map(|&v| T::from_i64(v)).collect();
    let xi = model.window_product_in::<T>(1, t).left_mul_vec(&x0f);
    let lhs: Vec<T> = final_loads
        .loads()
        .iter()
        .zip(xi)
        .map(|(&a, b)| T::from_i64(a) - b)
        .collect();

    // walk backwards keeping w = M^[s+1,t]
    let mut rhs = vec![T::zero(); n];
    let mut w = DenseMatrix::<T>::identity(n);
    for s in (1..=t as usize).rev() {
        for e in &rounds[s] {
            if e.error_halves() == 0 {
                continue;
            }
            let err: T = e.error();
            for (k, r) in rhs.iter_mut().enumerate() {
                let d = w.get(e.u, k).clone() - w.get(e.v, k).clone();
                *r = r.clone() + err.clone() * d;
            }
        }
        let pairs: Vec<(usize, usize)> = rounds[s].iter().map(|e| (e.u, e.v)).collect();
        w.left_apply_matching(&pairs);
    }
    Ok(Reconstruction {
        lhs,
        rhs,
        final_loads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Dyadic;
    use crate::graph::{complete, cycle};
    use crate::process::{run, StandardEngine};
    use std::sync::Arc;

    fn recorded(x0: &LoadVector, model: &ScheduleModel, t: u64, seed: u64) -> StandardEngine {
        let mut eng = StandardEngine::new(x0.clone(), seed).recording();
        run(&mut eng, model, t, |_, _| {}).unwrap();
        eng
    }

    #[test]
    fn even_trajectory_has_no_error() {
        let model = ScheduleModel::circuit(Arc::new(cycle(4).unwrap()));
        let x0 = LoadVector::new(vec![8, 0, 0, 0]).unwrap();
        let eng = recorded(&x0, &model, 2, 1);
        let r =
            reconstruct_from_errors::<Dyadic>(&x0, &model, eng.trace.as_ref().unwrap(), 2).unwrap();
        assert!(r.lhs.iter().all(Dyadic::is_zero));
        assert!(r.rhs.iter().all(Dyadic::is_zero));
    }

    #[test]
    fn k2_single_round() {
        let model = ScheduleModel::circuit(Arc::new(complete(2).unwrap()));
        let x0 = LoadVector::new(vec![0, 1]).unwrap();
        for seed in 0..8 {
            let eng = recorded(&x0, &model, 1, seed);
            let trace = eng.trace.unwrap();
            let phi = i128::from(trace.entries[0].phi);
            let r = reconstruct_from_errors::<Dyadic>(&x0, &model, &trace, 1).unwrap();
            assert_eq!(r.rhs, vec![Dyadic::new(phi, 1), Dyadic::new(-phi, 1)]);
            assert!(r.is_exact());
        }
    }

    #[test]
    fn four_node_runs_are_exact() {
        let g = Arc::new(cycle(4).unwrap());
        for seed in 0..20 {
            let model = ScheduleModel::random_matching(g.clone(), seed);
            let x0 = LoadVector::new(vec![5, 0, 3, 1]).unwrap();
            let eng = recorded(&x0, &model, 10, seed);
            let trace = RoundingTrace::from_json(&eng.trace.unwrap().to_json()).unwrap();
            let r = reconstruct_from_errors::<Dyadic>(&x0, &model, &trace, 10).unwrap();
            assert!(r.is_exact());
            assert_eq!(r.final_loads, eng.loads);
            let f = reconstruct_from_errors::<f64>(&x0, &model, &trace, 10).unwrap();
            assert!(f.max_residual() < 1e-9);
        }
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let g = Arc::new(cycle(4).unwrap());
        let x0 = LoadVector::new(vec![5, 0, 3, 1]).unwrap();
        let a = ScheduleModel::random_matching(g.clone(), 1);
        let b = ScheduleModel::circuit(g);
        let eng = recorded(&x0, &a, 6, 1);
        assert!(matches!(
            reconstruct_from_errors::<f64>(&x0, &b, eng.trace.as_ref().unwrap(), 6),
            Err(ProcessError::ScheduleMismatch(_))
        ));
    }

    #[test]
    fn trace_json_shape() {
        let t = RoundingTrace {
            entries: vec![RoundingEntry {
                round: 1,
                u: 0,
                v: 1,
                phi: -1,
                odd: true,
            }],
        };
        assert_eq!(t.to_json(), r#"[{"round":1,"u":0,"v":1,"phi":-1}]"#);
    }
}
