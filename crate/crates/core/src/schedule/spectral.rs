use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use super::{ScheduleKind, ScheduleModel};
use crate::graph::Graph;
use crate::matrix::AveragingMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("symmetric eigensolver did not converge")]
    NonConvergence,
    #[error("lambda = {0} is not below 1; the schedule does not contract")]
    NotContracting(f64),
    #[error("multiplier must be positive, got {0}")]
    NonPositiveMultiplier(f64),
    #[error("K must be at least 1, got {0}")]
    InvalidK(f64),
    #[error("p_min must be in (0, 1], got {0:?}")]
    InvalidPMin(Option<f64>),
    #[error("replay schedule has no stored rounds")]
    EmptyReplay,
}

/// `max(|λ2|, |λn|)` of the matrix itself when symmetric, otherwise of `M·Mᵀ`.
pub fn lambda(m: &AveragingMatrix) -> Result<f64, SpectralError> {
    let n = m.n();
    if n <= 1 {
        return Ok(0.0);
    }
    let sym = if m.is_symmetric(1e-12) {
        m.clone()
    } else {
        m.mul(&m.transpose())
    };
    let dm = DMatrix::from_fn(n, n, |i, j| *sym.get(i, j));
    let eig = SymmetricEigen::try_new(dm, 1e-14, 100_000).ok_or(SpectralError::NonConvergence)?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let l = ev[1].abs().max(ev[n - 1].abs());
    // values within solver tolerance of an exact 0 or 1 are snapped
    Ok(if l < 1e-10 {
        0.0
    } else if (l - 1.0).abs() < 1e-10 {
        1.0
    } else {
        l
    })
}

/// Lazy diffusion matrix: `1/(2Δ)` on edges, `1 − deg(u)/(2Δ)` on the diagonal.
pub fn diffusion_matrix(g: &Graph) -> AveragingMatrix {
    let n = g.n();
    let w = 1.0 / (2.0 * g.max_degree() as f64);
    let mut p = AveragingMatrix::zeros(n);
    for u in 0..n {
        p.set(u, u, 1.0 - g.degree(u) as f64 * w);
    }
    for &(u, v) in g.edges() {
        p.set(u, v, w);
        p.set(v, u, w);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TauKind {
    Circuit,
    RandomMatching,
    Async,
}

/// Inputs of the spectral round bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauInputs {
    pub kind: TauKind,
    pub k: f64,
    pub n: usize,
    pub delta: usize,
    pub lambda: f64,
    /// Required for random kinds; for the asynchronous model pass `1/|E|`.
    pub p_min: Option<f64>,
}

/// `⌈multiplier · Δ·ln(Kn)/(1−λ)⌉` for circuits and
/// `⌈multiplier · ln(Kn)/(p_min·Δ·(1−λ))⌉` for random kinds; at least 1.
pub fn tau_spectral(inp: &TauInputs, multiplier: f64) -> Result<u64, SpectralError> {
    if multiplier.is_nan() || multiplier <= 0.0 {
        return Err(SpectralError::NonPositiveMultiplier(multiplier));
    }
    if inp.k.is_nan() || inp.k < 1.0 {
        return Err(SpectralError::InvalidK(inp.k));
    }
    if inp.lambda.is_nan() || inp.lambda >= 1.0 {
        return Err(SpectralError::NotContracting(inp.lambda));
    }
    let gap = 1.0 - inp.lambda.max(0.0);
    let log = (inp.k * inp.n as f64).ln();
    let delta = inp.delta as f64;
    let raw = match inp.kind {
        TauKind::Circuit => delta * log / gap,
        TauKind::RandomMatching | TauKind::Async => {
            let p = inp.p_min.filter(|p| *p > 0.0 && *p <= 1.0);
            let p = p.ok_or(SpectralError::InvalidPMin(inp.p_min))?;
            log / (p * delta * gap)
        }
    };
    Ok(((multiplier * raw).ceil() as u64).max(1))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub model: TauKind,
    pub n: usize,
    pub delta: usize,
    pub k: f64,
    pub lambda: f64,
    pub diffusion_p: Option<AveragingMatrix>,
    pub p_min: Option<f64>,
    pub tau_spectral: u64,
    pub constant_multiplier: f64,
}

impl ScheduleModel {
    /// λ of the analysed matrix: one period `M^[1,Δ]` for circuits and
    /// replays, the diffusion matrix otherwise.
    pub fn analysed_lambda(&self) -> Result<f64, SpectralError> {
        match &self.kind {
            ScheduleKind::Circuit(c) => lambda(&self.window_product(1, c.width() as u64)),
            ScheduleKind::Replay(r) if r.is_empty() => Err(SpectralError::EmptyReplay),
            ScheduleKind::Replay(r) => lambda(&self.window_product(1, r.len() as u64)),
            _ => lambda(&diffusion_matrix(&self.graph)),
        }
    }
}

/// Spectral quantities and round bound for `model` at initial discrepancy `k`.
/// `p_min` overrides the exact inclusion bound of random matchings (e.g. with a
/// measured value); the asynchronous model always uses `1/|E|`.
pub fn spectral_report(
    model: &ScheduleModel,
    k: f64,
    multiplier: f64,
    p_min: Option<f64>,
) -> Result<SpectralReport, SpectralError> {
    let g = model.graph();
    let (kind, delta, p, diffusion) = match model.kind() {
        ScheduleKind::Circuit(c) => (TauKind::Circuit, c.width(), None, None),
        ScheduleKind::Replay(r) => (TauKind::Circuit, r.len(), None, None),
        ScheduleKind::RandomMatching { .. } => (
            TauKind::RandomMatching,
            g.max_degree(),
            p_min.or_else(|| model.p_min()),
            Some(diffusion_matrix(g)),
        ),
        ScheduleKind::AsyncEdge { .. } => (
            TauKind::Async,
            g.max_degree(),
            Some(1.0 / g.edge_count() as f64),
            Some(diffusion_matrix(g)),
        ),
    };
    let lam = match &diffusion {
        Some(pm) => lambda(pm)?,
        None => model.analysed_lambda()?,
    };
    let inputs = TauInputs {
        kind,
        k,
        n: g.n(),
        delta,
        lambda: lam,
        p_min: p,
    };
    let tau = tau_spectral(&inputs, multiplier)?;
    Ok(SpectralReport {
        model: kind,
        n: g.n(),
        delta,
        k,
        lambda: lam,
        diffusion_p: diffusion,
        p_min: p,
        tau_spectral: tau,
        constant_multiplier: multiplier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, hypercube};
    use std::sync::Arc;

    #[test]
    fn lambda_examples() {
        assert_eq!(
            lambda(&AveragingMatrix::from_matching(2, &[(0, 1)])).unwrap(),
            0.0
        );
        assert_eq!(lambda(&AveragingMatrix::identity(5)).unwrap(), 1.0);
        let h3 = ScheduleModel::circuit(Arc::new(hypercube(3).unwrap()));
        let l = lambda(&h3.window_product(1, 3)).unwrap();
        assert!(l < 1.0);
        assert_eq!(l, 0.0);
        let c5 = ScheduleModel::circuit(Arc::new(cycle(5).unwrap()));
        let l = c5.analysed_lambda().unwrap();
        assert!(l > 0.0 && l < 1.0, "{l}");
    }

    #[test]
    fn lambda_uses_product_with_transpose_when_asymmetric() {
        // P3 circuit: M1 = {0,1}, M2 = {1,2}; the product is not symmetric.
        let g = Arc::new(Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap());
        let m = ScheduleModel::circuit(g).window_product(1, 2);
        assert!(!m.is_symmetric(1e-12));
        let mmt = m.mul(&m.transpose());
        // trace and determinant pin the two non-unit eigenvalues
        let l = lambda(&m).unwrap();
        let eig = SymmetricEigen::new(DMatrix::from_fn(3, 3, |i, j| *mmt.get(i, j)));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!((l - ev[1].abs().max(ev[2].abs())).abs() < 1e-12);
    }

    #[test]
    fn diffusion_examples() {
        let c3 = diffusion_matrix(&cycle(3).unwrap());
        assert_eq!(c3.to_rows()[0], vec![0.5, 0.25, 0.25]);
        let k2 = diffusion_matrix(&complete(2).unwrap());
        assert_eq!(k2.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let star = diffusion_matrix(&Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap());
        assert_eq!(*star.get(0, 0), 0.5);
        assert!((star.get(1, 1) - 5.0 / 6.0).abs() < 1e-15);
        assert!(star.is_doubly_stochastic(1e-12));
    }

    #[test]
    fn tau_examples() {
        let circuit = TauInputs {
            kind: TauKind::Circuit,
            k: 4.0,
            n: 4,
            delta: 2,
            lambda: 0.5,
            p_min: None,
        };
        assert_eq!(tau_spectral(&circuit, 1.0).unwrap(), 12);
        assert_eq!(
            tau_spectral(&circuit, 0.0).unwrap_err(),
            SpectralError::NonPositiveMultiplier(0.0)
        );
        let degenerate = TauInputs {
            lambda: 1.0,
            ..circuit
        };
        assert!(matches!(
            tau_spectral(&degenerate, 1.0),
            Err(SpectralError::NotContracting(_))
        ));
        let missing = TauInputs {
            kind: TauKind::RandomMatching,
            ..circuit
        };
        assert!(matches!(
            tau_spectral(&missing, 1.0),
            Err(SpectralError::InvalidPMin(None))
        ));
    }

    #[test]
    fn async_report_on_k4() {
        let m = ScheduleModel::async_edge(Arc::new(complete(4).unwrap()), 0);
        let r = spectral_report(&m, 4.0, 1.0, None).unwrap();
        assert_eq!(r.p_min, Some(1.0 / 6.0));
        assert_eq!(r.delta, 3);
        // λ(P) for K4 with Δ=3: eigenvalues of P are 1 and 1/3
        assert!((r.lambda - 1.0 / 3.0).abs() < 1e-12);
        let expected = (16f64).ln() / (0.5 * (1.0 - 1.0 / 3.0));
        assert_eq!(r.tau_spectral, expected.ceil() as u64);
    }

    #[test]
    fn k2_circuit_report() {
        let m = ScheduleModel::circuit(Arc::new(complete(2).unwrap()));
        let r = spectral_report(&m, 1.0, 8.0, None).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(r.tau_spectral >= 1);
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "lambda",
            "diffusion_p",
            "p_min",
            "tau_spectral",
            "constant_multiplier",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
