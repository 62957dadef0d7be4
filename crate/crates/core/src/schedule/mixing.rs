use serde::Serialize;

use super::ScheduleModel;
use crate::matrix::{row_dist_uniform_sq, row_norm_sq, AveragingMatrix};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SmoothingResult {
    pub pass: bool,
    pub worst_disc: f64,
    pub t: u64,
    pub k: f64,
    pub eps: f64,
}

/// Largest `disc(x·M)` over all `x` with `disc(x) ≤ k`:
/// `k · max_{w,w'} Σ_u max(M_{u,w} − M_{u,w'}, 0)`.
pub fn smoothing_worst_disc(m: &AveragingMatrix, k: f64) -> f64 {
    let n = m.n();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|w| (0..n).map(|u| *m.get(u, w)).collect())
        .collect();
    let mut worst = 0.0f64;
    for a in &cols {
        for b in &cols {
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).max(0.0)).sum();
            worst = worst.max(s);
        }
    }
    k * worst
}

/// Whether the first `t` rounds are `(k, eps)`-smoothing.
pub fn check_smoothing(model: &ScheduleModel, t: u64, k: f64, eps: f64) -> SmoothingResult {
    let worst_disc = smoothing_worst_disc(&model.window_product(1, t), k);
    SmoothingResult {
        pass: worst_disc <= eps,
        worst_disc,
        t,
        k,
        eps,
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WindowPass {
    pub window: u64,
    pub pass_fraction: f64,
}

/// Sampled estimate of the goodness windows.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GoodnessReport {
    /// Smallest tested global window meeting the target probability.
    pub tau_global_estimate: Option<u64>,
    /// Smallest tested local window meeting the target probability.
    pub tau_local_estimate: Option<u64>,
    /// Fraction of sampled starts whose window satisfies the global event on every row.
    pub gamma_g_pass: f64,
    /// Minimum over nodes of the fraction of starts satisfying the local event.
    pub gamma_l_pass: f64,
    /// Global event evaluated on `M^[1, t+τ]` rather than the window.
    pub gamma_g_prefix_pass: f64,
    pub global_target: f64,
    pub local_target: f64,
    pub global_threshold: f64,
    pub local_threshold: f64,
    pub starts: usize,
    pub global_by_window: Vec<WindowPass>,
    pub local_by_window: Vec<WindowPass>,
}

/// Global and local thresholds and target probabilities for `n` nodes.
fn goodness_constants(n: usize) -> (f64, f64, f64, f64) {
    let nf = n as f64;
    let ln = nf.ln();
    (
        nf.powi(-7),
        ln.powi(-10),
        1.0 - nf.powi(-3),
        1.0 - ln.powi(-11),
    )
}

/// Goodness at a single pair of windows.
pub fn check_goodness(
    model: &ScheduleModel,
    tau_g: u64,
    tau_l: u64,
    starts: &[u64],
) -> GoodnessReport {
    estimate_goodness(model, &[tau_g], &[tau_l], starts)
}

/// Evaluates every candidate window from every start round `t` (window
/// `[t+1, t+τ]`) and reports the smallest passing candidates.
pub fn estimate_goodness(
    model: &ScheduleModel,
    windows_g: &[u64],
    windows_l: &[u64],
    starts: &[u64],
) -> GoodnessReport {
    assert!(
        windows_g.iter().chain(windows_l).all(|&w| w >= 1),
        "windows must be at least 1"
    );
    let n = model.n();
    let (g_thr, l_thr, g_target, l_target) = goodness_constants(n);
    let mut wg = windows_g.to_vec();
    wg.sort_unstable();
    wg.dedup();
    let mut wl = windows_l.to_vec();
    wl.sort_unstable();
    wl.dedup();
    let longest = wg.iter().chain(&wl).copied().max().unwrap_or(0);

    let mut g_hits = vec![0usize; wg.len()];
    let mut l_hits = vec![vec![0usize; n]; wl.len()];
    for &s in starts {
        let mut m = AveragingMatrix::identity(n);
        let (mut gi, mut li) = (0, 0);
        for len in 1..=longest {
            m.right_apply_matching(&model.matching(s + len).pairs);
            if gi < wg.len() && wg[gi] == len {
                g_hits[gi] += usize::from(m.rows().all(|r| row_dist_uniform_sq(r) <= g_thr));
                gi += 1;
            }
            if li < wl.len() && wl[li] == len {
                for (u, row) in m.rows().enumerate() {
                    l_hits[li][u] += usize::from(row_norm_sq(row) <= l_thr);
                }
                li += 1;
            }
        }
    }
    let total = starts.len().max(1) as f64;
    let global_by_window: Vec<WindowPass> = wg
        .iter()
        .zip(&g_hits)
        .map(|(&window, &h)| WindowPass {
            window,
            pass_fraction: h as f64 / total,
        })
        .collect();
    let local_by_window: Vec<WindowPass> = wl
        .iter()
        .zip(&l_hits)
        .map(|(&window, hits)| WindowPass {
            window,
            pass_fraction: hits.iter().copied().min().unwrap_or(0) as f64 / total,
        })
        .collect();
    let pick = |curve: &[WindowPass], target: f64| {
        let est = curve.iter().find(|w| w.pass_fraction >= target);
        let shown = est.or(curve.last()).map_or(0.0, |w| w.pass_fraction);
        (est.map(|w| w.window), shown)
    };
    let (tau_global_estimate, gamma_g_pass) = pick(&global_by_window, g_target);
    let (tau_local_estimate, gamma_l_pass) = pick(&local_by_window, l_target);

    let prefix_window = tau_global_estimate.or(wg.last().copied()).unwrap_or(0);
    let gamma_g_prefix_pass = prefix_pass(model, prefix_window, starts, g_thr);

    GoodnessReport {
        tau_global_estimate,
        tau_local_estimate,
        gamma_g_pass,
        gamma_l_pass,
        gamma_g_prefix_pass,
        global_target: g_target,
        local_target: l_target,
        global_threshold: g_thr,
        local_threshold: l_thr,
        starts: starts.len(),
        global_by_window,
        local_by_window,
    }
}

/// Fraction of starts `t` for which every row of `M^[1, t+window]` meets the global event.
fn prefix_pass(model: &ScheduleModel, window: u64, starts: &[u64], thr: f64) -> f64 {
    if starts.is_empty() || window == 0 {
        return 0.0;
    }
    let mut ends: Vec<u64> = starts.iter().map(|s| s + window).collect();
    ends.sort_unstable();
    let mut m = AveragingMatrix::identity(model.n());
    let mut done = 0;
    let mut hits = 0;
    for &end in &ends {
        while done < end {
            done += 1;
            m.right_apply_matching(&model.matching(done).pairs);
        }
        hits += usize::from(m.rows().all(|r| row_dist_uniform_sq(r) <= thr));
    }
    hits as f64 / starts.len() as f64
}
