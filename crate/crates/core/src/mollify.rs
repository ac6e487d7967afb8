//! One-sided moving-average smoothing `g^ε(t) = ε^{-1} ∫_{max(0, t-ε)}^t g(s) ds`
//! and measurement of the seminorm gap `‖g - g^ε‖_{0,α;T}`.
//!
//! `g` is taken to vanish on negative times, so near the origin the window
//! is still divided by `ε`. This needs `g(0) = 0`. Widths are snapped to a
//! whole number of grid steps and the window is integrated by the trapezoid
//! rule, which is exact for piecewise linear paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::holder::HolderNorms;
use crate::path::GridPath;
use crate::stats;

/// Tolerance on `|g(0)|`, relative to `max(1, sup |g|)`.
const ORIGIN_TOL: f64 = 1e-12;

/// Number of grid steps in a window of width `eps`, warning when `eps` is
/// not already a multiple of `dt`.
pub fn snap_width(g: &GridPath, eps: f64) -> Result<usize> {
    snap_steps(eps, g.dt(), g.end_time() - g.t0())
}

/// [`snap_width`] for a grid of step `dt` covering `[0, horizon]`.
pub fn snap_steps(eps: f64, dt: f64, horizon: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < horizon) {
        return Err(Error::config(format!(
            "smoothing width must lie in (0, T) = (0, {horizon}), got {eps}"
        )));
    }
    let ratio = eps / dt;
    let m = ratio.round();
    if m < 1.0 {
        return Err(Error::config(format!(
            "smoothing width {eps} is below one grid step {dt}"
        )));
    }
    if (ratio - m).abs() > 1e-9 * ratio {
        log::warn!(
            "smoothing width {eps} is not a multiple of dt = {dt}; using {}",
            m * dt
        );
    }
    Ok(m as usize)
}

fn check_origin(g: &GridPath) -> Result<()> {
    let g0 = g.values()[0];
    if g0.abs() > ORIGIN_TOL * g.sup_abs().max(1.0) {
        return Err(Error::config(format!(
            "smoothing needs g(0) = 0 but g(0) = {g0}; subtract g(0) from the path first"
        )));
    }
    Ok(())
}

/// `g^ε` on the grid of `g`.
pub fn mollify(g: &GridPath, eps: f64) -> Result<GridPath> {
    check_origin(g)?;
    let m = snap_width(g, eps)?;
    Ok(mollify_steps(g, m))
}

/// `g^ε` with `ε = m dt`; the origin check is the caller's job.
pub(crate) fn mollify_steps(g: &GridPath, m: usize) -> GridPath {
    let v = g.values();
    let cell: Vec<f64> = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let inv = 1.0 / m as f64;
    let values = (0..v.len())
        .map(|i| {
            let start = i.saturating_sub(m);
            inv * cell[start..i].iter().sum::<f64>()
        })
        .collect();
    GridPath::from_parts_unchecked(g.t0(), g.dt(), values)
}

/// Seminorm gaps `‖g - g^ε‖_{0,α;T}` and their log-log slope against `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// `‖g - g^ε‖_{0,α;T}` for one width, reusing precomputed norm weights.
pub fn seminorm_gap(g: &GridPath, norms: &HolderNorms, eps: f64) -> Result<f64> {
    let smooth = mollify(g, eps)?;
    let diff = g.sub(&smooth)?;
    Ok(*norms.seminorm_profile(&diff)?.last().unwrap())
}

/// Fits `log ‖g - g^ε‖_{0,α;T}` against `log ε` by least squares.
///
/// Needs at least four widths. Any zero gap (constant `g`) makes the slope
/// undefined and is an error.
pub fn mollify_rate(g: &GridPath, alpha: f64, eps_list: &[f64]) -> Result<RateFit> {
    if eps_list.len() < 4 {
        return Err(Error::config(format!(
            "rate fit needs at least 4 widths, got {}",
            eps_list.len()
        )));
    }
    check_origin(g)?;
    let steps: Vec<f64> = eps_list.windows(2).map(|w| w[1] / w[0]).collect();
    if steps.iter().any(|r| (r - steps[0]).abs() > 1e-6 * steps[0].abs()) {
        log::warn!("smoothing widths {eps_list:?} are not geometrically spaced");
    }
    let norms = HolderNorms::for_path(alpha, g)?;
    let eps: Vec<f64> = eps_list
        .iter()
        .map(|&e| snap_width(g, e).map(|m| m as f64 * g.dt()))
        .collect::<Result<_>>()?;
    let errors = exec::map_indexed(eps.len(), |k| seminorm_gap(g, &norms, eps[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if let Some(k) = errors.iter().position(|e| *e <= 0.0) {
        return Err(Error::Degenerate(format!(
            "smoothing gap vanishes at eps = {}; the rate is undefined for constant paths",
            eps[k]
        )));
    }
    let slope = stats::log_log_slope(&eps, &errors)?;
    Ok(RateFit { eps, errors, slope })
}

/// Smoothing sequence `g_k = g^{a_k}` with `a_k = a0 2^{-k}`, `k = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct MollifiedSequence {
    pub widths: Vec<f64>,
    pub paths: Vec<GridPath>,
    /// `‖g - g_k‖_{0,α;T}` for each member.
    pub errors: Vec<f64>,
}

pub fn build_sequence(g: &GridPath, alpha: f64, a0: f64, n_max: usize) -> Result<MollifiedSequence> {
    check_origin(g)?;
    let norms = HolderNorms::for_path(alpha, g)?;
    let mut widths = Vec::with_capacity(n_max + 1);
    let mut paths = Vec::with_capacity(n_max + 1);
    let mut errors = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        let a = a0 * 0.5f64.powi(k as i32);
        let m = snap_width(g, a)?;
        let smooth = mollify_steps(g, m);
        let gap = *norms.seminorm_profile(&g.sub(&smooth)?)?.last().unwrap();
        widths.push(m as f64 * g.dt());
        paths.push(smooth);
        errors.push(gap);
    }
    Ok(MollifiedSequence {
        widths,
        paths,
        errors,
    })
}
