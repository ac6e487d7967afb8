//! Fractional Hölder-type norms of sampled paths.
//!
//! For `α ∈ (0, ½)` and a path `f` on `[0, T]`:
//!
//! * `‖f‖_{α;t} = |f(t)| + ∫_0^t |f(t) - f(s)| (t - s)^{-1-α} ds`
//! * `‖f‖_{∞,α;t} = sup_{s ≤ t} ‖f‖_{α;s}`
//! * `‖f‖²_{2,α;t} = ∫_0^t ‖f‖²_{α;s} (s^{-α} + (t - s)^{-α-½}) ds`
//! * `‖f‖_{0,α;t} = sup_{0 ≤ u < v ≤ t} |f(v) - f(u)| / (v - u)^{1-α}
//!   + ∫_u^v |f(u) - f(z)| (z - u)^{α-2} dz`
//!
//! Every singular integral uses product integration (see [`crate::quadrature`]):
//! the non-singular factor is piecewise linear between grid samples and the
//! kernel is integrated exactly per cell. Suprema run over grid points only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::path::GridPath;
use crate::quadrature::{lag_powers, PowerKernel};

/// Exponent pair `(α, γ)` with `1 - γ < α < ½ < γ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl HolderParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Midpoint of the admissible interval, `α = (3 - 2γ) / 4`.
    pub fn with_default_alpha(gamma: f64) -> Result<Self> {
        Self::new(Self::default_alpha(gamma), gamma)
    }

    pub fn default_alpha(gamma: f64) -> f64 {
        (3.0 - 2.0 * gamma) / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.5 && self.gamma < 1.0) {
            return Err(Error::config(format!(
                "Hölder exponent gamma must lie in (1/2, 1), got {}",
                self.gamma
            )));
        }
        if !(self.alpha > 1.0 - self.gamma && self.alpha < 0.5) {
            return Err(Error::config(format!(
                "alpha must lie in (1 - gamma, 1/2) = ({}, 0.5), got {}",
                1.0 - self.gamma,
                self.alpha
            )));
        }
        Ok(())
    }

    /// `g(t, s) = s^{-α} + (t - s)^{-α-½}`, the outer weight of `‖·‖_{2,α;t}`.
    pub fn weight_g(&self, t: f64, s: f64) -> f64 {
        s.powf(-self.alpha) + (t - s).powf(-self.alpha - 0.5)
    }

    /// `h(t, s) = (t - s)^{-1-α}`.
    pub fn weight_h(&self, t: f64, s: f64) -> f64 {
        (t - s).powf(-1.0 - self.alpha)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "norm exponent alpha must lie in (0, 1/2), got {alpha}"
        )))
    }
}

/// Rows per work item in the O(n²) pair scans.
const ROW_CHUNK: usize = 32;

/// Precomputed quadrature weights for all norms at one `(α, dt, n)`.
#[derive(Debug, Clone)]
pub struct HolderNorms {
    alpha: f64,
    dt: f64,
    n: usize,
    /// `r^{-1-α}` for `‖·‖_{α;t}`.
    diff: PowerKernel,
    /// `r^{α-2}` for the seminorm integral.
    semi: PowerKernel,
    /// `(k dt)^{α-1}`.
    semi_quot: Vec<f64>,
    /// `s^{-α}` and `(t-s)^{-α-½}` for `‖·‖_{2,α;t}`.
    left: PowerKernel,
    right: PowerKernel,
}

impl HolderNorms {
    pub fn new(alpha: f64, dt: f64, n: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(dt > 0.0) || n == 0 {
            return Err(Error::config("norm grid needs dt > 0 and n >= 1"));
        }
        Ok(Self {
            alpha,
            dt,
            n,
            diff: PowerKernel::new(1.0 + alpha, dt, n),
            semi: PowerKernel::new(2.0 - alpha, dt, n),
            semi_quot: lag_powers(alpha - 1.0, dt, n, 0.0),
            left: PowerKernel::new(alpha, dt, n),
            right: PowerKernel::new(alpha + 0.5, dt, n),
        })
    }

    pub fn for_path(alpha: f64, f: &GridPath) -> Result<Self> {
        Self::new(alpha, f.dt(), f.steps())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check(&self, f: &GridPath) -> Result<()> {
        if f.steps() > self.n || (f.dt() - self.dt).abs() > 1e-9 * self.dt {
            return Err(Error::config(format!(
                "path ({} steps of {}) does not fit the norm grid ({} steps of {})",
                f.steps(),
                f.dt(),
                self.n,
                self.dt
            )));
        }
        Ok(())
    }

    /// `‖f‖_{α;t_m}`.
    pub fn norm_alpha_at(&self, f: &GridPath, m: usize) -> Result<f64> {
        self.check(f)?;
        Ok(self.norm_alpha_unchecked(f.values(), m))
    }

    fn norm_alpha_unchecked(&self, v: &[f64], m: usize) -> f64 {
        let fm = v[m];
        fm.abs() + self.diff.integrate_lags(m, |k| (fm - v[m - k]).abs())
    }

    /// `‖f‖_{α;t_m}` for every grid index `m`.
    pub fn norm_alpha_profile(&self, f: &GridPath) -> Result<Vec<f64>> {
        self.check(f)?;
        let v = f.values();
        Ok(exec::map_indexed(v.len(), |m| self.norm_alpha_unchecked(v, m)))
    }

    /// `‖f‖_{∞,α;t_m}` for every `m` (running maximum of the α-norm profile).
    pub fn norm_infalpha_profile(&self, f: &GridPath) -> Result<Vec<f64>> {
        let mut p = self.norm_alpha_profile(f)?;
        let mut run = 0.0f64;
        for x in &mut p {
            run = run.max(*x);
            *x = run;
        }
        Ok(p)
    }

    /// `‖f‖_{2,α;t_m}` from an already computed α-norm profile.
    pub fn norm_2alpha_from_profile(&self, profile: &[f64], m: usize) -> f64 {
        let sq = |k: usize| profile[k] * profile[k];
        let from_origin = self.left.integrate_lags(m, sq);
        let from_end = self.right.integrate_lags(m, |k| sq(m - k));
        (from_origin + from_end).sqrt()
    }

    pub fn norm_2alpha_at(&self, f: &GridPath, m: usize) -> Result<f64> {
        self.check(f)?;
        let v = f.values();
        let profile: Vec<f64> = exec::map_indexed(m + 1, |k| self.norm_alpha_unchecked(v, k));
        Ok(self.norm_2alpha_from_profile(&profile, m))
    }

    /// `‖f‖_{0,α;t_m}` for every `m`; entry 0 is 0.
    ///
    /// The O(n²) pair scan runs row by row; each row accumulates the inner
    /// integral as `v` moves right. The column maxima are merged with `max`,
    /// which does not depend on the order of the merge.
    pub fn seminorm_profile(&self, f: &GridPath) -> Result<Vec<f64>> {
        self.check(f)?;
        let v = f.values();
        let len = v.len();
        let n = len - 1;
        let chunks = n.div_ceil(ROW_CHUNK);
        let partial = exec::map_indexed(chunks, |c| {
            let mut colmax = vec![0.0f64; len];
            let rows = c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n);
            for u in rows {
                let fu = v[u];
                let mut integral = 0.0;
                let mut prev = 0.0;
                for (lag, &fz) in v[u + 1..].iter().enumerate() {
                    let next = (fz - fu).abs();
                    integral += self.semi.lo(lag) * prev + self.semi.hi(lag) * next;
                    prev = next;
                    let val = next * self.semi_quot[lag + 1] + integral;
                    let slot = &mut colmax[u + 1 + lag];
                    if val > *slot {
                        *slot = val;
                    }
                }
            }
            colmax
        });
        let mut profile = vec![0.0f64; len];
        for colmax in partial {
            for (p, c) in profile.iter_mut().zip(colmax) {
                *p = p.max(c);
            }
        }
        let mut run = 0.0f64;
        for p in &mut profile {
            run = run.max(*p);
            *p = run;
        }
        Ok(profile)
    }

    pub fn seminorm_at(&self, f: &GridPath, m: usize) -> Result<f64> {
        if m == f.steps() {
            return Ok(*self.seminorm_profile(f)?.last().unwrap());
        }
        let head = f.truncate(m.max(1))?;
        Ok(self.seminorm_profile(&head)?[m])
    }

    /// The seminorm bracket for a single pair `u < v` (grid indices).
    pub fn seminorm_pair(&self, f: &GridPath, u: usize, v: usize) -> Result<f64> {
        self.check(f)?;
        if u >= v || v > f.steps() {
            return Err(Error::config(format!("invalid grid pair ({u}, {v})")));
        }
        let x = f.values();
        let fu = x[u];
        let integral = self.semi.integrate_lags(v - u, |k| (x[u + k] - fu).abs());
        Ok((x[v] - fu).abs() * self.semi_quot[v - u] + integral)
    }
}

fn positive_index(f: &GridPath, t: f64) -> Result<usize> {
    let m = f.index_of(t)?;
    if m == 0 {
        return Err(Error::config(format!(
            "norms are evaluated at t > {}, got t = {t}",
            f.t0()
        )));
    }
    Ok(m)
}

/// `‖f‖_{α;t}`; `t` must be a grid point.
pub fn norm_alpha(f: &GridPath, alpha: f64, t: f64) -> Result<f64> {
    let m = positive_index(f, t)?;
    HolderNorms::for_path(alpha, f)?.norm_alpha_at(f, m)
}

/// `‖f‖_{0,α;t}`, the quantity written `‖Z‖_{0,t}` for drivers.
pub fn seminorm_0alpha(f: &GridPath, alpha: f64, t: f64) -> Result<f64> {
    let m = positive_index(f, t)?;
    HolderNorms::for_path(alpha, f)?.seminorm_at(f, m)
}

/// `‖f‖_{2,α;t}` (the square root of the weighted integral).
pub fn norm_2alpha(f: &GridPath, alpha: f64, t: f64) -> Result<f64> {
    let m = positive_index(f, t)?;
    HolderNorms::for_path(alpha, f)?.norm_2alpha_at(f, m)
}

/// `‖f‖_{∞,α;t}`.
pub fn norm_infalpha(f: &GridPath, alpha: f64, t: f64) -> Result<f64> {
    let m = positive_index(f, t)?;
    let norms = HolderNorms::for_path(alpha, f)?;
    Ok(norms.norm_infalpha_profile(&f.truncate(m)?)?[m])
}

/// Which functional the `norms` command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "0alpha")]
    ZeroAlpha,
    #[serde(rename = "2alpha")]
    TwoAlpha,
    #[serde(rename = "infalpha")]
    InfAlpha,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "0alpha" => Ok(Self::ZeroAlpha),
            "2alpha" => Ok(Self::TwoAlpha),
            "infalpha" => Ok(Self::InfAlpha),
            other => Err(Error::config(format!("unknown norm '{other}'"))),
        }
    }
}

pub fn evaluate(kind: NormKind, f: &GridPath, alpha: f64, t: f64) -> Result<f64> {
    match kind {
        NormKind::Alpha => norm_alpha(f, alpha, t),
        NormKind::ZeroAlpha => seminorm_0alpha(f, alpha, t),
        NormKind::TwoAlpha => norm_2alpha(f, alpha, t),
        NormKind::InfAlpha => norm_infalpha(f, alpha, t),
    }
}
