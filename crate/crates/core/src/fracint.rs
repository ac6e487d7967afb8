//! Riemann–Liouville fractional derivatives of sampled functions and the
//! generalized Lebesgue–Stieltjes integral built from them.
//!
//! Everything is real valued. The right-sided derivative is returned without
//! its complex phase, and the phases of the two-sided definition combine to
//! `(-1)^α (-1)^{1-α} = -1`, so
//! `∫_a^b f dg = -∫_a^b (D^α_{a+} f)(x) (D^{1-α}_{b-} g_{b-})(x) dx`.
//!
//! Between grid points functions are piecewise linear and the singular
//! kernels are integrated exactly per cell. Derivatives carry the indicator
//! of the open interval, so they are zero at both end points of the output.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::exec;
use crate::path::GridPath;
use crate::quadrature::{lag_powers, PowerKernel};

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )))
    }
}

fn check_integral_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "integration exponent alpha must lie in (0, 1/2), got {alpha}"
        )))
    }
}

/// Interval `[a, b]` as grid indices, `a <= b`.
fn interval(f: &GridPath, a: f64, b: f64) -> Result<(usize, usize)> {
    let ia = f.index_of(a)?;
    let ib = f.index_of(b)?;
    if ia > ib {
        return Err(Error::config(format!("interval end {b} precedes start {a}")));
    }
    Ok((ia, ib))
}

/// Kernel tables shared by the left and right derivatives of one order.
struct Kernels {
    alpha: f64,
    /// `r^{-1-α}`
    left: PowerKernel,
    /// `r^{α-2}`
    right: PowerKernel,
    /// `(k dt)^{-α}` and `(k dt)^{α-1}`
    left_pow: Vec<f64>,
    right_pow: Vec<f64>,
}

impl Kernels {
    fn new(alpha: f64, dt: f64, n: usize) -> Self {
        Self {
            alpha,
            left: PowerKernel::new(1.0 + alpha, dt, n),
            right: PowerKernel::new(2.0 - alpha, dt, n),
            left_pow: lag_powers(-alpha, dt, n, f64::INFINITY),
            right_pow: lag_powers(alpha - 1.0, dt, n, f64::INFINITY),
        }
    }

    /// `α ∫_a^x (f(x) - f(u)) (x - u)^{-1-α} du` at relative index `i`.
    fn left_integral(&self, v: &[f64], i: usize) -> f64 {
        let fx = v[i];
        self.alpha * self.left.integrate_lags(i, |k| fx - v[i - k])
    }

    /// Bracket of `D^{1-α}_{b-} g_{b-}` at relative index `i < m`, without `1/Γ(α)`.
    fn right_bracket(&self, v: &[f64], i: usize) -> f64 {
        let m = v.len() - 1;
        let gx = v[i];
        let span = m - i;
        (gx - v[m]) * self.right_pow[span]
            + (1.0 - self.alpha) * self.right.integrate_lags(span, |k| gx - v[i + k])
    }
}

/// `(D^α_{a+} f)(x)` on the grid points of `[a, b]`; zero at `a` and `b`.
pub fn frac_deriv_left(f: &GridPath, alpha: f64, a: f64, b: f64) -> Result<GridPath> {
    check_order(alpha)?;
    let (ia, ib) = interval(f, a, b)?;
    let m = ib - ia;
    if m < 1 {
        return Err(Error::config("derivative interval must span at least one step"));
    }
    let v = &f.values()[ia..=ib];
    let k = Kernels::new(alpha, f.dt(), m);
    let norm = 1.0 / gamma(1.0 - alpha);
    let values = exec::map_indexed(m + 1, |i| {
        if i == 0 || i == m {
            0.0
        } else {
            norm * (v[i] * k.left_pow[i] + k.left_integral(v, i))
        }
    });
    GridPath::new(f.time(ia), f.dt(), values)
}

/// Real-valued `(D^{1-α}_{b-} g_{b-})(x)` with `g_{b-}(x) = g(x) - g(b)`, for
/// grid points `x` in `[t0, b]`; zero at `b`.
pub fn frac_deriv_right(g: &GridPath, alpha: f64, b: f64) -> Result<GridPath> {
    check_order(alpha)?;
    let ib = g.index_of(b)?;
    if ib < 1 {
        return Err(Error::config("right derivative needs b past the grid origin"));
    }
    let v = &g.values()[..=ib];
    let k = Kernels::new(alpha, g.dt(), ib);
    let norm = 1.0 / gamma(alpha);
    let values = exec::map_indexed(ib + 1, |i| {
        if i == ib {
            0.0
        } else {
            norm * k.right_bracket(v, i)
        }
    });
    GridPath::new(g.t0(), g.dt(), values)
}

/// Generalized Stieltjes integral together with the bound that dominates it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundedIntegral {
    pub integral: f64,
    /// `∫_a^b |D^α_{a+} f| dx · sup |D^{1-α}_{b-} g_{b-}|`.
    pub bound: f64,
}

/// Shared evaluation of the integral and its bound.
///
/// The outer `dx` integral is done by product integration against
/// `(x - a)^{-α}`: with `D^α_{a+} f(x) = (x - a)^{-α} ψ(x) / Γ(1-α)`,
/// `ψ(x) = f(x) + α (x - a)^α ∫_a^x (f(x) - f(u)) (x - u)^{-1-α} du` is
/// bounded and `ψ(a) = f(a)`. The same weights produce both the integral and
/// the bound, and they are non-negative, so `|integral| <= bound` on the grid.
fn integral_and_bound(
    f: &GridPath,
    g: &GridPath,
    alpha: f64,
    a: f64,
    b: f64,
) -> Result<BoundedIntegral> {
    check_integral_alpha(alpha)?;
    f.check_same_grid(g, "generalized Stieltjes integral")?;
    let (ia, ib) = interval(f, a, b)?;
    let m = ib - ia;
    if m == 0 {
        return Ok(BoundedIntegral {
            integral: 0.0,
            bound: 0.0,
        });
    }
    let fv = &f.values()[ia..=ib];
    let gv = &g.values()[ia..=ib];
    let k = Kernels::new(alpha, f.dt(), m);
    let outer = PowerKernel::new(alpha, f.dt(), m);
    let dist_pow = lag_powers(alpha, f.dt(), m, 0.0);

    let rows = exec::map_indexed(m + 1, |i| {
        let psi = if i == 0 {
            fv[0]
        } else {
            fv[i] + k.left_integral(fv, i) * dist_pow[i]
        };
        let right = if i == m { 0.0 } else { k.right_bracket(gv, i) };
        (psi, right)
    });

    let inv_gamma_right = 1.0 / gamma(alpha);
    let inv_gamma_left = 1.0 / gamma(1.0 - alpha);
    let integral = -inv_gamma_left
        * inv_gamma_right
        * outer.integrate_lags(m, |i| rows[i].0 * rows[i].1);
    let sup_right = rows.iter().fold(0.0f64, |s, r| s.max(r.1.abs())) * inv_gamma_right;
    let bound = inv_gamma_left * outer.integrate_lags(m, |i| rows[i].0.abs()) * sup_right;
    Ok(BoundedIntegral { integral, bound })
}

/// `∫_a^b f dg` as the generalized Lebesgue–Stieltjes integral.
pub fn gls_integral(f: &GridPath, g: &GridPath, alpha: f64, a: f64, b: f64) -> Result<f64> {
    Ok(integral_and_bound(f, g, alpha, a, b)?.integral)
}

/// The integral and the pathwise bound `|integral| <= bound`.
pub fn pathwise_bound(
    f: &GridPath,
    g: &GridPath,
    alpha: f64,
    a: f64,
    b: f64,
) -> Result<BoundedIntegral> {
    integral_and_bound(f, g, alpha, a, b)
}

/// Forward Riemann–Stieltjes sum `Σ f(t_k) (g(t_{k+1}) - g(t_k))` over `[a, b]`.
pub fn forward_sum(f: &GridPath, g: &GridPath, a: f64, b: f64) -> Result<f64> {
    f.check_same_grid(g, "forward sum")?;
    let (ia, ib) = interval(f, a, b)?;
    let (fv, gv) = (f.values(), g.values());
    Ok((ia..ib).map(|k| fv[k] * (gv[k + 1] - gv[k])).sum())
}
