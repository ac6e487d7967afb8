//! Euler schemes for `dX = a(t,X) dt + b(t,X) dW + c(t,X) dZ` and the
//! stopping-time truncation of the driver `Z`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holder::HolderNorms;
use crate::path::GridPath;

/// Solutions whose magnitude exceeds this are treated as blown up.
pub const OVERFLOW_LIMIT: f64 = 1e12;

/// A scalar coefficient from the built-in catalog, as a function of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefFn {
    Zero,
    Constant {
        value: f64,
    },
    /// `slope x + intercept`
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `amplitude sin(frequency x + phase)`
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude / (1 + exp(-rate x))`
    Logistic {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    /// `amplitude tanh(rate x)`
    Tanh {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        rate: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl CoefFn {
    #[inline]
    pub fn value(&self, _t: f64, x: f64) -> f64 {
        match *self {
            CoefFn::Zero => 0.0,
            CoefFn::Constant { value } => value,
            CoefFn::Linear { slope, intercept } => slope * x + intercept,
            CoefFn::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).sin(),
            CoefFn::Logistic { amplitude, rate } => amplitude / (1.0 + (-rate * x).exp()),
            CoefFn::Tanh { amplitude, rate } => amplitude * (rate * x).tanh(),
        }
    }

    /// `∂ₓ` of [`value`](Self::value).
    #[inline]
    pub fn dx(&self, _t: f64, x: f64) -> f64 {
        match *self {
            CoefFn::Zero | CoefFn::Constant { .. } => 0.0,
            CoefFn::Linear { slope, .. } => slope,
            CoefFn::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * frequency * (frequency * x + phase).cos(),
            CoefFn::Logistic { amplitude, rate } => {
                let s = 1.0 / (1.0 + (-rate * x).exp());
                amplitude * rate * s * (1.0 - s)
            }
            CoefFn::Tanh { amplitude, rate } => {
                let c = (rate * x).cosh();
                amplitude * rate / (c * c)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            CoefFn::Zero => true,
            CoefFn::Constant { value } => value == 0.0,
            CoefFn::Linear { slope, intercept } => slope == 0.0 && intercept == 0.0,
            CoefFn::Sine { amplitude, .. }
            | CoefFn::Logistic { amplitude, .. }
            | CoefFn::Tanh { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// Drift `a`, Itô diffusion `b` and pathwise diffusion `c`, with the declared
/// constants of the growth/Lipschitz/time-Hölder assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub a: CoefFn,
    pub b: CoefFn,
    pub c: CoefFn,
    #[serde(rename = "K")]
    pub k: f64,
    /// Declared bound on `|b|`, if any.
    #[serde(rename = "K1", default)]
    pub k1: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
}

impl CoefficientSet {
    pub fn zero() -> Self {
        Self {
            a: CoefFn::Zero,
            b: CoefFn::Zero,
            c: CoefFn::Zero,
            k: 1.0,
            k1: Some(1.0),
            beta: 1.0,
        }
    }

    /// `a = μx`, `b = σx`, `c = νx`.
    pub fn linear(mu: f64, sigma: f64, nu: f64) -> Self {
        let lin = |slope| CoefFn::Linear {
            slope,
            intercept: 0.0,
        };
        Self {
            a: lin(mu),
            b: lin(sigma),
            c: lin(nu),
            k: (mu.abs() + sigma.abs() + nu.abs()).max(f64::MIN_POSITIVE),
            k1: None,
            beta: 1.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cs: Self = serde_json::from_str(text)?;
        cs.check()?;
        Ok(cs)
    }

    /// Checks the declared constants, not the functions themselves.
    pub fn check(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(format!("K must be positive, got {}", self.k)));
        }
        if let Some(k1) = self.k1 {
            if !(k1 > 0.0 && k1.is_finite()) {
                return Err(Error::config(format!("K1 must be positive, got {k1}")));
            }
        }
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            return Err(Error::config(format!(
                "beta must lie in (1/2, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dc_dx(&self, t: f64, x: f64) -> f64 {
        self.c.dx(t, x)
    }
}

/// One row of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: String,
    /// Largest empirical ratio, to be compared with `declared`.
    pub observed: f64,
    pub declared: f64,
    pub violations: usize,
    /// `(t, x)` where the largest ratio was seen.
    pub worst_at: Option<(f64, f64)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub quadruples: usize,
}

impl ValidationReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

#[derive(Default)]
struct Tracker {
    observed: f64,
    violations: usize,
    worst_at: Option<(f64, f64)>,
}

impl Tracker {
    fn push(&mut self, ratio: f64, declared: f64, at: (f64, f64)) {
        if ratio > declared * (1.0 + 1e-12) + 1e-300 {
            self.violations += 1;
        }
        if ratio > self.observed || (self.worst_at.is_none() && ratio >= self.observed) {
            self.observed = ratio;
            self.worst_at = Some(at);
        }
    }

    fn finish(self, condition: &str, declared: f64) -> ConditionCheck {
        ConditionCheck {
            condition: condition.to_string(),
            observed: self.observed,
            declared,
            holds: self.violations == 0,
            violations: self.violations,
            worst_at: self.worst_at,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

fn span(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Default number of random quadruples for the four-point check.
pub const DEFAULT_QUADRUPLES: usize = 100_000;

pub fn validate_coefficients(
    cs: &CoefficientSet,
    t_samples: &[f64],
    x_samples: &[f64],
) -> Result<ValidationReport> {
    validate_coefficients_with(cs, t_samples, x_samples, DEFAULT_QUADRUPLES, 0)
}

/// Spot-checks the coefficient assumptions on the sample grids.
///
/// Violations are reported, never raised. The four-point inequality
/// `|c(t₁,x₁) - c(t₂,x₂) - c(t₁,x₃) + c(t₂,x₄)| <= K|x₁-x₂-x₃+x₄|
/// + K|x₁-x₃||t₂-t₁|^β + K|x₁-x₃|(|x₁-x₂|+|x₃-x₄|)` is evaluated on
/// `quadruples` points drawn uniformly from the sample ranges.
pub fn validate_coefficients_with(
    cs: &CoefficientSet,
    t_samples: &[f64],
    x_samples: &[f64],
    quadruples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if t_samples.is_empty() || x_samples.is_empty() {
        return Err(Error::config("coefficient validation needs non-empty sample grids"));
    }
    if t_samples.iter().chain(x_samples).any(|v| !v.is_finite()) {
        return Err(Error::config("sample grids must be finite"));
    }
    let k = cs.k;
    let mut growth = Tracker::default();
    let mut dc = Tracker::default();
    let mut lip = Tracker::default();
    let mut time = Tracker::default();
    let mut bound = Tracker::default();

    for &t in t_samples {
        for (i, &x) in x_samples.iter().enumerate() {
            let size = cs.a.value(t, x).abs() + cs.b.value(t, x).abs() + cs.c.value(t, x).abs();
            growth.push(ratio(size, 1.0 + x.abs()), k, (t, x));
            dc.push(cs.dc_dx(t, x).abs(), k, (t, x));
            if let Some(k1) = cs.k1 {
                bound.push(cs.b.value(t, x).abs(), k1, (t, x));
            }
            for &y in &x_samples[i + 1..] {
                if x == y {
                    continue;
                }
                let d = (cs.a.value(t, x) - cs.a.value(t, y)).abs()
                    + (cs.b.value(t, x) - cs.b.value(t, y)).abs()
                    + (cs.dc_dx(t, x) - cs.dc_dx(t, y)).abs();
                lip.push(ratio(d, (x - y).abs()), k, (t, x));
            }
        }
    }
    for (i, &s) in t_samples.iter().enumerate() {
        for &t in &t_samples[i + 1..] {
            if s == t {
                continue;
            }
            let lag = (s - t).abs().powf(cs.beta);
            for &x in x_samples {
                let d = (cs.a.value(s, x) - cs.a.value(t, x)).abs()
                    + (cs.b.value(s, x) - cs.b.value(t, x)).abs()
                    + (cs.c.value(s, x) - cs.c.value(t, x)).abs()
                    + (cs.dc_dx(s, x) - cs.dc_dx(t, x)).abs();
                time.push(ratio(d, lag), k, (s, x));
            }
        }
    }

    let mut four = Tracker::default();
    let (t_lo, t_hi) = span(t_samples);
    let (x_lo, x_hi) = span(x_samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..quadruples {
        let t1 = uniform(&mut rng, t_lo, t_hi);
        let t2 = uniform(&mut rng, t_lo, t_hi);
        let x: [f64; 4] = std::array::from_fn(|_| uniform(&mut rng, x_lo, x_hi));
        let lhs = (cs.c.value(t1, x[0]) - cs.c.value(t2, x[1]) - cs.c.value(t1, x[2])
            + cs.c.value(t2, x[3]))
        .abs();
        let d13 = (x[0] - x[2]).abs();
        let rhs = (x[0] - x[1] - x[2] + x[3]).abs()
            + d13 * (t2 - t1).abs().powf(cs.beta)
            + d13 * ((x[0] - x[1]).abs() + (x[2] - x[3]).abs());
        four.push(ratio(lhs, rhs), k, (t1, x[0]));
    }

    let mut checks = vec![
        growth.finish("growth", k),
        dc.finish("dc_dx_bound", k),
        lip.finish("lipschitz", k),
        time.finish("time_holder", k),
    ];
    if let Some(k1) = cs.k1 {
        checks.push(bound.finish("b_bound", k1));
    }
    checks.push(four.finish("four_point", k));
    Ok(ValidationReport { checks, quadruples })
}

/// Solver settings; `alpha` is used only by norm-based truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub x0: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H", default = "default_hurst")]
    pub hurst: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed_w: u64,
    #[serde(default = "one_u64")]
    pub seed_z: u64,
}

fn default_hurst() -> f64 {
    0.7
}

fn one_u64() -> u64 {
    1
}

impl SolveConfig {
    pub fn new(x0: f64, n: usize, horizon: f64) -> Self {
        Self {
            x0,
            n,
            horizon,
            hurst: default_hurst(),
            alpha: None,
            seed_w: 0,
            seed_z: 1,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "solver needs n >= 1 and T > 0, got n = {}, T = {}",
                self.n, self.horizon
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::config("x0 must be finite"));
        }
        Ok(())
    }

    fn check_driver(&self, name: &str, p: &GridPath) -> Result<()> {
        if p.steps() != self.n || (p.dt() - self.dt()).abs() > 1e-9 * self.dt() || p.t0() != 0.0 {
            return Err(Error::config(format!(
                "driver {name} has {} steps of {} from t = {}, solver expects {} steps of {} from 0",
                p.steps(),
                p.dt(),
                p.t0(),
                self.n,
                self.dt()
            )));
        }
        Ok(())
    }
}

#[inline]
fn guard(step: usize, time: f64, value: f64) -> Result<f64> {
    if !value.is_finite() || value.abs() > OVERFLOW_LIMIT {
        return Err(Error::Overflow { step, time, value });
    }
    Ok(value)
}

/// Left-point Euler scheme for the mixed equation.
pub fn euler_solve_mixed(
    cs: &CoefficientSet,
    cfg: &SolveConfig,
    w: &GridPath,
    z: &GridPath,
) -> Result<GridPath> {
    cfg.validate()?;
    cfg.check_driver("W", w)?;
    cfg.check_driver("Z", z)?;
    let dt = cfg.dt();
    let (wv, zv) = (w.values(), z.values());
    let mut x = Vec::with_capacity(cfg.n + 1);
    let mut cur = guard(0, 0.0, cfg.x0)?;
    x.push(cur);
    for k in 0..cfg.n {
        let t = k as f64 * dt;
        let next = cur
            + cs.a.value(t, cur) * dt
            + cs.b.value(t, cur) * (wv[k + 1] - wv[k])
            + cs.c.value(t, cur) * (zv[k + 1] - zv[k]);
        cur = guard(k + 1, t + dt, next)?;
        x.push(cur);
    }
    Ok(GridPath::from_parts_unchecked(0.0, dt, x))
}

/// Euler-Maruyama for `dX = (a + c Zs') dt + b dW` with `Zs'` the forward
/// difference quotient of the smooth driver.
pub fn solve_smooth_driver(
    cs: &CoefficientSet,
    cfg: &SolveConfig,
    w: &GridPath,
    zs: &GridPath,
) -> Result<GridPath> {
    cfg.validate()?;
    cfg.check_driver("W", w)?;
    cfg.check_driver("Zs", zs)?;
    let dt = cfg.dt();
    let (wv, zv) = (w.values(), zs.values());
    let mut x = Vec::with_capacity(cfg.n + 1);
    let mut cur = guard(0, 0.0, cfg.x0)?;
    x.push(cur);
    for k in 0..cfg.n {
        let t = k as f64 * dt;
        let slope = (zv[k + 1] - zv[k]) / dt;
        let drift = cs.a.value(t, cur) + cs.c.value(t, cur) * slope;
        let next = cur + drift * dt + cs.b.value(t, cur) * (wv[k + 1] - wv[k]);
        cur = guard(k + 1, t + dt, next)?;
        x.push(cur);
    }
    Ok(GridPath::from_parts_unchecked(0.0, dt, x))
}

/// `x0 exp((μ - σ²/2) t + σ W_t + ν Z_t)` on the driver grid.
pub fn linear_closed_form(
    x0: f64,
    mu: f64,
    sigma: f64,
    nu: f64,
    w: &GridPath,
    z: &GridPath,
) -> Result<GridPath> {
    let drift = mu - 0.5 * sigma * sigma;
    let mut out = w.zip_with(z, |wv, zv| sigma * wv + nu * zv)?;
    let t0 = out.t0();
    let dt = out.dt();
    let values = out
        .values()
        .iter()
        .enumerate()
        .map(|(k, e)| x0 * (drift * (t0 + k as f64 * dt) + e).exp())
        .collect();
    out = GridPath::from_parts_unchecked(t0, dt, values);
    Ok(out)
}

/// The level `N` of the stopping time `τ_N = inf{t : ‖Z‖_{0,t} >= N} ∧ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevel {
    #[serde(rename = "N")]
    pub level: f64,
}

impl TruncationLevel {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(Error::config(format!("truncation level must be positive, got {level}")));
        }
        Ok(Self { level })
    }
}

/// First index whose seminorm profile entry reaches `level`.
pub fn tau_index(profile: &[f64], level: TruncationLevel) -> Option<usize> {
    profile.iter().position(|&s| s >= level.level)
}

/// `τ_N` on the grid of `z`: the first grid time with `‖Z‖_{0,α;t} >= N`, else `T`.
pub fn tau_n(z: &GridPath, alpha: f64, level: TruncationLevel) -> Result<f64> {
    let norms = HolderNorms::for_path(alpha, z)?;
    let profile = norms.seminorm_profile(z)?;
    Ok(tau_index(&profile, level)
        .map(|m| z.time(m))
        .unwrap_or_else(|| z.end_time()))
}

/// `Z_{t ∧ τ}`; between grid points `Z(τ)` is linearly interpolated.
pub fn stop_process(z: &GridPath, tau: f64) -> Result<GridPath> {
    let (t0, end) = (z.t0(), z.end_time());
    if !(tau >= t0 - 1e-12 * z.dt() && tau <= end + 1e-9 * z.dt()) {
        return Err(Error::config(format!(
            "stopping time {tau} lies outside [{t0}, {end}]"
        )));
    }
    let x = ((tau - t0) / z.dt()).clamp(0.0, z.steps() as f64);
    let k = x.round();
    let (frozen, first) = if (x - k).abs() <= 1e-9 {
        let k = k as usize;
        (z.values()[k], k)
    } else {
        let k = x.floor() as usize;
        let s = x - k as f64;
        let v = z.values();
        (v[k] * (1.0 - s) + v[k + 1] * s, k + 1)
    };
    let mut values = z.values().to_vec();
    for v in &mut values[first..] {
        *v = frozen;
    }
    Ok(GridPath::from_parts_unchecked(t0, z.dt(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_gen::{gen_fbm, gen_wiener, path_seed, GenConfig};
    use proptest::prelude::*;

    fn drivers(n: usize, seed: u64, hurst: f64) -> (GridPath, GridPath) {
        let w = gen_wiener(&GenConfig::new(n, 1.0, 0.5, path_seed(seed, 0))).unwrap();
        let z = gen_fbm(&GenConfig::new(n, 1.0, hurst, path_seed(seed, 1))).unwrap();
        (w, z)
    }

    #[test]
    fn catalog_derivatives_match_finite_differences() {
        let cat = [
            CoefFn::Linear {
                slope: -0.7,
                intercept: 0.2,
            },
            CoefFn::Sine {
                amplitude: 0.5,
                frequency: 2.0,
                phase: 0.3,
            },
            CoefFn::Logistic {
                amplitude: 1.5,
                rate: 0.8,
            },
            CoefFn::Tanh {
                amplitude: 0.9,
                rate: 1.7,
            },
        ];
        for f in cat {
            for &x in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
                let h = 1e-6;
                let fd = (f.value(0.0, x + h) - f.value(0.0, x - h)) / (2.0 * h);
                assert!((fd - f.dx(0.0, x)).abs() < 1e-8, "{f:?} at {x}");
            }
        }
    }

    #[test]
    fn coefficient_json_round_trip() {
        let text = r#"{"a": {"kind": "linear", "slope": 0.1},
                       "b": {"kind": "tanh", "amplitude": 0.5},
                       "c": {"kind": "sine"},
                       "K": 1.0, "K1": 0.5, "beta": 0.75}"#;
        let cs = CoefficientSet::from_json(text).unwrap();
        assert_eq!(cs.c, CoefFn::Sine { amplitude: 1.0, frequency: 1.0, phase: 0.0 });
        let back = CoefficientSet::from_json(&serde_json::to_string(&cs).unwrap()).unwrap();
        assert_eq!(cs, back);
        assert!(CoefficientSet::from_json(r#"{"a":{"kind":"cubic"},"b":{"kind":"zero"},"c":{"kind":"zero"},"K":1}"#)
            .unwrap_err()
            .is_config());
        let bad = text.replace("0.75", "0.4");
        assert!(CoefficientSet::from_json(&bad).unwrap_err().is_config());
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    #[test]
    fn zero_coefficients_pass_with_zero_ratios() {
        let r = validate_coefficients_with(&CoefficientSet::zero(), &grid(0.0, 1.0, 5), &grid(-3.0, 3.0, 20), 1000, 3)
            .unwrap();
        assert!(r.holds());
        assert!(r.checks.iter().all(|c| c.observed == 0.0));
    }

    #[test]
    fn sine_satisfies_four_point_inequality() {
        let cs = CoefficientSet {
            a: CoefFn::Zero,
            b: CoefFn::Zero,
            c: CoefFn::Sine {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            },
            k: 1.0,
            k1: None,
            beta: 0.8,
        };
        let r = validate_coefficients(&cs, &grid(0.0, 1.0, 10), &grid(-5.0, 5.0, 40)).unwrap();
        let four = r.get("four_point").unwrap();
        assert_eq!(r.quadruples, 100_000);
        assert_eq!(four.violations, 0);
        assert!(four.observed <= 1.0 && four.observed > 0.5);
        assert!(r.holds());
    }

    #[test]
    fn unbounded_b_is_reported() {
        let mut cs = CoefficientSet::zero();
        cs.b = CoefFn::Linear {
            slope: 1.0,
            intercept: 0.0,
        };
        cs.k1 = Some(1.0);
        let r = validate_coefficients_with(&cs, &[0.0, 1.0], &grid(-3.0, 3.0, 12), 10, 0).unwrap();
        let b = r.get("b_bound").unwrap();
        assert!(!b.holds);
        assert_eq!(b.violations, 2 * 8);
        assert!(b.worst_at.unwrap().1.abs() > 1.0);
        assert!(!r.holds());
        assert!(validate_coefficients(&cs, &[], &[1.0]).unwrap_err().is_config());
    }

    #[test]
    fn trivial_solutions() {
        let (w, z) = drivers(64, 5, 0.7);
        let cfg = SolveConfig::new(1.5, 64, 1.0);
        let x = euler_solve_mixed(&CoefficientSet::zero(), &cfg, &w, &z).unwrap();
        assert!(x.values().iter().all(|v| *v == 1.5));
        let x = solve_smooth_driver(&CoefficientSet::zero(), &cfg, &w, &GridPath::from_fn(64, 1.0, |_| 0.0).unwrap())
            .unwrap();
        assert!(x.values().iter().all(|v| *v == 1.5));

        let mut cs = CoefficientSet::zero();
        cs.c = CoefFn::Constant { value: 1.0 };
        let x = euler_solve_mixed(&cs, &cfg, &w, &z).unwrap();
        let mut acc = 1.5;
        for k in 0..=64 {
            if k > 0 {
                acc += z.values()[k] - z.values()[k - 1];
            }
            assert_eq!(x.values()[k], acc);
            assert!((x.values()[k] - (1.5 + z.values()[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_driver_scheme_matches_mixed_scheme() {
        let (w, z) = drivers(256, 9, 0.7);
        let zs = crate::mollify::mollify(&z, 1.0 / 32.0).unwrap();
        let cfg = SolveConfig::new(0.8, 256, 1.0);
        let cs = CoefficientSet {
            a: CoefFn::Sine {
                amplitude: 0.3,
                frequency: 1.0,
                phase: 0.0,
            },
            b: CoefFn::Tanh {
                amplitude: 0.4,
                rate: 1.0,
            },
            c: CoefFn::Linear {
                slope: 0.5,
                intercept: 0.1,
            },
            k: 1.0,
            k1: Some(0.4),
            beta: 1.0,
        };
        let a = solve_smooth_driver(&cs, &cfg, &w, &zs).unwrap();
        let b = euler_solve_mixed(&cs, &cfg, &w, &zs).unwrap();
        let scale = 1.0 + a.sup_abs();
        for (p, q) in a.values().iter().zip(b.values()) {
            assert!((p - q).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn overflow_is_reported_with_step() {
        let w = GridPath::from_fn(100, 1.0, |_| 0.0).unwrap();
        let cs = CoefficientSet::linear(2000.0, 0.0, 0.0);
        let err = euler_solve_mixed(&cs, &SolveConfig::new(1.0, 100, 1.0), &w, &w).unwrap_err();
        match err {
            Error::Overflow { step, value, .. } => {
                assert!(step > 1 && step <= 100);
                assert!(value.abs() > OVERFLOW_LIMIT);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(!Error::Overflow { step: 0, time: 0.0, value: 0.0 }.is_config());
    }

    #[test]
    fn driver_grid_mismatch_is_config_error() {
        let (w, z) = drivers(64, 1, 0.7);
        let cfg = SolveConfig::new(1.0, 128, 1.0);
        assert!(euler_solve_mixed(&CoefficientSet::zero(), &cfg, &w, &z)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn geometric_oracle_improves_with_refinement() {
        let (mu, sigma, nu) = (0.1, 0.2, 0.3);
        let cs = CoefficientSet::linear(mu, sigma, nu);
        let mut prev = f64::INFINITY;
        let (w, z) = drivers(1024, 17, 0.7);
        for factor in [16usize, 4, 1] {
            let (ws, zs) = (w.subsample(factor).unwrap(), z.subsample(factor).unwrap());
            let cfg = SolveConfig::new(1.0, ws.steps(), 1.0);
            let x = euler_solve_mixed(&cs, &cfg, &ws, &zs).unwrap();
            let exact = linear_closed_form(1.0, mu, sigma, nu, &ws, &zs).unwrap();
            let err = ((x.last() - exact.last()) / exact.last()).abs();
            assert!(err < prev || err < 1e-4, "factor {factor}: {err} after {prev}");
            prev = err;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn linear_in_initial_state() {
        let (w, z) = drivers(128, 4, 0.75);
        let cs = CoefficientSet::linear(0.1, 0.2, 0.3);
        let base = euler_solve_mixed(&cs, &SolveConfig::new(1.0, 128, 1.0), &w, &z).unwrap();
        let scaled = euler_solve_mixed(&cs, &SolveConfig::new(-2.5, 128, 1.0), &w, &z).unwrap();
        for (a, b) in base.values().iter().zip(scaled.values()) {
            assert!((b + 2.5 * a).abs() <= 1e-13 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn euler_refinements_form_a_cauchy_sequence() {
        let (w, z) = drivers(32, 11, 0.7);
        let cs = CoefficientSet::linear(0.1, 0.2, 0.3);
        let solve = |factor: usize| {
            let (wf, zf) = (w.refine(factor).unwrap(), z.refine(factor).unwrap());
            let x = euler_solve_mixed(&cs, &SolveConfig::new(1.0, wf.steps(), 1.0), &wf, &zf).unwrap();
            x.subsample(factor).unwrap()
        };
        let mut prev_sol = solve(1);
        let mut prev_gap = f64::INFINITY;
        for factor in [2usize, 4, 8, 16, 32] {
            let sol = solve(factor);
            let gap = sol.sub(&prev_sol).unwrap().sup_abs();
            assert!(gap < prev_gap, "factor {factor}: {gap} after {prev_gap}");
            prev_gap = gap;
            prev_sol = sol;
        }
    }

    #[test]
    fn tau_and_stopping() {
        let zero = GridPath::from_fn(64, 1.0, |_| 0.0).unwrap();
        let level = TruncationLevel::new(0.5).unwrap();
        assert_eq!(tau_n(&zero, 0.3, level).unwrap(), 1.0);
        assert!(TruncationLevel::new(0.0).is_err());

        let (_, z) = drivers(128, 2, 0.7);
        let tiny = TruncationLevel::new(1e-300).unwrap();
        assert_eq!(tau_n(&z, 0.3, tiny).unwrap(), z.time(1));

        assert_eq!(stop_process(&z, 1.0).unwrap(), z);
        assert!(stop_process(&z, 0.0).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(stop_process(&z, 1.5).is_err());

        let norms = HolderNorms::for_path(0.3, &z).unwrap();
        let profile = norms.seminorm_profile(&z).unwrap();
        let mid = TruncationLevel::new(0.5 * profile[128]).unwrap();
        let tau = tau_n(&z, 0.3, mid).unwrap();
        assert!(tau < 1.0);
        let k = z.index_of(tau).unwrap();
        let stopped = stop_process(&z, tau).unwrap();
        assert_eq!(&stopped.values()[..=k], &z.values()[..=k]);
        assert!(stopped.values()[k..].iter().all(|v| *v == z.values()[k]));
        let s = norms.seminorm_profile(&stopped).unwrap();
        assert!(s[128].is_finite());
        assert!((s[k] - profile[k]).abs() <= 1e-12 * profile[k]);

        let mut last = 0.0;
        for frac in [0.1, 0.3, 0.6, 0.9, 1.5] {
            let tau = tau_n(&z, 0.3, TruncationLevel::new(frac * profile[128]).unwrap()).unwrap();
            assert!(tau >= last);
            last = tau;
        }
    }

    #[test]
    fn median_level_stops_about_half_the_paths() {
        let paths: Vec<GridPath> = (0..40).map(|s| drivers(128, 100 + s, 0.7).1).collect();
        let norms = HolderNorms::new(0.3, 1.0 / 128.0, 128).unwrap();
        let totals: Vec<f64> = paths
            .iter()
            .map(|z| *norms.seminorm_profile(z).unwrap().last().unwrap())
            .collect();
        let level = TruncationLevel::new(crate::stats::median(&totals)).unwrap();
        let stopped = paths
            .iter()
            .filter(|z| tau_n(z, 0.3, level).unwrap() < 1.0)
            .count();
        assert!((16..=24).contains(&stopped), "{stopped}");
    }

    #[test]
    fn off_grid_stop_interpolates() {
        let z = GridPath::from_fn(4, 1.0, |t| t).unwrap();
        let s = stop_process(&z, 0.6).unwrap();
        assert_eq!(&s.values()[..3], &[0.0, 0.25, 0.5]);
        assert!((s.values()[3] - 0.6).abs() < 1e-15 && (s.values()[4] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn truncated_solutions_agree_before_the_earlier_stop() {
        let (w, z) = drivers(256, 8, 0.7);
        let norms = HolderNorms::for_path(0.3, &z).unwrap();
        let total = *norms.seminorm_profile(&z).unwrap().last().unwrap();
        let cs = CoefficientSet::linear(0.1, 0.2, 0.3);
        let cfg = SolveConfig::new(1.0, 256, 1.0);
        let t1 = tau_n(&z, 0.3, TruncationLevel::new(0.3 * total).unwrap()).unwrap();
        let t2 = tau_n(&z, 0.3, TruncationLevel::new(0.7 * total).unwrap()).unwrap();
        assert!(t1 < t2);
        let x1 = euler_solve_mixed(&cs, &cfg, &w, &stop_process(&z, t1).unwrap()).unwrap();
        let x2 = euler_solve_mixed(&cs, &cfg, &w, &stop_process(&z, t2).unwrap()).unwrap();
        let k = z.index_of(t1).unwrap();
        assert_eq!(&x1.values()[..=k], &x2.values()[..=k]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn smooth_scheme_is_the_mixed_scheme(
            seed in any::<u64>(),
            mu in -1.0f64..1.0,
            amp in -1.0f64..1.0,
            nu in -1.0f64..1.0,
            x0 in -2.0f64..2.0,
            m in 1usize..16,
        ) {
            let (w, z) = drivers(64, seed, 0.7);
            let zs = crate::mollify::mollify(&z, m as f64 / 64.0).unwrap();
            let cs = CoefficientSet {
                a: CoefFn::Linear { slope: mu, intercept: 0.0 },
                b: CoefFn::Tanh { amplitude: amp, rate: 1.0 },
                c: CoefFn::Sine { amplitude: nu, frequency: 1.0, phase: 0.3 },
                k: 3.0,
                k1: Some(1.0),
                beta: 1.0,
            };
            let cfg = SolveConfig::new(x0, 64, 1.0);
            let a = solve_smooth_driver(&cs, &cfg, &w, &zs).unwrap();
            let b = euler_solve_mixed(&cs, &cfg, &w, &zs).unwrap();
            prop_assert!(a.sub(&b).unwrap().sup_abs() <= 1e-10 * (1.0 + b.sup_abs()));
        }
    }
}
