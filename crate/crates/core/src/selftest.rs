//! Analytic example suite behind the `selftest` command.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::Result;
use crate::experiments::apriori::{apriori_inequality_check, AprioriConfig};
use crate::experiments::l2diff::{level_metrics, l2_difference_experiment, L2Config};
use crate::experiments::limit::{limit_theorem_experiment, LimitConfig};
use crate::experiments::moments::{moment_experiment, MomentConfig};
use crate::fracint::{frac_deriv_left, frac_deriv_right, gls_integral, pathwise_bound};
use crate::holder::{norm_2alpha, norm_alpha, norm_infalpha, seminorm_0alpha, HolderNorms};
use crate::io::Table;
use crate::mollify::{build_sequence, mollify, mollify_rate};
use crate::path::GridPath;
use crate::process_gen::{gen_fbm, gen_wiener, holder_constant, FbmGenerator, GenConfig};
use crate::solver::{
    euler_solve_mixed, solve_smooth_driver, stop_process, tau_n, validate_coefficients_with, CoefFn,
    CoefficientSet, SolveConfig, TruncationLevel,
};

/// Tolerance for closed forms evaluated by product integration.
const QUAD_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

fn close(value: f64, exact: f64) -> (bool, String) {
    let err = (value - exact).abs() / exact.abs().max(1.0);
    (err < QUAD_TOL, format!("{value:.10} vs {exact:.10}"))
}

fn exact(value: f64, want: f64) -> (bool, String) {
    (value == want, format!("{value} vs {want}"))
}

fn line(n: usize) -> GridPath {
    GridPath::from_fn(n, 1.0, |t| t).unwrap()
}

fn constant(n: usize, c: f64) -> GridPath {
    GridPath::from_fn(n, 1.0, |_| c).unwrap()
}

fn drivers(n: usize) -> Result<(GridPath, GridPath)> {
    Ok((
        gen_wiener(&GenConfig::new(n, 1.0, 0.5, 101))?,
        gen_fbm(&GenConfig::new(n, 1.0, 0.7, 102))?,
    ))
}

const CHECKS: &[(&str, &str, Check)] = &[
    ("process_gen", "wiener starts at 0 and is deterministic", || {
        let cfg = GenConfig::new(256, 1.0, 0.5, 9);
        let (a, b) = (gen_wiener(&cfg)?, gen_wiener(&cfg)?);
        Ok((a.values()[0] == 0.0 && a == b, format!("W(0) = {}", a.values()[0])))
    }),
    ("process_gen", "fbm starts at 0 and is deterministic", || {
        let cfg = GenConfig::new(256, 1.0, 0.7, 9);
        let (a, b) = (gen_fbm(&cfg)?, gen_fbm(&cfg)?);
        Ok((a.values()[0] == 0.0 && a == b, format!("Z(0) = {}", a.values()[0])))
    }),
    ("process_gen", "fbm covariance at H = 1/2 is min(s, t)", || {
        let n = 16;
        let gen = FbmGenerator::new(n, 1.0, 0.5)?;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                gen.sample_from_normals(&e).map(GridPath::into_values)
            })
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for s in 1..=n {
            for t in 1..=n {
                let cov: f64 = cols.iter().map(|c| c[s] * c[t]).sum();
                worst = worst.max((cov - s.min(t) as f64 / n as f64).abs());
            }
        }
        Ok((worst < 1e-12, format!("max covariance error {worst:.2e}")))
    }),
    ("process_gen", "holder constant of a constant path", || {
        Ok(exact(holder_constant(&constant(64, 3.0), 0.5)?, 0.0))
    }),
    ("process_gen", "holder constant of t at gamma 1/2", || {
        Ok(exact(holder_constant(&line(64), 0.5)?, 1.0))
    }),
    ("holder", "alpha norm of a constant", || Ok(close(norm_alpha(&constant(512, -2.0), 0.3, 1.0)?, 2.0))),
    ("holder", "alpha norm of s at t = 1", || Ok(close(norm_alpha(&line(512), 0.3, 1.0)?, 1.0 + 1.0 / 0.7))),
    ("holder", "seminorm of a constant", || Ok(exact(seminorm_0alpha(&constant(256, 5.0), 0.3, 1.0)?, 0.0))),
    ("holder", "seminorm of s", || Ok(close(seminorm_0alpha(&line(256), 0.4, 1.0)?, 3.5))),
    ("holder", "2-alpha norm of zero", || Ok(exact(norm_2alpha(&constant(256, 0.0), 0.3, 1.0)?, 0.0))),
    ("holder", "2-alpha norm of one", || {
        Ok(close(norm_2alpha(&constant(512, 1.0), 0.3, 1.0)?, (1.0 / 0.7 + 1.0 / 0.2f64).sqrt()))
    }),
    ("holder", "inf-alpha norm of a constant", || Ok(close(norm_infalpha(&constant(256, 1.5), 0.3, 1.0)?, 1.5))),
    ("holder", "inf-alpha norm of s attained at t", || {
        let f = line(256);
        Ok(exact(norm_infalpha(&f, 0.3, 1.0)?, norm_alpha(&f, 0.3, 1.0)?))
    }),
    ("holder", "inf-alpha norm dominates the alpha norm", || {
        let z = gen_fbm(&GenConfig::new(256, 1.0, 0.7, 3))?;
        let (inf, a) = (norm_infalpha(&z, 0.35, 1.0)?, norm_alpha(&z, 0.35, 1.0)?);
        Ok((inf >= a, format!("{inf:.6} >= {a:.6}")))
    }),
    ("fracint", "left derivative of one", || {
        let n = 512;
        let d = frac_deriv_left(&constant(n, 1.0), 0.3, 0.0, 1.0)?;
        let worst = (1..n)
            .map(|k| {
                let want = d.time(k).powf(-0.3) / gamma(0.7);
                (d.values()[k] - want).abs() / want
            })
            .fold(0.0, f64::max);
        Ok((worst < QUAD_TOL, format!("max relative error {worst:.2e}")))
    }),
    ("fracint", "left derivative of x - a", || {
        let n = 512;
        let a = 0.25;
        let f = GridPath::from_fn(n, 1.0, |x| x - a)?;
        let d = frac_deriv_left(&f, 0.3, a, 1.0)?;
        let worst = (1..d.steps())
            .map(|k| {
                let x = d.time(k) - a;
                let want = x.powf(0.7) / gamma(1.7);
                (d.values()[k] - want).abs() / want
            })
            .fold(0.0, f64::max);
        Ok((worst < QUAD_TOL, format!("max relative error {worst:.2e}")))
    }),
    ("fracint", "right derivative of a constant", || {
        let d = frac_deriv_right(&constant(256, 4.0), 0.3, 1.0)?;
        Ok((d.values().iter().all(|v| *v == 0.0), format!("sup {}", d.sup_abs())))
    }),
    ("fracint", "integral of one against s^2", || {
        let g = GridPath::from_fn(2048, 1.0, |s| s * s)?;
        Ok(close(gls_integral(&constant(2048, 1.0), &g, 0.3, 0.0, 1.0)?, 1.0))
    }),
    ("fracint", "integral of s against s^2", || {
        let g = GridPath::from_fn(2048, 1.0, |s| s * s)?;
        Ok(close(gls_integral(&line(2048), &g, 0.3, 0.0, 1.0)?, 2.0 / 3.0))
    }),
    ("fracint", "bound of the zero integrand", || {
        let r = pathwise_bound(&constant(256, 0.0), &line(256), 0.3, 0.0, 1.0)?;
        Ok((r.integral == 0.0 && r.bound == 0.0, format!("{r:?}")))
    }),
    ("fracint", "bound dominates the integral of one against s", || {
        let r = pathwise_bound(&constant(1024, 1.0), &line(1024), 0.3, 0.0, 1.0)?;
        let (ok, detail) = close(r.integral, 1.0);
        Ok((ok && r.bound >= r.integral, format!("{detail}, bound {:.6}", r.bound)))
    }),
    ("mollify", "zero path", || Ok(exact(mollify(&constant(256, 0.0), 0.125)?.sup_abs(), 0.0))),
    ("mollify", "linear path shifts by half the width", || {
        let eps = 0.125;
        let s = mollify(&line(256), eps)?;
        let worst = s
            .times()
            .zip(s.values())
            .filter(|(t, _)| *t >= eps)
            .map(|(t, v)| (v - (t - eps / 2.0)).abs())
            .fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max error {worst:.2e}")))
    }),
    ("mollify", "constant path shifted to zero is rejected", || {
        let ok = mollify_rate(&constant(256, 0.0), 0.35, &[0.25, 0.125, 0.0625, 0.03125]).is_err();
        Ok((ok, "zero error rejected".into()))
    }),
    ("mollify", "sequence with one member", || {
        let z = gen_fbm(&GenConfig::new(256, 1.0, 0.7, 5))?;
        let s = build_sequence(&z, 0.35, 0.25, 0)?;
        Ok((s.paths.len() == 1 && s.paths[0] == mollify(&z, 0.25)?, format!("{} members", s.paths.len())))
    }),
    ("mollify", "sequence of the linear path", || {
        let a0 = 0.25;
        let s = build_sequence(&line(256), 0.35, a0, 3)?;
        let mut worst = 0.0f64;
        for (k, p) in s.paths.iter().enumerate() {
            let a = a0 * 0.5f64.powi(k as i32);
            for (t, v) in p.times().zip(p.values()) {
                if t >= a {
                    worst = worst.max((v - (t - a / 2.0)).abs());
                }
            }
        }
        Ok((worst < 1e-12, format!("max error {worst:.2e}")))
    }),
    ("mixed_solver", "zero coefficients pass validation", || {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let r = validate_coefficients_with(&CoefficientSet::zero(), &grid, &grid, 10_000, 0)?;
        Ok((r.holds(), format!("{} conditions", r.checks.len())))
    }),
    ("mixed_solver", "unbounded b is reported", || {
        let mut cs = CoefficientSet::zero();
        cs.b = CoefFn::Linear {
            slope: 1.0,
            intercept: 0.0,
        };
        let xs: Vec<f64> = (-20..=20).map(|k| k as f64 / 5.0).collect();
        let r = validate_coefficients_with(&cs, &[0.0, 1.0], &xs, 10_000, 0)?;
        let b = r.get("b_bound").map(|c| c.violations).unwrap_or(0);
        Ok((!r.holds() && b > 0, format!("{b} violations")))
    }),
    ("mixed_solver", "pure driver gives x0 + Z", || {
        let (w, z) = drivers(256)?;
        let mut cs = CoefficientSet::zero();
        cs.c = CoefFn::Constant { value: 1.0 };
        let x = euler_solve_mixed(&cs, &SolveConfig::new(0.5, 256, 1.0), &w, &z)?;
        let worst = x.values().iter().zip(z.values()).map(|(x, z)| (x - 0.5 - z).abs()).fold(0.0, f64::max);
        Ok((worst < 1e-14, format!("max error {worst:.2e}")))
    }),
    ("mixed_solver", "zero coefficients keep x0", || {
        let (w, z) = drivers(128)?;
        let x = euler_solve_mixed(&CoefficientSet::zero(), &SolveConfig::new(0.5, 128, 1.0), &w, &z)?;
        Ok((x.values().iter().all(|v| *v == 0.5), format!("sup {}", x.sup_abs())))
    }),
    ("mixed_solver", "smooth driver zero keeps x0", || {
        let (w, _) = drivers(128)?;
        let mut cs = CoefficientSet::zero();
        cs.c = CoefFn::Sine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        };
        let x = solve_smooth_driver(&cs, &SolveConfig::new(0.5, 128, 1.0), &w, &constant(128, 0.0))?;
        Ok((x.values().iter().all(|v| *v == 0.5), format!("sup {}", x.sup_abs())))
    }),
    ("mixed_solver", "smooth and mixed schemes agree", || {
        let (w, z) = drivers(512)?;
        let zs = mollify(&z, 1.0 / 16.0)?;
        let cs = CoefficientSet::linear(0.1, 0.2, 0.3);
        let cfg = SolveConfig::new(1.0, 512, 1.0);
        let a = solve_smooth_driver(&cs, &cfg, &w, &zs)?;
        let b = euler_solve_mixed(&cs, &cfg, &w, &zs)?;
        let gap = a.sub(&b)?.sup_abs();
        Ok((gap <= 1e-10 * (1.0 + b.sup_abs()), format!("max gap {gap:.2e}")))
    }),
    ("mixed_solver", "zero driver is never stopped", || {
        let tau = tau_n(&constant(128, 0.0), 0.35, TruncationLevel::new(1.0)?)?;
        Ok(exact(tau, 1.0))
    }),
    ("mixed_solver", "tiny level stops at the first step", || {
        let z = gen_fbm(&GenConfig::new(128, 1.0, 0.7, 4))?;
        let tau = tau_n(&z, 0.35, TruncationLevel::new(1e-300)?)?;
        Ok(exact(tau, z.time(1)))
    }),
    ("mixed_solver", "stopping at T leaves Z unchanged", || {
        let z = gen_fbm(&GenConfig::new(128, 1.0, 0.7, 4))?;
        Ok((stop_process(&z, 1.0)? == z, "unchanged".into()))
    }),
    ("mixed_solver", "stopping at 0 gives zero", || {
        let z = gen_fbm(&GenConfig::new(128, 1.0, 0.7, 4))?;
        Ok(exact(stop_process(&z, 0.0)?.sup_abs(), 0.0))
    }),
    ("experiments", "no driver coefficient means no deviation", || {
        let mut cfg = LimitConfig::headline();
        cfg.ensemble.n = 64;
        cfg.ensemble.paths = 50;
        cfg.eps = vec![0.25, 0.125, 0.0625];
        cfg.ensemble.coefficients.c = CoefFn::Zero;
        let res = limit_theorem_experiment(&cfg)?;
        let worst = res.summary.levels.iter().map(|l| l.exceed_prob).fold(0.0, f64::max);
        Ok(exact(worst, 0.0))
    }),
    ("experiments", "identical drivers give zero gaps", || {
        let (w, z) = drivers(128)?;
        let cs = CoefficientSet::linear(0.1, 0.2, 0.3);
        let solve = SolveConfig::new(1.0, 128, 1.0);
        let x = euler_solve_mixed(&cs, &solve, &w, &z)?;
        let norms = HolderNorms::new(0.35, solve.dt(), 128)?;
        let l = level_metrics(&cs, &solve, &norms, &w, &z, &x, &z)?;
        Ok((l.driver_gap == 0.0 && l.sup_dev < 1e-12, format!("{:.2e}, {:.2e}", l.sup_dev, l.driver_gap)))
    }),
    ("experiments", "event grows with the level", || {
        let mut cfg = L2Config::headline();
        cfg.ensemble.n = 64;
        cfg.ensemble.paths = 50;
        cfg.pilot_paths = 10;
        cfg.eps = vec![0.25, 0.125, 0.0625];
        let res = l2_difference_experiment(&cfg)?;
        let (n, r) = (res.summary.level, res.summary.radius);
        let monotone = res.records.iter().all(|rec| {
            (0..cfg.eps.len()).all(|j| {
                let hits: Vec<bool> = [0.5, 1.0, 2.0].iter().map(|s| rec.in_event(j, s * n, r)).collect();
                hits.windows(2).all(|h| h[1] || !h[0])
            })
        });
        Ok((monotone, "indicator monotone in N".into()))
    }),
    ("experiments", "zero coefficients give exact moments", || {
        let mut cfg = MomentConfig::headline();
        cfg.ensemble.n = 64;
        cfg.ensemble.paths = 20;
        cfg.ensemble.coefficients = CoefficientSet::zero();
        cfg.ensemble.x0 = -1.5;
        cfg.exp_scale = 0.0;
        let res = moment_experiment(&cfg)?;
        let ok = res.summary.moments.iter().all(|m| {
            let want = 1.5f64.powf(m.p);
            m.coarse == want && m.fine == want
        }) && res.summary.exp_moment.estimate == 1.0;
        Ok((ok, "moments |x0|^p, exponential moment 1".into()))
    }),
    ("experiments", "zero coefficients give ratio 0", || {
        let mut cfg = AprioriConfig::headline();
        cfg.ensemble.n = 64;
        cfg.ensemble.paths = 10;
        cfg.ensemble.coefficients = CoefficientSet::zero();
        cfg.ensemble.x0 = 0.0;
        Ok(exact(apriori_inequality_check(&cfg)?.summary.max_ratio, 0.0))
    }),
];

/// Runs every check; errors count as failures.
pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(module, name, check)| {
            let (passed, detail) = match check() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect()
}

pub fn table(results: &[CheckResult]) -> Table {
    let mut t = Table::new(&["module", "check", "result", "detail"]);
    for r in results {
        t.push(vec![
            r.module.into(),
            r.name.into(),
            if r.passed { "pass" } else { "FAIL" }.into(),
            r.detail.clone().into(),
        ]);
    }
    t
}
