//! Spot check of the a priori estimate
//! `‖X‖_t <= C ‖Z‖_{0,t} (1 + ∫_0^t ‖X‖_s (s^{-α} + (t-s)^{-2α}) ds) + I_b(t)`,
//! with `I_b(t)` the α-norm of the Itô integral `∫ b(s, X_s) dW_s`.
//!
//! The constant `C` is not known, so the check reports the largest ratio of
//! left to right side over paths and over a strided time subgrid (`t = 0`
//! excluded) and whether it stays put when the ensemble is halved.

use serde::{Deserialize, Serialize};

use super::{catch_overflow, failure_gate, safe_ratio, Drivers, EnsembleConfig, EnsembleResult, PathStatus, PlotData, Tabular};
use crate::error::{Error, Result};
use crate::exec;
use crate::holder::HolderNorms;
use crate::io::Table;
use crate::path::GridPath;
use crate::quadrature::PowerKernel;
use crate::solver::{euler_solve_mixed, CoefFn, CoefficientSet};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriConfig {
    #[serde(flatten)]
    pub ensemble: EnsembleConfig,
    /// Subgrid stride in steps; defaults to `n / 32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl AprioriConfig {
    /// `a = 0.1x`, `b = 0.5 tanh(x)`, `c = 0.3x`, `H = 0.7`, `α = 0.35`,
    /// `n = 1024`, `M = 100`.
    pub fn headline() -> Self {
        Self {
            ensemble: EnsembleConfig {
                coefficients: CoefficientSet {
                    a: CoefFn::Linear {
                        slope: 0.1,
                        intercept: 0.0,
                    },
                    b: CoefFn::Tanh {
                        amplitude: 0.5,
                        rate: 1.0,
                    },
                    c: CoefFn::Linear {
                        slope: 0.3,
                        intercept: 0.0,
                    },
                    k: 1.0,
                    k1: Some(0.5),
                    beta: 1.0,
                },
                x0: 1.0,
                n: 1024,
                horizon: 1.0,
                hurst: 0.7,
                alpha: 0.35,
                paths: 100,
                seed: 20_240_604,
            },
            stride: None,
        }
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or((self.ensemble.n / 32).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate(2)?;
        if self.ensemble.coefficients.k1.is_none() {
            return Err(Error::config("a priori check needs a bounded b: declare K1"));
        }
        let s = self.stride();
        if s == 0 || s > self.ensemble.n {
            return Err(Error::config(format!(
                "stride must lie in [1, n = {}], got {s}",
                self.ensemble.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriRecord {
    pub index: usize,
    pub seed_w: u64,
    pub seed_z: u64,
    pub status: PathStatus,
    pub max_ratio: f64,
    /// Time of the largest ratio.
    pub at_time: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriSummary {
    pub paths: usize,
    pub failed: usize,
    pub max_ratio: f64,
    /// Maximum over the first half of the paths.
    pub max_ratio_half: f64,
    pub median_ratio: f64,
    /// `max_ratio` within 50% of `max_ratio_half`.
    pub stable: bool,
}

pub type AprioriResult = EnsembleResult<AprioriConfig, AprioriRecord, AprioriSummary>;

/// Left and right side of the estimate (without `C`) at one grid index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates both sides at grid indices `stride, 2 stride, ..., <= n`.
pub struct AprioriEvaluator {
    norms: HolderNorms,
    left: PowerKernel,
    right: PowerKernel,
    stride: usize,
}

impl AprioriEvaluator {
    pub fn new(alpha: f64, dt: f64, n: usize, stride: usize) -> Result<Self> {
        Ok(Self {
            norms: HolderNorms::new(alpha, dt, n)?,
            left: PowerKernel::new(alpha, dt, n),
            right: PowerKernel::new(2.0 * alpha, dt, n),
            stride,
        })
    }

    pub fn sides(&self, cs: &CoefficientSet, w: &GridPath, z: &GridPath, x: &GridPath) -> Result<Vec<(usize, Sides)>> {
        let dt = x.dt();
        let (xv, wv) = (x.values(), w.values());
        let mut ito = Vec::with_capacity(xv.len());
        let mut acc = 0.0;
        ito.push(0.0);
        for k in 0..x.steps() {
            acc += cs.b.value(k as f64 * dt, xv[k]) * (wv[k + 1] - wv[k]);
            ito.push(acc);
        }
        let ito = GridPath::from_parts_unchecked(x.t0(), dt, ito);
        let px = self.norms.norm_alpha_profile(x)?;
        let pb = self.norms.norm_alpha_profile(&ito)?;
        let lambda = self.norms.seminorm_profile(z)?;
        Ok((self.stride..=x.steps())
            .step_by(self.stride)
            .map(|m| {
                let integral =
                    self.left.integrate_lags(m, |k| px[k]) + self.right.integrate_lags(m, |k| px[m - k]);
                let sides = Sides {
                    lhs: px[m],
                    rhs: lambda[m] * (1.0 + integral) + pb[m],
                };
                (m, sides)
            })
            .collect())
    }
}

pub fn aggregate(records: &[AprioriRecord]) -> Result<AprioriSummary> {
    let ok: Vec<&AprioriRecord> = records.iter().filter(|r| r.status.is_ok()).collect();
    let failed = records.len() - ok.len();
    failure_gate(failed, records.len())?;
    let ratios: Vec<f64> = ok.iter().map(|r| r.max_ratio).collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let half_len = records.len().div_ceil(2);
    let max_half = ok
        .iter()
        .filter(|r| r.index < half_len)
        .map(|r| r.max_ratio)
        .fold(0.0, f64::max);
    Ok(AprioriSummary {
        paths: records.len(),
        failed,
        max_ratio: max,
        max_ratio_half: max_half,
        median_ratio: stats::median(&ratios),
        stable: max == 0.0 || (max.is_finite() && max <= 1.5 * max_half),
    })
}

pub fn apriori_inequality_check(cfg: &AprioriConfig) -> Result<AprioriResult> {
    cfg.validate()?;
    let e = &cfg.ensemble;
    let drivers = Drivers::new(e.n, e.horizon, e.hurst, e.seed)?;
    let eval = AprioriEvaluator::new(e.alpha, e.dt(), e.n, cfg.stride())?;
    let solve = e.solve_config();
    let records = exec::map_indexed(e.paths, |i| -> Result<AprioriRecord> {
        let (seed_w, seed_z) = drivers.seeds(i);
        let (w, z) = drivers.sample(i)?;
        let mut rec = AprioriRecord {
            index: i,
            seed_w,
            seed_z,
            status: PathStatus::Ok,
            max_ratio: f64::NAN,
            at_time: f64::NAN,
            lhs: f64::NAN,
            rhs: f64::NAN,
        };
        let x = match catch_overflow(euler_solve_mixed(&e.coefficients, &solve, &w, &z))? {
            Ok(x) => x,
            Err(s) => {
                rec.status = s;
                return Ok(rec);
            }
        };
        let mut best = (-1.0, 0, Sides { lhs: 0.0, rhs: 0.0 });
        for (m, s) in eval.sides(&e.coefficients, &w, &z, &x)? {
            let r = safe_ratio(s.lhs, s.rhs);
            if r > best.0 {
                best = (r, m, s);
            }
        }
        rec.max_ratio = best.0;
        rec.at_time = x.time(best.1);
        rec.lhs = best.2.lhs;
        rec.rhs = best.2.rhs;
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&records)?;
    Ok(EnsembleResult {
        experiment: "apriori".into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

impl Tabular for AprioriRecord {
    fn table(items: &[Self]) -> Table {
        let mut t = Table::new(&["index", "seed_w", "seed_z", "status", "max_ratio", "at_time", "lhs", "rhs"]);
        for r in items {
            t.push(vec![
                r.index.into(),
                r.seed_w.into(),
                r.seed_z.into(),
                r.status.label().into(),
                r.max_ratio.into(),
                r.at_time.into(),
                r.lhs.into(),
                r.rhs.into(),
            ]);
        }
        t
    }
}

impl PlotData for AprioriSummary {
    fn plot_table(&self) -> Table {
        let mut t = Table::new(&["paths_used", "max_ratio"]);
        t.push(vec![self.paths.div_ceil(2).into(), self.max_ratio_half.into()]);
        t.push(vec![self.paths.into(), self.max_ratio.into()]);
        t
    }
}
