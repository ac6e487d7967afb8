//! Convergence in probability of smoothed-driver solutions.
//!
//! For each path the reference `X` solves the mixed equation with the raw
//! driver `Z`, and `X^ε` solves the random-drift equation driven by `Z^ε`.
//! The aggregate is the empirical probability that `sup_t |X^ε - X|`
//! exceeds a threshold, per width `ε`.

use serde::{Deserialize, Serialize};

use super::{
    catch_overflow, eps_steps, failure_gate, Drivers, EnsembleConfig, EnsembleResult, PathStatus,
    PlotData, Tabular,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::holder::HolderNorms;
use crate::io::Table;
use crate::mollify::mollify_steps;
use crate::solver::{euler_solve_mixed, solve_smooth_driver, CoefficientSet};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    #[serde(flatten)]
    pub ensemble: EnsembleConfig,
    /// Smoothing widths, coarsest first.
    pub eps: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.05
}

impl LimitConfig {
    /// Linear coefficients `(0.1, 0.2, 0.3)`, `H = 0.7`, `n = 2048`,
    /// `M = 200`, `ε = 2^{-3}, ..., 2^{-8}`, threshold `0.05`.
    pub fn headline() -> Self {
        Self {
            ensemble: EnsembleConfig {
                coefficients: CoefficientSet::linear(0.1, 0.2, 0.3),
                x0: 1.0,
                n: 2048,
                horizon: 1.0,
                hurst: 0.7,
                alpha: 0.35,
                paths: 200,
                seed: 20_240_601,
            },
            eps: (3..=8).map(|k| 0.5f64.powi(k)).collect(),
            threshold: 0.05,
        }
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        self.ensemble.validate(50)?;
        if !(self.threshold > 0.0) {
            return Err(Error::config(format!(
                "deviation threshold must be positive, got {}",
                self.threshold
            )));
        }
        eps_steps(&self.eps, self.ensemble.dt(), self.ensemble.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLevel {
    pub eps: f64,
    /// `sup_t |X^ε_t - X_t|`.
    pub sup_dev: f64,
    /// `‖Z - Z^ε‖_{0,α;T}`.
    pub driver_gap: f64,
    /// `‖X - X^ε‖_{2,α;T}`.
    pub norm2_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub index: usize,
    pub seed_w: u64,
    pub seed_z: u64,
    pub status: PathStatus,
    /// One entry per width; empty for failed paths.
    pub levels: Vec<LimitLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLevelSummary {
    pub eps: f64,
    pub exceed_prob: f64,
    pub std_err: f64,
    pub median_sup_dev: f64,
    pub median_driver_gap: f64,
    pub median_norm2_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub paths: usize,
    pub failed: usize,
    pub threshold: f64,
    pub levels: Vec<LimitLevelSummary>,
    /// Each refinement step keeps the probability within two standard errors
    /// of non-increasing.
    pub non_increasing: bool,
    pub finest_prob: f64,
    /// Medians of `‖X - X^ε‖_{2,α;T}` decrease with `ε`.
    pub norm2_decreasing: bool,
}

pub type LimitResult = EnsembleResult<LimitConfig, LimitRecord, LimitSummary>;

/// True when `p[k + 1] - 2 se[k + 1] <= p[k] + 2 se[k]` for every step.
pub fn non_increasing_within_noise(levels: &[LimitLevelSummary]) -> bool {
    levels
        .windows(2)
        .all(|w| w[1].exceed_prob - 2.0 * w[1].std_err <= w[0].exceed_prob + 2.0 * w[0].std_err)
}

/// Rebuilds the summary from the per-path records.
pub fn aggregate(cfg: &LimitConfig, records: &[LimitRecord]) -> Result<LimitSummary> {
    let ok: Vec<&LimitRecord> = records.iter().filter(|r| r.status.is_ok()).collect();
    let failed = records.len() - ok.len();
    failure_gate(failed, records.len())?;
    let used = ok.len();
    let levels: Vec<LimitLevelSummary> = cfg
        .eps
        .iter()
        .enumerate()
        .map(|(j, _)| {
            let col = |f: fn(&LimitLevel) -> f64| -> Vec<f64> { ok.iter().map(|r| f(&r.levels[j])).collect() };
            let dev = col(|l| l.sup_dev);
            let hits = dev.iter().filter(|d| **d > cfg.threshold).count();
            let p = hits as f64 / used as f64;
            LimitLevelSummary {
                eps: ok.first().map_or(cfg.eps[j], |r| r.levels[j].eps),
                exceed_prob: p,
                std_err: stats::binomial_se(p, used),
                median_sup_dev: stats::median(&dev),
                median_driver_gap: stats::median(&col(|l| l.driver_gap)),
                median_norm2_dev: stats::median(&col(|l| l.norm2_dev)),
            }
        })
        .collect();
    Ok(LimitSummary {
        paths: records.len(),
        failed,
        threshold: cfg.threshold,
        non_increasing: non_increasing_within_noise(&levels),
        finest_prob: levels.last().map_or(f64::NAN, |l| l.exceed_prob),
        norm2_decreasing: levels
            .windows(2)
            .all(|w| w[1].median_norm2_dev < w[0].median_norm2_dev),
        levels,
    })
}

pub fn limit_theorem_experiment(cfg: &LimitConfig) -> Result<LimitResult> {
    let steps = cfg.validate()?;
    let e = &cfg.ensemble;
    let drivers = Drivers::new(e.n, e.horizon, e.hurst, e.seed)?;
    let norms = HolderNorms::new(e.alpha, e.dt(), e.n)?;
    let solve = e.solve_config();
    let dt = e.dt();
    let records = exec::map_indexed(e.paths, |i| -> Result<LimitRecord> {
        let (seed_w, seed_z) = drivers.seeds(i);
        let (w, z) = drivers.sample(i)?;
        let mut rec = LimitRecord {
            index: i,
            seed_w,
            seed_z,
            status: PathStatus::Ok,
            levels: Vec::with_capacity(steps.len()),
        };
        let x = match catch_overflow(euler_solve_mixed(&e.coefficients, &solve, &w, &z))? {
            Ok(x) => x,
            Err(status) => {
                rec.status = status;
                return Ok(rec);
            }
        };
        for &m in &steps {
            let zs = mollify_steps(&z, m);
            let xe = match catch_overflow(solve_smooth_driver(&e.coefficients, &solve, &w, &zs))? {
                Ok(xe) => xe,
                Err(status) => {
                    rec.status = status;
                    rec.levels.clear();
                    return Ok(rec);
                }
            };
            let dev = x.sub(&xe)?;
            rec.levels.push(LimitLevel {
                eps: m as f64 * dt,
                sup_dev: dev.sup_abs(),
                driver_gap: *norms.seminorm_profile(&z.sub(&zs)?)?.last().unwrap(),
                norm2_dev: norms.norm_2alpha_at(&dev, e.n)?,
            });
        }
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(cfg, &records)?;
    Ok(EnsembleResult {
        experiment: "converge".into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

impl Tabular for LimitRecord {
    fn table(items: &[Self]) -> Table {
        let mut t = Table::new(&[
            "index",
            "seed_w",
            "seed_z",
            "status",
            "eps",
            "sup_dev",
            "driver_gap",
            "norm2_dev",
        ]);
        for r in items {
            let head = || -> Vec<crate::io::Cell> {
                vec![r.index.into(), r.seed_w.into(), r.seed_z.into(), r.status.label().into()]
            };
            if r.levels.is_empty() {
                let mut row = head();
                row.extend([f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into()]);
                t.push(row);
            }
            for l in &r.levels {
                let mut row = head();
                row.extend([l.eps.into(), l.sup_dev.into(), l.driver_gap.into(), l.norm2_dev.into()]);
                t.push(row);
            }
        }
        t
    }
}

impl PlotData for LimitSummary {
    fn plot_table(&self) -> Table {
        let mut t = Table::new(&[
            "eps",
            "exceed_prob",
            "std_err",
            "median_sup_dev",
            "median_driver_gap",
            "median_norm2_dev",
        ]);
        for l in &self.levels {
            t.push(vec![
                l.eps.into(),
                l.exceed_prob.into(),
                l.std_err.into(),
                l.median_sup_dev.into(),
                l.median_driver_gap.into(),
                l.median_norm2_dev.into(),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::CoefFn;

    fn small() -> LimitConfig {
        let mut cfg = LimitConfig::headline();
        cfg.ensemble.n = 128;
        cfg.ensemble.paths = 50;
        cfg.eps = vec![0.25, 0.125, 0.0625, 0.03125];
        cfg
    }

    #[test]
    fn no_pathwise_diffusion_means_no_deviation() {
        let mut cfg = small();
        cfg.ensemble.coefficients.c = CoefFn::Zero;
        let res = limit_theorem_experiment(&cfg).unwrap();
        for r in &res.records {
            assert!(r.levels.iter().all(|l| l.sup_dev == 0.0 && l.norm2_dev == 0.0));
        }
        assert!(res.summary.levels.iter().all(|l| l.exceed_prob == 0.0));
    }

    #[test]
    fn aggregate_is_recomputable_and_levels_shrink() {
        let cfg = small();
        let res = limit_theorem_experiment(&cfg).unwrap();
        assert_eq!(res.records.len(), 50);
        assert_eq!(aggregate(&cfg, &res.records).unwrap(), res.summary);
        let gaps: Vec<f64> = res.summary.levels.iter().map(|l| l.median_driver_gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        let devs: Vec<f64> = res.summary.levels.iter().map(|l| l.median_sup_dev).collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    }

    #[test]
    fn failures_beyond_tolerance_abort() {
        let mut cfg = small();
        cfg.ensemble.coefficients = CoefficientSet::linear(40.0, 0.0, 0.0);
        let err = limit_theorem_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::TooManyFailures { failed: 50, total: 50 }));
    }

    #[test]
    fn config_checks() {
        let mut cfg = small();
        cfg.ensemble.paths = 10;
        assert!(cfg.validate().unwrap_err().is_config());
        let mut cfg = small();
        cfg.eps = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.threshold = 0.0;
        assert!(cfg.validate().is_err());
        let json = serde_json::to_string(&LimitConfig::headline()).unwrap();
        let back: LimitConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, LimitConfig::headline());
    }

    #[test]
    fn noise_band() {
        let lvl = |p: f64, se: f64| LimitLevelSummary {
            eps: 0.0,
            exceed_prob: p,
            std_err: se,
            median_sup_dev: 0.0,
            median_driver_gap: 0.0,
            median_norm2_dev: 0.0,
        };
        assert!(non_increasing_within_noise(&[lvl(0.3, 0.03), lvl(0.2, 0.03), lvl(0.25, 0.03)]));
        assert!(!non_increasing_within_noise(&[lvl(0.1, 0.01), lvl(0.3, 0.01)]));
    }
}
