//! Moments of `‖X‖_{∞,α;T}` at grid sizes `n` and `2n`, and the
//! exponential moment `E exp(a ‖Z‖_{0,α;T}^{1/(1-2α)})` of the driver.
//!
//! Both grids see the same realization: drivers are drawn on the fine grid
//! and subsampled.

use serde::{Deserialize, Serialize};

use super::{catch_overflow, failure_gate, Drivers, EnsembleConfig, EnsembleResult, PathStatus, PlotData, Tabular};
use crate::error::{Error, Result};
use crate::exec;
use crate::holder::HolderNorms;
use crate::io::Table;
use crate::process_gen::MAX_FBM_STEPS;
use crate::solver::{euler_solve_mixed, CoefFn, CoefficientSet, SolveConfig};
use crate::stats;

/// Relative change between the half-ensemble and full-ensemble running
/// means below which the exponential moment counts as settled.
const SETTLE_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    #[serde(flatten)]
    pub ensemble: EnsembleConfig,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    /// Scale `a` of the exponential moment.
    #[serde(default = "default_scale")]
    pub exp_scale: f64,
}

fn default_p() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

fn default_scale() -> f64 {
    0.05
}

impl MomentConfig {
    /// `a = 0.1x`, `b = 0.5 tanh(x)`, `c = 0.3x`, `H = 0.8`, `α = 0.2`,
    /// `n = 1024` (fine grid 2048), `M = 200`.
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
                hurst: 0.8,
                alpha: 0.2,
                paths: 200,
                seed: 20_240_603,
            },
            p: default_p(),
            exp_scale: default_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.ensemble;
        e.validate(2)?;
        if e.coefficients.k1.is_none() {
            return Err(Error::config("moment experiment needs a bounded b: declare K1"));
        }
        if !(e.alpha < 0.25) {
            return Err(Error::config(format!(
                "moment experiment needs alpha < 1/4, got {}",
                e.alpha
            )));
        }
        if !(e.hurst > 0.75) {
            return Err(Error::config(format!(
                "moment experiment needs H > 3/4, got {}",
                e.hurst
            )));
        }
        if 2 * e.n > MAX_FBM_STEPS {
            return Err(Error::config(format!(
                "fine grid 2n = {} exceeds the fBm cap {MAX_FBM_STEPS}",
                2 * e.n
            )));
        }
        if self.p.is_empty() || self.p.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::config(format!("moment orders must be positive, got {:?}", self.p)));
        }
        if !(self.exp_scale >= 0.0) {
            return Err(Error::config(format!(
                "exponential scale must be non-negative, got {}",
                self.exp_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub index: usize,
    pub seed_w: u64,
    pub seed_z: u64,
    pub status: PathStatus,
    /// `‖X‖_{∞,α;T}` on the `n` grid.
    pub inf_norm_coarse: f64,
    /// `‖X‖_{∞,α;T}` on the `2n` grid.
    pub inf_norm_fine: f64,
    /// `‖Z‖_{0,α;T}` on the `2n` grid.
    pub driver_seminorm: f64,
    /// `exp(a ‖Z‖^{1/(1-2α)})`.
    pub exp_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: f64,
    pub coarse: f64,
    pub fine: f64,
    /// `fine / coarse`.
    pub ratio: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub scale: f64,
    pub exponent: f64,
    pub estimate: f64,
    /// Running means after a quarter, half, three quarters and all paths.
    pub running: Vec<(usize, f64)>,
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub paths: usize,
    pub failed: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub moments: Vec<MomentRow>,
    pub exp_moment: ExpMoment,
}

pub type MomentResult = EnsembleResult<MomentConfig, MomentRecord, MomentSummary>;

pub fn aggregate(cfg: &MomentConfig, records: &[MomentRecord]) -> Result<MomentSummary> {
    let ok: Vec<&MomentRecord> = records.iter().filter(|r| r.status.is_ok()).collect();
    let failed = records.len() - ok.len();
    failure_gate(failed, records.len())?;
    let moments = cfg
        .p
        .iter()
        .map(|&p| {
            let coarse = stats::mean(&ok.iter().map(|r| r.inf_norm_coarse.powf(p)).collect::<Vec<_>>());
            let fine = stats::mean(&ok.iter().map(|r| r.inf_norm_fine.powf(p)).collect::<Vec<_>>());
            MomentRow {
                p,
                coarse,
                fine,
                ratio: fine / coarse,
                finite: coarse.is_finite() && fine.is_finite(),
            }
        })
        .collect();
    let terms: Vec<f64> = ok.iter().map(|r| r.exp_term).collect();
    let m = terms.len();
    let running: Vec<(usize, f64)> = [m / 4, m / 2, 3 * m / 4, m]
        .into_iter()
        .filter(|&k| k > 0)
        .map(|k| (k, stats::mean(&terms[..k])))
        .collect();
    let estimate = stats::mean(&terms);
    let half = stats::mean(&terms[..(m / 2).max(1)]);
    Ok(MomentSummary {
        paths: records.len(),
        failed,
        n_coarse: cfg.ensemble.n,
        n_fine: 2 * cfg.ensemble.n,
        moments,
        exp_moment: ExpMoment {
            scale: cfg.exp_scale,
            exponent: 1.0 / (1.0 - 2.0 * cfg.ensemble.alpha),
            settled: estimate.is_finite() && (estimate / half - 1.0).abs() < SETTLE_TOL,
            estimate,
            running,
        },
    })
}

pub fn moment_experiment(cfg: &MomentConfig) -> Result<MomentResult> {
    cfg.validate()?;
    let e = &cfg.ensemble;
    let fine_n = 2 * e.n;
    let drivers = Drivers::new(fine_n, e.horizon, e.hurst, e.seed)?;
    let coarse_norms = HolderNorms::new(e.alpha, e.dt(), e.n)?;
    let fine_norms = HolderNorms::new(e.alpha, e.dt() / 2.0, fine_n)?;
    let coarse_cfg = e.solve_config();
    let fine_cfg = SolveConfig {
        n: fine_n,
        ..coarse_cfg.clone()
    };
    let exponent = 1.0 / (1.0 - 2.0 * e.alpha);
    let records = exec::map_indexed(e.paths, |i| -> Result<MomentRecord> {
        let (seed_w, seed_z) = drivers.seeds(i);
        let (w, z) = drivers.sample(i)?;
        let lambda = *fine_norms.seminorm_profile(&z)?.last().unwrap();
        let mut rec = MomentRecord {
            index: i,
            seed_w,
            seed_z,
            status: PathStatus::Ok,
            inf_norm_coarse: f64::NAN,
            inf_norm_fine: f64::NAN,
            driver_seminorm: lambda,
            exp_term: (cfg.exp_scale * lambda.powf(exponent)).exp(),
        };
        let fine = catch_overflow(euler_solve_mixed(&e.coefficients, &fine_cfg, &w, &z))?;
        let (wc, zc) = (w.subsample(2)?, z.subsample(2)?);
        let coarse = catch_overflow(euler_solve_mixed(&e.coefficients, &coarse_cfg, &wc, &zc))?;
        match (coarse, fine) {
            (Ok(xc), Ok(xf)) => {
                rec.inf_norm_coarse = *coarse_norms.norm_infalpha_profile(&xc)?.last().unwrap();
                rec.inf_norm_fine = *fine_norms.norm_infalpha_profile(&xf)?.last().unwrap();
            }
            (Err(s), _) | (_, Err(s)) => rec.status = s,
        }
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(cfg, &records)?;
    Ok(EnsembleResult {
        experiment: "moments".into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

impl Tabular for MomentRecord {
    fn table(items: &[Self]) -> Table {
        let mut t = Table::new(&[
            "index",
            "seed_w",
            "seed_z",
            "status",
            "inf_norm_coarse",
            "inf_norm_fine",
            "driver_seminorm",
            "exp_term",
        ]);
        for r in items {
            t.push(vec![
                r.index.into(),
                r.seed_w.into(),
                r.seed_z.into(),
                r.status.label().into(),
                r.inf_norm_coarse.into(),
                r.inf_norm_fine.into(),
                r.driver_seminorm.into(),
                r.exp_term.into(),
            ]);
        }
        t
    }
}

impl PlotData for MomentSummary {
    fn plot_table(&self) -> Table {
        let mut t = Table::new(&["p", "moment_coarse", "moment_fine", "ratio"]);
        for m in &self.moments {
            t.push(vec![m.p.into(), m.coarse.into(), m.fine.into(), m.ratio.into()]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MomentConfig {
        let mut cfg = MomentConfig::headline();
        cfg.ensemble.n = 64;
        cfg.ensemble.paths = 40;
        cfg
    }

    #[test]
    fn zero_coefficients_give_exact_moments() {
        let mut cfg = small();
        cfg.ensemble.coefficients = CoefficientSet::zero();
        cfg.ensemble.x0 = -1.5;
        cfg.exp_scale = 0.0;
        let res = moment_experiment(&cfg).unwrap();
        for m in &res.summary.moments {
            let want = 1.5f64.powf(m.p);
            assert_eq!(m.coarse, want);
            assert_eq!(m.fine, want);
        }
        assert_eq!(res.summary.exp_moment.estimate, 1.0);
        assert!(res.records.iter().all(|r| r.exp_term == 1.0));
    }

    #[test]
    fn moments_are_finite_and_recomputable() {
        let cfg = small();
        let res = moment_experiment(&cfg).unwrap();
        assert!(res.summary.moments.iter().all(|m| m.finite && m.ratio > 0.5 && m.ratio < 2.0));
        assert_eq!(aggregate(&cfg, &res.records).unwrap(), res.summary);
        assert!(res.summary.exp_moment.estimate >= 1.0);
    }

    #[test]
    fn preconditions() {
        let mut cfg = small();
        cfg.ensemble.coefficients.k1 = None;
        assert!(cfg.validate().unwrap_err().is_config());
        let mut cfg = small();
        cfg.ensemble.alpha = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.ensemble.hurst = 0.7;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.ensemble.n = 4096;
        assert!(cfg.validate().is_err());
    }
}
