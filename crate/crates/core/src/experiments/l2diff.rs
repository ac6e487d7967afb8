//! Mean-square solution gap against mean-square driver gap on the
//! localization event `A = {‖Z‖, ‖Z^ε‖ <= N and sup|X|, sup|X^ε| <= R}`.
//!
//! Unless given explicitly, `N` and `R` are quantiles of the per-path
//! maxima over a separate pilot ensemble.

use serde::{Deserialize, Serialize};

use super::{
    catch_overflow, eps_steps, failure_gate, Drivers, EnsembleConfig, EnsembleResult, PathStatus,
    PlotData, Tabular,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::holder::HolderNorms;
use crate::io::{Cell, Table};
use crate::mollify::mollify_steps;
use crate::path::GridPath;
use crate::process_gen::path_seed;
use crate::solver::{euler_solve_mixed, solve_smooth_driver, CoefficientSet, SolveConfig};
use crate::stats;

/// Mixed into the master seed to give the pilot ensemble its own stream.
const PILOT_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Config {
    #[serde(flatten)]
    pub ensemble: EnsembleConfig,
    pub eps: Vec<f64>,
    #[serde(default = "default_pilot")]
    pub pilot_paths: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    /// Driver seminorm level; taken from the pilot when absent.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Solution sup-norm radius; taken from the pilot when absent.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

fn default_pilot() -> usize {
    50
}

fn default_quantile() -> f64 {
    0.9
}

impl L2Config {
    /// Linear coefficients `(0.1, 0.2, 0.3)`, `H = 0.7`, `n = 1024`,
    /// `M = 200`, `ε = 2^{-3}, ..., 2^{-8}`.
    pub fn headline() -> Self {
        Self {
            ensemble: EnsembleConfig {
                coefficients: CoefficientSet::linear(0.1, 0.2, 0.3),
                x0: 1.0,
                n: 1024,
                horizon: 1.0,
                hurst: 0.7,
                alpha: 0.35,
                paths: 200,
                seed: 20_240_602,
            },
            eps: (3..=8).map(|k| 0.5f64.powi(k)).collect(),
            pilot_paths: 50,
            quantile: 0.9,
            level: None,
            radius: None,
        }
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        self.ensemble.validate(50)?;
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::config(format!(
                "pilot quantile must lie in (0, 1], got {}",
                self.quantile
            )));
        }
        for (name, v) in [("N", self.level), ("R", self.radius)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if (self.level.is_none() || self.radius.is_none()) && self.pilot_paths < 2 {
            return Err(Error::config("pilot ensemble needs at least 2 paths"));
        }
        eps_steps(&self.eps, self.ensemble.dt(), self.ensemble.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Level {
    pub eps: f64,
    /// `sup_t |X_t - X^ε_t|`.
    pub sup_dev: f64,
    /// `‖Z - Z^ε‖_{0,α;T}`.
    pub driver_gap: f64,
    /// `‖Z^ε‖_{0,α;T}`.
    pub smooth_seminorm: f64,
    /// `sup_t |X^ε_t|`.
    pub smooth_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Record {
    pub index: usize,
    pub seed_w: u64,
    pub seed_z: u64,
    pub status: PathStatus,
    /// `‖Z‖_{0,α;T}`.
    pub driver_seminorm: f64,
    /// `sup_t |X_t|`.
    pub sup_x: f64,
    pub levels: Vec<L2Level>,
}

impl L2Record {
    /// Indicator of the localization event at width index `j`.
    pub fn in_event(&self, j: usize, level: f64, radius: f64) -> bool {
        let l = &self.levels[j];
        self.status.is_ok()
            && self.driver_seminorm <= level
            && l.smooth_seminorm <= level
            && self.sup_x <= radius
            && l.smooth_sup <= radius
    }

    fn max_seminorm(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.smooth_seminorm)
            .fold(self.driver_seminorm, f64::max)
    }

    fn max_sup(&self) -> f64 {
        self.levels.iter().map(|l| l.smooth_sup).fold(self.sup_x, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSummary {
    pub paths: usize,
    pub failed: usize,
    pub quantile: f64,
    #[serde(rename = "N")]
    pub level: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2LevelSummary {
    pub eps: f64,
    pub in_event: usize,
    /// `E[sup|X - X^ε|² 1_A]`.
    pub mean_sq_dev: f64,
    /// `E[‖Z - Z^ε‖²_{0,α;T} 1_A]`.
    pub mean_sq_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Summary {
    pub paths: usize,
    pub failed: usize,
    #[serde(rename = "N")]
    pub level: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub pilot: Option<PilotSummary>,
    pub levels: Vec<L2LevelSummary>,
    /// Widths that entered the fit.
    pub fitted_levels: usize,
    /// Log-log slope of the mean-square solution gap against the
    /// mean-square driver gap.
    pub slope: f64,
    pub intercept: f64,
}

pub type L2Result = EnsembleResult<L2Config, L2Record, L2Summary>;

/// Solution and driver gaps for one smoothed driver.
pub fn level_metrics(
    cs: &CoefficientSet,
    cfg: &SolveConfig,
    norms: &HolderNorms,
    w: &GridPath,
    z: &GridPath,
    x: &GridPath,
    zs: &GridPath,
) -> Result<L2Level> {
    let xe = solve_smooth_driver(cs, cfg, w, zs)?;
    Ok(L2Level {
        eps: f64::NAN,
        sup_dev: x.sub(&xe)?.sup_abs(),
        driver_gap: *norms.seminorm_profile(&z.sub(zs)?)?.last().unwrap(),
        smooth_seminorm: *norms.seminorm_profile(zs)?.last().unwrap(),
        smooth_sup: xe.sup_abs(),
    })
}

fn run_paths(cfg: &L2Config, steps: &[usize], master: u64, count: usize) -> Result<Vec<L2Record>> {
    let e = &cfg.ensemble;
    let drivers = Drivers::new(e.n, e.horizon, e.hurst, master)?;
    let norms = HolderNorms::new(e.alpha, e.dt(), e.n)?;
    let solve = e.solve_config();
    exec::map_indexed(count, |i| -> Result<L2Record> {
        let (seed_w, seed_z) = drivers.seeds(i);
        let (w, z) = drivers.sample(i)?;
        let mut rec = L2Record {
            index: i,
            seed_w,
            seed_z,
            status: PathStatus::Ok,
            driver_seminorm: *norms.seminorm_profile(&z)?.last().unwrap(),
            sup_x: f64::NAN,
            levels: Vec::with_capacity(steps.len()),
        };
        let x = match catch_overflow(euler_solve_mixed(&e.coefficients, &solve, &w, &z))? {
            Ok(x) => x,
            Err(status) => {
                rec.status = status;
                return Ok(rec);
            }
        };
        rec.sup_x = x.sup_abs();
        for &m in steps {
            let zs = mollify_steps(&z, m);
            match level_metrics(&e.coefficients, &solve, &norms, &w, &z, &x, &zs) {
                Ok(mut l) => {
                    l.eps = m as f64 * e.dt();
                    rec.levels.push(l);
                }
                Err(Error::Overflow { step, .. }) => {
                    rec.status = PathStatus::Overflow { step };
                    rec.levels.clear();
                    return Ok(rec);
                }
                Err(err) => return Err(err),
            }
        }
        Ok(rec)
    })
    .into_iter()
    .collect()
}

/// `N` and `R` from pilot records.
pub fn pilot_levels(records: &[L2Record], quantile: f64) -> Result<PilotSummary> {
    let ok: Vec<&L2Record> = records.iter().filter(|r| r.status.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::Degenerate("every pilot path failed".into()));
    }
    let semis: Vec<f64> = ok.iter().map(|r| r.max_seminorm()).collect();
    let sups: Vec<f64> = ok.iter().map(|r| r.max_sup()).collect();
    Ok(PilotSummary {
        paths: records.len(),
        failed: records.len() - ok.len(),
        quantile,
        level: stats::quantile(&semis, quantile),
        radius: stats::quantile(&sups, quantile),
    })
}

/// Rebuilds the summary from the records and the localization levels.
pub fn aggregate(
    cfg: &L2Config,
    records: &[L2Record],
    level: f64,
    radius: f64,
    pilot: Option<PilotSummary>,
) -> Result<L2Summary> {
    let ok: Vec<&L2Record> = records.iter().filter(|r| r.status.is_ok()).collect();
    let failed = records.len() - ok.len();
    failure_gate(failed, records.len())?;
    let used = ok.len() as f64;
    let mut levels = Vec::with_capacity(cfg.eps.len());
    for j in 0..cfg.eps.len() {
        let mut hits = 0;
        let (mut dev, mut gap) = (0.0, 0.0);
        for r in &ok {
            if r.in_event(j, level, radius) {
                hits += 1;
                let l = &r.levels[j];
                dev += l.sup_dev * l.sup_dev;
                gap += l.driver_gap * l.driver_gap;
            }
        }
        levels.push(L2LevelSummary {
            eps: ok.first().map_or(cfg.eps[j], |r| r.levels[j].eps),
            in_event: hits,
            mean_sq_dev: dev / used,
            mean_sq_gap: gap / used,
        });
    }
    let fit: Vec<&L2LevelSummary> = levels
        .iter()
        .filter(|l| {
            let keep = l.in_event > 0 && l.mean_sq_dev > 0.0 && l.mean_sq_gap > 0.0;
            if !keep {
                log::warn!("event A is empty or degenerate at eps = {}; width left out of the fit", l.eps);
            }
            keep
        })
        .collect();
    let (slope, intercept) = if fit.len() >= 2 {
        let x: Vec<f64> = fit.iter().map(|l| l.mean_sq_gap.ln()).collect();
        let y: Vec<f64> = fit.iter().map(|l| l.mean_sq_dev.ln()).collect();
        let line = stats::fit_line(&x, &y)?;
        (line.slope, line.intercept)
    } else {
        return Err(Error::Degenerate(format!(
            "only {} widths have a non-empty localization event; a slope needs 2",
            fit.len()
        )));
    };
    Ok(L2Summary {
        paths: records.len(),
        failed,
        level,
        radius,
        pilot,
        fitted_levels: fit.len(),
        levels,
        slope,
        intercept,
    })
}

pub fn l2_difference_experiment(cfg: &L2Config) -> Result<L2Result> {
    let steps = cfg.validate()?;
    let e = &cfg.ensemble;
    let pilot = match (cfg.level, cfg.radius) {
        (Some(_), Some(_)) => None,
        _ => {
            let master = path_seed(e.seed ^ PILOT_SALT, 0);
            let recs = run_paths(cfg, &steps, master, cfg.pilot_paths)?;
            Some(pilot_levels(&recs, cfg.quantile)?)
        }
    };
    let level = cfg.level.or(pilot.as_ref().map(|p| p.level)).unwrap();
    let radius = cfg.radius.or(pilot.as_ref().map(|p| p.radius)).unwrap();
    let records = run_paths(cfg, &steps, e.seed, e.paths)?;
    let summary = aggregate(cfg, &records, level, radius, pilot)?;
    Ok(EnsembleResult {
        experiment: "l2diff".into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

impl Tabular for L2Record {
    fn table(items: &[Self]) -> Table {
        let mut t = Table::new(&[
            "index",
            "seed_w",
            "seed_z",
            "status",
            "driver_seminorm",
            "sup_x",
            "eps",
            "sup_dev",
            "driver_gap",
            "smooth_seminorm",
            "smooth_sup",
        ]);
        for r in items {
            let head = || -> Vec<Cell> {
                vec![
                    r.index.into(),
                    r.seed_w.into(),
                    r.seed_z.into(),
                    r.status.label().into(),
                    r.driver_seminorm.into(),
                    r.sup_x.into(),
                ]
            };
            if r.levels.is_empty() {
                let mut row = head();
                row.extend((0..5).map(|_| Cell::Float(f64::NAN)));
                t.push(row);
            }
            for l in &r.levels {
                let mut row = head();
                row.extend([
                    l.eps.into(),
                    l.sup_dev.into(),
                    l.driver_gap.into(),
                    l.smooth_seminorm.into(),
                    l.smooth_sup.into(),
                ]);
                t.push(row);
            }
        }
        t
    }
}

impl PlotData for L2Summary {
    fn plot_table(&self) -> Table {
        let mut t = Table::new(&["eps", "in_event", "mean_sq_gap", "mean_sq_dev", "log_sq_gap", "log_sq_dev"]);
        for l in &self.levels {
            t.push(vec![
                l.eps.into(),
                l.in_event.into(),
                l.mean_sq_gap.into(),
                l.mean_sq_dev.into(),
                l.mean_sq_gap.ln().into(),
                l.mean_sq_dev.ln().into(),
            ]);
        }
        t
    }
}
