//! Monte Carlo ensembles over independent `(W, Z)` driver pairs.
//!
//! Path `i` of an ensemble with master seed `s` draws `W` from
//! `path_seed(s, 2i)` and `Z` from `path_seed(s, 2i + 1)`. Per-path records
//! are collected in index order and every aggregate is a pure function of
//! the records, so results do not depend on the thread schedule.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holder;
use crate::io::{self, Table};
use crate::mollify;
use crate::path::GridPath;
use crate::process_gen::{gen_wiener, path_seed, FbmGenerator, GenConfig, MAX_FBM_STEPS};
use crate::solver::{CoefficientSet, SolveConfig};

pub mod apriori;
pub mod l2diff;
pub mod limit;
pub mod moments;

/// Largest fraction of failed paths that may be dropped from aggregates.
pub const MAX_FAILURE_FRACTION: f64 = 0.02;

/// Settings shared by every ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub coefficients: CoefficientSet,
    #[serde(default = "one")]
    pub x0: f64,
    pub n: usize,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub alpha: f64,
    /// Number of Monte Carlo paths `M`.
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl EnsembleConfig {
    pub fn validate(&self, min_paths: usize) -> Result<()> {
        self.coefficients.check()?;
        self.solve_config().validate()?;
        if self.n > MAX_FBM_STEPS {
            return Err(Error::config(format!(
                "n = {} exceeds the fBm grid cap {MAX_FBM_STEPS}",
                self.n
            )));
        }
        if !(0.5..1.0).contains(&self.hurst) {
            return Err(Error::config(format!("H must lie in [1/2, 1), got {}", self.hurst)));
        }
        holder::check_alpha(self.alpha)?;
        if self.alpha <= 1.0 - self.hurst {
            log::warn!(
                "alpha = {} is not above 1 - H = {}; driver seminorms grow with the grid",
                self.alpha,
                1.0 - self.hurst
            );
        }
        if self.paths < min_paths {
            return Err(Error::config(format!(
                "ensemble needs at least {min_paths} paths, got {}",
                self.paths
            )));
        }
        Ok(())
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            x0: self.x0,
            n: self.n,
            horizon: self.horizon,
            hurst: self.hurst,
            alpha: Some(self.alpha),
            seed_w: path_seed(self.seed, 0),
            seed_z: path_seed(self.seed, 1),
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }
}

/// Checks a list of smoothing widths and snaps each to whole grid steps.
pub fn eps_steps(eps: &[f64], dt: f64, horizon: f64) -> Result<Vec<usize>> {
    if eps.is_empty() {
        return Err(Error::config("at least one smoothing width is required"));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config(format!("smoothing widths must decrease, got {eps:?}")));
    }
    let steps = eps
        .iter()
        .map(|&e| mollify::snap_steps(e, dt, horizon))
        .collect::<Result<Vec<_>>>()?;
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(format!(
            "smoothing widths {eps:?} collapse onto the same grid width"
        )));
    }
    Ok(steps)
}

/// Seeded driver pairs for one ensemble; the fBm factorization is shared.
pub struct Drivers {
    fbm: FbmGenerator,
    n: usize,
    horizon: f64,
    master: u64,
}

impl Drivers {
    pub fn new(n: usize, horizon: f64, hurst: f64, master: u64) -> Result<Self> {
        Ok(Self {
            fbm: FbmGenerator::new(n, horizon, hurst)?,
            n,
            horizon,
            master,
        })
    }

    pub fn seeds(&self, index: usize) -> (u64, u64) {
        let i = index as u64;
        (
            path_seed(self.master, 2 * i),
            path_seed(self.master, 2 * i + 1),
        )
    }

    pub fn sample(&self, index: usize) -> Result<(GridPath, GridPath)> {
        let (sw, sz) = self.seeds(index);
        let w = gen_wiener(&GenConfig::new(self.n, self.horizon, 0.5, sw))?;
        let z = self.fbm.sample(sz)?;
        Ok((w, z))
    }
}

/// Outcome of one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStatus {
    Ok,
    /// The solver blew up at the given step.
    Overflow { step: usize },
}

impl PathStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PathStatus::Ok)
    }

    pub fn label(&self) -> String {
        match self {
            PathStatus::Ok => "ok".into(),
            PathStatus::Overflow { step } => format!("overflow@{step}"),
        }
    }
}

/// Runs a solver, turning an overflow into a failed-path status.
pub(crate) fn catch_overflow(r: Result<GridPath>) -> Result<std::result::Result<GridPath, PathStatus>> {
    match r {
        Ok(x) => Ok(Ok(x)),
        Err(Error::Overflow { step, .. }) => Ok(Err(PathStatus::Overflow { step })),
        Err(e) => Err(e),
    }
}

/// Fails the experiment when too many paths were lost.
pub fn failure_gate(failed: usize, total: usize) -> Result<()> {
    if failed > 0 && failed as f64 >= MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    if failed > 0 {
        log::warn!("{failed} of {total} paths failed and are left out of the aggregates");
    }
    Ok(())
}

/// Anything that lays out as CSV rows.
pub trait Tabular {
    fn table(items: &[Self]) -> Table
    where
        Self: Sized;
}

/// Plot series derived from an aggregate.
pub trait PlotData {
    fn plot_table(&self) -> Table;
}

/// Per-path records, their aggregate, and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult<C, R, S> {
    pub experiment: String,
    pub config: C,
    pub records: Vec<R>,
    pub summary: S,
}

#[derive(Serialize)]
struct SummaryFile<'a, C, S> {
    experiment: &'a str,
    config: &'a C,
    summary: &'a S,
}

/// Files written for one experiment.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub plotdata: PathBuf,
}

impl<C, R, S> EnsembleResult<C, R, S>
where
    C: Serialize,
    R: Tabular,
    S: Serialize + PlotData,
{
    pub fn summary_json(&self) -> Result<String> {
        io::to_json(&SummaryFile {
            experiment: &self.experiment,
            config: &self.config,
            summary: &self.summary,
        })
    }

    pub fn records_table(&self) -> Table {
        R::table(&self.records)
    }

    /// Writes `records.csv`, `summary.json` and `plotdata.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Artifacts> {
        std::fs::create_dir_all(dir)?;
        let out = Artifacts {
            records: dir.join("records.csv"),
            summary: dir.join("summary.json"),
            plotdata: dir.join("plotdata.csv"),
        };
        self.records_table().write(&out.records)?;
        std::fs::write(&out.summary, self.summary_json()?)?;
        self.summary.plot_table().write(&out.plotdata)?;
        Ok(out)
    }
}

/// `num / den` with `0 / x = 0` and `x / 0 = ∞` for `x > 0`.
pub(crate) fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}
