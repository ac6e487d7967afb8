//! Seeded Wiener and fractional Brownian motion paths on uniform grids.
//!
//! Gaussian draws come from ChaCha8 seeded with `seed_from_u64(seed)`,
//! turned into standard normals by the Box–Muller transform (both variates
//! of each pair are used, cosine branch first). Uniforms are the top 53 bits
//! of a `u64`. The whole chain is integer arithmetic plus `ln`, `sqrt`,
//! `sin` and `cos`, so a given seed reproduces the same path on every run.
//!
//! Fractional Brownian motion is produced exactly on the grid by a Cholesky
//! factorization of its covariance. The factor of the unit-step covariance
//! `½(i^{2H} + j^{2H} - |i-j|^{2H})` is computed once and the path is scaled
//! by `dt^H`, so rescaling the horizon rescales the path by `T^H` for a fixed
//! seed. For `H = ½` the factor is the all-ones lower triangle and the path is
//! the running sum of the same normals that [`gen_wiener`] uses.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::path::GridPath;

/// Largest grid accepted by the Cholesky generator.
pub const MAX_FBM_STEPS: usize = 4096;

/// Odd multiplier used to derive per-path seeds from a master seed.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of work item `index` under `master`: `master ^ (index * SEED_STRIDE)`.
pub fn path_seed(master: u64, index: u64) -> u64 {
    master ^ index.wrapping_mul(SEED_STRIDE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of grid steps.
    pub n: usize,
    /// Horizon `T`.
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    /// Hurst parameter; only read by the fBm generator.
    #[serde(rename = "H", alias = "hurst", default = "default_hurst")]
    pub hurst: f64,
    pub seed: u64,
}

fn default_hurst() -> f64 {
    0.5
}

impl GenConfig {
    pub fn new(n: usize, horizon: f64, hurst: f64, seed: u64) -> Self {
        Self {
            n,
            horizon,
            hurst,
            seed,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    fn validate_grid(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("grid resolution n must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon T must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Standard normal stream: ChaCha8 + Box–Muller.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `(0, 1]`.
    fn open_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

/// Standard Wiener process on the grid of `cfg`.
pub fn gen_wiener(cfg: &GenConfig) -> Result<GridPath> {
    cfg.validate_grid()?;
    let dt = cfg.dt();
    let sd = dt.sqrt();
    let mut stream = NormalStream::new(cfg.seed);
    let mut values = Vec::with_capacity(cfg.n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..cfg.n {
        w += sd * stream.next_normal();
        values.push(w);
    }
    GridPath::new(0.0, dt, values)
}

/// Fractional Brownian motion on the grid of `cfg`.
///
/// Builds a fresh [`FbmGenerator`]; reuse one generator when sampling many paths.
pub fn gen_fbm(cfg: &GenConfig) -> Result<GridPath> {
    FbmGenerator::new(cfg.n, cfg.horizon, cfg.hurst)?.sample(cfg.seed)
}

/// Cholesky-based sampler for fBm on a fixed grid.
#[derive(Debug, Clone)]
pub struct FbmGenerator {
    n: usize,
    horizon: f64,
    hurst: f64,
    /// Packed lower triangle of the unit-step factor, row `i` at `i(i+1)/2`.
    lower: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Dot product with independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..n {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// In-place Cholesky of a packed symmetric matrix given by `entry(i, j)`, `j <= i`.
///
/// Rows are processed in blocks so each earlier row is streamed once per
/// block rather than once per row.
fn cholesky_packed(n: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
    const BLOCK: usize = 64;
    let mut l = vec![0.0; row_start(n)];
    for b0 in (0..n).step_by(BLOCK) {
        let b1 = (b0 + BLOCK).min(n);
        for j in 0..b1 {
            let jr = row_start(j);
            for i in j.max(b0)..b1 {
                let ir = row_start(i);
                if i == j {
                    let s = entry(j, j) - dot(&l[jr..jr + j], &l[jr..jr + j]);
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Factorization { pivot: j, value: s });
                    }
                    l[jr + j] = s.sqrt();
                } else {
                    let (head, tail) = l.split_at_mut(ir);
                    let row_j = &head[jr..jr + j + 1];
                    let row_i = &mut tail[..i + 1];
                    let s = entry(i, j) - dot(&row_i[..j], &row_j[..j]);
                    row_i[j] = s / row_j[j];
                }
            }
        }
    }
    Ok(l)
}

impl FbmGenerator {
    pub fn new(n: usize, horizon: f64, hurst: f64) -> Result<Self> {
        GenConfig::new(n, horizon, hurst, 0).validate_grid()?;
        if n > MAX_FBM_STEPS {
            return Err(Error::config(format!(
                "fBm grid of {n} steps exceeds the Cholesky cap of {MAX_FBM_STEPS}"
            )));
        }
        if !(0.5..1.0).contains(&hurst) {
            return Err(Error::config(format!(
                "Hurst parameter must lie in [0.5, 1), got {hurst}"
            )));
        }
        let two_h = 2.0 * hurst;
        let pow: Vec<f64> = (0..=n).map(|k| (k as f64).powf(two_h)).collect();
        // grid indices i, j correspond to times (i + 1) dt, (j + 1) dt
        let lower = cholesky_packed(n, |i, j| 0.5 * (pow[i + 1] + pow[j + 1] - pow[i - j]))?;
        Ok(Self {
            n,
            horizon,
            hurst,
            lower,
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    /// Path driven by the given standard normals (`normals.len() == steps()`).
    pub fn sample_from_normals(&self, normals: &[f64]) -> Result<GridPath> {
        if normals.len() != self.n {
            return Err(Error::config(format!(
                "expected {} normals, got {}",
                self.n,
                normals.len()
            )));
        }
        let scale = self.dt().powf(self.hurst);
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(0.0);
        for i in 0..self.n {
            let r = row_start(i);
            values.push(scale * dot(&self.lower[r..r + i + 1], &normals[..i + 1]));
        }
        GridPath::new(0.0, self.dt(), values)
    }

    pub fn sample(&self, seed: u64) -> Result<GridPath> {
        let mut normals = vec![0.0; self.n];
        NormalStream::new(seed).fill(&mut normals);
        self.sample_from_normals(&normals)
    }
}

/// `max_{u<v} |f(v) - f(u)| / (v - u)^gamma` over all grid pairs.
pub fn holder_constant(path: &GridPath, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(format!(
            "Hölder exponent must lie in (0, 1), got {gamma}"
        )));
    }
    let f = path.values();
    let n = path.steps();
    let inv_pow: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (k as f64 * path.dt()).powf(-gamma)
            }
        })
        .collect();
    let rows = exec::map_indexed(n, |u| {
        let fu = f[u];
        let mut best = 0.0f64;
        for (lag, fv) in f[u + 1..].iter().enumerate() {
            best = best.max((fv - fu).abs() * inv_pow[lag + 1]);
        }
        best
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use proptest::prelude::*;

    #[test]
    fn wiener_starts_at_zero_and_is_deterministic() {
        let cfg = GenConfig::new(64, 2.0, 0.5, 11);
        let a = gen_wiener(&cfg).unwrap();
        let b = gen_wiener(&cfg).unwrap();
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a, b);
        let c = gen_wiener(&GenConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(gen_wiener(&GenConfig::new(0, 1.0, 0.5, 0)).is_err());
        assert!(gen_wiener(&GenConfig::new(4, 0.0, 0.5, 0)).is_err());
        assert!(gen_fbm(&GenConfig::new(MAX_FBM_STEPS + 1, 1.0, 0.7, 0)).is_err());
        assert!(gen_fbm(&GenConfig::new(8, 1.0, 0.4, 0)).is_err());
        assert!(gen_fbm(&GenConfig::new(8, 1.0, 1.0, 0)).is_err());
    }

    #[test]
    fn factorization_failure_names_the_pivot() {
        let err = cholesky_packed(3, |i, j| if i == j { [1.0, 1.0, -1.0][i] } else { 0.0 })
            .unwrap_err();
        assert!(matches!(err, Error::Factorization { pivot: 2, .. }), "{err}");
    }

    #[test]
    fn cholesky_reproduces_the_matrix() {
        let n = 70;
        let gen = FbmGenerator::new(n, 1.0, 0.7).unwrap();
        let r = |i: usize, j: usize| {
            let (s, t) = ((i + 1) as f64, (j + 1) as f64);
            0.5 * (s.powf(1.4) + t.powf(1.4) - (s - t).abs().powf(1.4))
        };
        for i in 0..n {
            for j in 0..=i {
                let li = &gen.lower[row_start(i)..row_start(i) + j + 1];
                let lj = &gen.lower[row_start(j)..row_start(j) + j + 1];
                let got: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                assert!((got - r(i, j)).abs() < 1e-9 * r(i, j).abs().max(1.0));
            }
        }
    }

    #[test]
    fn half_hurst_fbm_is_the_wiener_path() {
        let cfg = GenConfig::new(200, 1.5, 0.5, 99);
        let w = gen_wiener(&cfg).unwrap();
        let b = gen_fbm(&cfg).unwrap();
        for (x, y) in w.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn fbm_is_self_similar_for_fixed_seed() {
        let a = gen_fbm(&GenConfig::new(50, 1.0, 0.7, 5)).unwrap();
        let b = gen_fbm(&GenConfig::new(50, 3.0, 0.7, 5)).unwrap();
        let k = 3.0f64.powf(0.7);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x * k - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn wiener_terminal_variance() {
        // chi-square concentration: sd of the sample variance is sqrt(2/M)
        let m = 10_000;
        let xs: Vec<f64> = (0..m)
            .map(|s| gen_wiener(&GenConfig::new(1000, 1.0, 0.5, s)).unwrap().last())
            .collect();
        let v = stats::variance(&xs);
        let tol = 4.0 * (2.0 / m as f64).sqrt();
        assert!((v - 1.0).abs() < tol, "variance {v}");
    }

    #[test]
    fn fbm_covariance_at_half_and_full_horizon() {
        let (t, h, n, m) = (2.0f64, 0.7, 16, 10_000u64);
        let gen = FbmGenerator::new(n, t, h).unwrap();
        let prods: Vec<f64> = (0..m)
            .map(|s| {
                let p = gen.sample(s).unwrap();
                p.values()[n / 2] * p.values()[n]
            })
            .collect();
        let cov = stats::mean(&prods);
        let se = (stats::variance(&prods) / m as f64).sqrt();
        let exact = 0.5 * t.powf(1.4);
        assert!((cov - exact).abs() < 4.0 * se, "{cov} vs {exact} (se {se})");
    }

    #[test]
    fn holder_constant_closed_forms() {
        let c = GridPath::from_fn(40, 1.0, |_| 3.0).unwrap();
        assert_eq!(holder_constant(&c, 0.5).unwrap(), 0.0);
        let lin = GridPath::from_fn(40, 1.0, |t| t).unwrap();
        assert!((holder_constant(&lin, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!(holder_constant(&lin, 1.0).is_err());
    }

    #[test]
    fn holder_constant_refinement() {
        let fine = gen_fbm(&GenConfig::new(1024, 1.0, 0.7, 3)).unwrap();
        let coarse = fine.subsample(2).unwrap();
        let kf = holder_constant(&fine, 0.65).unwrap();
        let kc = holder_constant(&coarse, 0.65).unwrap();
        assert!(kc > 0.0 && kc.is_finite());
        assert!(kc <= kf, "coarse grid estimate must not exceed the refinement");
        assert!((kf / kc - 1.0).abs() < 0.2, "{kc} vs {kf}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn deterministic_and_self_similar(
            seed in any::<u64>(),
            hurst in 0.5f64..0.95,
            horizon in 0.1f64..5.0,
            n in 2usize..40,
        ) {
            let a = gen_fbm(&GenConfig::new(n, 1.0, hurst, seed)).unwrap();
            prop_assert_eq!(&a, &gen_fbm(&GenConfig::new(n, 1.0, hurst, seed)).unwrap());
            let b = gen_fbm(&GenConfig::new(n, horizon, hurst, seed)).unwrap();
            let k = horizon.powf(hurst);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x * k - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn holder_constant_grows_under_refinement(seed in any::<u64>(), gamma in 0.3f64..0.95) {
            let fine = gen_fbm(&GenConfig::new(64, 1.0, 0.7, seed)).unwrap();
            let coarse = fine.subsample(4).unwrap();
            prop_assert!(holder_constant(&coarse, gamma).unwrap() <= holder_constant(&fine, gamma).unwrap());
        }
    }
}
