//! Product integration against weakly singular power kernels.
//!
//! To evaluate `∫_0^{m h} d(r) r^{-p} dr` on a uniform grid, `d` is taken
//! piecewise linear between its samples `d_k = d(k h)` and the kernel is
//! integrated exactly on every cell. Cell `k` spans `[k h, (k + 1) h]` and
//! contributes `lo[k] * d_k + hi[k] * d_{k+1}`.
//!
//! For `p >= 1` the weight of `d_0` is infinite; callers guarantee `d_0 = 0`
//! (every difference kernel here vanishes at zero lag) and `lo[0]` is stored
//! as zero.

/// Exact cell weights of the kernel `r^{-p}` with step `h`.
#[derive(Debug, Clone)]
pub struct PowerKernel {
    p: f64,
    h: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// `∫_k^{k+1} r^q dr` for integer `k >= 0`, written to avoid cancellation.
fn unit_cell_moment(k: usize, q: f64) -> f64 {
    if k == 0 {
        return if q > -1.0 { 1.0 / (q + 1.0) } else { f64::INFINITY };
    }
    let kf = k as f64;
    let log_ratio = (1.0 / kf).ln_1p();
    if (q + 1.0).abs() < 1e-14 {
        log_ratio
    } else {
        kf.powf(q + 1.0) * ((q + 1.0) * log_ratio).exp_m1() / (q + 1.0)
    }
}

impl PowerKernel {
    /// Weights for `cells` cells. Requires `p < 2` so the lag-linear part is integrable.
    pub fn new(p: f64, h: f64, cells: usize) -> Self {
        assert!(p < 2.0, "kernel exponent must be below 2, got {p}");
        assert!(h > 0.0);
        let scale = h.powf(1.0 - p);
        let mut lo = Vec::with_capacity(cells);
        let mut hi = Vec::with_capacity(cells);
        for k in 0..cells {
            let m0 = unit_cell_moment(k, -p);
            let m1 = unit_cell_moment(k, 1.0 - p);
            let kf = k as f64;
            let (l, u) = if k == 0 {
                let l = if p < 1.0 { m0 - m1 } else { 0.0 };
                (l, m1)
            } else {
                ((kf + 1.0) * m0 - m1, m1 - kf * m0)
            };
            lo.push(l * scale);
            hi.push(u * scale);
        }
        Self { p, h, lo, hi }
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn lo(&self, k: usize) -> f64 {
        self.lo[k]
    }

    #[inline]
    pub fn hi(&self, k: usize) -> f64 {
        self.hi[k]
    }

    /// `∫_0^{m h} d(r) r^{-p} dr` with `m = d.len() - 1`.
    pub fn integrate(&self, d: &[f64]) -> f64 {
        let m = d.len().saturating_sub(1);
        debug_assert!(m <= self.cells());
        let mut acc = 0.0;
        for k in 0..m {
            acc += self.lo[k] * d[k] + self.hi[k] * d[k + 1];
        }
        acc
    }

    /// Same as [`integrate`](Self::integrate) with `d_k = lag(k)` for `k = 0..=m`.
    #[inline]
    pub fn integrate_lags(&self, m: usize, lag: impl Fn(usize) -> f64) -> f64 {
        debug_assert!(m <= self.cells());
        let mut acc = 0.0;
        let mut prev = lag(0);
        for k in 0..m {
            let next = lag(k + 1);
            acc += self.lo[k] * prev + self.hi[k] * next;
            prev = next;
        }
        acc
    }
}

/// `(k h)^{e}` for `k = 0..=n`, with the `k = 0` entry set to `zero_value`.
pub fn lag_powers(e: f64, h: f64, n: usize, zero_value: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| if k == 0 { zero_value } else { (k as f64 * h).powf(e) })
        .collect()
}
