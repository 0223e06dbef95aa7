//! Discretized half-space and geometric time sampling.
//!
//! The half-space `R^n_+` is replaced by a box that is periodic in the
//! `n - 1` tangential directions (period `L`, `N_tan` points per axis) and
//! truncated to `[0, H]` in the normal direction. The normal axis carries
//! `N_nor + 1` uniformly spaced rows `x_n = k H / N_nor`, `k = 0..=N_nor`, so
//! that both the wall and the truncation height are grid rows.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceGrid {
    n: usize,
    length: f64,
    n_tan: usize,
    height: f64,
    n_nor: usize,
}

impl HalfSpaceGrid {
    pub fn new(n: usize, length: f64, n_tan: usize, height: f64, n_nor: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidGrid(format!("dimension {n} not in {{2, 3}}")));
        }
        if n_tan < 8 || !n_tan.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N_tan = {n_tan} must be a power of two >= 8"
            )));
        }
        if n_nor < 8 {
            return Err(Error::InvalidGrid(format!("N_nor = {n_nor} must be >= 8")));
        }
        if !(length.is_finite() && length > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidGrid("lengths must be positive and finite".into()));
        }
        if height < length * (1.0 - 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "normal height H = {height} must be at least the period L = {length}"
            )));
        }
        Ok(Self { n, length, n_tan, height, n_nor })
    }

    /// Default two-dimensional desk configuration.
    pub fn desk_2d() -> Self {
        Self::new(2, 2.0 * PI, 128, 2.0 * PI, 96).expect("valid desk grid")
    }

    /// Three-dimensional smoke configuration.
    pub fn smoke_3d() -> Self {
        Self::new(3, 2.0 * PI, 48usize.next_power_of_two(), 2.0 * PI, 32)
            .expect("valid smoke grid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn n_tan(&self) -> usize {
        self.n_tan
    }
    pub fn n_nor(&self) -> usize {
        self.n_nor
    }
    /// Number of normal rows, including the wall and the top row.
    pub fn rows(&self) -> usize {
        self.n_nor + 1
    }
    pub fn dx_tan(&self) -> f64 {
        self.length / self.n_tan as f64
    }
    pub fn dx_nor(&self) -> f64 {
        self.height / self.n_nor as f64
    }

    /// Array shape `(N_tan, N_tan or 1, rows)`; the second axis collapses in 2D.
    pub fn shape(&self) -> (usize, usize, usize) {
        let second = if self.n == 3 { self.n_tan } else { 1 };
        (self.n_tan, second, self.rows())
    }

    pub fn node_count(&self) -> usize {
        let (a, b, c) = self.shape();
        a * b * c
    }

    pub fn x_tan(&self, i: usize) -> f64 {
        i as f64 * self.dx_tan()
    }
    pub fn x_nor(&self, k: usize) -> f64 {
        k as f64 * self.dx_nor()
    }

    /// Node coordinates `(x_1, x_2, x_n)`; `x_2` is zero in 2D.
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.x_tan(i), if self.n == 3 { self.x_tan(j) } else { 0.0 }, self.x_nor(k)]
    }

    /// Resolvable dyadic band range `[j_min, j_max]`.
    pub fn band_range(&self) -> (i32, i32) {
        let lo = (2.0 * PI / self.length).log2().ceil() as i32;
        let hi = (PI * self.n_tan as f64 / self.length).log2().floor() as i32;
        (lo, hi)
    }

    /// Grid for the rescaled data `x -> lambda x`: lengths shrink by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.length / lambda, self.n_tan, self.height / lambda, self.n_nor)
    }

    /// Grid with doubled resolution in every direction.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.n, self.length, self.n_tan * 2, self.height, self.n_nor * 2)
    }

    pub fn same_as(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Geometric sample times `t_k = t_0 r^k`, `k = 0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    ratio: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::InvalidInput(format!("t_0 = {t0} must be positive")));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::InvalidInput(format!("ratio = {ratio} must exceed 1")));
        }
        if count == 0 {
            return Err(Error::InvalidInput("empty time grid".into()));
        }
        let last = t0 * ratio.powi(count as i32 - 1);
        if !last.is_finite() {
            return Err(Error::InvalidInput("time grid overflows".into()));
        }
        Ok(Self { t0, ratio, count })
    }

    /// `t_0 = 1e-3`, `r = 2^{1/4}`, `K = 48`.
    pub fn standard() -> Self {
        Self::new(1e-3, 2f64.powf(0.25), 48).expect("valid default time grid")
    }

    /// Time grid spanning `[t_first, t_last]` with `count` samples.
    pub fn spanning(t_first: f64, t_last: f64, count: usize) -> Result<Self> {
        if count < 2 || !(t_last > t_first) {
            return Err(Error::InvalidInput("spanning grid needs t_last > t_first, count >= 2".into()));
        }
        let ratio = (t_last / t_first).powf(1.0 / (count - 1) as f64);
        Self::new(t_first, ratio, count)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    pub fn len(&self) -> usize {
        self.count
    }
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
    pub fn time(&self, k: usize) -> f64 {
        self.t0 * self.ratio.powi(k as i32)
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.time(k)).collect()
    }
    /// Time grid seen by the rescaled problem: `t -> t / lambda^2`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.t0 / (lambda * lambda), self.ratio, self.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(HalfSpaceGrid::new(4, 1.0, 16, 1.0, 16).is_err());
        assert!(HalfSpaceGrid::new(2, 1.0, 12, 1.0, 16).is_err());
        assert!(HalfSpaceGrid::new(2, 1.0, 16, 1.0, 4).is_err());
        assert!(HalfSpaceGrid::new(2, 2.0, 16, 1.0, 16).is_err());
    }

    #[test]
    fn band_range_respects_resolution() {
        let g = HalfSpaceGrid::desk_2d();
        let (lo, hi) = g.band_range();
        assert_eq!((lo, hi), (0, 6));
        assert!(2f64.powi(hi) <= PI * g.n_tan() as f64 / g.length());
        assert!(2f64.powi(lo) >= 2.0 * PI / g.length() - 1e-12);
    }

    #[test]
    fn time_grid_is_increasing() {
        let tg = TimeGrid::standard();
        let ts = tg.times();
        assert_eq!(ts.len(), 48);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 2.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
    }
}
