//! FFT plumbing: tangential transforms, wavenumbers and the doubled normal box.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array3, Axis};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::grid::HalfSpaceGrid;

type Plan = Arc<dyn Fft<f64>>;

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Plan>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize, inverse: bool) -> Plan {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// In-place FFT along one axis. The inverse transform is normalized by `1/len`.
pub fn fft_axis(a: &mut Array3<Complex64>, axis: usize, inverse: bool) {
    let len = a.len_of(Axis(axis));
    if len <= 1 {
        return;
    }
    let p = plan(len, inverse);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); p.get_inplace_scratch_len()];
    let scale = if inverse { 1.0 / len as f64 } else { 1.0 };
    for mut lane in a.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        p.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in lane.iter_mut().zip(&buf) {
            *v = *b * scale;
        }
    }
}

pub fn to_complex(data: &Array3<f64>) -> Array3<Complex64> {
    data.mapv(|v| Complex64::new(v, 0.0))
}

/// Forward FFT over the tangential axes, row by row.
pub fn tangential_forward(data: &Array3<f64>) -> Array3<Complex64> {
    let mut c = to_complex(data);
    fft_axis(&mut c, 0, false);
    fft_axis(&mut c, 1, false);
    c
}

/// Inverse tangential FFT returning the real part.
pub fn tangential_inverse(mut c: Array3<Complex64>) -> Array3<f64> {
    fft_axis(&mut c, 0, true);
    fft_axis(&mut c, 1, true);
    c.mapv(|z| z.re)
}

/// Signed angular wavenumbers `2 pi k / length` in FFT order.
pub fn wavenumbers(count: usize, length: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / length;
    (0..count)
        .map(|k| {
            let s = if k <= count / 2 { k as f64 } else { k as f64 - count as f64 };
            s * base
        })
        .collect()
}

/// Tangential wavenumber table of a grid.
#[derive(Debug, Clone)]
pub struct TangentialModes {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    nyquist: usize,
}

impl TangentialModes {
    pub fn new(grid: &HalfSpaceGrid) -> Self {
        let (a, b, _) = grid.shape();
        let k1 = wavenumbers(a, grid.length());
        let k2 = if b > 1 { wavenumbers(b, grid.length()) } else { vec![0.0] };
        Self { k1, k2, nyquist: a / 2 }
    }

    pub fn kappa(&self, i: usize, j: usize) -> f64 {
        (self.k1[i] * self.k1[i] + self.k2[j] * self.k2[j]).sqrt()
    }

    /// Spectral derivative symbol `i xi_axis`; the Nyquist mode is dropped.
    pub fn deriv(&self, i: usize, j: usize, axis: usize) -> Complex64 {
        let (idx, k) = match axis {
            0 => (i, self.k1[i]),
            _ => (j, self.k2[j]),
        };
        if idx == self.nyquist && (axis == 0 || self.k2.len() > 1) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    }

    pub fn is_nyquist(&self, i: usize, j: usize) -> bool {
        i == self.nyquist || (self.k2.len() > 1 && j == self.nyquist)
    }
}

/// Zeroes tangential modes above two thirds of the Nyquist index.
pub fn dealias_tangential(data: &Array3<f64>) -> Array3<f64> {
    let (a, b, _) = data.dim();
    let cut = |idx: usize, len: usize| {
        let k = if idx <= len / 2 { idx } else { len - idx };
        len > 1 && 3 * k > len
    };
    let mut c = tangential_forward(data);
    for ((i, j, _), z) in c.indexed_iter_mut() {
        if cut(i, a) || cut(j, b) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    tangential_inverse(c)
}

/// How half-space data is continued to `[-H, H]` in the normal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Extension {
    /// Zero continuation (values at the two jump rows are halved).
    Zero,
    /// `f(-x_n) = -f(x_n)`.
    Odd,
    /// `f(-x_n) = f(x_n)`.
    Even,
}

/// Continues data to the doubled normal box of `2 N_nor` rows (periodic, period `2H`).
pub fn extend_normal(data: &Array3<f64>, ext: Extension) -> Array3<f64> {
    let (a, b, rows) = data.dim();
    let nn = rows - 1;
    let mut out = Array3::<f64>::zeros((a, b, 2 * nn));
    for i in 0..a {
        for j in 0..b {
            match ext {
                Extension::Zero => {
                    out[[i, j, 0]] = 0.5 * data[[i, j, 0]];
                    for k in 1..nn {
                        out[[i, j, k]] = data[[i, j, k]];
                    }
                    out[[i, j, nn]] = 0.5 * data[[i, j, nn]];
                }
                Extension::Odd => {
                    for k in 1..nn {
                        out[[i, j, k]] = data[[i, j, k]];
                        out[[i, j, 2 * nn - k]] = -data[[i, j, k]];
                    }
                }
                Extension::Even => {
                    out[[i, j, 0]] = data[[i, j, 0]];
                    out[[i, j, nn]] = data[[i, j, nn]];
                    for k in 1..nn {
                        out[[i, j, k]] = data[[i, j, k]];
                        out[[i, j, 2 * nn - k]] = data[[i, j, k]];
                    }
                }
            }
        }
    }
    out
}

/// Restriction of doubled-box data back to rows `0..=N_nor`.
pub fn restrict_normal(ext: &Array3<f64>) -> Array3<f64> {
    let (a, b, m) = ext.dim();
    let nn = m / 2;
    Array3::from_shape_fn((a, b, nn + 1), |(i, j, k)| ext[[i, j, k % m]])
}

/// Full FFT on the doubled box.
pub fn doubled_forward(ext: &Array3<f64>) -> Array3<Complex64> {
    let mut c = to_complex(ext);
    for ax in 0..3 {
        fft_axis(&mut c, ax, false);
    }
    c
}

pub fn doubled_inverse(mut c: Array3<Complex64>) -> Array3<f64> {
    for ax in 0..3 {
        fft_axis(&mut c, ax, true);
    }
    c.mapv(|z| z.re)
}

/// `|xi|^2` table on the doubled box.
pub fn doubled_xi_sq(grid: &HalfSpaceGrid) -> Array3<f64> {
    let modes = TangentialModes::new(grid);
    let kn = wavenumbers(2 * grid.n_nor(), 2.0 * grid.height());
    let (a, b, _) = grid.shape();
    Array3::from_shape_fn((a, b, 2 * grid.n_nor()), |(i, j, k)| {
        modes.k1[i].powi(2) + modes.k2[j].powi(2) + kn[k].powi(2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip() {
        let g = HalfSpaceGrid::new(3, 1.0, 8, 1.0, 8).unwrap();
        let data = Array3::from_shape_fn(g.shape(), |(i, j, k)| (i * 7 + j * 3 + k) as f64 * 0.1);
        let back = tangential_inverse(tangential_forward(&data));
        for (x, y) in data.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_extension_roundtrip() {
        let data = Array3::from_shape_fn((2, 1, 9), |(_, _, k)| (k as f64 * 0.3).sin());
        let ext = extend_normal(&data, Extension::Odd);
        let r = restrict_normal(&ext);
        for k in 1..8 {
            assert_eq!(r[[0, 0, k]], data[[0, 0, k]]);
        }
        assert_eq!(r[[0, 0, 0]], 0.0);
    }
}
