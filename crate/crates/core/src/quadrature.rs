//! Quadrature rules: Gauss–Legendre, exponential line integrals along the
//! normal axis, and the graded rule used for Duhamel time integrals.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

static GL16: once_cell::sync::Lazy<(Vec<f64>, Vec<f64>)> =
    once_cell::sync::Lazy::new(|| gauss_legendre(16));

fn lagrange(pos: &[f64; 4], m: usize, s: f64) -> f64 {
    let mut v = 1.0;
    for (q, &p) in pos.iter().enumerate() {
        if q != m {
            v *= (s - p) / (pos[m] - p);
        }
    }
    v
}

/// `h * int_0^1 kernel(s) l_m(s) ds` for the cubic Lagrange basis on `pos`.
fn local_weights(pos: &[f64; 4], h: f64, kernel: impl Fn(f64) -> f64, panels: usize) -> [f64; 4] {
    let (x, w) = &*GL16;
    let mut out = [0.0; 4];
    let width = 1.0 / panels as f64;
    for p in 0..panels {
        let a = p as f64 * width;
        for (xi, wi) in x.iter().zip(w) {
            let s = a + 0.5 * width * (xi + 1.0);
            let kv = kernel(s) * wi * 0.5 * width * h;
            for (m, o) in out.iter_mut().enumerate() {
                *o += kv * lagrange(pos, m, s);
            }
        }
    }
    out
}

/// Fourth-order integrals of sampled profiles against `exp(-kappa |x - z|)` on
/// a uniform line of `rows` nodes with spacing `h`. Each panel integrates the
/// exponential exactly against a local cubic interpolant of the samples.
#[derive(Debug, Clone, Copy)]
pub struct LineQuad {
    h: f64,
    rows: usize,
}

impl LineQuad {
    pub fn new(h: f64, rows: usize) -> Self {
        assert!(rows >= 4, "line quadrature needs at least 4 nodes");
        Self { h, rows }
    }

    fn stencil_start(&self, k: usize) -> usize {
        let last = self.rows - 1;
        k.saturating_sub(1).min(last - 3)
    }

    fn weight_sets(&self, kappa: f64, causal: bool) -> [(usize, [f64; 4]); 3] {
        let kh = kappa * self.h;
        let panels = ((kh / 4.0).ceil() as usize).max(1);
        let kern = |s: f64| if causal { (-kh * (1.0 - s)).exp() } else { (-kh * s).exp() };
        let last = self.rows - 1;
        // Intervals 0 and last-1 use shifted stencils; all others share one.
        let mut sets = [(0usize, [0.0; 4]); 3];
        for (slot, k) in [0usize, 1, last - 1].into_iter().enumerate() {
            let start = self.stencil_start(k);
            let pos = std::array::from_fn(|m| (start + m) as f64 - k as f64);
            sets[slot] = (k, local_weights(&pos, self.h, kern, panels));
        }
        sets
    }

    fn weights_for(sets: &[(usize, [f64; 4]); 3], k: usize, last: usize) -> &[f64; 4] {
        if k == 0 {
            &sets[0].1
        } else if k == last - 1 {
            &sets[2].1
        } else {
            &sets[1].1
        }
    }

    /// `A_k = int_0^{x_k} exp(-kappa (x_k - z)) g(z) dz`.
    pub fn causal(&self, kappa: f64, g: &[Complex64]) -> Vec<Complex64> {
        let last = self.rows - 1;
        let sets = self.weight_sets(kappa, true);
        let decay = (-kappa * self.h).exp();
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for k in 0..last {
            let w = Self::weights_for(&sets, k, last);
            let start = self.stencil_start(k);
            let local: Complex64 = (0..4).map(|m| g[start + m] * w[m]).sum();
            out[k + 1] = out[k] * decay + local;
        }
        out
    }

    /// `B_k = int_{x_k}^{H} exp(-kappa (z - x_k)) g(z) dz`.
    pub fn anticausal(&self, kappa: f64, g: &[Complex64]) -> Vec<Complex64> {
        let last = self.rows - 1;
        let sets = self.weight_sets(kappa, false);
        let decay = (-kappa * self.h).exp();
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for k in (0..last).rev() {
            let w = Self::weights_for(&sets, k, last);
            let start = self.stencil_start(k);
            let local: Complex64 = (0..4).map(|m| g[start + m] * w[m]).sum();
            out[k] = out[k + 1] * decay + local;
        }
        out
    }
}

/// Graded rule on `[0, t]`: geometric panels shrinking towards `tau = t`,
/// two Gauss–Legendre nodes per panel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradedRule {
    panels: usize,
    ratio: f64,
}

impl GradedRule {
    pub fn new(nodes: usize, ratio: f64) -> Result<Self> {
        if nodes < 8 {
            return Err(Error::InvalidInput(format!("graded rule needs >= 8 nodes, got {nodes}")));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidInput(format!("grading ratio {ratio} not in (0, 1]")));
        }
        Ok(Self { panels: nodes.div_ceil(2), ratio })
    }

    /// 24 nodes, ratio 0.7.
    pub fn standard() -> Self {
        Self { panels: 12, ratio: 0.7 }
    }

    pub fn node_count(&self) -> usize {
        2 * self.panels
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Twice the panels with the square-rooted ratio.
    pub fn refined(&self) -> Self {
        Self { panels: self.panels * 2, ratio: self.ratio.sqrt() }
    }

    /// `(tau, weight)` pairs for `int_0^t`.
    pub fn nodes(&self, t: f64) -> Vec<(f64, f64)> {
        let p = self.panels;
        let r = self.ratio;
        let total: f64 = (0..p).map(|i| r.powi(i as i32)).sum();
        let g = 1.0 / 3f64.sqrt();
        let mut out = Vec::with_capacity(2 * p);
        let mut a = 0.0;
        for i in 0..p {
            let w = t * r.powi(i as i32) / total;
            let mid = a + 0.5 * w;
            out.push((mid - 0.5 * w * g, 0.5 * w));
            out.push((mid + 0.5 * w * g, 0.5 * w));
            a += w;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn line_quad_exact_for_cubics() {
        let rows = 11;
        let h = 0.1;
        let q = LineQuad::new(h, rows);
        let g: Vec<Complex64> = (0..rows)
            .map(|k| {
                let z = k as f64 * h;
                Complex64::new(1.0 - z + 2.0 * z * z * z, 0.0)
            })
            .collect();
        let kappa = 3.0;
        let a = q.causal(kappa, &g);
        let b = q.anticausal(kappa, &g);
        // Reference by fine composite Simpson.
        let f = |z: f64| 1.0 - z + 2.0 * z * z * z;
        let simpson = |lo: f64, hi: f64, x: f64, sgn: f64| {
            let m = 4000;
            let dz = (hi - lo) / m as f64;
            let mut s = 0.0;
            for i in 0..=m {
                let z = lo + i as f64 * dz;
                let c = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += c * (-kappa * sgn * (x - z)).exp() * f(z);
            }
            s * dz / 3.0
        };
        for k in 0..rows {
            let x = k as f64 * h;
            assert!((a[k].re - simpson(0.0, x, x, 1.0)).abs() < 1e-10, "causal {k}");
            assert!((b[k].re - simpson(x, 1.0, x, -1.0)).abs() < 1e-10, "anticausal {k}");
        }
    }

    #[test]
    fn graded_rule_weights_sum_to_t() {
        let r = GradedRule::standard();
        let nodes = r.nodes(2.0);
        assert_eq!(nodes.len(), 24);
        let s: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(nodes.windows(2).all(|p| p[1].0 > p[0].0));
        assert!(GradedRule::new(6, 0.7).is_err());
    }
}
