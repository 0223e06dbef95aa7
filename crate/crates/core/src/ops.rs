//! Differential operators and norm primitives on sampled fields.
//!
//! Tangential derivatives are spectral. Normal derivatives use fourth-order
//! finite differences: centered in the interior, one-sided on the two rows
//! nearest each end of `[0, H]`.

use ndarray::{Array2, Array3, Axis, Zip};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, Trajectory, VectorField};
use crate::grid::HalfSpaceGrid;
use crate::spectral::{tangential_forward, tangential_inverse, TangentialModes};

const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D1_CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
const D2_CENTER: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

fn d1_line(f: &[f64], out: &mut [f64], h: f64) {
    let n = f.len() - 1;
    let s = 1.0 / (12.0 * h);
    let dot = |w: &[f64], start: usize| w.iter().enumerate().map(|(m, c)| c * f[start + m]).sum::<f64>();
    let dot_rev = |w: &[f64], end: usize| w.iter().enumerate().map(|(m, c)| c * f[end - m]).sum::<f64>();
    out[0] = dot(&D1_EDGE0, 0) * s;
    out[1] = dot(&D1_EDGE1, 0) * s;
    for k in 2..n - 1 {
        out[k] = dot(&D1_CENTER, k - 2) * s;
    }
    out[n - 1] = -dot_rev(&D1_EDGE1, n) * s;
    out[n] = -dot_rev(&D1_EDGE0, n) * s;
}

fn d2_line(f: &[f64], out: &mut [f64], h: f64) {
    let n = f.len() - 1;
    let s = 1.0 / (12.0 * h * h);
    let dot = |w: &[f64], start: usize| w.iter().enumerate().map(|(m, c)| c * f[start + m]).sum::<f64>();
    let dot_rev = |w: &[f64], end: usize| w.iter().enumerate().map(|(m, c)| c * f[end - m]).sum::<f64>();
    out[0] = dot(&D2_EDGE0, 0) * s;
    out[1] = dot(&D2_EDGE1, 0) * s;
    for k in 2..n - 1 {
        out[k] = dot(&D2_CENTER, k - 2) * s;
    }
    out[n - 1] = dot_rev(&D2_EDGE1, n) * s;
    out[n] = dot_rev(&D2_EDGE0, n) * s;
}

fn apply_normal(data: &Array3<f64>, h: f64, op: fn(&[f64], &mut [f64], f64)) -> Array3<f64> {
    let mut out = Array3::<f64>::zeros(data.dim());
    let rows = data.len_of(Axis(2));
    let mut buf = vec![0.0; rows];
    let mut res = vec![0.0; rows];
    Zip::from(data.lanes(Axis(2))).and(out.lanes_mut(Axis(2))).for_each(|src, mut dst| {
        for (b, v) in buf.iter_mut().zip(src.iter()) {
            *b = *v;
        }
        op(&buf, &mut res, h);
        for (d, r) in dst.iter_mut().zip(&res) {
            *d = *r;
        }
    });
    out
}

/// Fourth-order normal derivative `d/dx_n`.
pub fn d_normal(grid: &HalfSpaceGrid, data: &Array3<f64>) -> Array3<f64> {
    apply_normal(data, grid.dx_nor(), d1_line)
}

/// Fourth-order second normal derivative.
pub fn d2_normal(grid: &HalfSpaceGrid, data: &Array3<f64>) -> Array3<f64> {
    apply_normal(data, grid.dx_nor(), d2_line)
}

/// Spectral derivative along tangential axis `axis` (0 or 1).
pub fn d_tangential(grid: &HalfSpaceGrid, data: &Array3<f64>, axis: usize) -> Array3<f64> {
    let modes = TangentialModes::new(grid);
    let mut c = tangential_forward(data);
    for ((i, j, _), v) in c.indexed_iter_mut() {
        *v *= modes.deriv(i, j, axis);
    }
    tangential_inverse(c)
}

/// Partial derivative along coordinate `m` (the last index is the normal one).
pub fn partial(grid: &HalfSpaceGrid, data: &Array3<f64>, m: usize) -> Array3<f64> {
    if m == grid.dim() - 1 {
        d_normal(grid, data)
    } else {
        d_tangential(grid, data, m)
    }
}

/// Tangential Laplacian (spectral).
pub fn laplacian_tangential(grid: &HalfSpaceGrid, data: &Array3<f64>) -> Array3<f64> {
    let modes = TangentialModes::new(grid);
    let mut c = tangential_forward(data);
    for ((i, j, _), v) in c.indexed_iter_mut() {
        let kap = modes.kappa(i, j);
        *v *= -kap * kap;
    }
    tangential_inverse(c)
}

pub fn laplacian(grid: &HalfSpaceGrid, data: &Array3<f64>) -> Array3<f64> {
    laplacian_tangential(grid, data) + d2_normal(grid, data)
}

/// `div f = sum_m d_m f_m`.
pub fn divergence(f: &VectorField) -> Result<ScalarField> {
    let g = f.grid();
    if f.dim() != g.dim() {
        return Err(Error::Dimension { expected: g.dim(), found: f.dim() });
    }
    let mut out = Array3::<f64>::zeros(g.shape());
    for m in 0..g.dim() {
        out += &partial(g, f.comp(m), m);
    }
    ScalarField::from_array(g, out)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    let comps = (0..g.dim()).map(|m| partial(g, f.data(), m)).collect();
    VectorField::from_components(g, comps).expect("gradient of finite field")
}

/// Sets the wall row of a potential to zero and corrects row 1 so that its
/// discrete normal derivative on the wall vanishes.
pub fn clean_wall_rows(grid: &HalfSpaceGrid, data: &mut Array3<f64>) {
    data.index_axis_mut(Axis(2), 0).fill(0.0);
    let d = d_normal(grid, data);
    let h = grid.dx_nor();
    let d0 = d.index_axis(Axis(2), 0).to_owned();
    let mut row1 = data.index_axis_mut(Axis(2), 1);
    row1.zip_mut_with(&d0, |v, dv| *v -= dv * 12.0 * h / D1_EDGE0[1]);
}

/// Discrete curl `(d_n psi, -d_1 psi)` of a 2D stream function; its discrete
/// divergence vanishes to roundoff because the partials act on different axes.
pub fn curl_2d(psi: &ScalarField) -> Result<VectorField> {
    let g = psi.grid();
    if g.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: g.dim() });
    }
    let u1 = d_normal(g, psi.data());
    let un = d_tangential(g, psi.data(), 0).mapv(|v| -v);
    VectorField::from_components(g, vec![u1, un])
}

/// Discrete curl of a 3D vector potential `a = (a_1, a_2, a_n)`.
pub fn curl_3d(a: &VectorField) -> Result<VectorField> {
    let g = a.grid();
    if g.dim() != 3 {
        return Err(Error::Dimension { expected: 3, found: g.dim() });
    }
    let d = |c: usize, m: usize| partial(g, a.comp(c), m);
    let comps = vec![d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)];
    VectorField::from_components(g, comps)
}

/// Row-wise divergence of a tensor: `(div F)_k = sum_l d_l F_kl`.
pub fn tensor_divergence(f: &SymTensorField) -> VectorField {
    let g = f.grid();
    let n = g.dim();
    let comps = (0..n)
        .map(|k| {
            let mut acc = Array3::<f64>::zeros(g.shape());
            for l in 0..n {
                acc += &partial(g, f.get(k, l), l);
            }
            acc
        })
        .collect();
    VectorField::from_components(g, comps).expect("finite divergence")
}

/// Wall row `x_n = 0` of every component.
pub fn boundary_trace(f: &VectorField) -> Vec<Array2<f64>> {
    f.comps().iter().map(crate::field::wall_slice).collect()
}

/// Largest boundary value of a vector field (Euclidean magnitude).
pub fn boundary_max(f: &VectorField) -> f64 {
    let mag = f.magnitude();
    mag.index_axis(Axis(2), 0).iter().fold(0.0, |m, v| m.max(*v))
}

/// Validated integrability exponent in `[1, inf]`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidExponent(format!("p = {p} must satisfy p >= 1")))
    } else {
        Ok(())
    }
}

/// Normal trapezoid weights times the tangential cell volume.
pub fn quadrature_weights(grid: &HalfSpaceGrid) -> Vec<f64> {
    let cell = grid.dx_tan().powi(grid.dim() as i32 - 1) * grid.dx_nor();
    let rows = grid.rows();
    (0..rows).map(|k| if k == 0 || k == rows - 1 { 0.5 * cell } else { cell }).collect()
}

/// `L^p` norm of a nonnegative magnitude array by composite trapezoid quadrature.
pub fn lp_norm_array(grid: &HalfSpaceGrid, mag: &Array3<f64>, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(mag.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let w = quadrature_weights(grid);
    let mut total = 0.0;
    for ((_, _, k), v) in mag.indexed_iter() {
        total += w[k] * v.abs().powf(p);
    }
    Ok(total.powf(1.0 / p))
}

pub trait LpNorm {
    fn lp_norm(&self, p: f64) -> Result<f64>;
}

impl LpNorm for ScalarField {
    fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_array(self.grid(), self.data(), p)
    }
}

impl LpNorm for VectorField {
    fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_array(self.grid(), &self.magnitude(), p)
    }
}

impl LpNorm for SymTensorField {
    fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_array(self.grid(), &self.magnitude(), p)
    }
}

/// `sup_k t_k^beta ||f(t_k)||_p`.
pub fn weighted_sup_norm(traj: &Trajectory, beta: f64, p: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for (k, f) in traj.fields().iter().enumerate() {
        let t = traj.time_grid().time(k);
        best = best.max(t.powf(beta) * f.lp_norm(p)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stencils_exact_on_quartics() {
        let g = HalfSpaceGrid::new(2, 1.0, 8, 1.0, 10).unwrap();
        let f = ScalarField::from_fn(&g, |x| 1.0 + x[2] - 2.0 * x[2].powi(2) + x[2].powi(3) + 0.5 * x[2].powi(4));
        let d = d_normal(&g, f.data());
        let d2 = d2_normal(&g, f.data());
        for k in 0..g.rows() {
            let z = g.x_nor(k);
            let exact = 1.0 - 4.0 * z + 3.0 * z * z + 2.0 * z.powi(3);
            let exact2 = -4.0 + 6.0 * z + 6.0 * z * z;
            assert!((d[[0, 0, k]] - exact).abs() < 1e-10, "row {k}");
            assert!((d2[[0, 0, k]] - exact2).abs() < 1e-8, "row {k}");
        }
    }

    #[test]
    fn zero_field_has_zero_divergence() {
        let g = HalfSpaceGrid::new(2, 1.0, 16, 1.0, 16).unwrap();
        let d = divergence(&VectorField::zeros(&g)).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn curl_form_is_divergence_free() {
        let g = HalfSpaceGrid::new(2, 2.0 * PI, 32, 2.0 * PI, 32).unwrap();
        let psi = ScalarField::from_fn(&g, |x| (x[0]).sin() * (-(x[2] - 3.0).powi(2)).exp());
        let u = curl_2d(&psi).unwrap();
        let d = divergence(&u).unwrap();
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn curl_3d_is_divergence_free() {
        let g = HalfSpaceGrid::new(3, 2.0 * PI, 16, 2.0 * PI, 16).unwrap();
        let a = VectorField::from_fn(&g, |x| {
            let b = (-(x[2] - 3.0).powi(2)).exp();
            [x[1].sin() * b, x[0].cos() * b, (x[0] + x[1]).sin() * b]
        });
        let d = divergence(&curl_3d(&a).unwrap()).unwrap();
        assert!(d.max_abs() < 1e-12, "{}", d.max_abs());
    }

    #[test]
    fn constant_field_norm() {
        let g = HalfSpaceGrid::new(2, 1.0, 16, 1.0, 16).unwrap();
        let f = ScalarField::from_fn(&g, |_| 1.0);
        for p in [1.0, 2.0, 3.5] {
            assert!((f.lp_norm(p).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn boundary_trace_of_xn_times_g_vanishes() {
        let g = HalfSpaceGrid::new(2, 1.0, 16, 1.0, 16).unwrap();
        let f = VectorField::from_fn(&g, |x| [x[2] * (2.0 * PI * x[0]).cos(), 0.0, x[2]]);
        assert!(boundary_trace(&f).iter().all(|s| s.iter().all(|v| *v == 0.0)));
        let h = VectorField::from_fn(&g, |x| [(-x[2]).exp() * x[0], 0.0, 0.0]);
        let tr = boundary_trace(&h);
        for i in 0..16 {
            assert_eq!(tr[0][[i, 0]], g.x_tan(i));
        }
    }
}
