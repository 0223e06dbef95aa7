//! Helmholtz projection of divergence-form forcings `f = div F`.
//!
//! `P f = div F'` with `F'` assembled from `N+ = N(x - y) + N(x - y*)` and
//! `N- = N(x - y) - N(x - y*)` potentials of the components of `F`. Derivatives
//! in `y` are moved onto the kernel analytically (`D_{y_q} N+ = -D_{x_q} N+` for
//! tangential `q`, `D_{y_n} N+ = -D_{x_n} N-`), so every term is a tangential
//! multiplier applied to a Newton potential or its normal derivative.

use ndarray::Array3;
use num_complex::Complex64;

use crate::besov::{besov_norm, BandData, BesovParams};
use crate::error::{Error, Result};
use crate::field::{SymTensorField, VectorField};
use crate::grid::HalfSpaceGrid;
use crate::kernels::{newton_spectral, NewtonSpectral};
use crate::ops::{divergence, lp_norm_array, tensor_divergence, LpNorm};
use crate::spectral::{tangential_forward, tangential_inverse, TangentialModes};

/// Full (not necessarily symmetric) `n x n` tensor field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: HalfSpaceGrid,
    comps: Vec<Array3<f64>>,
}

impl TensorField {
    pub fn zeros(grid: &HalfSpaceGrid) -> Self {
        let n = grid.dim();
        Self { grid: *grid, comps: vec![Array3::zeros(grid.shape()); n * n] }
    }

    pub fn get(&self, k: usize, m: usize) -> &Array3<f64> {
        &self.comps[k * self.grid.dim() + m]
    }

    pub fn get_mut(&mut self, k: usize, m: usize) -> &mut Array3<f64> {
        let n = self.grid.dim();
        &mut self.comps[k * n + m]
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    /// Pointwise Frobenius magnitude.
    pub fn magnitude(&self) -> Array3<f64> {
        self.comps
            .iter()
            .fold(Array3::<f64>::zeros(self.grid.shape()), |acc, a| acc + a.mapv(|v| v * v))
            .mapv(f64::sqrt)
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().iter().fold(0.0, |m, v| m.max(*v))
    }

    /// `(div F)_m = sum_k d_k F_km`, the contraction over the first index.
    pub fn divergence(&self) -> VectorField {
        let g = &self.grid;
        let n = g.dim();
        let comps = (0..n)
            .map(|m| {
                let mut acc = Array3::<f64>::zeros(g.shape());
                for k in 0..n {
                    acc += &crate::ops::partial(g, self.get(k, m), k);
                }
                acc
            })
            .collect();
        VectorField::from_components(g, comps).expect("finite tensor divergence")
    }
}

impl BandData for TensorField {
    fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }
    fn arrays(&self) -> Vec<&Array3<f64>> {
        self.comps.iter().collect()
    }
}

impl LpNorm for TensorField {
    fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_array(&self.grid, &self.magnitude(), p)
    }
}

/// Sign convention for the `F_{beta n}` term of `F'_{beta n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaNTerm {
    /// `-F_{beta n} - 2 |xi'|^2 W-[F_{beta n}]`, consistent with `F'_{beta gamma}`.
    Consistent,
    /// `-2 F_{beta n} + 2 |xi'|^2 W-[F_{beta n}]` as commonly printed; not
    /// divergence-free. Kept for comparison.
    Printed,
}

/// Result of projecting `f = div F`.
#[derive(Debug, Clone)]
pub struct ProjectedForcing {
    pub fprime: TensorField,
    /// `P f = div F'`.
    pub pf: VectorField,
    /// `f = div F`.
    pub f: VectorField,
    /// `||div P f||_2 / ||f||_2` over rows at least three cells from either end.
    pub div_residual: f64,
    /// `max |(P f)_n|` on the wall relative to `||f||_inf`.
    pub trace_residual: f64,
    /// Set when the wall rows of `F` were not negligible.
    pub boundary_flag: bool,
}

/// `P(div F)` for symmetric `F` vanishing on the wall.
pub fn project_div_form(f: &SymTensorField) -> Result<ProjectedForcing> {
    project_with(f, BetaNTerm::Consistent)
}

/// As [`project_div_form`] with an explicit `F_{beta n}` convention.
pub fn project_with(f: &SymTensorField, conv: BetaNTerm) -> Result<ProjectedForcing> {
    let g = *f.grid();
    let n = g.dim();
    let nt = n - 1;
    let scale = f.max_abs();
    let boundary_flag = f.boundary_max() > 1e-8 * scale;
    if boundary_flag {
        log::warn!("forcing tensor does not vanish on the wall");
    }
    let modes = TangentialModes::new(&g);
    let hat = |a: &Array3<f64>| tangential_forward(a);
    let fnn = hat(f.get(nt, nt));
    let pot_nn = newton_spectral(&g, &fnn);
    let (wp_nn, dwp_nn) = pot_nn.plus();

    // Potentials of F_{beta gamma} (plus) and F_{beta n} (minus).
    let mut tang: Vec<Vec<(Array3<Complex64>, Array3<Complex64>)>> = Vec::new();
    let mut mixed: Vec<(Array3<Complex64>, Array3<Complex64>)> = Vec::new();
    let mut fbn_hat = Vec::new();
    for b in 0..nt {
        let row = (0..nt).map(|c| newton_spectral(&g, &hat(f.get(b, c))).plus()).collect();
        tang.push(row);
        let fb = hat(f.get(b, nt));
        let ns: NewtonSpectral = newton_spectral(&g, &fb);
        mixed.push(ns.minus());
        fbn_hat.push(fb);
    }

    let shape = fnn.dim();
    let d = |i: usize, j: usize, axis: usize| modes.deriv(i, j, axis);
    let kappa2 = |i: usize, j: usize| modes.kappa(i, j).powi(2);

    // Psi_beta = -sum_gamma i xi_gamma W+[F_bg] - 2 D_n W-[F_bn] + i xi_beta W+[F_nn].
    let psi: Vec<Array3<Complex64>> = (0..nt)
        .map(|b| {
            Array3::from_shape_fn(shape, |(i, j, k)| {
                let mut v = -2.0 * mixed[b].1[[i, j, k]] + d(i, j, b) * wp_nn[[i, j, k]];
                for c in 0..nt {
                    v -= d(i, j, c) * tang[b][c].0[[i, j, k]];
                }
                v
            })
        })
        .collect();

    let mut fp = TensorField::zeros(&g);
    for b in 0..nt {
        for c in 0..nt {
            let delta = if b == c { 1.0 } else { 0.0 };
            let corr = tangential_inverse(Array3::from_shape_fn(shape, |(i, j, k)| d(i, j, c) * psi[b][[i, j, k]]));
            *fp.get_mut(b, c) = f.get(b, c) - &(f.get(nt, nt) * delta) + corr;
        }
        *fp.get_mut(nt, b) = f.get(nt, b).clone();
        let (c1, c2) = match conv {
            BetaNTerm::Consistent => (-1.0, -2.0),
            BetaNTerm::Printed => (-2.0, 2.0),
        };
        let bn = Array3::from_shape_fn(shape, |(i, j, k)| {
            let mut v = d(i, j, b) * dwp_nn[[i, j, k]]
                + c1 * fbn_hat[b][[i, j, k]]
                + c2 * kappa2(i, j) * mixed[b].0[[i, j, k]];
            for c in 0..nt {
                v -= d(i, j, c) * tang[b][c].1[[i, j, k]];
            }
            v
        });
        *fp.get_mut(b, nt) = tangential_inverse(bn);
    }
    // F'_{nn} = F_nn - F_nn = 0.

    let pf = fp.divergence();
    let fdiv = tensor_divergence(f);
    let fnorm2 = fdiv.lp_norm(2.0)?;
    let fnorm_inf = fdiv.max_abs();
    let div = divergence(&pf)?;
    let interior = interior_l2(&g, div.data(), 3)?;
    let wall = pf.normal().index_axis(ndarray::Axis(2), 0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
    if !pf.is_finite() {
        return Err(Error::NonFinite("projected forcing"));
    }
    Ok(ProjectedForcing {
        fprime: fp,
        pf,
        f: fdiv,
        div_residual: rel(interior, fnorm2),
        trace_residual: rel(wall, fnorm_inf),
        boundary_flag,
    })
}

/// `L^2` norm over rows `skip..=N_nor - skip`.
pub fn interior_l2(grid: &HalfSpaceGrid, data: &Array3<f64>, skip: usize) -> Result<f64> {
    let rows = grid.rows();
    let mut masked = data.clone();
    for ((_, _, k), v) in masked.indexed_iter_mut() {
        if k < skip || k + skip >= rows {
            *v = 0.0;
        }
    }
    lp_norm_array(grid, &masked.mapv(f64::abs), 2.0)
}

/// `||F'|| / ||F||` in `B^alpha_{p,inf}` (`L^p` when `alpha = 0`); zero input gives 0.
pub fn projection_norm_check(f: &SymTensorField, alpha: f64, p: f64) -> Result<f64> {
    if f.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let proj = project_div_form(f)?;
    let (num, den) = if alpha == 0.0 {
        (proj.fprime.lp_norm(p)?, f.lp_norm(p)?)
    } else {
        let params = BesovParams::sup(alpha, p)?;
        (besov_norm(&proj.fprime, &params)?.value, besov_norm(f, &params)?.value)
    };
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::ops::partial;
    use std::f64::consts::PI;

    fn bump(z: f64, c: f64, w: f64) -> f64 {
        (-(z - c).powi(2) / (2.0 * w * w)).exp()
    }

    fn hessian_tensor(g: &HalfSpaceGrid) -> (SymTensorField, VectorField) {
        // chi supported away from both ends; F = grad^2 chi, div F = grad(lap chi).
        let chi = |x: [f64; 3]| ((x[0]).sin() + 0.5 * (2.0 * x[0]).cos()) * bump(x[2], 3.0, 0.4);
        let c = ScalarField::from_fn(g, chi);
        let n = g.dim();
        let comps: Vec<Vec<Array3<f64>>> = (0..n)
            .map(|k| (0..n).map(|l| partial(g, &partial(g, c.data(), k), l)).collect())
            .collect();
        let t = SymTensorField::from_full(g, comps.clone());
        let t = t.unwrap_or_else(|_| {
            // Finite differences do not commute exactly with spectral derivatives; symmetrize.
            let sym: Vec<Vec<Array3<f64>>> = (0..n)
                .map(|k| (0..n).map(|l| (&comps[k][l] + &comps[l][k]) * 0.5).collect())
                .collect();
            SymTensorField::from_full(g, sym).unwrap()
        });
        let f = tensor_divergence(&t);
        (t, f)
    }

    #[test]
    fn zero_projects_to_zero() {
        let g = HalfSpaceGrid::new(2, 2.0 * PI, 16, 2.0 * PI, 16).unwrap();
        let p = project_div_form(&SymTensorField::zeros(&g)).unwrap();
        assert_eq!(p.fprime.max_abs(), 0.0);
        assert_eq!(p.div_residual, 0.0);
        assert_eq!(projection_norm_check(&SymTensorField::zeros(&g), 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_tensor_is_annihilated_exactly() {
        let g = HalfSpaceGrid::new(2, 2.0 * PI, 32, 2.0 * PI, 32).unwrap();
        let phi = ScalarField::from_fn(&g, |x| x[0].cos() * bump(x[2], 3.0, 0.5));
        let p = project_div_form(&SymTensorField::isotropic(&phi)).unwrap();
        assert!(p.pf.max_abs() <= 1e-14 * phi.max_abs(), "{}", p.pf.max_abs());
    }

    #[test]
    fn hessian_gradient_is_annihilated() {
        let mut res = Vec::new();
        for (nt, nn) in [(32, 32), (64, 64)] {
            let g = HalfSpaceGrid::new(2, 2.0 * PI, nt, 2.0 * PI, nn).unwrap();
            let (t, f) = hessian_tensor(&g);
            let p = project_div_form(&t).unwrap();
            res.push(p.pf.lp_norm(2.0).unwrap() / f.lp_norm(2.0).unwrap());
        }
        assert!(res[1] < 1e-3, "{res:?}");
        assert!(res[0] / res[1] > 4.0, "{res:?}");
    }

    #[test]
    fn consistent_convention_is_divergence_free_printed_is_not() {
        let mut good = Vec::new();
        for n in [32, 64] {
            let g = HalfSpaceGrid::new(2, 2.0 * PI, n, 2.0 * PI, n).unwrap();
            let u = VectorField::from_fn(&g, |x| {
                let a = x[0].cos() * bump(x[2], 2.5, 0.5);
                let b = (2.0 * x[0]).sin() * bump(x[2], 3.5, 0.5);
                [a, 0.0, b]
            });
            let t = u.outer_self();
            let c = project_with(&t, BetaNTerm::Consistent).unwrap();
            let p = project_with(&t, BetaNTerm::Printed).unwrap();
            assert!(c.trace_residual < 1e-12, "{}", c.trace_residual);
            assert!(p.div_residual > 0.5, "{}", p.div_residual);
            good.push(c.div_residual);
        }
        assert!(good[0] / good[1] > 8.0, "{good:?}");
        assert!(good[1] < 5e-3, "{good:?}");
    }
}
