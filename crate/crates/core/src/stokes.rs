//! Linear Stokes problem on the half space by representation formulas.
//!
//! `u = v + V`: the homogeneous part `v` applies the Green tensor to `u0`,
//! the Duhamel part `V` integrates the Green tensor against the projected
//! forcing with a graded rule in `tau`.
//!
//! The Green tensor is `Gamma - Gamma*` on the diagonal plus the correction
//! `4 d_j int_0^{x_n} int d_i N(x - z) (Gamma* u0_j)(z) dz` for tangential `j`.
//! Per tangential mode the inner integral is a causal exponential recursion.

use ndarray::{Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, Trajectory, VectorField};
use crate::grid::{HalfSpaceGrid, TimeGrid};
use crate::helmholtz::project_div_form;
use crate::kernels::{causal_spectral, heat_convolve_array, ReflectionKind};
use crate::ops::{boundary_max, d_normal, divergence, laplacian, partial, LpNorm};
use crate::quadrature::GradedRule;
use crate::spectral::{tangential_forward, tangential_inverse, TangentialModes};

/// Source of the projected forcing `P f(tau)`.
pub trait ForcingProvider: Sync {
    fn grid(&self) -> &HalfSpaceGrid;
    fn pf_at(&self, tau: f64) -> Result<VectorField>;
}

/// No forcing.
#[derive(Debug, Clone, Copy)]
pub struct ZeroForcing(pub HalfSpaceGrid);

impl ForcingProvider for ZeroForcing {
    fn grid(&self) -> &HalfSpaceGrid {
        &self.0
    }
    fn pf_at(&self, _tau: f64) -> Result<VectorField> {
        Ok(VectorField::zeros(&self.0))
    }
}

/// Forcing tensor given as a function of time, projected on every call.
pub struct FnForcing<F> {
    grid: HalfSpaceGrid,
    f: F,
}

impl<F: Fn(f64) -> SymTensorField + Sync> FnForcing<F> {
    pub fn new(grid: &HalfSpaceGrid, f: F) -> Self {
        Self { grid: *grid, f }
    }
}

impl<F: Fn(f64) -> SymTensorField + Sync> ForcingProvider for FnForcing<F> {
    fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }
    fn pf_at(&self, tau: f64) -> Result<VectorField> {
        Ok(project_div_form(&(self.f)(tau))?.pf)
    }
}

/// Projected forcing sampled on a time grid plus its value at `tau = 0`,
/// interpolated with [`Trajectory::at`].
#[derive(Debug, Clone)]
pub struct SampledForcing {
    start: VectorField,
    samples: Trajectory,
}

impl SampledForcing {
    /// Projects `F(t_k)` for every sample and `F(0)`.
    pub fn from_tensors(times: TimeGrid, f0: &SymTensorField, fk: &[SymTensorField]) -> Result<Self> {
        let start = project_div_form(f0)?.pf;
        let pf = fk.par_iter().map(|f| Ok(project_div_form(f)?.pf)).collect::<Result<Vec<_>>>()?;
        Ok(Self { start, samples: Trajectory::new(times, pf)? })
    }

    pub fn samples(&self) -> &Trajectory {
        &self.samples
    }
}

impl ForcingProvider for SampledForcing {
    fn grid(&self) -> &HalfSpaceGrid {
        self.start.grid()
    }
    fn pf_at(&self, tau: f64) -> Result<VectorField> {
        Ok(self.samples.at(tau, &self.start))
    }
}

/// Initial data, sample times and the Duhamel time rule.
#[derive(Debug, Clone)]
pub struct StokesProblem {
    pub u0: VectorField,
    pub times: TimeGrid,
    pub rule: GradedRule,
}

impl StokesProblem {
    /// Checks the admissibility of `u0`: divergence and wall trace at most
    /// `1e-8` relative.
    pub fn new(u0: VectorField, times: TimeGrid, rule: GradedRule) -> Result<Self> {
        let scale = u0.max_abs();
        if scale > 0.0 {
            let div = divergence(&u0)?.lp_norm(2.0)?;
            let grad = gradient_norm(&u0)?;
            if div > 1e-8 * grad {
                return Err(Error::InvalidInput(format!("u0 not divergence-free: {:e}", div / grad)));
            }
            let tr = boundary_max(&u0);
            if tr > 1e-8 * scale {
                return Err(Error::InvalidInput(format!("u0 has wall trace {:e}", tr / scale)));
            }
        }
        Ok(Self { u0, times, rule })
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        self.u0.grid()
    }
}

/// Velocity trajectory with per-time diagnostics.
#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub velocity: Trajectory,
    pub pressure: Option<Vec<ScalarField>>,
    /// Wall trace relative to `||u(t)||_inf`.
    pub trace: Vec<f64>,
    /// `||div u(t)||_2 / ||grad u(t)||_2`.
    pub divergence: Vec<f64>,
}

impl StokesSolution {
    fn from_fields(times: TimeGrid, fields: Vec<VectorField>, pressure: Option<Vec<ScalarField>>) -> Result<Self> {
        let diag = fields.par_iter().map(diagnostics).collect::<Result<Vec<_>>>()?;
        let (trace, divergence) = diag.into_iter().unzip();
        Ok(Self { velocity: Trajectory::new(times, fields)?, pressure, trace, divergence })
    }

    pub fn max_trace(&self) -> f64 {
        self.trace.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// `||grad u||_2` with Euclidean magnitude over all components.
pub fn gradient_norm(u: &VectorField) -> Result<f64> {
    crate::besov::sobolev_seminorm(u, 1, 2.0)
}

/// `(wall trace / ||u||_inf, ||div u||_2 / ||grad u||_2)`; zero fields give zeros.
pub fn diagnostics(u: &VectorField) -> Result<(f64, f64)> {
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok((0.0, 0.0));
    }
    let div = divergence(u)?.lp_norm(2.0)?;
    Ok((boundary_max(u) / scale, div / gradient_norm(u)?))
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Tangential spectra of the image heat flow `Gamma*_t u0_j`, tangential `j`.
fn image_spectra(u0: &VectorField, t: f64) -> Result<Vec<Array3<Complex64>>> {
    let g = u0.grid();
    (0..g.dim() - 1)
        .map(|j| Ok(tangential_forward(&heat_convolve_array(g, u0.comp(j), t, ReflectionKind::Image)?)))
        .collect()
}

/// `v(t) = int G(x, y, t) u0(y) dy`.
pub fn green_tensor_apply(u0: &VectorField, t: f64) -> Result<VectorField> {
    check_time(t)?;
    let g = *u0.grid();
    let n = g.dim();
    let nt = n - 1;
    let modes = TangentialModes::new(&g);
    let hj = image_spectra(u0, t)?;
    let aj: Vec<Array3<Complex64>> = hj.iter().map(|h| causal_spectral(&g, h)).collect();
    let shape = aj[0].dim();
    // S = sum_j i xi_j A[h_j].
    let s = Array3::from_shape_fn(shape, |(i, j, k)| {
        (0..nt).map(|q| modes.deriv(i, j, q) * aj[q][[i, j, k]]).sum::<Complex64>()
    });
    let mut comps = Vec::with_capacity(n);
    for m in 0..n {
        let heat = heat_convolve_array(&g, u0.comp(m), t, ReflectionKind::Odd)?;
        let corr = Array3::from_shape_fn(shape, |(i, j, k)| {
            let kappa = modes.kappa(i, j);
            if kappa == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let sym = if m < nt { modes.deriv(i, j, m) / (-2.0 * kappa) } else { Complex64::new(0.5, 0.0) };
            4.0 * sym * s[[i, j, k]]
        });
        comps.push(heat + tangential_inverse(corr));
    }
    let v = VectorField::from_components(&g, comps)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("green tensor"));
    }
    Ok(v)
}

/// Pressure of the homogeneous solution: harmonic, decaying in `x_n`, with
/// tangential symbol `4 sum_beta i xi_beta e^{-|xi'| x_n} (h_beta(0)/2 - d_n h_beta(0) / (2|xi'|))`.
pub fn pressure(u0: &VectorField, t: f64) -> Result<ScalarField> {
    check_time(t)?;
    let g = *u0.grid();
    let nt = g.dim() - 1;
    let modes = TangentialModes::new(&g);
    let mut wall = Array3::<Complex64>::zeros((g.shape().0, g.shape().1, 1));
    for beta in 0..nt {
        let h = heat_convolve_array(&g, u0.comp(beta), t, ReflectionKind::Image)?;
        let dh = d_normal(&g, &h);
        let h0 = tangential_forward(&h.index_axis(Axis(2), 0).to_owned().insert_axis(Axis(2)));
        let dh0 = tangential_forward(&dh.index_axis(Axis(2), 0).to_owned().insert_axis(Axis(2)));
        for ((i, j, _), w) in wall.indexed_iter_mut() {
            let kappa = modes.kappa(i, j);
            if kappa > 0.0 {
                *w += 4.0 * modes.deriv(i, j, beta) * (h0[[i, j, 0]] * 0.5 - dh0[[i, j, 0]] / (2.0 * kappa));
            }
        }
    }
    let out = Array3::from_shape_fn(g.shape(), |(i, j, k)| wall[[i, j, 0]] * (-modes.kappa(i, j) * g.x_nor(k)).exp());
    ScalarField::from_array(&g, tangential_inverse(out))
}

/// Homogeneous solution at every sample time, with pressure when requested.
pub fn solve_homogeneous(prob: &StokesProblem, with_pressure: bool) -> Result<StokesSolution> {
    let times = prob.times.times();
    let fields = times
        .par_iter()
        .map(|&t| green_tensor_apply(&prob.u0, t))
        .collect::<Result<Vec<_>>>()?;
    let pressure = if with_pressure {
        Some(times.par_iter().map(|&t| pressure(&prob.u0, t)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    StokesSolution::from_fields(prob.times, fields, pressure)
}

/// `V(t) = int_0^t G(t - tau) P f(tau) dtau` by the graded rule.
pub fn duhamel_apply(forcing: &dyn ForcingProvider, t: f64, rule: &GradedRule) -> Result<VectorField> {
    check_time(t)?;
    let g = *forcing.grid();
    let mut acc = VectorField::zeros(&g);
    for (tau, w) in rule.nodes(t) {
        let pf = forcing.pf_at(tau)?;
        if pf.max_abs() == 0.0 {
            continue;
        }
        acc.add_assign_scaled(w, &green_tensor_apply(&pf, t - tau)?);
    }
    Ok(acc)
}

/// `u = v + V` at every sample time.
pub fn solve_stokes(prob: &StokesProblem, forcing: &dyn ForcingProvider) -> Result<StokesSolution> {
    prob.grid().same_as(forcing.grid())?;
    let times = prob.times.times();
    let fields = times
        .par_iter()
        .map(|&t| {
            let mut u = green_tensor_apply(&prob.u0, t)?;
            u.add_assign_scaled(1.0, &duhamel_apply(forcing, t, &prob.rule)?);
            Ok(u)
        })
        .collect::<Result<Vec<_>>>()?;
    StokesSolution::from_fields(prob.times, fields, None)
}

/// Duhamel part `V(t_k)` at every sample time.
pub fn duhamel_trajectory(forcing: &dyn ForcingProvider, times: &TimeGrid, rule: &GradedRule) -> Result<Trajectory> {
    let fields = times
        .times()
        .par_iter()
        .map(|&t| duhamel_apply(forcing, t, rule))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(*times, fields)
}

/// `||v_t - lap v + grad pi||_2` over rows at least `skip` cells from either
/// end, relative to `||lap v||_2`, at interior sample `k` (centered
/// three-point time difference on the nonuniform grid).
pub fn momentum_residual(sol: &StokesSolution, k: usize, skip: usize) -> Result<f64> {
    let traj = &sol.velocity;
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::InvalidInput(format!("sample {k} has no centered neighbours")));
    }
    let p = sol
        .pressure
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("momentum residual needs the pressure".into()))?;
    let tg = traj.time_grid();
    let (tm, t0, tp) = (tg.time(k - 1), tg.time(k), tg.time(k + 1));
    let (hm, hp) = (t0 - tm, tp - t0);
    let (cm, c0, cp) = (-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp)));
    let g = *traj.grid();
    let mut res = Vec::new();
    let mut lap_parts = Vec::new();
    for m in 0..g.dim() {
        let vt = traj.field(k - 1).comp(m) * cm + traj.field(k).comp(m) * c0 + traj.field(k + 1).comp(m) * cp;
        let lap = laplacian(&g, traj.field(k).comp(m));
        let gp = partial(&g, p[k].data(), m);
        res.push(vt - &lap + gp);
        lap_parts.push(lap);
    }
    let norm = |parts: &[Array3<f64>]| -> Result<f64> {
        let mag = parts
            .iter()
            .fold(Array3::<f64>::zeros(g.shape()), |acc, a| acc + a.mapv(|v| v * v))
            .mapv(f64::sqrt);
        crate::helmholtz::interior_l2(&g, &mag, skip)
    };
    Ok(norm(&res)? / norm(&lap_parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Discrete curl of `psi = x_n^2 exp(-(x_n - c)^2 / 2 s^2) sin(x1)`.
    pub(crate) fn dipole(g: &HalfSpaceGrid, c: f64, s: f64) -> VectorField {
        let mut psi = ScalarField::from_fn(g, |x| {
            x[2] * x[2] * (-(x[2] - c).powi(2) / (2.0 * s * s)).exp() * x[0].sin()
        });
        crate::ops::clean_wall_rows(g, psi.data_mut());
        crate::ops::curl_2d(&psi).unwrap()
    }

    fn grid(nt: usize, nn: usize) -> HalfSpaceGrid {
        HalfSpaceGrid::new(2, 2.0 * PI, nt, 2.0 * PI, nn).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = grid(16, 16);
        let v = green_tensor_apply(&VectorField::zeros(&g), 0.1).unwrap();
        assert_eq!(v.max_abs(), 0.0);
        assert!(green_tensor_apply(&VectorField::zeros(&g), 0.0).is_err());
    }

    #[test]
    fn green_tensor_contracts() {
        let g = grid(64, 64);
        let u0 = dipole(&g, 3.0, 0.6);
        for t in [0.01, 0.1, 1.0] {
            let v = green_tensor_apply(&u0, t).unwrap();
            let (tr, div) = diagnostics(&v).unwrap();
            assert!(tr < 1e-14, "trace {tr}");
            assert!(div < 1e-4, "t={t} div {div}");
        }
    }

    #[test]
    fn momentum_residual_is_small() {
        let g = grid(64, 64);
        let u0 = dipole(&g, 3.0, 0.6);
        let prob = StokesProblem::new(u0, TimeGrid::new(0.1, 2f64.powf(0.125), 3).unwrap(), GradedRule::standard()).unwrap();
        let sol = solve_homogeneous(&prob, true).unwrap();
        let r = momentum_residual(&sol, 1, 3).unwrap();
        assert!(r < 1e-2, "{r}");
    }
}
