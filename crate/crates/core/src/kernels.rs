//! Primitive integral operators: the heat kernel with reflections, the
//! Newtonian potential, the boundary operator `N` and tangential Riesz
//! transforms.
//!
//! Everything is evaluated in a mixed representation. Tangential directions
//! are handled by FFT. The heat kernel uses the doubled normal box, and the
//! Newton kernel `exp(-|xi'| |x_n - y_n|) / (-2 |xi'|)` is integrated per
//! tangential mode with [`LineQuad`].

use ndarray::{s, Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{HalfSpaceGrid, TimeGrid};
use crate::ops::LpNorm;
use crate::quadrature::LineQuad;
use crate::spectral::{
    doubled_forward, doubled_inverse, doubled_xi_sq, extend_normal, restrict_normal, tangential_forward,
    tangential_inverse, Extension, TangentialModes,
};

/// Which heat operator acts on half-space data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ReflectionKind {
    /// `Gamma` on the zero extension.
    None,
    /// `Gamma - Gamma*`: vanishes on the wall.
    Odd,
    /// `Gamma + Gamma*`: zero normal derivative on the wall.
    Even,
    /// `Gamma*` alone, the image source `y* = (y', -y_n)`.
    Image,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Heat kernel `(4 pi t)^{-n/2} exp(-|x|^2 / 4t)` with `n = x.len()`.
pub fn gauss_kernel(x: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((4.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

fn extended(data: &Array3<f64>, refl: ReflectionKind) -> Array3<f64> {
    match refl {
        ReflectionKind::None => extend_normal(data, Extension::Zero),
        ReflectionKind::Odd => extend_normal(data, Extension::Odd),
        ReflectionKind::Even => extend_normal(data, Extension::Even),
        ReflectionKind::Image => {
            let e = extend_normal(data, Extension::Even);
            let o = extend_normal(data, Extension::Odd);
            (e - o) * 0.5
        }
    }
}

/// Width of the wall profile `exp(-x_n^2 / 2a^2)` split off before transforms.
fn wall_profile_width(grid: &HalfSpaceGrid) -> f64 {
    grid.height() / 8.0
}

/// 1D heat flow of the profile `phi(x) = exp(-x^2 / 2a^2)` continued by `refl`.
fn profile_heat(x: f64, a: f64, t: f64, refl: ReflectionKind) -> f64 {
    let big = a * a + 2.0 * t;
    let c = a / big.sqrt() * (-x * x / (2.0 * big)).exp();
    let e = libm::erf(x * a / (2.0 * (t * big).sqrt()));
    match refl {
        ReflectionKind::Odd => c * e,
        ReflectionKind::Even => c,
        ReflectionKind::None => 0.5 * c * (1.0 + e),
        ReflectionKind::Image => 0.5 * c * (1.0 - e),
    }
}

/// Heat flow of raw grid data for time `t`.
///
/// The wall values `g(x')` are split off as `g(x') phi(x_n)` and flowed in
/// closed form, so the doubled-box FFT only sees data that vanishes on the
/// wall and the jump of the odd or zero continuation never reaches it.
pub fn heat_convolve_array(
    grid: &HalfSpaceGrid,
    data: &Array3<f64>,
    t: f64,
    refl: ReflectionKind,
) -> Result<Array3<f64>> {
    check_time(t)?;
    let a = wall_profile_width(grid);
    // The even extension is continuous across the wall; nothing to split off.
    let mut wall = data.index_axis(Axis(2), 0).to_owned();
    if refl == ReflectionKind::Even {
        wall.fill(0.0);
    }
    let mut rest = data.clone();
    for ((i, j, k), v) in rest.indexed_iter_mut() {
        let z = grid.x_nor(k);
        *v -= wall[[i, j]] * (-z * z / (2.0 * a * a)).exp();
    }
    let mut c = doubled_forward(&extended(&rest, refl));
    let xi2 = doubled_xi_sq(grid);
    c.zip_mut_with(&xi2, |z, q| *z *= (-t * q).exp());
    let mut out = restrict_normal(&doubled_inverse(c));
    if wall.iter().any(|v| *v != 0.0) {
        let modes = TangentialModes::new(grid);
        let mut wh = tangential_forward(&wall.insert_axis(Axis(2)));
        for ((i, j, _), z) in wh.indexed_iter_mut() {
            *z *= (-t * modes.kappa(i, j).powi(2)).exp();
        }
        let flowed = tangential_inverse(wh);
        for ((i, j, k), v) in out.indexed_iter_mut() {
            *v += flowed[[i, j, 0]] * profile_heat(grid.x_nor(k), a, t, refl);
        }
    }
    if refl == ReflectionKind::Odd {
        let last = grid.n_nor();
        out.index_axis_mut(Axis(2), 0).fill(0.0);
        out.index_axis_mut(Axis(2), last).fill(0.0);
    }
    Ok(out)
}

pub fn heat_convolve(u0: &ScalarField, t: f64, refl: ReflectionKind) -> Result<ScalarField> {
    ScalarField::from_array(u0.grid(), heat_convolve_array(u0.grid(), u0.data(), t, refl)?)
}

/// Componentwise heat flow of a vector field.
pub fn heat_convolve_vector(u0: &VectorField, t: f64, refl: ReflectionKind) -> Result<VectorField> {
    let g = u0.grid();
    let comps = u0
        .comps()
        .iter()
        .map(|c| heat_convolve_array(g, c, t, refl))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(g, comps)
}

/// `t_k^{alpha/2} ||Gamma_{t_k} * u0||_p` over a time grid.
pub fn heat_decay_profile(u0: &VectorField, times: &TimeGrid, p: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    times
        .times()
        .into_iter()
        .map(|t| Ok(t.powf(alpha / 2.0) * heat_convolve_vector(u0, t, ReflectionKind::None)?.lp_norm(p)?))
        .collect()
}

/// Tangential spectra of the direct and image Newton potentials and their
/// normal derivatives.
#[derive(Debug, Clone)]
pub struct NewtonSpectral {
    pub direct: Array3<Complex64>,
    pub direct_dn: Array3<Complex64>,
    pub image: Array3<Complex64>,
    pub image_dn: Array3<Complex64>,
}

impl NewtonSpectral {
    /// `N+ = N(x - y) + N(x - y*)` and its normal derivative.
    pub fn plus(&self) -> (Array3<Complex64>, Array3<Complex64>) {
        (&self.direct + &self.image, &self.direct_dn + &self.image_dn)
    }

    /// `N- = N(x - y) - N(x - y*)` and its normal derivative.
    pub fn minus(&self) -> (Array3<Complex64>, Array3<Complex64>) {
        (&self.direct - &self.image, &self.direct_dn - &self.image_dn)
    }
}

fn lanes(fhat: &Array3<Complex64>) -> Vec<(usize, usize)> {
    let (a, b, _) = fhat.dim();
    (0..a).flat_map(|i| (0..b).map(move |j| (i, j))).collect()
}

fn scatter(shape: (usize, usize, usize), idx: &[(usize, usize)], lines: Vec<Vec<Complex64>>) -> Array3<Complex64> {
    let mut out = Array3::<Complex64>::zeros(shape);
    for (&(i, j), line) in idx.iter().zip(lines) {
        for (k, v) in line.into_iter().enumerate() {
            out[[i, j, k]] = v;
        }
    }
    out
}

/// Newton potentials of tangential spectra `fhat` (unnormalized forward FFT
/// per row), per mode by fourth-order exponential quadrature in `y_n`.
pub fn newton_spectral(grid: &HalfSpaceGrid, fhat: &Array3<Complex64>) -> NewtonSpectral {
    let modes = TangentialModes::new(grid);
    let rows = grid.rows();
    let h = grid.dx_nor();
    let lq = LineQuad::new(h, rows);
    let idx = lanes(fhat);
    let per_mode: Vec<[Vec<Complex64>; 4]> = idx
        .par_iter()
        .map(|&(i, j)| {
            let g: Vec<Complex64> = fhat.slice(s![i, j, ..]).to_vec();
            let kappa = modes.kappa(i, j);
            if kappa == 0.0 {
                zero_mode(&lq, &g, h)
            } else {
                let a = lq.causal(kappa, &g);
                let b = lq.anticausal(kappa, &g);
                let inv = -0.5 / kappa;
                let b0 = b[0];
                let mut out: [Vec<Complex64>; 4] = Default::default();
                for k in 0..rows {
                    let x = k as f64 * h;
                    let e = (-kappa * x).exp();
                    out[0].push((a[k] + b[k]) * inv);
                    out[1].push((a[k] - b[k]) * 0.5);
                    out[2].push(b0 * (e * inv));
                    out[3].push(b0 * (0.5 * e));
                }
                out
            }
        })
        .collect();
    let shape = fhat.dim();
    let mut parts: [Vec<Vec<Complex64>>; 4] = Default::default();
    for m in per_mode {
        for (p, v) in parts.iter_mut().zip(m) {
            p.push(v);
        }
    }
    let [d, dd, im, imd] = parts;
    NewtonSpectral {
        direct: scatter(shape, &idx, d),
        direct_dn: scatter(shape, &idx, dd),
        image: scatter(shape, &idx, im),
        image_dn: scatter(shape, &idx, imd),
    }
}

/// Zero tangential mode: kernels `|x - z| / 2` and `(x + z) / 2`.
fn zero_mode(lq: &LineQuad, g: &[Complex64], h: f64) -> [Vec<Complex64>; 4] {
    let zg: Vec<Complex64> = g.iter().enumerate().map(|(k, v)| v * (k as f64 * h)).collect();
    let m0 = lq.causal(0.0, g);
    let m1 = lq.causal(0.0, &zg);
    let last = g.len() - 1;
    let (m0h, m1h) = (m0[last], m1[last]);
    let mut out: [Vec<Complex64>; 4] = Default::default();
    for k in 0..g.len() {
        let x = k as f64 * h;
        out[0].push((m0[k] * x - m1[k] + (m1h - m1[k]) - (m0h - m0[k]) * x) * 0.5);
        out[1].push((m0[k] - (m0h - m0[k])) * 0.5);
        out[2].push((m0h * x + m1h) * 0.5);
        out[3].push(m0h * 0.5);
    }
    out
}

/// Per-mode causal integrals `int_0^{x_n} exp(-|xi'| (x_n - z)) g(z) dz`.
pub fn causal_spectral(grid: &HalfSpaceGrid, fhat: &Array3<Complex64>) -> Array3<Complex64> {
    let modes = TangentialModes::new(grid);
    let lq = LineQuad::new(grid.dx_nor(), grid.rows());
    let idx = lanes(fhat);
    let lines: Vec<Vec<Complex64>> = idx
        .par_iter()
        .map(|&(i, j)| lq.causal(modes.kappa(i, j), &fhat.slice(s![i, j, ..]).to_vec()))
        .collect();
    scatter(fhat.dim(), &idx, lines)
}

/// True when the last two rows are negligible (`<= 1e-6 ||f||_inf`).
pub fn decays_at_top(data: &Array3<f64>) -> bool {
    let rows = data.len_of(Axis(2));
    let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let top = data
        .slice(s![.., .., rows - 2..])
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    top <= 1e-6 * scale
}

/// A Newton-type potential and its normal derivative.
#[derive(Debug, Clone)]
pub struct NewtonPotential {
    pub value: ScalarField,
    pub d_normal: ScalarField,
    /// False when the source does not decay towards `x_n = H`.
    pub decay_ok: bool,
}

fn newton_output(f: &ScalarField, image: bool) -> Result<NewtonPotential> {
    let g = f.grid();
    let decay_ok = decays_at_top(f.data());
    if !decay_ok {
        log::warn!("Newton source does not decay at the truncation height");
    }
    let ns = newton_spectral(g, &tangential_forward(f.data()));
    let (v, d) = if image { (ns.image, ns.image_dn) } else { (ns.direct, ns.direct_dn) };
    Ok(NewtonPotential {
        value: ScalarField::from_array(g, tangential_inverse(v))?,
        d_normal: ScalarField::from_array(g, tangential_inverse(d))?,
        decay_ok,
    })
}

/// `w(x) = int_{R^n_+} N(x - y) f(y) dy`.
pub fn newton_volume(f: &ScalarField) -> Result<NewtonPotential> {
    newton_output(f, false)
}

/// `int_{R^n_+} N(x - y*) f(y) dy`.
pub fn newton_image(f: &ScalarField) -> Result<NewtonPotential> {
    newton_output(f, true)
}

/// Fundamental solution of the Laplacian: `|x|^{2-n} / (omega_n (2 - n))`,
/// `ln|x| / 2 pi` in two dimensions.
pub fn newton_kernel(x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    match x.len() {
        2 => r.ln() / (2.0 * PI),
        n => {
            let nf = n as f64;
            let omega = 2.0 * PI.powf(nf / 2.0) / gamma_half(n);
            r.powf(2.0 - nf) / (omega * (2.0 - nf))
        }
    }
}

/// `Gamma(n / 2)` for positive integers `n`.
fn gamma_half(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < n as f64 / 2.0 - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

/// Output of the boundary operator `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryProfile {
    /// `N g`, symbol `exp(-|xi'| x_n) / (-2 |xi'|)`; zero mode dropped.
    Potential,
    /// `D_{x_n} N g`, symbol `exp(-|xi'| x_n) / 2`: one half of the harmonic extension.
    NormalDerivative,
}

/// `N g(x) = int N(x' - y', x_n) g(y') dy'` for wall data `g`.
pub fn poisson_boundary(grid: &HalfSpaceGrid, g: &Array2<f64>, profile: BoundaryProfile) -> Result<ScalarField> {
    let (a, b, _) = grid.shape();
    if g.dim() != (a, b) {
        return Err(Error::GridMismatch(format!("boundary data {:?} vs ({a}, {b})", g.dim())));
    }
    let ghat = tangential_forward(&g.clone().insert_axis(Axis(2)));
    let modes = TangentialModes::new(grid);
    let rows = grid.rows();
    let out = Array3::from_shape_fn((a, b, rows), |(i, j, k)| {
        let kappa = modes.kappa(i, j);
        let x = grid.x_nor(k);
        let sym = match profile {
            BoundaryProfile::Potential if kappa == 0.0 => 0.0,
            BoundaryProfile::Potential => (-kappa * x).exp() / (-2.0 * kappa),
            BoundaryProfile::NormalDerivative => 0.5 * (-kappa * x).exp(),
        };
        ghat[[i, j, 0]] * sym
    });
    ScalarField::from_array(grid, tangential_inverse(out))
}

/// Harmonic extension of wall data: `2 D_{x_n} N g`.
pub fn harmonic_extension(grid: &HalfSpaceGrid, g: &Array2<f64>) -> Result<ScalarField> {
    Ok(poisson_boundary(grid, g, BoundaryProfile::NormalDerivative)?.scaled(2.0))
}

/// Tangential Riesz multiplier `-i xi_axis / |xi'|` applied to raw data;
/// the zero and Nyquist modes map to zero. With this sign
/// `D_{x_i} N g = D_{x_n} N R_i g`.
pub fn riesz_array(grid: &HalfSpaceGrid, data: &Array3<f64>, axis: usize) -> Result<Array3<f64>> {
    if axis + 1 >= grid.dim() {
        return Err(Error::InvalidInput(format!("tangential axis {axis} out of range")));
    }
    let modes = TangentialModes::new(grid);
    let mut c = tangential_forward(data);
    for ((i, j, _), z) in c.indexed_iter_mut() {
        let kappa = modes.kappa(i, j);
        *z = if kappa == 0.0 { Complex64::new(0.0, 0.0) } else { -*z * modes.deriv(i, j, axis) / kappa };
    }
    Ok(tangential_inverse(c))
}

pub fn riesz_tangential(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    ScalarField::from_array(f.grid(), riesz_array(f.grid(), f.data(), axis)?)
}

/// L1 norm of the kernel of `Phi_j(xi) exp(-t |xi|^2)` on the doubled box,
/// paired with the bound `exp(-t 4^j / 8)`.
pub fn multiplier_decay_check(grid: &HalfSpaceGrid, j: i32, t: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    let bank = crate::besov::DyadicFilterBank::new(grid);
    bank.check_band(j)?;
    let xi2 = doubled_xi_sq(grid);
    let spec = xi2.mapv(|q| Complex64::new(bank.fat(j, q.sqrt()) * (-t * q).exp(), 0.0));
    let kernel = doubled_inverse(spec);
    let measured = kernel.iter().map(|v| v.abs()).sum::<f64>();
    Ok((measured, (-t * 4f64.powi(j) / 8.0).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> HalfSpaceGrid {
        HalfSpaceGrid::new(2, 2.0 * PI, 64, 2.0 * PI, 64).unwrap()
    }

    #[test]
    fn gauss_kernel_values() {
        assert_abs_diff_eq!(gauss_kernel(&[0.0; 3], 1.0).unwrap(), (4.0 * PI).powf(-1.5), epsilon = 1e-16);
        assert_abs_diff_eq!(gauss_kernel(&[0.0; 3], 1.0).unwrap(), 0.0224484, epsilon = 1e-7);
        assert!(gauss_kernel(&[0.0; 2], 0.0).is_err());
        assert!(gauss_kernel(&[0.0; 2], -1.0).is_err());
    }

    #[test]
    fn newton_kernel_unit_sphere() {
        assert_abs_diff_eq!(newton_kernel(&[1.0, 0.0, 0.0]), -1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(newton_kernel(&[0.0, 1.0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn odd_heat_has_zero_trace() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| (x[0]).cos() + x[2].sin() + 1.0);
        let r = heat_convolve(&f, 0.3, ReflectionKind::Odd).unwrap();
        assert!(r.data().index_axis(Axis(2), 0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn heat_of_gaussian_bump() {
        let g = grid();
        let (c, s2, t) = (PI, 0.1f64, 0.05);
        let f = ScalarField::from_fn(&g, |x| (-((x[0] - c).powi(2) + (x[2] - c).powi(2)) / (2.0 * s2)).exp());
        let r = heat_convolve(&f, t, ReflectionKind::None).unwrap();
        let w2 = s2 + 2.0 * t;
        let mut err = 0.0f64;
        for ((i, _, k), v) in r.data().indexed_iter() {
            let x = g.point(i, 0, k);
            let exact = s2 / w2 * (-((x[0] - c).powi(2) + (x[2] - c).powi(2)) / (2.0 * w2)).exp();
            err = err.max((v - exact).abs());
        }
        assert!(err < 1e-8, "{err}");
    }

    fn newton_residual(n_nor: usize) -> (f64, f64) {
        let g = HalfSpaceGrid::new(2, 2.0 * PI, 32, 2.0 * PI, n_nor).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * x[0]).sin() * (-(x[2] - PI).powi(2) * 2.0).exp());
        let w = newton_volume(&f).unwrap();
        assert!(w.decay_ok);
        let lap = crate::ops::laplacian(&g, w.value.data());
        let mut err = 0.0f64;
        for ((i, j, k), a) in lap.indexed_iter() {
            if k > 2 && k + 2 < g.rows() {
                err = err.max((a - f.data()[[i, j, k]]).abs());
            }
        }
        let dn = crate::ops::d_normal(&g, w.value.data());
        let diff = (&dn - w.d_normal.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (err, diff)
    }

    #[test]
    fn newton_inverts_laplacian_in_interior() {
        let (e1, d1) = newton_residual(48);
        let (e2, d2) = newton_residual(96);
        assert!(e2 < 1e-4 && d2 < 1e-4, "{e2} {d2}");
        assert!(e1 / e2 > 4.0, "order: {e1} -> {e2}");
        assert!(d1 / d2 > 4.0, "order: {d1} -> {d2}");
    }

    #[test]
    fn harmonic_extension_of_sine() {
        let g = grid();
        let k0 = 2.0 * PI / g.length();
        let wall = Array2::from_shape_fn((g.n_tan(), 1), |(i, _)| (k0 * g.x_tan(i)).sin());
        let ext = harmonic_extension(&g, &wall).unwrap();
        for ((i, _, k), v) in ext.data().indexed_iter() {
            let exact = (k0 * g.x_tan(i)).sin() * (-k0 * g.x_nor(k)).exp();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn riesz_identity_on_boundary_data() {
        let g = grid();
        let wall = Array2::from_shape_fn((g.n_tan(), 1), |(i, _)| {
            let x = g.x_tan(i);
            x.cos() + 0.3 * (3.0 * x).sin() - 0.2 * (5.0 * x).cos()
        });
        let lhs = crate::ops::d_tangential(
            &g,
            poisson_boundary(&g, &wall, BoundaryProfile::Potential).unwrap().data(),
            0,
        );
        let rw = riesz_array(&g, &wall.clone().insert_axis(Axis(2)), 0).unwrap();
        let rhs = poisson_boundary(&g, &rw.index_axis(Axis(2), 0).to_owned(), BoundaryProfile::NormalDerivative)
            .unwrap();
        let err = (&lhs - rhs.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12, "{err}");
    }
}
