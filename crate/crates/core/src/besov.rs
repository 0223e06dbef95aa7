//! Homogeneous Besov norms by Littlewood–Paley decomposition.
//!
//! Half-space data is zero-extended across the wall onto the doubled periodic
//! box and split into dyadic annuli `2^{j-1} < |xi| < 2^{j+1}`.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, Trajectory, VectorField};
use crate::grid::{HalfSpaceGrid, TimeGrid};
use crate::ops::{check_exponent, partial, LpNorm};
use crate::spectral::{doubled_forward, doubled_inverse, doubled_xi_sq, extend_normal, Extension};

/// Bump `exp(1 - 1/(1 - r^2))` on `|r| < 1`.
fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Dyadic filters `phi_j(xi) = psi(log2|xi| - j) / sum_i psi(log2|xi| - i)`.
#[derive(Debug, Clone, Copy)]
pub struct DyadicFilterBank {
    j_min: i32,
    j_max: i32,
}

impl DyadicFilterBank {
    pub fn new(grid: &HalfSpaceGrid) -> Self {
        let (j_min, j_max) = grid.band_range();
        Self { j_min, j_max }
    }

    pub fn range(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }

    pub fn check_band(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            Err(Error::BandOutOfRange { j, min: self.j_min, max: self.j_max })
        } else {
            Ok(())
        }
    }

    /// `phi_j` at radius `xi`; an exact partition of unity for `xi > 0`.
    pub fn phi(&self, j: i32, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let r = xi.log2();
        let own = bump(r - j as f64);
        if own == 0.0 {
            return 0.0;
        }
        let f = r.floor() as i32;
        let total: f64 = (f - 1..=f + 2).map(|i| bump(r - i as f64)).sum();
        own / total
    }

    /// Fat filter `phi_{j-1} + phi_j + phi_{j+1}`.
    pub fn fat(&self, j: i32, xi: f64) -> f64 {
        self.phi(j - 1, xi) + self.phi(j, xi) + self.phi(j + 1, xi)
    }
}

/// Request for `B^s_{p,q}`; `q = inf` is the limiting case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub extension: Extension,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        check_exponent(p)?;
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(format!("q = {q} must satisfy q >= 1")));
        }
        Ok(Self { s, p, q, extension: Extension::Zero })
    }

    /// `B^s_{p,inf}`.
    pub fn sup(s: f64, p: f64) -> Result<Self> {
        Self::new(s, p, f64::INFINITY)
    }

    /// Critical regularity `-1 + n/p`.
    pub fn critical(n: usize, p: f64) -> Result<Self> {
        Self::sup(-1.0 + n as f64 / p, p)
    }
}

/// Norm value with its band-by-band breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    /// `(j, 2^{js} ||phi_j * f||_p)` in ascending `j`.
    pub bands: Vec<(i32, f64)>,
    pub argmax: i32,
    /// Sup attained at `j_min` or `j_max`: the norm is not resolved.
    pub truncated: bool,
    pub flags: Vec<String>,
}

/// Data that can be split into bands: one or more components on a grid.
pub trait BandData {
    fn grid(&self) -> &HalfSpaceGrid;
    fn arrays(&self) -> Vec<&Array3<f64>>;
}

impl BandData for ScalarField {
    fn grid(&self) -> &HalfSpaceGrid {
        ScalarField::grid(self)
    }
    fn arrays(&self) -> Vec<&Array3<f64>> {
        vec![self.data()]
    }
}

impl BandData for VectorField {
    fn grid(&self) -> &HalfSpaceGrid {
        VectorField::grid(self)
    }
    fn arrays(&self) -> Vec<&Array3<f64>> {
        self.comps().iter().collect()
    }
}

impl BandData for SymTensorField {
    fn grid(&self) -> &HalfSpaceGrid {
        SymTensorField::grid(self)
    }
    fn arrays(&self) -> Vec<&Array3<f64>> {
        let n = self.dim();
        (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).map(|(k, l)| self.get(k, l)).collect()
    }
}

/// `L^p` norm on the doubled box of the pointwise Euclidean magnitude.
fn box_norm(grid: &HalfSpaceGrid, parts: &[Array3<f64>], p: f64) -> f64 {
    let cell = grid.dx_tan().powi(grid.dim() as i32 - 1) * grid.dx_nor();
    let mag = parts
        .iter()
        .fold(Array3::<f64>::zeros(parts[0].dim()), |acc, a| acc + a.mapv(|v| v * v))
        .mapv(f64::sqrt);
    if p.is_infinite() {
        mag.iter().fold(0.0f64, |m, v| m.max(*v))
    } else {
        (mag.iter().map(|v| v.powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

struct Spectra {
    grid: HalfSpaceGrid,
    comps: Vec<Array3<Complex64>>,
    radius: Array3<f64>,
}

impl Spectra {
    fn new<F: BandData + ?Sized>(f: &F) -> Self {
        let grid = *f.grid();
        let comps = f.arrays().into_iter().map(|a| doubled_forward(&extend_normal(a, Extension::Zero))).collect();
        Self { grid, comps, radius: doubled_xi_sq(&grid).mapv(f64::sqrt) }
    }

    fn band(&self, bank: &DyadicFilterBank, j: i32) -> Vec<Array3<f64>> {
        let w = self.radius.mapv(|r| bank.phi(j, r));
        self.comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.zip_mut_with(&w, |z, v| *z *= *v);
                doubled_inverse(c)
            })
            .collect()
    }
}

/// Band piece `phi_j * f~` of the zero extension, on the doubled box.
pub fn dyadic_project(f: &ScalarField, j: i32) -> Result<Array3<f64>> {
    let bank = DyadicFilterBank::new(f.grid());
    bank.check_band(j)?;
    Ok(Spectra::new(f).band(&bank, j).remove(0))
}

/// `||phi_j * f~||_p` for every resolvable band, ascending in `j`.
pub fn band_norms<F: BandData + ?Sized>(f: &F, p: f64) -> Result<Vec<(i32, f64)>> {
    check_exponent(p)?;
    let bank = DyadicFilterBank::new(f.grid());
    let sp = Spectra::new(f);
    let (lo, hi) = bank.range();
    Ok((lo..=hi)
        .into_par_iter()
        .map(|j| (j, box_norm(&sp.grid, &sp.band(&bank, j), p)))
        .collect())
}

/// Aggregates band norms into a report.
pub fn report_from_bands(grid: &HalfSpaceGrid, norms: &[(i32, f64)], params: &BesovParams) -> NormReport {
    let (lo, hi) = grid.band_range();
    let bands: Vec<(i32, f64)> = norms.iter().map(|&(j, v)| (j, 2f64.powf(j as f64 * params.s) * v)).collect();
    let (argmax, sup) = bands
        .iter()
        .fold((lo, 0.0f64), |(ja, m), &(j, v)| if v > m { (j, v) } else { (ja, m) });
    let value = if params.q.is_infinite() {
        sup
    } else {
        bands.iter().map(|(_, v)| v.powf(params.q)).sum::<f64>().powf(1.0 / params.q)
    };
    let mut flags = Vec::new();
    let truncated = sup > 0.0 && (argmax == lo || argmax == hi);
    if truncated {
        flags.push("sup_at_boundary_band".to_string());
    }
    let edge = bands
        .iter()
        .filter(|(j, _)| *j == lo || *j == hi)
        .fold(0.0f64, |m, (_, v)| m.max(*v));
    if sup > 0.0 && edge > 0.1 * sup {
        flags.push("boundary_band_above_10pct".to_string());
    }
    NormReport { value, bands, argmax, truncated, flags }
}

/// `B^s_{p,q}` norm of the zero extension.
pub fn besov_norm<F: BandData + ?Sized>(f: &F, params: &BesovParams) -> Result<NormReport> {
    let norms = band_norms(f, params.p)?;
    Ok(report_from_bands(f.grid(), &norms, params))
}

/// `sup_k t_k^beta ||u(t_k)||_{B^s_{p,q}}` over a trajectory.
pub fn besov_sup_norm(traj: &Trajectory, beta: f64, params: &BesovParams) -> Result<(f64, bool)> {
    let mut best = 0.0f64;
    let mut truncated = false;
    for (k, f) in traj.fields().iter().enumerate() {
        let r = besov_norm(f, params)?;
        let v = traj.time_grid().time(k).powf(beta) * r.value;
        if v > best {
            best = v;
            truncated = r.truncated;
        }
    }
    Ok((best, truncated))
}

/// Homogeneous Sobolev seminorm `||grad^k f||_p` for `k` in `0..=2`.
pub fn sobolev_seminorm(f: &VectorField, k: usize, p: f64) -> Result<f64> {
    let g = f.grid();
    let n = g.dim();
    let mut parts: Vec<Array3<f64>> = f.comps().to_vec();
    for _ in 0..k {
        parts = parts.iter().flat_map(|a| (0..n).map(move |m| partial(g, a, m))).collect();
    }
    let mag = parts
        .iter()
        .fold(Array3::<f64>::zeros(g.shape()), |acc, a| acc + a.mapv(|v| v * v))
        .mapv(f64::sqrt);
    crate::ops::lp_norm_array(g, &mag, p)
}

/// `sup_t t^{alpha/2} ||Gamma_t * f~||_p` on the doubled box.
pub fn heat_characterization<F: BandData + ?Sized>(f: &F, alpha: f64, p: f64, times: &TimeGrid) -> Result<f64> {
    check_exponent(p)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    let sp = Spectra::new(f);
    let xi2 = sp.radius.mapv(|r| r * r);
    let mut best = 0.0f64;
    for t in times.times() {
        let parts: Vec<Array3<f64>> = sp
            .comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.zip_mut_with(&xi2, |z, q| *z *= (-t * q).exp());
                doubled_inverse(c)
            })
            .collect();
        best = best.max(t.powf(alpha / 2.0) * box_norm(&sp.grid, &parts, p));
    }
    Ok(best)
}

/// Both sides of `||f1 f2||_{B^beta_p} <= c (||f1||_{B^beta_{s1}} ||f2||_{r1} + ||f1||_{s2} ||f2||_{B^beta_{r2}})`.
#[allow(clippy::too_many_arguments)]
pub fn product_estimate_check(
    f1: &ScalarField,
    f2: &ScalarField,
    beta: f64,
    p: f64,
    s1: f64,
    r1: f64,
    s2: f64,
    r2: f64,
) -> Result<(f64, f64)> {
    for (s, r) in [(s1, r1), (s2, r2)] {
        check_exponent(s)?;
        check_exponent(r)?;
        if (1.0 / s + 1.0 / r - 1.0 / p).abs() > 1e-12 {
            return Err(Error::InvalidExponent(format!("1/{r} + 1/{s} != 1/{p}")));
        }
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta = {beta} must be positive")));
    }
    f1.grid().same_as(f2.grid())?;
    let prod = ScalarField::from_array(f1.grid(), f1.data() * f2.data())?;
    let b = |f: &ScalarField, q: f64| -> Result<f64> { Ok(besov_norm(f, &BesovParams::sup(beta, q)?)?.value) };
    let lhs = b(&prod, p)?;
    let rhs = b(f1, s1)? * f2.lp_norm(r1)? + f1.lp_norm(s2)? * b(f2, r2)?;
    Ok((lhs, rhs))
}

/// Critical norms in `B^{-1+n/p}_{p,inf}` and `B^{-1+n/p0}_{p0,inf}`.
pub fn embedding_check<F: BandData + ?Sized>(f: &F, p: f64, p0: f64) -> Result<(f64, f64)> {
    if !(p0 > p) {
        return Err(Error::InvalidExponent(format!("p0 = {p0} must exceed p = {p}")));
    }
    let n = f.grid().dim();
    Ok((
        besov_norm(f, &BesovParams::critical(n, p)?)?.value,
        besov_norm(f, &BesovParams::critical(n, p0)?)?.value,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> HalfSpaceGrid {
        HalfSpaceGrid::new(2, 2.0 * PI, 64, 2.0 * PI, 64).unwrap()
    }

    proptest! {
        #[test]
        fn partition_of_unity(logxi in -3.0f64..8.0) {
            let g = grid();
            let bank = DyadicFilterBank::new(&g);
            let xi = 2f64.powf(logxi);
            let s: f64 = (-6..12).map(|j| bank.phi(j, xi)).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fat_filter_is_one_on_inner_annulus(j in 0i32..5, r in -0.99f64..0.99) {
            let bank = DyadicFilterBank::new(&grid());
            prop_assert!((bank.fat(j, 2f64.powf(j as f64 + r)) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn norm_is_homogeneous(lambda in -5.0f64..5.0) {
            let g = HalfSpaceGrid::new(2, 2.0 * PI, 16, 2.0 * PI, 12).unwrap();
            let f = ScalarField::from_fn(&g, |x| (2.0 * x[0]).cos() * (-(x[2] - 3.0).powi(2)).exp());
            let p = BesovParams::sup(-0.5, 2.0).unwrap();
            let a = besov_norm(&f, &p).unwrap().value;
            let b = besov_norm(&f.scaled(lambda), &p).unwrap().value;
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn zero_has_zero_norm() {
        let g = grid();
        let r = besov_norm(&ScalarField::zeros(&g), &BesovParams::sup(0.5, 2.0).unwrap()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(!r.truncated);
    }

    #[test]
    fn out_of_range_band_is_rejected() {
        let g = grid();
        assert!(dyadic_project(&ScalarField::zeros(&g), 40).is_err());
    }

    #[test]
    fn lq_aggregation_dominates_sup() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| (x[0] + x[2]).sin() * (-(x[2] - 3.0).powi(2)).exp());
        let a = besov_norm(&f, &BesovParams::new(0.2, 2.0, 1.0).unwrap()).unwrap().value;
        let b = besov_norm(&f, &BesovParams::sup(0.2, 2.0).unwrap()).unwrap().value;
        assert!(a >= b);
    }
}
