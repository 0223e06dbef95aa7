//! Picard iteration for the Navier–Stokes mild formulation.
//!
//! `u^1 = v` (the Stokes flow of `u0`) and `u^{m+1} = v + V[-u^m (x) u^m]`.
//! Iterates are monitored in two norms: the weighted Lebesgue norm
//! `sup_t t^{beta} ||u(t)||_{p0}` with `beta = 1/2 - n/(2 p0)`, and the critical
//! Besov norm `sup_t ||u(t)||_{B^{-1+n/p}_{p,inf}}`.

use ndarray::{Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::besov::{besov_sup_norm, BesovParams};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, Trajectory, VectorField};
use crate::grid::TimeGrid;
use crate::ops::{curl_2d, curl_3d, laplacian, partial, quadrature_weights, weighted_sup_norm, LpNorm};
use crate::quadrature::GradedRule;
use crate::spectral::dealias_tangential;
use crate::stokes::{duhamel_trajectory, solve_homogeneous, SampledForcing, StokesProblem};

/// Growth factor over the first iterate at which a run is declared divergent.
const BLOW_UP: f64 = 1e6;

/// Sample times, Duhamel rule and dealiasing switch shared by every iterate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PicardConfig {
    pub times: TimeGrid,
    pub rule: GradedRule,
    pub dealias: bool,
}

impl PicardConfig {
    pub fn new(times: TimeGrid, rule: GradedRule) -> Self {
        Self { times, rule, dealias: true }
    }
}

/// Exponents and fitted constants of the smallness argument.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmallnessBudget {
    pub n: usize,
    pub p0: f64,
    pub p: f64,
    pub c1_hat: f64,
    pub c5_hat: f64,
    pub c6_hat: f64,
}

/// Thresholds implied by a budget for a given `M0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    /// `1 / (2 c1)`: admissible size of the weighted norm.
    pub m0_max: f64,
    /// `M0 / (2 c1)`: admissible size of the datum.
    pub n0_max: f64,
    /// `2 c6 M0`: predicted contraction factor.
    pub contraction: f64,
    /// `2 c5 M0`: predicted factor for the difference of two solutions.
    pub uniqueness: f64,
}

impl SmallnessBudget {
    pub fn new(n: usize, p0: f64, p: f64, c1_hat: f64, c5_hat: f64, c6_hat: f64) -> Result<Self> {
        let nf = n as f64;
        if !(p0 > nf && p0.is_finite()) {
            return Err(Error::InvalidExponent(format!("p0 = {p0} must exceed n = {n}")));
        }
        if !(p > nf / 3.0 && p < nf) {
            return Err(Error::InvalidExponent(format!("p = {p} must lie in (n/3, n)")));
        }
        for (name, c) in [("c1", c1_hat), ("c5", c5_hat), ("c6", c6_hat)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {c} must be positive")));
            }
        }
        Ok(Self { n, p0, p, c1_hat, c5_hat, c6_hat })
    }

    /// Weight exponent `1/2 - n/(2 p0)`.
    pub fn beta(&self) -> f64 {
        0.5 - self.n as f64 / (2.0 * self.p0)
    }

    pub fn thresholds(&self, m0: f64) -> Thresholds {
        Thresholds {
            m0_max: 1.0 / (2.0 * self.c1_hat),
            n0_max: m0 / (2.0 * self.c1_hat),
            contraction: 2.0 * self.c6_hat * m0,
            uniqueness: 2.0 * self.c5_hat * m0,
        }
    }

    /// `sup_t t^beta ||u||_{p0}`.
    pub fn weighted_norm(&self, traj: &Trajectory) -> Result<f64> {
        weighted_sup_norm(traj, self.beta(), self.p0)
    }

    /// `sup_t ||u||_{B^{-1+n/p}_{p,inf}}` and whether an edge band attains it.
    pub fn besov_norm(&self, traj: &Trajectory) -> Result<(f64, bool)> {
        besov_sup_norm(traj, 0.0, &BesovParams::critical(self.n, self.p)?)
    }
}

/// `-u (x) u`, optionally with the 2/3 rule applied to each entry.
pub fn nonlinear_tensor(u: &VectorField, dealias: bool) -> SymTensorField {
    let mut t = u.outer_self().scaled(-1.0);
    if dealias {
        let n = t.dim();
        for k in 0..n {
            for l in k..n {
                let d = dealias_tangential(t.get(k, l));
                *t.get_mut(k, l) = d;
            }
        }
    }
    t
}

/// `V[-u (x) u]` along a trajectory.
pub fn bilinear_term(u0: &VectorField, u: &Trajectory, cfg: &PicardConfig) -> Result<Trajectory> {
    let f0 = nonlinear_tensor(u0, cfg.dealias);
    let fk: Vec<SymTensorField> = u.fields().iter().map(|f| nonlinear_tensor(f, cfg.dealias)).collect();
    let forcing = SampledForcing::from_tensors(*u.time_grid(), &f0, &fk)?;
    duhamel_trajectory(&forcing, u.time_grid(), &cfg.rule)
}

/// Record of a Picard run.
#[derive(Debug, Clone)]
pub struct IterationState {
    /// Stokes flow of the datum, `u^1`.
    pub homogeneous: Trajectory,
    /// Latest iterate.
    pub current: Trajectory,
    /// `(weighted, Besov)` norms of `u^1, u^2, ...`.
    pub norms: Vec<(f64, f64)>,
    /// `(weighted, Besov)` norms of `U^m = u^{m+1} - u^m`.
    pub diffs: Vec<(f64, f64)>,
    /// Successive ratios of `diffs`.
    pub ratios: Vec<(f64, f64)>,
    pub converged: bool,
    pub aborted: Option<String>,
    /// Some Besov sup was attained at an edge band.
    pub truncated: bool,
}

impl IterationState {
    /// Number of iterates computed.
    pub fn iterations(&self) -> usize {
        self.norms.len()
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::INFINITY
    }
}

/// Iterates `u^{m+1} = v + V[-u^m (x) u^m]` from `start` until both
/// difference norms drop below `stop_tol`, the iterates blow up, or `m_max`
/// iterates exist.
pub fn iterate_from(
    u0: &VectorField,
    homogeneous: &Trajectory,
    start: Trajectory,
    budget: &SmallnessBudget,
    m_max: usize,
    stop_tol: f64,
    cfg: &PicardConfig,
) -> Result<IterationState> {
    let (b0, tr0) = budget.besov_norm(&start)?;
    let mut state = IterationState {
        homogeneous: homogeneous.clone(),
        norms: vec![(budget.weighted_norm(&start)?, b0)],
        current: start,
        diffs: Vec::new(),
        ratios: Vec::new(),
        converged: false,
        aborted: None,
        truncated: tr0,
    };
    let first = state.norms[0];
    while state.norms.len() < m_max {
        let next = homogeneous.axpy(1.0, &bilinear_term(u0, &state.current, cfg)?)?;
        if next.fields().iter().any(|f| !f.is_finite()) {
            state.aborted = Some(format!("non-finite iterate at m = {}", state.norms.len() + 1));
            break;
        }
        let diff = next.axpy(-1.0, &state.current)?;
        let (db, trd) = budget.besov_norm(&diff)?;
        let d = (budget.weighted_norm(&diff)?, db);
        let (nb, trn) = budget.besov_norm(&next)?;
        let norm = (budget.weighted_norm(&next)?, nb);
        state.truncated |= trd || trn;
        if let Some(&prev) = state.diffs.last() {
            state.ratios.push((ratio(d.0, prev.0), ratio(d.1, prev.1)));
        }
        state.diffs.push(d);
        state.norms.push(norm);
        state.current = next;
        log::debug!("picard m={} diff=({:e}, {:e})", state.norms.len(), d.0, d.1);
        if norm.0 > BLOW_UP * first.0 || norm.1 > BLOW_UP * first.1 {
            state.aborted = Some(format!(
                "iterates grew by more than {BLOW_UP:e} (weighted norm {:e}, first {:e})",
                norm.0, first.0
            ));
            break;
        }
        if d.0 < stop_tol && d.1 < stop_tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Stokes flow of `u0`, then [`iterate_from`] starting at `u^1 = v`.
pub fn iterate(
    u0: &VectorField,
    budget: &SmallnessBudget,
    m_max: usize,
    stop_tol: f64,
    cfg: &PicardConfig,
) -> Result<IterationState> {
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be positive".into()));
    }
    let prob = StokesProblem::new(u0.clone(), cfg.times, cfg.rule)?;
    let v = solve_homogeneous(&prob, false)?.velocity;
    iterate_from(u0, &v, v.clone(), budget, m_max, stop_tol, cfg)
}

/// One row of the contraction table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionRow {
    pub m: usize,
    pub diff_weighted: f64,
    pub diff_besov: f64,
    pub ratio_weighted: f64,
    pub ratio_besov: f64,
    /// `||U||_B + A ||U||_X`.
    pub combined: f64,
    pub combined_ratio: f64,
}

/// Weight `A` of the combined norm: `c6 M / ((c6 - c5) M0)` when `c6 > c5`,
/// else 1.
pub fn combined_weight(budget: &SmallnessBudget, m0: f64, m: f64) -> f64 {
    if budget.c6_hat > budget.c5_hat && m0 > 0.0 {
        budget.c6_hat * m / ((budget.c6_hat - budget.c5_hat) * m0)
    } else {
        1.0
    }
}

/// Differences and ratios per iteration, with the combined norm.
pub fn contraction_report(state: &IterationState, budget: &SmallnessBudget) -> Vec<ContractionRow> {
    let m0 = state.norms.iter().fold(0.0f64, |a, n| a.max(n.0));
    let m = state.norms.iter().fold(0.0f64, |a, n| a.max(n.1));
    let a = combined_weight(budget, m0, m);
    let mut rows: Vec<ContractionRow> = Vec::with_capacity(state.diffs.len());
    for (i, &(dx, db)) in state.diffs.iter().enumerate() {
        let combined = db + a * dx;
        let (rx, rb, rc) = match rows.last() {
            Some(prev) => (ratio(dx, prev.diff_weighted), ratio(db, prev.diff_besov), ratio(combined, prev.combined)),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        rows.push(ContractionRow {
            m: i + 1,
            diff_weighted: dx,
            diff_besov: db,
            ratio_weighted: rx,
            ratio_besov: rb,
            combined,
            combined_ratio: rc,
        });
    }
    rows
}

/// Distance between two Picard chains, one of them started from a perturbed
/// first iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Weighted-norm distance per iteration.
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub monotone: bool,
    pub converged: bool,
}

/// Runs the map from `v` and from `v + G(t) w0`, compares iterate by
/// iterate. `w0` must be admissible Stokes data.
pub fn uniqueness_probe(
    u0: &VectorField,
    w0: &VectorField,
    budget: &SmallnessBudget,
    m_max: usize,
    stop_tol: f64,
    cfg: &PicardConfig,
) -> Result<UniquenessReport> {
    let v = solve_homogeneous(&StokesProblem::new(u0.clone(), cfg.times, cfg.rule)?, false)?.velocity;
    let pert = solve_homogeneous(&StokesProblem::new(w0.clone(), cfg.times, cfg.rule)?, false)?.velocity;
    let mut a = v.clone();
    let mut b = v.axpy(1.0, &pert)?;
    let mut distances = vec![budget.weighted_norm(&b.axpy(-1.0, &a)?)?];
    let mut converged_a = false;
    for _ in 1..m_max {
        let na = v.axpy(1.0, &bilinear_term(u0, &a, cfg)?)?;
        let nb = v.axpy(1.0, &bilinear_term(u0, &b, cfg)?)?;
        let step = budget.weighted_norm(&na.axpy(-1.0, &a)?)?;
        a = na;
        b = nb;
        let d = budget.weighted_norm(&b.axpy(-1.0, &a)?)?;
        distances.push(d);
        if !d.is_finite() {
            break;
        }
        converged_a = step < stop_tol;
        if converged_a && d < stop_tol {
            break;
        }
    }
    let ratios: Vec<f64> = distances.windows(2).map(|w| ratio(w[1], w[0])).collect();
    let monotone = ratios.iter().all(|&r| r < 1.0);
    let converged = converged_a && distances.last().is_some_and(|&d| d <= 2.0 * stop_tol);
    Ok(UniquenessReport { distances, ratios, monotone, converged })
}

/// Least-squares slope of `log ||u(t)||_{p0}` against `log t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `-(1/2 - n/(2 p0))`.
    pub predicted: f64,
    pub first: usize,
    pub last: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (b, my - b * mx)
}

/// Fits the decay over samples `first..=last`.
pub fn decay_fit_window(traj: &Trajectory, p0: f64, first: usize, last: usize) -> Result<DecayFit> {
    if last >= traj.len() || last < first + 1 {
        return Err(Error::InvalidInput(format!("bad fit window {first}..={last}")));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in first..=last {
        let nrm = traj.field(k).lp_norm(p0)?;
        if nrm <= 0.0 {
            return Err(Error::InvalidInput("zero norm in decay window".into()));
        }
        x.push(traj.time_grid().time(k).ln());
        y.push(nrm.ln());
    }
    let (slope, intercept) = linear_fit(&x, &y);
    let n = traj.grid().dim() as f64;
    Ok(DecayFit { slope, intercept, predicted: -(0.5 - n / (2.0 * p0)), first, last })
}

/// Fits the decay over the upper half of the time grid.
pub fn decay_fit(traj: &Trajectory, p0: f64) -> Result<DecayFit> {
    let k = traj.len();
    decay_fit_window(traj, p0, k / 2, k - 1)
}

/// Divergence-free test fields `Phi` with vanishing wall trace: curls of
/// Gaussian layers of width `H/12` at heights `0.5 H`, `0.4 H`, `0.6 H`,
/// modulated by tangential modes 1, 2 and 3.
pub fn test_fields(grid: &crate::grid::HalfSpaceGrid) -> Result<Vec<VectorField>> {
    let s = grid.height() / 12.0;
    let w = 2.0 * std::f64::consts::PI / grid.length();
    [(1.0, 0.5, 0.0), (2.0, 0.4, 0.7), (3.0, 0.6, 1.9)]
        .into_iter()
        .map(|(m, c, phase)| {
            let c = c * grid.height();
            let layer = move |z: f64| (-(z - c).powi(2) / (2.0 * s * s)).exp();
            let wave = move |x: f64| (m * w * x + phase).sin() / m;
            if grid.dim() == 2 {
                curl_2d(&ScalarField::from_fn(grid, |x| wave(x[0]) * layer(x[2])))
            } else {
                let psi = ScalarField::from_fn(grid, |x| wave(x[1]) * layer(x[2]));
                let zero = ScalarField::zeros(grid);
                curl_3d(&VectorField::from_scalars(vec![psi, zero.clone(), zero])?)
            }
        })
        .collect()
}

fn dot_integral(w: &[f64], a: &[Array3<f64>], b: &[Array3<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        Zip::indexed(x).and(y).for_each(|(_, _, k), p, q| total += w[k] * p * q);
    }
    total
}

/// Relative residual of the weak formulation
/// `int int u.lap Phi chi + u.Phi chi' + (u (x) u) : grad Phi chi + int u0.Phi chi(0) = 0`
/// with `chi(t) = (1 - t/T)^3`, `T` the last sample time, maximized over
/// [`test_fields`]. Time integrals use the trapezoid rule on `{0} + samples`.
pub fn weak_residual(u0: &VectorField, traj: &Trajectory) -> Result<f64> {
    traj.grid().same_as(u0.grid())?;
    let mut worst = 0.0f64;
    for phi in test_fields(traj.grid())? {
        worst = worst.max(weak_residual_for(u0, traj, &phi)?);
    }
    Ok(worst)
}

fn weak_residual_for(u0: &VectorField, traj: &Trajectory, phi: &VectorField) -> Result<f64> {
    let g = *traj.grid();
    let n = g.dim();
    let lap: Vec<Array3<f64>> = phi.comps().iter().map(|c| laplacian(&g, c)).collect();
    let grad: Vec<Vec<Array3<f64>>> = phi.comps().iter().map(|c| (0..n).map(|m| partial(&g, c, m)).collect()).collect();
    let w = quadrature_weights(&g);
    let big_t = traj.time_grid().time(traj.len() - 1);
    let chi = |t: f64| (1.0 - t / big_t).max(0.0).powi(3);
    let dchi = |t: f64| -3.0 / big_t * (1.0 - t / big_t).max(0.0).powi(2);
    let parts = |u: &VectorField| {
        let a = dot_integral(&w, u.comps(), &lap);
        let b = dot_integral(&w, u.comps(), phi.comps());
        let mut c = 0.0;
        for k in 0..n {
            for l in 0..n {
                let mut prod = u.comp(k).clone();
                prod *= u.comp(l);
                // (u (x) u)_{kl} d_k Phi_l
                c += dot_integral(&w, std::slice::from_ref(&prod), std::slice::from_ref(&grad[l][k]));
            }
        }
        (a, b, c)
    };
    let mut ts = vec![0.0];
    ts.extend(traj.time_grid().times());
    let mut vals = vec![parts(u0)];
    vals.extend(traj.fields().iter().map(parts));
    let mut sums = [0.0f64; 3];
    for i in 1..ts.len() {
        let dt = ts[i] - ts[i - 1];
        for &(t, (a, b, c)) in &[(ts[i - 1], vals[i - 1]), (ts[i], vals[i])] {
            sums[0] += 0.5 * dt * a * chi(t);
            sums[1] += 0.5 * dt * b * dchi(t);
            sums[2] += 0.5 * dt * c * chi(t);
        }
    }
    let start = vals[0].1 * chi(0.0);
    let total = sums[0] + sums[1] + sums[2] + start;
    let scale = sums.iter().map(|s| s.abs()).sum::<f64>() + start.abs();
    Ok(if scale > 0.0 { total.abs() / scale } else { 0.0 })
}

/// Bilinear and linear constants measured on an ensemble of data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FittedConstants {
    /// `max ||v||_X / ||u0||_{B^{-1+n/p0}_{p0,inf}}`.
    pub linear: f64,
    /// `max ||V[u (x) u]||_X / ||u||_X^2`.
    pub bilinear: f64,
    /// `max ||V[u (x) u]||_B / (||u||_X ||u||_B)`.
    pub bilinear_besov: f64,
}

/// Measures the constants from Stokes flows of an ensemble.
pub fn fit_constants(ensemble: &[VectorField], p0: f64, p: f64, cfg: &PicardConfig) -> Result<FittedConstants> {
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let n = ensemble[0].grid().dim();
    let probe = SmallnessBudget::new(n, p0, p, 1.0, 1.0, 1.0)?;
    let data_params = BesovParams::critical(n, p0)?;
    let mut out = FittedConstants { linear: 0.0, bilinear: 0.0, bilinear_besov: 0.0 };
    for u0 in ensemble {
        let v = solve_homogeneous(&StokesProblem::new(u0.clone(), cfg.times, cfg.rule)?, false)?.velocity;
        let vx = probe.weighted_norm(&v)?;
        let vb = probe.besov_norm(&v)?.0;
        let data = crate::besov::besov_norm(u0, &data_params)?.value;
        let bil = bilinear_term(u0, &v, cfg)?;
        out.linear = out.linear.max(vx / data);
        out.bilinear = out.bilinear.max(probe.weighted_norm(&bil)? / (vx * vx));
        out.bilinear_besov = out.bilinear_besov.max(probe.besov_norm(&bil)?.0 / (vx * vb));
    }
    Ok(out)
}

impl FittedConstants {
    /// `c1 = max(linear, bilinear)`, `c5 = bilinear`, `c6 = max(bilinear, bilinear_besov)`.
    pub fn budget(&self, n: usize, p0: f64, p: f64) -> Result<SmallnessBudget> {
        SmallnessBudget::new(
            n,
            p0,
            p,
            self.linear.max(self.bilinear),
            self.bilinear,
            self.bilinear.max(self.bilinear_besov),
        )
    }
}

/// Amplitude `eps` such that `2 c6 ||G(t) (eps u0)||_X` equals `target`.
pub fn calibrate_amplitude(u0: &VectorField, budget: &SmallnessBudget, target: f64, cfg: &PicardConfig) -> Result<f64> {
    let v = solve_homogeneous(&StokesProblem::new(u0.clone(), cfg.times, cfg.rule)?, false)?.velocity;
    let m0 = budget.weighted_norm(&v)?;
    if m0 == 0.0 {
        return Err(Error::InvalidInput("zero datum cannot be calibrated".into()));
    }
    Ok(target / (2.0 * budget.c6_hat * m0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::HalfSpaceGrid;
    use crate::ops::clean_wall_rows;

    fn datum(g: &HalfSpaceGrid, amp: f64) -> VectorField {
        let mut psi = ScalarField::from_fn(g, |x| {
            amp * x[2] * x[2] * (-(x[2] - 2.5).powi(2) / (2.0 * 0.45 * 0.45)).exp() * x[0].sin()
        });
        clean_wall_rows(g, psi.data_mut());
        curl_2d(&psi).unwrap()
    }

    fn cfg() -> PicardConfig {
        PicardConfig::new(TimeGrid::new(1e-3, 2.0, 8).unwrap(), GradedRule::new(8, 0.6).unwrap())
    }

    #[test]
    fn budget_rejects_bad_exponents() {
        assert!(SmallnessBudget::new(2, 1.5, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SmallnessBudget::new(2, 4.0, 2.5, 1.0, 1.0, 1.0).is_err());
        assert!(SmallnessBudget::new(2, 4.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(SmallnessBudget::new(2, 4.0, 1.5, -1.0, 1.0, 1.0).is_err());
        let b = SmallnessBudget::new(2, 4.0, 1.5, 2.0, 1.0, 1.0).unwrap();
        assert!((b.beta() - 0.25).abs() < 1e-15);
        let th = b.thresholds(0.1);
        assert!((th.m0_max - 0.25).abs() < 1e-15);
        assert!((th.contraction - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_datum_is_a_fixed_point() {
        let g = HalfSpaceGrid::new(2, 2.0 * std::f64::consts::PI, 16, 2.0 * std::f64::consts::PI, 16).unwrap();
        let b = SmallnessBudget::new(2, 4.0, 1.5, 1.0, 1.0, 1.0).unwrap();
        let s = iterate(&VectorField::zeros(&g), &b, 5, 1e-7, &cfg()).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations(), 2);
        assert_eq!(s.diffs[0], (0.0, 0.0));
    }

    #[test]
    fn small_data_contract() {
        let g = HalfSpaceGrid::new(2, 2.0 * std::f64::consts::PI, 32, 2.0 * std::f64::consts::PI, 32).unwrap();
        let b = SmallnessBudget::new(2, 4.0, 1.5, 1.0, 1.0, 1.0).unwrap();
        let s = iterate(&datum(&g, 0.05), &b, 8, 1e-9, &cfg()).unwrap();
        assert!(s.aborted.is_none());
        assert!(s.ratios.iter().all(|r| r.0 < 0.5 && r.1 < 0.5), "{:?}", s.ratios);
        let rows = contraction_report(&s, &b);
        assert_eq!(rows.len(), s.diffs.len());
        for w in rows.windows(2) {
            assert!(w[1].combined < w[0].combined);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        let (b, a) = linear_fit(&x, &y);
        assert!((b + 0.25).abs() < 1e-14 && (a - 1.5).abs() < 1e-14);
    }

    #[test]
    fn dealias_removes_high_modes() {
        let g = HalfSpaceGrid::new(2, 2.0 * std::f64::consts::PI, 16, 2.0 * std::f64::consts::PI, 8).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].cos() + (7.0 * x[0]).cos());
        let d = dealias_tangential(f.data());
        let keep = ScalarField::from_fn(&g, |x| x[0].cos());
        let err = (&d - keep.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-13);
    }
}
