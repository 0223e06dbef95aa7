//! Direct-quadrature reference values for the heat, Newton and Poisson
//! operators on two-dimensional grids.
//!
//! The data are analytic (trigonometric in `x_1`, trigonometric or cubic in
//! `x_n`) so that the reference integrals can be evaluated in physical space
//! by tanh-sinh quadrature, independently of the spectral and
//! recursive machinery they are compared against.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::HalfSpaceGrid;
use crate::kernels::{harmonic_extension, heat_convolve, newton_image, newton_volume, ReflectionKind};

/// Tanh-sinh quadrature of `f` over `[a, b]`, halving the step until two
/// levels agree to `tol` relative to `int |f|`. Endpoint singularities of
/// logarithmic type cost nothing extra, so singular points go in as breaks.
pub fn tanh_sinh(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const T_MAX: f64 = 3.5;
    let r = 0.5 * (b - a);
    // Node pair at parameter `t >= 0`: weight and distance from each end.
    let pair = |t: f64| {
        let u = 0.5 * PI * t.sinh();
        let w = 0.5 * PI * t.cosh() / (u.cosh() * u.cosh());
        let d = r * (-u).exp() / u.cosh();
        let mut s = 0.0;
        let mut sa = 0.0;
        for x in [a + d, b - d] {
            if x > a && x < b {
                let v = f(x) * w;
                s += v;
                sa += v.abs();
            }
        }
        (s, sa)
    };
    let mut h = 0.5;
    let (s0, sa0) = pair(0.0);
    let (mut sum, mut sum_abs) = (0.5 * s0, 0.5 * sa0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let (s, sa) = pair(k as f64 * h);
        sum += s;
        sum_abs += sa;
        k += 1;
    }
    let mut prev = h * sum * r;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let (s, sa) = pair(k as f64 * h);
            sum += s;
            sum_abs += sa;
            k += 2;
        }
        let cur = h * sum * r;
        if (cur - prev).abs() <= tol * h * sum_abs * r.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `int_a^b f` with extra breakpoints inside `(a, b)`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).filter(|w| w[1] > w[0]).map(|w| tanh_sinh(f, w[0], w[1], tol)).sum()
}

/// Tangential trigonometric polynomial `sum_m a_m cos(w m x) + b_m sin(w m x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigSeries {
    pub omega: f64,
    pub terms: Vec<(u32, f64, f64)>,
}

impl TrigSeries {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(m, a, b)| {
                let th = self.omega * m as f64 * x;
                a * th.cos() + b * th.sin()
            })
            .sum()
    }
}

/// Normal profile of a sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NormalProfile {
    /// `sum_k c_k sin(k pi z / H)`.
    Sine { height: f64, coefs: Vec<f64> },
    /// `sum_k c_k cos(k pi z / H)`, `k` from 0.
    Cosine { height: f64, coefs: Vec<f64> },
    /// `c_0 + c_1 z + c_2 z^2 + c_3 z^3`.
    Cubic([f64; 4]),
}

impl NormalProfile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Self::Sine { height, coefs } => {
                coefs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * PI * z / height).sin()).sum()
            }
            Self::Cosine { height, coefs } => {
                coefs.iter().enumerate().map(|(k, c)| c * (k as f64 * PI * z / height).cos()).sum()
            }
            Self::Cubic(c) => c[0] + z * (c[1] + z * (c[2] + z * c[3])),
        }
    }
}

/// Separable sample `f(x_1, x_n) = T(x_1) P(x_n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub tangential: TrigSeries,
    pub normal: NormalProfile,
}

impl Sample {
    pub fn eval(&self, x1: f64, z: f64) -> f64 {
        self.tangential.eval(x1) * self.normal.eval(z)
    }

    pub fn on_grid(&self, grid: &HalfSpaceGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x[0], x[2]))
    }

    /// Random sample with tangential modes `m_lo..=3` and the given profile kind.
    pub fn random(rng: &mut ChaCha8Rng, grid: &HalfSpaceGrid, m_lo: u32, kind: ProfileKind) -> Self {
        let omega = 2.0 * PI / grid.length();
        let terms = (m_lo..=3).map(|m| (m, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let h = grid.height();
        let normal = match kind {
            ProfileKind::Sine => NormalProfile::Sine { height: h, coefs: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect() },
            ProfileKind::Cosine => {
                NormalProfile::Cosine { height: h, coefs: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect() }
            }
            ProfileKind::Cubic => {
                let c: [f64; 4] = [0, 1, 2, 3].map(|k| rng.gen_range(-1.0..1.0) / h.powi(k));
                NormalProfile::Cubic(c)
            }
        };
        Self { tangential: TrigSeries { omega, terms }, normal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Sine,
    Cosine,
    Cubic,
}

const TOL: f64 = 1e-12;

fn check_2d(grid: &HalfSpaceGrid) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::InvalidInput("oracles are two-dimensional".into()));
    }
    Ok(())
}

fn gauss_1d(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// Heat flow of a sample: the Gaussian convolution in `x_1` (periodized) times
/// the convolution in `x_n` with the odd or even `2H`-periodic continuation.
pub fn heat_reference(grid: &HalfSpaceGrid, s: &Sample, t: f64, refl: ReflectionKind) -> Result<Array3<f64>> {
    check_2d(grid)?;
    let sign = match refl {
        ReflectionKind::Odd => -1.0,
        ReflectionKind::Even => 1.0,
        _ => return Err(Error::InvalidInput("heat reference supports Odd and Even".into())),
    };
    let (l, h) = (grid.length(), grid.height());
    let reach = ((40.0 * t).sqrt() / l).ceil() as i32 + 1;
    let reach_n = ((40.0 * t).sqrt() / (2.0 * h)).ceil() as i32 + 1;
    let tan: Vec<f64> = (0..grid.n_tan())
        .map(|i| {
            let x = grid.x_tan(i);
            let f = |y: f64| s.tangential.eval(y) * (-reach..=reach).map(|q| gauss_1d(x - y - q as f64 * l, t)).sum::<f64>();
            integrate(&f, 0.0, l, &[x], TOL)
        })
        .collect();
    let nor: Vec<f64> = (0..grid.rows())
        .map(|k| {
            let x = grid.x_nor(k);
            let f = |y: f64| {
                s.normal.eval(y)
                    * (-reach_n..=reach_n)
                        .map(|r| {
                            let shift = 2.0 * r as f64 * h;
                            gauss_1d(x - y - shift, t) + sign * gauss_1d(x + y - shift, t)
                        })
                        .sum::<f64>()
            };
            integrate(&f, 0.0, h, &[x], TOL)
        })
        .collect();
    Ok(Array3::from_shape_fn(grid.shape(), |(i, _, k)| tan[i] * nor[k]))
}

/// Periodic strip Green function `ln(2 cosh(w dz) - 2 cos(w dx)) / 4 pi`,
/// `w = 2 pi / L`, and its `x_n` derivative.
fn strip_green(dx: f64, dz: f64, w: f64) -> (f64, f64) {
    // 2 cosh a - 2 cos b = 4 sinh^2(a/2) + 4 sin^2(b/2), free of cancellation near the source.
    let den = 4.0 * ((0.5 * w * dz).sinh().powi(2) + (0.5 * w * dx).sin().powi(2));
    (den.ln() / (4.0 * PI), w * (w * dz).sinh() / (2.0 * PI * den))
}

/// Newton potential `int N(x - y) f(y) dy` (or with `y*` when `image`) and its
/// normal derivative, by nested quadrature over the strip. `G` is
/// even in `x_1`, so the tangential integral of each mode reduces to a cosine
/// moment of the kernel at fixed `dz`.
pub fn newton_reference(grid: &HalfSpaceGrid, s: &Sample, image: bool) -> Result<(Array3<f64>, Array3<f64>)> {
    check_2d(grid)?;
    let (l, h) = (grid.length(), grid.height());
    let w = 2.0 * PI / l;
    let moment = |m: u32, dz: f64, which: usize| {
        let f = |u: f64| {
            let (g, gd) = strip_green(u, dz, w);
            (if which == 0 { g } else { gd }) * (w * m as f64 * u).cos()
        };
        integrate(&f, -0.5 * l, 0.5 * l, &[0.0], TOL)
    };
    let mut value = Array3::zeros(grid.shape());
    let mut deriv = Array3::zeros(grid.shape());
    for k in 0..grid.rows() {
        let xn = grid.x_nor(k);
        let breaks = if image { vec![] } else { vec![xn] };
        for &(m, a, b) in &s.tangential.terms {
            let line = |which: usize| {
                let f = |yn: f64| s.normal.eval(yn) * moment(m, if image { xn + yn } else { xn - yn }, which);
                integrate(&f, 0.0, h, &breaks, TOL)
            };
            let (v, d) = (line(0), line(1));
            for i in 0..grid.n_tan() {
                let th = w * m as f64 * grid.x_tan(i);
                let trig = a * th.cos() + b * th.sin();
                value[[i, 0, k]] += trig * v;
                deriv[[i, 0, k]] += trig * d;
            }
        }
    }
    Ok((value, deriv))
}

/// Harmonic extension of wall data by the periodic Poisson kernel
/// `sinh a / (L (cosh a - cos theta))`, `a = w x_n`, `theta = w (x_1 - y_1)`.
pub fn poisson_reference(grid: &HalfSpaceGrid, g: &TrigSeries) -> Result<Array3<f64>> {
    check_2d(grid)?;
    let l = grid.length();
    let w = 2.0 * PI / l;
    Ok(Array3::from_shape_fn(grid.shape(), |(i, _, k)| {
        let (x1, xn) = (grid.x_tan(i), grid.x_nor(k));
        if k == 0 {
            return g.eval(x1);
        }
        let a = w * xn;
        // Subtracting g(x1) leaves a bounded integrand near the peak.
        let gx = g.eval(x1);
        let f = |y: f64| a.sinh() / (l * (a.cosh() - (w * (x1 - y)).cos())) * (g.eval(y) - gx);
        gx + integrate(&f, x1 - 0.5 * l, x1 + 0.5 * l, &[x1], TOL)
    }))
}

/// Maximum relative deviation `max |a - b| / max |b|`.
pub fn relative_error(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// One operator/sample comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleComparison {
    pub operator: String,
    pub sample: usize,
    pub rel_error: f64,
}

/// Compares every operator against its reference on `samples` random data.
pub fn oracle_equivalence(grid: &HalfSpaceGrid, seed: u64, samples: usize) -> Result<Vec<OracleComparison>> {
    check_2d(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |op: &str, k: usize, e: f64| out.push(OracleComparison { operator: op.into(), sample: k, rel_error: e });
    for k in 0..samples {
        let t = rng.gen_range(0.05..1.0);
        for (kind, refl, name) in [
            (ProfileKind::Sine, ReflectionKind::Odd, "heat_odd"),
            (ProfileKind::Cosine, ReflectionKind::Even, "heat_even"),
        ] {
            let s = Sample::random(&mut rng, grid, 0, kind);
            let got = heat_convolve(&s.on_grid(grid), t, refl)?;
            push(name, k, relative_error(got.data(), &heat_reference(grid, &s, t, refl)?));
        }
        let s = Sample::random(&mut rng, grid, 1, ProfileKind::Cubic);
        let f = s.on_grid(grid);
        for (image, name) in [(false, "newton_volume"), (true, "newton_image")] {
            let got = if image { newton_image(&f)? } else { newton_volume(&f)? };
            let (v, d) = newton_reference(grid, &s, image)?;
            push(name, k, relative_error(got.value.data(), &v));
            push(&format!("{name}_dn"), k, relative_error(got.d_normal.data(), &d));
        }
        let g = Sample::random(&mut rng, grid, 0, ProfileKind::Cubic).tangential;
        let wall = Array2::from_shape_fn((grid.n_tan(), 1), |(i, _)| g.eval(grid.x_tan(i)));
        let got = harmonic_extension(grid, &wall)?;
        push("poisson", k, relative_error(got.data(), &poisson_reference(grid, &g)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_handles_log_singularity() {
        // int_0^1 ln x dx = -1
        let v = integrate(&|x: f64| x.ln(), 0.0, 1.0, &[], 1e-13);
        assert!((v + 1.0).abs() < 1e-10, "{v}");
        let v = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-13);
        assert!((v - 0.29).abs() < 1e-14);
    }

    #[test]
    fn strip_green_is_harmonic() {
        let w = 1.0;
        let (x, z, e) = (0.7, 0.4, 1e-3);
        let g = |a: f64, b: f64| strip_green(a, b, w).0;
        let lap = (g(x + e, z) + g(x - e, z) + g(x, z + e) + g(x, z - e) - 4.0 * g(x, z)) / (e * e);
        assert!(lap.abs() < 1e-5, "{lap}");
        let d = (g(x, z + e) - g(x, z - e)) / (2.0 * e);
        assert!((d - strip_green(x, z, w).1).abs() < 1e-6);
    }
}
