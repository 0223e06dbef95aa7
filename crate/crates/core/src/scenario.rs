//! Initial-data families for scenarios.
//!
//! Two-dimensional data are `curl psi` of a stream function, three-dimensional
//! data `curl A` of a vector potential. Potentials carry the factor `x_n^2`
//! and a Gaussian layer in `x_n`, so the velocity vanishes at the wall and is
//! negligible at the truncation height.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::HalfSpaceGrid;
use crate::ops::{clean_wall_rows, curl_2d, curl_3d};
use crate::stokes::diagnostics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Stream-function vortex dipole, first tangential mode (2D).
    Dipole,
    /// Vector-potential ring (3D).
    Ring,
    /// Stream function at tangential frequency `2^band 2 pi / L`.
    SingleBand,
    /// Bands `j_min..j_max` (Nyquist band excluded) with amplitudes `2^{j alpha}`: a datum of
    /// critical size in `B^{-alpha}_{p, inf}` at every resolved scale.
    Ladder,
    /// Seeded random combination of tangential modes 1 to 4.
    Random,
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dipole" => Ok(Self::Dipole),
            "ring" => Ok(Self::Ring),
            "single_band" => Ok(Self::SingleBand),
            "ladder" => Ok(Self::Ladder),
            "random" => Ok(Self::Random),
            _ => Err(format!("unknown family {s:?} (dipole, ring, single_band, ladder, random)")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Dipole => "dipole",
            Self::Ring => "ring",
            Self::SingleBand => "single_band",
            Self::Ladder => "ladder",
            Self::Random => "random",
        };
        f.write_str(s)
    }
}

/// Initial-data recipe plus the exponents a scenario is measured in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub dimension: usize,
    pub family: Family,
    pub amplitude: f64,
    /// Tangential band for `SingleBand`.
    pub band: i32,
    /// Center and width of the normal layer.
    pub center: f64,
    pub width: f64,
    pub seed: u64,
    pub p: f64,
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "dipole".into(),
            dimension: 2,
            family: Family::Dipole,
            amplitude: 1.0,
            band: 1,
            center: 2.5,
            width: 0.45,
            seed: 0,
            p: 1.5,
            p0: 4.0,
            p1: 2.0,
            alpha: 0.5,
        }
    }
}

impl ScenarioSpec {
    pub fn new(name: &str, family: Family) -> Self {
        Self { name: name.into(), family, ..Self::default() }
    }
}

fn layer(z: f64, c: f64, w: f64) -> f64 {
    z * z * (-(z - c).powi(2) / (2.0 * w * w)).exp()
}

/// Sum of `(amplitude, tangential wavenumber, phase)` terms times the layer,
/// as a stream function (2D) or the `x_1` and `x_2` potential components (3D).
fn from_terms(grid: &HalfSpaceGrid, terms: &[(f64, f64, f64)], c: f64, w: f64) -> Result<VectorField> {
    let omega = 2.0 * PI / grid.length();
    let wave = |x: f64| terms.iter().map(|&(a, k, ph)| a / k * (omega * k * x + ph).sin()).sum::<f64>();
    if grid.dim() == 2 {
        let mut psi = ScalarField::from_fn(grid, |x| wave(x[0]) * layer(x[2], c, w));
        clean_wall_rows(grid, psi.data_mut());
        curl_2d(&psi)
    } else {
        let mut a1 = ScalarField::from_fn(grid, |x| wave(x[1]) * layer(x[2], c, w));
        let mut a2 = ScalarField::from_fn(grid, |x| wave(x[0]) * layer(x[2], c, w));
        clean_wall_rows(grid, a1.data_mut());
        clean_wall_rows(grid, a2.data_mut());
        curl_3d(&VectorField::from_scalars(vec![a1, a2, ScalarField::zeros(grid)])?)
    }
}

/// Builds `u0` for a scenario and checks it is admissible Stokes data
/// (relative divergence and wall trace at most `1e-8`).
pub fn generate_initial_data(spec: &ScenarioSpec, grid: &HalfSpaceGrid) -> Result<VectorField> {
    if spec.dimension != grid.dim() {
        return Err(Error::InvalidInput(format!("scenario is {}D, grid is {}D", spec.dimension, grid.dim())));
    }
    if spec.amplitude == 0.0 {
        return Ok(VectorField::zeros(grid));
    }
    let (c, w) = (spec.center, spec.width);
    let terms: Vec<(f64, f64, f64)> = match spec.family {
        Family::Dipole | Family::Ring => vec![(1.0, 1.0, 0.0)],
        Family::SingleBand => {
            let (lo, hi) = grid.band_range();
            if spec.band < lo || spec.band >= hi {
                return Err(Error::BandOutOfRange { j: spec.band, min: lo, max: hi - 1 });
            }
            vec![(1.0, 2f64.powi(spec.band), 0.0)]
        }
        Family::Ladder => {
            let (lo, hi) = grid.band_range();
            (lo..hi).map(|j| (2f64.powf(j as f64 * spec.alpha), 2f64.powi(j), 1.3 * j as f64)).collect()
        }
        Family::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (1..=4).map(|k| (rng.gen_range(-1.0..1.0), k as f64, rng.gen_range(0.0..2.0 * PI))).collect()
        }
    };
    if spec.family == Family::Ring && grid.dim() != 3 {
        return Err(Error::InvalidInput("ring data need a 3D grid".into()));
    }
    let u = from_terms(grid, &terms, c, w)?;
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(u);
    }
    let u = u.scaled(spec.amplitude / scale);
    let (trace, div) = diagnostics(&u)?;
    if div > 1e-8 || trace > 1e-8 {
        return Err(Error::InvalidInput(format!("generated data not admissible: divergence {div:e}, trace {trace:e}")));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::boundary_max;

    fn g2() -> HalfSpaceGrid {
        HalfSpaceGrid::new(2, 2.0 * PI, 32, 2.0 * PI, 32).unwrap()
    }

    #[test]
    fn families_are_admissible_and_normalized() {
        for fam in [Family::Dipole, Family::SingleBand, Family::Ladder, Family::Random] {
            let u = generate_initial_data(&ScenarioSpec::new("x", fam), &g2()).unwrap();
            assert!((u.max_abs() - 1.0).abs() < 1e-12, "{fam}");
            assert!(boundary_max(&u) < 1e-14, "{fam}");
        }
        let g3 = HalfSpaceGrid::new(3, 2.0 * PI, 16, 2.0 * PI, 16).unwrap();
        let spec = ScenarioSpec { dimension: 3, ..ScenarioSpec::new("ring", Family::Ring) };
        let u = generate_initial_data(&spec, &g3).unwrap();
        assert_eq!(u.dim(), 3);
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let spec = ScenarioSpec { amplitude: 0.0, ..ScenarioSpec::default() };
        assert_eq!(generate_initial_data(&spec, &g2()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn seeds_reproduce_bits() {
        let spec = ScenarioSpec { seed: 42, ..ScenarioSpec::new("r", Family::Random) };
        let a = generate_initial_data(&spec, &g2()).unwrap();
        let b = generate_initial_data(&spec, &g2()).unwrap();
        assert_eq!(a, b);
        let c = generate_initial_data(&ScenarioSpec { seed: 43, ..spec }, &g2()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_dimension_or_band_fails() {
        let g3 = HalfSpaceGrid::new(3, 2.0 * PI, 16, 2.0 * PI, 16).unwrap();
        assert!(generate_initial_data(&ScenarioSpec::default(), &g3).is_err());
        let spec = ScenarioSpec { band: 9, ..ScenarioSpec::new("b", Family::SingleBand) };
        assert!(generate_initial_data(&spec, &g2()).is_err());
    }
}
