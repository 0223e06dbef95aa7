//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys are namespaced
//! (`grid.N_tan`, `scenario.family`, `picard.p0`, ...); an unknown key or an
//! unparsable value is a configuration error.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{HalfSpaceGrid, TimeGrid};
use crate::kernels::ReflectionKind;
use crate::quadrature::GradedRule;
use crate::scenario::{Family, ScenarioSpec};

/// Every check the verification suite knows, with its default tolerance.
pub const CHECKS: &[(&str, f64)] = &[
    ("heat_semigroup", 1e-8),
    ("heat_unit_mass", 1e-10),
    ("heat_odd_trace", 1e-10),
    ("decay_band_uniformity", 0.15),
    ("decay_slope", 0.05),
    ("multiplier_decay", 0.20),
    ("projection_gradient_order", 2.0),
    ("projection_norm_ratio", 0.20),
    ("stokes_trace", 1e-6),
    ("stokes_divergence", 1e-6),
    ("momentum_order", 1.5),
    ("scaling_equivariance", 2.0),
    ("stokes_estimate_lp", 0.25),
    ("stokes_estimate_besov", 0.25),
    ("product_estimate", 0.20),
    ("picard_contraction", 1.0),
    ("picard_convergence", 12.0),
    ("picard_weak_residual", 1.0),
    ("picard_decay_slope", 0.05),
    ("picard_breakdown", 1.0),
    ("uniqueness", 2.0),
    ("oracle_equivalence", 1e-6),
];

/// Parsed configuration with defaults for everything not set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub grid: HalfSpaceGrid,
    pub times: TimeGrid,
    pub rule: GradedRule,
    pub scenario: ScenarioSpec,
    pub heat_t: f64,
    pub heat_reflection: ReflectionKind,
    pub besov_s: f64,
    pub besov_p: f64,
    pub besov_q: f64,
    pub picard_p0: f64,
    pub picard_p: f64,
    pub picard_m_max: usize,
    pub picard_stop_tol: f64,
    pub picard_target: f64,
    pub checkpoint_every: usize,
    /// `None` runs every check.
    pub checks: Option<Vec<String>>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub level: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: HalfSpaceGrid::desk_2d(),
            times: TimeGrid::standard(),
            rule: GradedRule::standard(),
            scenario: ScenarioSpec::default(),
            heat_t: 0.1,
            heat_reflection: ReflectionKind::Odd,
            besov_s: 0.0,
            besov_p: 2.0,
            besov_q: f64::INFINITY,
            picard_p0: 4.0,
            picard_p: 1.5,
            picard_m_max: 12,
            picard_stop_tol: 1e-7,
            picard_target: 0.2,
            checkpoint_every: 1,
            checks: None,
            tolerances: CHECKS.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            seed: 0,
            level: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_real(key: &str, value: &str) -> Result<f64> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse(key, value),
    }
}

fn parse_reflection(key: &str, value: &str) -> Result<ReflectionKind> {
    match value.to_ascii_lowercase().as_str() {
        "none" => Ok(ReflectionKind::None),
        "odd" => Ok(ReflectionKind::Odd),
        "even" => Ok(ReflectionKind::Even),
        "image" => Ok(ReflectionKind::Image),
        _ => Err(Error::Config(format!("{key} = {value:?}: expected none, odd, even or image"))),
    }
}

/// Raw grid and time settings, validated together once all keys are read.
#[derive(Debug, Clone, Copy)]
struct Raw {
    n: usize,
    n_tan: usize,
    n_nor: usize,
    length: f64,
    height: f64,
    t0: f64,
    ratio: f64,
    count: usize,
    nodes: usize,
    quad_ratio: f64,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let g = cfg.grid;
        let mut raw = Raw {
            n: g.dim(),
            n_tan: g.n_tan(),
            n_nor: g.n_nor(),
            length: g.length(),
            height: g.height(),
            t0: cfg.times.t0(),
            ratio: cfg.times.ratio(),
            count: cfg.times.len(),
            nodes: cfg.rule.node_count(),
            quad_ratio: cfg.rule.ratio(),
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(&mut raw, key, value)?;
        }
        cfg.grid = HalfSpaceGrid::new(raw.n, raw.length, raw.n_tan, raw.height, raw.n_nor)
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.times = TimeGrid::new(raw.t0, raw.ratio, raw.count).map_err(|e| Error::Config(e.to_string()))?;
        cfg.rule = GradedRule::new(raw.nodes, raw.quad_ratio).map_err(|e| Error::Config(e.to_string()))?;
        cfg.scenario.dimension = raw.n;
        Ok(cfg)
    }

    fn set(&mut self, raw: &mut Raw, key: &str, value: &str) -> Result<()> {
        let sc = &mut self.scenario;
        match key {
            "grid.n" => raw.n = parse(key, value)?,
            "grid.N_tan" => raw.n_tan = parse(key, value)?,
            "grid.N_nor" => raw.n_nor = parse(key, value)?,
            "grid.L" => raw.length = parse(key, value)?,
            "grid.H" => raw.height = parse(key, value)?,
            "time.t0" => raw.t0 = parse(key, value)?,
            "time.ratio" => raw.ratio = parse(key, value)?,
            "time.K" => raw.count = parse(key, value)?,
            "quad.nodes" => raw.nodes = parse(key, value)?,
            "quad.ratio" => raw.quad_ratio = parse(key, value)?,
            "scenario.name" => sc.name = value.to_string(),
            "scenario.family" => sc.family = Family::from_str(value).map_err(|e| Error::Config(format!("{key}: {e}")))?,
            "scenario.amplitude" => sc.amplitude = parse(key, value)?,
            "scenario.band" => sc.band = parse(key, value)?,
            "scenario.center" => sc.center = parse(key, value)?,
            "scenario.width" => sc.width = parse(key, value)?,
            "scenario.seed" => sc.seed = parse(key, value)?,
            "scenario.p" => sc.p = parse(key, value)?,
            "scenario.p0" => sc.p0 = parse(key, value)?,
            "scenario.p1" => sc.p1 = parse(key, value)?,
            "scenario.alpha" => sc.alpha = parse(key, value)?,
            "heat.t" => self.heat_t = parse(key, value)?,
            "heat.reflection" => self.heat_reflection = parse_reflection(key, value)?,
            "besov.s" => self.besov_s = parse(key, value)?,
            "besov.p" => self.besov_p = parse_real(key, value)?,
            "besov.q" => self.besov_q = parse_real(key, value)?,
            "picard.p0" => self.picard_p0 = parse(key, value)?,
            "picard.p" => self.picard_p = parse(key, value)?,
            "picard.m_max" => self.picard_m_max = parse(key, value)?,
            "picard.stop_tol" => self.picard_stop_tol = parse(key, value)?,
            "picard.target" => self.picard_target = parse(key, value)?,
            "picard.checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "run.seed" => self.seed = parse(key, value)?,
            "run.level" => self.level = parse(key, value)?,
            "verify.checks" => {
                let list: Vec<String> =
                    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                for c in &list {
                    if !self.tolerances.contains_key(c) {
                        return Err(Error::Config(format!("{key}: unknown check {c:?}")));
                    }
                }
                self.checks = Some(list);
            }
            _ => match key.strip_prefix("tol.") {
                Some(check) if self.tolerances.contains_key(check) => {
                    self.tolerances.insert(check.to_string(), parse(key, value)?);
                }
                _ => return Err(Error::Config(format!("unknown key {key:?}"))),
            },
        }
        Ok(())
    }

    pub fn tolerance(&self, check: &str) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(f64::NAN)
    }

    /// Whether `check` is selected.
    pub fn runs(&self, check: &str) -> bool {
        self.checks.as_ref().is_none_or(|l| l.iter().any(|c| c == check))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_desk_configuration() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.grid, HalfSpaceGrid::desk_2d());
        assert_eq!(c.times, TimeGrid::standard());
        assert!(c.runs("oracle_equivalence"));
    }

    #[test]
    fn keys_are_applied() {
        let c = Config::parse(
            "# comment\ngrid.N_tan = 64\ngrid.N_nor = 48 # trailing\nscenario.family = single_band\n\
             picard.p0 = 5\ntol.stokes_trace = 0\nverify.checks = stokes_trace, momentum_order\n",
        )
        .unwrap();
        assert_eq!(c.grid.n_tan(), 64);
        assert_eq!(c.grid.n_nor(), 48);
        assert_eq!(c.scenario.family, Family::SingleBand);
        assert_eq!(c.picard_p0, 5.0);
        assert_eq!(c.tolerance("stokes_trace"), 0.0);
        assert!(c.runs("momentum_order") && !c.runs("uniqueness"));
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        for text in ["grid.Ntan = 64", "tol.nope = 1", "grid.N_tan = many", "just words", "grid.N_tan = 48", "verify.checks = nope"] {
            assert!(matches!(Config::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn empty_check_list_is_allowed() {
        let c = Config::parse("verify.checks =").unwrap();
        assert_eq!(c.checks, Some(vec![]));
        assert!(!c.runs("heat_semigroup"));
    }
}
