//! Run configuration: TOML text, defaults, validation and environment
//! overrides for tolerances.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use hannay_core::actionangle::Numerics;
use hannay_core::family::{family_by_name, HamiltonianFamily, ParamPoint};
use hannay_core::holonomy::{LoopPath, SurfacePatch};

/// Environment variables `HANNAY_TOL_<KEY>` override `[tolerances]` keys.
pub const ENV_PREFIX: &str = "HANNAY_TOL_";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        message: String,
        line: Option<usize>,
        key: Option<String>,
    },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: String,
    #[serde(default = "default_actions")]
    pub actions: Vec<f64>,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, rename = "loop", skip_serializing_if = "Option::is_none")]
    pub loop_path: Option<LoopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub curvature: CurvatureConfig,
    #[serde(default)]
    pub agp: AgpConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_actions() -> Vec<f64> {
    vec![1.0]
}

fn default_n_values() -> Vec<i64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub angle_samples: usize,
    pub truncation: usize,
    pub quadrature_u: usize,
    pub quadrature_v: usize,
    pub fd_step: f64,
    pub orbit_rtol: f64,
    pub dynamics_rtol: f64,
    pub omega_floor: f64,
    pub max_periods: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let n = Numerics::default();
        Self {
            angle_samples: n.angle_samples,
            truncation: n.truncation,
            quadrature_u: 16,
            quadrature_v: 16,
            fd_step: n.fd_step,
            orbit_rtol: n.orbit_rtol,
            dynamics_rtol: n.dynamics_rtol,
            omega_floor: n.omega_floor,
            max_periods: n.max_periods,
        }
    }
}

/// Either an ellipse (`center`, `axis_a`, `axis_b`) or sampled `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_loop_samples")]
    pub samples: usize,
}

fn default_loop_samples() -> usize {
    32
}

/// Spanning disc; defaults to the disc bounded by an ellipse loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub center: Vec<f64>,
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    /// λ points of the sweep; empty means the `[params]` point alone.
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgpConfig {
    pub m_values: Vec<i64>,
    /// Horizons of the time-average route, in units of 1/ω.
    pub horizons: Vec<f64>,
}

impl Default for AgpConfig {
    fn default() -> Self {
        Self {
            m_values: vec![3],
            horizons: (0..8).map(|k| 50.0 + 10.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub epsilons: Vec<f64>,
    pub phases: usize,
    pub samples_per_period: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-2, 5e-3, 2.5e-3],
            phases: 8,
            samples_per_period: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute, per Fourier coefficient of W.
    pub generator: f64,
    /// Relative, torus-averaged brackets.
    pub bracket: f64,
    /// Relative, curvature entries against closed forms.
    pub curvature: f64,
    /// Relative agreement between Hannay-angle routes.
    pub hannay_rel: f64,
    /// Absolute agreement when the angle itself is below this.
    pub hannay_abs: f64,
    pub liouville: f64,
    pub berry_simon: f64,
    pub derivative_terms: f64,
    pub appendix: f64,
    /// Absolute, agp routes against each other.
    pub agp: f64,
    /// Absolute, extrapolated time average against the direct route.
    pub timeavg: f64,
    /// Allowed deviation of fitted convergence orders.
    pub order: f64,
    /// Relative energy defect along slow-loop trajectories.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            generator: 1e-8,
            bracket: 1e-6,
            curvature: 1e-5,
            hannay_rel: 1e-3,
            hannay_abs: 1e-3,
            liouville: 1e-6,
            berry_simon: 1e-10,
            derivative_terms: 1e-8,
            appendix: 1e-4,
            agp: 1e-9,
            timeavg: 1e-3,
            order: 0.2,
            energy: 1e-7,
        }
    }
}

/// Byte offset → 1-based line number.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn unknown_key(message: &str) -> Option<String> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Parses and validates a configuration. Tolerance overrides are applied
/// from `env` (pairs of variable name and value) before validation.
pub fn parse_config<I>(text: &str, env: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        message: e.message().to_string(),
        line: e.span().map(|s| line_of(text, s.start)),
        key: unknown_key(e.message()),
    })?;
    cfg.apply_env(env)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn apply_env<I>(&mut self, env: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = toml::Table::try_from(&self.tolerances).expect("tolerances serialize");
        let mut problems = Vec::new();
        let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (var, value) in vars {
            let key = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            if !table.contains_key(&key) {
                problems.push(format!("{var} names no tolerance key"));
                continue;
            }
            match value.trim().parse::<f64>() {
                Ok(v) => {
                    log::info!("tolerance {key} = {v} from {var}");
                    table.insert(key, toml::Value::Float(v));
                }
                Err(_) => problems.push(format!("{var}={value} is not a number")),
            }
        }
        if !problems.is_empty() {
            return Err(ConfigError::Validation(problems));
        }
        self.tolerances = table.try_into().expect("tolerances deserialize");
        Ok(())
    }

    pub fn family(&self) -> Option<Box<dyn HamiltonianFamily>> {
        family_by_name(&self.family)
    }

    pub fn numerics(&self) -> Numerics {
        Numerics {
            angle_samples: self.grid.angle_samples,
            truncation: self.grid.truncation,
            orbit_rtol: self.grid.orbit_rtol,
            dynamics_rtol: self.grid.dynamics_rtol,
            omega_floor: self.grid.omega_floor,
            fd_step: self.grid.fd_step,
            max_periods: self.grid.max_periods,
        }
    }

    /// The `[params]` point in the family's parameter order.
    pub fn lambda(&self) -> ParamPoint {
        let family = self.family().expect("validated family");
        let v = family.param_names().iter().map(|n| self.params[*n]).collect();
        ParamPoint::new(v).expect("validated parameters")
    }

    pub fn curvature_points(&self) -> Vec<ParamPoint> {
        if self.curvature.points.is_empty() {
            vec![self.lambda()]
        } else {
            self.curvature
                .points
                .iter()
                .map(|p| ParamPoint::new(p.clone()).expect("validated point"))
                .collect()
        }
    }

    /// The configured loop, if any.
    pub fn path(&self) -> Result<Option<LoopPath>, hannay_core::Error> {
        let Some(l) = &self.loop_path else { return Ok(None) };
        match (&l.points, &l.center, &l.axis_a, &l.axis_b) {
            (Some(pts), None, None, None) => LoopPath::sampled(pts, l.samples).map(Some),
            (None, Some(c), Some(a), Some(b)) => LoopPath::ellipse(c.clone(), a.clone(), b.clone(), l.samples).map(Some),
            _ => Err(hannay_core::Error::InvalidParams(
                "a loop is either center/axis_a/axis_b or points".into(),
            )),
        }
    }

    /// The configured surface, or the disc spanning an ellipse loop.
    pub fn surface(&self) -> Result<Option<SurfacePatch>, hannay_core::Error> {
        let (u, v) = (self.grid.quadrature_u, self.grid.quadrature_v);
        if let Some(s) = &self.surface {
            return SurfacePatch::disc(s.center.clone(), s.axis_a.clone(), s.axis_b.clone(), u, v).map(Some);
        }
        match self.path()? {
            Some(p) => SurfacePatch::spanning(&p, u, v).map(Some).or(Ok(None)),
            None => Ok(None),
        }
    }

    /// SHA-256 of the canonical serialization (after defaults and overrides).
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let Some(family) = self.family() else {
            return Err(ConfigError::Validation(vec![format!(
                "unknown family \"{}\" (expected \"genosc\" or \"quartic\")",
                self.family
            )]));
        };
        let names = family.param_names();
        for n in names {
            match self.params.get(*n) {
                None => errs.push(format!("params: missing \"{n}\"")),
                Some(v) if !v.is_finite() => errs.push(format!("params: \"{n}\" is not finite")),
                _ => {}
            }
        }
        for k in self.params.keys() {
            if !names.contains(&k.as_str()) {
                errs.push(format!("params: \"{k}\" is not a parameter of {} (expected {names:?})", self.family));
            }
        }
        let dim = names.len();
        let check_point = |what: &str, p: &[f64], errs: &mut Vec<String>| {
            if p.len() != dim {
                errs.push(format!("{what}: expected {dim} values, got {}", p.len()));
            } else if let Ok(pp) = ParamPoint::new(p.to_vec()) {
                if let Err(e) = family.validate(&pp) {
                    errs.push(format!("{what}: {e}"));
                }
            } else {
                errs.push(format!("{what}: values must be finite"));
            }
        };
        if errs.is_empty() {
            let p: Vec<f64> = names.iter().map(|n| self.params[*n]).collect();
            check_point("params", &p, &mut errs);
        }
        for (j, p) in self.curvature.points.iter().enumerate() {
            check_point(&format!("curvature.points[{j}]"), p, &mut errs);
        }
        if self.actions.is_empty() {
            errs.push("actions: at least one action is needed".into());
        }
        for &i in &self.actions {
            if !(i > 0.0 && i.is_finite()) {
                errs.push(format!("actions: {i} is not a positive finite action"));
            }
        }
        if self.n_values.is_empty() {
            errs.push("n_values: at least one eigenfunction label is needed".into());
        }
        for &n in &self.n_values {
            if n.abs() > 64 {
                errs.push(format!("n_values: |{n}| exceeds 64"));
            }
        }
        let g = &self.grid;
        if g.truncation == 0 {
            errs.push("grid.truncation must be positive".into());
        }
        if g.angle_samples < 2 * g.truncation + 2 || g.angle_samples < 64 {
            errs.push(format!(
                "grid.angle_samples = {} must be at least max(64, 2*truncation + 2)",
                g.angle_samples
            ));
        }
        if g.quadrature_u == 0 || g.quadrature_v == 0 {
            errs.push("grid.quadrature_u and grid.quadrature_v must be positive".into());
        }
        for (name, v) in [
            ("fd_step", g.fd_step),
            ("orbit_rtol", g.orbit_rtol),
            ("dynamics_rtol", g.dynamics_rtol),
            ("omega_floor", g.omega_floor),
            ("max_periods", g.max_periods),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("grid.{name} must be positive, got {v}"));
            }
        }
        if let Some(l) = &self.loop_path {
            match (&l.points, &l.center, &l.axis_a, &l.axis_b) {
                (Some(pts), None, None, None) => {
                    for (j, p) in pts.iter().enumerate() {
                        check_point(&format!("loop.points[{j}]"), p, &mut errs);
                    }
                }
                (None, Some(c), Some(a), Some(b)) => {
                    check_point("loop.center", c, &mut errs);
                    for (what, v) in [("loop.axis_a", a), ("loop.axis_b", b)] {
                        if v.len() != dim {
                            errs.push(format!("{what}: expected {dim} values, got {}", v.len()));
                        }
                    }
                }
                _ => errs.push("loop: give either center, axis_a and axis_b, or points".into()),
            }
            if l.samples < 4 {
                errs.push("loop.samples must be at least 4".into());
            }
        }
        if let Some(s) = &self.surface {
            check_point("surface.center", &s.center, &mut errs);
            for (what, v) in [("surface.axis_a", &s.axis_a), ("surface.axis_b", &s.axis_b)] {
                if v.len() != dim {
                    errs.push(format!("{what}: expected {dim} values, got {}", v.len()));
                }
            }
        }
        let d = &self.dynamics;
        if d.epsilons.len() < 2 || d.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            errs.push("dynamics.epsilons needs at least two strictly decreasing values".into());
        }
        if d.epsilons.iter().any(|&e| !(e > 0.0)) {
            errs.push("dynamics.epsilons must be positive".into());
        }
        if d.phases == 0 {
            errs.push("dynamics.phases must be positive".into());
        }
        if d.samples_per_period < 4 {
            errs.push("dynamics.samples_per_period must be at least 4".into());
        }
        if self.agp.horizons.len() < 3 || self.agp.horizons.iter().any(|&t| !(t > 0.0)) {
            errs.push("agp.horizons needs at least three positive values".into());
        }
        let tol = toml::Table::try_from(&self.tolerances).expect("tolerances serialize");
        for (k, v) in tol {
            if !(v.as_float().is_some_and(|x| x > 0.0 && x.is_finite())) {
                errs.push(format!("tolerances.{k} must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(errs))
        }
    }
}
