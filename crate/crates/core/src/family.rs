//! Hamiltonian families and the built-in generalized oscillator and quartic
//! well.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// A point in the parameter manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("parameter point has no entries".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite parameter {v}")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Copy with entry `mu` shifted by `delta`.
    pub fn shifted(&self, mu: usize, delta: f64) -> Self {
        let mut v = self.0.clone();
        v[mu] += delta;
        Self(v)
    }

    /// Centered-difference step for parameter `mu`.
    pub fn fd_step(&self, mu: usize, rel: f64) -> f64 {
        rel * self.0[mu].abs().max(1.0)
    }
}

impl std::ops::Index<usize> for ParamPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<[f64; 3]> for ParamPoint {
    fn from(v: [f64; 3]) -> Self {
        Self(v.to_vec())
    }
}

impl From<[f64; 2]> for ParamPoint {
    fn from(v: [f64; 2]) -> Self {
        Self(v.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.q - other.q).hypot(self.p - other.p)
    }
}

/// Action-angle coordinates; the angle is kept in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub action: f64,
    pub angle: f64,
}

impl TorusPoint {
    pub fn new(action: f64, angle: f64) -> Self {
        Self {
            action,
            angle: reduce_angle(angle),
        }
    }
}

/// Reduces an angle into [0, 2π).
pub fn reduce_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle difference into (-π, π].
pub fn wrap_difference(d: f64) -> f64 {
    let r = d.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// Contract every family satisfies: pure evaluators of `H` and its
/// phase-space and parameter gradients. Families that know their
/// action-angle maps in closed form override the `analytic_*` hooks; the
/// numeric orbit-tracing path is used otherwise.
pub trait HamiltonianFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn param_names(&self) -> &[&'static str];

    fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// Checks that `lambda` lies in the family's admissible domain.
    fn validate(&self, lambda: &ParamPoint) -> Result<()>;

    fn energy(&self, z: PhasePoint, lambda: &ParamPoint) -> f64;

    fn dh_dq(&self, z: PhasePoint, lambda: &ParamPoint) -> f64;

    fn dh_dp(&self, z: PhasePoint, lambda: &ParamPoint) -> f64;

    /// ∂H/∂λ_μ at fixed (q, p).
    fn dh_dparam(&self, z: PhasePoint, lambda: &ParamPoint, mu: usize) -> f64;

    /// Stable equilibrium inside the librating region; orbits are seeded on
    /// the ray of increasing q from this point.
    fn reference_point(&self, _lambda: &ParamPoint) -> PhasePoint {
        PhasePoint::new(0.0, 0.0)
    }

    fn analytic_torus_to_phase(&self, _lambda: &ParamPoint, _t: TorusPoint) -> Option<Result<PhasePoint>> {
        None
    }

    fn analytic_phase_to_torus(&self, _lambda: &ParamPoint, _z: PhasePoint) -> Option<Result<TorusPoint>> {
        None
    }

    fn analytic_frequency(&self, _lambda: &ParamPoint, _action: f64) -> Option<Result<f64>> {
        None
    }

    fn has_analytic_torus(&self) -> bool {
        false
    }
}

/// Parameters (X, Y, Z) of H = ½(Xq² + 2Yqp + Zp²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOscParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GenOscParams {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn discriminant(&self) -> f64 {
        self.x * self.z - self.y * self.y
    }

    pub fn from_point(lambda: &ParamPoint) -> Self {
        Self::new(lambda[0], lambda[1], lambda[2])
    }

    pub fn to_point(self) -> ParamPoint {
        ParamPoint(vec![self.x, self.y, self.z])
    }
}

pub fn genosc_frequency(params: GenOscParams) -> Result<f64> {
    let d = params.discriminant();
    if !(d > 0.0) {
        return Err(Error::DegenerateFrequency(d));
    }
    Ok(d.sqrt())
}

/// Closed-form torus → phase map: q = √(2IZ/ω) cos φ,
/// p = −√(2IZ/ω)((Y/Z) cos φ + (ω/Z) sin φ).
pub fn genosc_torus_to_phase(params: GenOscParams, t: TorusPoint) -> Result<PhasePoint> {
    let w = genosc_frequency(params)?;
    if t.action < 0.0 {
        return Err(Error::InvalidParams(format!("negative action {}", t.action)));
    }
    let GenOscParams { y, z, .. } = params;
    let amp = (2.0 * t.action * z / w).sqrt();
    let (s, c) = t.angle.sin_cos();
    Ok(PhasePoint::new(amp * c, -amp * (y / z * c + w / z * s)))
}

/// Inverse of [`genosc_torus_to_phase`].
pub fn genosc_phase_to_torus(params: GenOscParams, pt: PhasePoint) -> Result<TorusPoint> {
    let w = genosc_frequency(params)?;
    let GenOscParams { x, y, z } = params;
    let (q, p) = (pt.q, pt.p);
    let h = 0.5 * (x * q * q + 2.0 * y * q * p + z * p * p);
    let action = h / w;
    // q ∝ cos φ and −(Yq + Zp)/ω ∝ sin φ with the same amplitude
    let c = q;
    let s = -(y * q + z * p) / w;
    Ok(TorusPoint::new(action, s.atan2(c)))
}

/// (∂H/∂X, ∂H/∂Y, ∂H/∂Z) on the torus, written in the original action-angle
/// variables.
pub fn genosc_dh(params: GenOscParams, t: TorusPoint) -> Result<[f64; 3]> {
    let w = genosc_frequency(params)?;
    let GenOscParams { y, z, .. } = params;
    let i = t.action;
    let (s, c) = t.angle.sin_cos();
    let dx = z * i / w * c * c;
    let dy = -(2.0 * z * i / w) * (y / z * c * c + w / z * s * c);
    let dz = z * i / w
        * ((y / z).powi(2) * c * c + (w / z).powi(2) * s * s + y * w / (z * z) * (2.0 * t.angle).sin());
    Ok([dx, dy, dz])
}

/// Generalized oscillator H = ½(Xq² + 2Yqp + Zp²), parameters ordered (X, Y, Z).
#[derive(Debug, Clone, Copy, Default)]
pub struct GenOsc;

impl HamiltonianFamily for GenOsc {
    fn name(&self) -> &str {
        "genosc"
    }

    fn param_names(&self) -> &[&'static str] {
        &["X", "Y", "Z"]
    }

    fn validate(&self, lambda: &ParamPoint) -> Result<()> {
        if lambda.dim() != 3 {
            return Err(Error::InvalidParams(format!("genosc takes 3 parameters, got {}", lambda.dim())));
        }
        let p = GenOscParams::from_point(lambda);
        if p.z <= 0.0 {
            return Err(Error::InvalidParams(format!("genosc requires Z > 0, got {}", p.z)));
        }
        genosc_frequency(p).map(|_| ())
    }

    fn energy(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        0.5 * (l[0] * z.q * z.q + 2.0 * l[1] * z.q * z.p + l[2] * z.p * z.p)
    }

    fn dh_dq(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        l[0] * z.q + l[1] * z.p
    }

    fn dh_dp(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        l[1] * z.q + l[2] * z.p
    }

    fn dh_dparam(&self, z: PhasePoint, _l: &ParamPoint, mu: usize) -> f64 {
        match mu {
            0 => 0.5 * z.q * z.q,
            1 => z.q * z.p,
            2 => 0.5 * z.p * z.p,
            _ => panic!("genosc has no parameter {mu}"),
        }
    }

    fn analytic_torus_to_phase(&self, l: &ParamPoint, t: TorusPoint) -> Option<Result<PhasePoint>> {
        Some(genosc_torus_to_phase(GenOscParams::from_point(l), t))
    }

    fn analytic_phase_to_torus(&self, l: &ParamPoint, z: PhasePoint) -> Option<Result<TorusPoint>> {
        Some(genosc_phase_to_torus(GenOscParams::from_point(l), z))
    }

    fn analytic_frequency(&self, l: &ParamPoint, _action: f64) -> Option<Result<f64>> {
        Some(genosc_frequency(GenOscParams::from_point(l)))
    }

    fn has_analytic_torus(&self) -> bool {
        true
    }
}

/// Quartic well H = p²/(2m) + k q⁴, parameters ordered (m, k). No
/// closed-form action-angle maps; everything goes through orbit tracing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quartic;

/// Builds the quartic family after checking `m > 0`, `k > 0`.
pub fn quartic_family(m: f64, k: f64) -> Result<(Quartic, ParamPoint)> {
    let lambda = ParamPoint::new(vec![m, k])?;
    Quartic.validate(&lambda)?;
    Ok((Quartic, lambda))
}

impl HamiltonianFamily for Quartic {
    fn name(&self) -> &str {
        "quartic"
    }

    fn param_names(&self) -> &[&'static str] {
        &["m", "k"]
    }

    fn validate(&self, l: &ParamPoint) -> Result<()> {
        if l.dim() != 2 {
            return Err(Error::InvalidParams(format!("quartic takes 2 parameters, got {}", l.dim())));
        }
        if !(l[0] > 0.0 && l[1] > 0.0) {
            return Err(Error::InvalidParams(format!(
                "quartic requires m > 0 and k > 0, got m = {}, k = {}",
                l[0], l[1]
            )));
        }
        Ok(())
    }

    fn energy(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        z.p * z.p / (2.0 * l[0]) + l[1] * z.q.powi(4)
    }

    fn dh_dq(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        4.0 * l[1] * z.q.powi(3)
    }

    fn dh_dp(&self, z: PhasePoint, l: &ParamPoint) -> f64 {
        z.p / l[0]
    }

    fn dh_dparam(&self, z: PhasePoint, l: &ParamPoint, mu: usize) -> f64 {
        match mu {
            0 => -z.p * z.p / (2.0 * l[0] * l[0]),
            1 => z.q.powi(4),
            _ => panic!("quartic has no parameter {mu}"),
        }
    }
}

/// Unit harmonic oscillator carrying one inert parameter: every parameter
/// derivative vanishes, so all geometric quantities are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inert;

impl HamiltonianFamily for Inert {
    fn name(&self) -> &str {
        "inert"
    }

    fn param_names(&self) -> &[&'static str] {
        &["c"]
    }

    fn validate(&self, l: &ParamPoint) -> Result<()> {
        if l.dim() != 1 {
            return Err(Error::InvalidParams("inert family takes 1 parameter".into()));
        }
        Ok(())
    }

    fn energy(&self, z: PhasePoint, _l: &ParamPoint) -> f64 {
        0.5 * (z.q * z.q + z.p * z.p)
    }

    fn dh_dq(&self, z: PhasePoint, _l: &ParamPoint) -> f64 {
        z.q
    }

    fn dh_dp(&self, z: PhasePoint, _l: &ParamPoint) -> f64 {
        z.p
    }

    fn dh_dparam(&self, _z: PhasePoint, _l: &ParamPoint, _mu: usize) -> f64 {
        0.0
    }

    fn analytic_torus_to_phase(&self, _l: &ParamPoint, t: TorusPoint) -> Option<Result<PhasePoint>> {
        Some(genosc_torus_to_phase(GenOscParams::new(1.0, 0.0, 1.0), t))
    }

    fn analytic_phase_to_torus(&self, _l: &ParamPoint, z: PhasePoint) -> Option<Result<TorusPoint>> {
        Some(genosc_phase_to_torus(GenOscParams::new(1.0, 0.0, 1.0), z))
    }

    fn analytic_frequency(&self, _l: &ParamPoint, _action: f64) -> Option<Result<f64>> {
        Some(Ok(1.0))
    }

    fn has_analytic_torus(&self) -> bool {
        true
    }
}

/// Looks up a built-in family by its configuration name.
pub fn family_by_name(name: &str) -> Option<Box<dyn HamiltonianFamily>> {
    match name {
        "genosc" => Some(Box::new(GenOsc)),
        "quartic" => Some(Box::new(Quartic)),
        "inert" => Some(Box::new(Inert)),
        _ => None,
    }
}
