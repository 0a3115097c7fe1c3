//! Action-angle coordinates.
//!
//! Families with closed-form maps use them directly. For the others, orbits
//! are traced by integrating Hamilton's equations at frozen λ. The angle
//! origin is the orbit's point of maximal q (where ∂H/∂p falls through zero),
//! and the angle grows at rate ω along the flow. For the generalized
//! oscillator this reproduces the closed-form convention exactly.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::family::{reduce_angle, wrap_difference, HamiltonianFamily, ParamPoint, PhasePoint, TorusPoint};
use crate::fourier::angle_grid;
use crate::ode::{Crossing, Dopri5, Tolerances};

/// Human-readable description of the angle origin, recorded in outputs.
pub const ANGLE_ORIGIN: &str = "phi=0 at max q of the orbit, increasing along the flow";

/// Numerical knobs shared by every routine that builds tori.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Samples per torus on the uniform angle grid.
    pub angle_samples: usize,
    /// Fourier truncation order M.
    pub truncation: usize,
    /// Relative tolerance for orbit tracing.
    pub orbit_rtol: f64,
    /// Relative tolerance for slow-loop trajectories.
    pub dynamics_rtol: f64,
    /// Frequencies below this are treated as degenerate.
    pub omega_floor: f64,
    /// Relative centered-difference step for λ and I derivatives.
    pub fd_step: f64,
    /// Give up on an orbit that has not closed after this many nominal periods.
    pub max_periods: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            angle_samples: 256,
            truncation: 32,
            orbit_rtol: 1e-12,
            dynamics_rtol: 1e-11,
            omega_floor: 1e-8,
            fd_step: 1e-4,
            max_periods: 50.0,
        }
    }
}

impl Numerics {
    pub fn action_step(&self, action: f64) -> f64 {
        self.fd_step * action.abs().max(1.0)
    }
}

/// A traced orbit sampled on a uniform time grid over one period, starting at
/// the angle origin. The last sample closes the loop.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub lambda: ParamPoint,
    pub energy: f64,
    pub period: f64,
    pub samples: Vec<(f64, PhasePoint)>,
}

impl Orbit {
    pub fn closure_error(&self) -> f64 {
        let (first, last) = (self.samples[0].1, self.samples[self.samples.len() - 1].1);
        first.distance(&last)
    }
}

/// Result of locating a phase point on its torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub torus: TorusPoint,
    pub omega: f64,
    pub energy: f64,
    /// The angle origin of the orbit through the point.
    pub origin: PhasePoint,
}

fn tolerances(rtol: f64) -> Tolerances {
    Tolerances {
        rtol,
        atol: rtol * 1e-3,
        max_steps: 20_000_000,
    }
}

/// Hamilton's equations at frozen λ, augmented with ∫ p dq/dt dt.
fn frozen_flow<'a>(
    family: &'a dyn HamiltonianFamily,
    lambda: &'a ParamPoint,
) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] + 'a {
    move |_t, y| {
        let z = PhasePoint::new(y[0], y[1]);
        let qdot = family.dh_dp(z, lambda);
        [qdot, -family.dh_dq(z, lambda), y[1] * qdot]
    }
}

/// Rough time scale of the motion near `z`, used to bound event searches.
fn nominal_period(family: &dyn HamiltonianFamily, lambda: &ParamPoint, z: PhasePoint) -> f64 {
    let c = family.reference_point(lambda);
    let r = z.distance(&c).max(1e-300);
    let v = family.dh_dp(z, lambda).hypot(family.dh_dq(z, lambda)).max(1e-300);
    TAU * r / v
}

/// Numeric phase → torus: integrate from `z` to the next two passages through
/// maximal q. Their separation is the period, the enclosed ∮p dq gives the
/// action, and the time to the first passage gives the angle.
pub fn locate_numeric(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    z: PhasePoint,
    num: &Numerics,
) -> Result<Located> {
    let energy = family.energy(z, lambda);
    let t_max = num.max_periods * nominal_period(family, lambda, z).max(1e-6);
    let flow = frozen_flow(family, lambda);
    let mut solver = Dopri5::new(flow, 0.0, [z.q, z.p, 0.0], tolerances(num.orbit_rtol));
    let qdot = |_t: f64, y: &[f64; 3]| family.dh_dp(PhasePoint::new(y[0], y[1]), lambda);
    let t1 = solver
        .advance_to_event(qdot, Crossing::Falling, t_max)?
        .ok_or(Error::OpenOrbit(t_max))?;
    let y1 = *solver.y();
    // pass through minimal q first so the same maximum is not found twice
    solver
        .advance_to_event(qdot, Crossing::Rising, t1 + t_max)?
        .ok_or(Error::OpenOrbit(t_max))?;
    let t2 = solver
        .advance_to_event(qdot, Crossing::Falling, t1 + t_max)?
        .ok_or(Error::OpenOrbit(t_max))?;
    let y2 = *solver.y();
    let period = t2 - t1;
    let omega = TAU / period;
    if omega < num.omega_floor {
        return Err(Error::DegenerateFrequency(omega * omega));
    }
    let action = (y2[2] - y1[2]) / TAU;
    let drift = (family.energy(PhasePoint::new(y2[0], y2[1]), lambda) - energy).abs();
    if drift > 1e3 * num.orbit_rtol * energy.abs().max(1e-300) + 1e-14 {
        return Err(Error::IntegrationFailure(format!(
            "energy drifted by {drift:.3e} over one period"
        )));
    }
    Ok(Located {
        torus: TorusPoint::new(action, -omega * t1),
        omega,
        energy,
        origin: PhasePoint::new(y1[0], y1[1]),
    })
}

/// Phase → torus through the closed form when available, numerically
/// otherwise.
pub fn locate(family: &dyn HamiltonianFamily, lambda: &ParamPoint, z: PhasePoint, num: &Numerics) -> Result<Located> {
    if let Some(t) = family.analytic_phase_to_torus(lambda, z) {
        let torus = t?;
        let omega = family
            .analytic_frequency(lambda, torus.action)
            .expect("analytic torus implies analytic frequency")?;
        let origin = family
            .analytic_torus_to_phase(lambda, TorusPoint::new(torus.action, 0.0))
            .expect("analytic torus implies analytic inverse")?;
        return Ok(Located {
            torus,
            omega,
            energy: family.energy(z, lambda),
            origin,
        });
    }
    locate_numeric(family, lambda, z, num)
}

/// A point of the level set H = E on the ray of increasing q from the
/// reference point.
pub fn seed_point(family: &dyn HamiltonianFamily, lambda: &ParamPoint, energy: f64) -> Result<PhasePoint> {
    let c = family.reference_point(lambda);
    let e0 = family.energy(c, lambda);
    if !(energy > e0) {
        return Err(Error::RootFindFailure(format!(
            "energy {energy} is not above the reference energy {e0}"
        )));
    }
    let f = |r: f64| family.energy(PhasePoint::new(c.q + r, c.p), lambda) - energy;
    let mut hi = 1.0;
    let mut n = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(Error::RootFindFailure(format!("level {energy} not bracketed along the seed ray")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PhasePoint::new(c.q + 0.5 * (lo + hi), c.p))
}

/// Traces the orbit of energy `energy`, sampled at `n_samples` uniform times
/// starting from the angle origin (plus a closing sample).
pub fn trace_orbit(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    energy: f64,
    n_samples: usize,
    num: &Numerics,
) -> Result<Orbit> {
    if n_samples < 64 {
        return Err(Error::InvalidParams(format!("orbit needs at least 64 samples, got {n_samples}")));
    }
    let seed = seed_point(family, lambda, energy)?;
    let loc = locate_numeric(family, lambda, seed, num)?;
    let period = TAU / loc.omega;
    let flow = frozen_flow(family, lambda);
    let start = loc.origin;
    let mut solver = Dopri5::new(flow, 0.0, [start.q, start.p, 0.0], tolerances(num.orbit_rtol));
    let mut samples = Vec::with_capacity(n_samples + 1);
    for j in 0..=n_samples {
        let t = period * j as f64 / n_samples as f64;
        solver.integrate_to(t)?;
        let y = solver.y();
        samples.push((t, PhasePoint::new(y[0], y[1])));
    }
    Ok(Orbit {
        lambda: lambda.clone(),
        energy,
        period,
        samples,
    })
}

/// Action of the orbit of energy `energy`, with its angular frequency.
pub fn action_and_frequency(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    energy: f64,
    num: &Numerics,
) -> Result<(f64, f64)> {
    let seed = seed_point(family, lambda, energy)?;
    let loc = locate_numeric(family, lambda, seed, num)?;
    Ok((loc.torus.action, loc.omega))
}

pub fn action_of_energy(family: &dyn HamiltonianFamily, lambda: &ParamPoint, energy: f64, num: &Numerics) -> Result<f64> {
    action_and_frequency(family, lambda, energy, num).map(|(i, _)| i)
}

/// Inverts E ↦ I. The map is bracketed geometrically, then refined by
/// Newton steps using dE/dI = ω, falling back to bisection whenever a step
/// leaves the bracket. Non-monotonicity is reported as a failure.
pub fn energy_of_action(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, num: &Numerics) -> Result<f64> {
    if !(action > 0.0) {
        return Err(Error::RootFindFailure(format!("action must be positive, got {action}")));
    }
    let e_ref = family.energy(family.reference_point(lambda), lambda);
    let eval = |e: f64| action_and_frequency(family, lambda, e, num);
    let mut e = e_ref + action;
    let (mut i_e, mut w_e) = eval(e)?;
    let (mut lo, mut hi) = (e_ref, f64::INFINITY);
    let (mut i_lo, mut i_hi) = (0.0, f64::INFINITY);
    // integration noise in the traced action
    let slack = 10.0 * num.orbit_rtol * action;
    for _ in 0..200 {
        if i_e < action {
            if i_e < i_lo - slack {
                return Err(Error::RootFindFailure(format!("action is not monotone in energy near E = {e}")));
            }
            lo = e;
            i_lo = i_e;
        } else {
            if i_e > i_hi + slack {
                return Err(Error::RootFindFailure(format!("action is not monotone in energy near E = {e}")));
            }
            hi = e;
            i_hi = i_e;
        }
        let resid = i_e - action;
        if resid.abs() <= 1e-14 * action.max(1.0) {
            return Ok(e);
        }
        let mut next = e - resid * w_e;
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * (e - e_ref) + e_ref };
        }
        if (next - e).abs() <= 1e-13 * e.abs() {
            return Ok(next);
        }
        e = next;
        (i_e, w_e) = eval(e)?;
    }
    Err(Error::RootFindFailure(format!("no convergence for action {action}")))
}

/// Numerically built torus at (λ, I): uniform angle samples from the origin.
#[derive(Debug, Clone)]
pub struct TorusChart {
    pub lambda: ParamPoint,
    pub action: f64,
    pub energy: f64,
    pub omega: f64,
    /// Phase points at φ_j = 2πj/n.
    pub samples: Vec<PhasePoint>,
}

pub fn build_chart(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, num: &Numerics) -> Result<TorusChart> {
    let energy = energy_of_action(family, lambda, action, num)?;
    let orbit = trace_orbit(family, lambda, energy, num.angle_samples, num)?;
    let omega = TAU / orbit.period;
    let mut samples: Vec<PhasePoint> = orbit.samples.into_iter().map(|(_, z)| z).collect();
    samples.pop();
    Ok(TorusChart {
        lambda: lambda.clone(),
        action,
        energy,
        omega,
        samples,
    })
}

impl TorusChart {
    /// Torus → phase: integrate forward from the nearest sample below φ.
    pub fn torus_to_phase(&self, family: &dyn HamiltonianFamily, angle: f64, num: &Numerics) -> Result<PhasePoint> {
        let n = self.samples.len();
        let phi = reduce_angle(angle);
        let j = ((phi / TAU * n as f64).floor() as usize).min(n - 1);
        let dt = (phi - TAU * j as f64 / n as f64) / self.omega;
        let z0 = self.samples[j];
        if dt <= 0.0 {
            return Ok(z0);
        }
        let mut solver = Dopri5::new(frozen_flow(family, &self.lambda), 0.0, [z0.q, z0.p, 0.0], tolerances(num.orbit_rtol));
        solver.integrate_to(dt)?;
        let y = solver.y();
        Ok(PhasePoint::new(y[0], y[1]))
    }
}

/// Phase points on a uniform angle grid of the torus (λ, I), with ω.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    pub lambda: ParamPoint,
    pub action: f64,
    pub omega: f64,
    pub angles: Vec<f64>,
    pub points: Vec<PhasePoint>,
}

impl TorusGrid {
    pub fn build(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, num: &Numerics) -> Result<Self> {
        family.validate(lambda)?;
        let angles = angle_grid(num.angle_samples);
        let (omega, points) = if family.has_analytic_torus() {
            let omega = family.analytic_frequency(lambda, action).expect("analytic frequency")?;
            let pts = angles
                .iter()
                .map(|&a| {
                    family
                        .analytic_torus_to_phase(lambda, TorusPoint::new(action, a))
                        .expect("analytic torus map")
                })
                .collect::<Result<Vec<_>>>()?;
            (omega, pts)
        } else {
            let chart = build_chart(family, lambda, action, num)?;
            (chart.omega, chart.samples)
        };
        if omega < num.omega_floor {
            return Err(Error::DegenerateFrequency(omega * omega));
        }
        Ok(Self {
            lambda: lambda.clone(),
            action,
            omega,
            angles,
            points,
        })
    }

    /// Samples of a phase-space function on the grid.
    pub fn sample(&self, f: impl Fn(PhasePoint) -> f64) -> Vec<f64> {
        self.points.iter().map(|&z| f(z)).collect()
    }

    pub fn average(&self, f: impl Fn(PhasePoint) -> f64) -> f64 {
        torus_average(&self.sample(f))
    }
}

/// Mean of samples on a uniform periodic grid (trapezoid rule).
pub fn torus_average(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Torus average of a function of the angle.
pub fn torus_average_fn(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    torus_average(&angle_grid(n).into_iter().map(f).collect::<Vec<_>>())
}

/// Which coordinate a fixed-phase-point derivative differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Angle,
    Action,
}

/// Per-point centered λ_μ derivatives of (I, φ) at fixed phase points on the
/// grid, in grid order.
pub fn torus_param_derivatives(
    family: &dyn HamiltonianFamily,
    grid: &TorusGrid,
    mu: usize,
    num: &Numerics,
) -> Result<Vec<(f64, f64)>> {
    let h = grid.lambda.fd_step(mu, num.fd_step);
    let (lp, lm) = (grid.lambda.shifted(mu, h), grid.lambda.shifted(mu, -h));
    family.validate(&lp)?;
    family.validate(&lm)?;
    grid.points
        .iter()
        .map(|&z| {
            let a = locate(family, &lp, z, num)?;
            let b = locate(family, &lm, z, num)?;
            let dphi = wrap_difference(a.torus.angle - b.torus.angle);
            // a jump of the origin shows up as an O(1) angle difference
            if dphi.abs() > 0.5 {
                return Err(Error::ConventionMismatch {
                    jump: dphi,
                    context: format!("between lambda +/- {h:e} along parameter {mu}"),
                });
            }
            Ok(((a.torus.action - b.torus.action) / (2.0 * h), dphi / (2.0 * h)))
        })
        .collect()
}

fn param_derivative_average(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    which: Coord,
    num: &Numerics,
) -> Result<f64> {
    let grid = TorusGrid::build(family, lambda, action, num)?;
    let d = torus_param_derivatives(family, &grid, mu, num)?;
    let vals: Vec<f64> = d
        .into_iter()
        .map(|(di, dphi)| if which == Coord::Angle { dphi } else { di })
        .collect();
    Ok(torus_average(&vals))
}

/// ⟨∂φ/∂λ_μ⟩ on the torus (λ, I), derivative taken at fixed (q, p).
pub fn dphi_dlambda_avg(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, mu: usize, num: &Numerics) -> Result<f64> {
    param_derivative_average(family, lambda, action, mu, Coord::Angle, num)
}

/// ⟨∂I/∂λ_μ⟩ on the torus (λ, I); vanishes by Liouville's theorem.
pub fn di_dlambda_avg(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, mu: usize, num: &Numerics) -> Result<f64> {
    param_derivative_average(family, lambda, action, mu, Coord::Action, num)
}
