//! Slow closed parameter loops integrated in time.
//!
//! A trajectory is carried around the loop while λ changes at rate ε. The
//! angle is read off the instantaneous torus at every sample, and the
//! increments left over after removing ∫ω dt accumulate into the geometric
//! drift. Extrapolating ε → 0 gives the Hannay angle with no reference to
//! curvature or generating functions.

use std::f64::consts::TAU;

use crate::actionangle::{build_chart, locate, torus_param_derivatives, Numerics, TorusGrid};
use crate::agp::generator_stencil;
use crate::error::{Error, Result};
use crate::family::{wrap_difference, HamiltonianFamily, ParamPoint, PhasePoint, TorusPoint};
use crate::fit::{loglog_slope, polyfit};
use crate::fourier::poisson_bracket;
use crate::holonomy::LoopPath;
use crate::ode::{Dopri5, Tolerances};
use crate::par::{IntoParallelIterator, ParallelIterator};

/// Loop parameter as a function of τ = t/T_loop. Its derivative vanishes at
/// both ends, so the parameters start and stop at rest.
pub fn ramp(tau: f64) -> f64 {
    tau - (TAU * tau).sin() / TAU
}

fn ramp_rate(tau: f64) -> f64 {
    1.0 - (TAU * tau).cos()
}

/// Phase point at torus coordinates (I, φ) on the torus at λ.
pub fn torus_to_phase(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    torus: TorusPoint,
    num: &Numerics,
) -> Result<PhasePoint> {
    if let Some(z) = family.analytic_torus_to_phase(lambda, torus) {
        return z;
    }
    build_chart(family, lambda, torus.action, num)?.torus_to_phase(family, torus.angle, num)
}

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSample {
    pub t: f64,
    pub action: f64,
    pub angle: f64,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct AdiabaticRun {
    pub epsilon: f64,
    pub initial: TorusPoint,
    pub final_torus: TorusPoint,
    /// ∫ω(I(t), λ(t)) dt
    pub dynamical_phase: f64,
    /// Unwrapped φ_final − φ_initial − ∫ω dt.
    pub geometric_drift: f64,
    pub max_action_drift: f64,
    /// Largest |H(z(t), λ(t)) − E(t)| with E integrated from ∂_λH·λ̇.
    pub energy_defect: f64,
    pub samples: Vec<RunSample>,
}

/// Sampling of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    /// Angle readouts per unperturbed period.
    pub samples_per_period: usize,
    /// Failure threshold on the relative energy defect.
    pub energy_tolerance: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            samples_per_period: 32,
            energy_tolerance: 1e-7,
        }
    }
}

const ORIGIN_JUMP_FRACTION: f64 = 0.25;

/// Carries the torus point (I₀, φ₀) once around `path` in time 2π/ε.
pub fn integrate_adiabatic(
    family: &dyn HamiltonianFamily,
    path: &LoopPath,
    action: f64,
    phi0: f64,
    epsilon: f64,
    settings: &RunSettings,
    num: &Numerics,
) -> Result<AdiabaticRun> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
    }
    let t_loop = TAU / epsilon;
    let lambda_at = |t: f64| ParamPoint::new(path.point(ramp(t / t_loop)));
    let lambda0 = lambda_at(0.0)?;
    family.validate(&lambda0)?;
    let z0 = torus_to_phase(family, &lambda0, TorusPoint::new(action, phi0), num)?;
    let start = locate(family, &lambda0, z0, num)?;

    let rhs = |t: f64, y: &[f64; 3]| {
        let tau = t / t_loop;
        let l = ParamPoint::new(path.point(ramp(tau))).expect("finite loop point");
        let rate = ramp_rate(tau) / t_loop;
        let z = PhasePoint::new(y[0], y[1]);
        let tangent = path.tangent(ramp(tau));
        let de: f64 = tangent
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(|(mu, &d)| family.dh_dparam(z, &l, mu) * d * rate)
            .sum();
        [family.dh_dp(z, &l), -family.dh_dq(z, &l), de]
    };
    let tol = Tolerances {
        rtol: num.dynamics_rtol,
        atol: num.dynamics_rtol * 1e-3,
        max_steps: usize::MAX,
    };
    let mut solver = Dopri5::new(rhs, 0.0, [z0.q, z0.p, family.energy(z0, &lambda0)], tol);

    let period = TAU / start.omega;
    let n = ((t_loop / period) * settings.samples_per_period as f64).ceil().max(4.0) as usize;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(RunSample {
        t: 0.0,
        action: start.torus.action,
        angle: start.torus.angle,
        omega: start.omega,
    });
    let (mut drift, mut dyn_phase, mut max_di, mut defect) = (0.0, 0.0, 0.0f64, 0.0f64);
    let mut origin = start.origin;
    for k in 1..=n {
        let t = t_loop * k as f64 / n as f64;
        solver.integrate_to(t)?;
        let y = *solver.y();
        let l = lambda_at(t)?;
        let z = PhasePoint::new(y[0], y[1]);
        let e = family.energy(z, &l);
        defect = defect.max((e - y[2]).abs() / e.abs().max(1e-300));
        if defect > settings.energy_tolerance {
            return Err(Error::IntegrationFailure(format!(
                "energy defect {defect:.3e} at t = {t:.6} exceeds {:.1e}",
                settings.energy_tolerance
            )));
        }
        let here = locate(family, &l, z, num)?;
        let scale = here.origin.distance(&family.reference_point(&l));
        let jump = here.origin.distance(&origin);
        if jump > ORIGIN_JUMP_FRACTION * scale {
            return Err(Error::ConventionMismatch {
                jump,
                context: format!("angle origin along the trajectory at t = {t:.6}"),
            });
        }
        origin = here.origin;
        let prev = samples[samples.len() - 1];
        let dt = t - prev.t;
        let step_phase = 0.5 * (prev.omega + here.omega) * dt;
        dyn_phase += step_phase;
        drift += wrap_difference(here.torus.angle - prev.angle - step_phase);
        max_di = max_di.max((here.torus.action - start.torus.action).abs());
        samples.push(RunSample {
            t,
            action: here.torus.action,
            angle: here.torus.angle,
            omega: here.omega,
        });
    }
    let last = samples[samples.len() - 1];
    Ok(AdiabaticRun {
        epsilon,
        initial: start.torus,
        final_torus: TorusPoint::new(last.action, last.angle),
        dynamical_phase: dyn_phase,
        geometric_drift: drift,
        max_action_drift: max_di,
        energy_defect: defect,
        samples,
    })
}

/// ε values, initial angles and acceptance threshold for the extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftProtocol {
    pub epsilons: Vec<f64>,
    /// Number of equispaced initial angles averaged per ε.
    pub phases: usize,
    /// Largest tolerated |a₀ − linear extrapolation of the two smallest ε|.
    pub tolerance: f64,
    pub run: RunSettings,
}

impl Default for DriftProtocol {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-2, 5e-3, 2.5e-3],
            phases: 8,
            tolerance: 1e-3,
            run: RunSettings::default(),
        }
    }
}

/// Per-ε summary of the averaged runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    pub mean_drift: f64,
    pub max_action_drift: f64,
}

#[derive(Debug, Clone)]
pub struct DynamicalEstimate {
    /// Extrapolated ε → 0 drift, the Hannay angle.
    pub hannay: f64,
    /// Disagreement between the polynomial fit and a linear extrapolation.
    pub error_bar: f64,
    /// RMS residual of the polynomial fit.
    pub fit_residual: f64,
    pub per_epsilon: Vec<EpsilonSummary>,
    pub runs: Vec<AdiabaticRun>,
}

impl DynamicalEstimate {
    /// Exponent p in max|I − I₀| ∝ ε^p.
    pub fn invariance_exponent(&self) -> Result<f64> {
        let e: Vec<f64> = self.per_epsilon.iter().map(|s| s.epsilon).collect();
        let d: Vec<f64> = self.per_epsilon.iter().map(|s| s.max_action_drift).collect();
        loglog_slope(&e, &d)
    }
}

/// Hannay angle from slow-loop dynamics, extrapolated to ε = 0 with a fit
/// a₀ + a₁ε + a₂ε².
pub fn dynamical_hannay(
    family: &dyn HamiltonianFamily,
    path: &LoopPath,
    action: f64,
    protocol: &DriftProtocol,
    num: &Numerics,
) -> Result<DynamicalEstimate> {
    let eps = &protocol.epsilons;
    if eps.len() < 2 || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("epsilon list needs at least two strictly decreasing entries".into()));
    }
    if protocol.phases == 0 {
        return Err(Error::InvalidParams("at least one initial angle is needed".into()));
    }
    let jobs: Vec<(f64, f64)> = eps
        .iter()
        .flat_map(|&e| (0..protocol.phases).map(move |j| (e, TAU * j as f64 / protocol.phases as f64)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(e, phi0)| integrate_adiabatic(family, path, action, phi0, e, &protocol.run, num))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let per_epsilon: Vec<EpsilonSummary> = runs
        .chunks(protocol.phases)
        .map(|c| EpsilonSummary {
            epsilon: c[0].epsilon,
            mean_drift: c.iter().map(|r| r.geometric_drift).sum::<f64>() / c.len() as f64,
            max_action_drift: c.iter().map(|r| r.max_action_drift).sum::<f64>() / c.len() as f64,
        })
        .collect();
    let x: Vec<f64> = per_epsilon.iter().map(|s| s.epsilon).collect();
    let y: Vec<f64> = per_epsilon.iter().map(|s| s.mean_drift).collect();
    let degree = (x.len() - 1).min(2);
    let (coef, fit_residual) = polyfit(&x, &y, degree)?;
    let k = x.len();
    let (e1, e2, d1, d2) = (x[k - 2], x[k - 1], y[k - 2], y[k - 1]);
    let linear = d2 - e2 * (d1 - d2) / (e1 - e2);
    let error_bar = if degree == 1 { fit_residual } else { (coef[0] - linear).abs() };
    if error_bar > protocol.tolerance {
        return Err(Error::NoConvergence {
            spread: error_bar,
            tolerance: protocol.tolerance,
        });
    }
    Ok(DynamicalEstimate {
        hannay: coef[0],
        error_bar,
        fit_residual,
        per_epsilon,
        runs,
    })
}

/// ⟨∂_μφ ∂_νI − ∂_νφ ∂_μI⟩ at fixed phase points, and ⟨{W_μ, W_ν}⟩.
pub fn appendix_identity_check(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    nu: usize,
    num: &Numerics,
) -> Result<(f64, f64)> {
    if mu == nu {
        return Ok((0.0, 0.0));
    }
    let grid = TorusGrid::build(family, lambda, action, num)?;
    let dm = torus_param_derivatives(family, &grid, mu, num)?;
    let dn = torus_param_derivatives(family, &grid, nu, num)?;
    let lhs = dm
        .iter()
        .zip(&dn)
        .map(|(&(im, pm), &(in_, pn))| pm * in_ - pn * im)
        .sum::<f64>()
        / dm.len() as f64;
    let wm = generator_stencil(family, lambda, action, mu, num)?;
    let wn = generator_stencil(family, lambda, action, nu, num)?;
    let rhs = poisson_bracket(&wm, &wn)?.mean();
    Ok((lhs, rhs))
}

/// Outcome of flowing torus points with the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCheck {
    pub step: f64,
    /// ⟨φ_W(h) − φ⟩ over the angle grid.
    pub mean_drift: f64,
    /// Largest distance between the flowed points and the coordinates of the
    /// same phase points on the torus at λ + h·e_μ, after removing a uniform
    /// angle shift.
    pub lie_residual: f64,
}

/// Applies the canonical flow of h·W_μ to a grid of torus points.
pub fn parallel_transport_check(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    step: f64,
    num: &Numerics,
) -> Result<TransportCheck> {
    let st = generator_stencil(family, lambda, action, mu, num)?;
    // W(I', φ) to second order in I' − I
    let (w0, w1) = (st.center.clone(), st.d_action());
    let w2 = (&(&st.upper + &st.lower) - &st.center.scale(2.0)).scale(1.0 / (st.step * st.step));
    let (w0p, w1p, w2p) = (w0.derivative(), w1.derivative(), w2.derivative());
    let flow = |_s: f64, y: &[f64; 2]| {
        let (phi, d) = (y[0], y[1] - action);
        let w_i = w1.evaluate(phi) + d * w2.evaluate(phi);
        let w_phi = w0p.evaluate(phi) + d * w1p.evaluate(phi) + 0.5 * d * d * w2p.evaluate(phi);
        [w_i, -w_phi]
    };
    let grid = TorusGrid::build(family, lambda, action, num)?;
    let shifted = lambda.shifted(mu, step);
    family.validate(&shifted)?;
    let mut moved = Vec::with_capacity(grid.angles.len());
    for (&phi, &z) in grid.angles.iter().zip(&grid.points) {
        let mut solver = Dopri5::new(&flow, 0.0, [phi, action], Tolerances::new(1e-13));
        solver.integrate_to(step)?;
        let y = *solver.y();
        let exact = locate(family, &shifted, z, num)?;
        moved.push((y[0] - phi, y[1], exact.torus));
    }
    let n = moved.len() as f64;
    let mean_drift = moved.iter().map(|m| m.0).sum::<f64>() / n;
    let offsets: Vec<f64> = moved
        .iter()
        .zip(&grid.angles)
        .map(|(m, &phi)| wrap_difference(m.2.angle - (phi + m.0)))
        .collect();
    let shift = offsets.iter().sum::<f64>() / n;
    let lie_residual = moved
        .iter()
        .zip(&offsets)
        .map(|(m, &off)| (off - shift).abs().max((m.2.action - m.1).abs()))
        .fold(0.0, f64::max);
    Ok(TransportCheck {
        step,
        mean_drift,
        lie_residual,
    })
}
