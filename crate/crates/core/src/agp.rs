//! Adiabatic gauge potential.
//!
//! The potential acts on Liouvillian eigenfunctions e^{inφ} through the
//! generating function W_μ = (1/ω)∫(⟨∂_μH⟩ − ∂_μH)dφ, as 𝒜_μ = −i{·, W_μ}.
//! Matrix elements are also available directly from the Fourier data of
//! ∂_μH and from the nested time average of the conjugated perturbation.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::actionangle::{Numerics, TorusGrid};
use crate::error::{Error, Result};
use crate::family::{genosc_frequency, GenOscParams, HamiltonianFamily, ParamPoint};
use crate::fit::complex_lstsq;
use crate::fourier::{fit_series, ActionStencil, AngleSeries};
use crate::quad::{composite, unit_rule};

/// W_μ on the torus (λ, I).
#[derive(Debug, Clone)]
pub struct GaugeGenerator {
    pub mu: usize,
    pub action: f64,
    pub omega: f64,
    pub series: AngleSeries,
}

fn check_param(family: &dyn HamiltonianFamily, mu: usize) -> Result<()> {
    if mu >= family.n_params() {
        return Err(Error::InvalidParams(format!(
            "parameter index {mu} out of range for {} ({} parameters)",
            family.name(),
            family.n_params()
        )));
    }
    Ok(())
}

/// Fourier series of ∂H/∂λ_μ on the torus (λ, I), with ω there.
pub fn param_derivative_series(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    num: &Numerics,
) -> Result<(AngleSeries, f64)> {
    check_param(family, mu)?;
    let grid = TorusGrid::build(family, lambda, action, num)?;
    let series = fit_series(&grid.sample(|z| family.dh_dparam(z, lambda, mu)), num.truncation)?;
    Ok((series, grid.omega))
}

/// W_μ for every parameter from one torus grid.
pub fn all_generators(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    num: &Numerics,
) -> Result<Vec<AngleSeries>> {
    let grid = TorusGrid::build(family, lambda, action, num)?;
    (0..family.n_params())
        .map(|mu| {
            let dh = fit_series(&grid.sample(|z| family.dh_dparam(z, lambda, mu)), num.truncation)?;
            Ok(dh.secular_free_antiderivative().scale(-1.0 / grid.omega))
        })
        .collect()
}

pub fn gauge_generator(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    num: &Numerics,
) -> Result<GaugeGenerator> {
    let (dh, omega) = param_derivative_series(family, lambda, action, mu, num)?;
    let series = dh.secular_free_antiderivative().scale(-1.0 / omega);
    assert_eq!(series.mean(), 0.0, "generator picked up a secular term");
    Ok(GaugeGenerator {
        mu,
        action,
        omega,
        series,
    })
}

/// Series built at I − h_I, I, I + h_I.
pub fn action_stencil(
    action: f64,
    num: &Numerics,
    mut build: impl FnMut(f64) -> Result<AngleSeries>,
) -> Result<ActionStencil> {
    let step = num.action_step(action);
    if action - step <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "action {action} too small for a centered difference with step {step:e}"
        )));
    }
    Ok(ActionStencil {
        lower: build(action - step)?,
        center: build(action)?,
        upper: build(action + step)?,
        step,
    })
}

pub fn generator_stencil(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    num: &Numerics,
) -> Result<ActionStencil> {
    action_stencil(action, num, |a| Ok(gauge_generator(family, lambda, a, mu, num)?.series))
}

/// ⟨ψ_m, 𝒜_μ ψ_n⟩ from the generator: n · c_{m−n}(∂W_μ/∂I).
pub fn agp_element(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    m: i64,
    n: i64,
    mu: usize,
    num: &Numerics,
) -> Result<Complex64> {
    if m == n {
        return Err(Error::DegenerateDenominator(m));
    }
    let dw = generator_stencil(family, lambda, action, mu, num)?.d_action();
    Ok(dw.coeff(m - n) * n as f64)
}

/// ⟨ψ_m, ∂_μL ψ_n⟩ = n · c_{m−n}(∂_I ∂_μH), with ω at I.
fn perturbation_element(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    num: &Numerics,
) -> Result<(AngleSeries, f64)> {
    let mut omega = 0.0;
    let st = action_stencil(action, num, |a| {
        let (s, w) = param_derivative_series(family, lambda, a, mu, num)?;
        if a == action {
            omega = w;
        }
        Ok(s)
    })?;
    Ok((st.d_action(), omega))
}

/// ⟨ψ_m, 𝒜_μ ψ_n⟩ = −i⟨ψ_m, ∂_μL ψ_n⟩/(l_n − l_m), with l_n = nω.
pub fn agp_element_direct(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    m: i64,
    n: i64,
    mu: usize,
    num: &Numerics,
) -> Result<Complex64> {
    if m == n {
        return Err(Error::DegenerateDenominator(m));
    }
    let (d, omega) = perturbation_element(family, lambda, action, mu, num)?;
    let elem = d.coeff(m - n) * n as f64;
    Ok(-Complex64::i() * elem / ((n - m) as f64 * omega))
}

/// Diagonal element n · c_0(∂W_μ/∂I); zero in the parallel-transport gauge.
pub fn berry_simon_diagonal(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    n: i64,
    mu: usize,
    num: &Numerics,
) -> Result<f64> {
    let dw = generator_stencil(family, lambda, action, mu, num)?.d_action();
    Ok(n as f64 * dw.coeff(0).re)
}

/// Nested time average of the conjugated perturbation over the finite
/// horizon T:
///
///   −(1/T)∫₀ᵀdt∫₀ᵗds ⟨ψ_m, e^{−isL} ∂_μL e^{isL} ψ_n⟩,
///
/// with the conjugation realized as transport of ∂_μH along the torus flow.
/// The inner integral is folded into the weight (T − s).
pub fn agp_element_timeavg(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    m: i64,
    n: i64,
    mu: usize,
    horizon: f64,
    num: &Numerics,
) -> Result<Complex64> {
    if m == n {
        return Err(Error::DegenerateDenominator(m));
    }
    let (d, omega) = perturbation_element(family, lambda, action, mu, num)?;
    Ok(timeavg_from_series(&d, omega, m, n, horizon))
}

fn timeavg_from_series(d: &AngleSeries, omega: f64, m: i64, n: i64, horizon: f64) -> Complex64 {
    let beat = TAU / ((m - n).abs() as f64 * omega);
    let panels = ((8.0 * horizon / beat).ceil() as usize).max(1);
    let rule = unit_rule(16);
    let k = m - n;
    let integral: Complex64 = composite(0.0, horizon, panels, &rule, |s| {
        d.delayed(omega * s).coeff(k) * (n as f64 * (horizon - s))
    });
    -integral / horizon
}

/// Time-average element at several horizons, for convergence studies.
pub fn timeavg_sweep(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    m: i64,
    n: i64,
    mu: usize,
    horizons: &[f64],
    num: &Numerics,
) -> Result<(Vec<Complex64>, f64)> {
    if m == n {
        return Err(Error::DegenerateDenominator(m));
    }
    let (d, omega) = perturbation_element(family, lambda, action, mu, num)?;
    Ok((horizons.iter().map(|&t| timeavg_from_series(&d, omega, m, n, t)).collect(), omega))
}

/// T → ∞ limit from finite-horizon values, fitting a + (b + c e^{iΔT})/T
/// with Δ = (n − m)ω, the exact form of the finite-horizon remainder.
pub fn extrapolate_horizon(horizons: &[f64], values: &[Complex64], delta: f64) -> Result<Complex64> {
    let rows: Vec<Vec<Complex64>> = horizons
        .iter()
        .map(|&t| {
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0 / t, 0.0),
                Complex64::from_polar(1.0 / t, delta * t),
            ]
        })
        .collect();
    Ok(complex_lstsq(&rows, values)?[0])
}

/// Largest distance from `target` over one beat period starting at each
/// horizon: the envelope of the oscillating O(1/T) remainder.
pub fn timeavg_error_envelope(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    m: i64,
    n: i64,
    mu: usize,
    horizon: f64,
    target: Complex64,
    num: &Numerics,
) -> Result<f64> {
    let (d, omega) = perturbation_element(family, lambda, action, mu, num)?;
    let beat = TAU / ((m - n).abs() as f64 * omega);
    Ok((0..=32)
        .map(|j| {
            let t = horizon + beat * j as f64 / 32.0;
            (timeavg_from_series(&d, omega, m, n, t) - target).norm()
        })
        .fold(0.0, f64::max))
}

/// c₂ of each generator W_X, W_Y, W_Z of the generalized oscillator, in
/// closed form. Every other coefficient except c₋₂ = conj(c₂) vanishes.
pub fn genosc_generator_c2(params: GenOscParams, action: f64) -> Result<[Complex64; 3]> {
    let w = genosc_frequency(params)?;
    let (y, z) = (params.y, params.z);
    let k = z * action / (w * w);
    // a sin 2φ + b cos 2φ
    let ab = [
        (-k / 4.0, 0.0),
        (k / 2.0 * y / z, -k / 2.0 * w / z),
        (-k / 4.0 * ((y / z).powi(2) - (w / z).powi(2)), k / 2.0 * y * w / (z * z)),
    ];
    Ok(ab.map(|(a, b)| Complex64::new(b / 2.0, -a / 2.0)))
}
