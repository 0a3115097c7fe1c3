//! Cross-route consistency checks and independent oracles.

use std::f64::consts::TAU;

use num_complex::Complex64;

use hannay_core::actionangle::{
    action_and_frequency, action_of_energy, build_chart, dphi_dlambda_avg, trace_orbit, Numerics,
};
use hannay_core::agp::{agp_element, agp_element_direct, agp_element_timeavg, param_derivative_series};
use hannay_core::dynamics::{appendix_identity_check, dynamical_hannay, DriftProtocol};
use hannay_core::family::{genosc_torus_to_phase, GenOsc, GenOscParams, Inert, ParamPoint, Quartic, TorusPoint};
use hannay_core::holonomy::{
    curvature_entry, hannay_angle_line, hannay_angle_surface, wz_diagonal_potential, LoopPath, SurfacePatch,
};
use hannay_core::quad::unit_rule;
use hannay_core::Error;

fn num() -> Numerics {
    Numerics::default()
}

fn tilted() -> LoopPath {
    LoopPath::ellipse(vec![1.5, 0.3, 1.5], vec![0.3, 0.0, -0.1], vec![0.0, 0.2, 0.2], 32).unwrap()
}

/// Period of p²/2m + kq⁴ at energy E by direct quadrature of ∮dq/q̇, with
/// u = 1 − v² removing the turning-point singularity.
fn quartic_period_oracle(m: f64, k: f64, e: f64) -> f64 {
    let qmax = (e / k).powf(0.25);
    let integral: f64 = unit_rule(40)
        .into_iter()
        .map(|(v, w)| {
            let u = 1.0 - v * v;
            w * 2.0 / ((1.0 + u) * (1.0 + u * u)).sqrt()
        })
        .sum();
    4.0 * qmax * (m / (2.0 * e)).sqrt() * integral
}

#[test]
fn quartic_period_matches_quadrature() {
    let l: ParamPoint = [1.0, 1.0].into();
    let orbit = trace_orbit(&Quartic, &l, 1.0, 128, &num()).unwrap();
    let oracle = quartic_period_oracle(1.0, 1.0, 1.0);
    assert!((orbit.period - oracle).abs() <= 1e-6 * oracle, "{} vs {oracle}", orbit.period);
    assert!(orbit.closure_error() < 1e-8);
}

#[test]
fn quartic_action_derivative_is_period_over_two_pi() {
    let l: ParamPoint = [1.0, 1.0].into();
    let h = 1e-4;
    let di = (action_of_energy(&Quartic, &l, 1.0 + h, &num()).unwrap() - action_of_energy(&Quartic, &l, 1.0 - h, &num()).unwrap())
        / (2.0 * h);
    let t = quartic_period_oracle(1.0, 1.0, 1.0);
    assert!((di - t / TAU).abs() <= 1e-5 * t / TAU);
}

#[test]
fn genosc_action_of_energy() {
    let n = num();
    assert!((action_of_energy(&GenOsc, &[1.0, 0.0, 1.0].into(), 0.5, &n).unwrap() - 0.5).abs() < 1e-10);
    assert!((action_of_energy(&GenOsc, &[4.0, 0.0, 1.0].into(), 1.0, &n).unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn frequency_is_energy_derivative() {
    let l: ParamPoint = [0.8, 1.6].into();
    let n = num();
    let (i0, w) = action_and_frequency(&Quartic, &l, 1.0, &n).unwrap();
    let chart_hi = build_chart(&Quartic, &l, i0 * (1.0 + 1e-4), &n).unwrap();
    let chart_lo = build_chart(&Quartic, &l, i0 * (1.0 - 1e-4), &n).unwrap();
    let de_di = (chart_hi.energy - chart_lo.energy) / (2e-4 * i0);
    assert!((de_di - w).abs() <= 1e-5 * w);
}

#[test]
fn numeric_chart_reproduces_closed_form_angles() {
    let p = GenOscParams::new(1.7, 0.4, 0.9);
    let chart = build_chart(&GenOsc, &p.to_point(), 1.3, &num()).unwrap();
    assert!((chart.action - 1.3).abs() < 1e-12);
    let w = (p.x * p.z - p.y * p.y).sqrt();
    assert!((chart.omega - w).abs() <= 1e-8 * w);
    let n = chart.samples.len();
    let offset = (0..n)
        .map(|j| {
            let phi = TAU * j as f64 / n as f64;
            chart.samples[j].distance(&genosc_torus_to_phase(p, TorusPoint::new(1.3, phi)).unwrap())
        })
        .fold(0.0, f64::max);
    assert!(offset < 1e-8, "{offset}");
}

#[test]
fn quartic_chart_round_trip() {
    let l: ParamPoint = [1.2, 0.7].into();
    let n = num();
    let chart = build_chart(&Quartic, &l, 0.9, &n).unwrap();
    for j in 0..128 {
        let phi = TAU * (j as f64 + 0.37) / 128.0;
        let z = chart.torus_to_phase(&Quartic, phi, &n).unwrap();
        let t = hannay_core::actionangle::locate(&Quartic, &l, z, &n).unwrap().torus;
        assert!((t.action - 0.9).abs() < 1e-8);
        assert!(hannay_core::family::wrap_difference(t.angle - phi).abs() < 1e-8);
    }
}

#[test]
fn line_route_is_additive_and_oriented() {
    let path = tilted();
    let once = hannay_angle_line(&GenOsc, &path, 1.0, &num()).unwrap();
    let twice = hannay_angle_line(&GenOsc, &path.repeated(2), 1.0, &num()).unwrap();
    let back = hannay_angle_line(&GenOsc, &path.reversed(), 1.0, &num()).unwrap();
    assert!((twice - 2.0 * once).abs() < 1e-10);
    assert!((back + once).abs() < 1e-12);
}

#[test]
fn surface_orientation_flip() {
    let s = SurfacePatch::spanning(&tilted(), 8, 8).unwrap();
    let a = hannay_angle_surface(&GenOsc, &s, 1.0, &num()).unwrap();
    let b = hannay_angle_surface(&GenOsc, &s.flipped(), 1.0, &num()).unwrap();
    // the nodes differ by round-off, so the finite-difference noise does too
    assert!((a + b).abs() < 1e-7 * a.abs(), "{a} {b}");
}

#[test]
fn mismatched_boundary_is_detected() {
    let s = SurfacePatch::spanning(&tilted(), 8, 8).unwrap();
    assert!(s.boundary_mismatch(&tilted()) < 1e-12);
    let other = LoopPath::ellipse(vec![1.5, 0.3, 1.5], vec![0.25, 0.0, 0.0], vec![0.0, 0.2, 0.2], 32).unwrap();
    assert!(s.boundary_mismatch(&other) > 1e-3);
}

#[test]
fn potential_loop_integral_is_minus_n_times_the_angle() {
    let path = tilted();
    let n = 3;
    let nodes = path.nodes();
    let integral: f64 = nodes
        .iter()
        .map(|&s| {
            let l = ParamPoint::new(path.point(s)).unwrap();
            path.tangent(s)
                .iter()
                .enumerate()
                .map(|(mu, t)| t * wz_diagonal_potential(&GenOsc, &l, 1.0, n, mu, &num()).unwrap())
                .sum::<f64>()
        })
        .sum::<f64>()
        / nodes.len() as f64;
    let angle = hannay_angle_line(&GenOsc, &path, 1.0, &num()).unwrap();
    assert!((integral + n as f64 * angle).abs() < 1e-12);
}

#[test]
fn generator_and_direct_routes_agree_for_the_oscillator() {
    let l: ParamPoint = [1.4, -0.3, 0.8].into();
    for mu in 0..3 {
        for n in -4i64..=4 {
            for m in -6i64..=6 {
                if m == n {
                    continue;
                }
                let g = agp_element(&GenOsc, &l, 1.1, m, n, mu, &num()).unwrap();
                let d = agp_element_direct(&GenOsc, &l, 1.1, m, n, mu, &num()).unwrap();
                assert!((g - d).norm() <= 1e-9, "m {m} n {n} mu {mu}: {g} vs {d}");
            }
        }
    }
}

#[test]
fn quartic_routes_differ_by_the_frequency_slope() {
    // with ω' ≠ 0 the generator route picks up n c_k(∂_μH) ω'/(i k ω²)
    let l: ParamPoint = [1.0, 1.0].into();
    let n_ = num();
    let (i, m, n, mu) = (1.0, 3i64, 1i64, 1usize);
    let k = m - n;
    let g = agp_element(&Quartic, &l, i, m, n, mu, &n_).unwrap();
    let d = agp_element_direct(&Quartic, &l, i, m, n, mu, &n_).unwrap();
    let (dh, w) = param_derivative_series(&Quartic, &l, i, mu, &n_).unwrap();
    let h = n_.action_step(i);
    let w_hi = param_derivative_series(&Quartic, &l, i + h, mu, &n_).unwrap().1;
    let w_lo = param_derivative_series(&Quartic, &l, i - h, mu, &n_).unwrap().1;
    let slope = (w_hi - w_lo) / (2.0 * h);
    let predicted = dh.coeff(k) * n as f64 * slope / (Complex64::new(0.0, k as f64) * w * w);
    assert!(((g - d) - predicted).norm() <= 1e-6, "{} vs {predicted}", g - d);
    assert!((g - d).norm() > 1e-4);
}

#[test]
fn diagonal_requests_are_rejected_everywhere() {
    let l: ParamPoint = [1.0, 0.0, 1.0].into();
    assert_eq!(agp_element_direct(&GenOsc, &l, 1.0, 1, 1, 0, &num()), Err(Error::DegenerateDenominator(1)));
    assert!(matches!(agp_element_timeavg(&GenOsc, &l, 1.0, 0, 0, 0, 10.0, &num()), Err(Error::DegenerateDenominator(0))));
}

#[test]
fn degenerate_frequency_is_an_error() {
    let l: ParamPoint = [1.0, 1.0, 1.0].into();
    assert!(matches!(curvature_entry(&GenOsc, &l, 1.0, 0, 1, &num()), Err(Error::DegenerateFrequency(_))));
}

#[test]
fn inert_family_has_no_geometry() {
    let l = ParamPoint::new(vec![0.5]).unwrap();
    assert_eq!(dphi_dlambda_avg(&Inert, &l, 1.0, 0, &num()).unwrap(), 0.0);
    assert_eq!(appendix_identity_check(&Inert, &l, 1.0, 0, 0, &num()).unwrap(), (0.0, 0.0));
    let path = LoopPath::ellipse(vec![0.0], vec![1.0], vec![0.0], 8).unwrap();
    assert_eq!(hannay_angle_line(&Inert, &path, 1.0, &num()).unwrap(), 0.0);
}

#[test]
fn quartic_curvature_vanishes() {
    // time-reversal symmetry makes both generators odd in φ
    let l: ParamPoint = [1.1, 0.9].into();
    assert!(curvature_entry(&Quartic, &l, 1.0, 0, 1, &num()).unwrap().abs() < 1e-6);
}

#[test]
fn dynamical_route_changes_sign_with_orientation() {
    let p = DriftProtocol {
        epsilons: vec![2e-2, 1e-2],
        phases: 4,
        tolerance: 1e-3,
        ..DriftProtocol::default()
    };
    let fwd = dynamical_hannay(&GenOsc, &tilted(), 1.0, &p, &num()).unwrap();
    let back = dynamical_hannay(&GenOsc, &tilted().reversed(), 1.0, &p, &num()).unwrap();
    let line = hannay_angle_line(&GenOsc, &tilted(), 1.0, &num()).unwrap();
    assert!((fwd.hannay + back.hannay).abs() < 1e-4 * line.abs(), "{} {}", fwd.hannay, back.hannay);
    assert!((fwd.hannay - line).abs() < 1e-3 * line.abs());
}

#[test]
fn drift_does_not_depend_on_initial_angle() {
    let p = DriftProtocol {
        epsilons: vec![2e-2, 1e-2],
        phases: 6,
        tolerance: 1e-3,
        ..DriftProtocol::default()
    };
    let d = dynamical_hannay(&GenOsc, &tilted(), 1.0, &p, &num()).unwrap();
    for group in d.runs.chunks(6) {
        let mean = group.iter().map(|r| r.geometric_drift).sum::<f64>() / 6.0;
        for r in group {
            assert!((r.geometric_drift - mean).abs() < 1e-4 * mean.abs());
        }
    }
}

#[test]
fn constant_loop_gives_zero_everywhere() {
    let path = LoopPath::constant(vec![1.2, 0.1, 0.9], 8).unwrap();
    let p = DriftProtocol {
        epsilons: vec![5e-2, 2.5e-2],
        phases: 2,
        ..DriftProtocol::default()
    };
    let d = dynamical_hannay(&GenOsc, &path, 1.0, &p, &num()).unwrap();
    assert!(d.hannay.abs() < 1e-7);
    assert_eq!(hannay_angle_line(&GenOsc, &path, 1.0, &num()).unwrap(), 0.0);
}
