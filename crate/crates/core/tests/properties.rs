//! Randomized invariants.

use std::f64::consts::TAU;

use proptest::prelude::*;

use hannay_core::actionangle::Numerics;
use hannay_core::agp::agp_element;
use hannay_core::family::{
    genosc_dh, genosc_frequency, genosc_phase_to_torus, genosc_torus_to_phase, GenOsc, GenOscParams, HamiltonianFamily,
    ParamPoint, PhasePoint, Quartic, TorusPoint,
};
use hannay_core::fourier::{fit_series, AngleSeries};
use hannay_core::holonomy::{curvature_form, genosc_curvature_analytic, kvn_phase};

/// Generalized-oscillator parameters with XZ − Y² ≥ 0.1.
fn genosc_params() -> impl Strategy<Value = GenOscParams> {
    (0.3..3.0f64, -1.0..1.0f64, 0.3..3.0f64)
        .prop_filter("non-degenerate", |&(x, y, z)| x * z - y * y >= 0.1)
        .prop_map(|(x, y, z)| GenOscParams::new(x, y, z))
}

fn fd_param(family: &dyn HamiltonianFamily, z: PhasePoint, l: &ParamPoint, mu: usize) -> f64 {
    let h = 1e-5 * l[mu].abs().max(1.0);
    (family.energy(z, &l.shifted(mu, h)) - family.energy(z, &l.shifted(mu, -h))) / (2.0 * h)
}

fn band_limited(order: usize) -> impl Strategy<Value = AngleSeries> {
    proptest::collection::vec(-1.0..1.0f64, 2 * order + 1).prop_map(move |v| {
        let n = 4 * order + 4;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let phi = TAU * j as f64 / n as f64;
                v[0] + (1..=order)
                    .map(|m| v[2 * m - 1] * (m as f64 * phi).cos() + v[2 * m] * (m as f64 * phi).sin())
                    .sum::<f64>()
            })
            .collect();
        fit_series(&samples, 2 * order).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn energy_on_torus_is_omega_action(p in genosc_params(), i in 0.01..5.0f64, phi in 0.0..TAU) {
        let z = genosc_torus_to_phase(p, TorusPoint::new(i, phi)).unwrap();
        let w = genosc_frequency(p).unwrap();
        prop_assert!((GenOsc.energy(z, &p.to_point()) - w * i).abs() <= 1e-12 * (w * i).max(1.0));
    }

    #[test]
    fn torus_round_trip(p in genosc_params(), q in -3.0..3.0f64, mom in -3.0..3.0f64) {
        prop_assume!(q.hypot(mom) > 1e-3);
        let z = PhasePoint::new(q, mom);
        let back = genosc_torus_to_phase(p, genosc_phase_to_torus(p, z).unwrap()).unwrap();
        prop_assert!(back.distance(&z) <= 1e-10 * z.q.hypot(z.p).max(1.0));
    }

    #[test]
    fn genosc_gradient_matches_finite_difference(p in genosc_params(), q in -2.0..2.0f64, mom in -2.0..2.0f64) {
        let l = p.to_point();
        let z = PhasePoint::new(q, mom);
        for mu in 0..3 {
            let a = GenOsc.dh_dparam(z, &l, mu);
            let b = fd_param(&GenOsc, z, &l, mu);
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "mu {} analytic {} fd {}", mu, a, b);
        }
    }

    #[test]
    fn torus_gradient_matches_phase_space(p in genosc_params(), i in 0.1..3.0f64, phi in 0.0..TAU) {
        let t = TorusPoint::new(i, phi);
        let z = genosc_torus_to_phase(p, t).unwrap();
        let d = genosc_dh(p, t).unwrap();
        for mu in 0..3 {
            prop_assert!((d[mu] - GenOsc.dh_dparam(z, &p.to_point(), mu)).abs() <= 1e-12 * d[mu].abs().max(1.0));
        }
    }

    #[test]
    fn quartic_gradient_matches_finite_difference(m in 0.2..3.0f64, k in 0.2..3.0f64, q in -2.0..2.0f64, mom in -2.0..2.0f64) {
        let l = ParamPoint::new(vec![m, k]).unwrap();
        let z = PhasePoint::new(q, mom);
        for mu in 0..2 {
            let a = Quartic.dh_dparam(z, &l, mu);
            let b = fd_param(&Quartic, z, &l, mu);
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn parseval(a in band_limited(6), b in band_limited(6)) {
        let n = 64;
        let (sa, sb) = (a.sample(n), b.sample(n));
        let direct: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        prop_assert!((direct - a.inner(&b)).abs() <= 1e-12);
    }

    #[test]
    fn kvn_phase_is_unitary_and_linear(n in -8i64..8, h in -10.0..10.0f64) {
        let p = kvn_phase(n, h);
        prop_assert!((p.norm() - 1.0).abs() <= 1e-14);
        prop_assert!((p - kvn_phase(1, h).powi(n as i32)).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn curvature_is_antisymmetric_and_matches_closed_form(p in genosc_params(), i in 0.3..2.0f64) {
        let f = curvature_form(&GenOsc, &p.to_point(), i, &Numerics::default()).unwrap();
        let g = genosc_curvature_analytic(p).unwrap();
        for mu in 0..3 {
            prop_assert_eq!(f.entry(mu, mu), 0.0);
            for nu in 0..3 {
                prop_assert_eq!(f.entry(mu, nu), -f.entry(nu, mu));
                prop_assert!((f.entry(mu, nu) - g.entry(mu, nu)).abs() <= 1e-6 * g.entry(mu, nu).abs().max(1e-2));
            }
        }
    }

    /// value(m, n)/n = conj(value(n, m)/m): the potential is Hermitian up to
    /// the eigenfunction labels carried by the n·c formula.
    #[test]
    fn reduced_hermiticity(p in genosc_params(), m in -4i64..=4, n in -4i64..=4, mu in 0usize..3) {
        prop_assume!(m != n && m != 0 && n != 0);
        let num = Numerics::default();
        let a = agp_element(&GenOsc, &p.to_point(), 1.0, m, n, mu, &num).unwrap() / n as f64;
        let b = agp_element(&GenOsc, &p.to_point(), 1.0, n, m, mu, &num).unwrap() / m as f64;
        prop_assert!((a - b.conj()).norm() <= 1e-12);
    }
}
