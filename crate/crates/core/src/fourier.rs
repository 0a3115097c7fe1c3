//! Truncated Fourier algebra on the angle circle.
//!
//! A series stores c_m for m in [-M, M] with c_m = (1/2π)∫ f e^{-imφ} dφ, so
//! c_0 is the torus average.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative tail mass above which a fit or product is flagged as aliased.
pub const ALIAS_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    order: usize,
    coeffs: Vec<Complex64>,
    /// Relative coefficient mass discarded by the last truncation.
    dropped: f64,
}

impl AngleSeries {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * order + 1],
            dropped: 0.0,
        }
    }

    /// Builds a series from (m, c_m) pairs; unspecified coefficients are zero.
    pub fn from_modes(order: usize, modes: &[(i64, Complex64)]) -> Self {
        let mut s = Self::zeros(order);
        for &(m, c) in modes {
            assert!(m.unsigned_abs() as usize <= order, "mode {m} exceeds order {order}");
            s.coeffs[(m + order as i64) as usize] += c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        if m.unsigned_abs() as usize > self.order {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + self.order as i64) as usize]
        }
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m0 = self.order as i64;
        self.coeffs.iter().enumerate().map(move |(j, c)| (j as i64 - m0, *c))
    }

    /// Torus average (the secular term).
    pub fn mean(&self) -> f64 {
        self.coeff(0).re
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    pub fn aliased(&self) -> bool {
        self.dropped > ALIAS_THRESHOLD
    }

    /// Largest |c_m| with |m| > M/2.
    pub fn tail_decay(&self) -> f64 {
        self.coeffs()
            .filter(|(m, _)| m.unsigned_abs() as usize > self.order / 2)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest violation of c_{-m} = conj(c_m).
    pub fn reality_defect(&self) -> f64 {
        (0..=self.order as i64)
            .map(|m| (self.coeff(-m) - self.coeff(m).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn evaluate(&self, phi: f64) -> f64 {
        self.coeffs()
            .map(|(m, c)| (c * Complex64::from_polar(1.0, m as f64 * phi)).re)
            .sum()
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        let m0 = self.order as i64;
        Self {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| f(j as i64 - m0, *c))
                .collect(),
            dropped: self.dropped,
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map_coeffs(|_, c| c * k)
    }

    /// ∂/∂φ, spectrally.
    pub fn derivative(&self) -> Self {
        self.map_coeffs(|m, c| c * Complex64::new(0.0, m as f64))
    }

    /// Zero-mean antiderivative of f − ⟨f⟩: a_m = c_m/(im), a_0 = 0.
    pub fn secular_free_antiderivative(&self) -> Self {
        self.map_coeffs(|m, c| if m == 0 { Complex64::new(0.0, 0.0) } else { c / Complex64::new(0.0, m as f64) })
    }

    /// The series of φ ↦ f(φ − δ).
    pub fn delayed(&self, delta: f64) -> Self {
        self.map_coeffs(|m, c| c * Complex64::from_polar(1.0, -(m as f64) * delta))
    }

    /// Samples on the uniform grid φ_j = 2πj/n.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| self.evaluate(std::f64::consts::TAU * j as f64 / n as f64))
            .collect()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let order = self.order.max(other.order);
        let mut out = Self::zeros(order);
        for m in -(order as i64)..=order as i64 {
            out.coeffs[(m + order as i64) as usize] = f(self.coeff(m), other.coeff(m));
        }
        out.dropped = self.dropped.max(other.dropped);
        out
    }

    /// Truncated product: the full convolution is formed, then cut back to
    /// the larger input order. The discarded fraction is recorded.
    pub fn product(&self, other: &Self) -> Self {
        let order = self.order.max(other.order);
        let full = self.order + other.order;
        let mut conv = vec![Complex64::new(0.0, 0.0); 2 * full + 1];
        for (ma, ca) in self.coeffs() {
            if ca == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (mb, cb) in other.coeffs() {
                conv[(ma + mb + full as i64) as usize] += ca * cb;
            }
        }
        let total: f64 = conv.iter().map(|c| c.norm()).sum();
        let mut out = Self::zeros(order);
        let mut kept = 0.0;
        for m in -(order as i64)..=order as i64 {
            let c = conv[(m + full as i64) as usize];
            kept += c.norm();
            out.coeffs[(m + order as i64) as usize] = c;
        }
        let tail = if total > 0.0 { (total - kept).max(0.0) / total } else { 0.0 };
        if tail > ALIAS_THRESHOLD {
            log::warn!("product truncation discarded {tail:.3e} of the coefficient mass");
        }
        out.dropped = self.dropped.max(other.dropped).max(tail);
        out
    }

    /// Σ c_m(f) conj(c_m(g)), the torus average of f·g for real series.
    pub fn inner(&self, other: &Self) -> f64 {
        let order = self.order.max(other.order) as i64;
        (-order..=order)
            .map(|m| (self.coeff(m) * other.coeff(m).conj()).re)
            .sum()
    }

    /// Largest coefficient-wise distance.
    pub fn max_distance(&self, other: &Self) -> f64 {
        (self - other).coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for &AngleSeries {
    type Output = AngleSeries;
    fn add(self, rhs: &AngleSeries) -> AngleSeries {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &AngleSeries {
    type Output = AngleSeries;
    fn sub(self, rhs: &AngleSeries) -> AngleSeries {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &AngleSeries {
    type Output = AngleSeries;
    fn mul(self, rhs: &AngleSeries) -> AngleSeries {
        self.product(rhs)
    }
}

impl Neg for &AngleSeries {
    type Output = AngleSeries;
    fn neg(self) -> AngleSeries {
        self.scale(-1.0)
    }
}

/// Fits a series of order `order` to samples on the uniform grid
/// φ_j = 2πj/N. Requires N ≥ 2M + 2.
pub fn fit_series(samples: &[f64], order: usize) -> Result<AngleSeries> {
    let n = samples.len();
    if n < 2 * order + 2 {
        return Err(Error::InvalidParams(format!(
            "{n} samples cannot resolve order {order} (need at least {})",
            2 * order + 2
        )));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    let mut series = AngleSeries::zeros(order);
    for m in -(order as i64)..=order as i64 {
        let k = m.rem_euclid(n as i64) as usize;
        series.coeffs[(m + order as i64) as usize] = buf[k] * norm;
    }
    // mass beyond the truncation, up to Nyquist
    let total: f64 = buf.iter().map(|c| c.norm()).sum::<f64>() * norm;
    let kept: f64 = series.coeffs.iter().map(|c| c.norm()).sum();
    let tail = if total > 0.0 { (total - kept).max(0.0) / total } else { 0.0 };
    if tail > ALIAS_THRESHOLD {
        log::warn!("fit of order {order} from {n} samples leaves {tail:.3e} of the mass in the tail");
    }
    series.dropped = tail;
    Ok(series)
}

/// Uniform angle grid φ_j = 2πj/n.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| std::f64::consts::TAU * j as f64 / n as f64).collect()
}

/// Series of one function at actions I − h, I, I + h.
#[derive(Debug, Clone)]
pub struct ActionStencil {
    pub lower: AngleSeries,
    pub center: AngleSeries,
    pub upper: AngleSeries,
    pub step: f64,
}

impl ActionStencil {
    /// ∂/∂I by centered difference of whole coefficient vectors.
    pub fn d_action(&self) -> AngleSeries {
        (&self.upper - &self.lower).scale(0.5 / self.step)
    }
}

/// {A, B} = ∂_φA ∂_I B − ∂_I A ∂_φB at the stencil center.
pub fn poisson_bracket(a: &ActionStencil, b: &ActionStencil) -> Result<AngleSeries> {
    if (a.step - b.step).abs() > 1e-15 * a.step.abs() || a.center.order != b.center.order {
        return Err(Error::InvalidParams("bracket operands built on different stencils".into()));
    }
    let da_phi = a.center.derivative();
    let db_phi = b.center.derivative();
    Ok(&da_phi.product(&b.d_action()) - &a.d_action().product(&db_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid_samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        angle_grid(n).into_iter().map(f).collect()
    }

    #[test]
    fn fit_cos2() {
        let s = fit_series(&grid_samples(256, |p| (2.0 * p).cos()), 32).unwrap();
        for (m, c) in s.coeffs() {
            let expect = if m.abs() == 2 { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-15, "m = {m}: {c}");
        }
    }

    #[test]
    fn fit_constant() {
        let s = fit_series(&[1.0; 256], 32).unwrap();
        assert!((s.mean() - 1.0).abs() < 1e-15);
        assert!(s.coeffs().filter(|(m, _)| *m != 0).all(|(_, c)| c.norm() < 1e-16));
    }

    #[test]
    fn fit_rejects_undersampling() {
        assert!(fit_series(&[0.0; 65], 32).is_err());
        assert!(fit_series(&[0.0; 66], 32).is_ok());
    }

    #[test]
    fn aliasing_is_flagged() {
        let s = fit_series(&grid_samples(256, |p| (40.0 * p).cos()), 32).unwrap();
        assert!(s.aliased());
        let s = fit_series(&grid_samples(256, |p| (4.0 * p).cos()), 32).unwrap();
        assert!(!s.aliased());
    }

    #[test]
    fn antiderivative_of_cos2() {
        let s = fit_series(&grid_samples(256, |p| (2.0 * p).cos()), 32).unwrap();
        let a = s.secular_free_antiderivative();
        for j in 0..16 {
            let p = TAU * j as f64 / 16.0;
            assert!((a.evaluate(p) - 0.5 * (2.0 * p).sin()).abs() < 1e-14);
        }
        assert_eq!(a.mean(), 0.0);
    }

    #[test]
    fn antiderivative_of_constant_is_zero() {
        let s = fit_series(&[1.0; 256], 32).unwrap();
        let a = s.secular_free_antiderivative();
        assert!(a.coeffs().all(|(_, c)| c.norm() == 0.0));
    }

    #[test]
    fn antiderivative_defining_property() {
        let f = |p: f64| 0.3 + (p).sin() - 0.2 * (3.0 * p).cos() + 0.05 * (5.0 * p + 1.0).sin();
        let s = fit_series(&grid_samples(256, f), 32).unwrap();
        let back = s.secular_free_antiderivative().derivative();
        for j in 0..32 {
            let p = TAU * j as f64 / 32.0;
            assert!((back.evaluate(p) + s.mean() - f(p)).abs() < 1e-12);
        }
    }

    fn stencil(order: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> ActionStencil {
        let at = |i: f64| fit_series(&grid_samples(256, |p| f(i, p)), order).unwrap();
        ActionStencil {
            lower: at(1.0 - h),
            center: at(1.0),
            upper: at(1.0 + h),
            step: h,
        }
    }

    #[test]
    fn bracket_of_i_sin_and_i_cos() {
        let a = stencil(32, 1e-3, |i, p| i * (2.0 * p).sin());
        let b = stencil(32, 1e-3, |i, p| i * (2.0 * p).cos());
        let br = poisson_bracket(&a, &b).unwrap();
        // ∂_φ(I sin2φ)·cos2φ − sin2φ·∂_φ(I cos2φ) = 2I at I = 1
        assert!((br.mean() - 2.0).abs() < 1e-10);
        assert!(br.coeffs().filter(|(m, _)| *m != 0).all(|(_, c)| c.norm() < 1e-10));
        let self_br = poisson_bracket(&a, &a).unwrap();
        assert!(self_br.coeffs().all(|(_, c)| c.norm() < 1e-14));
    }

    #[test]
    fn parseval() {
        let f = |p: f64| 1.0 + p.cos() + 0.5 * (2.0 * p).sin();
        let g = |p: f64| 0.2 - (p + 0.3).sin() + 0.1 * (3.0 * p).cos();
        let sf = fit_series(&grid_samples(256, f), 32).unwrap();
        let sg = fit_series(&grid_samples(256, g), 32).unwrap();
        let direct: f64 = angle_grid(256).iter().map(|&p| f(p) * g(p)).sum::<f64>() / 256.0;
        assert!((sf.inner(&sg) - direct).abs() < 1e-12);
    }

    #[test]
    fn delayed_shifts_the_argument() {
        let s = fit_series(&grid_samples(128, |p| (3.0 * p).cos() + p.sin()), 16).unwrap();
        let d = s.delayed(0.4);
        for j in 0..8 {
            let p = 0.7 * j as f64;
            assert!((d.evaluate(p) - s.evaluate(p - 0.4)).abs() < 1e-13);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn band_limited(order: usize) -> impl Strategy<Value = AngleSeries> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), order + 1).prop_map(move |cs| {
                let mut modes = vec![(0, Complex64::new(cs[0].0, 0.0))];
                for (m, &(re, im)) in cs.iter().enumerate().skip(1) {
                    modes.push((m as i64, Complex64::new(re, im)));
                    modes.push((-(m as i64), Complex64::new(re, -im)));
                }
                AngleSeries::from_modes(order, &modes)
            })
        }

        fn stencil_of(s: [AngleSeries; 3], h: f64) -> ActionStencil {
            let [lower, center, upper] = s;
            ActionStencil { lower, center, upper, step: h }
        }

        proptest! {
            #[test]
            fn bracket_is_antisymmetric(
                a in proptest::array::uniform3(band_limited(4)),
                b in proptest::array::uniform3(band_limited(4)),
            ) {
                let (a, b) = (stencil_of(a, 1e-2), stencil_of(b, 1e-2));
                let ab = poisson_bracket(&a, &b).unwrap();
                let ba = poisson_bracket(&b, &a).unwrap();
                prop_assert!((&ab + &ba).coeffs().all(|(_, c)| c.norm() < 1e-12));
            }

            #[test]
            fn bracket_obeys_leibniz(
                a in proptest::array::uniform2(band_limited(3)),
                b in proptest::array::uniform2(band_limited(3)),
                c in proptest::array::uniform2(band_limited(3)),
            ) {
                // stencils linear in I, lifted to an order that holds every product
                let h = 1e-3;
                let lift = |s: &AngleSeries| AngleSeries::from_modes(24, &s.coeffs().collect::<Vec<_>>());
                let linear = |s: &[AngleSeries; 2]| {
                    let (c0, d) = (lift(&s[0]), lift(&s[1]));
                    [&c0 - &d.scale(h), c0.clone(), &c0 + &d.scale(h)]
                };
                let (a, b, c) = (linear(&a), linear(&b), linear(&c));
                let bc = [&b[0] * &c[0], &b[1] * &c[1], &b[2] * &c[2]];
                let sa = stencil_of(a, h);
                let sb = stencil_of(b.clone(), h);
                let sc = stencil_of(c.clone(), h);
                let lhs = poisson_bracket(&sa, &stencil_of(bc, h)).unwrap();
                let rhs = &(&poisson_bracket(&sa, &sb).unwrap() * &c[1])
                    + &(&b[1] * &poisson_bracket(&sa, &sc).unwrap());
                prop_assert!(lhs.max_distance(&rhs) < 1e-10);
            }
        }
    }
}
