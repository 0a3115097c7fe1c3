//! Adaptive Dormand–Prince 5(4) integrator with sign-change event location.
//!
//! States are fixed-size arrays. Events are located by re-taking a single
//! Runge–Kutta step of fractional length from the start of the accepted step
//! that bracketed the sign change, so the located state carries the same
//! local accuracy as an ordinary step.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// b - b*, fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Tolerances {
    pub fn new(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-2,
            max_steps: 5_000_000,
        }
    }
}

/// Direction of a sign change that counts as an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Falling,
    Rising,
}

impl Crossing {
    fn brackets(self, g0: f64, g1: f64) -> bool {
        match self {
            Crossing::Falling => g0 >= 0.0 && g1 < 0.0,
            Crossing::Rising => g0 <= 0.0 && g1 > 0.0,
        }
    }
}

pub struct Dopri5<F, const N: usize> {
    f: F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    tol: Tolerances,
    steps: usize,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let s = h * c;
        for i in 0..N {
            out[i] += s * k[i];
        }
    }
    out
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(f: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let k1 = f(t0, &y0);
        let mut solver = Self {
            f,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            tol,
            steps: 0,
        };
        solver.h = solver.initial_step();
        solver
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    // Hairer–Nørsett–Wanner starting step heuristic.
    fn initial_step(&self) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = axpy(&self.y, h0, &[(1.0, &self.k1)]);
        let k = (self.f)(self.t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sc = self.scale(self.y[i], self.y[i]);
            d2 += ((k[i] - self.k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// One trial step of size `h` from the current state. Returns the new
    /// state, the derivative at the new state and the scaled error norm.
    fn trial(&self, h: f64) -> ([f64; N], [f64; N], f64) {
        let (t, y, k1) = (self.t, &self.y, &self.k1);
        let f = &self.f;
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        let mut err = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / self.scale(y[i], y_new[i])).powi(2);
        }
        (y_new, k7, (err / N as f64).sqrt())
    }

    /// Takes one accepted step that does not pass `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::IntegrationFailure(format!(
                    "step budget {} exhausted at t = {}",
                    self.tol.max_steps, self.t
                )));
            }
            let remaining = t_limit - self.t;
            let mut h = self.h.min(remaining);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if !(h > 0.0) {
                return Ok(());
            }
            if h < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(Error::IntegrationFailure(format!(
                    "step size underflow at t = {}",
                    self.t
                )));
            }
            let (y_new, k7, err) = self.trial(h);
            self.steps += 1;
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                self.h = 0.25 * h;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.t = if last { t_limit } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.h = h * factor.min(1.0);
        }
    }

    pub fn integrate_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    /// Integrates until `g` changes sign in the requested direction, leaving
    /// the solver at the located event. Returns `None` if `t_max` is reached
    /// first.
    pub fn advance_to_event<G>(&mut self, g: G, crossing: Crossing, t_max: f64) -> Result<Option<f64>>
    where
        G: Fn(f64, &[f64; N]) -> f64,
    {
        let mut g0 = g(self.t, &self.y);
        while self.t < t_max {
            let (t0, y0, k0, h0) = (self.t, self.y, self.k1, self.h);
            self.step(t_max)?;
            let g1 = g(self.t, &self.y);
            if crossing.brackets(g0, g1) {
                let h = self.t - t0;
                let (t_ev, y_ev) = if g0 == 0.0 {
                    (t0, y0)
                } else {
                    self.locate(&g, t0, y0, k0, h, g0, g1)
                };
                self.t = t_ev;
                self.y = y_ev;
                self.k1 = (self.f)(t_ev, &y_ev);
                self.h = h0.max(h);
                return Ok(Some(t_ev));
            }
            g0 = g1;
        }
        Ok(None)
    }

    // Illinois regula falsi on the step fraction.
    #[allow(clippy::too_many_arguments)]
    fn locate<G>(
        &mut self,
        g: &G,
        t0: f64,
        y0: [f64; N],
        k0: [f64; N],
        h: f64,
        g0: f64,
        g1: f64,
    ) -> (f64, [f64; N])
    where
        G: Fn(f64, &[f64; N]) -> f64,
    {
        let saved = (self.t, self.y, self.k1);
        self.t = t0;
        self.y = y0;
        self.k1 = k0;
        let (mut a, mut b) = (0.0, h);
        let (mut ga, mut gb) = (g0, g1);
        let mut best = (t0 + h, saved.1);
        let mut side = 0i8;
        for _ in 0..60 {
            let x = (a * gb - b * ga) / (gb - ga);
            let (yx, _, _) = self.trial(x);
            let gx = g(t0 + x, &yx);
            best = (t0 + x, yx);
            if gx == 0.0 || (b - a).abs() < 4.0 * f64::EPSILON * (t0.abs() + h) {
                break;
            }
            if (gx > 0.0) == (ga > 0.0) {
                a = x;
                ga = gx;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            } else {
                b = x;
                gb = gx;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
            if (gx.abs()) < 1e-15 * (g0.abs().max(g1.abs())) {
                break;
            }
        }
        best
    }
}
