//! Curvature, Wilczek–Zee diagonal potential and the Hannay angle.
//!
//! The Hannay angle of a loop is computed two ways: as the loop integral of
//! ⟨∂_λφ⟩ (finite differences of the angle at fixed phase points), and as the
//! flux of the curvature ∂_I⟨{W_μ, W_ν}⟩ through a spanning surface.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::actionangle::{dphi_dlambda_avg, Numerics, TorusGrid};
use crate::agp::all_generators;
use crate::error::{Error, Result};
use crate::family::{genosc_frequency, GenOscParams, HamiltonianFamily, ParamPoint};
use crate::fourier::{fit_series, poisson_bracket, ActionStencil, AngleSeries};
use crate::par::{IntoParallelIterator, IntoParallelRefIterator, ParallelIterator};
use crate::quad::unit_rule;

/// Antisymmetric matrix of curvature entries per unit eigenvalue index.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureForm {
    pub lambda: ParamPoint,
    pub action: f64,
    matrix: Vec<Vec<f64>>,
}

impl CurvatureForm {
    /// Builds the form from its entries above the diagonal.
    pub fn from_upper(lambda: ParamPoint, action: f64, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let n = lambda.dim();
        let mut matrix = vec![vec![0.0; n]; n];
        for mu in 0..n {
            for nu in mu + 1..n {
                let v = upper(mu, nu);
                matrix[mu][nu] = v;
                matrix[nu][mu] = -v;
            }
        }
        Self { lambda, action, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn entry(&self, mu: usize, nu: usize) -> f64 {
        self.matrix[mu][nu]
    }

    /// Σ_{μ<ν} F_μν (a_μ b_ν − a_ν b_μ).
    pub fn contract(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for mu in 0..n {
            for nu in mu + 1..n {
                acc += self.matrix[mu][nu] * (a[mu] * b[nu] - a[nu] * b[mu]);
            }
        }
        acc
    }
}

/// Closed form for the generalized oscillator: entry(Y,Z) = X/(4ω³),
/// entry(Z,X) = Y/(4ω³), entry(X,Y) = Z/(4ω³).
pub fn genosc_curvature_analytic(params: GenOscParams) -> Result<CurvatureForm> {
    let w3 = 4.0 * genosc_frequency(params)?.powi(3);
    let (x, y, z) = (params.x / w3, params.y / w3, params.z / w3);
    Ok(CurvatureForm::from_upper(params.to_point(), f64::NAN, |mu, nu| match (mu, nu) {
        (0, 1) => z,
        (0, 2) => -y,
        (1, 2) => x,
        _ => unreachable!(),
    }))
}

/// ⟨{A, B}⟩ at the stencil center.
fn bracket_mean(a: &ActionStencil, b: &ActionStencil) -> Result<f64> {
    Ok(poisson_bracket(a, b)?.mean())
}

fn stencil(series: &[AngleSeries], centre: usize, step: f64) -> ActionStencil {
    ActionStencil {
        lower: series[centre - 1].clone(),
        center: series[centre].clone(),
        upper: series[centre + 1].clone(),
        step,
    }
}

/// Generators for every parameter at I + k·h_I, k = −2..=2.
fn generator_ladder(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    num: &Numerics,
) -> Result<(Vec<Vec<AngleSeries>>, f64)> {
    let h = num.action_step(action);
    if action - 2.0 * h <= 0.0 {
        return Err(Error::InvalidParams(format!("action {action} too small for the curvature stencil")));
    }
    let rungs = (-2..=2)
        .map(|k| all_generators(family, lambda, action + k as f64 * h, num))
        .collect::<Result<Vec<_>>>()?;
    // transpose to per-parameter ladders
    let per_param = (0..family.n_params())
        .map(|mu| rungs.iter().map(|r| r[mu].clone()).collect())
        .collect();
    Ok((per_param, h))
}

fn entry_from_ladder(w: &[Vec<AngleSeries>], mu: usize, nu: usize, h: f64) -> Result<f64> {
    let upper = bracket_mean(&stencil(&w[mu], 3, h), &stencil(&w[nu], 3, h))?;
    let lower = bracket_mean(&stencil(&w[mu], 1, h), &stencil(&w[nu], 1, h))?;
    Ok((upper - lower) / (2.0 * h))
}

/// Curvature per unit n: ∂/∂I ⟨{W_μ, W_ν}⟩.
pub fn curvature_entry(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    nu: usize,
    num: &Numerics,
) -> Result<f64> {
    if mu >= family.n_params() || nu >= family.n_params() {
        return Err(Error::InvalidParams(format!("index pair ({mu}, {nu}) out of range")));
    }
    if mu == nu {
        return Ok(0.0);
    }
    let (w, h) = generator_ladder(family, lambda, action, num)?;
    entry_from_ladder(&w, mu, nu, h)
}

/// Every curvature entry at (λ, I), sharing the torus constructions.
pub fn curvature_form(family: &dyn HamiltonianFamily, lambda: &ParamPoint, action: f64, num: &Numerics) -> Result<CurvatureForm> {
    let (w, h) = generator_ladder(family, lambda, action, num)?;
    let n = family.n_params();
    let mut entries = vec![vec![0.0; n]; n];
    for mu in 0..n {
        for nu in mu + 1..n {
            entries[mu][nu] = entry_from_ladder(&w, mu, nu, h)?;
        }
    }
    Ok(CurvatureForm::from_upper(lambda.clone(), action, |mu, nu| entries[mu][nu]))
}

/// Diagonal expectation of ∂_μ𝒜_ν per unit n: ∂_μ c_0(∂W_ν/∂I).
pub fn verify_derivative_terms_vanish(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    mu: usize,
    nu: usize,
    num: &Numerics,
) -> Result<f64> {
    let h = lambda.fd_step(mu, num.fd_step);
    let secular = |l: &ParamPoint| -> Result<f64> {
        Ok(crate::agp::generator_stencil(family, l, action, nu, num)?.d_action().mean())
    };
    Ok((secular(&lambda.shifted(mu, h))? - secular(&lambda.shifted(mu, -h))?) / (2.0 * h))
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// center + cos(2πs)·a + sin(2πs)·b
    Ellipse { center: Vec<f64>, axis_a: Vec<f64>, axis_b: Vec<f64> },
    /// Trigonometric interpolant of sampled points, one series per coordinate.
    Sampled(Vec<AngleSeries>),
}

/// A closed curve λ(s), s ∈ [0, 1], with the sample count used by the line
/// integral.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPath {
    shape: Shape,
    samples: usize,
    turns: i32,
}

fn check_vectors(vs: &[&[f64]]) -> Result<usize> {
    let n = vs[0].len();
    if n == 0 || vs.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidParams("loop vectors must share a nonzero dimension".into()));
    }
    if vs.iter().flat_map(|v| v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("loop vectors must be finite".into()));
    }
    Ok(n)
}

impl LoopPath {
    pub fn ellipse(center: Vec<f64>, axis_a: Vec<f64>, axis_b: Vec<f64>, samples: usize) -> Result<Self> {
        check_vectors(&[&center, &axis_a, &axis_b])?;
        if samples < 4 {
            return Err(Error::InvalidParams("a loop needs at least 4 samples".into()));
        }
        Ok(Self {
            shape: Shape::Ellipse { center, axis_a, axis_b },
            samples,
            turns: 1,
        })
    }

    /// Loop through `points` (uniform in s, last point not repeated).
    pub fn sampled(points: &[Vec<f64>], samples: usize) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidParams("a sampled loop needs at least 4 points".into()));
        }
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        let dim = check_vectors(&refs)?;
        let order = (points.len() - 2) / 2;
        let series = (0..dim)
            .map(|c| fit_series(&points.iter().map(|p| p[c]).collect::<Vec<_>>(), order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            shape: Shape::Sampled(series),
            samples,
            turns: 1,
        })
    }

    /// A constant loop sitting at `point`.
    pub fn constant(point: Vec<f64>, samples: usize) -> Result<Self> {
        let zero = vec![0.0; point.len()];
        Self::ellipse(point, zero.clone(), zero, samples)
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        Self { turns: -self.turns, ..self.clone() }
    }

    /// Same curve traversed `k` times; the sample count scales with it.
    pub fn repeated(&self, k: i32) -> Self {
        Self {
            turns: self.turns * k,
            samples: self.samples * k.unsigned_abs() as usize,
            ..self.clone()
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Ellipse { center, .. } => center.len(),
            Shape::Sampled(s) => s.len(),
        }
    }

    fn angle(&self, s: f64) -> f64 {
        TAU * self.turns as f64 * s
    }

    pub fn point(&self, s: f64) -> Vec<f64> {
        let t = self.angle(s);
        match &self.shape {
            Shape::Ellipse { center, axis_a, axis_b } => (0..center.len())
                .map(|i| center[i] + t.cos() * axis_a[i] + t.sin() * axis_b[i])
                .collect(),
            Shape::Sampled(series) => series.iter().map(|c| c.evaluate(t)).collect(),
        }
    }

    /// dλ/ds.
    pub fn tangent(&self, s: f64) -> Vec<f64> {
        let t = self.angle(s);
        let k = TAU * self.turns as f64;
        match &self.shape {
            Shape::Ellipse { center, axis_a, axis_b } => (0..center.len())
                .map(|i| k * (-t.sin() * axis_a[i] + t.cos() * axis_b[i]))
                .collect(),
            Shape::Sampled(series) => series.iter().map(|c| k * c.derivative().evaluate(t)).collect(),
        }
    }

    pub fn closure_error(&self) -> f64 {
        let (a, b) = (self.point(0.0), self.point(1.0));
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Nodes s_j = j/N of the periodic trapezoid rule.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.samples).map(|j| j as f64 / self.samples as f64).collect()
    }
}

/// Spanning disc λ(u, v) = c + u(cos 2πv·a + sin 2πv·b). Its u = 1 edge,
/// traversed in v, is the ellipse loop with the same vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub center: Vec<f64>,
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
    pub order_u: usize,
    pub order_v: usize,
}

impl SurfacePatch {
    pub fn disc(center: Vec<f64>, axis_a: Vec<f64>, axis_b: Vec<f64>, order_u: usize, order_v: usize) -> Result<Self> {
        check_vectors(&[&center, &axis_a, &axis_b])?;
        if order_u == 0 || order_v == 0 {
            return Err(Error::InvalidParams("quadrature orders must be positive".into()));
        }
        Ok(Self {
            center,
            axis_a,
            axis_b,
            order_u,
            order_v,
        })
    }

    /// Disc spanning an ellipse loop.
    pub fn spanning(path: &LoopPath, order_u: usize, order_v: usize) -> Result<Self> {
        match &path.shape {
            Shape::Ellipse { center, axis_a, axis_b } if path.turns == 1 => {
                Self::disc(center.clone(), axis_a.clone(), axis_b.clone(), order_u, order_v)
            }
            _ => Err(Error::InvalidParams("only singly traversed ellipse loops have a built-in spanning disc".into())),
        }
    }

    /// Same patch with reversed orientation.
    pub fn flipped(&self) -> Self {
        Self {
            axis_b: self.axis_b.iter().map(|x| -x).collect(),
            ..self.clone()
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Vec<f64> {
        let (c, s) = ((TAU * v).cos(), (TAU * v).sin());
        (0..self.center.len())
            .map(|i| self.center[i] + u * (c * self.axis_a[i] + s * self.axis_b[i]))
            .collect()
    }

    /// (∂λ/∂u, ∂λ/∂v).
    pub fn jacobian(&self, u: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
        let (c, s) = ((TAU * v).cos(), (TAU * v).sin());
        let n = self.center.len();
        let du = (0..n).map(|i| c * self.axis_a[i] + s * self.axis_b[i]).collect();
        let dv = (0..n).map(|i| TAU * u * (-s * self.axis_a[i] + c * self.axis_b[i])).collect();
        (du, dv)
    }

    /// Largest distance between the u = 1 edge and the loop on its samples.
    pub fn boundary_mismatch(&self, path: &LoopPath) -> f64 {
        if path.dim() != self.center.len() {
            return f64::INFINITY;
        }
        path.nodes()
            .into_iter()
            .map(|s| {
                let (a, b) = (self.point(1.0, s), path.point(s));
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Quadrature nodes (u, v, weight).
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let (ru, rv) = (unit_rule(self.order_u), unit_rule(self.order_v));
        ru.iter()
            .flat_map(|&(u, wu)| rv.iter().map(move |&(v, wv)| (u, v, wu * wv)))
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        let (a, b) = (&self.axis_a, &self.axis_b);
        let n = a.len();
        (0..n).all(|i| (0..n).all(|j| a[i] * b[j] - a[j] * b[i] == 0.0))
    }
}

/// Origin points further apart than this fraction of the orbit size between
/// neighbouring loop samples count as a jump of the angle convention.
const ORIGIN_JUMP_FRACTION: f64 = 0.25;

/// One sample of the line integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub s: f64,
    /// ⟨∂_λφ⟩ · dλ/ds
    pub integrand: f64,
}

/// Δφ_Hannay = ∮⟨∂_λφ⟩·dλ by the periodic trapezoid rule on the loop.
pub fn hannay_angle_line(family: &dyn HamiltonianFamily, path: &LoopPath, action: f64, num: &Numerics) -> Result<f64> {
    let samples = hannay_line_samples(family, path, action, num)?;
    Ok(samples.iter().map(|x| x.integrand).sum::<f64>() / samples.len() as f64)
}

pub fn hannay_line_samples(
    family: &dyn HamiltonianFamily,
    path: &LoopPath,
    action: f64,
    num: &Numerics,
) -> Result<Vec<LineSample>> {
    if path.dim() != family.n_params() {
        return Err(Error::InvalidParams(format!(
            "loop dimension {} does not match the {} parameters of {}",
            path.dim(),
            family.n_params(),
            family.name()
        )));
    }
    let nodes = path.nodes();
    let per_node: Vec<Result<(LineSample, Vec<f64>, f64)>> = nodes
        .par_iter()
        .map(|&s| {
            let lambda = ParamPoint::new(path.point(s))?;
            let tangent = path.tangent(s);
            let mut integrand = 0.0;
            for (mu, &t) in tangent.iter().enumerate() {
                if t != 0.0 {
                    integrand += t * dphi_dlambda_avg(family, &lambda, action, mu, num)?;
                }
            }
            let grid = TorusGrid::build(family, &lambda, action, num)?;
            let origin = grid.points[0];
            let size = grid.points.iter().map(|z| z.distance(&origin)).fold(0.0, f64::max);
            Ok((LineSample { s, integrand }, vec![origin.q, origin.p], size))
        })
        .collect();
    let per_node = per_node.into_iter().collect::<Result<Vec<_>>>()?;
    for j in 0..per_node.len() {
        let (prev, cur) = (&per_node[(j + per_node.len() - 1) % per_node.len()], &per_node[j]);
        let jump = (prev.1[0] - cur.1[0]).hypot(prev.1[1] - cur.1[1]);
        if jump > ORIGIN_JUMP_FRACTION * cur.2.max(prev.2) {
            return Err(Error::ConventionMismatch {
                jump,
                context: format!("angle origin between loop samples at s = {} and s = {}", prev.0.s, cur.0.s),
            });
        }
    }
    Ok(per_node.into_iter().map(|x| x.0).collect())
}

/// Flux of a curvature field through the patch: Σ_{μ<ν} ∬ F_μν dλ_μ∧dλ_ν.
pub fn surface_flux<F>(surface: &SurfacePatch, field: F) -> Result<f64>
where
    F: Fn(&ParamPoint) -> Result<CurvatureForm> + Sync + Send,
{
    if surface.is_degenerate() {
        return Ok(0.0);
    }
    let nodes = surface.nodes();
    let terms = nodes
        .into_par_iter()
        .map(|(u, v, w)| {
            let lambda = ParamPoint::new(surface.point(u, v))?;
            let (du, dv) = surface.jacobian(u, v);
            Ok(w * field(&lambda)?.contract(&du, &dv))
        })
        .collect::<Vec<Result<f64>>>();
    let mut acc = 0.0;
    for t in terms {
        acc += t?;
    }
    Ok(acc)
}

/// Δφ_Hannay as the curvature flux through the patch.
pub fn hannay_angle_surface(
    family: &dyn HamiltonianFamily,
    surface: &SurfacePatch,
    action: f64,
    num: &Numerics,
) -> Result<f64> {
    if surface.center.len() != family.n_params() {
        return Err(Error::InvalidParams("surface dimension does not match the family".into()));
    }
    surface_flux(surface, |l| curvature_form(family, l, action, num))
}

/// Reference flux of the closed-form generalized-oscillator curvature.
pub fn genosc_hannay_surface_analytic(surface: &SurfacePatch) -> Result<f64> {
    surface_flux(surface, |l| genosc_curvature_analytic(GenOscParams::from_point(l)))
}

/// exp(−i n Δφ_Hannay).
pub fn kvn_phase(n: i64, hannay: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(n as f64) * hannay)
}

/// −n ⟨∂φ/∂λ_μ⟩.
pub fn wz_diagonal_potential(
    family: &dyn HamiltonianFamily,
    lambda: &ParamPoint,
    action: f64,
    n: i64,
    mu: usize,
    num: &Numerics,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    Ok(-(n as f64) * dphi_dlambda_avg(family, lambda, action, mu, num)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{GenOsc, Inert};

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn analytic_form_examples() {
        let f = genosc_curvature_analytic(GenOscParams::new(1.0, 0.0, 1.0)).unwrap();
        assert_eq!((f.entry(1, 2), f.entry(2, 0), f.entry(0, 1)), (0.25, 0.0, 0.25));
        let g = genosc_curvature_analytic(GenOscParams::new(2.0, 1.0, 1.0)).unwrap();
        assert_eq!((g.entry(1, 2), g.entry(2, 0), g.entry(0, 1)), (0.5, 0.25, 0.25));
        assert_eq!(g.entry(2, 1), -0.5);
        assert!(genosc_curvature_analytic(GenOscParams::new(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn analytic_form_scaling() {
        let base = genosc_curvature_analytic(GenOscParams::new(1.3, 0.2, 0.7)).unwrap();
        let c: f64 = 2.5;
        let scaled = genosc_curvature_analytic(GenOscParams::new(1.3 * c, 0.2 * c, 0.7 * c)).unwrap();
        assert!((scaled.entry(1, 2) - base.entry(1, 2) / c.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn numeric_entries_match_closed_form() {
        let l: ParamPoint = [1.0, 0.0, 1.0].into();
        assert!((curvature_entry(&GenOsc, &l, 1.0, 1, 2, &num()).unwrap() - 0.25).abs() < 1e-8);
        assert!(curvature_entry(&GenOsc, &l, 1.0, 2, 0, &num()).unwrap().abs() < 1e-8);
        assert_eq!(curvature_entry(&GenOsc, &l, 1.0, 1, 1, &num()).unwrap(), 0.0);
    }

    #[test]
    fn derivative_terms_vanish() {
        let l: ParamPoint = [1.4, 0.3, 0.9].into();
        assert!(verify_derivative_terms_vanish(&GenOsc, &l, 1.0, 0, 1, &num()).unwrap().abs() < 1e-8);
        let c = ParamPoint::new(vec![0.2]).unwrap();
        assert_eq!(verify_derivative_terms_vanish(&Inert, &c, 1.0, 0, 0, &num()).unwrap(), 0.0);
    }

    #[test]
    fn loop_closure_and_reversal() {
        let p = LoopPath::ellipse(vec![1.5, 0.0, 1.5], vec![0.3, 0.0, 0.0], vec![0.0, 0.0, 0.3], 16).unwrap();
        assert!(p.closure_error() < 1e-12);
        let r = p.reversed();
        assert!((r.point(0.25)[2] + p.point(0.25)[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_loop_reproduces_ellipse() {
        let e = LoopPath::ellipse(vec![1.0, 2.0], vec![0.5, 0.1], vec![-0.2, 0.3], 8).unwrap();
        let pts: Vec<Vec<f64>> = (0..16).map(|j| e.point(j as f64 / 16.0)).collect();
        let s = LoopPath::sampled(&pts, 8).unwrap();
        for t in [0.03, 0.41, 0.77] {
            for (a, b) in s.point(t).iter().zip(e.point(t)) {
                assert!((a - b).abs() < 1e-13);
            }
            for (a, b) in s.tangent(t).iter().zip(e.tangent(t)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_loop_has_no_angle() {
        let p = LoopPath::constant(vec![1.0, 0.2, 1.3], 8).unwrap();
        assert_eq!(hannay_angle_line(&GenOsc, &p, 1.0, &num()).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_patch_is_zero() {
        let s = SurfacePatch::disc(vec![1.0, 0.0, 1.0], vec![0.1, 0.0, 0.0], vec![0.2, 0.0, 0.0], 4, 4).unwrap();
        assert_eq!(hannay_angle_surface(&GenOsc, &s, 1.0, &num()).unwrap(), 0.0);
    }

    #[test]
    fn line_and_surface_agree_on_a_tilted_disc() {
        let path = LoopPath::ellipse(vec![1.5, 0.3, 1.5], vec![0.3, 0.0, 0.0], vec![0.0, 0.3, 0.0], 32).unwrap();
        let surf = SurfacePatch::spanning(&path, 12, 12).unwrap();
        let line = hannay_angle_line(&GenOsc, &path, 1.0, &num()).unwrap();
        let flux = hannay_angle_surface(&GenOsc, &surf, 1.0, &num()).unwrap();
        let exact = genosc_hannay_surface_analytic(&surf).unwrap();
        assert!((line - exact).abs() < 1e-6 * exact.abs(), "{line} vs {exact}");
        assert!((flux - exact).abs() < 1e-6 * exact.abs(), "{flux} vs {exact}");
        let back = genosc_hannay_surface_analytic(&surf.flipped()).unwrap();
        assert!((back + exact).abs() < 1e-14);
    }

    #[test]
    fn kvn_phase_examples() {
        assert_eq!(kvn_phase(0, 1.234), Complex64::new(1.0, 0.0));
        assert!((kvn_phase(1, std::f64::consts::PI) + 1.0).norm() < 1e-15);
        assert!((kvn_phase(7, 0.3).norm() - 1.0).abs() < 1e-15);
        assert!((kvn_phase(2, 0.3) - kvn_phase(1, 0.3).powi(2)).norm() < 1e-15);
    }

    #[test]
    fn potential_is_linear_in_n() {
        let l: ParamPoint = [1.2, 0.1, 0.8].into();
        let a1 = wz_diagonal_potential(&GenOsc, &l, 1.0, 1, 1, &num()).unwrap();
        let a2 = wz_diagonal_potential(&GenOsc, &l, 1.0, 2, 1, &num()).unwrap();
        assert!((a2 - 2.0 * a1).abs() < 1e-14);
        assert_eq!(wz_diagonal_potential(&GenOsc, &l, 1.0, 0, 1, &num()).unwrap(), 0.0);
    }
}
