//! Subcommand runners: each writes one CSV and returns its checks.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use hannay_core::actionangle::{di_dlambda_avg, Numerics, ANGLE_ORIGIN};
use hannay_core::agp::{
    agp_element, agp_element_direct, berry_simon_diagonal, extrapolate_horizon, gauge_generator, generator_stencil,
    genosc_generator_c2, param_derivative_series, timeavg_sweep,
};
use hannay_core::dynamics::{
    appendix_identity_check, dynamical_hannay, parallel_transport_check, DriftProtocol, RunSettings,
};
use hannay_core::family::{GenOscParams, HamiltonianFamily, ParamPoint};
use hannay_core::fourier::poisson_bracket;
use hannay_core::holonomy::{
    curvature_form, genosc_curvature_analytic, genosc_hannay_surface_analytic, hannay_angle_line, hannay_angle_surface,
    kvn_phase, verify_derivative_terms_vanish, LoopPath,
};

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Surface boundaries further than this (relative to the loop size) from
/// the loop are rejected.
const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    Hannay,
    Agp,
    Verify,
    GenoscTable,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Hannay => "hannay",
            Command::Agp => "agp",
            Command::Verify => "verify",
            Command::GenoscTable => "genosc-table",
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            Command::GenoscTable => "genosc_table",
            c => c.name(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] hannay_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Numerical(hannay_core::Error::InvalidParams(_)) => EXIT_CONFIG,
            RunError::Numerical(_) | RunError::Io(_) => EXIT_NUMERIC,
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Validation(vec![msg.into()]))
}

/// One comparison; failures are reported as JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub expected: f64,
    pub got: f64,
    pub tolerance: f64,
    #[serde(skip)]
    pub passed: bool,
}

impl Check {
    fn absolute(check: String, expected: f64, got: f64, tolerance: f64) -> Self {
        let passed = (got - expected).abs() <= tolerance;
        Self { check, expected, got, tolerance, passed }
    }

    /// Passes when `got` ≥ `expected − tolerance`.
    fn at_least(check: String, expected: f64, got: f64, tolerance: f64) -> Self {
        let passed = got >= expected - tolerance;
        Self { check, expected, got, tolerance, passed }
    }

    /// Relative when |expected| ≥ `floor`, absolute at `floor·rel` below.
    fn relative(check: String, expected: f64, got: f64, rel: f64, floor: f64) -> Self {
        Self::absolute(check, expected, got, rel * expected.abs().max(floor))
    }
}

#[derive(Debug)]
pub struct Report {
    pub csv: PathBuf,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn exit_code(&self) -> u8 {
        if self.failures().next().is_some() {
            EXIT_CHECK
        } else {
            EXIT_OK
        }
    }

    pub fn failure_lines(&self) -> String {
        self.failures()
            .map(|c| serde_json::to_string(c).expect("check serializes") + "\n")
            .collect()
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: ToString>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, hash: &str) -> String {
        let mut s = format!("# config_sha256={hash}; angle_origin={ANGLE_ORIGIN}\n");
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip text, scientific outside [1e-4, 1e6).
fn cell(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn lambda_cells(l: &ParamPoint) -> Vec<String> {
    l.values().iter().map(|&x| cell(x)).collect()
}

fn lambda_header(family: &dyn HamiltonianFamily) -> Vec<String> {
    family.param_names().iter().map(|n| format!("lambda_{n}")).collect()
}

fn lambda_label(l: &ParamPoint) -> String {
    let mut s = String::new();
    for (j, x) in l.values().iter().enumerate() {
        let _ = write!(s, "{}{x}", if j == 0 { "" } else { "," });
    }
    s
}

fn hannay_agree(name: String, reference: f64, got: f64, cfg: &RunConfig) -> Check {
    let t = &cfg.tolerances;
    if reference.abs() >= t.hannay_abs {
        Check::relative(name, reference, got, t.hannay_rel, 0.0)
    } else {
        Check::absolute(name, reference, got, t.hannay_abs)
    }
}

fn collect<T: Send>(v: Vec<hannay_core::Result<T>>) -> hannay_core::Result<Vec<T>> {
    v.into_iter().collect()
}

/// Runs `cmd` and writes `<out>/<name>.csv` (and failures, if any).
pub fn run_subcommand(cfg: &RunConfig, cmd: Command, out: &Path) -> Result<Report, RunError> {
    let family = cfg.family().ok_or_else(|| invalid(format!("unknown family \"{}\"", cfg.family)))?;
    let num = cfg.numerics();
    log::info!("{} on {} with config {}", cmd.name(), cfg.family, cfg.hash());
    let (table, checks) = match cmd {
        Command::Curvature => curvature(cfg, family.as_ref(), &num)?,
        Command::Hannay => hannay(cfg, family.as_ref(), &num)?,
        Command::Agp => agp(cfg, family.as_ref(), &num)?,
        Command::Verify => verify(cfg, family.as_ref(), &num)?,
        Command::GenoscTable => genosc_table(cfg, family.as_ref(), &num)?,
    };
    fs::create_dir_all(out)?;
    let csv = out.join(format!("{}.csv", cmd.file_stem()));
    fs::write(&csv, table.render(&cfg.hash()))?;
    let report = Report { csv, checks };
    let failures = out.join(format!("{}_failures.jsonl", cmd.file_stem()));
    if report.exit_code() == EXIT_OK {
        if failures.exists() {
            fs::remove_file(&failures)?;
        }
    } else {
        fs::write(&failures, report.failure_lines())?;
    }
    Ok(report)
}

fn genosc_point(family: &dyn HamiltonianFamily, l: &ParamPoint) -> Option<GenOscParams> {
    (family.name() == "genosc").then(|| GenOscParams::from_point(l))
}

fn curvature(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<(Table, Vec<Check>), RunError> {
    let jobs: Vec<(ParamPoint, f64)> = cfg
        .curvature_points()
        .into_iter()
        .flat_map(|l| cfg.actions.iter().map(move |&i| (l.clone(), i)))
        .collect();
    let forms = collect(jobs.par_iter().map(|(l, i)| curvature_form(family, l, *i, num)).collect())?;
    let names = family.param_names();
    let mut t = Table::new(
        lambda_header(family)
            .into_iter()
            .chain(["I", "mu", "nu", "value_numeric", "value_analytic"].map(String::from)),
    );
    let mut checks = Vec::new();
    for ((l, i), f) in jobs.iter().zip(&forms) {
        let analytic = genosc_point(family, l).map(genosc_curvature_analytic).transpose()?;
        let scale = analytic
            .as_ref()
            .map(|a| (0..a.dim()).flat_map(|m| (0..a.dim()).map(move |n| (m, n))).map(|(m, n)| a.entry(m, n).abs()).fold(0.0, f64::max))
            .unwrap_or(0.0);
        for mu in 0..f.dim() {
            for nu in mu + 1..f.dim() {
                let mut row = lambda_cells(l);
                row.extend([cell(*i), names[mu].into(), names[nu].into(), cell(f.entry(mu, nu))]);
                match &analytic {
                    Some(a) => {
                        row.push(cell(a.entry(mu, nu)));
                        checks.push(Check::relative(
                            format!("curvature[{}; I={i}]({},{})", lambda_label(l), names[mu], names[nu]),
                            a.entry(mu, nu),
                            f.entry(mu, nu),
                            cfg.tolerances.curvature,
                            scale,
                        ));
                    }
                    None => row.push(String::new()),
                }
                t.push(row);
            }
        }
    }
    Ok((t, checks))
}

fn require_loop(cfg: &RunConfig, what: &str) -> Result<LoopPath, RunError> {
    cfg.path()?.ok_or_else(|| invalid(format!("{what} needs a [loop] table")))
}

fn hannay(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<(Table, Vec<Check>), RunError> {
    let path = require_loop(cfg, "hannay")?;
    let surface = cfg.surface()?;
    if let Some(s) = &surface {
        let size = path
            .nodes()
            .iter()
            .map(|&u| path.point(u).iter().zip(path.point(0.0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
            .max(1.0);
        let mismatch = s.boundary_mismatch(&path);
        if mismatch > BOUNDARY_TOLERANCE * size {
            return Err(invalid(format!(
                "surface boundary does not match the loop (largest distance {mismatch:.3e})"
            )));
        }
    } else {
        log::warn!("no spanning surface for a sampled loop; only the line route runs");
    }
    let mut t = Table::new(["route", "I", "n", "angle", "phase_re", "phase_im"]);
    let mut checks = Vec::new();
    let per_action = collect(
        cfg.actions
            .par_iter()
            .map(|&i| {
                let line = hannay_angle_line(family, &path, i, num)?;
                let surf = surface.as_ref().map(|s| hannay_angle_surface(family, s, i, num)).transpose()?;
                let closed = match (&surface, family.name()) {
                    (Some(s), "genosc") => Some(genosc_hannay_surface_analytic(s)?),
                    _ => None,
                };
                Ok((i, line, surf, closed))
            })
            .collect(),
    )?;
    for (i, line, surf, closed) in per_action {
        let routes = [("line", Some(line)), ("surface", surf), ("closed_form", closed)];
        for (route, angle) in routes {
            let Some(angle) = angle else { continue };
            for &n in &cfg.n_values {
                let phase = kvn_phase(n, angle);
                t.push(vec![route.into(), cell(i), n.to_string(), cell(angle), cell(phase.re), cell(phase.im)]);
            }
        }
        let reference = closed.or(surf);
        if let Some(r) = reference {
            checks.push(hannay_agree(format!("hannay[I={i}] line vs reference"), r, line, cfg));
            if let (Some(s), Some(_)) = (surf, closed) {
                checks.push(hannay_agree(format!("hannay[I={i}] surface vs closed form"), r, s, cfg));
            }
        }
    }
    Ok((t, checks))
}

fn agp(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<(Table, Vec<Check>), RunError> {
    let l = cfg.lambda();
    let jobs: Vec<(f64, usize)> = cfg
        .actions
        .iter()
        .flat_map(|&i| (0..family.n_params()).map(move |mu| (i, mu)))
        .collect();
    let pairs: Vec<(i64, i64)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| cfg.agp.m_values.iter().map(move |&m| (m, n)))
        .filter(|(m, n)| m != n)
        .collect();
    if pairs.is_empty() {
        return Err(invalid("agp needs at least one pair with m != n"));
    }
    let per_job = collect(
        jobs.par_iter()
            .map(|&(i, mu)| {
                let omega = param_derivative_series(family, &l, i, mu, num)?.1;
                let horizons: Vec<f64> = cfg.agp.horizons.iter().map(|t| t / omega).collect();
                pairs
                    .iter()
                    .map(|&(m, n)| {
                        let gen = agp_element(family, &l, i, m, n, mu, num)?;
                        let direct = agp_element_direct(family, &l, i, m, n, mu, num)?;
                        let (vals, w) = timeavg_sweep(family, &l, i, m, n, mu, &horizons, num)?;
                        let avg = extrapolate_horizon(&horizons, &vals, (n - m) as f64 * w)?;
                        Ok((m, n, gen, direct, avg))
                    })
                    .collect::<hannay_core::Result<Vec<_>>>()
            })
            .collect(),
    )?;
    let names = family.param_names();
    let mut t = Table::new(
        lambda_header(family)
            .into_iter()
            .chain(["I", "mu", "m", "n", "re", "im", "route"].map(String::from)),
    );
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    for ((i, mu), elems) in jobs.iter().zip(per_job) {
        for (m, n, gen, direct, avg) in elems {
            for (route, v) in [("generator", gen), ("direct", direct), ("timeavg", avg)] {
                let mut row = lambda_cells(&l);
                row.extend([cell(*i), names[*mu].into(), m.to_string(), n.to_string(), cell(v.re), cell(v.im), route.into()]);
                t.push(row);
            }
            let tag = format!("agp[I={i}; {}; m={m}, n={n}]", names[*mu]);
            checks.push(Check::absolute(format!("{tag} timeavg vs direct"), 0.0, (avg - direct).norm(), tol.timeavg));
            // the generator route differs from the others by ∂ω/∂I terms
            if family.name() == "genosc" {
                checks.push(Check::absolute(format!("{tag} generator vs direct"), 0.0, (gen - direct).norm(), tol.agp));
            }
        }
    }
    Ok((t, checks))
}

fn is_constant(path: &LoopPath) -> bool {
    let p0 = path.point(0.0);
    path.nodes().iter().all(|&s| path.point(s) == p0) && path.tangent(0.0).iter().all(|&x| x == 0.0)
}

/// Identities at the `[params]` point that hold for any family.
fn identity_checks(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<Vec<Check>, RunError> {
    let l = cfg.lambda();
    let tol = &cfg.tolerances;
    let names = family.param_names();
    let dim = family.n_params();
    let i = cfg.actions[0];
    let mut checks = Vec::new();
    for mu in 0..dim {
        let got = di_dlambda_avg(family, &l, i, mu, num)?;
        checks.push(Check::absolute(format!("liouville <dI/d{}>", names[mu]), 0.0, got, tol.liouville));
        for &n in &cfg.n_values {
            let got = berry_simon_diagonal(family, &l, i, n, mu, num)?;
            checks.push(Check::absolute(format!("diagonal agp[n={n}; {}]", names[mu]), 0.0, got, tol.berry_simon));
        }
        for nu in 0..dim {
            let got = verify_derivative_terms_vanish(family, &l, i, mu, nu, num)?;
            checks.push(Check::absolute(
                format!("derivative term d_{} A_{}", names[mu], names[nu]),
                0.0,
                got,
                tol.derivative_terms,
            ));
            if mu < nu {
                let (lhs, rhs) = appendix_identity_check(family, &l, i, mu, nu, num)?;
                checks.push(Check::relative(
                    format!("bracket identity ({},{})", names[mu], names[nu]),
                    rhs,
                    lhs,
                    tol.appendix,
                    1.0,
                ));
            }
        }
        let h = 1e-3 * l[mu].abs().max(1.0);
        let a = parallel_transport_check(family, &l, i, mu, h, num)?;
        let b = parallel_transport_check(family, &l, i, mu, h / 2.0, num)?;
        if a.lie_residual > 0.0 && b.lie_residual > 0.0 {
            // symmetric points can cancel the h² term, so higher orders pass
            checks.push(Check::at_least(
                format!("transport order along {}", names[mu]),
                2.0,
                (a.lie_residual / b.lie_residual).log2(),
                tol.order,
            ));
        }
        checks.push(Check::absolute(
            format!("transport mean drift along {}", names[mu]),
            0.0,
            a.mean_drift,
            h * h,
        ));
    }
    Ok(checks)
}

fn verify(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<(Table, Vec<Check>), RunError> {
    let path = require_loop(cfg, "verify")?;
    let d = &cfg.dynamics;
    let protocol = DriftProtocol {
        epsilons: d.epsilons.clone(),
        phases: d.phases,
        tolerance: cfg.tolerances.hannay_abs,
        run: RunSettings {
            samples_per_period: d.samples_per_period,
            energy_tolerance: cfg.tolerances.energy,
        },
    };
    let mut t = Table::new([
        "row",
        "I",
        "epsilon",
        "phi0",
        "I_drift_max",
        "dynamical_phase",
        "geometric_drift",
        "extrapolated_hannay",
        "error_bar",
        "residual",
    ]);
    let mut checks = Vec::new();
    let constant = is_constant(&path);
    for &i in &cfg.actions {
        let est = dynamical_hannay(family, &path, i, &protocol, num)?;
        let line = hannay_angle_line(family, &path, i, num)?;
        for r in &est.runs {
            t.push(vec![
                "run".into(),
                cell(i),
                cell(r.epsilon),
                cell(r.initial.angle),
                cell(r.max_action_drift),
                cell(r.dynamical_phase),
                cell(r.geometric_drift),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        t.push(vec![
            "summary".into(),
            cell(i),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            cell(est.hannay),
            cell(est.error_bar),
            cell(est.hannay - line),
        ]);
        checks.push(hannay_agree(format!("dynamics[I={i}] vs line route"), line, est.hannay, cfg));
        if !constant {
            checks.push(Check::absolute(
                format!("adiabatic invariance exponent[I={i}]"),
                1.0,
                est.invariance_exponent()?,
                cfg.tolerances.order,
            ));
        }
    }
    checks.extend(identity_checks(cfg, family, num)?);
    Ok((t, checks))
}

fn genosc_table(cfg: &RunConfig, family: &dyn HamiltonianFamily, num: &Numerics) -> Result<(Table, Vec<Check>), RunError> {
    if family.name() != "genosc" {
        return Err(invalid(format!("genosc-table needs family \"genosc\", got \"{}\"", cfg.family)));
    }
    let names = family.param_names();
    let jobs: Vec<(ParamPoint, f64)> = cfg
        .curvature_points()
        .into_iter()
        .flat_map(|l| cfg.actions.iter().map(move |&i| (l.clone(), i)))
        .collect();
    type Rows = Vec<(String, f64, f64, f64)>;
    let per_job = collect(
        jobs.par_iter()
            .map(|(l, i)| -> hannay_core::Result<Rows> {
                let p = GenOscParams::from_point(l);
                let tol = &cfg.tolerances;
                let mut rows = Vec::new();
                let c2 = genosc_generator_c2(p, *i)?;
                for mu in 0..3 {
                    let w = gauge_generator(family, l, *i, mu, num)?.series.coeff(2);
                    rows.push((format!("W_{}.c2.re", names[mu]), w.re, c2[mu].re, tol.generator));
                    rows.push((format!("W_{}.c2.im", names[mu]), w.im, c2[mu].im, tol.generator));
                }
                let f = genosc_curvature_analytic(p)?;
                let numeric = curvature_form(family, l, *i, num)?;
                let stencils = (0..3)
                    .map(|mu| generator_stencil(family, l, *i, mu, num))
                    .collect::<hannay_core::Result<Vec<_>>>()?;
                for (mu, nu) in [(0, 1), (0, 2), (1, 2)] {
                    let b = poisson_bracket(&stencils[mu], &stencils[nu])?.mean();
                    let want = i * f.entry(mu, nu);
                    let scale = i * f.entry(0, 1).abs().max(f.entry(0, 2).abs()).max(f.entry(1, 2).abs());
                    rows.push((
                        format!("bracket({},{})", names[mu], names[nu]),
                        b,
                        want,
                        tol.bracket * want.abs().max(scale),
                    ));
                    rows.push((
                        format!("curvature({},{})", names[mu], names[nu]),
                        numeric.entry(mu, nu),
                        f.entry(mu, nu),
                        tol.curvature * f.entry(mu, nu).abs().max(scale / i),
                    ));
                }
                Ok(rows)
            })
            .collect(),
    )?;
    let mut t = Table::new(
        ["quantity".to_string()]
            .into_iter()
            .chain(lambda_header(family))
            .chain(["I", "numeric", "analytic", "abs_diff"].map(String::from)),
    );
    let mut checks = Vec::new();
    for ((l, i), rows) in jobs.iter().zip(per_job) {
        for (q, got, want, tol) in rows {
            let mut row = vec![q.clone()];
            row.extend(lambda_cells(l));
            row.extend([cell(*i), cell(got), cell(want), cell((got - want).abs())]);
            t.push(row);
            checks.push(Check::absolute(format!("{q}[{}; I={i}]", lambda_label(l)), want, got, tol));
        }
    }
    Ok((t, checks))
}
