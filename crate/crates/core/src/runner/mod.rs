//! Batch front end: load a scenario, run the configured checks in parallel,
//! and write `report.txt` plus one CSV per diagnostic series.
//!
//! Exit codes: 0 when every check passes, 1 when some check fails, 2 on a
//! configuration or runtime error. Report lines are ordered by check id.

mod config;

pub use config::{parse_config, CheckId, ConfigError, RunConfig, SampleConfig, ScenarioSource, Tolerances};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::comparison::{self, orthonormal_basis, DistanceOptions, SampleSpec};
use crate::congruence::{
    integrate_geodesic, parallel_frame, quotient_invariance_residual, EndomorphismSeries, FrameField,
    GeodesicCharacter, GeodesicOptions, GeodesicTrajectory,
};
use crate::jacobi::{
    detect_conjugate, integrate_jacobi, kinematics, mean_curvature_evolution, point_congruence,
    raychaudhuri_residual, CurvatureSource, GeodesicSource, JacobiOptions, Mask, DEFAULT_COLLAR,
    DEFAULT_ZERO_RADIUS,
};
use crate::manifold::{self, PointGeometry};
use crate::ode::OdeOptions;
use crate::scenario::{self, Basis, DeclaredGeodesic, MetricSpec, Scenario, ScenarioSpec};

/// Raychaudhuri and mean-curvature residual bound.
pub const RESIDUAL_TOL: f64 = 5e-5;
pub const LAGRANGE_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-6;
/// Bound comparisons in the f-Laplacian check.
pub const BOUND_TOL: f64 = 1e-6;
/// Required `|θ_f|` next to a detected zero of `det A`.
pub const BLOWUP_THETA: f64 = 1e3;
/// Random draws in the CLI Schwarz check.
pub const SCHWARZ_DRAWS: usize = 100_000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario: {0}")]
    Scenario(#[from] scenario::ScenarioError),
    #[error("cannot read scenario file {path}: {message}")]
    ScenarioFile { path: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One CSV file with the fixed diagnostic column order.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSeries {
    pub name: String,
    pub rows: Vec<[f64; 7]>,
    pub mask: Vec<bool>,
}

pub const CSV_HEADER: &str = "t,theta_f,theta,det_A,tr_sigma2,tr_omega2,residual,mask";

impl CsvSeries {
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 96);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (row, &masked) in self.rows.iter().zip(&self.mask) {
            for v in row {
                // `{:?}` is the shortest decimal form that round-trips
                let _ = write!(out, "{v:?},");
            }
            out.push_str(if masked { "1\n" } else { "0\n" });
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub id: CheckId,
    pub basis: Basis,
    pub pass: bool,
    pub summary: String,
    pub details: Vec<String>,
    pub csv: Vec<CsvSeries>,
}

#[derive(Clone, Debug)]
pub struct CheckFailure {
    pub id: CheckId,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub outcomes: Vec<CheckOutcome>,
    pub errors: Vec<CheckFailure>,
    pub exit_code: i32,
    pub report: String,
}

pub fn basis_label(b: Basis) -> &'static str {
    match b {
        Basis::ClosedForm => "closed-form",
        Basis::NumericalOracle => "numerical-oracle",
        Basis::PublishedExample => "published-example",
    }
}

fn check_basis(id: CheckId) -> Basis {
    match id {
        CheckId::CurvatureSymmetries
        | CheckId::LagrangeDefect
        | CheckId::TraceIdentity
        | CheckId::FGeneric
        | CheckId::Schwarz
        | CheckId::Manifest => Basis::ClosedForm,
        CheckId::Example7Certification => Basis::PublishedExample,
        _ => Basis::NumericalOracle,
    }
}

pub fn load_scenario(source: &ScenarioSource) -> Result<Scenario, RunError> {
    match source {
        ScenarioSource::Builtin(name) => Ok(scenario::builtin(name)?),
        ScenarioSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| RunError::ScenarioFile {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| RunError::ScenarioFile {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(Scenario::load(spec)?)
        }
    }
}

/// Shared inputs of all checks in a run.
pub struct Context {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub jacobi: JacobiOptions,
    pub geodesic: GeodesicOptions,
    pub sample: SampleSpec,
}

impl Context {
    pub fn new(scenario: Scenario, config: RunConfig) -> Self {
        let tol = config.tolerances;
        let jacobi = JacobiOptions {
            ode: OdeOptions::with_tolerances(tol.rtol, tol.atol),
            sample_dt: tol.sample_dt,
        };
        let geodesic = GeodesicOptions::default();
        let points = match &config.sample.points {
            Some(p) => p.expand(),
            None => {
                let s = &config.sample;
                let steps = ((s.t_max - s.t_min) / s.t_step + 1e-9).floor() as usize;
                (0..=steps)
                    .map(|i| scenario.reference_point(s.t_min + s.t_step * i as f64))
                    .filter(|p| scenario.metric.domain_violation(p).is_none())
                    .collect()
            }
        };
        let mut sample = SampleSpec::new(points)
            .with_counts(config.sample.timelike_per_point, config.sample.null_per_point)
            .with_seed(config.seed)
            .with_normalization(config.sample.normalization);
        sample.chi_max = config.sample.chi_max;
        Context {
            scenario,
            config,
            jacobi,
            geodesic,
            sample,
        }
    }

    fn source(&self, g: &DeclaredGeodesic) -> Result<Arc<GeodesicSource>, String> {
        GeodesicSource::new(
            &self.scenario.metric,
            &self.scenario.weight,
            &g.p0,
            &DVector::from_row_slice(&g.v0),
            g.range.0,
        )
        .map(Arc::new)
        .map_err(|e| format!("{}: {e}", g.label))
    }

    fn frame(&self, g: &DeclaredGeodesic) -> Result<(GeodesicTrajectory, FrameField), String> {
        let geo = integrate_geodesic(
            &self.scenario.metric,
            &g.p0,
            &DVector::from_row_slice(&g.v0),
            g.range,
            &self.geodesic,
        )
        .map_err(|e| format!("{}: {e}", g.label))?;
        let frame = parallel_frame(&self.scenario.metric, &geo, &self.geodesic)
            .map_err(|e| format!("{}: {e}", g.label))?;
        Ok((geo, frame))
    }

    /// Declared geodesics with at least one transverse direction.
    fn curves(&self) -> impl Iterator<Item = &DeclaredGeodesic> {
        let n = self.scenario.dim();
        self.scenario.spec.geodesics.iter().filter(move |g| {
            let null = self
                .scenario
                .metric
                .inner(&g.p0, &DVector::from_row_slice(&g.v0), &DVector::from_row_slice(&g.v0))
                .abs()
                <= 1e-9 * g.v0.iter().map(|x| x * x).sum::<f64>();
            if null {
                n > 2
            } else {
                n > 1
            }
        })
    }
}

struct Partial {
    pass: bool,
    summary: String,
    details: Vec<String>,
    csv: Vec<CsvSeries>,
}

impl Partial {
    fn new(pass: bool, summary: String) -> Self {
        Partial {
            pass,
            summary,
            details: Vec::new(),
            csv: Vec::new(),
        }
    }
}

type CheckResult = Result<Partial, String>;

fn fmt_e(x: f64) -> String {
    format!("{x:.3e}")
}

fn check_manifest(ctx: &Context) -> CheckResult {
    let claims = ctx.scenario.validate_manifest().map_err(|e| e.to_string())?;
    let pass = claims.iter().all(|c| c.pass);
    let mut p = Partial::new(pass, format!("{} manifest values re-evaluated", claims.len()));
    for c in claims {
        p.details.push(format!(
            "{} [{}] expected {:?} computed {:?} {}",
            c.id,
            basis_label(c.basis),
            c.expected,
            c.computed,
            if c.pass { "ok" } else { "MISMATCH" }
        ));
    }
    Ok(p)
}

fn check_curvature_symmetries(ctx: &Context) -> CheckResult {
    let metric = &ctx.scenario.metric;
    let tol = if metric.mode().is_analytic() { 1e-7 } else { 1e-4 };
    let mut worst_sym: f64 = 0.0;
    let mut worst_ric: f64 = 0.0;
    let mut signature_failures = 0;
    let points = ctx.sample.points.expand();
    for p in &points {
        if manifold::check_lorentzian(metric, p).is_err() {
            signature_failures += 1;
            continue;
        }
        let geo = PointGeometry::at(metric, p, true).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max(geo.riemann().lowered(&geo.g).symmetry_residual());
        let ric = geo.riemann().ricci();
        worst_ric = worst_ric.max((&ric - ric.transpose()).amax());
    }
    let pass = signature_failures == 0 && worst_sym <= tol && worst_ric <= 1e-8;
    Ok(Partial::new(
        pass,
        format!(
            "{} points: symmetry/Bianchi residual {} (tol {}), Ricci asymmetry {}, signature failures {}",
            points.len(),
            fmt_e(worst_sym),
            fmt_e(tol),
            fmt_e(worst_ric),
            signature_failures
        ),
    ))
}

fn check_geodesic_residual(ctx: &Context) -> CheckResult {
    let rows = ctx
        .scenario
        .check_declared_geodesics(&ctx.geodesic)
        .map_err(|e| e.to_string())?;
    let pass = rows.iter().all(|(_, drift, res)| *drift <= 1e-8 && *res <= 1e-6);
    let mut p = Partial::new(pass, format!("{} declared geodesics", rows.len()));
    for (label, drift, res) in rows {
        p.details
            .push(format!("{label}: norm drift {} geodesic residual {}", fmt_e(drift), fmt_e(res)));
    }
    Ok(p)
}

fn check_frame(ctx: &Context) -> CheckResult {
    let metric = &ctx.scenario.metric;
    let mut pass = true;
    let mut details = Vec::new();
    for g in ctx.curves() {
        let (_, frame) = ctx.frame(g)?;
        let drift = frame.max_drift(metric);
        let transport = frame.transport_residual(metric).map_err(|e| e.to_string())?;
        let series = EndomorphismSeries::build(metric, &ctx.scenario.weight, &frame).map_err(|e| e.to_string())?;
        let asym = series.max_asymmetry();
        let mut ok = drift <= 1e-8 && transport <= 1e-6 && asym <= 1e-7;
        let mut line = format!(
            "{}: gram drift {} transport residual {} R asymmetry {}",
            g.label,
            fmt_e(drift),
            fmt_e(transport),
            fmt_e(asym)
        );
        if frame.character == GeodesicCharacter::Null {
            let stride = (frame.t.len() / 50).max(1);
            let mut q: f64 = 0.0;
            for i in (0..frame.t.len()).step_by(stride) {
                q = q.max(quotient_invariance_residual(metric, &frame, i).map_err(|e| e.to_string())?);
            }
            ok &= q <= 1e-7;
            let _ = write!(line, " quotient invariance {}", fmt_e(q));
        }
        if !frame.reorthonormalized_at.is_empty() {
            let _ = write!(line, " (re-orthonormalized {} times)", frame.reorthonormalized_at.len());
        }
        pass &= ok;
        details.push(line);
    }
    let mut p = Partial::new(pass, format!("{} frames", details.len()));
    p.details = details;
    Ok(p)
}

fn check_raychaudhuri(ctx: &Context) -> CheckResult {
    let m = ctx.scenario.params.m;
    let mut pass = true;
    let mut details = Vec::new();
    let mut csv = Vec::new();
    for g in ctx.curves() {
        let src = ctx.source(g)?;
        let traj = point_congruence(src, g.range.0, g.range.1, &ctx.jacobi).map_err(|e| format!("{}: {e}", g.label))?;
        let diag = kinematics(&traj);
        let zeros: Vec<f64> = detect_conjugate(&traj)
            .map_err(|e| e.to_string())?
            .zeros
            .iter()
            .map(|z| z.t)
            .collect();
        let mask = Mask::standard(g.range.0, DEFAULT_COLLAR, &zeros, DEFAULT_ZERO_RADIUS);
        let rep = raychaudhuri_residual(&diag, m, &mask).map_err(|e| format!("{}: {e}", g.label))?;
        let ric_fm = diag.ric_fm(m);
        let hypothesis = (0..diag.t.len())
            .filter(|&i| rep.residual[i].is_some())
            .all(|i| ric_fm[i] >= -1e-9);
        let slack_ok = (0..diag.t.len()).all(|i| match rep.inequality_slack[i] {
            Some(s) => s >= -1e-8 * diag.theta_f[i].powi(2).max(1.0),
            None => true,
        });
        let ok = rep.max_abs_residual <= RESIDUAL_TOL && (!hypothesis || slack_ok);
        pass &= ok;
        details.push(format!(
            "{}: max |residual| {} over {} samples, min inequality slack {}{}",
            g.label,
            fmt_e(rep.max_abs_residual),
            rep.evaluated,
            fmt_e(rep.min_slack),
            if hypothesis { " (Ric_f^m >= 0 holds, slack required nonnegative)" } else { "" }
        ));
        csv.push(CsvSeries {
            name: format!("raychaudhuri_{}", g.label),
            rows: (0..diag.t.len())
                .map(|i| {
                    [
                        diag.t[i],
                        diag.theta_f[i],
                        diag.theta[i],
                        diag.det_a[i],
                        diag.tr_sigma2[i],
                        diag.tr_omega2[i],
                        rep.residual[i].unwrap_or(f64::NAN),
                    ]
                })
                .collect(),
            mask: rep.residual.iter().map(Option::is_none).collect(),
        });
    }
    let mut p = Partial::new(pass, format!("{} congruences, tolerance {}", details.len(), fmt_e(RESIDUAL_TOL)));
    p.details = details;
    p.csv = csv;
    Ok(p)
}

fn check_lagrange(ctx: &Context) -> CheckResult {
    let mut pass = true;
    let mut details = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    for g in ctx.curves() {
        let src: Arc<dyn CurvatureSource> = ctx.source(g)?;
        let k = src.rank();
        let traj = point_congruence(Arc::clone(&src), g.range.0, g.range.1, &ctx.jacobi)
            .map_err(|e| format!("{}: {e}", g.label))?;
        let point_defect = traj.max_lagrange_defect();
        let ap0 = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let general = integrate_jacobi(src, &DMatrix::identity(k, k), &ap0, g.range.0, g.range.1, &ctx.jacobi)
            .map_err(|e| format!("{}: {e}", g.label))?;
        let d0 = general.lagrange_defect_at(0);
        let drift = (0..general.t.len())
            .map(|i| (general.lagrange_defect_at(i) - d0).abs())
            .fold(0.0, f64::max);
        let ok = point_defect <= LAGRANGE_TOL && drift <= LAGRANGE_TOL;
        pass &= ok;
        details.push(format!(
            "{}: point congruence defect {}, random initial data defect {} drifting by {}",
            g.label,
            fmt_e(point_defect),
            fmt_e(d0),
            fmt_e(drift)
        ));
    }
    let mut p = Partial::new(pass, format!("{} congruences, tolerance {}", details.len(), fmt_e(LAGRANGE_TOL)));
    p.details = details;
    Ok(p)
}

fn check_trace_identity(ctx: &Context) -> CheckResult {
    let sc = &ctx.scenario;
    let mut pass = true;
    let mut details = Vec::new();
    for g in ctx.curves() {
        let (_, frame) = ctx.frame(g)?;
        let series = EndomorphismSeries::build(&sc.metric, &sc.weight, &frame).map_err(|e| e.to_string())?;
        let worst = comparison::trace_identity_check(&sc.metric, &sc.weight, &sc.params, &frame, &series)
            .map_err(|e| e.to_string())?;
        pass &= worst <= TRACE_TOL;
        details.push(format!("{}: max residual {} over {} samples", g.label, fmt_e(worst), series.t.len()));
    }
    let mut p = Partial::new(pass, format!("{} curves, tolerance {}", details.len(), fmt_e(TRACE_TOL)));
    p.details = details;
    Ok(p)
}

fn check_timelike_convergence(ctx: &Context) -> CheckResult {
    let sc = &ctx.scenario;
    let rep = comparison::check_timelike_convergence(&sc.metric, &sc.weight, &sc.params, &ctx.sample);
    let mut p = Partial::new(
        rep.pass,
        format!(
            "m = {}: min Ric_f^m(v,v) = {:?} over {} timelike samples",
            sc.params.m, rep.min, rep.samples
        ),
    );
    p.details.push(format!("argmin point {:?} vector {:?}", rep.argmin_point, rep.argmin_vector));
    if let Some(nm) = rep.null_min {
        p.details.push(format!("null directions: min {:?} over {} samples", nm, rep.null_samples));
    }
    if rep.skipped_points > 0 {
        p.details.push(format!("{} points could not be evaluated", rep.skipped_points));
    }
    Ok(p)
}

fn check_f_generic(ctx: &Context) -> CheckResult {
    let sc = &ctx.scenario;
    let mut pass = true;
    let mut details = Vec::new();
    for g in ctx.curves() {
        let (_, frame) = ctx.frame(g)?;
        let series = EndomorphismSeries::build(&sc.metric, &sc.weight, &frame).map_err(|e| e.to_string())?;
        let rep = comparison::check_f_generic(&series, sc.params.m);
        pass &= rep.consistent;
        details.push(format!(
            "{}: f-generic {} (witness {:?}, max |R_f| {}), positive Ric_f^m at {:?}{}",
            g.label,
            rep.generic,
            rep.witness,
            fmt_e(rep.max_norm),
            rep.positive_curvature_witness,
            if rep.consistent { "" } else { " INCONSISTENT" }
        ));
    }
    let mut p = Partial::new(pass, format!("{} curves", details.len()));
    p.details = details;
    Ok(p)
}

fn check_conjugate_points(ctx: &Context) -> CheckResult {
    let mut pass = true;
    let mut details = Vec::new();
    for g in ctx.curves() {
        let src = ctx.source(g)?;
        let traj = point_congruence(src, g.range.0, g.range.1, &ctx.jacobi).map_err(|e| format!("{}: {e}", g.label))?;
        let rep = detect_conjugate(&traj).map_err(|e| e.to_string())?;
        let ok = rep.zeros.iter().all(|z| z.collar_theta > BLOWUP_THETA);
        pass &= ok;
        let zs: Vec<String> = rep
            .zeros
            .iter()
            .map(|z| format!("{} (|theta_f| up to {} nearby)", z.t, fmt_e(z.collar_theta)))
            .collect();
        details.push(format!(
            "{}: {} conjugate points on ({}, {}]{}{}",
            g.label,
            rep.zeros.len(),
            g.range.0,
            g.range.1,
            if zs.is_empty() { "" } else { ": " },
            zs.join(", ")
        ));
    }
    let mut p = Partial::new(pass, format!("{} congruences", details.len()));
    p.details = details;
    Ok(p)
}

fn check_example7(ctx: &Context) -> CheckResult {
    let n = match ctx.scenario.spec.metric {
        MetricSpec::DeSitter { n } => n,
        _ => 4,
    };
    let mut spec = SampleSpec::new(scenario::example7_points(n))
        .with_counts(ctx.sample.timelike_per_point, ctx.sample.null_per_point)
        .with_seed(ctx.config.seed)
        .with_normalization(ctx.sample.normalization);
    spec.chi_max = ctx.sample.chi_max;
    let grid = scenario::default_k_grid();
    let rep = scenario::certify_example7(n, &grid, &spec);
    let dense = scenario::certify_example7(n, &grid, &spec.densified(10));
    let step = grid[1] - grid[0];
    let stable = match (rep.k_star, dense.k_star) {
        (Some(a), Some(b)) => (a - b).abs() <= step + 1e-12,
        _ => false,
    };
    let pass = rep.k_star.is_some() && stable;
    let mut p = Partial::new(
        pass,
        format!(
            "n = {n}: K* = {} (10x density: {})",
            rep.k_star.map_or("none".into(), |k| k.to_string()),
            dense.k_star.map_or("none".into(), |k| k.to_string())
        ),
    );
    for (k, c) in &rep.per_k {
        p.details.push(format!("K = {k}: min Ric_f(v,v) = {} {}", c.min, if c.pass { "pass" } else { "fail" }));
    }
    if !rep.monotonicity_violations.is_empty() {
        p.details.push(format!("finding: larger K failing after a pass: {:?}", rep.monotonicity_violations));
    }
    for ((k, dt), ((_, v, vn), (_, h, hn))) in rep
        .dt_bound_slack
        .iter()
        .zip(rep.v_bound_slack.iter().zip(&rep.hess_bound_slack))
    {
        p.details.push(format!(
            "finding K = {k}: Ric_f(dt,dt) bound slack {}, Ric_f(v,v) bound slack {} ({vn} violations), Hess f(x,x) bound slack {} ({hn} violations)",
            fmt_e(*dt),
            fmt_e(*v),
            fmt_e(*h)
        ));
    }
    Ok(p)
}

/// Random draws and equality witnesses for the Schwarz-type inequality.
pub fn schwarz_suite(draws: usize, seed: u64) -> (f64, f64, usize) {
    let chunks = 16usize;
    let per = draws.div_ceil(chunks);
    let results: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut min_gap = f64::INFINITY;
            let mut worst_witness: f64 = 0.0;
            let mut count = 0;
            for _ in 0..per.min(draws.saturating_sub(c * per)) {
                let theta: f64 = rng.gen_range(-10.0..10.0);
                let fp: f64 = rng.gen_range(-10.0..10.0);
                let n = rng.gen_range(2..=10) as f64;
                let m: f64 = 100.0 - rng.gen_range(0.0..100.0);
                min_gap = min_gap.min(comparison::schwarz_gap(theta, fp, n, m).gap);
                for th in comparison::schwarz_equality_theta(fp, n, m) {
                    let g = comparison::schwarz_gap(th, fp, n, m);
                    worst_witness = worst_witness.max(g.gap.abs() / g.lhs.max(1.0));
                }
                count += 1;
            }
            (min_gap, worst_witness, count)
        })
        .collect();
    results.into_iter().fold((f64::INFINITY, 0.0, 0), |acc, r| {
        (acc.0.min(r.0), acc.1.max(r.1), acc.2 + r.2)
    })
}

fn check_schwarz(ctx: &Context) -> CheckResult {
    let (min_gap, witness, count) = schwarz_suite(SCHWARZ_DRAWS, ctx.config.seed);
    Ok(Partial::new(
        min_gap >= -1e-12 && witness <= 1e-8,
        format!(
            "{count} draws: min gap {}, equality witnesses reproduced to {}",
            fmt_e(min_gap),
            fmt_e(witness)
        ),
    ))
}

/// Deterministic past points `q` at distances spread over `(0, max_rho]`.
pub fn distance_samples(sc: &Scenario, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let Some(region) = &sc.spec.uniqueness else {
        return Vec::new();
    };
    let max_rho = region.max_rho.min(10.0);
    let g = sc.metric.eval(&region.apex);
    let Ok((e0, spatial)) = orthonormal_basis(&g) else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = GeodesicOptions {
        ode: OdeOptions::with_tolerances(1e-12, 1e-14),
        sample_dt: 1.0,
        normalize: true,
    };
    let mut out = Vec::new();
    for i in 0..count {
        let rho = max_rho * (0.1 + 0.85 * i as f64 / (count.max(2) - 1) as f64);
        let chi: f64 = rng.gen_range(0.0..0.5);
        let z = DVector::from_fn(spatial.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        let u = if z.norm() > 1e-9 { &spatial * z.normalize() } else { spatial.column(0).into_owned() };
        let v = -(&e0 * chi.cosh() + u * chi.sinh());
        if let Ok(geo) = integrate_geodesic(&sc.metric, &region.apex, &v, (0.0, rho), &opts) {
            if geo.t.last().copied() == Some(rho) {
                out.push(geo.x.last().unwrap().as_slice().to_vec());
            }
        }
    }
    out
}

fn check_f_laplacian(ctx: &Context) -> CheckResult {
    let sc = &ctx.scenario;
    let Some(region) = &sc.spec.uniqueness else {
        return Ok(Partial::new(true, "no uniqueness region declared; nothing to check".into()));
    };
    let qs = distance_samples(sc, 20, ctx.config.seed);
    let mut pts = qs.clone();
    pts.push(region.apex.clone());
    let mut hyp_spec = ctx.sample.clone();
    hyp_spec.points = comparison::PointSet::Explicit(pts);
    let certified = comparison::check_timelike_convergence(&sc.metric, &sc.weight, &sc.params, &hyp_spec).pass;
    let opts = DistanceOptions {
        jacobi: ctx.jacobi,
        ..DistanceOptions::default()
    };
    let mut min_finite = f64::INFINITY;
    let mut min_infinite = f64::INFINITY;
    let mut worst_endpoint: f64 = 0.0;
    for q in &qs {
        let r = comparison::f_laplacian_distance(&sc.metric, &sc.weight, sc.params.m, region, q, &opts)
            .map_err(|e| e.to_string())?;
        if let Some(s) = r.slack_finite() {
            min_finite = min_finite.min(s);
        }
        min_infinite = min_infinite.min(r.slack_infinite());
        worst_endpoint = worst_endpoint.max(r.endpoint_error);
    }
    let finite_ok = !sc.params.m.is_finite() || min_finite >= -BOUND_TOL;
    let pass = qs.len() == 20 && worst_endpoint <= 1e-8 && (!certified || (finite_ok && min_infinite >= -BOUND_TOL));
    let mut p = Partial::new(
        pass,
        format!(
            "{} points: min slack finite-m bound {}, infinite-m bound {}; curvature hypothesis {}",
            qs.len(),
            if sc.params.m.is_finite() { fmt_e(min_finite) } else { "n/a".into() },
            fmt_e(min_infinite),
            if certified { "certified, bounds enforced" } else { "not certified, bounds reported only" }
        ),
    );
    p.details.push(format!("shooting endpoint error {}", fmt_e(worst_endpoint)));
    Ok(p)
}

fn check_mean_curvature(ctx: &Context) -> CheckResult {
    let mut pass = true;
    let mut details = Vec::new();
    for g in ctx.curves() {
        let src: Arc<dyn CurvatureSource> = ctx.source(g)?;
        let k = src.rank();
        let shape = DMatrix::zeros(k, k);
        // stop short of the first focal point of the normal congruence
        let probe = integrate_jacobi(Arc::clone(&src), &DMatrix::identity(k, k), &shape, g.range.0, g.range.1, &ctx.jacobi)
            .map_err(|e| format!("{}: {e}", g.label))?;
        let end = detect_conjugate(&probe)
            .map_err(|e| e.to_string())?
            .first()
            .map_or(g.range.1, |z| z - DEFAULT_ZERO_RADIUS);
        if end - g.range.0 < 0.1 {
            details.push(format!("{}: focal point too close to the start; skipped", g.label));
            continue;
        }
        let rep = mean_curvature_evolution(src, &shape, g.range.0, end, &ctx.jacobi).map_err(|e| format!("{}: {e}", g.label))?;
        pass &= rep.max_abs_residual <= RESIDUAL_TOL;
        details.push(format!(
            "{}: max |residual| {} on [{}, {}]",
            g.label,
            fmt_e(rep.max_abs_residual),
            g.range.0,
            end
        ));
    }
    let mut p = Partial::new(pass, format!("{} normal congruences, tolerance {}", details.len(), fmt_e(RESIDUAL_TOL)));
    p.details = details;
    Ok(p)
}

pub fn run_check(ctx: &Context, id: CheckId) -> Result<CheckOutcome, CheckFailure> {
    let res = match id {
        CheckId::ConjugatePoints => check_conjugate_points(ctx),
        CheckId::CurvatureSymmetries => check_curvature_symmetries(ctx),
        CheckId::Example7Certification => check_example7(ctx),
        CheckId::FGeneric => check_f_generic(ctx),
        CheckId::FLaplacian => check_f_laplacian(ctx),
        CheckId::FrameOrthonormality => check_frame(ctx),
        CheckId::GeodesicResidual => check_geodesic_residual(ctx),
        CheckId::LagrangeDefect => check_lagrange(ctx),
        CheckId::Manifest => check_manifest(ctx),
        CheckId::MeanCurvature => check_mean_curvature(ctx),
        CheckId::RaychaudhuriResidual => check_raychaudhuri(ctx),
        CheckId::Schwarz => check_schwarz(ctx),
        CheckId::TimelikeConvergence => check_timelike_convergence(ctx),
        CheckId::TraceIdentity => check_trace_identity(ctx),
    };
    res.map(|p| CheckOutcome {
        id,
        basis: check_basis(id),
        pass: p.pass,
        summary: p.summary,
        details: p.details,
        csv: p.csv,
    })
    .map_err(|message| CheckFailure { id, message })
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a RunConfig,
}

fn render_report(config: &RunConfig, scenario: Option<&str>, outcomes: &[CheckOutcome], errors: &[CheckFailure], fatal: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lorentz-lab report");
    let _ = writeln!(out, "scenario: {}", scenario.unwrap_or("(not loaded)"));
    let echo = serde_json::to_string(&ConfigEcho { config }).unwrap_or_default();
    let _ = writeln!(out, "config: {echo}");
    let mut ids: Vec<CheckId> = outcomes.iter().map(|o| o.id).chain(errors.iter().map(|e| e.id)).collect();
    ids.sort();
    for id in ids {
        if let Some(o) = outcomes.iter().find(|o| o.id == id) {
            let _ = writeln!(
                out,
                "{} [{}] {}: {}",
                o.id,
                basis_label(o.basis),
                if o.pass { "PASS" } else { "FAIL" },
                o.summary
            );
            for d in &o.details {
                let _ = writeln!(out, "    {d}");
            }
        } else if let Some(e) = errors.iter().find(|e| e.id == id) {
            let _ = writeln!(out, "{} [{}] ERROR: {}", id, basis_label(check_basis(id)), e.message);
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let _ = writeln!(
        out,
        "summary: {} passed, {} failed, {} errors",
        passed,
        outcomes.len() - passed,
        errors.len()
    );
    if let Some(msg) = fatal {
        let _ = writeln!(out, "FAILED: {msg}");
    } else if !errors.is_empty() {
        let _ = writeln!(out, "FAILED: {} checks did not complete", errors.len());
    }
    out
}

fn write_artifacts(dir: &Path, report: &str, outcomes: &[CheckOutcome]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for o in outcomes {
        for s in &o.csv {
            fs::write(dir.join(format!("{}.csv", s.name)), s.render())?;
        }
    }
    fs::write(dir.join("report.txt"), report)
}

/// Run a validated configuration and write its artifacts.
pub fn run(config: &RunConfig) -> RunSummary {
    let scenario = match load_scenario(&config.scenario) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            let report = render_report(config, None, &[], &[], Some(&msg));
            let _ = write_artifacts(&config.output_dir, &report, &[]);
            return RunSummary {
                outcomes: Vec::new(),
                errors: Vec::new(),
                exit_code: 2,
                report,
            };
        }
    };
    let name = scenario.name().to_string();
    let ctx = Context::new(scenario, config.clone());
    let results: Vec<Result<CheckOutcome, CheckFailure>> =
        config.checks.par_iter().map(|&id| run_check(&ctx, id)).collect();
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => errors.push(e),
        }
    }
    outcomes.sort_by_key(|o| o.id);
    errors.sort_by_key(|e| e.id);
    let mut report = render_report(config, Some(&name), &outcomes, &errors, None);
    let mut exit_code = if !errors.is_empty() {
        2
    } else if outcomes.iter().all(|o| o.pass) {
        0
    } else {
        1
    };
    if let Err(e) = write_artifacts(&config.output_dir, &report, &outcomes) {
        report.push_str(&format!("FAILED: cannot write artifacts: {e}\n"));
        exit_code = 2;
    }
    RunSummary {
        outcomes,
        errors,
        exit_code,
        report,
    }
}
