//! Sampled curvature conditions and comparison-geometry checks.
//!
//! Condition checks are certificates over finite direction samples. Timelike
//! directions are drawn by boost parameter: `v = cosh χ e0 + sinh χ u` with
//! `χ` uniform on `[0, χ_max]` and `u` uniform on the unit sphere of the
//! spatial frame. By default `v` is rescaled to unit `e0` component, which
//! keeps near-null directions from dominating the minimum by their length.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::congruence::{
    gram_schmidt_against, integrate_geodesic, CongruenceError, EndomorphismSeries, FrameField,
    GeodesicOptions,
};
use crate::jacobi::{point_congruence, GeodesicSource, JacobiError, JacobiOptions};
use crate::manifold::{self, BakryEmeryParams, GeometryError, MetricField, ScalarField, SyntheticDim};
use crate::ode::OdeOptions;
use crate::scenario::UniquenessRegion;

/// A condition passes when its sampled minimum is at least `-PASS_TOL`.
pub const PASS_TOL: f64 = 1e-9;
/// `R_f(t)` counts as nonzero above this max-norm.
pub const GENERIC_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            c => (0..c)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (c - 1) as f64)
                .collect(),
        }
    }
}

/// Sample points, listed or as a Cartesian grid with one axis per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSet {
    Explicit(Vec<Vec<f64>>),
    Grid(Vec<Axis>),
}

impl PointSet {
    pub fn expand(&self) -> Vec<Vec<f64>> {
        match self {
            PointSet::Explicit(p) => p.clone(),
            PointSet::Grid(axes) => {
                let mut out = vec![Vec::new()];
                for axis in axes {
                    let vals = axis.values();
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            vals.iter().map(move |&x| {
                                let mut q = p.clone();
                                q.push(x);
                                q
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `v = e0 + tanh χ u`.
    #[default]
    UnitTimeComponent,
    /// `g(v, v) = -1`.
    UnitNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub points: PointSet,
    #[serde(default = "default_timelike")]
    pub timelike_per_point: usize,
    #[serde(default = "default_null")]
    pub null_per_point: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chi_max")]
    pub chi_max: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_timelike() -> usize {
    64
}
fn default_null() -> usize {
    16
}
fn default_chi_max() -> f64 {
    3.0
}

impl SampleSpec {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        SampleSpec {
            points: PointSet::Explicit(points),
            timelike_per_point: default_timelike(),
            null_per_point: default_null(),
            seed: 0,
            chi_max: default_chi_max(),
            normalization: Normalization::default(),
        }
    }

    pub fn with_counts(mut self, timelike: usize, null: usize) -> Self {
        self.timelike_per_point = timelike;
        self.null_per_point = null;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Same points and seed with every count multiplied by `factor`.
    pub fn densified(&self, factor: usize) -> Self {
        let mut s = self.clone();
        s.timelike_per_point *= factor;
        s.null_per_point *= factor;
        s
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        if self.timelike_per_point == 0 {
            errs.push("timelike_per_point must be at least 1".to_string());
        }
        if self.null_per_point == 0 {
            errs.push("null_per_point must be at least 1".to_string());
        }
        if !(self.chi_max.is_finite() && self.chi_max >= 0.0) {
            errs.push(format!("chi_max = {} must be finite and nonnegative", self.chi_max));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}

/// Future unit timelike `e0` and a `g`-orthonormal spatial frame at a point.
pub fn orthonormal_basis(g: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), CongruenceError> {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut e0: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
    let q = (e0.transpose() * g * &e0)[(0, 0)];
    if q >= 0.0 {
        return Err(GeometryError::NonLorentzian { negative: 0 }.into());
    }
    e0 /= (-q).sqrt();
    if e0[0] < 0.0 {
        e0 = -e0;
    }
    let spatial = gram_schmidt_against(g, &[(e0.clone(), -1.0)], n - 1)?;
    Ok((e0, spatial))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub point_index: usize,
    pub point: Vec<f64>,
    pub vector: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    /// Indices of points where the geometry could not be evaluated.
    pub skipped_points: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Kind {
    Timelike,
    Null,
}

fn directions(
    e0: &DVector<f64>,
    spatial: &DMatrix<f64>,
    spec: &SampleSpec,
    index: usize,
    kind: Kind,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let d = spatial.ncols();
    let mut out = Vec::new();
    let total = spec.timelike_per_point + spec.null_per_point;
    for j in 0..total {
        let mut z = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        while z.norm() < 1e-12 {
            z = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        }
        let u = spatial * z.normalize();
        let chi: f64 = rng.gen_range(0.0..=spec.chi_max);
        let timelike = j < spec.timelike_per_point;
        match (kind, timelike) {
            (Kind::Timelike, true) => out.push(match spec.normalization {
                Normalization::UnitTimeComponent => e0 + u * chi.tanh(),
                Normalization::UnitNorm => e0 * chi.cosh() + u * chi.sinh(),
            }),
            (Kind::Null, false) => out.push(e0 + u),
            _ => {}
        }
    }
    out
}

fn evaluate(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    spec: &SampleSpec,
    kind: Kind,
) -> SampleSet {
    let points = spec.points.expand();
    let per_point: Vec<Option<Vec<Sample>>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let tensor = manifold::bakry_emery_tensor(metric, f, params, p).ok()?;
            let g = metric.eval(p);
            let (e0, spatial) = orthonormal_basis(&g).ok()?;
            Some(
                directions(&e0, &spatial, spec, i, kind)
                    .into_iter()
                    .map(|v| Sample {
                        point_index: i,
                        point: p.clone(),
                        value: (v.transpose() * &tensor * &v)[(0, 0)],
                        vector: v.as_slice().to_vec(),
                    })
                    .collect(),
            )
        })
        .collect();
    let mut set = SampleSet::default();
    for (i, s) in per_point.into_iter().enumerate() {
        match s {
            Some(s) => set.samples.extend(s),
            None => set.skipped_points.push(i),
        }
    }
    set
}

/// `Ric_f^m(v, v)` over the sampled timelike directions.
pub fn evaluate_timelike_samples(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    spec: &SampleSpec,
) -> SampleSet {
    evaluate(metric, f, params, spec, Kind::Timelike)
}

/// `Ric_f^m(ℓ, ℓ)` over sampled null directions `ℓ = e0 + u`.
pub fn evaluate_null_samples(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    spec: &SampleSpec,
) -> SampleSet {
    evaluate(metric, f, params, spec, Kind::Null)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub min: f64,
    pub argmin_point: Vec<f64>,
    pub argmin_vector: Vec<f64>,
    pub pass: bool,
    pub threshold: f64,
    pub samples: usize,
    pub skipped_points: usize,
    pub timelike_per_point: usize,
    /// Minimum over null samples, when evaluated; informational only.
    pub null_min: Option<f64>,
    pub null_samples: usize,
}

/// Min-reduction in sample order; ties keep the earliest sample.
pub fn reduce_samples(set: &SampleSet, spec: &SampleSpec) -> ConditionReport {
    let mut best: Option<&Sample> = None;
    for s in &set.samples {
        if best.is_none_or(|b| s.value < b.value) {
            best = Some(s);
        }
    }
    let (min, argmin_point, argmin_vector) = match best {
        Some(b) => (b.value, b.point.clone(), b.vector.clone()),
        None => (f64::NAN, Vec::new(), Vec::new()),
    };
    ConditionReport {
        min,
        argmin_point,
        argmin_vector,
        pass: best.is_some() && set.skipped_points.is_empty() && min >= -PASS_TOL,
        threshold: -PASS_TOL,
        samples: set.samples.len(),
        skipped_points: set.skipped_points.len(),
        timelike_per_point: spec.timelike_per_point,
        null_min: None,
        null_samples: 0,
    }
}

/// Certificate of `Ric_f^m(v, v) >= 0` over sampled timelike `v`.
pub fn check_timelike_convergence(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    spec: &SampleSpec,
) -> ConditionReport {
    let set = evaluate_timelike_samples(metric, f, params, spec);
    let mut report = reduce_samples(&set, spec);
    let null = evaluate_null_samples(metric, f, params, spec);
    report.null_min = null
        .samples
        .iter()
        .map(|s| s.value)
        .min_by(|a, b| a.total_cmp(b));
    report.null_samples = null.samples.len();
    report
}

/// Recompute `Ric_f^m` at the reported argmin.
pub fn reevaluate_argmin(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    report: &ConditionReport,
) -> Result<f64, GeometryError> {
    let v = DVector::from_column_slice(&report.argmin_vector);
    manifold::bakry_emery_ricci(metric, f, params, &report.argmin_point, &v, &v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FGenericReport {
    /// `R_f(t) ≠ 0` at some sample.
    pub generic: bool,
    /// First sample parameter with `‖R_f‖∞ > GENERIC_TOL`.
    pub witness: Option<f64>,
    pub max_norm: f64,
    /// First sample with `Ric_f^m(c', c') > GENERIC_TOL`.
    pub positive_curvature_witness: Option<f64>,
    /// Positive `Ric_f^m` somewhere implies `R_f ≠ 0` somewhere.
    pub consistent: bool,
}

pub fn check_f_generic(series: &EndomorphismSeries, m: SyntheticDim) -> FGenericReport {
    let mut witness = None;
    let mut positive = None;
    let mut max_norm: f64 = 0.0;
    for i in 0..series.t.len() {
        let norm = series.r_f[i].amax();
        max_norm = max_norm.max(norm);
        if witness.is_none() && norm > GENERIC_TOL {
            witness = Some(series.t[i]);
        }
        let w = &series.weight[i];
        let ric_fm = series.ric[i] + w.second - m.reciprocal() * w.first * w.first;
        if positive.is_none() && ric_fm > GENERIC_TOL {
            positive = Some(series.t[i]);
        }
    }
    FGenericReport {
        generic: witness.is_some(),
        witness,
        max_norm,
        positive_curvature_witness: positive,
        consistent: positive.is_none() || witness.is_some(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceIdentity {
    pub t: f64,
    /// `tr R_f` from the frame endomorphism.
    pub lhs: f64,
    /// `Ric_f^m(c', c') + (1/k + 1/m)((f∘c)')^2` from the full tensor.
    pub rhs: f64,
    pub residual: f64,
}

/// Trace identity at sample `i` of a frame. `k` is the transverse rank.
pub fn trace_identity_at(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    frame: &FrameField,
    series: &EndomorphismSeries,
    i: usize,
) -> Result<TraceIdentity, GeometryError> {
    let x = frame.x[i].as_slice();
    let v = &frame.v[i];
    let ric_fm = manifold::bakry_emery_ricci(metric, f, params, x, v, v)?;
    let fprime = f.jet(x).grad.dot(v);
    let k = series.r_f[i].nrows() as f64;
    let lhs = series.r_f[i].trace();
    let rhs = ric_fm + (1.0 / k + params.m.reciprocal()) * fprime * fprime;
    Ok(TraceIdentity {
        t: series.t[i],
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Largest trace-identity residual over all samples.
pub fn trace_identity_check(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    frame: &FrameField,
    series: &EndomorphismSeries,
) -> Result<f64, GeometryError> {
    let mut worst: f64 = 0.0;
    for i in 0..series.t.len() {
        worst = worst.max(trace_identity_at(metric, f, params, frame, series, i)?.residual);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchwarzGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// `θ²/(n-1) + f'²/m` against `max± (θ ± f')²/(n+m-1)`.
pub fn schwarz_gap(theta: f64, fprime: f64, n: f64, m: f64) -> SchwarzGap {
    let lhs = theta * theta / (n - 1.0) + fprime * fprime / m;
    let rhs = (theta + fprime).powi(2).max((theta - fprime).powi(2)) / (n + m - 1.0);
    SchwarzGap {
        lhs,
        rhs,
        gap: lhs - rhs,
    }
}

/// Exact gap for each sign, `(mθ ∓ (n-1)f')² / ((n-1) m (n+m-1))`, a sum of
/// squares independent of the direct evaluation above.
pub fn schwarz_gap_closed_form(theta: f64, fprime: f64, n: f64, m: f64) -> [f64; 2] {
    let den = (n - 1.0) * m * (n + m - 1.0);
    [
        (m * theta - (n - 1.0) * fprime).powi(2) / den,
        (m * theta + (n - 1.0) * fprime).powi(2) / den,
    ]
}

/// Values of `θ` where the `+` and `-` forms are equalities: `θ = ±((n-1)/m) f'`.
pub fn schwarz_equality_theta(fprime: f64, n: f64, m: f64) -> [f64; 2] {
    let c = (n - 1.0) / m;
    [c * fprime, -c * fprime]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("no maximal timelike geodesic from the apex to q: {0}")]
    NoMaximalGeodesic(String),
    #[error("q lies outside the declared uniqueness region: {0}")]
    OutsideUniquenessRegion(String),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    pub jacobi: JacobiOptions,
    pub shooting_tol: f64,
    pub max_newton: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            jacobi: JacobiOptions::default(),
            shooting_tol: 1e-11,
            max_newton: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FLaplacianReport {
    /// Lorentzian distance from `q` to the apex.
    pub rho: f64,
    /// `Δ d(q) = -θ(ρ)`.
    pub laplacian: f64,
    /// `Δ_f d(q) = Δ d - ⟨∇f, ∇d⟩ = -θ_f(ρ)`.
    pub value: f64,
    /// `-(n+m-1)/ρ` for finite `m`.
    pub bound_finite: Option<f64>,
    /// `-(n-1)/ρ + (2/ρ) f(q) - (2/ρ²) ∫_0^ρ f(σ(t)) dt`.
    pub bound_infinite: f64,
    pub f_q: f64,
    pub integral_f: f64,
    /// `‖σ(ρ) - q‖∞` of the Jacobi run, a consistency check on the shooting.
    pub endpoint_error: f64,
    pub newton_iterations: usize,
}

impl FLaplacianReport {
    pub fn slack_finite(&self) -> Option<f64> {
        self.bound_finite.map(|b| self.value - b)
    }
    pub fn slack_infinite(&self) -> f64 {
        self.value - self.bound_infinite
    }
}

fn shoot_endpoint(metric: &MetricField, apex: &[f64], w: &DVector<f64>, ode: &OdeOptions) -> Option<DVector<f64>> {
    let opts = GeodesicOptions {
        ode: *ode,
        sample_dt: 1.0,
        normalize: false,
    };
    let geo = integrate_geodesic(metric, apex, w, (0.0, 1.0), &opts).ok()?;
    if geo.t.last().copied() != Some(1.0) {
        return None;
    }
    geo.x.last().cloned()
}

/// Newton shooting for the initial velocity `w` with `σ(1) = q` on `[0, 1]`.
fn shoot(
    metric: &MetricField,
    apex: &[f64],
    q: &[f64],
    opts: &DistanceOptions,
) -> Result<(DVector<f64>, usize), DistanceError> {
    let n = apex.len();
    let qv = DVector::from_column_slice(q);
    let ode = opts.jacobi.ode;
    let fail = |msg: &str| DistanceError::NoMaximalGeodesic(msg.to_string());
    let mut w = &qv - DVector::from_column_slice(apex);
    let mut resid = shoot_endpoint(metric, apex, &w, &ode).ok_or_else(|| fail("initial guess leaves the chart"))? - &qv;
    for it in 0..opts.max_newton {
        if resid.amax() <= opts.shooting_tol {
            return Ok((w, it));
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * w[j].abs().max(1.0);
            let mut wp = w.clone();
            wp[j] += h;
            let mut wm = w.clone();
            wm[j] -= h;
            let fp = shoot_endpoint(metric, apex, &wp, &ode).ok_or_else(|| fail("Jacobian probe leaves the chart"))?;
            let fm = shoot_endpoint(metric, apex, &wm, &ode).ok_or_else(|| fail("Jacobian probe leaves the chart"))?;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        let step = jac
            .lu()
            .solve(&(-&resid))
            .ok_or_else(|| fail("singular shooting Jacobian"))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = &w + &step * lambda;
            if let Some(end) = shoot_endpoint(metric, apex, &trial, &ode) {
                let r = end - &qv;
                if r.amax() < resid.amax() {
                    w = trial;
                    resid = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            if resid.amax() <= 100.0 * opts.shooting_tol {
                return Ok((w, it));
            }
            return Err(fail("Newton iteration stalled"));
        }
    }
    if resid.amax() <= opts.shooting_tol {
        Ok((w, opts.max_newton))
    } else {
        Err(fail("Newton iteration did not converge"))
    }
}

/// Composite Simpson on a uniform grid; the 3/8 rule closes an odd interval count.
pub fn simpson_uniform(t: &[f64], y: &[f64]) -> f64 {
    let len = y.len();
    if len < 2 {
        return 0.0;
    }
    let h = (t[len - 1] - t[0]) / (len - 1) as f64;
    if len == 2 {
        return 0.5 * h * (y[0] + y[1]);
    }
    if len == 3 {
        return h / 3.0 * (y[0] + 4.0 * y[1] + y[2]);
    }
    let intervals = len - 1;
    let simpson_end = if intervals % 2 == 0 { len - 1 } else { len - 4 };
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 <= simpson_end {
        s += h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
        i += 2;
    }
    if simpson_end != len - 1 {
        let j = simpson_end;
        s += 3.0 * h / 8.0 * (y[j] + 3.0 * y[j + 1] + 3.0 * y[j + 2] + y[j + 3]);
    }
    s
}

/// `Δ_f d(q)` for `d = d(·, apex)` on the past of the apex, via the point
/// congruence of past-directed unit geodesics from the apex, with the two
/// comparison bounds.
pub fn f_laplacian_distance(
    metric: &MetricField,
    f: &ScalarField,
    m: SyntheticDim,
    region: &UniquenessRegion,
    q: &[f64],
    opts: &DistanceOptions,
) -> Result<FLaplacianReport, DistanceError> {
    let apex = region.apex.as_slice();
    let n = apex.len();
    if q.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: q.len(),
        }
        .into());
    }
    manifold::check_lorentzian(metric, apex)?;
    manifold::check_lorentzian(metric, q)?;
    let (w, iterations) = shoot(metric, apex, q, opts)?;
    let g = metric.eval(apex);
    let ww = (w.transpose() * &g * &w)[(0, 0)];
    if ww >= 0.0 {
        return Err(DistanceError::NoMaximalGeodesic(format!(
            "connecting geodesic is not timelike (g(w,w) = {ww})"
        )));
    }
    let (e0, _) = orthonormal_basis(&g).map_err(|e| DistanceError::NoMaximalGeodesic(e.to_string()))?;
    if (w.transpose() * &g * &e0)[(0, 0)] <= 0.0 {
        return Err(DistanceError::OutsideUniquenessRegion(
            "q is not in the past of the apex".into(),
        ));
    }
    let rho = (-ww).sqrt();
    if rho > region.max_rho {
        return Err(DistanceError::OutsideUniquenessRegion(format!(
            "distance {rho} exceeds {}",
            region.max_rho
        )));
    }
    let v = &w / rho;
    let source = GeodesicSource::new(metric, f, apex, &v, 0.0)
        .map_err(|e| DistanceError::NoMaximalGeodesic(e.to_string()))?;
    let source = Arc::new(source);
    let traj = point_congruence(source.clone(), 0.0, rho, &opts.jacobi)?;
    if traj.t.last().copied() != Some(rho) {
        return Err(DistanceError::NoMaximalGeodesic("congruence left the chart".into()));
    }
    let last = traj.t.len() - 1;
    let a = &traj.a[last];
    let ap = &traj.ap[last];
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| DistanceError::NoMaximalGeodesic("conjugate point at q".into()))?;
    let theta = (ap * inv).trace();
    let fprime = traj.samples[last].weight.first;
    let f_q = traj.samples[last].weight.value;
    let fvals: Vec<f64> = traj.samples.iter().map(|s| s.weight.value).collect();
    let integral_f = simpson_uniform(&traj.t, &fvals);
    let (x_end, _) = source.point_velocity(&traj.aux[last]);
    let endpoint_error = (x_end - DVector::from_column_slice(q)).amax();
    let nf = n as f64;
    Ok(FLaplacianReport {
        rho,
        laplacian: -theta,
        value: -(theta - fprime),
        bound_finite: match m {
            SyntheticDim::Finite(m) => Some(-(nf + m - 1.0) / rho),
            SyntheticDim::Infinite => None,
        },
        bound_infinite: -(nf - 1.0) / rho + 2.0 * f_q / rho - 2.0 * integral_f / (rho * rho),
        f_q,
        integral_f,
        endpoint_error,
        newton_iterations: iterations,
    })
}
