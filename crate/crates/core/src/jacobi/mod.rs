//! Jacobi tensor fields `A'' + R A = 0` along a geodesic and the kinematic
//! quantities of the congruences they describe.
//!
//! A [`CurvatureSource`] supplies `R(t)` together with the weight data along
//! the curve. Metric-derived sources carry the geodesic and its parallel frame
//! as auxiliary state that is integrated jointly with `(A, A')`, so `R(t)` is
//! exact at every integrator stage.

mod boundary;
mod conjugate;

pub use boundary::{
    asymptotic_lagrange, boundary_jacobi, d_s_endpoint_derivative, d_s_integral_formula,
    AsymptoticReport, BoundaryError,
    BoundarySolution,
};
pub use conjugate::{
    detect_conjugate, verify_interval_finite_m, verify_interval_infinite, verify_null_focal_bound,
    ConjugateReport, ConjugateZero, IntervalReport, ZeroCertificate,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::congruence::{
    endomorphism_from_operator, initial_frame, prepare_velocity, transport_rhs, uniform_grid, weight_at,
    CongruenceError, GeodesicCharacter, WeightJet,
};
use crate::manifold::{jacobi_operator_at, MetricField, PointGeometry, ScalarField, SyntheticDim};
use crate::ode::{self, OdeError, OdeOptions, OdeStats, OdeStatus};

/// Threshold on `σ_min([A; A'])` for the kernel-intersection condition.
pub const KERNEL_TOL: f64 = 1e-10;

/// `|θ_f|` above which a sample is masked as singular.
pub const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JacobiError {
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error("initial data violates ker A ∩ ker A' = 0 (σ_min = {0:e})")]
    InvalidInitialData(f64),
    #[error("initial matrices must be {0}x{0}")]
    ShapeMismatch(usize),
    #[error("need at least 5 uniformly spaced valid samples, found {0}")]
    InsufficientSamples(usize),
    #[error("parameter {0} outside the trajectory")]
    OutOfRange(f64),
}

/// Curvature and weight data at one parameter.
#[derive(Clone, Debug)]
pub struct CurveSample {
    /// Operator matrix of `R(t)` in the transverse frame.
    pub r: DMatrix<f64>,
    /// `Ric(c', c')`.
    pub ric: f64,
    /// `f∘c` and its first two derivatives; the second equals `Hess f(c', c')`.
    pub weight: WeightJet,
}

impl CurveSample {
    /// `Ric_f^m(c', c') = Ric + Hess f - (1/m)(df(c'))^2`.
    pub fn ric_fm(&self, m: SyntheticDim) -> f64 {
        self.ric + self.weight.second - m.reciprocal() * self.weight.first.powi(2)
    }
}

/// Supplier of `R(t)` along a curve, possibly with auxiliary state.
pub trait CurvatureSource: Send + Sync {
    /// Transverse dimension `k`.
    fn rank(&self) -> usize;
    fn aux_len(&self) -> usize;
    /// Parameter at which [`CurvatureSource::aux_initial`] applies.
    fn aux_t0(&self) -> f64;
    fn aux_initial(&self) -> Vec<f64>;
    fn aux_derivative(&self, t: f64, aux: &[f64], daux: &mut [f64]);
    /// `R(t)`; `None` where it cannot be evaluated.
    fn endomorphism(&self, t: f64, aux: &[f64]) -> Option<DMatrix<f64>>;
    fn sample(&self, t: f64, aux: &[f64]) -> Option<CurveSample>;
    /// Whether the auxiliary state left its domain.
    fn out_of_domain(&self, _aux: &[f64]) -> bool {
        false
    }
}

type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
type JetFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// A directly prescribed `R(t)` with optional weight `(f∘c)(t)`.
///
/// `Ric(c', c')` is taken as `tr R(t)`.
#[derive(Clone)]
pub struct PrescribedCurvature {
    rank: usize,
    r: MatrixFn,
    weight: Option<JetFn>,
}

impl std::fmt::Debug for PrescribedCurvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PrescribedCurvature(rank {})", self.rank)
    }
}

impl PrescribedCurvature {
    pub fn new(rank: usize, r: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        PrescribedCurvature {
            rank,
            r: Arc::new(r),
            weight: None,
        }
    }

    /// `R ≡ c E`.
    pub fn scalar(rank: usize, c: f64) -> Self {
        PrescribedCurvature::new(rank, move |_| DMatrix::identity(rank, rank) * c)
    }

    /// Constant matrix `R`.
    pub fn constant(r: DMatrix<f64>) -> Self {
        PrescribedCurvature::new(r.nrows(), move |_| r.clone())
    }

    /// Attach `t -> [f(c(t)), (f∘c)'(t), (f∘c)''(t)]`.
    pub fn with_weight(mut self, w: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        self.weight = Some(Arc::new(w));
        self
    }
}

impl CurvatureSource for PrescribedCurvature {
    fn rank(&self) -> usize {
        self.rank
    }
    fn aux_len(&self) -> usize {
        0
    }
    fn aux_t0(&self) -> f64 {
        0.0
    }
    fn aux_initial(&self) -> Vec<f64> {
        Vec::new()
    }
    fn aux_derivative(&self, _t: f64, _aux: &[f64], _daux: &mut [f64]) {}
    fn endomorphism(&self, t: f64, _aux: &[f64]) -> Option<DMatrix<f64>> {
        Some((self.r)(t))
    }
    fn sample(&self, t: f64, _aux: &[f64]) -> Option<CurveSample> {
        let r = (self.r)(t);
        let [value, first, second] = self.weight.as_ref().map_or([0.0; 3], |w| w(t));
        Some(CurveSample {
            ric: r.trace(),
            r,
            weight: WeightJet {
                value,
                first,
                second,
            },
        })
    }
}

/// `R(t)` along a geodesic of a metric, in a parallel transverse frame.
///
/// Auxiliary state is `[x, v, E_1, ..., E_k]` in coordinates.
#[derive(Clone, Debug)]
pub struct GeodesicSource {
    metric: MetricField,
    weight: ScalarField,
    character: GeodesicCharacter,
    t0: f64,
    initial: Vec<f64>,
    rank: usize,
}

impl GeodesicSource {
    /// Geodesic through `p0` at parameter `t0` with velocity `v0` (normalized
    /// when timelike), with the frame built by [`initial_frame`].
    pub fn new(
        metric: &MetricField,
        weight: &ScalarField,
        p0: &[f64],
        v0: &DVector<f64>,
        t0: f64,
    ) -> Result<Self, CongruenceError> {
        PointGeometry::at(metric, p0, false)?;
        let (character, v, _) = prepare_velocity(metric, p0, v0, true)?;
        let (frame, _) = initial_frame(metric, p0, &v, character)?;
        let mut initial = p0.to_vec();
        initial.extend_from_slice(v.as_slice());
        initial.extend_from_slice(frame.as_slice());
        Ok(GeodesicSource {
            metric: metric.clone(),
            weight: weight.clone(),
            character,
            t0,
            rank: frame.ncols(),
            initial,
        })
    }

    pub fn character(&self) -> GeodesicCharacter {
        self.character
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    fn unpack(&self, aux: &[f64]) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
        let n = self.metric.dim();
        (
            DVector::from_column_slice(&aux[..n]),
            DVector::from_column_slice(&aux[n..2 * n]),
            DMatrix::from_column_slice(n, self.rank, &aux[2 * n..]),
        )
    }

    /// Position and velocity encoded in an auxiliary state.
    pub fn point_velocity(&self, aux: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (x, v, _) = self.unpack(aux);
        (x, v)
    }
}

impl CurvatureSource for GeodesicSource {
    fn rank(&self) -> usize {
        self.rank
    }
    fn aux_len(&self) -> usize {
        self.initial.len()
    }
    fn aux_t0(&self) -> f64 {
        self.t0
    }
    fn aux_initial(&self) -> Vec<f64> {
        self.initial.clone()
    }
    fn aux_derivative(&self, _t: f64, aux: &[f64], daux: &mut [f64]) {
        transport_rhs(&self.metric, self.metric.dim(), self.rank, aux, daux);
    }
    fn endomorphism(&self, _t: f64, aux: &[f64]) -> Option<DMatrix<f64>> {
        let (x, v, e) = self.unpack(aux);
        let (geo, k_op) = jacobi_operator_at(&self.metric, x.as_slice(), &v).ok()?;
        Some(endomorphism_from_operator(&geo.g, &k_op, &e))
    }
    fn sample(&self, _t: f64, aux: &[f64]) -> Option<CurveSample> {
        let (x, v, e) = self.unpack(aux);
        let (geo, k_op) = jacobi_operator_at(&self.metric, x.as_slice(), &v).ok()?;
        Some(CurveSample {
            r: endomorphism_from_operator(&geo.g, &k_op, &e),
            // Ric(v, v) = R^a_{bad} v^b v^d = tr K
            ric: k_op.trace(),
            weight: weight_at(&geo, &self.weight, &x, &v),
        })
    }
    fn out_of_domain(&self, aux: &[f64]) -> bool {
        self.metric
            .domain_violation(&aux[..self.metric.dim()])
            .is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiOptions {
    pub ode: OdeOptions,
    pub sample_dt: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            ode: OdeOptions::with_tolerances(1e-12, 1e-14),
            sample_dt: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JacobiStatus {
    Complete,
    /// The curve left the chart at this parameter; samples stop before it.
    DomainExit(f64),
}

/// Sampled solution `(A, A')` with the curve data used along it.
#[derive(Clone)]
pub struct JacobiTrajectory {
    pub t: Vec<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub ap: Vec<DMatrix<f64>>,
    pub samples: Vec<CurveSample>,
    pub aux: Vec<Vec<f64>>,
    pub status: JacobiStatus,
    pub stats: OdeStats,
    source: Arc<dyn CurvatureSource>,
    opts: JacobiOptions,
}

impl std::fmt::Debug for JacobiTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JacobiTrajectory")
            .field("rank", &self.rank())
            .field("range", &self.range())
            .field("samples", &self.t.len())
            .field("status", &self.status)
            .finish()
    }
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `σ_min` of the stacked `2k x k` matrix `[A; A']`.
pub fn kernel_margin(a: &DMatrix<f64>, ap: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    let mut stacked = DMatrix::zeros(2 * k, k);
    stacked.view_mut((0, 0), (k, k)).copy_from(a);
    stacked.view_mut((k, 0), (k, k)).copy_from(ap);
    smallest_singular_value(&stacked)
}

fn jacobi_rhs(source: &dyn CurvatureSource, t: f64, y: &[f64], dy: &mut [f64]) {
    let na = source.aux_len();
    let k = source.rank();
    let (aux, mats) = y.split_at(na);
    let (daux, dmats) = dy.split_at_mut(na);
    source.aux_derivative(t, aux, daux);
    let Some(r) = source.endomorphism(t, aux) else {
        dy.iter_mut().for_each(|d| *d = f64::NAN);
        return;
    };
    let a = DMatrix::from_column_slice(k, k, &mats[..k * k]);
    let ap = &mats[k * k..];
    dmats[..k * k].copy_from_slice(ap);
    let app = -(r * a);
    dmats[k * k..].copy_from_slice(app.as_slice());
}

/// Advance the auxiliary state of `source` from its base parameter to `t`.
pub fn aux_at(source: &dyn CurvatureSource, t: f64, opts: &OdeOptions) -> Result<Vec<f64>, JacobiError> {
    let y0 = source.aux_initial();
    if y0.is_empty() || t == source.aux_t0() {
        return Ok(y0);
    }
    let sol = ode::integrate(
        |s, y, dy| source.aux_derivative(s, y, dy),
        source.aux_t0(),
        &y0,
        t,
        None,
        opts,
        |_, _| false,
    )?;
    Ok(sol.last().1.to_vec())
}

/// Integrate `A'' + R A = 0` from `(t_start, A0, A0')` to `t_end` (either
/// direction), recording samples on a uniform grid of spacing about
/// `opts.sample_dt`. Samples are stored in increasing parameter order.
pub fn integrate_jacobi(
    source: Arc<dyn CurvatureSource>,
    a0: &DMatrix<f64>,
    ap0: &DMatrix<f64>,
    t_start: f64,
    t_end: f64,
    opts: &JacobiOptions,
) -> Result<JacobiTrajectory, JacobiError> {
    let k = source.rank();
    if a0.shape() != (k, k) || ap0.shape() != (k, k) {
        return Err(JacobiError::ShapeMismatch(k));
    }
    let margin = kernel_margin(a0, ap0);
    if margin < KERNEL_TOL {
        return Err(JacobiError::InvalidInitialData(margin));
    }
    let aux0 = aux_at(source.as_ref(), t_start, &opts.ode)?;
    let na = aux0.len();
    let mut y0 = aux0;
    y0.extend_from_slice(a0.as_slice());
    y0.extend_from_slice(ap0.as_slice());
    let grid = uniform_grid(t_start, t_end, opts.sample_dt);
    let src = source.as_ref();
    // grid samples come from dense output so sampling does not limit the step
    let sol = ode::integrate_dense(
        |t, y, dy| jacobi_rhs(src, t, y, dy),
        t_start,
        &y0,
        t_end,
        &grid[1..],
        &opts.ode,
        |_, y| src.out_of_domain(&y[..na]),
    )?;
    let mut keep = sol.t.len();
    let status = match sol.status {
        OdeStatus::Completed => JacobiStatus::Complete,
        OdeStatus::Stopped(t) => {
            keep -= 1;
            JacobiStatus::DomainExit(t)
        }
    };
    let mut order: Vec<usize> = (0..keep).collect();
    if t_end < t_start {
        order.reverse();
    }
    let mut traj = JacobiTrajectory {
        t: Vec::with_capacity(keep),
        a: Vec::with_capacity(keep),
        ap: Vec::with_capacity(keep),
        samples: Vec::with_capacity(keep),
        aux: Vec::with_capacity(keep),
        status,
        stats: sol.stats,
        source: Arc::clone(&source),
        opts: *opts,
    };
    for i in order {
        let y = &sol.y[i];
        let t = sol.t[i];
        let aux = y[..na].to_vec();
        let sample = source
            .sample(t, &aux)
            .ok_or(JacobiError::OutOfRange(t))?;
        traj.t.push(t);
        traj.a.push(DMatrix::from_column_slice(k, k, &y[na..na + k * k]));
        traj.ap.push(DMatrix::from_column_slice(k, k, &y[na + k * k..]));
        traj.samples.push(sample);
        traj.aux.push(aux);
    }
    Ok(traj)
}

/// The point congruence `A(t1) = 0`, `A'(t1) = E` integrated to `t_end`.
pub fn point_congruence(
    source: Arc<dyn CurvatureSource>,
    t1: f64,
    t_end: f64,
    opts: &JacobiOptions,
) -> Result<JacobiTrajectory, JacobiError> {
    let k = source.rank();
    integrate_jacobi(
        source,
        &DMatrix::zeros(k, k),
        &DMatrix::identity(k, k),
        t1,
        t_end,
        opts,
    )
}

impl JacobiTrajectory {
    pub fn rank(&self) -> usize {
        self.source.rank()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    pub fn source(&self) -> &Arc<dyn CurvatureSource> {
        &self.source
    }

    pub fn options(&self) -> &JacobiOptions {
        &self.opts
    }

    /// Index of the sample nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.t.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i == self.t.len() {
            i - 1
        } else if (self.t[i] - t).abs() < (t - self.t[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// `(A(t), A'(t), aux(t))` by re-integrating from the nearest sample.
    pub fn state_at(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>), JacobiError> {
        let (lo, hi) = self.range();
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        if t < lo - slack || t > hi + slack {
            return Err(JacobiError::OutOfRange(t));
        }
        let i = self.nearest(t);
        if self.t[i] == t {
            return Ok((self.a[i].clone(), self.ap[i].clone(), self.aux[i].clone()));
        }
        let k = self.rank();
        let na = self.aux[i].len();
        let mut y0 = self.aux[i].clone();
        y0.extend_from_slice(self.a[i].as_slice());
        y0.extend_from_slice(self.ap[i].as_slice());
        let src = self.source.as_ref();
        let sol = ode::integrate(
            |s, y, dy| jacobi_rhs(src, s, y, dy),
            self.t[i],
            &y0,
            t,
            None,
            &self.opts.ode,
            |_, _| false,
        )?;
        let y = sol.last().1;
        Ok((
            DMatrix::from_column_slice(k, k, &y[na..na + k * k]),
            DMatrix::from_column_slice(k, k, &y[na + k * k..]),
            y[..na].to_vec(),
        ))
    }

    pub fn det_at(&self, t: f64) -> Result<f64, JacobiError> {
        Ok(self.state_at(t)?.0.determinant())
    }

    /// Curve sample at an arbitrary parameter.
    pub fn sample_at(&self, t: f64) -> Result<CurveSample, JacobiError> {
        let (_, _, aux) = self.state_at(t)?;
        self.source.sample(t, &aux).ok_or(JacobiError::OutOfRange(t))
    }

    /// Frobenius norm of `(A')ᵀA - AᵀA'` at sample `i`.
    pub fn lagrange_defect_at(&self, i: usize) -> f64 {
        lagrange_defect(&self.a[i], &self.ap[i])
    }

    /// Largest Lagrange defect over the samples.
    pub fn max_lagrange_defect(&self) -> f64 {
        (0..self.t.len())
            .map(|i| self.lagrange_defect_at(i))
            .fold(0.0, f64::max)
    }

    /// Smallest `σ_min([A; A'])` over the samples.
    pub fn min_kernel_margin(&self) -> f64 {
        (0..self.t.len())
            .map(|i| kernel_margin(&self.a[i], &self.ap[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `‖A'' + R A‖` at interval midpoints, with `A''` from a central
    /// difference of re-integrated `A'` values.
    pub fn ode_residual(&self, stride: usize) -> Result<f64, JacobiError> {
        let mut worst: f64 = 0.0;
        let h = 1e-4;
        for w in self.t.windows(2).step_by(stride.max(1)) {
            let tm = 0.5 * (w[0] + w[1]);
            let (a, _, aux) = self.state_at(tm)?;
            let (_, app_plus, _) = self.state_at(tm + h)?;
            let (_, app_minus, _) = self.state_at(tm - h)?;
            let app = (app_plus - app_minus) / (2.0 * h);
            let r = self
                .source
                .endomorphism(tm, &aux)
                .ok_or(JacobiError::OutOfRange(tm))?;
            worst = worst.max((app + r * a).norm());
        }
        Ok(worst)
    }
}

/// `‖(A')ᵀA - AᵀA'‖_F`.
pub fn lagrange_defect(a: &DMatrix<f64>, ap: &DMatrix<f64>) -> f64 {
    (ap.transpose() * a - a.transpose() * ap).norm()
}

/// Per-sample kinematics of a Jacobi tensor.
#[derive(Clone, Debug)]
pub struct CongruenceDiagnostics {
    pub rank: usize,
    pub t: Vec<f64>,
    /// False where `A` is singular or `|θ_f|` exceeds [`BLOWUP_LIMIT`].
    pub valid: Vec<bool>,
    pub b_f: Vec<DMatrix<f64>>,
    pub theta_f: Vec<f64>,
    /// `θ = tr(A'A⁻¹) = θ_f + (f∘c)'`.
    pub theta: Vec<f64>,
    pub omega: Vec<DMatrix<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    pub tr_sigma2: Vec<f64>,
    pub tr_omega2: Vec<f64>,
    pub det_a: Vec<f64>,
    pub fprime: Vec<f64>,
    /// `Ric(c', c')` and `Hess f(c', c')` copied from the curve samples.
    pub ric: Vec<f64>,
    pub hess: Vec<f64>,
    /// Largest difference between the shear and vorticity of `B_f` and of
    /// `B = A'A⁻¹`, relative to `max(1, max|B|)` at each sample.
    pub f_independence: f64,
}

fn split_parts(b: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let theta = b.trace();
    let bt = b.transpose();
    let omega = (b - &bt) * 0.5;
    let sigma = (b + &bt) * 0.5 - DMatrix::identity(k, k) * (theta / k as f64);
    (omega, sigma, theta)
}

/// `B_f = A'A⁻¹ - (1/k)(f∘c)' E`, `θ_f = tr B_f`, `ω_f`, `σ_f` per sample.
pub fn kinematics(traj: &JacobiTrajectory) -> CongruenceDiagnostics {
    let k = traj.rank();
    let kf = k as f64;
    let len = traj.t.len();
    let mut d = CongruenceDiagnostics {
        rank: k,
        t: traj.t.clone(),
        valid: Vec::with_capacity(len),
        b_f: Vec::with_capacity(len),
        theta_f: Vec::with_capacity(len),
        theta: Vec::with_capacity(len),
        omega: Vec::with_capacity(len),
        sigma: Vec::with_capacity(len),
        tr_sigma2: Vec::with_capacity(len),
        tr_omega2: Vec::with_capacity(len),
        det_a: Vec::with_capacity(len),
        fprime: Vec::with_capacity(len),
        ric: Vec::with_capacity(len),
        hess: Vec::with_capacity(len),
        f_independence: 0.0,
    };
    let nan = DMatrix::from_element(k, k, f64::NAN);
    for i in 0..len {
        let a = &traj.a[i];
        let fp = traj.samples[i].weight.first;
        d.det_a.push(a.determinant());
        d.fprime.push(fp);
        d.ric.push(traj.samples[i].ric);
        d.hess.push(traj.samples[i].weight.second);
        let inv = if smallest_singular_value(a) > 1e-13 * a.norm().max(1.0) {
            a.clone().try_inverse()
        } else {
            None
        };
        match inv {
            Some(inv) => {
                let b = &traj.ap[i] * inv;
                let b_f = &b - DMatrix::identity(k, k) * (fp / kf);
                let (omega, sigma, theta_f) = split_parts(&b_f, k);
                let (omega_b, sigma_b, theta) = split_parts(&b, k);
                let scale = b.amax().max(1.0);
                d.f_independence = d
                    .f_independence
                    .max((&omega - omega_b).amax() / scale)
                    .max((&sigma - sigma_b).amax() / scale);
                d.valid.push(theta_f.abs() <= BLOWUP_LIMIT && theta_f.is_finite());
                d.tr_sigma2.push((&sigma * &sigma).trace());
                d.tr_omega2.push((&omega * &omega).trace());
                d.theta_f.push(theta_f);
                d.theta.push(theta);
                d.b_f.push(b_f);
                d.omega.push(omega);
                d.sigma.push(sigma);
            }
            None => {
                d.valid.push(false);
                d.tr_sigma2.push(f64::NAN);
                d.tr_omega2.push(f64::NAN);
                d.theta_f.push(f64::NAN);
                d.theta.push(f64::NAN);
                d.b_f.push(nan.clone());
                d.omega.push(nan.clone());
                d.sigma.push(nan.clone());
            }
        }
    }
    d
}

impl CongruenceDiagnostics {
    /// `Ric_f^m(c', c')` per sample.
    pub fn ric_fm(&self, m: SyntheticDim) -> Vec<f64> {
        (0..self.t.len())
            .map(|i| self.ric[i] + self.hess[i] - m.reciprocal() * self.fprime[i].powi(2))
            .collect()
    }

    /// Largest relative mismatch of `θ = (det A)'/det A`, with `(det A)'`
    /// from a five-point stencil, over valid samples away from `exclude`.
    pub fn det_log_derivative_residual(&self, exclude: &Mask) -> f64 {
        let deriv = five_point_derivative(&self.t, &self.det_a);
        let mut worst: f64 = 0.0;
        for i in 0..self.t.len() {
            if let Some(dd) = deriv[i] {
                if !self.valid[i] || exclude.excluded(self.t[i]) {
                    continue;
                }
                let lhs = self.theta[i];
                let rhs = dd / self.det_a[i];
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
        }
        worst
    }
}

/// Parameters excluded from residual windows: an initial collar and
/// neighbourhoods of singular points.
#[derive(Clone, Debug, Default)]
pub struct Mask {
    pub windows: Vec<(f64, f64)>,
}

impl Mask {
    pub fn excluded(&self, t: f64) -> bool {
        self.windows.iter().any(|&(lo, hi)| t >= lo && t <= hi)
    }

    /// Collar `[a, a + collar]` at the start plus `±radius` around each zero.
    pub fn standard(start: f64, collar: f64, zeros: &[f64], radius: f64) -> Self {
        let mut windows = vec![(start - collar, start + collar)];
        windows.extend(zeros.iter().map(|z| (z - radius, z + radius)));
        Mask { windows }
    }
}

/// Default initial collar and zero radius for residual windows.
pub const DEFAULT_COLLAR: f64 = 0.2;
pub const DEFAULT_ZERO_RADIUS: f64 = 0.25;

/// Fourth-order central derivative on a uniform series; `None` near the ends,
/// at non-uniform spacing or where any stencil value is not finite.
pub fn five_point_derivative(t: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    let n = t.len();
    let mut out = vec![None; n];
    for i in 2..n.saturating_sub(2) {
        let h = t[i + 1] - t[i];
        let uniform = (t[i] - t[i - 1] - h).abs() <= 1e-9 * h
            && (t[i + 2] - t[i + 1] - h).abs() <= 1e-9 * h
            && (t[i - 1] - t[i - 2] - h).abs() <= 1e-9 * h;
        let vals = [y[i - 2], y[i - 1], y[i + 1], y[i + 2]];
        if uniform && vals.iter().all(|v| v.is_finite()) {
            out[i] = Some((vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h));
        }
    }
    out
}

/// Residual series of the `(m, f)`-Raychaudhuri identity and slacks of the
/// two one-sided inequalities.
#[derive(Clone, Debug)]
pub struct RaychaudhuriReport {
    pub t: Vec<f64>,
    /// `θ_f' + Ric_f^m + tr ω² + tr σ² + θ²/k + (f')²/m`; `None` where masked.
    pub residual: Vec<Option<f64>>,
    /// Finite `m`: `-Ric_f^m - tr σ² - θ_f²/(k+m) - θ_f'`.
    /// Infinite `m`: `-Ric_f - tr σ² - θ_f²/k - 2 θ_f f'/k - θ_f'`.
    pub inequality_slack: Vec<Option<f64>>,
    pub max_abs_residual: f64,
    pub min_slack: f64,
    pub evaluated: usize,
}

/// Evaluate the Raychaudhuri identity on `diag`, skipping masked samples.
pub fn raychaudhuri_residual(
    diag: &CongruenceDiagnostics,
    m: SyntheticDim,
    mask: &Mask,
) -> Result<RaychaudhuriReport, JacobiError> {
    let k = diag.rank as f64;
    let theta_f: Vec<f64> = (0..diag.t.len())
        .map(|i| if diag.valid[i] { diag.theta_f[i] } else { f64::NAN })
        .collect();
    let deriv = five_point_derivative(&diag.t, &theta_f);
    let ric_fm = diag.ric_fm(m);
    let mut rep = RaychaudhuriReport {
        t: diag.t.clone(),
        residual: vec![None; diag.t.len()],
        inequality_slack: vec![None; diag.t.len()],
        max_abs_residual: 0.0,
        min_slack: f64::INFINITY,
        evaluated: 0,
    };
    for i in 0..diag.t.len() {
        let Some(dth) = deriv[i] else { continue };
        if mask.excluded(diag.t[i]) {
            continue;
        }
        let th_f = diag.theta_f[i];
        let th = diag.theta[i];
        let fp = diag.fprime[i];
        let res = dth
            + ric_fm[i]
            + diag.tr_omega2[i]
            + diag.tr_sigma2[i]
            + th * th / k
            + m.reciprocal() * fp * fp;
        let slack = match m {
            SyntheticDim::Finite(mv) => -ric_fm[i] - diag.tr_sigma2[i] - th_f * th_f / (k + mv) - dth,
            SyntheticDim::Infinite => {
                -ric_fm[i] - diag.tr_sigma2[i] - th_f * th_f / k - 2.0 * th_f * fp / k - dth
            }
        };
        rep.residual[i] = Some(res);
        rep.inequality_slack[i] = Some(slack);
        rep.max_abs_residual = rep.max_abs_residual.max(res.abs());
        rep.min_slack = rep.min_slack.min(slack);
        rep.evaluated += 1;
    }
    if rep.evaluated < 5 {
        return Err(JacobiError::InsufficientSamples(rep.evaluated));
    }
    Ok(rep)
}

/// Mean curvature evolution along a normal congruence.
#[derive(Clone, Debug)]
pub struct MeanCurvatureReport {
    pub t: Vec<f64>,
    /// `H_f = H - ⟨∇f, N⟩` with `H = tr(A'A⁻¹)`.
    pub h_f: Vec<f64>,
    /// `H_f' + Ric(N,N) + Hess f(N,N) + |∇N|^2`, `None` where not evaluated.
    pub residual: Vec<Option<f64>>,
    pub max_abs_residual: f64,
}

/// Integrate the normal congruence `A(0) = E`, `A'(0) = shape` on `[t0, t1]`
/// and evaluate the mean curvature evolution identity, with `|∇N|^2 = tr(B Bᵀ)`.
pub fn mean_curvature_evolution(
    source: Arc<dyn CurvatureSource>,
    shape: &DMatrix<f64>,
    t0: f64,
    t1: f64,
    opts: &JacobiOptions,
) -> Result<MeanCurvatureReport, JacobiError> {
    let k = source.rank();
    let traj = integrate_jacobi(source, &DMatrix::identity(k, k), shape, t0, t1, opts)?;
    let diag = kinematics(&traj);
    let deriv = five_point_derivative(
        &diag.t,
        &(0..diag.t.len())
            .map(|i| if diag.valid[i] { diag.theta_f[i] } else { f64::NAN })
            .collect::<Vec<_>>(),
    );
    let mut rep = MeanCurvatureReport {
        t: diag.t.clone(),
        h_f: diag.theta_f.clone(),
        residual: vec![None; diag.t.len()],
        max_abs_residual: 0.0,
    };
    let mut count = 0;
    for i in 0..diag.t.len() {
        let Some(dh) = deriv[i] else { continue };
        let b = &diag.b_f[i] + DMatrix::identity(k, k) * (diag.fprime[i] / k as f64);
        let grad_n2 = (&b * b.transpose()).trace();
        let res = dh + diag.ric[i] + diag.hess[i] + grad_n2;
        rep.residual[i] = Some(res);
        rep.max_abs_residual = rep.max_abs_residual.max(res.abs());
        count += 1;
    }
    if count < 5 {
        return Err(JacobiError::InsufficientSamples(count));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_traj(c: f64, t_end: f64) -> JacobiTrajectory {
        point_congruence(
            Arc::new(PrescribedCurvature::scalar(3, c)),
            0.0,
            t_end,
            &JacobiOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_scalar_solutions() {
        let flat = scalar_traj(0.0, 2.0);
        let sphere = scalar_traj(1.0, 2.0);
        let hyper = scalar_traj(-1.0, 2.0);
        for i in (0..flat.t.len()).step_by(97) {
            let t = flat.t[i];
            let e = DMatrix::<f64>::identity(3, 3);
            assert!((&flat.a[i] - &e * t).amax() < 1e-12);
            assert!((&sphere.a[i] - &e * t.sin()).amax() < 1e-11);
            assert!((&hyper.a[i] - &e * t.sinh()).amax() < 1e-11);
        }
    }

    #[test]
    fn backward_integration_orders_samples() {
        let traj = point_congruence(
            Arc::new(PrescribedCurvature::scalar(2, 1.0)),
            1.0,
            -1.0,
            &JacobiOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.range(), (-1.0, 1.0));
        let i = traj.nearest(0.0);
        assert!((traj.a[i][(0, 0)] - (0.0f64 - 1.0).sin()).abs() < 1e-11);
    }

    #[test]
    fn invalid_initial_data_rejected() {
        let src: Arc<dyn CurvatureSource> = Arc::new(PrescribedCurvature::scalar(2, 0.0));
        let mut a = DMatrix::identity(2, 2);
        a[(1, 1)] = 0.0;
        let mut ap = DMatrix::identity(2, 2);
        ap[(1, 1)] = 0.0;
        let err = integrate_jacobi(src, &a, &ap, 0.0, 1.0, &JacobiOptions::default()).unwrap_err();
        assert!(matches!(err, JacobiError::InvalidInitialData(_)));
    }

    #[test]
    fn expansion_of_sine_congruence() {
        let traj = scalar_traj(1.0, 2.5);
        let diag = kinematics(&traj);
        let i = traj.nearest(2.0);
        assert!((diag.theta_f[i] - 3.0 / 2f64.tan()).abs() < 1e-9);
    }

    #[test]
    fn state_at_matches_closed_form() {
        let traj = scalar_traj(1.0, 4.0);
        let (a, ap, _) = traj.state_at(std::f64::consts::PI).unwrap();
        assert!(a.amax() < 1e-11);
        assert!((ap[(0, 0)] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn stencil_is_fourth_order() {
        let t: Vec<f64> = (0..50).map(|i| 0.01 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        let d = five_point_derivative(&t, &y);
        assert!(d[0].is_none() && d[49].is_none());
        for i in 2..48 {
            assert!((d[i].unwrap() - t[i].cos()).abs() < 1e-9);
        }
    }
}
