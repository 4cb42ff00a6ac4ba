//! Geodesics, parallel frames and the curvature endomorphisms along them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::manifold::{
    covariant_hessian, CausalCharacter, GeometryError, MetricField, PointGeometry, ScalarField,
};
use crate::ode::{self, OdeError, OdeOptions, OdeStats, OdeStatus};

/// Relative width of the null band used when classifying initial velocities.
pub const CHARACTER_TOL: f64 = 1e-9;

/// Frame Gram drift above which the frame is re-orthonormalized.
pub const FRAME_DRIFT_LIMIT: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CongruenceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error("initial velocity is spacelike (g(v,v) = {0})")]
    Spacelike(f64),
    #[error("Gram-Schmidt pivot {pivot:e} below threshold while building the frame")]
    FrameDegeneracy { pivot: f64 },
    #[error("parameter {t} outside trajectory range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("invalid range [{a}, {b}]")]
    InvalidRange { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeodesicCharacter {
    Timelike,
    Null,
}

impl GeodesicCharacter {
    /// Dimension of the transverse space: `n-1` for timelike, `n-2` for null.
    pub fn rank(&self, n: usize) -> usize {
        match self {
            GeodesicCharacter::Timelike => n - 1,
            GeodesicCharacter::Null => n - 2,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            GeodesicCharacter::Timelike => -1.0,
            GeodesicCharacter::Null => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrajectoryStatus {
    Complete,
    /// The curve left the chart domain; samples stop before this parameter.
    DomainExit { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicOptions {
    pub ode: OdeOptions,
    /// Spacing of the recorded samples.
    pub sample_dt: f64,
    /// Rescale a timelike initial velocity to unit length.
    pub normalize: bool,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            ode: OdeOptions::with_tolerances(1e-9, 1e-11),
            sample_dt: 0.01,
            normalize: true,
        }
    }
}

/// Uniform grid from `a` to `b` with spacing close to `dt`, endpoints included.
pub fn uniform_grid(a: f64, b: f64, dt: f64) -> Vec<f64> {
    let steps = ((b - a).abs() / dt).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 })
        .collect()
}

/// A sampled affinely parametrized geodesic.
#[derive(Clone, Debug)]
pub struct GeodesicTrajectory {
    pub character: GeodesicCharacter,
    /// `g(c', c')` of the initial velocity after normalization.
    pub norm: f64,
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    /// `c'' = -Γ(c', c')`, kept for Hermite interpolation.
    pub acc: Vec<DVector<f64>>,
    pub status: TrajectoryStatus,
    pub stats: OdeStats,
}

fn split_state(y: &[f64], n: usize) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_column_slice(&y[..n]),
        DVector::from_column_slice(&y[n..2 * n]),
    )
}

/// Quintic Hermite basis on `[0, 1]`: values and first and second derivatives.
fn quintic_hermite(s: f64) -> [[f64; 6]; 3] {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    [
        [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
            0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5,
            0.5 * s3 - s4 + 0.5 * s5,
            -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        ],
        [
            -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4,
            1.5 * s2 - 4.0 * s3 + 2.5 * s4,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            30.0 * s2 - 60.0 * s3 + 30.0 * s4,
        ],
        [
            -60.0 * s + 180.0 * s2 - 120.0 * s3,
            -36.0 * s + 96.0 * s2 - 60.0 * s3,
            1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3,
            3.0 * s - 12.0 * s2 + 10.0 * s3,
            -24.0 * s + 84.0 * s2 - 60.0 * s3,
            60.0 * s - 180.0 * s2 + 120.0 * s3,
        ],
    ]
}

impl GeodesicTrajectory {
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    fn locate(&self, t: f64) -> Result<usize, CongruenceError> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(CongruenceError::OutOfRange { t, lo, hi });
        }
        let i = self.t.partition_point(|&s| s <= t);
        Ok(i.saturating_sub(1).min(self.t.len().saturating_sub(2)))
    }

    /// Position, velocity and acceleration at `t` by quintic Hermite interpolation.
    pub fn interpolate(
        &self,
        t: f64,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>), CongruenceError> {
        if self.t.len() == 1 {
            return Ok((self.x[0].clone(), self.v[0].clone(), self.acc[0].clone()));
        }
        let i = self.locate(t)?;
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let b = quintic_hermite(s);
        let terms = [
            &self.x[i],
            &self.v[i],
            &self.acc[i],
            &self.acc[i + 1],
            &self.v[i + 1],
            &self.x[i + 1],
        ];
        let scale = [1.0, h, h * h, h * h, h, 1.0];
        let combine = |row: usize, div: f64| {
            let mut out = DVector::zeros(self.dim());
            for k in 0..6 {
                out += terms[k] * (b[row][k] * scale[k] / div);
            }
            out
        };
        Ok((combine(0, 1.0), combine(1, h), combine(2, h * h)))
    }

    /// Largest `|g(c', c') - norm|` over the samples.
    pub fn norm_drift(&self, metric: &MetricField) -> f64 {
        self.x
            .iter()
            .zip(&self.v)
            .map(|(x, v)| (metric.inner(x.as_slice(), v, v) - self.norm).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `‖c'' + Γ(c', c')‖` at interval midpoints of the interpolant.
    pub fn geodesic_residual(&self, metric: &MetricField) -> Result<f64, CongruenceError> {
        let mut worst: f64 = 0.0;
        for w in self.t.windows(2) {
            let tm = 0.5 * (w[0] + w[1]);
            let (x, v, a) = self.interpolate(tm)?;
            let geo = PointGeometry::at_unchecked(metric, x.as_slice(), false)?;
            worst = worst.max((a + geo.christoffel.contract(&v, &v)).norm());
        }
        Ok(worst)
    }
}

/// Geodesic right-hand side for the state `[x, v]`. Degenerate points yield NaN.
fn geodesic_rhs(metric: &MetricField, y: &[f64], dy: &mut [f64]) {
    let n = metric.dim();
    let (x, v) = split_state(y, n);
    match PointGeometry::at_unchecked(metric, x.as_slice(), false) {
        Ok(geo) => {
            let acc = geo.christoffel.contract(&v, &v);
            dy[..n].copy_from_slice(v.as_slice());
            for a in 0..n {
                dy[n + a] = -acc[a];
            }
        }
        Err(_) => dy.iter_mut().for_each(|d| *d = f64::NAN),
    }
}

/// Classify and optionally normalize an initial velocity.
pub fn prepare_velocity(
    metric: &MetricField,
    p0: &[f64],
    v0: &DVector<f64>,
    normalize: bool,
) -> Result<(GeodesicCharacter, DVector<f64>, f64), CongruenceError> {
    let q = metric.inner(p0, v0, v0);
    match crate::manifold::causal_character_with_tol(metric, p0, v0, CHARACTER_TOL)? {
        CausalCharacter::Spacelike => Err(CongruenceError::Spacelike(q)),
        CausalCharacter::Null => Ok((GeodesicCharacter::Null, v0.clone(), 0.0)),
        CausalCharacter::Timelike if normalize => {
            Ok((GeodesicCharacter::Timelike, v0 / (-q).sqrt(), -1.0))
        }
        CausalCharacter::Timelike => Ok((GeodesicCharacter::Timelike, v0.clone(), q)),
    }
}

/// Solve `c'' + Γ(c', c') = 0` on `[a, b]` with `c(a) = p0`, `c'(a) = v0`.
pub fn integrate_geodesic(
    metric: &MetricField,
    p0: &[f64],
    v0: &DVector<f64>,
    range: (f64, f64),
    opts: &GeodesicOptions,
) -> Result<GeodesicTrajectory, CongruenceError> {
    let (a, b) = range;
    if !(b > a) {
        return Err(CongruenceError::InvalidRange { a, b });
    }
    PointGeometry::at(metric, p0, false)?;
    let n = metric.dim();
    let (character, v0, norm) = prepare_velocity(metric, p0, v0, opts.normalize)?;
    let grid = uniform_grid(a, b, opts.sample_dt);
    let mut y0 = p0.to_vec();
    y0.extend_from_slice(v0.as_slice());
    let sol = ode::integrate(
        |_, y, dy| geodesic_rhs(metric, y, dy),
        a,
        &y0,
        b,
        Some(&grid[1..]),
        &opts.ode,
        |_, y| metric.domain_violation(&y[..n]).is_some(),
    )?;
    let mut keep = sol.t.len();
    let status = match sol.status {
        OdeStatus::Completed => TrajectoryStatus::Complete,
        OdeStatus::Stopped(t) => {
            keep -= 1;
            TrajectoryStatus::DomainExit { t }
        }
    };
    let mut out = GeodesicTrajectory {
        character,
        norm,
        t: Vec::with_capacity(keep),
        x: Vec::with_capacity(keep),
        v: Vec::with_capacity(keep),
        acc: Vec::with_capacity(keep),
        status,
        stats: sol.stats,
    };
    for i in 0..keep {
        // off-grid stop records are excluded by `keep`
        out.t.push(sol.t[i]);
        let (x, v) = split_state(&sol.y[i], n);
        out.x.push(x);
        out.v.push(v);
        out.acc.push(DVector::from_column_slice(&sol.dy[i][n..2 * n]));
    }
    Ok(out)
}

/// Parallel frame along a geodesic: `k` transverse vectors per sample, plus
/// the null partner `n` (with `g(n, β') = -1`) in the null case.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub character: GeodesicCharacter,
    pub t: Vec<f64>,
    /// Columns are frame vectors in coordinates, `n x k` per sample.
    pub vectors: Vec<DMatrix<f64>>,
    pub null_partner: Option<Vec<DVector<f64>>>,
    /// Curve data from the joint integration, aligned with `t`.
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    /// Parameters at which the drift monitor re-orthonormalized the frame.
    pub reorthonormalized_at: Vec<f64>,
}

pub(crate) fn gram_schmidt_against(
    g: &DMatrix<f64>,
    fixed: &[(DVector<f64>, f64)],
    k: usize,
) -> Result<DMatrix<f64>, CongruenceError> {
    // `fixed` lists mutually orthogonal vectors with their self-inner-products.
    let n = g.nrows();
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut worst_pivot = f64::INFINITY;
    for i in 0..n {
        if chosen.len() == k {
            break;
        }
        let mut w = DVector::zeros(n);
        w[i] = 1.0;
        for (f, ff) in fixed {
            w -= f * (ip(&w, f) / ff);
        }
        let base = ip(&w, &w);
        if base <= PIVOT_TOL {
            worst_pivot = worst_pivot.min(base.max(0.0));
            continue;
        }
        let mut r = w.clone();
        for e in &chosen {
            r -= e * ip(&r, e);
        }
        // second pass for numerical orthogonality
        for e in &chosen {
            r -= e * ip(&r, e);
        }
        let rr = ip(&r, &r);
        if rr <= 1e-6 * base || rr <= PIVOT_TOL {
            worst_pivot = worst_pivot.min(rr.max(0.0));
            continue;
        }
        chosen.push(r / rr.sqrt());
    }
    if chosen.len() < k {
        return Err(CongruenceError::FrameDegeneracy {
            pivot: if worst_pivot.is_finite() { worst_pivot } else { 0.0 },
        });
    }
    Ok(DMatrix::from_columns(&chosen))
}

/// Initial transverse frame at `p` for velocity `v`.
///
/// Timelike: Gram-Schmidt of coordinate directions against `v`.
/// Null: pick a unit timelike `u` with `α = -g(u, v) > 0`, set `s = v/α - u`,
/// the partner `n = (u - s)/(2α)`, and orthonormalize against `{u, s}`.
pub fn initial_frame(
    metric: &MetricField,
    p: &[f64],
    v: &DVector<f64>,
    character: GeodesicCharacter,
) -> Result<(DMatrix<f64>, Option<DVector<f64>>), CongruenceError> {
    let g = metric.eval(p);
    let n = g.nrows();
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    match character {
        GeodesicCharacter::Timelike => {
            let vv = ip(v, v);
            Ok((gram_schmidt_against(&g, &[(v.clone(), vv)], n - 1)?, None))
        }
        GeodesicCharacter::Null => {
            let eig = nalgebra::SymmetricEigen::new(g.clone());
            let (idx, _) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            let mut u: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
            let uu = ip(&u, &u);
            if uu >= 0.0 {
                return Err(GeometryError::NonLorentzian { negative: 0 }.into());
            }
            u /= (-uu).sqrt();
            if ip(&u, v) > 0.0 {
                u = -u;
            }
            let alpha = -ip(&u, v);
            let s = v / alpha - &u;
            let partner = (&u - &s) / (2.0 * alpha);
            let frame = gram_schmidt_against(&g, &[(u.clone(), -1.0), (s.clone(), ip(&s, &s))], n - 2)?;
            Ok((frame, Some(partner)))
        }
    }
}

/// Parallel transport right-hand side for `[x, v, W_1, ..., W_j]`.
pub(crate) fn transport_rhs(metric: &MetricField, n: usize, extra: usize, y: &[f64], dy: &mut [f64]) {
    let (x, v) = split_state(y, n);
    match PointGeometry::at_unchecked(metric, x.as_slice(), false) {
        Ok(geo) => {
            let acc = geo.christoffel.contract(&v, &v);
            dy[..n].copy_from_slice(v.as_slice());
            for a in 0..n {
                dy[n + a] = -acc[a];
            }
            for j in 0..extra {
                let off = 2 * n + j * n;
                let w = DVector::from_column_slice(&y[off..off + n]);
                let dw = geo.christoffel.contract(&v, &w);
                for a in 0..n {
                    dy[off + a] = -dw[a];
                }
            }
        }
        Err(_) => dy.iter_mut().for_each(|d| *d = f64::NAN),
    }
}

/// Largest deviation of the transverse Gram matrix from the identity and of
/// `g(E_i, c')` from zero.
pub fn frame_drift(g: &DMatrix<f64>, v: &DVector<f64>, frame: &DMatrix<f64>) -> f64 {
    let gram = frame.transpose() * g * frame;
    let k = gram.nrows();
    let orth = (frame.transpose() * g * v).amax();
    (gram - DMatrix::identity(k, k)).amax().max(orth)
}

/// Transport the initial frame of `geo` along the curve by jointly
/// integrating the geodesic and transport equations on the sample grid.
pub fn parallel_frame(
    metric: &MetricField,
    geo: &GeodesicTrajectory,
    opts: &GeodesicOptions,
) -> Result<FrameField, CongruenceError> {
    let n = metric.dim();
    let k = geo.character.rank(n);
    let (e0, partner0) = initial_frame(metric, geo.x[0].as_slice(), &geo.v[0], geo.character)?;
    let extra = k + usize::from(partner0.is_some());
    let pack = |x: &DVector<f64>, v: &DVector<f64>, e: &DMatrix<f64>, p: &Option<DVector<f64>>| {
        let mut y = Vec::with_capacity(2 * n + extra * n);
        y.extend_from_slice(x.as_slice());
        y.extend_from_slice(v.as_slice());
        y.extend_from_slice(e.as_slice());
        if let Some(p) = p {
            y.extend_from_slice(p.as_slice());
        }
        y
    };
    let unpack = |y: &[f64]| {
        let (x, v) = split_state(y, n);
        let e = DMatrix::from_column_slice(n, k, &y[2 * n..2 * n + n * k]);
        let p = (extra > k).then(|| DVector::from_column_slice(&y[2 * n + n * k..]));
        (x, v, e, p)
    };

    let mut out = FrameField {
        character: geo.character,
        t: vec![geo.t[0]],
        vectors: vec![e0.clone()],
        null_partner: partner0.as_ref().map(|p| vec![p.clone()]),
        x: vec![geo.x[0].clone()],
        v: vec![geo.v[0].clone()],
        reorthonormalized_at: Vec::new(),
    };
    let t_end = *geo.t.last().unwrap();
    let mut t_cur = geo.t[0];
    let mut y_cur = pack(&geo.x[0], &geo.v[0], &e0, &partner0);
    let mut next = 1usize;
    while next < geo.t.len() {
        let sol = ode::integrate(
            |_, y, dy| transport_rhs(metric, n, extra, y, dy),
            t_cur,
            &y_cur,
            t_end,
            Some(&geo.t[next..]),
            &opts.ode,
            |_, y| {
                let (x, v, e, _) = unpack(y);
                frame_drift(&metric.eval(x.as_slice()), &v, &e) > FRAME_DRIFT_LIMIT
            },
        )?;
        for (t, y) in sol.t.iter().zip(&sol.y).skip(1) {
            if next < geo.t.len() && *t == geo.t[next] {
                let (x, v, e, p) = unpack(y);
                out.t.push(*t);
                out.x.push(x);
                out.v.push(v);
                out.vectors.push(e);
                if let (Some(list), Some(p)) = (out.null_partner.as_mut(), p) {
                    list.push(p);
                }
                next += 1;
            }
        }
        match sol.status {
            OdeStatus::Completed => break,
            OdeStatus::Stopped(ts) => {
                let (x, v, _, _) = unpack(sol.y.last().unwrap());
                let (e, p) = initial_frame(metric, x.as_slice(), &v, geo.character)?;
                out.reorthonormalized_at.push(ts);
                t_cur = ts;
                y_cur = pack(&x, &v, &e, &p);
            }
        }
    }
    Ok(out)
}

impl FrameField {
    /// Largest frame Gram / orthogonality deviation over the samples.
    pub fn max_drift(&self, metric: &MetricField) -> f64 {
        (0..self.t.len())
            .map(|i| frame_drift(&metric.eval(self.x[i].as_slice()), &self.v[i], &self.vectors[i]))
            .fold(0.0, f64::max)
    }

    /// Largest `‖∇_{c'} E_i‖`, with `E_i'` from a five-point stencil on the
    /// samples. Stencils spanning a re-orthonormalization are skipped.
    pub fn transport_residual(&self, metric: &MetricField) -> Result<f64, CongruenceError> {
        let mut worst: f64 = 0.0;
        for i in 2..self.t.len().saturating_sub(2) {
            let (lo, hi) = (self.t[i - 2], self.t[i + 2]);
            if self.reorthonormalized_at.iter().any(|&r| (r - lo) * (r - hi) <= 0.0) {
                continue;
            }
            let h = (hi - lo) / 4.0;
            let geo = PointGeometry::at_unchecked(metric, self.x[i].as_slice(), false)?;
            for j in 0..self.vectors[i].ncols() {
                let col = |k: usize| self.vectors[k].column(j);
                let de = (col(i - 2) - col(i + 2) + (col(i + 1) - col(i - 1)) * 8.0) / (12.0 * h);
                let e = self.vectors[i].column(j).into_owned();
                let cov = de + geo.christoffel.contract(&self.v[i], &e);
                worst = worst.max(cov.norm());
            }
        }
        Ok(worst)
    }
}

/// Matrix of `v -> R(v, c')c'` on the frame at a point.
///
/// Returns the operator matrix `M` with `R(E_i, c')c' = Σ_j M_{ji} E_j`,
/// computed from the inner products `⟨R(E_i, c')c', E_j⟩`.
/// Operator matrix `⟨K E_i, E_j⟩` of a precomputed `K = R(·, v)v`.
pub fn endomorphism_from_operator(g: &DMatrix<f64>, k_op: &DMatrix<f64>, frame: &DMatrix<f64>) -> DMatrix<f64> {
    (frame.transpose() * g * k_op * frame).transpose()
}

pub fn endomorphism_at(
    geo: &PointGeometry,
    v: &DVector<f64>,
    frame: &DMatrix<f64>,
) -> DMatrix<f64> {
    let riem = geo.riemann();
    let k = frame.ncols();
    let images: Vec<DVector<f64>> = (0..k)
        .map(|i| riem.apply(&frame.column(i).into_owned(), v, v))
        .collect();
    DMatrix::from_fn(k, k, |j, i| {
        (images[i].transpose() * &geo.g * frame.column(j))[(0, 0)]
    })
}

/// Weight data along the curve: `f(c(t))`, `(f∘c)'(t)` and `Hess f(c', c')`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightJet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn weight_at(geo: &PointGeometry, f: &ScalarField, x: &DVector<f64>, v: &DVector<f64>) -> WeightJet {
    let jet = f.jet(x.as_slice());
    let hess = covariant_hessian(&geo.christoffel, &jet);
    WeightJet {
        value: jet.value,
        first: jet.grad.dot(v),
        second: (v.transpose() * hess * v)[(0, 0)],
    }
}

/// `R_f = R + (1/k) Hess f(c', c') E + (1/k)^2 ((f∘c)')^2 E` with `k` the transverse rank.
pub fn modify_endomorphism(r: &DMatrix<f64>, weight: &WeightJet) -> DMatrix<f64> {
    let k = r.nrows();
    let kf = k as f64;
    let shift = weight.second / kf + (weight.first / kf).powi(2);
    r + DMatrix::identity(k, k) * shift
}

fn sample_index(frame: &FrameField, t: f64) -> Result<usize, CongruenceError> {
    let (lo, hi) = (frame.t[0], *frame.t.last().unwrap());
    frame
        .t
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or(CongruenceError::OutOfRange { t, lo, hi })
}

/// `R(t)` at a sample parameter of the frame.
pub fn curvature_endomorphism(
    metric: &MetricField,
    frame: &FrameField,
    t: f64,
) -> Result<DMatrix<f64>, CongruenceError> {
    let i = sample_index(frame, t)?;
    let geo = PointGeometry::at(metric, frame.x[i].as_slice(), true)?;
    Ok(endomorphism_at(&geo, &frame.v[i], &frame.vectors[i]))
}

/// `R_f(t)` at a sample parameter of the frame.
pub fn modified_endomorphism(
    metric: &MetricField,
    f: &ScalarField,
    frame: &FrameField,
    t: f64,
) -> Result<DMatrix<f64>, CongruenceError> {
    let i = sample_index(frame, t)?;
    let geo = PointGeometry::at(metric, frame.x[i].as_slice(), true)?;
    let r = endomorphism_at(&geo, &frame.v[i], &frame.vectors[i]);
    Ok(modify_endomorphism(&r, &weight_at(&geo, f, &frame.x[i], &frame.v[i])))
}

/// `R(t)`, `R_f(t)` and the weight data at every frame sample.
#[derive(Clone, Debug)]
pub struct EndomorphismSeries {
    pub t: Vec<f64>,
    pub r: Vec<DMatrix<f64>>,
    pub r_f: Vec<DMatrix<f64>>,
    pub weight: Vec<WeightJet>,
    /// `Ric(c', c')` from the full Ricci tensor.
    pub ric: Vec<f64>,
}

impl EndomorphismSeries {
    pub fn build(
        metric: &MetricField,
        f: &ScalarField,
        frame: &FrameField,
    ) -> Result<Self, CongruenceError> {
        let mut out = EndomorphismSeries {
            t: frame.t.clone(),
            r: Vec::with_capacity(frame.t.len()),
            r_f: Vec::with_capacity(frame.t.len()),
            weight: Vec::with_capacity(frame.t.len()),
            ric: Vec::with_capacity(frame.t.len()),
        };
        for i in 0..frame.t.len() {
            let geo = PointGeometry::at_unchecked(metric, frame.x[i].as_slice(), true)?;
            let v = &frame.v[i];
            let r = endomorphism_at(&geo, v, &frame.vectors[i]);
            let w = weight_at(&geo, f, &frame.x[i], v);
            out.ric.push((v.transpose() * geo.riemann().ricci() * v)[(0, 0)]);
            out.r_f.push(modify_endomorphism(&r, &w));
            out.r.push(r);
            out.weight.push(w);
        }
        Ok(out)
    }

    /// Largest `‖R - Rᵀ‖∞` over the samples.
    pub fn max_asymmetry(&self) -> f64 {
        self.r
            .iter()
            .map(|r| (r - r.transpose()).amax())
            .fold(0.0, f64::max)
    }
}

/// Well-definedness of the null quotient endomorphism at one sample: the
/// change in `⟨R(E_i + λβ', β')β', E_j + μβ'⟩` when `λ = μ = 1` are added,
/// together with `|g(R(E_i, β')β', β')|`.
pub fn quotient_invariance_residual(
    metric: &MetricField,
    frame: &FrameField,
    index: usize,
) -> Result<f64, CongruenceError> {
    let geo = PointGeometry::at(metric, frame.x[index].as_slice(), true)?;
    let riem = geo.riemann();
    let l = &frame.v[index];
    let e = &frame.vectors[index];
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &geo.g * b)[(0, 0)];
    let mut worst: f64 = 0.0;
    for i in 0..e.ncols() {
        let ei = e.column(i).into_owned();
        let base = riem.apply(&ei, l, l);
        let shifted = riem.apply(&(&ei + l), l, l);
        worst = worst.max(ip(&base, l).abs());
        for j in 0..e.ncols() {
            let ej = e.column(j).into_owned();
            worst = worst.max((ip(&shifted, &(&ej + l)) - ip(&base, &ej)).abs());
        }
    }
    Ok(worst)
}
