//! Zeros of `det A`, and the interval statements that locate them.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    integrate_jacobi, kinematics, CongruenceDiagnostics, CurvatureSource, JacobiError,
    JacobiOptions, JacobiTrajectory,
};
use crate::manifold::SyntheticDim;

/// Bisection stops when the bracket is this narrow.
pub const BISECTION_TOL: f64 = 1e-10;

/// `σ_min(A)` threshold for zeros without a sign change of `det A`.
pub const SINGULAR_VALUE_TOL: f64 = 1e-9;

/// Containment tolerance for predicted intervals.
pub const INTERVAL_TOL: f64 = 1e-6;

/// Curvature hypotheses are accepted down to this value.
pub const HYPOTHESIS_TOL: f64 = -1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZeroCertificate {
    /// `det A` has opposite signs at the ends of the final bracket.
    SignChange { det_left: f64, det_right: f64 },
    /// `σ_min(A)` falls below [`SINGULAR_VALUE_TOL`] at the reported point.
    SingularValue { sigma_min: f64 },
    /// The zero is prescribed by the initial data.
    Initial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugateZero {
    pub t: f64,
    pub certificate: ZeroCertificate,
    /// Largest `|θ_f|` over valid samples within `1e-3` of the zero.
    pub collar_theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateReport {
    pub zeros: Vec<ConjugateZero>,
    /// Parameter of the initial zero `A(a) = 0`, excluded from `zeros`.
    pub initial_zero: Option<f64>,
}

impl ConjugateReport {
    pub fn first(&self) -> Option<f64> {
        self.zeros.first().map(|z| z.t)
    }
}

fn sigma_min(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn bisect(traj: &JacobiTrajectory, mut lo: f64, mut hi: f64, mut dlo: f64) -> Result<ConjugateZero, JacobiError> {
    let mut dhi = traj.det_at(hi)?;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let dm = traj.det_at(mid)?;
        if dm == 0.0 {
            lo = mid;
            hi = mid;
            dlo = 0.0;
            dhi = 0.0;
            break;
        }
        if dm.signum() == dlo.signum() {
            lo = mid;
            dlo = dm;
        } else {
            hi = mid;
            dhi = dm;
        }
    }
    Ok(ConjugateZero {
        t: 0.5 * (lo + hi),
        certificate: ZeroCertificate::SignChange {
            det_left: dlo,
            det_right: dhi,
        },
        collar_theta: 0.0,
    })
}

fn golden_min(traj: &JacobiTrajectory, mut lo: f64, mut hi: f64) -> Result<(f64, f64), JacobiError> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |t: f64| -> Result<f64, JacobiError> { Ok(sigma_min(&traj.state_at(t)?.0)) };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, eval(t)?))
}

/// All interior zeros of `det A` on the trajectory.
///
/// Sign changes of `det A` between samples are refined by bisection. Local
/// minima of `σ_min(A)` without a sign change are refined by golden-section
/// search and reported when the minimum is below [`SINGULAR_VALUE_TOL`]. A
/// zero at the first sample (the initial condition `A(a) = 0`) is excluded.
pub fn detect_conjugate(traj: &JacobiTrajectory) -> Result<ConjugateReport, JacobiError> {
    let len = traj.t.len();
    let dets: Vec<f64> = traj.a.iter().map(|a| a.determinant()).collect();
    let sv: Vec<f64> = traj.a.iter().map(sigma_min).collect();
    let scale: Vec<f64> = traj.a.iter().map(|a| a.norm().max(1.0)).collect();
    let initial_zero = (sv[0] <= SINGULAR_VALUE_TOL * scale[0]).then_some(traj.t[0]);
    let skip_first = initial_zero.is_some();

    let mut zeros: Vec<ConjugateZero> = Vec::new();
    for i in 0..len.saturating_sub(1) {
        if i == 0 && skip_first {
            continue;
        }
        let (d0, d1) = (dets[i], dets[i + 1]);
        if d0 == 0.0 {
            zeros.push(ConjugateZero {
                t: traj.t[i],
                certificate: ZeroCertificate::SingularValue { sigma_min: sv[i] },
                collar_theta: 0.0,
            });
            continue;
        }
        if d0.signum() != d1.signum() && d1 != 0.0 {
            zeros.push(bisect(traj, traj.t[i], traj.t[i + 1], d0)?);
        }
    }
    // Even-multiplicity zeros: local minima of σ_min that are small relative
    // to their neighbourhood.
    for i in 1..len.saturating_sub(1) {
        if i == 1 && skip_first {
            continue;
        }
        let is_min = sv[i] <= sv[i - 1] && sv[i] <= sv[i + 1];
        if !is_min || sv[i] > 0.05 * scale[i] {
            continue;
        }
        let (lo, hi) = (traj.t[i - 1], traj.t[i + 1]);
        if zeros.iter().any(|z| z.t >= lo - 1e-9 && z.t <= hi + 1e-9) {
            continue;
        }
        let (t, s) = golden_min(traj, lo, hi)?;
        if s <= SINGULAR_VALUE_TOL {
            zeros.push(ConjugateZero {
                t,
                certificate: ZeroCertificate::SingularValue { sigma_min: s },
                collar_theta: 0.0,
            });
        }
    }
    zeros.sort_by(|a, b| a.t.total_cmp(&b.t));
    zeros.dedup_by(|a, b| (a.t - b.t).abs() < 1e-7);

    let diag = kinematics(traj);
    for z in zeros.iter_mut() {
        z.collar_theta = collar_theta(&diag, z.t);
    }
    Ok(ConjugateReport {
        zeros,
        initial_zero,
    })
}

fn collar_theta(diag: &CongruenceDiagnostics, t: f64) -> f64 {
    diag.t
        .iter()
        .zip(&diag.theta_f)
        .filter(|(s, th)| (*s - t).abs() <= 1e-3 + 1e-12 && th.is_finite())
        .map(|(_, th)| th.abs())
        .fold(0.0, f64::max)
}

/// Outcome of an interval statement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalReport {
    pub t1: f64,
    pub theta1: f64,
    /// Predicted closed interval `[lo, hi]`.
    pub interval: (f64, f64),
    /// Zeros found inside the interval inflated by [`INTERVAL_TOL`].
    pub zeros_inside: Vec<f64>,
    pub all_zeros: Vec<f64>,
    pub contained: bool,
    /// `Some(reason)` when a hypothesis fails on the interval.
    pub hypothesis_violation: Option<String>,
    /// Smallest `Ric_f^m(c', c')` over samples in the interval.
    pub min_curvature: f64,
    pub max_lagrange_defect: f64,
}

impl IntervalReport {
    /// Containment holds and no hypothesis failed.
    pub fn verified(&self) -> bool {
        self.contained && self.hypothesis_violation.is_none()
    }
}

fn theta_at(traj: &JacobiTrajectory, t1: f64) -> Result<f64, JacobiError> {
    let (a, ap, aux) = traj.state_at(t1)?;
    let sample = traj
        .source()
        .sample(t1, &aux)
        .ok_or(JacobiError::OutOfRange(t1))?;
    let inv = a.try_inverse().ok_or(JacobiError::OutOfRange(t1))?;
    Ok((ap * inv).trace() - sample.weight.first)
}

fn predicted(t1: f64, theta1: f64, width: f64) -> (f64, f64) {
    // width / θ1 has the sign of θ1: past side for θ1 > 0, future side for θ1 < 0
    let other = t1 - width / theta1;
    (t1.min(other), t1.max(other))
}

fn interval_report(
    traj: &JacobiTrajectory,
    t1: f64,
    theta1: f64,
    interval: (f64, f64),
    m: SyntheticDim,
    f_bound: Option<f64>,
) -> Result<IntervalReport, JacobiError> {
    let rep = detect_conjugate(traj)?;
    let mut candidates: Vec<f64> = rep.zeros.iter().map(|z| z.t).collect();
    if let Some(t0) = rep.initial_zero {
        candidates.insert(0, t0);
    }
    let (lo, hi) = interval;
    let inside: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|&z| z >= lo - INTERVAL_TOL && z <= hi + INTERVAL_TOL)
        .collect();

    let mut violation = None;
    let mut min_curv = f64::INFINITY;
    let mut max_defect: f64 = 0.0;
    let (r_lo, r_hi) = traj.range();
    if lo < r_lo - INTERVAL_TOL || hi > r_hi + INTERVAL_TOL {
        // the search range must cover the interval unless a zero was already found
        if inside.is_empty() {
            violation = Some(format!(
                "trajectory [{r_lo}, {r_hi}] does not cover the predicted interval [{lo}, {hi}]"
            ));
        }
    }
    for (i, &t) in traj.t.iter().enumerate() {
        if t < lo - INTERVAL_TOL || t > hi + INTERVAL_TOL {
            continue;
        }
        let s = &traj.samples[i];
        min_curv = min_curv.min(s.ric_fm(m));
        max_defect = max_defect.max(traj.lagrange_defect_at(i));
        if let Some(k) = f_bound {
            if s.weight.value > k + 1e-12 && violation.is_none() {
                violation = Some(format!("f = {} exceeds k = {k} at t = {t}", s.weight.value));
            }
        }
    }
    if min_curv < HYPOTHESIS_TOL && violation.is_none() {
        violation = Some(format!("Ric_f^m(c',c') = {min_curv:e} < 0 on the interval"));
    }
    if max_defect > 1e-9 && violation.is_none() {
        violation = Some(format!("Lagrange defect {max_defect:e} exceeds 1e-9"));
    }
    Ok(IntervalReport {
        t1,
        theta1,
        interval,
        contained: !inside.is_empty(),
        zeros_inside: inside,
        all_zeros: candidates,
        hypothesis_violation: violation,
        min_curvature: min_curv,
        max_lagrange_defect: max_defect,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntervalError {
    #[error("θ_f(t1) = {0} vanishes; the interval statement is vacuous")]
    VanishingExpansion(f64),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
}

/// Check that `det A` vanishes on `[t1 - (k+m)/θ_f(t1), t1]` (or the mirrored
/// interval for negative `θ_f(t1)`), where `k` is the transverse rank.
pub fn verify_interval_finite_m(
    traj: &JacobiTrajectory,
    t1: f64,
    m: f64,
) -> Result<IntervalReport, IntervalError> {
    let theta1 = theta_at(traj, t1)?;
    if theta1.abs() < 1e-12 {
        return Err(IntervalError::VanishingExpansion(theta1));
    }
    let k = traj.rank() as f64;
    let interval = predicted(t1, theta1, k + m);
    Ok(interval_report(traj, t1, theta1, interval, SyntheticDim::Finite(m), None)?)
}

/// Check that `det A` vanishes between `t1` and `t1 - σ`, with
/// `σ = (k + 2K - 2 f(c(t1))) / θ_f(t1)` and `f <= K` on the interval.
pub fn verify_interval_infinite(
    traj: &JacobiTrajectory,
    t1: f64,
    f_bound: f64,
) -> Result<IntervalReport, IntervalError> {
    let theta1 = theta_at(traj, t1)?;
    if theta1.abs() < 1e-12 {
        return Err(IntervalError::VanishingExpansion(theta1));
    }
    let k = traj.rank() as f64;
    let f1 = traj.sample_at(t1)?.weight.value;
    let interval = predicted(t1, theta1, k + 2.0 * f_bound - 2.0 * f1);
    Ok(interval_report(
        traj,
        t1,
        theta1,
        interval,
        SyntheticDim::Infinite,
        Some(f_bound),
    )?)
}

/// Null focal bound: the Lagrange tensor with `A(t1) = E` and isotropic
/// initial expansion `θ_f(t1) = θ1` becomes singular on
/// `[t1 - k/θ1, t1]` (resp. `[t1, t1 - k/θ1]`), `k = n - 2` the rank of the
/// quotient system.
pub fn verify_null_focal_bound(
    source: Arc<dyn CurvatureSource>,
    theta1: f64,
    t1: f64,
    m: SyntheticDim,
    opts: &JacobiOptions,
) -> Result<(IntervalReport, JacobiTrajectory), IntervalError> {
    if theta1.abs() < 1e-12 {
        return Err(IntervalError::VanishingExpansion(theta1));
    }
    let k = source.rank();
    let kf = k as f64;
    let aux = super::aux_at(source.as_ref(), t1, &opts.ode)?;
    let fp = source
        .sample(t1, &aux)
        .map(|s| s.weight.first)
        .ok_or(JacobiError::OutOfRange(t1))?;
    let interval = predicted(t1, theta1, kf);
    // extend past the far end so a zero at the boundary is bracketed
    let far = if theta1 < 0.0 { interval.1 } else { interval.0 };
    let reach = far + (far - t1).signum() * (0.1 * (far - t1).abs() + 0.01);
    let a0 = DMatrix::identity(k, k);
    let ap0 = DMatrix::identity(k, k) * ((theta1 + fp) / kf);
    let traj = integrate_jacobi(source, &a0, &ap0, t1, reach, opts)?;
    let rep = interval_report(&traj, t1, theta1, interval, m, None)?;
    Ok((rep, traj))
}
