//! Boundary-value Jacobi tensors `D_s` with `D_s(t1) = E`, `D_s(s) = 0`, the
//! integral representation of `D_s` through the point congruence, and the
//! limit `s -> ∞`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use super::{detect_conjugate, integrate_jacobi, CurvatureSource, JacobiError, JacobiOptions, JacobiTrajectory};

/// Width of the excluded neighbourhood of the singular endpoint `t1`.
pub const QUADRATURE_COLLAR: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error("conjugate point at t = {0} inside the boundary interval")]
    ConjugatePointInRange(f64),
    #[error("t = {t} is within {collar} of the singular endpoint t1 = {t1}")]
    QuadratureNearSingularity { t: f64, t1: f64, collar: f64 },
    #[error("the trajectory does not start with A(t1) = 0, A'(t1) = E")]
    NotPointCongruence,
    #[error("s values must be strictly increasing and beyond t1")]
    InvalidSchedule,
}

#[derive(Clone, Debug)]
pub struct BoundarySolution {
    pub traj: JacobiTrajectory,
    /// Initial derivative `D_s'(t1)` found by shooting.
    pub initial_derivative: DMatrix<f64>,
    /// `‖D_s(s)‖_F` after the refinement pass.
    pub residual_at_s: f64,
}

impl BoundarySolution {
    pub fn d_at(&self, t: f64) -> Result<DMatrix<f64>, JacobiError> {
        Ok(self.traj.state_at(t)?.0)
    }

    pub fn d_prime_at(&self, t: f64) -> Result<DMatrix<f64>, JacobiError> {
        Ok(self.traj.state_at(t)?.1)
    }
}

/// Solve `D'' + R D = 0` with `D(t1) = target` and `D(s) = 0` by shooting.
///
/// With fundamental solutions `C` (`C(t1) = E`, `C'(t1) = 0`) and `S`
/// (`S(t1) = 0`, `S'(t1) = E`), `D = C target + S X` and
/// `X = -S(s)⁻¹ C(s) target`. One correction `X -= S(s)⁻¹ D(s)` is applied.
pub fn boundary_jacobi(
    source: Arc<dyn CurvatureSource>,
    t1: f64,
    s: f64,
    target: &DMatrix<f64>,
    opts: &JacobiOptions,
) -> Result<BoundarySolution, BoundaryError> {
    let k = source.rank();
    let e = DMatrix::identity(k, k);
    let zero = DMatrix::zeros(k, k);
    let s_fund = integrate_jacobi(Arc::clone(&source), &zero, &e, t1, s, opts)?;
    let conj = detect_conjugate(&s_fund)?;
    if let Some(z) = conj.zeros.iter().find(|z| (z.t - t1).abs() > 1e-9) {
        return Err(BoundaryError::ConjugatePointInRange(z.t));
    }
    let c_fund = integrate_jacobi(Arc::clone(&source), &e, &zero, t1, s, opts)?;
    let (s_end, _, _) = s_fund.state_at(s)?;
    let (c_end, _, _) = c_fund.state_at(s)?;
    let s_inv = s_end
        .try_inverse()
        .ok_or(BoundaryError::ConjugatePointInRange(s))?;
    let mut x = -(&s_inv * c_end * target);
    let mut traj = integrate_jacobi(Arc::clone(&source), target, &x, t1, s, opts)?;
    let d_end = traj.state_at(s)?.0;
    x -= &s_inv * &d_end;
    traj = integrate_jacobi(source, target, &x, t1, s, opts)?;
    let residual_at_s = traj.state_at(s)?.0.norm();
    Ok(BoundarySolution {
        traj,
        initial_derivative: x,
        residual_at_s,
    })
}

fn adaptive_simpson<F>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<DMatrix<f64>, JacobiError>
where
    F: FnMut(f64) -> Result<DMatrix<f64>, JacobiError>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (&fa + &fm * 4.0 + &fb) * ((b - a) / 6.0);
    simpson_step(f, a, b, &fa, &fm, &fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: &DMatrix<f64>,
    fm: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    whole: DMatrix<f64>,
    tol: f64,
    depth: usize,
) -> Result<DMatrix<f64>, JacobiError>
where
    F: FnMut(f64) -> Result<DMatrix<f64>, JacobiError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (fa + &flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + &frm * 4.0 + fb) * ((b - m) / 6.0);
    let sum = &left + &right;
    let err = (&sum - &whole).norm();
    if depth == 0 || err <= 15.0 * tol {
        return Ok(&sum + (&sum - whole) / 15.0);
    }
    let l = simpson_step(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

fn check_point_congruence(traj: &JacobiTrajectory) -> Result<f64, BoundaryError> {
    let k = traj.rank();
    let t1 = traj.t[0];
    if traj.a[0].amax() > 1e-14 || (&traj.ap[0] - DMatrix::identity(k, k)).amax() > 1e-14 {
        return Err(BoundaryError::NotPointCongruence);
    }
    Ok(t1)
}

/// `D_s(t) = A(t) ∫_t^s (AᵀA)⁻¹(τ) dτ` for the point congruence `A` from `t1`,
/// by adaptive Simpson quadrature.
pub fn d_s_integral_formula(
    a_traj: &JacobiTrajectory,
    t: f64,
    s: f64,
) -> Result<DMatrix<f64>, BoundaryError> {
    let t1 = check_point_congruence(a_traj)?;
    if (t - t1).abs() < QUADRATURE_COLLAR {
        return Err(BoundaryError::QuadratureNearSingularity {
            t,
            t1,
            collar: QUADRATURE_COLLAR,
        });
    }
    let mut integrand = |tau: f64| -> Result<DMatrix<f64>, JacobiError> {
        let a = a_traj.state_at(tau)?.0;
        (a.transpose() * a)
            .try_inverse()
            .ok_or(JacobiError::OutOfRange(tau))
    };
    let integral = if t == s {
        DMatrix::zeros(a_traj.rank(), a_traj.rank())
    } else {
        adaptive_simpson(&mut integrand, t, s, 1e-12)?
    };
    Ok(a_traj.state_at(t)?.0 * integral)
}

/// `-(Aᵀ)⁻¹(s)`, the derivative of the integral formula at `t = s`.
pub fn d_s_endpoint_derivative(a_traj: &JacobiTrajectory, s: f64) -> Result<DMatrix<f64>, BoundaryError> {
    check_point_congruence(a_traj)?;
    let a = a_traj.state_at(s)?.0;
    Ok(-a
        .transpose()
        .try_inverse()
        .ok_or(BoundaryError::ConjugatePointInRange(s))?)
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub t: f64,
    pub s: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<DMatrix<f64>>,
    /// `‖D_{s_{i+1}}(t) - D_{s_i}(t)‖_F`.
    pub cauchy: Vec<f64>,
    /// Each Cauchy difference is below the previous one or below the noise floor.
    pub decreasing: bool,
    /// Ratios of consecutive Cauchy differences.
    pub ratios: Vec<f64>,
    #[serde(skip)]
    pub limit: DMatrix<f64>,
    pub non_convergent: bool,
}

/// Noise floor for Cauchy differences.
pub const CAUCHY_FLOOR: f64 = 1e-11;

/// Evaluate `D_s(t)` for each `s` in an increasing schedule and report the
/// Cauchy differences; the limit estimate is the value at the largest `s`.
pub fn asymptotic_lagrange(
    source: Arc<dyn CurvatureSource>,
    t1: f64,
    s_list: &[f64],
    t: f64,
    opts: &JacobiOptions,
) -> Result<AsymptoticReport, BoundaryError> {
    if s_list.is_empty()
        || s_list.windows(2).any(|w| w[1] <= w[0])
        || s_list[0] <= t1
        || t <= t1
        || t > s_list[0]
    {
        return Err(BoundaryError::InvalidSchedule);
    }
    let k = source.rank();
    let e = DMatrix::identity(k, k);
    let mut values = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let sol = boundary_jacobi(Arc::clone(&source), t1, s, &e, opts)?;
        values.push(sol.d_at(t)?);
    }
    let cauchy: Vec<f64> = values.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
    let ratios: Vec<f64> = cauchy
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let decreasing = cauchy
        .windows(2)
        .all(|w| w[1] < w[0] || w[1] <= CAUCHY_FLOOR);
    Ok(AsymptoticReport {
        t,
        s: s_list.to_vec(),
        limit: values.last().cloned().expect("nonempty"),
        values,
        non_convergent: !decreasing,
        decreasing,
        cauchy,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{point_congruence, PrescribedCurvature};

    fn src(c: f64) -> Arc<dyn CurvatureSource> {
        Arc::new(PrescribedCurvature::scalar(3, c))
    }

    #[test]
    fn flat_boundary_solution_is_linear() {
        let sol = boundary_jacobi(src(0.0), 0.0, 4.0, &DMatrix::identity(3, 3), &JacobiOptions::default()).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let d = sol.d_at(t).unwrap();
            assert!((d - DMatrix::identity(3, 3) * (1.0 - t / 4.0)).amax() < 1e-10);
        }
        assert!(sol.residual_at_s < 1e-8);
    }

    #[test]
    fn conjugate_point_in_range_is_an_error() {
        let err = boundary_jacobi(src(1.0), 0.0, 4.0, &DMatrix::identity(3, 3), &JacobiOptions::default()).unwrap_err();
        assert!(matches!(err, BoundaryError::ConjugatePointInRange(_)));
    }

    #[test]
    fn collar_is_enforced() {
        let a = point_congruence(src(0.0), 0.0, 2.0, &JacobiOptions::default()).unwrap();
        assert!(matches!(
            d_s_integral_formula(&a, 5e-5, 2.0),
            Err(BoundaryError::QuadratureNearSingularity { .. })
        ));
        let d = d_s_integral_formula(&a, 0.5, 2.0).unwrap();
        assert!((d - DMatrix::identity(3, 3) * 0.75).amax() < 1e-9);
    }
}
