//! Adaptive Dormand-Prince 5(4) integrator for first-order systems `y' = F(t, y)`.
//!
//! States are flat `f64` slices so that vector, matrix and mixed systems share
//! one stepper. Integration runs forward or backward depending on the sign of
//! `t_end - t0`.

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Steps smaller than this (relative to `max(1, |t|)`) abort the integration.
    pub h_min: f64,
    /// Upper bound on step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..OdeOptions::default()
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeStatus {
    Completed,
    /// The stop predicate fired after the accepted step ending at this time.
    Stopped(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepSizeCollapse { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("right-hand side is not finite at the initial point t = {0}")]
    NonFiniteStart(f64),
}

/// Recorded solution: times, states and state derivatives.
#[derive(Clone, Debug)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
    pub status: OdeStatus,
    pub stats: OdeStats,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        let i = self.t.len() - 1;
        (self.t[i], &self.y[i])
    }
}

// Dormand-Prince coefficients.
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` to `t_end`.
///
/// With `grid = Some(ts)`, steps are clipped to land on every grid point and
/// only `t0` and the grid points are recorded; `ts` must be monotone in the
/// direction of integration and lie within `[t0, t_end]`. Otherwise every
/// accepted step is recorded. `stop(t, y)` is consulted after each accepted
/// step; returning `true` ends the integration early.
pub fn integrate<F, S>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    grid: Option<&[f64]>,
    opts: &OdeOptions,
    stop: S,
) -> Result<Solution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    integrate_impl(rhs, t0, y0, t_end, grid, opts, stop, false)
}

/// As [`integrate`] with a grid, but steps are not clipped to the grid: grid
/// values come from the fourth-order continuous extension of each accepted
/// step, and `dy` holds the derivative of that interpolant. Much cheaper
/// when the grid is finer than the natural step size.
pub fn integrate_dense<F, S>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    grid: &[f64],
    opts: &OdeOptions,
    stop: S,
) -> Result<Solution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    integrate_impl(rhs, t0, y0, t_end, Some(grid), opts, stop, true)
}

// Dense output coefficients of the Dormand-Prince pair: row `i` gives the
// weights of `k_i` in the coefficients of θ, θ², θ³, θ⁴.
const DENSE: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

/// Interpolated state and derivative at fraction `th` of a step of signed
/// length `hs` from `y`.
fn dense_eval(y: &[f64], hs: f64, ks: [&[f64]; 7], th: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let pw = [th, th * th, th * th * th, th * th * th * th];
    let dpw = [1.0, 2.0 * th, 3.0 * th * th, 4.0 * th * th * th];
    let mut out = y.to_vec();
    let mut dout = vec![0.0; n];
    for (row, k) in DENSE.iter().zip(ks) {
        let c: f64 = row.iter().zip(&pw).map(|(a, b)| a * b).sum();
        let dc: f64 = row.iter().zip(&dpw).map(|(a, b)| a * b).sum();
        if c == 0.0 && dc == 0.0 {
            continue;
        }
        for i in 0..n {
            out[i] += hs * c * k[i];
            dout[i] += dc * k[i];
        }
    }
    (out, dout)
}

#[allow(clippy::too_many_arguments)]
fn integrate_impl<F, S>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    grid: Option<&[f64]>,
    opts: &OdeOptions,
    mut stop: S,
    dense: bool,
) -> Result<Solution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;
    if !all_finite(&k1) {
        return Err(OdeError::NonFiniteStart(t0));
    }

    let mut sol = Solution {
        t: vec![t0],
        y: vec![y.clone()],
        dy: vec![k1.clone()],
        status: OdeStatus::Completed,
        stats,
    };
    if t_end == t0 {
        return Ok(sol);
    }

    let grid_points: Vec<f64> = grid
        .map(|g| {
            g.iter()
                .copied()
                .filter(|&s| (s - t0) * dir > 0.0 && (t_end - s) * dir >= 0.0)
                .collect()
        })
        .unwrap_or_default();
    // in dense mode steps are clipped only at the end of the interval
    let targets: Vec<f64> = if grid.is_some() && !dense {
        grid_points.clone()
    } else {
        vec![t_end]
    };
    let record_all = grid.is_none();
    let mut next_target = 0usize;
    let mut next_dense = 0usize;

    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, t, &y, &k1, dir, opts, &mut stats))
        .abs()
        .min(opts.h_max)
        .min((t_end - t0).abs());

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut last_rejected = false;

    while next_target < targets.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let target = targets[next_target];
        let remaining = (target - t).abs();
        let clipped = h >= remaining;
        let h_step = if clipped { remaining } else { h };
        if h_step < opts.h_min * t.abs().max(1.0) && !clipped {
            return Err(OdeError::StepSizeCollapse { t, h: h_step });
        }
        let hs = dir * h_step;

        let stage = |ytmp: &mut Vec<f64>, terms: &[(f64, &Vec<f64>)]| {
            for i in 0..n {
                let mut acc = y[i];
                for (c, k) in terms {
                    acc += hs * c * k[i];
                }
                ytmp[i] = acc;
            }
        };
        stage(&mut ytmp, &[(A21, &k1)]);
        rhs(t + C2 * hs, &ytmp, &mut k2);
        stage(&mut ytmp, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * hs, &ytmp, &mut k3);
        stage(&mut ytmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * hs, &ytmp, &mut k4);
        stage(&mut ytmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * hs, &ytmp, &mut k5);
        stage(
            &mut ytmp,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        rhs(t + hs, &ytmp, &mut k6);
        stage(
            &mut ynew,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if clipped { target } else { t + hs };
        rhs(t_new, &ynew, &mut k7);
        stats.rhs_evals += 6;

        let finite = [&k2, &k3, &k4, &k5, &k6, &k7, &ynew]
            .iter()
            .all(|v| all_finite(v));
        let err = if finite {
            let mut acc = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                acc += (e / sc) * (e / sc);
            }
            (acc / n.max(1) as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            stats.accepted += 1;
            if dense {
                let ks = [&k1[..], &k2[..], &k3[..], &k4[..], &k5[..], &k6[..], &k7[..]];
                while next_dense < grid_points.len() && (t_new - grid_points[next_dense]) * dir >= 0.0 {
                    let s_pt = grid_points[next_dense];
                    if s_pt == t_new {
                        sol.t.push(t_new);
                        sol.y.push(ynew.clone());
                        sol.dy.push(k7.clone());
                    } else {
                        let (ys, dys) = dense_eval(&y, hs, ks, (s_pt - t) / hs);
                        sol.t.push(s_pt);
                        sol.y.push(ys);
                        sol.dy.push(dys);
                    }
                    next_dense += 1;
                }
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            let hit = clipped;
            if hit {
                next_target += 1;
            }
            if record_all || (hit && !dense) {
                sol.t.push(t);
                sol.y.push(y.clone());
                sol.dy.push(k1.clone());
            }
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            // A step shortened to land on a target should not shrink the next one.
            let base = if clipped { h.max(h_step) } else { h_step };
            h = (base * fac).min(opts.h_max);
            if stop(t, &y) {
                let on_grid = if dense { sol.t.last() == Some(&t) } else { hit };
                if !record_all && !on_grid {
                    sol.t.push(t);
                    sol.y.push(y.clone());
                    sol.dy.push(k1.clone());
                }
                sol.status = OdeStatus::Stopped(t);
                break;
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h = h_step * fac;
        }
    }
    sol.stats = stats;
    Ok(sol)
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + dir * h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    if !d2.is_finite() {
        return h0;
    }
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            5.0,
            None,
            &OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        let (t, y) = sol.last();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
        assert_eq!(sol.status, OdeStatus::Completed);
    }

    #[test]
    fn harmonic_oscillator_on_grid_backward() {
        let grid: Vec<f64> = (0..=20).map(|i| -0.25 * i as f64).collect();
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            -5.0,
            Some(&grid),
            &OdeOptions::with_tolerances(1e-12, 1e-14),
            |_, _| false,
        )
        .unwrap();
        assert_eq!(sol.t.len(), grid.len());
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - t.sin()).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let grid: Vec<f64> = (1..=5000).map(|i| 0.001 * i as f64).collect();
        let sol = integrate_dense(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            5.0,
            &grid,
            &OdeOptions::with_tolerances(1e-12, 1e-14),
            |_, _| false,
        )
        .unwrap();
        assert_eq!(sol.t.len(), grid.len() + 1);
        // far fewer steps than grid points
        assert!(sol.stats.accepted < 1000, "{:?}", sol.stats);
        for ((t, y), dy) in sol.t.iter().zip(&sol.y).zip(&sol.dy) {
            assert!((y[0] - t.sin()).abs() < 1e-10, "t = {t}");
            assert!((dy[0] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn dense_output_backward_and_stopped() {
        let grid: Vec<f64> = (1..=100).map(|i| -0.05 * i as f64).collect();
        let sol = integrate_dense(
            |_, y, dy| dy[0] = y[0],
            0.0,
            &[1.0],
            -5.0,
            &grid,
            &OdeOptions::with_tolerances(1e-12, 1e-14),
            |t, _| t < -2.0,
        )
        .unwrap();
        let OdeStatus::Stopped(ts) = sol.status else {
            panic!("expected a stop");
        };
        assert!(ts < -2.0);
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - t.exp()).abs() < 1e-11, "t = {t}");
        }
        // the last record is the off-grid stop point unless it fell on the grid
        assert_eq!(*sol.t.last().unwrap(), ts);
    }

    #[test]
    fn stop_predicate_halts() {
        let sol = integrate(
            |_, _, dy| dy[0] = 1.0,
            0.0,
            &[0.0],
            10.0,
            None,
            &OdeOptions::default().with_h_max(0.1),
            |_, y| y[0] > 1.0,
        )
        .unwrap();
        match sol.status {
            OdeStatus::Stopped(t) => assert!(t > 1.0 && t < 1.2),
            s => panic!("unexpected status {s:?}"),
        }
    }

    #[test]
    fn non_finite_rhs_rejects_steps_until_collapse() {
        // y' = 1/(1-t) blows up at t = 1
        let res = integrate(
            |t, _, dy| dy[0] = if t >= 1.0 { f64::NAN } else { 1.0 / (1.0 - t) },
            0.0,
            &[0.0],
            2.0,
            None,
            &OdeOptions::default(),
            |_, _| false,
        );
        assert!(matches!(res, Err(OdeError::StepSizeCollapse { .. })));
    }
}
