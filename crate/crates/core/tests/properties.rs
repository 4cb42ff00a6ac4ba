//! Property tests for the geometric and comparison invariants.

use std::f64::consts::PI;
use std::sync::Arc;

use lorentz_lab::comparison::{
    evaluate_timelike_samples, f_laplacian_distance, schwarz_equality_theta, schwarz_gap, schwarz_gap_closed_form,
    DistanceOptions, SampleSpec,
};
use lorentz_lab::jacobi::{detect_conjugate, kinematics, point_congruence, JacobiOptions, PrescribedCurvature};
use lorentz_lab::manifold::{
    bakry_emery_ricci, check_lorentzian, riemann, ricci, BakryEmeryParams, DerivativeMode, ScalarField,
};
use lorentz_lab::scenario::{self, Warp};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUILTINS: [&str; 7] = [
    "minkowski4",
    "minkowski4_linear",
    "de_sitter4",
    "example7",
    "closed_frw4",
    "einstein_static4",
    "power2d",
];

fn riemann_gap(a: &lorentz_lab::manifold::Riemann, b: &lorentz_lab::manifold::Riemann) -> f64 {
    let n = a.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    worst = worst.max((a.get(i, j, k, l) - b.get(i, j, k, l)).abs());
                }
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn schwarz_gap_is_nonnegative_and_matches_closed_form(
        theta in -50.0..50.0f64,
        fp in -50.0..50.0f64,
        n in 2.0..12.0f64,
        m in 0.01..200.0f64,
    ) {
        let g = schwarz_gap(theta, fp, n, m);
        let scale = g.lhs.max(1.0);
        prop_assert!(g.gap >= -1e-12 * scale, "gap {}", g.gap);
        let [a, b] = schwarz_gap_closed_form(theta, fp, n, m);
        prop_assert!((g.gap - a.min(b)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn schwarz_equality_exactly_on_characterized_set(
        fp in -20.0..20.0f64,
        n in 2.0..12.0f64,
        m in 0.01..200.0f64,
        offset in 0.05..5.0f64,
    ) {
        for th in schwarz_equality_theta(fp, n, m) {
            let g = schwarz_gap(th, fp, n, m);
            prop_assert!(g.gap.abs() <= 1e-10 * g.lhs.max(1.0), "gap {} at θ = {th}", g.gap);
        }
        // away from both witnesses the gap is strictly positive
        let [w1, w2] = schwarz_equality_theta(fp, n, m);
        let th = w1.max(w2) + offset;
        prop_assert!(schwarz_gap(th, fp, n, m).gap > 0.0);
    }

    #[test]
    fn minkowski_f_laplacian_matches_closed_form(rho in 0.1..10.0f64, chi in 0.0..1.0f64, phase in 0.0..6.28f64) {
        let sc = scenario::builtin("minkowski4").unwrap();
        let region = sc.spec.uniqueness.clone().unwrap();
        let dir = [-chi.cosh(), chi.sinh() * phase.cos(), chi.sinh() * phase.sin(), 0.0];
        let q: Vec<f64> = region.apex.iter().zip(dir).map(|(a, d)| a + rho * d).collect();
        let r = f_laplacian_distance(&sc.metric, &sc.weight, sc.params.m, &region, &q, &DistanceOptions::default())
            .unwrap();
        prop_assert!((r.rho - rho).abs() <= 1e-8);
        prop_assert!((r.laplacian + 3.0 / rho).abs() <= 1e-8, "Δd = {}", r.laplacian);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn timelike_convergence_is_monotone_in_m(k in 0.2..3.0f64, m1 in 0.1..20.0f64, dm in 0.0..20.0f64, seed in 0u64..1000) {
        let sc = scenario::example7(4, k);
        let points: Vec<Vec<f64>> = scenario::example7_points(4).into_iter().step_by(15).collect();
        let spec = SampleSpec::new(points).with_counts(6, 1).with_seed(seed);
        let lo = evaluate_timelike_samples(&sc.metric, &sc.weight, &BakryEmeryParams::finite(m1), &spec);
        let hi = evaluate_timelike_samples(&sc.metric, &sc.weight, &BakryEmeryParams::finite(m1 + dm), &spec);
        prop_assert_eq!(lo.samples.len(), hi.samples.len());
        for (a, b) in lo.samples.iter().zip(&hi.samples) {
            prop_assert_eq!(&a.vector, &b.vector);
            prop_assert!(b.value >= a.value - 1e-12 * a.value.abs().max(1.0), "{} < {}", b.value, a.value);
        }
    }

    #[test]
    fn constant_weight_makes_m_irrelevant(c in -5.0..5.0f64, m in 0.1..100.0f64, seed in 0u64..1000) {
        let sc = scenario::de_sitter(4);
        let f = ScalarField::constant(4, c);
        let spec = SampleSpec::new(vec![sc.reference_point(-0.7), sc.reference_point(1.3)])
            .with_counts(8, 1)
            .with_seed(seed);
        let fin = evaluate_timelike_samples(&sc.metric, &f, &BakryEmeryParams::finite(m), &spec);
        let inf = evaluate_timelike_samples(&sc.metric, &f, &BakryEmeryParams::infinite(None), &spec);
        prop_assert_eq!(fin, inf);
    }

    #[test]
    fn zero_weight_reduces_to_ricci_exactly(
        t in -2.0..2.0f64,
        dx in -0.5..0.5f64,
        v in prop::collection::vec(-2.0..2.0f64, 4),
        m in prop_oneof![Just(None), (0.1..100.0f64).prop_map(Some)],
    ) {
        let sc = scenario::de_sitter(4);
        let mut p = sc.reference_point(t);
        p[1] += dx;
        let v = DVector::from_vec(v);
        let params = match m {
            Some(m) => BakryEmeryParams::finite(m),
            None => BakryEmeryParams::infinite(None),
        };
        let be = bakry_emery_ricci(&sc.metric, &ScalarField::zero(4), &params, &p, &v, &v).unwrap();
        let ric = (v.transpose() * ricci(&sc.metric, &p).unwrap() * &v)[(0, 0)];
        prop_assert_eq!(be, ric);
    }

    #[test]
    fn curvature_symmetries_at_random_points(
        idx in 0usize..BUILTINS.len(),
        shift in prop::collection::vec(-0.2..0.2f64, 4),
    ) {
        let sc = scenario::builtin(BUILTINS[idx]).unwrap();
        let g0 = &sc.spec.geodesics[0];
        // time moves forward only, along the declared geodesic
        let mut p: Vec<f64> = g0.p0.iter().zip(&shift).map(|(x, s)| x + s).collect();
        p[0] = g0.p0[0] + shift[0].abs();
        prop_assume!(sc.metric.domain_violation(&p).is_none());
        check_lorentzian(&sc.metric, &p).unwrap();
        let g = sc.metric.eval(&p);
        prop_assert!((&g - g.transpose()).amax() == 0.0);
        let r = riemann(&sc.metric, &p).unwrap();
        let res = r.lowered(&g).symmetry_residual();
        prop_assert!(res <= 1e-9, "{}: residual {res:.2e}", BUILTINS[idx]);
    }

    #[test]
    fn point_congruences_are_lagrangian(entries in prop::collection::vec(-2.0..2.0f64, 6), a in -1.0..1.0f64) {
        let upper = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        let mut r = DMatrix::zeros(3, 3);
        for (&(i, j), &e) in upper.iter().zip(&entries) {
            r[(i, j)] = e;
            r[(j, i)] = e;
        }
        // weight f(t) = a t^2 along the curve
        let src = PrescribedCurvature::constant(r).with_weight(move |t| [a * t * t, 2.0 * a * t, 2.0 * a]);
        let traj = point_congruence(Arc::new(src), 0.0, 2.0, &JacobiOptions::default()).unwrap();
        prop_assert!(traj.max_lagrange_defect() <= 1e-9, "defect {:.2e}", traj.max_lagrange_defect());
        // the weight shifts only the trace of B
        let diag = kinematics(&traj);
        prop_assert!(diag.f_independence <= 1e-14, "{:.2e}", diag.f_independence);
    }

    #[test]
    fn conjugate_zeros_carry_expansion_blowup(c in 0.5..3.0f64) {
        let src = PrescribedCurvature::scalar(3, c * c);
        let first = PI / c;
        let traj = point_congruence(Arc::new(src), 0.0, first + 0.5, &JacobiOptions::default()).unwrap();
        let report = detect_conjugate(&traj).unwrap();
        let z = report.zeros.first().expect("a zero at π/c");
        prop_assert!((z.t - first).abs() <= 1e-6, "zero at {} vs {first}", z.t);
        prop_assert!(z.collar_theta > 1e3, "collar |θ_f| {}", z.collar_theta);
    }
}

#[test]
fn de_sitter_matches_cosh_warped_product() {
    // the warped product is evaluated by finite differences, so the two
    // curvature computations share no derivative code
    let ds = scenario::de_sitter(4);
    let warped = scenario::warped_product(Warp::Cosh, 2.0, 4);
    let fd = warped.metric.clone().with_mode(DerivativeMode::finite_difference());
    let analytic_warped = warped.metric.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_exact: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..50 {
        let p = vec![
            rng.gen_range(-1.5..1.5),
            rng.gen_range(0.3..PI - 0.3),
            rng.gen_range(0.3..PI - 0.3),
            rng.gen_range(-PI..PI),
        ];
        let a = riemann(&ds.metric, &p).unwrap();
        worst_exact = worst_exact.max(riemann_gap(&a, &riemann(&analytic_warped, &p).unwrap()));
        worst_fd = worst_fd.max(riemann_gap(&a, &riemann(&fd, &p).unwrap()));
    }
    assert!(worst_exact <= 1e-8, "{worst_exact:.2e}");
    assert!(worst_fd <= 1e-5, "{worst_fd:.2e}");
}

#[test]
fn finite_difference_curvature_is_second_order() {
    let sc = scenario::de_sitter(4);
    let p = sc.reference_point(0.8);
    let exact = riemann(&sc.metric, &p).unwrap();
    let err = |h: f64| {
        let m = sc.metric.clone().with_mode(DerivativeMode::FiniteDifference { step: h, second_step: h });
        riemann_gap(&exact, &riemann(&m, &p).unwrap())
    };
    let (e1, e2, e3) = (err(4e-2), err(2e-2), err(1e-2));
    for (coarse, fine) in [(e1, e2), (e2, e3)] {
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "errors {e1:.2e} {e2:.2e} {e3:.2e}");
    }
}
