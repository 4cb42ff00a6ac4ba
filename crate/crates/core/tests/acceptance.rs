//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so that every verdict is printed.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use lorentz_lab::comparison::{
    self, check_timelike_convergence, f_laplacian_distance, schwarz_equality_theta, schwarz_gap,
    schwarz_gap_closed_form, DistanceOptions, SampleSpec,
};
use lorentz_lab::congruence::{integrate_geodesic, parallel_frame, EndomorphismSeries, GeodesicOptions};
use lorentz_lab::jacobi::{
    asymptotic_lagrange, boundary_jacobi, d_s_endpoint_derivative, d_s_integral_formula, detect_conjugate,
    integrate_jacobi, kinematics, point_congruence, raychaudhuri_residual, verify_interval_finite_m,
    verify_interval_infinite, verify_null_focal_bound, CurvatureSource, GeodesicSource, JacobiOptions,
    Mask, PrescribedCurvature, DEFAULT_COLLAR, DEFAULT_ZERO_RADIUS,
};
use lorentz_lab::manifold::{hessian_scalar, ricci, SyntheticDim};
use lorentz_lab::runner::distance_samples;
use lorentz_lab::scenario::{self, DeclaredGeodesic, Scenario, UniquenessRegion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const SCENARIOS: [&str; 7] = [
    "minkowski4",
    "minkowski4_linear",
    "de_sitter4",
    "example7",
    "closed_frw4",
    "einstein_static4",
    "power2d",
];

fn opts() -> JacobiOptions {
    JacobiOptions::default()
}

fn verdict(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn source(sc: &Scenario, g: &DeclaredGeodesic) -> Arc<dyn CurvatureSource> {
    Arc::new(
        GeodesicSource::new(&sc.metric, &sc.weight, &g.p0, &DVector::from_row_slice(&g.v0), g.range.0)
            .expect("declared geodesic"),
    )
}

fn has_transverse(sc: &Scenario, g: &DeclaredGeodesic) -> bool {
    source(sc, g).rank() > 0
}

fn c1_flat_kinematics() -> Outcome {
    let start = Instant::now();
    let sc = scenario::builtin("minkowski4_linear").unwrap();
    let rest = sc.spec.geodesics.iter().find(|g| g.label == "rest").unwrap();
    let traj = point_congruence(source(&sc, rest), 0.0, 10.0, &opts()).map_err(|e| e.to_string())?;
    let diag = kinematics(&traj);
    // f = a t along the rest geodesic, so (f∘c)' = a
    let a = 0.5;
    let mut worst: f64 = 0.0;
    for (i, &t) in diag.t.iter().enumerate() {
        if t < 0.2 - 1e-12 {
            continue;
        }
        let exact = 3.0 / t - a;
        // 3/t - a vanishes at t = 6, so scale by the size of its two terms
        worst = worst.max((diag.theta_f[i] - exact).abs() / (3.0 / t + a.abs()));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-6 && secs < 1.0,
        format!("max relative error {worst:.2e} on [0.2, 10], {secs:.3} s"),
    )
}

fn ray_max(src: Arc<dyn CurvatureSource>, t0: f64, t1: f64, m: SyntheticDim) -> Result<f64, String> {
    let traj = point_congruence(src, t0, t1, &opts()).map_err(|e| e.to_string())?;
    let diag = kinematics(&traj);
    let zeros: Vec<f64> = detect_conjugate(&traj)
        .map_err(|e| e.to_string())?
        .zeros
        .iter()
        .map(|z| z.t)
        .collect();
    let mask = Mask::standard(t0, DEFAULT_COLLAR, &zeros, DEFAULT_ZERO_RADIUS);
    Ok(raychaudhuri_residual(&diag, m, &mask).map_err(|e| e.to_string())?.max_abs_residual)
}

fn c2_raychaudhuri() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["minkowski4", "de_sitter4", "example7"] {
        let sc = scenario::builtin(name).unwrap();
        for g in &sc.spec.geodesics {
            let r = ray_max(source(&sc, g), g.range.0, g.range.1, sc.params.m)?;
            worst = worst.max(r);
            parts.push(format!("{name}/{} {r:.1e}", g.label));
        }
    }
    for c in [1.0, -1.0] {
        let r = ray_max(Arc::new(PrescribedCurvature::scalar(3, c)), 0.0, 6.0, SyntheticDim::Finite(1.0))?;
        worst = worst.max(r);
        parts.push(format!("R={c:+}I {r:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 5e-5 && secs < 10.0,
        format!("max |residual| {worst:.2e} ({}), {secs:.2} s", parts.join(", ")),
    )
}

fn sine_congruence() -> Result<lorentz_lab::jacobi::JacobiTrajectory, String> {
    point_congruence(Arc::new(PrescribedCurvature::scalar(3, 1.0)), 0.0, 7.0, &opts()).map_err(|e| e.to_string())
}

fn c3_interval_finite() -> Outcome {
    let traj = sine_congruence()?;
    let theta1 = 3.0 / 2f64.tan();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [1.0, 2.0, 3.0] {
        let rep = verify_interval_finite_m(&traj, 2.0, m).map_err(|e| e.to_string())?;
        // independent interval from the measured expansion 3 cot 2
        let other = 2.0 - (3.0 + m) / theta1;
        let lo = 2f64.min(other);
        let hi = 2f64.max(other);
        let z = rep.zeros_inside.iter().copied().find(|z| (z - PI).abs() <= 1e-6);
        let good = rep.verified()
            && (rep.theta1 - theta1).abs() < 1e-8
            && (rep.interval.0 - lo).abs() < 1e-8
            && (rep.interval.1 - hi).abs() < 1e-8
            && z.is_some_and(|z| z >= lo && z <= hi);
        ok &= good;
        parts.push(format!(
            "m={m}: zero {} in [{lo:.4}, {hi:.4}] {}",
            z.map_or("none".into(), |z| format!("{z:.9}")),
            if good { "ok" } else { "FAIL" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c4_interval_infinite() -> Outcome {
    let theta1 = 3.0 / 2f64.tan();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [0.0, 0.7] {
        let src = PrescribedCurvature::scalar(3, 1.0).with_weight(move |_| [c, 0.0, 0.0]);
        let traj = point_congruence(Arc::new(src), 0.0, 7.0, &opts()).map_err(|e| e.to_string())?;
        let rep = verify_interval_infinite(&traj, 2.0, c).map_err(|e| e.to_string())?;
        // sigma = (n - 1 + 2k - 2f)/theta_f with k = f = c
        let sigma = (3.0 + 2.0 * c - 2.0 * c) / theta1;
        let (lo, hi) = (2f64.min(2.0 - sigma), 2f64.max(2.0 - sigma));
        let z = rep.zeros_inside.iter().copied().find(|z| (z - PI).abs() <= 1e-6);
        let good = rep.verified() && z.is_some_and(|z| z >= lo - 1e-6 && z <= hi + 1e-6);
        ok &= good;
        parts.push(format!(
            "f={c}: zero {} in [{lo:.4}, {hi:.4}] {}",
            z.map_or("none".into(), |z| format!("{z:.9}")),
            if good { "ok" } else { "FAIL" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn compare_d_s(src: Arc<dyn CurvatureSource>, t1: f64, s: f64) -> Result<(f64, f64), String> {
    let k = src.rank();
    let sol = boundary_jacobi(Arc::clone(&src), t1, s, &DMatrix::identity(k, k), &opts()).map_err(|e| e.to_string())?;
    let a = point_congruence(src, t1, s, &opts()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for j in 1..10 {
        let t = t1 + (s - t1) * j as f64 / 10.0;
        let integral = d_s_integral_formula(&a, t, s).map_err(|e| e.to_string())?;
        worst = worst.max((integral - sol.d_at(t).map_err(|e| e.to_string())?).norm());
    }
    let endpoint = (d_s_endpoint_derivative(&a, s).map_err(|e| e.to_string())?
        - sol.d_prime_at(s).map_err(|e| e.to_string())?)
    .norm();
    Ok((worst, endpoint))
}

fn c5_d_s_formula() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut cases: Vec<(String, Arc<dyn CurvatureSource>, f64, f64)> = vec![
        ("R=0".into(), Arc::new(PrescribedCurvature::scalar(3, 0.0)), 0.0, 3.0),
        ("R=-I".into(), Arc::new(PrescribedCurvature::scalar(3, -1.0)), 0.0, 3.0),
        ("R=I".into(), Arc::new(PrescribedCurvature::scalar(3, 1.0)), 0.0, 2.5),
    ];
    let frw = scenario::builtin("closed_frw4").unwrap();
    let g = &frw.spec.geodesics[0];
    let src = source(&frw, g);
    let probe = point_congruence(Arc::clone(&src), g.range.0, g.range.1, &opts()).map_err(|e| e.to_string())?;
    let s = detect_conjugate(&probe)
        .map_err(|e| e.to_string())?
        .first()
        .map_or(g.range.1, |z| (z - 0.3).min(g.range.1));
    cases.push((format!("closed FRW {}", g.label), src, g.range.0, s));
    for (label, src, t1, s) in cases {
        let (d, e) = compare_d_s(src, t1, s)?;
        let good = d <= 1e-6 && e <= 1e-6;
        ok &= good;
        parts.push(format!("{label} (s={s:.3}): D {d:.1e}, D'(s) {e:.1e}"));
    }
    verdict(ok, parts.join("; "))
}

fn c6_asymptotic() -> Outcome {
    let rep = asymptotic_lagrange(
        Arc::new(PrescribedCurvature::scalar(3, -1.0)),
        0.0,
        &[5.0, 10.0, 20.0, 40.0],
        1.0,
        &opts(),
    )
    .map_err(|e| e.to_string())?;
    let err = (&rep.limit - DMatrix::identity(3, 3) * (-1f64).exp()).amax();
    let cauchy: Vec<String> = rep.cauchy.iter().map(|c| format!("{c:.1e}")).collect();
    verdict(
        err <= 1e-5 && rep.decreasing,
        format!("|D(1) - e^-1 E| = {err:.2e}, Cauchy differences [{}]", cauchy.join(", ")),
    )
}

fn c7_lagrange() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut point_worst: f64 = 0.0;
    let mut drift_worst: f64 = 0.0;
    let mut count = 0;
    for name in SCENARIOS {
        let sc = scenario::builtin(name).unwrap();
        for g in sc.spec.geodesics.iter().filter(|g| has_transverse(&sc, g)) {
            let src = source(&sc, g);
            let k = src.rank();
            let traj = point_congruence(Arc::clone(&src), g.range.0, g.range.1, &opts()).map_err(|e| e.to_string())?;
            point_worst = point_worst.max(traj.max_lagrange_defect());
            let ap0 = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            let gen = integrate_jacobi(src, &DMatrix::identity(k, k), &ap0, g.range.0, g.range.1, &opts())
                .map_err(|e| e.to_string())?;
            let d0 = gen.lagrange_defect_at(0);
            for i in 0..gen.t.len() {
                drift_worst = drift_worst.max((gen.lagrange_defect_at(i) - d0).abs());
            }
            count += 1;
        }
    }
    verdict(
        point_worst <= 1e-9 && drift_worst <= 1e-9,
        format!("{count} congruences: point defect {point_worst:.1e}, non-Lagrange drift {drift_worst:.1e}"),
    )
}

fn c8_null_focal() -> Outcome {
    let (rep, _) = verify_null_focal_bound(
        Arc::new(PrescribedCurvature::scalar(2, 0.0)),
        -2.0,
        0.0,
        SyntheticDim::Infinite,
        &opts(),
    )
    .map_err(|e| e.to_string())?;
    let z = rep.all_zeros.iter().copied().find(|z| (z - 1.0).abs() <= 1e-6);
    // k = n - 2 = 2, so the bound is [0, 2/|θ1|] = [0, 1]
    let good = rep.verified() && z.is_some() && rep.interval == (0.0, 1.0);
    verdict(
        good,
        format!(
            "blow-up at {} within [{}, {}]",
            z.map_or("none".into(), |z| format!("{z:.9}")),
            rep.interval.0,
            rep.interval.1
        ),
    )
}

fn c9_f_laplacian() -> Outcome {
    let mink = scenario::builtin("minkowski4").unwrap();
    let region = mink.spec.uniqueness.clone().unwrap();
    let m = match mink.params.m {
        SyntheticDim::Finite(m) => m,
        SyntheticDim::Infinite => return Err("minkowski4 should have finite m".into()),
    };
    let dopts = DistanceOptions::default();
    let mut lap_err: f64 = 0.0;
    let mut slack_err: f64 = 0.0;
    for (i, rho) in [0.1, 0.3, 1.0, 2.5, 5.0, 10.0].into_iter().enumerate() {
        let chi = 0.2 * i as f64;
        let dir = [-chi.cosh(), chi.sinh() * 0.6, -chi.sinh() * 0.8, 0.0];
        let q: Vec<f64> = region.apex.iter().zip(dir).map(|(a, d)| a + rho * d).collect();
        let r = f_laplacian_distance(&mink.metric, &mink.weight, mink.params.m, &region, &q, &dopts)
            .map_err(|e| e.to_string())?;
        lap_err = lap_err.max((r.laplacian + 3.0 / rho).abs());
        slack_err = slack_err.max((r.slack_finite().unwrap() - m / rho).abs());
    }
    let ex = scenario::builtin("example7").unwrap();
    let region: &UniquenessRegion = ex.spec.uniqueness.as_ref().unwrap();
    let qs = distance_samples(&ex, 20, 7);
    let mut pts = qs.clone();
    pts.push(region.apex.clone());
    let cert = check_timelike_convergence(&ex.metric, &ex.weight, &ex.params, &SampleSpec::new(pts).with_seed(7));
    let mut min_slack = f64::INFINITY;
    for q in &qs {
        let r = f_laplacian_distance(&ex.metric, &ex.weight, ex.params.m, region, q, &dopts).map_err(|e| e.to_string())?;
        min_slack = min_slack.min(r.slack_infinite());
    }
    verdict(
        lap_err <= 1e-8 && slack_err <= 1e-6 && qs.len() == 20 && cert.pass && min_slack >= -1e-6,
        format!(
            "flat |Δd + 3/ρ| {lap_err:.1e}, |slack - m/ρ| {slack_err:.1e}; de Sitter K=2 certified {} on {} points, min infinite-m slack {min_slack:.3e}",
            cert.pass,
            qs.len()
        ),
    )
}

fn c10_example7() -> Outcome {
    let mut hess_err: f64 = 0.0;
    let mut ric_err: f64 = 0.0;
    for k in [1.0, 2.0, 4.0] {
        let sc = scenario::example7(4, k);
        for p in scenario::example7_points(4) {
            let t = p[0];
            let h = hessian_scalar(&sc.metric, &sc.weight, &p).map_err(|e| e.to_string())?;
            // f'' for f = sinh^2(Kt), via the double-angle form
            let exact = 2.0 * k * k * (2.0 * k * t).cosh();
            hess_err = hess_err.max((h[(0, 0)] - exact).abs() / exact.abs());
            if k == 1.0 {
                let ric = ricci(&sc.metric, &p).map_err(|e| e.to_string())?;
                let g = sc.metric.eval(&p);
                ric_err = ric_err.max((ric - g * 3.0).amax());
            }
        }
    }
    let spec = SampleSpec::new(scenario::example7_points(4)).with_seed(7);
    let rep = scenario::certify_example7(4, &scenario::default_k_grid(), &spec);
    let small = scenario::certify_example7(4, &[0.1], &spec);
    let small_min = small.per_k[0].1.min;
    let small_ok = !small.per_k[0].1.pass && (small_min + 3.0).abs() <= 0.1;
    verdict(
        hess_err <= 1e-6 && ric_err <= 1e-6 && rep.k_star.is_some() && small_ok,
        format!(
            "Hess rel err {hess_err:.1e}, |Ric - 3g| {ric_err:.1e}, K* = {}, K=0.1 min {small_min:.4}",
            rep.k_star.map_or("none".into(), |k| k.to_string())
        ),
    )
}

fn c11_schwarz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut min_gap = f64::INFINITY;
    let mut oracle_err: f64 = 0.0;
    let mut witness: f64 = 0.0;
    let draws = 1_000_000;
    for _ in 0..draws {
        let theta: f64 = rng.gen_range(-10.0..10.0);
        let fp: f64 = rng.gen_range(-10.0..10.0);
        let n: f64 = rng.gen_range(2.0..=10.0);
        let m: f64 = 100.0 - rng.gen_range(0.0..100.0);
        let g = schwarz_gap(theta, fp, n, m);
        min_gap = min_gap.min(g.gap);
        let [a, b] = schwarz_gap_closed_form(theta, fp, n, m);
        oracle_err = oracle_err.max((g.gap - a.min(b)).abs() / g.lhs.max(1.0));
        for th in schwarz_equality_theta(fp, n, m) {
            let e = schwarz_gap(th, fp, n, m);
            witness = witness.max(e.gap.abs() / e.lhs.max(1.0));
        }
    }
    verdict(
        min_gap >= -1e-12 && witness <= 1e-8 && oracle_err <= 1e-12,
        format!("{draws} draws: min gap {min_gap:.2e}, equality witnesses {witness:.1e}, closed-form agreement {oracle_err:.1e}"),
    )
}

fn c12_trace_identity() -> Outcome {
    let gopts = GeodesicOptions::default();
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut worst_rel: f64 = 0.0;
    let mut count = 0;
    for name in SCENARIOS {
        let sc = scenario::builtin(name).unwrap();
        for g in sc.spec.geodesics.iter().filter(|g| has_transverse(&sc, g)) {
            let geo = integrate_geodesic(&sc.metric, &g.p0, &DVector::from_row_slice(&g.v0), g.range, &gopts)
                .map_err(|e| e.to_string())?;
            let frame = parallel_frame(&sc.metric, &geo, &gopts).map_err(|e| e.to_string())?;
            let series = EndomorphismSeries::build(&sc.metric, &sc.weight, &frame).map_err(|e| e.to_string())?;
            for i in 0..series.t.len() {
                let r = comparison::trace_identity_at(&sc.metric, &sc.weight, &sc.params, &frame, &series, i)
                    .map_err(|e| e.to_string())?;
                if r.residual > worst {
                    worst = r.residual;
                    worst_at = format!("{name}/{} t={} |tr R_f|={:.2e}", g.label, r.t, r.lhs.abs());
                }
                worst_rel = worst_rel.max(r.residual / r.lhs.abs().max(1.0));
            }
            count += 1;
        }
    }
    verdict(
        worst <= 1e-6,
        format!(
            "{count} curves over {} scenarios: max residual {worst:.1e} ({worst_at}), max relative {worst_rel:.1e}",
            SCENARIOS.len()
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c13_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_lorentz-lab");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/minkowski4.json");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    let mut slowest: f64 = 0.0;
    for _ in 0..2 {
        let start = Instant::now();
        let status = Command::new(bin)
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(tmp.path())
            .arg("--seed")
            .arg("7")
            .output()
            .map_err(|e| e.to_string())?
            .status;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        if status.code() != Some(0) {
            return Err(format!("full suite exited with {status}"));
        }
        runs.push(snapshot(tmp.path()));
    }
    let files = runs[0].len();
    verdict(
        runs[0] == runs[1] && slowest < 300.0,
        format!("{files} artifacts byte-identical across runs: {}, slowest full suite {slowest:.1} s", runs[0] == runs[1]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("flat-space kinematics", c1_flat_kinematics),
        ("Raychaudhuri residual", c2_raychaudhuri),
        ("conjugate interval, finite m", c3_interval_finite),
        ("conjugate interval, infinite m", c4_interval_infinite),
        ("D_s integral formula", c5_d_s_formula),
        ("asymptotic limit", c6_asymptotic),
        ("Lagrange conservation", c7_lagrange),
        ("null focal bound", c8_null_focal),
        ("f-Laplacian comparison", c9_f_laplacian),
        ("de Sitter example", c10_example7),
        ("Schwarz inequality", c11_schwarz),
        ("trace identity", c12_trace_identity),
        ("determinism and runtime", c13_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(msg) => println!("criterion {:>2} PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {msg}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
