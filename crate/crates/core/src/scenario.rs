//! Built-in spacetimes, weight functions and scenario bundles.
//!
//! Warped products `-dt^2 + φ(t)^2 h` use coordinates `(t, θ_1, ..., θ_{n-1})`.
//! For a round fiber `θ_1..θ_{n-2}` are polar angles kept `1e-3` away from the
//! poles and `θ_{n-1}` is the azimuth. de Sitter space is the warped product
//! with `φ = cosh` over the unit sphere.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::{self, ConditionReport, SampleSpec};
use crate::congruence::{self, GeodesicOptions};
use crate::manifold::{
    self, BakryEmeryParams, DiagonalEntry, Interval, MetricField, PointGeometry, ScalarField,
    SyntheticDim, Univariate,
};

/// Distance of the angular chart boundary from the coordinate poles.
pub const POLE_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warp {
    Constant { value: f64 },
    Cosh,
    Sech,
    Cos,
    /// `φ(t) = t^p`, defined for `t > 0`.
    Power { p: f64 },
}

impl Warp {
    pub fn univariate(&self) -> Univariate {
        match *self {
            Warp::Constant { value } => Univariate::constant(value),
            Warp::Cosh => Univariate::cosh(),
            Warp::Sech => Univariate::sech(),
            Warp::Cos => Univariate::cos(),
            Warp::Power { p } => Univariate::power(p),
        }
    }

    /// Interval of `t` on which the warp is positive and smooth.
    fn time_domain(&self) -> Interval {
        match self {
            Warp::Cos => Interval::new(
                -std::f64::consts::FRAC_PI_2 + POLE_MARGIN,
                std::f64::consts::FRAC_PI_2 - POLE_MARGIN,
            ),
            Warp::Power { .. } => Interval::new(1e-2, f64::INFINITY),
            _ => Interval::unbounded(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Zero,
    Constant { value: f64 },
    /// `f = a t + b`
    LinearTime { a: f64, #[serde(default)] b: f64 },
    /// `f = a t^2`
    QuadraticTime { a: f64 },
    /// `f = sinh^2(K t)`
    SinhSquared { k: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Minkowski { n: usize },
    DeSitter { n: usize },
    /// `-dt^2 + φ(t)^2 h` with `h` Einstein with constant `lambda` on an
    /// `(n-1)`-dimensional fiber: a round sphere of radius `sqrt((n-2)/lambda)`
    /// for `lambda > 0`, flat coordinates for `lambda = 0` or `n = 2`.
    Warped { n: usize, warp: Warp, lambda: f64 },
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match *self {
            MetricSpec::Minkowski { n } | MetricSpec::DeSitter { n } | MetricSpec::Warped { n, .. } => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredGeodesic {
    pub label: String,
    pub p0: Vec<f64>,
    pub v0: Vec<f64>,
    pub range: (f64, f64),
}

/// A point congruence apex together with the largest `ρ` for which the past
/// timelike geodesics from it are known to be unique and maximal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRegion {
    pub apex: Vec<f64>,
    /// A JSON number, or `"infinity"` for an unbounded region.
    #[serde(with = "extended_f64")]
    pub max_rho: f64,
}

/// `f64` that also accepts and writes `"infinity"`, since JSON has no infinite numbers.
mod extended_f64 {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("infinity")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(x) => x.as_f64().ok_or_else(|| D::Error::custom("not representable as f64")),
            serde_json::Value::String(s) if matches!(s.to_ascii_lowercase().as_str(), "infinity" | "inf") => {
                Ok(f64::INFINITY)
            }
            other => Err(D::Error::custom(format!("expected a number or \"infinity\", got {other}"))),
        }
    }
}

/// What a manifest value is backed by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Follows from a closed-form computation.
    ClosedForm,
    /// Compared against an independent numerical computation.
    NumericalOracle,
    /// A value stated in the published example this scenario reproduces.
    PublishedExample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    /// Largest `|Ric_ab - factor g_ab|`; expected value 0.
    EinsteinResidual { point: Vec<f64>, factor: f64 },
    /// Largest `|R_abcd - κ (g_ac g_bd - g_ad g_bc)|`; expected value 0.
    ConstantCurvatureResidual { point: Vec<f64>, kappa: f64 },
    /// `Γ^a_{bc}` at a point.
    Christoffel { point: Vec<f64>, a: usize, b: usize, c: usize },
    /// `Ric(v, v)`.
    Ricci { point: Vec<f64>, v: Vec<f64> },
    /// `Hess f(v, v)`.
    Hessian { point: Vec<f64>, v: Vec<f64> },
    /// `Ric_f^m(v, v)` with the scenario's `m`.
    BakryEmery { point: Vec<f64>, v: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestClaim {
    pub id: String,
    pub basis: Basis,
    pub quantity: Quantity,
    pub expected: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimCheck {
    pub id: String,
    pub basis: Basis,
    pub expected: f64,
    pub computed: f64,
    pub pass: bool,
}

/// Serializable description of a scenario; the JSON form of user scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub metric: MetricSpec,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    #[serde(default = "default_m")]
    pub m: SyntheticDim,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub geodesics: Vec<DeclaredGeodesic>,
    #[serde(default)]
    pub uniqueness: Option<UniquenessRegion>,
    #[serde(default)]
    pub manifest: Vec<ManifestClaim>,
}

fn default_weight() -> WeightSpec {
    WeightSpec::Zero
}

fn default_m() -> SyntheticDim {
    SyntheticDim::Infinite
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("manifest claims failed re-validation: {}", .0.join(", "))]
    ManifestMismatch(Vec<String>),
    #[error(transparent)]
    Geometry(#[from] manifold::GeometryError),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub metric: MetricField,
    pub weight: ScalarField,
    pub params: BakryEmeryParams,
}

impl Scenario {
    /// Build from a spec and re-validate the manifest.
    pub fn load(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        let sc = Scenario::build(spec)?;
        let failed: Vec<String> = sc
            .validate_manifest()?
            .into_iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} (expected {}, computed {})", c.id, c.expected, c.computed))
            .collect();
        if failed.is_empty() {
            Ok(sc)
        } else {
            Err(ScenarioError::ManifestMismatch(failed))
        }
    }

    /// Build without manifest validation.
    pub fn build(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        let n = spec.metric.dim();
        if n < 2 {
            return Err(ScenarioError::Invalid(format!("dimension {n} < 2")));
        }
        if !spec.m.is_valid() {
            return Err(ScenarioError::Invalid(format!("m = {} is not positive", spec.m)));
        }
        if let MetricSpec::DeSitter { n } = spec.metric {
            if n < 3 {
                return Err(ScenarioError::Invalid("de Sitter needs n >= 3".into()));
            }
        }
        if let MetricSpec::Warped { lambda, .. } = spec.metric {
            if lambda < 0.0 {
                return Err(ScenarioError::Invalid("negative fiber Einstein constant".into()));
            }
        }
        for g in &spec.geodesics {
            if g.p0.len() != n || g.v0.len() != n {
                return Err(ScenarioError::Invalid(format!(
                    "geodesic {:?} has wrong dimension",
                    g.label
                )));
            }
        }
        let metric = build_metric(&spec.metric);
        let weight = build_weight(n, &spec.weight);
        let params = BakryEmeryParams {
            m: spec.m,
            k: spec.k.or(weight.upper_bound()),
        };
        Ok(Scenario {
            spec,
            metric,
            weight,
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn validate_manifest(&self) -> Result<Vec<ClaimCheck>, ScenarioError> {
        self.spec
            .manifest
            .iter()
            .map(|claim| {
                let computed = self.evaluate(&claim.quantity)?;
                Ok(ClaimCheck {
                    id: claim.id.clone(),
                    basis: claim.basis,
                    expected: claim.expected,
                    computed,
                    pass: (computed - claim.expected).abs() <= claim.tol,
                })
            })
            .collect()
    }

    pub fn evaluate(&self, q: &Quantity) -> Result<f64, ScenarioError> {
        let vec = |v: &[f64]| DVector::from_row_slice(v);
        Ok(match q {
            Quantity::EinsteinResidual { point, factor } => {
                let ric = manifold::ricci(&self.metric, point)?;
                (ric - self.metric.eval(point) * *factor).amax()
            }
            Quantity::ConstantCurvatureResidual { point, kappa } => {
                let geo = PointGeometry::at(&self.metric, point, true)?;
                geo.riemann()
                    .lowered(&geo.g)
                    .constant_curvature_residual(&geo.g, *kappa)
            }
            Quantity::Christoffel { point, a, b, c } => {
                manifold::christoffel(&self.metric, point)?.get(*a, *b, *c)
            }
            Quantity::Ricci { point, v } => {
                let ric = manifold::ricci(&self.metric, point)?;
                (vec(v).transpose() * ric * vec(v))[(0, 0)]
            }
            Quantity::Hessian { point, v } => {
                let h = manifold::hessian_scalar(&self.metric, &self.weight, point)?;
                (vec(v).transpose() * h * vec(v))[(0, 0)]
            }
            Quantity::BakryEmery { point, v } => manifold::bakry_emery_ricci(
                &self.metric,
                &self.weight,
                &self.params,
                point,
                &vec(v),
                &vec(v),
            )?,
        })
    }

    /// Rebuild with a different weight, keeping the manifest entries that do not involve `f`.
    pub fn with_weight(&self, weight: WeightSpec) -> Scenario {
        let mut spec = self.spec.clone();
        spec.weight = weight;
        spec.manifest
            .retain(|c| !matches!(c.quantity, Quantity::Hessian { .. } | Quantity::BakryEmery { .. }));
        spec.k = None;
        Scenario::build(spec).expect("weight change keeps a valid scenario")
    }

    pub fn with_m(&self, m: SyntheticDim) -> Scenario {
        let mut spec = self.spec.clone();
        spec.m = m;
        spec.manifest
            .retain(|c| !matches!(c.quantity, Quantity::BakryEmery { .. }));
        Scenario::build(spec).expect("m change keeps a valid scenario")
    }

    /// Geodesic and residual checks for every declared geodesic: `(label, norm drift, residual)`.
    pub fn check_declared_geodesics(
        &self,
        opts: &GeodesicOptions,
    ) -> Result<Vec<(String, f64, f64)>, congruence::CongruenceError> {
        self.spec
            .geodesics
            .iter()
            .map(|d| {
                let geo = congruence::integrate_geodesic(
                    &self.metric,
                    &d.p0,
                    &DVector::from_row_slice(&d.v0),
                    d.range,
                    opts,
                )?;
                Ok((
                    d.label.clone(),
                    geo.norm_drift(&self.metric),
                    geo.geodesic_residual(&self.metric)?,
                ))
            })
            .collect()
    }

    /// A generic interior point of the chart at time `t`.
    pub fn reference_point(&self, t: f64) -> Vec<f64> {
        reference_point(&self.spec.metric, t)
    }
}

/// Interior chart point at time `t`: polar angles at `π/2 - 0.3`, azimuth `0.4`.
pub fn reference_point(metric: &MetricSpec, t: f64) -> Vec<f64> {
    let n = metric.dim();
    let mut p = vec![0.0; n];
    p[0] = t;
    for (i, x) in p.iter_mut().enumerate().skip(1) {
        *x = if i + 1 < n { std::f64::consts::FRAC_PI_2 - 0.3 } else { 0.4 };
    }
    p
}

fn round_fiber(spec: &MetricSpec) -> bool {
    match *spec {
        MetricSpec::Minkowski { .. } => false,
        MetricSpec::DeSitter { .. } => true,
        MetricSpec::Warped { n, lambda, .. } => n > 2 && lambda > 0.0,
    }
}

fn build_metric(spec: &MetricSpec) -> MetricField {
    let n = spec.dim();
    let (warp, radius2) = match *spec {
        MetricSpec::Minkowski { .. } => (Warp::Constant { value: 1.0 }, 1.0),
        MetricSpec::DeSitter { .. } => (Warp::Cosh, 1.0),
        MetricSpec::Warped { warp, lambda, .. } => {
            let r2 = if n > 2 && lambda > 0.0 {
                (n as f64 - 2.0) / lambda
            } else {
                1.0
            };
            (warp, r2)
        }
    };
    let round = round_fiber(spec);
    let phi2 = Univariate::squared(warp.univariate());
    let mut entries = vec![DiagonalEntry::constant(-1.0)];
    for i in 1..n {
        let mut e = DiagonalEntry::constant(radius2);
        if !matches!(spec, MetricSpec::Minkowski { .. }) {
            e = e.with_factor(0, phi2.clone());
        }
        if round {
            for j in 1..i {
                e = e.with_factor(j, Univariate::sin_squared());
            }
        }
        entries.push(e);
    }
    let mut domain = vec![Interval::unbounded(); n];
    domain[0] = if matches!(spec, MetricSpec::Minkowski { .. }) {
        Interval::unbounded()
    } else {
        warp.time_domain()
    };
    if round {
        for d in domain.iter_mut().take(n - 1).skip(1) {
            *d = Interval::new(POLE_MARGIN, std::f64::consts::PI - POLE_MARGIN);
        }
    }
    MetricField::diagonal(entries).with_domain(domain)
}

pub fn build_weight(n: usize, spec: &WeightSpec) -> ScalarField {
    match *spec {
        WeightSpec::Zero => ScalarField::zero(n),
        WeightSpec::Constant { value } => ScalarField::constant(n, value),
        WeightSpec::LinearTime { a, b } => ScalarField::of_coordinate(n, 0, Univariate::affine(a, b)),
        WeightSpec::QuadraticTime { a } => ScalarField::of_coordinate(
            n,
            0,
            Univariate::new(move |t| [a * t * t, 2.0 * a * t, 2.0 * a]),
        ),
        WeightSpec::SinhSquared { k } => sinh_squared_f(n, k),
    }
}

/// `f = sinh^2(K t)` with analytic derivatives.
pub fn sinh_squared_f(n: usize, k: f64) -> ScalarField {
    ScalarField::of_coordinate(n, 0, Univariate::sinh_squared(k))
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn minkowski(n: usize) -> Scenario {
    let mut null = unit(n, 0);
    null[1] = 1.0;
    let spec = ScenarioSpec {
        name: format!("minkowski{n}"),
        metric: MetricSpec::Minkowski { n },
        weight: WeightSpec::Zero,
        m: SyntheticDim::Finite(1.0),
        k: None,
        geodesics: vec![
            DeclaredGeodesic {
                label: "rest".into(),
                p0: vec![0.0; n],
                v0: unit(n, 0),
                range: (0.0, 10.0),
            },
            DeclaredGeodesic {
                label: "null".into(),
                p0: vec![0.0; n],
                v0: null,
                range: (0.0, 5.0),
            },
        ],
        uniqueness: Some(UniquenessRegion {
            apex: vec![0.0; n],
            max_rho: f64::INFINITY,
        }),
        manifest: vec![ManifestClaim {
            id: "flat".into(),
            basis: Basis::ClosedForm,
            quantity: Quantity::ConstantCurvatureResidual {
                point: vec![0.3; n],
                kappa: 0.0,
            },
            expected: 0.0,
            tol: 1e-12,
        }],
    };
    Scenario::load(spec).expect("built-in scenario is valid")
}

pub fn de_sitter(n: usize) -> Scenario {
    let spec = de_sitter_spec(n);
    Scenario::load(spec).expect("built-in scenario is valid")
}

fn de_sitter_spec(n: usize) -> ScenarioSpec {
    assert!(n >= 3, "de Sitter needs n >= 3");
    let metric = MetricSpec::DeSitter { n };
    let p = reference_point(&metric, 0.4);
    let p0 = reference_point(&metric, 0.0);
    let mut manifest = vec![
        ManifestClaim {
            id: "einstein".into(),
            basis: Basis::PublishedExample,
            quantity: Quantity::EinsteinResidual {
                point: p.clone(),
                factor: n as f64 - 1.0,
            },
            expected: 0.0,
            tol: 1e-6,
        },
        ManifestClaim {
            id: "unit_curvature".into(),
            basis: Basis::ClosedForm,
            quantity: Quantity::ConstantCurvatureResidual {
                point: p.clone(),
                kappa: 1.0,
            },
            expected: 0.0,
            tol: 1e-6,
        },
        ManifestClaim {
            id: "ricci_unit_timelike".into(),
            basis: Basis::PublishedExample,
            quantity: Quantity::Ricci {
                point: p0.clone(),
                v: unit(n, 0),
            },
            expected: -(n as f64 - 1.0),
            tol: 1e-9,
        },
    ];
    if n >= 3 {
        manifest.push(ManifestClaim {
            id: "christoffel_t_theta_theta".into(),
            basis: Basis::ClosedForm,
            // Γ^t_{θθ} = sinh t cosh t on the first polar angle
            quantity: Quantity::Christoffel {
                point: reference_point(&metric, 1.0),
                a: 0,
                b: 1,
                c: 1,
            },
            expected: 1f64.sinh() * 1f64.cosh(),
            tol: 1e-8,
        });
    }
    ScenarioSpec {
        name: format!("de_sitter{n}"),
        metric,
        weight: WeightSpec::Zero,
        m: SyntheticDim::Infinite,
        k: None,
        geodesics: vec![DeclaredGeodesic {
            label: "comoving".into(),
            p0: p0.clone(),
            v0: unit(n, 0),
            range: (0.0, 3.0),
        }],
        uniqueness: Some(UniquenessRegion {
            apex: reference_point(&metric, 1.0),
            max_rho: 1.5,
        }),
        manifest,
    }
}

/// de Sitter space with `f = sinh^2(K t)` and `m = ∞`.
pub fn example7(n: usize, k: f64) -> Scenario {
    let mut spec = de_sitter_spec(n);
    spec.name = if n == 4 && k == 2.0 {
        "example7".into()
    } else {
        format!("example7_n{n}_k{k}")
    };
    spec.weight = WeightSpec::SinhSquared { k };
    let p0 = reference_point(&spec.metric, 0.0);
    spec.manifest.push(ManifestClaim {
        id: "hess_dt_dt_at_origin".into(),
        basis: Basis::PublishedExample,
        quantity: Quantity::Hessian {
            point: p0.clone(),
            v: unit(n, 0),
        },
        expected: 2.0 * k * k,
        tol: 1e-9,
    });
    spec.manifest.push(ManifestClaim {
        id: "ric_f_dt_dt_at_origin".into(),
        basis: Basis::PublishedExample,
        quantity: Quantity::BakryEmery {
            point: p0,
            v: unit(n, 0),
        },
        expected: 2.0 * k * k - (n as f64 - 1.0),
        tol: 1e-9,
    });
    Scenario::load(spec).expect("built-in scenario is valid")
}

/// `-dt^2 + φ(t)^2 h_λ` over an `(n-1)`-dimensional Einstein fiber.
pub fn warped_product(warp: Warp, lambda: f64, n: usize) -> Scenario {
    let metric = MetricSpec::Warped { n, warp, lambda };
    let t0 = match warp {
        Warp::Power { .. } => 1.0,
        _ => 0.0,
    };
    let spec = ScenarioSpec {
        name: format!("warped_{}", warp_label(&warp)),
        metric,
        weight: WeightSpec::Zero,
        m: SyntheticDim::Infinite,
        k: None,
        geodesics: vec![DeclaredGeodesic {
            label: "comoving".into(),
            p0: reference_point(&metric, t0),
            v0: unit(n, 0),
            range: (0.0, 1.0),
        }],
        uniqueness: None,
        manifest: Vec::new(),
    };
    Scenario::load(spec).expect("warped product is valid")
}

fn warp_label(w: &Warp) -> String {
    match w {
        Warp::Constant { value } => format!("const{value}"),
        Warp::Cosh => "cosh".into(),
        Warp::Sech => "sech".into(),
        Warp::Cos => "cos".into(),
        Warp::Power { p } => format!("pow{p}"),
    }
}

/// Closed FRW toy `-dt^2 + cos^2 t h` over the unit 3-sphere.
///
/// The declared geodesic starts at `t = -0.7` on the equator of the first two
/// polar angles with boost rapidity 0.5 along the azimuth, and `Ric(c', c') > 0`
/// along it. Its range ends well before the crunch at `τ ≈ 1.83`: point
/// congruences here refocus only just ahead of the crunch, where sampled
/// residuals are dominated by the collapsing scale factor.
pub fn closed_frw() -> Scenario {
    let metric = MetricSpec::Warped {
        n: 4,
        warp: Warp::Cos,
        lambda: 2.0,
    };
    let spec = ScenarioSpec {
        name: "closed_frw4".into(),
        metric,
        weight: WeightSpec::Zero,
        m: SyntheticDim::Infinite,
        k: None,
        geodesics: vec![DeclaredGeodesic {
            label: "boosted".into(),
            p0: closed_frw_start(),
            v0: closed_frw_velocity(),
            range: (0.0, 1.2),
        }],
        uniqueness: None,
        manifest: vec![ManifestClaim {
            id: "ricci_comoving".into(),
            basis: Basis::ClosedForm,
            // Ric(∂t, ∂t) = -(n-1) φ''/φ = 3
            quantity: Quantity::Ricci {
                point: closed_frw_start(),
                v: unit(4, 0),
            },
            expected: 3.0,
            tol: 1e-9,
        }],
    };
    Scenario::load(spec).expect("built-in scenario is valid")
}

pub fn closed_frw_start() -> Vec<f64> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    vec![-0.7, half_pi, half_pi, 0.0]
}

/// Unit timelike velocity with rapidity 0.5 along the azimuth at [`closed_frw_start`].
pub fn closed_frw_velocity() -> Vec<f64> {
    let t0: f64 = -0.7;
    vec![0.5f64.cosh(), 0.0, 0.0, 0.5f64.sinh() / t0.cos()]
}

/// Einstein static universe `-dt^2 + h` over the unit 3-sphere.
pub fn einstein_static() -> Scenario {
    let metric = MetricSpec::Warped {
        n: 4,
        warp: Warp::Constant { value: 1.0 },
        lambda: 2.0,
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let spec = ScenarioSpec {
        name: "einstein_static4".into(),
        metric,
        weight: WeightSpec::Zero,
        m: SyntheticDim::Infinite,
        k: None,
        geodesics: vec![DeclaredGeodesic {
            label: "boosted".into(),
            p0: vec![0.0, half_pi, half_pi, 0.0],
            v0: vec![1f64.cosh(), 0.0, 0.0, 1f64.sinh()],
            range: (0.0, 3.0),
        }],
        uniqueness: None,
        manifest: vec![ManifestClaim {
            id: "ricci_static".into(),
            basis: Basis::ClosedForm,
            quantity: Quantity::Ricci {
                point: vec![0.0, half_pi, half_pi, 0.0],
                v: unit(4, 0),
            },
            expected: 0.0,
            tol: 1e-12,
        }],
    };
    Scenario::load(spec).expect("built-in scenario is valid")
}

/// `-dt^2 + t^4 dx^2` on `t > 0`.
pub fn power2d() -> Scenario {
    let metric = MetricSpec::Warped {
        n: 2,
        warp: Warp::Power { p: 2.0 },
        lambda: 0.0,
    };
    let spec = ScenarioSpec {
        name: "power2d".into(),
        metric,
        weight: WeightSpec::Zero,
        m: SyntheticDim::Infinite,
        k: None,
        geodesics: vec![DeclaredGeodesic {
            label: "mixed".into(),
            p0: vec![1.0, 0.0],
            v0: vec![1.5, 0.3],
            range: (0.0, 2.0),
        }],
        uniqueness: None,
        manifest: vec![ManifestClaim {
            id: "christoffel_t_xx".into(),
            basis: Basis::ClosedForm,
            quantity: Quantity::Christoffel {
                point: vec![2.0, 0.0],
                a: 0,
                b: 1,
                c: 1,
            },
            expected: 16.0,
            tol: 1e-12,
        }],
    };
    Scenario::load(spec).expect("built-in scenario is valid")
}

/// Names accepted by [`builtin`], with a one-line description each.
pub fn builtin_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("minkowski<n>", "flat space, f = 0 (n = 2..10)"),
        ("minkowski4_linear", "flat space with f = 0.5 t"),
        ("de_sitter<n>", "-dt^2 + cosh^2 t h over the unit sphere, f = 0 (n = 3..10)"),
        ("example7", "de Sitter n = 4 with f = sinh^2(2t), m = infinity"),
        ("closed_frw4", "-dt^2 + cos^2 t h over the unit 3-sphere"),
        ("einstein_static4", "-dt^2 + h over the unit 3-sphere"),
        ("power2d", "-dt^2 + t^4 dx^2 on t > 0"),
    ]
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let parse_n = |prefix: &str, min: usize| -> Option<usize> {
        name.strip_prefix(prefix)
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|n| (min..=10).contains(n))
    };
    match name {
        "example7" => return Ok(example7(4, 2.0)),
        "closed_frw4" => return Ok(closed_frw()),
        "einstein_static4" => return Ok(einstein_static()),
        "power2d" => return Ok(power2d()),
        "minkowski4_linear" => {
            let mut sc = minkowski(4).with_weight(WeightSpec::LinearTime { a: 0.5, b: 0.0 });
            sc.spec.name = name.into();
            return Ok(sc);
        }
        _ => {}
    }
    if let Some(n) = parse_n("minkowski", 2) {
        return Ok(minkowski(n));
    }
    if let Some(n) = parse_n("de_sitter", 3) {
        return Ok(de_sitter(n));
    }
    Err(ScenarioError::Unknown(name.to_string()))
}

/// Outcome of the example reproduction.
#[derive(Clone, Debug, Serialize)]
pub struct Example7Report {
    pub n: usize,
    pub per_k: Vec<(f64, ConditionReport)>,
    /// Smallest grid `K` whose check passes.
    pub k_star: Option<f64>,
    /// Larger grid values failing after a pass; reported, not asserted.
    pub monotonicity_violations: Vec<f64>,
    /// Minimum over the t-grid of `Ric_f(∂t,∂t) - (2K^2 - (n-1))`, per `K`.
    pub dt_bound_slack: Vec<(f64, f64)>,
    /// Per `K`: minimum slack of `Ric_f(v,v) >= 4K^2cosh^2(Kt) - 2K^2 - K cosh^2(Kt)`
    /// over the sampled directions and the number of violating samples.
    pub v_bound_slack: Vec<(f64, f64, usize)>,
    /// Per `K`: minimum slack of `Hess f(x,x) >= -K cosh^2 t cosh^2(Kt)` for
    /// `h`-unit fiber vectors `x`, and the number of violating t-grid points.
    pub hess_bound_slack: Vec<(f64, f64, usize)>,
}

/// The default grid `{0.5, 1.0, ..., 6.0}`.
pub fn default_k_grid() -> Vec<f64> {
    (1..=12).map(|i| 0.5 * i as f64).collect()
}

/// Sample points `(t, reference angles)` on the t-grid `[-3, 3]`, step 0.1.
pub fn example7_points(n: usize) -> Vec<Vec<f64>> {
    let metric = MetricSpec::DeSitter { n };
    (0..=60)
        .map(|i| reference_point(&metric, -3.0 + 0.1 * i as f64))
        .collect()
}

/// For each `K`, check the `(∞, f)` timelike convergence condition on de
/// Sitter space with `f = sinh^2(K t)` and evaluate the example's pointwise bounds.
pub fn certify_example7(n: usize, k_grid: &[f64], spec: &SampleSpec) -> Example7Report {
    let mut report = Example7Report {
        n,
        per_k: Vec::new(),
        k_star: None,
        monotonicity_violations: Vec::new(),
        dt_bound_slack: Vec::new(),
        v_bound_slack: Vec::new(),
        hess_bound_slack: Vec::new(),
    };
    let nf = n as f64;
    for &k in k_grid {
        let sc = example7(n, k);
        let samples = comparison::evaluate_timelike_samples(&sc.metric, &sc.weight, &sc.params, spec);
        let cond = comparison::reduce_samples(&samples, spec);

        let mut v_min = f64::INFINITY;
        let mut v_viol = 0usize;
        for s in &samples.samples {
            let t = s.point[0];
            let bound = 4.0 * k * k * (k * t).cosh().powi(2) - 2.0 * k * k - k * (k * t).cosh().powi(2);
            // samples are scaled to unit ∂t-component, the form v = ∂t + λx
            let slack = s.value - bound;
            v_min = v_min.min(slack);
            if slack < -1e-9 {
                v_viol += 1;
            }
        }

        let mut dt_min = f64::INFINITY;
        let mut h_min = f64::INFINITY;
        let mut h_viol = 0usize;
        for p in example7_points(n) {
            let t = p[0];
            let mut e0 = DVector::zeros(n);
            e0[0] = 1.0;
            let ricf = manifold::bakry_emery_ricci(&sc.metric, &sc.weight, &sc.params, &p, &e0, &e0)
                .expect("interior point");
            dt_min = dt_min.min(ricf - (2.0 * k * k - (nf - 1.0)));
            // h-unit vector along the azimuth
            let g = sc.metric.eval(&p);
            let mut x = DVector::zeros(n);
            x[n - 1] = (t.cosh().powi(2) / g[(n - 1, n - 1)]).sqrt();
            let hess = manifold::hessian_scalar(&sc.metric, &sc.weight, &p).expect("interior point");
            let hxx = (x.transpose() * hess * &x)[(0, 0)];
            let slack = hxx + k * t.cosh().powi(2) * (k * t).cosh().powi(2);
            h_min = h_min.min(slack);
            if slack < -1e-9 {
                h_viol += 1;
            }
        }
        report.dt_bound_slack.push((k, dt_min));
        report.v_bound_slack.push((k, v_min, v_viol));
        report.hess_bound_slack.push((k, h_min, h_viol));

        if cond.pass {
            if report.k_star.is_none() {
                report.k_star = Some(k);
            }
        } else if report.k_star.is_some() {
            report.monotonicity_violations.push(k);
        }
        report.per_k.push((k, cond));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for name in [
            "minkowski2",
            "minkowski4",
            "minkowski4_linear",
            "de_sitter3",
            "de_sitter4",
            "de_sitter5",
            "example7",
            "closed_frw4",
            "einstein_static4",
            "power2d",
        ] {
            let sc = builtin(name).unwrap();
            assert!(sc.validate_manifest().unwrap().iter().all(|c| c.pass), "{name}");
        }
        assert!(matches!(builtin("nosuch"), Err(ScenarioError::Unknown(_))));
        assert!(matches!(builtin("minkowski1"), Err(ScenarioError::Unknown(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        for name in ["minkowski4", "minkowski4_linear", "de_sitter4", "example7", "closed_frw4", "einstein_static4", "power2d"] {
            let sc = builtin(name).unwrap();
            let text = serde_json::to_string_pretty(&sc.spec).unwrap();
            let back: ScenarioSpec = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, sc.spec);
            Scenario::load(back).unwrap();
        }
    }

    #[test]
    fn wrong_manifest_is_rejected() {
        let mut spec = de_sitter(4).spec;
        spec.manifest[2].expected = 3.0;
        assert!(matches!(Scenario::load(spec), Err(ScenarioError::ManifestMismatch(_))));
    }

    #[test]
    fn sech_warp_is_not_constant_curvature() {
        let sc = warped_product(Warp::Sech, 2.0, 4);
        let p = sc.reference_point(0.0);
        let ric = manifold::ricci(&sc.metric, &p).unwrap();
        // At t = 0, Ric(∂t,∂t) = -(n-1) φ''/φ = +3 for φ = sech, not -3.
        assert!((ric[(0, 0)] - 3.0).abs() < 1e-9);
    }
}
