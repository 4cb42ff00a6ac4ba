//! Pointwise pseudo-Riemannian computations on a single chart.
//!
//! Conventions: signature `(-, +, ..., +)`, Levi-Civita connection,
//! `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z` with components
//! `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a`, and `Ric_{bd} = R^a_{bad}`.
//! With these conventions the unit sphere has positive Ricci curvature and
//! de Sitter space satisfies `Ric = (n-1) g`.

mod fields;

pub use fields::{
    DerivativeMode, DiagonalEntry, Interval, MetricField, MetricJet, ScalarField, ScalarJet,
    Univariate, DEFAULT_FD_SECOND_STEP, DEFAULT_FD_STEP,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Metrics with `|det g|` below this are treated as degenerate.
pub const SINGULAR_DET_TOL: f64 = 1e-14;

/// Default relative width of the null band in [`causal_character`].
pub const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is degenerate at the point (|det g| = {det:e})")]
    SingularMetric { det: f64 },
    #[error("coordinate {coord} = {value} lies outside the chart domain")]
    DomainViolation { coord: usize, value: f64 },
    #[error("causal character of the zero vector is undefined")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric signature is not Lorentzian ({negative} negative eigenvalues)")]
    NonLorentzian { negative: usize },
}

/// Synthetic dimension `m` of the Bakry-Emery tensor.
///
/// Serialized as a JSON number, or the string `"infinity"` for `m = ∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticDim {
    Finite(f64),
    Infinite,
}

impl Serialize for SyntheticDim {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SyntheticDim::Finite(m) => s.serialize_f64(*m),
            SyntheticDim::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for SyntheticDim {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(x) => x
                .as_f64()
                .map(SyntheticDim::Finite)
                .ok_or_else(|| D::Error::custom("m is not representable as f64")),
            serde_json::Value::String(s) if matches!(s.to_ascii_lowercase().as_str(), "infinity" | "inf") => {
                Ok(SyntheticDim::Infinite)
            }
            other => Err(D::Error::custom(format!(
                "expected a positive number or \"infinity\" for m, got {other}"
            ))),
        }
    }
}

impl SyntheticDim {
    /// `1/m`, zero for `m = ∞`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            SyntheticDim::Finite(m) => 1.0 / m,
            SyntheticDim::Infinite => 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SyntheticDim::Finite(_))
    }

    pub fn is_valid(&self) -> bool {
        match self {
            SyntheticDim::Finite(m) => m.is_finite() && *m > 0.0,
            SyntheticDim::Infinite => true,
        }
    }
}

impl std::fmt::Display for SyntheticDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SyntheticDim::Finite(m) => write!(f, "{m}"),
            SyntheticDim::Infinite => f.write_str("infinity"),
        }
    }
}

/// Parameters of `Ric_f^m`: the synthetic dimension and an optional upper bound on `f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakryEmeryParams {
    pub m: SyntheticDim,
    #[serde(default)]
    pub k: Option<f64>,
}

impl BakryEmeryParams {
    pub fn finite(m: f64) -> Self {
        BakryEmeryParams {
            m: SyntheticDim::Finite(m),
            k: None,
        }
    }

    pub fn infinite(k: Option<f64>) -> Self {
        BakryEmeryParams {
            m: SyntheticDim::Infinite,
            k,
        }
    }
}

/// A point together with a vector in the coordinate basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PointVector {
    pub point: DVector<f64>,
    pub vector: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
}

/// Christoffel symbols `Γ^a_{bc}` stored densely.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(n: usize) -> Self {
        Christoffel {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let n = self.n;
        self.data[(a * n + b) * n + c] = v;
    }

    /// `Γ^a_{bc} v^b w^c`
    pub fn contract(&self, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for b in 0..n {
                if v[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    s += self.get(a, b, c) * v[b] * w[c];
                }
            }
            s
        })
    }

    /// Largest `|Γ^a_{bc} - Γ^a_{cb}|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    worst = worst.max((self.get(a, b, c) - self.get(a, c, b)).abs());
                }
            }
        }
        worst
    }
}

/// Riemann tensor `R^a_{bcd}` stored densely.
#[derive(Clone, Debug)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d]
    }

    /// `R_{abcd} = g_{ae} R^e_{bcd}`.
    pub fn lowered(&self, g: &DMatrix<f64>) -> LoweredRiemann {
        let n = self.n;
        let mut data = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        data[((a * n + b) * n + c) * n + d] =
                            (0..n).map(|e| g[(a, e)] * self.get(e, b, c, d)).sum();
                    }
                }
            }
        }
        LoweredRiemann { n, data }
    }

    /// `R(x, y) z` as a coordinate vector.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for b in 0..n {
                if z[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if x[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        s += self.get(a, b, c, d) * z[b] * x[c] * y[d];
                    }
                }
            }
            s
        })
    }

    /// `Ric_{bd} = R^a_{bad}`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |b, d| (0..n).map(|a| self.get(a, b, a, d)).sum())
    }
}

/// Fully covariant Riemann tensor.
#[derive(Clone, Debug)]
pub struct LoweredRiemann {
    n: usize,
    data: Vec<f64>,
}

impl LoweredRiemann {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d]
    }

    /// Worst residual of the algebraic symmetries and the first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.get(a, b, c, d);
                        worst = worst
                            .max((r + self.get(a, b, d, c)).abs())
                            .max((r + self.get(b, a, c, d)).abs())
                            .max((r - self.get(c, d, a, b)).abs())
                            .max((r + self.get(a, c, d, b) + self.get(a, d, b, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|R_{abcd} - κ (g_{ac} g_{bd} - g_{ad} g_{bc})|`.
    pub fn constant_curvature_residual(&self, g: &DMatrix<f64>, kappa: f64) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let model = kappa * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)]);
                        worst = worst.max((self.get(a, b, c, d) - model).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Everything derived from the metric at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub christoffel: Christoffel,
    pub riemann: Option<Riemann>,
}

impl PointGeometry {
    /// Connection (and curvature when `with_curvature`) at `p`, checking domain and degeneracy.
    pub fn at(metric: &MetricField, p: &[f64], with_curvature: bool) -> Result<Self, GeometryError> {
        check_point(metric, p)?;
        Self::at_unchecked(metric, p, with_curvature)
    }

    /// As [`PointGeometry::at`] without the domain check. Integrators use this
    /// because trial stages may probe slightly outside the chart.
    pub fn at_unchecked(
        metric: &MetricField,
        p: &[f64],
        with_curvature: bool,
    ) -> Result<Self, GeometryError> {
        let n = metric.dim();
        let jet = metric.jet(p, with_curvature);
        let (g_inv, first, christoffel) = connection_from_jet(n, &jet)?;

        let riemann = match (with_curvature, jet.ddg.as_ref()) {
            (true, Some(ddg)) => Some(riemann_from_jet(n, &jet.dg, ddg, &g_inv, &first, &christoffel)),
            _ => None,
        };

        Ok(PointGeometry {
            g: jet.g,
            g_inv,
            christoffel,
            riemann,
        })
    }

    pub fn riemann(&self) -> &Riemann {
        self.riemann
            .as_ref()
            .expect("PointGeometry was built without curvature")
    }
}

/// Inverse metric, first-kind symbols `Γ_{ebc}` (flat, `(e, b, c)` row-major)
/// and Christoffel symbols from a metric jet.
fn connection_from_jet(n: usize, jet: &MetricJet) -> Result<(DMatrix<f64>, Vec<f64>, Christoffel), GeometryError> {
    let det = jet.g.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET_TOL {
        return Err(GeometryError::SingularMetric { det });
    }
    let g_inv = jet
        .g
        .clone()
        .try_inverse()
        .ok_or(GeometryError::SingularMetric { det })?;
    let mut first = vec![0.0; n * n * n];
    for e in 0..n {
        for b in 0..n {
            for c in 0..n {
                first[(e * n + b) * n + c] = 0.5 * (jet.dg[b][(e, c)] + jet.dg[c][(e, b)] - jet.dg[e][(b, c)]);
            }
        }
    }
    let mut christoffel = Christoffel::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|e| g_inv[(a, e)] * first[(e * n + b) * n + c]).sum();
                christoffel.set(a, b, c, v);
            }
        }
    }
    Ok((g_inv, first, christoffel))
}

/// Connection at `p` together with the operator `K = R(·, v)v`, that is
/// `K^a_c = R^a_{bcd} v^b v^d`, without forming the full curvature tensor.
///
/// Costs `O(n^4)` against `O(n^5)` for [`PointGeometry::at`] with curvature;
/// this is the hot path of Jacobi integration along a geodesic.
pub fn jacobi_operator_at(
    metric: &MetricField,
    p: &[f64],
    v: &DVector<f64>,
) -> Result<(PointGeometry, DMatrix<f64>), GeometryError> {
    let n = metric.dim();
    let jet = metric.jet(p, true);
    let (g_inv, _, gamma) = connection_from_jet(n, &jet)?;
    let ddg = jet.ddg.as_ref().expect("second derivatives requested");
    let vs = v.as_slice();

    // w = Γ(v, v), q^a_c = Γ^a_{cb} v^b
    let mut w = DVector::zeros(n);
    let mut q = DMatrix::zeros(n, n);
    for a in 0..n {
        for c in 0..n {
            let row: f64 = (0..n).map(|b| gamma.get(a, c, b) * vs[b]).sum();
            q[(a, c)] = row;
            w[a] += row * vs[c];
        }
    }
    // Dg = ∂_v g and dd[c] = ∂_c ∂_v g
    let mut dv_g = DMatrix::zeros(n, n);
    let mut dd = vec![DMatrix::<f64>::zeros(n, n); n];
    for d in 0..n {
        if vs[d] == 0.0 {
            continue;
        }
        dv_g += &jet.dg[d] * vs[d];
        for c in 0..n {
            dd[c] += &ddg[d * n + c] * vs[d];
        }
    }
    // s[c] = (∂_c ∂_v g) v, u[c][e] = vᵀ (∂_c ∂_e g) v, hv = ∂_v ∂_v g
    let s: Vec<DVector<f64>> = dd.iter().map(|m| m * v).collect();
    let mut hv = DMatrix::zeros(n, n);
    for c in 0..n {
        hv += &dd[c] * vs[c];
    }
    let u = DMatrix::from_fn(n, n, |c, e| (v.transpose() * &ddg[c * n + e] * v)[(0, 0)]);

    // ∂_c Γ^a(v,v) = -(g⁻¹ ∂_c g w)^a + (g⁻¹ ∂_c F)^a with F_e = Γ_{e}(v, v)
    let mut t1 = DMatrix::zeros(n, n);
    for c in 0..n {
        let df = DVector::from_fn(n, |e, _| s[c][e] - 0.5 * u[(c, e)]);
        let col = &g_inv * (df - &jet.dg[c] * &w);
        t1.set_column(c, &col);
    }
    // ∂_v(Γ^a_{cb}) v^b = -(g⁻¹ Dg q) + g⁻¹ ∂_v(Γ_{ecb}) v^b
    let dprime = DMatrix::from_fn(n, n, |e, c| 0.5 * (s[c][e] + hv[(e, c)] - s[e][c]));
    let t2 = &g_inv * (dprime - &dv_g * &q);
    let t3 = DMatrix::from_fn(n, n, |a, c| (0..n).map(|e| gamma.get(a, c, e) * w[e]).sum());
    let t4 = &q * &q;
    let k = t1 - t2 + t3 - t4;
    Ok((
        PointGeometry {
            g: jet.g,
            g_inv,
            christoffel: gamma,
            riemann: None,
        },
        k,
    ))
}

fn riemann_from_jet(
    n: usize,
    dg: &[DMatrix<f64>],
    ddg: &[DMatrix<f64>],
    g_inv: &DMatrix<f64>,
    first: &[f64],
    gamma: &Christoffel,
) -> Riemann {
    let n2 = n * n;
    let n3 = n2 * n;
    // row-major copies; nalgebra storage is column-major and bounds-checked
    let ginv: Vec<f64> = (0..n2).map(|i| g_inv[(i / n, i % n)]).collect();
    // ddf[d][e][b][c] = ∂_d Γ_{ebc}
    let mut ddf = vec![0.0; n * n3];
    for d in 0..n {
        for e in 0..n {
            let dde = ddg[d * n + e].as_slice();
            for b in 0..n {
                let ddb = ddg[d * n + b].as_slice();
                for c in 0..n {
                    let ddc = ddg[d * n + c].as_slice();
                    // column-major: entry (i, j) sits at j * n + i
                    ddf[d * n3 + (e * n + b) * n + c] = 0.5 * (ddb[c * n + e] + ddc[b * n + e] - dde[c * n + b]);
                }
            }
        }
    }
    // dgamma[d][a][b][c] = ∂_d Γ^a_{bc} = ∂_d(g^{ae}) Γ_{ebc} + g^{ae} ∂_d Γ_{ebc}
    let mut dgamma = vec![0.0; n * n3];
    let mut dginv = vec![0.0; n2];
    let mut tmp = vec![0.0; n2];
    for d in 0..n {
        // ∂_d g^{-1} = -g^{-1} (∂_d g) g^{-1}
        let dgd = dg[d].as_slice();
        if dgd.iter().all(|&x| x == 0.0) {
            dginv.iter_mut().for_each(|x| *x = 0.0);
        } else {
            for i in 0..n {
                for j in 0..n {
                    tmp[i * n + j] = (0..n).map(|k| ginv[i * n + k] * dgd[j * n + k]).sum();
                }
            }
            for i in 0..n {
                for j in 0..n {
                    dginv[i * n + j] = -(0..n).map(|k| tmp[i * n + k] * ginv[k * n + j]).sum::<f64>();
                }
            }
        }
        for a in 0..n {
            for e in 0..n {
                let da = dginv[a * n + e];
                let ga = ginv[a * n + e];
                if da == 0.0 && ga == 0.0 {
                    continue;
                }
                let src_first = &first[e * n2..(e + 1) * n2];
                let src_dd = &ddf[d * n3 + e * n2..d * n3 + (e + 1) * n2];
                let dst = &mut dgamma[d * n3 + a * n2..d * n3 + (a + 1) * n2];
                for i in 0..n2 {
                    dst[i] += da * src_first[i] + ga * src_dd[i];
                }
            }
        }
    }
    let gd = &gamma.data;
    let mut data = vec![0.0; n * n3];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut r = dgamma[c * n3 + (a * n + d) * n + b] - dgamma[d * n3 + (a * n + c) * n + b];
                    for e in 0..n {
                        r += gd[(a * n + c) * n + e] * gd[(e * n + d) * n + b]
                            - gd[(a * n + d) * n + e] * gd[(e * n + c) * n + b];
                    }
                    data[((a * n + b) * n + c) * n + d] = r;
                }
            }
        }
    }
    Riemann { n, data }
}

fn check_point(metric: &MetricField, p: &[f64]) -> Result<(), GeometryError> {
    if p.len() != metric.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: metric.dim(),
            got: p.len(),
        });
    }
    if let Some(coord) = metric.domain_violation(p) {
        return Err(GeometryError::DomainViolation {
            coord,
            value: p[coord],
        });
    }
    Ok(())
}

pub fn christoffel(metric: &MetricField, p: &[f64]) -> Result<Christoffel, GeometryError> {
    Ok(PointGeometry::at(metric, p, false)?.christoffel)
}

pub fn riemann(metric: &MetricField, p: &[f64]) -> Result<Riemann, GeometryError> {
    let geo = PointGeometry::at(metric, p, true)?;
    Ok(geo.riemann.expect("curvature requested"))
}

pub fn ricci(metric: &MetricField, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    Ok(riemann(metric, p)?.ricci())
}

/// Covariant Hessian `(Hess f)_{ab} = ∂_a∂_b f - Γ^c_{ab} ∂_c f`.
pub fn hessian_scalar(
    metric: &MetricField,
    f: &ScalarField,
    p: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    let geo = PointGeometry::at(metric, p, false)?;
    Ok(covariant_hessian(&geo.christoffel, &f.jet(p)))
}

pub fn covariant_hessian(gamma: &Christoffel, jet: &ScalarJet) -> DMatrix<f64> {
    let n = gamma.dim();
    DMatrix::from_fn(n, n, |a, b| {
        jet.hess[(a, b)] - (0..n).map(|c| gamma.get(c, a, b) * jet.grad[c]).sum::<f64>()
    })
}

/// `Ric + Hess f - (1/m) df ⊗ df` as a matrix; the last term is dropped for `m = ∞`.
pub fn bakry_emery_tensor(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    p: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    let geo = PointGeometry::at(metric, p, true)?;
    let jet = f.jet(p);
    Ok(bakry_emery_from_parts(
        &geo.riemann().ricci(),
        &covariant_hessian(&geo.christoffel, &jet),
        &jet.grad,
        params.m,
    ))
}

pub fn bakry_emery_from_parts(
    ric: &DMatrix<f64>,
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    m: SyntheticDim,
) -> DMatrix<f64> {
    let mut out = ric + hess;
    if let SyntheticDim::Finite(m) = m {
        out -= grad * grad.transpose() / m;
    }
    out
}

/// `Ric_f^m(v, w)` at `p`.
pub fn bakry_emery_ricci(
    metric: &MetricField,
    f: &ScalarField,
    params: &BakryEmeryParams,
    p: &[f64],
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64, GeometryError> {
    let t = bakry_emery_tensor(metric, f, params, p)?;
    Ok((v.transpose() * t * w)[(0, 0)])
}

/// Sign of `g(v, v)` with a null band `|g(v,v)| <= tol * |v|^2` (Euclidean norm of components).
pub fn causal_character_with_tol(
    metric: &MetricField,
    p: &[f64],
    v: &DVector<f64>,
    tol: f64,
) -> Result<CausalCharacter, GeometryError> {
    let aux = v.norm_squared();
    if aux == 0.0 {
        return Err(GeometryError::ZeroVector);
    }
    let q = metric.inner(p, v, v);
    Ok(if q.abs() <= tol * aux {
        CausalCharacter::Null
    } else if q < 0.0 {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Spacelike
    })
}

pub fn causal_character(
    metric: &MetricField,
    p: &[f64],
    v: &DVector<f64>,
) -> Result<CausalCharacter, GeometryError> {
    causal_character_with_tol(metric, p, v, NULL_TOL)
}

/// Checks symmetry (to 1e-12) and Lorentzian signature of `g(p)`.
pub fn check_lorentzian(metric: &MetricField, p: &[f64]) -> Result<(), GeometryError> {
    let g = metric.eval(p);
    let asym = (&g - g.transpose()).amax();
    let eig = SymmetricEigen::new(g.clone());
    let negative = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let degenerate = eig.eigenvalues.iter().any(|l| l.abs() < SINGULAR_DET_TOL);
    if degenerate {
        return Err(GeometryError::SingularMetric {
            det: g.determinant(),
        });
    }
    if negative != 1 || asym > 1e-12 {
        return Err(GeometryError::NonLorentzian { negative });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minkowski(n: usize) -> MetricField {
        MetricField::diagonal(
            (0..n)
                .map(|i| DiagonalEntry::constant(if i == 0 { -1.0 } else { 1.0 }))
                .collect(),
        )
    }

    /// -dt^2 + t^4 dx^2
    fn power_metric() -> MetricField {
        MetricField::diagonal(vec![
            DiagonalEntry::constant(-1.0),
            DiagonalEntry::constant(1.0).with_factor(0, Univariate::power(4.0)),
        ])
    }

    fn full_operator(metric: &MetricField, p: &[f64], v: &DVector<f64>) -> DMatrix<f64> {
        let riem = riemann(metric, p).unwrap();
        let n = metric.dim();
        let mut k = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = DVector::zeros(n);
            e[c] = 1.0;
            k.set_column(c, &riem.apply(&e, v, v));
        }
        k
    }

    #[test]
    fn jacobi_operator_matches_full_tensor() {
        // a non-diagonal metric with position-dependent cross terms
        let skew = MetricField::new(3, |x| {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -1.0 - 0.1 * x[1] * x[1], 0.2 * x[2], 0.05 * x[0],
                    0.2 * x[2], 1.0 + x[0] * x[0], 0.1 * x[1].sin(),
                    0.05 * x[0], 0.1 * x[1].sin(), 2.0 + 0.3 * x[1],
                ],
            )
        });
        let sitter = crate::scenario::builtin("de_sitter4").unwrap().metric;
        let cases: Vec<(MetricField, Vec<f64>, Vec<f64>)> = vec![
            (power_metric(), vec![1.3, 0.4], vec![1.2, 0.3]),
            (skew, vec![0.3, -0.4, 0.7], vec![1.1, 0.2, -0.3]),
            (sitter, vec![0.4, 1.1, 0.7, 0.2], vec![1.5, 0.3, -0.2, 0.6]),
        ];
        for (metric, p, v) in cases {
            let v = DVector::from_vec(v);
            let (_, k) = jacobi_operator_at(&metric, &p, &v).unwrap();
            let full = full_operator(&metric, &p, &v);
            assert!((&k - &full).amax() <= 1e-9 * full.amax().max(1.0), "{k} vs {full}");
        }
    }

    #[test]
    fn flat_space_has_vanishing_connection_and_curvature() {
        let m = minkowski(4);
        let p = [0.3, -1.0, 2.0, 5.0];
        assert!(christoffel(&m, &p).unwrap().data.iter().all(|&x| x == 0.0));
        assert!(riemann(&m, &p).unwrap().data.iter().all(|&x| x == 0.0));
        assert_eq!(ricci(&m, &p).unwrap().amax(), 0.0);
    }

    #[test]
    fn power_metric_christoffel() {
        let gamma = christoffel(&power_metric(), &[2.0, 0.0]).unwrap();
        // Γ^t_xx = ½ ∂_t(t^4) = 2 t^3
        assert!((gamma.get(0, 1, 1) - 16.0).abs() < 1e-12);
        // Γ^x_tx = ½ t^-4 ∂_t(t^4) = 2/t
        assert!((gamma.get(1, 0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(gamma.asymmetry(), 0.0);
    }

    #[test]
    fn degenerate_metric_is_an_error() {
        let err = christoffel(&power_metric(), &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::SingularMetric { .. }));
    }

    #[test]
    fn domain_violation_is_an_error() {
        let m = minkowski(2).with_domain(vec![Interval::new(-1.0, 1.0), Interval::unbounded()]);
        let err = riemann(&m, &[2.0, 0.0]).unwrap_err();
        assert_eq!(err, GeometryError::DomainViolation { coord: 0, value: 2.0 });
    }

    #[test]
    fn causal_classification_in_flat_space() {
        let m = minkowski(4);
        let p = [0.0; 4];
        let v = |c: [f64; 4]| DVector::from_row_slice(&c);
        assert_eq!(causal_character(&m, &p, &v([1.0, 0.0, 0.0, 0.0])).unwrap(), CausalCharacter::Timelike);
        assert_eq!(causal_character(&m, &p, &v([1.0, 1.0, 0.0, 0.0])).unwrap(), CausalCharacter::Null);
        assert_eq!(causal_character(&m, &p, &v([0.0, 1.0, 0.0, 0.0])).unwrap(), CausalCharacter::Spacelike);
        assert_eq!(causal_character(&m, &p, &DVector::zeros(4)).unwrap_err(), GeometryError::ZeroVector);
    }

    #[test]
    fn bakry_emery_of_linear_weight_in_flat_space() {
        let m = minkowski(4);
        let a = 0.7;
        let f = ScalarField::of_coordinate(4, 0, Univariate::affine(a, 0.0));
        let dt = DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]);
        let p = [0.5, 0.0, 0.0, 0.0];
        for m_val in [0.5, 1.0, 3.0] {
            let val = bakry_emery_ricci(&m, &f, &BakryEmeryParams::finite(m_val), &p, &dt, &dt).unwrap();
            assert!((val + a * a / m_val).abs() < 1e-14);
        }
        let inf = bakry_emery_ricci(&m, &f, &BakryEmeryParams::infinite(None), &p, &dt, &dt).unwrap();
        assert_eq!(inf, 0.0);
    }

    #[test]
    fn zero_weight_reduces_to_ricci() {
        let m = power_metric();
        let f = ScalarField::zero(2);
        let p = [1.3, 0.2];
        let ric = ricci(&m, &p).unwrap();
        for params in [BakryEmeryParams::finite(0.3), BakryEmeryParams::infinite(None)] {
            let be = bakry_emery_tensor(&m, &f, &params, &p).unwrap();
            assert_eq!(be, ric);
        }
    }

    #[test]
    fn synthetic_dim_json_forms() {
        let finite: SyntheticDim = serde_json::from_str("2.5").unwrap();
        assert_eq!(finite, SyntheticDim::Finite(2.5));
        let inf: SyntheticDim = serde_json::from_str("\"infinity\"").unwrap();
        assert_eq!(inf, SyntheticDim::Infinite);
        assert_eq!(serde_json::to_string(&SyntheticDim::Infinite).unwrap(), "\"infinity\"");
    }
}
