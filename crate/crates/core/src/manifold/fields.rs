//! Metric and scalar fields on a single coordinate chart.
//!
//! Both field types carry a value callback and an optional analytic jet
//! callback. When no analytic jet is available (or the caller forces it),
//! derivatives come from central finite differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Default first-derivative step for finite differences, scaled by `max(1, |x|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Default second-derivative step: `sqrt(DEFAULT_FD_STEP) / 10`, scaled by `max(1, |x|)`.
pub const DEFAULT_FD_SECOND_STEP: f64 = 3.162_277_660_168_379_5e-4;

/// How partial derivatives of a field are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// Closed-form jets supplied by the field's constructor.
    Analytic,
    /// Central differences. `step` is used for first derivatives and
    /// `second_step` for the nested second differences.
    FiniteDifference { step: f64, second_step: f64 },
}

impl DerivativeMode {
    pub fn finite_difference() -> Self {
        DerivativeMode::FiniteDifference {
            step: DEFAULT_FD_STEP,
            second_step: DEFAULT_FD_SECOND_STEP,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, DerivativeMode::Analytic)
    }
}

/// Closed interval of validity for one coordinate. Infinite bounds are allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn unbounded() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// A smooth real function of one variable returning `[value, first, second]`.
#[derive(Clone)]
pub struct Univariate(Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>);

impl fmt::Debug for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Univariate(..)")
    }
}

impl Univariate {
    pub fn new(f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Univariate(Arc::new(f))
    }

    #[inline]
    pub fn jet(&self, x: f64) -> [f64; 3] {
        (self.0)(x)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.0)(x)[0]
    }

    pub fn constant(c: f64) -> Self {
        Univariate::new(move |_| [c, 0.0, 0.0])
    }

    /// `a * x + b`
    pub fn affine(a: f64, b: f64) -> Self {
        Univariate::new(move |x| [a * x + b, a, 0.0])
    }

    /// `x^p` for real `p`; callers keep `x > 0` when `p` is not an integer.
    pub fn power(p: f64) -> Self {
        Univariate::new(move |x| {
            [
                x.powf(p),
                p * x.powf(p - 1.0),
                p * (p - 1.0) * x.powf(p - 2.0),
            ]
        })
    }

    pub fn cosh() -> Self {
        Univariate::new(|x| [x.cosh(), x.sinh(), x.cosh()])
    }

    pub fn sech() -> Self {
        Univariate::new(|x| {
            let s = 1.0 / x.cosh();
            let th = x.tanh();
            [s, -s * th, s * (2.0 * th * th - 1.0)]
        })
    }

    pub fn cos() -> Self {
        Univariate::new(|x| [x.cos(), -x.sin(), -x.cos()])
    }

    pub fn sin_squared() -> Self {
        Univariate::new(|x| {
            let (s, c) = x.sin_cos();
            [s * s, 2.0 * s * c, 2.0 * (c * c - s * s)]
        })
    }

    /// `sinh^2(k x)`
    pub fn sinh_squared(k: f64) -> Self {
        Univariate::new(move |x| {
            let u = k * x;
            let (s, c) = (u.sinh(), u.cosh());
            [s * s, 2.0 * k * s * c, 2.0 * k * k * (c * c + s * s)]
        })
    }

    /// Pointwise square of another univariate function.
    pub fn squared(inner: Univariate) -> Self {
        Univariate::new(move |x| {
            let [v, d, dd] = inner.jet(x);
            [v * v, 2.0 * v * d, 2.0 * (d * d + v * dd)]
        })
    }
}

/// Value, first and (optionally) second coordinate partials of the metric.
///
/// `dg[c]` holds `∂_c g_ab`; `ddg[c * n + d]` holds `∂_c ∂_d g_ab`.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Option<Vec<DMatrix<f64>>>,
}

type MetricEval = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type MetricJetEval = Arc<dyn Fn(&[f64], bool) -> MetricJet + Send + Sync>;

/// One diagonal metric component `scale * Π_j u_j(x[coord_j])`.
#[derive(Clone, Debug)]
pub struct DiagonalEntry {
    pub scale: f64,
    pub factors: Vec<(usize, Univariate)>,
}

impl DiagonalEntry {
    pub fn constant(scale: f64) -> Self {
        DiagonalEntry {
            scale,
            factors: Vec::new(),
        }
    }

    pub fn with_factor(mut self, coord: usize, u: Univariate) -> Self {
        self.factors.push((coord, u));
        self
    }

    fn jets(&self, p: &[f64]) -> Vec<(usize, [f64; 3])> {
        self.factors.iter().map(|(c, u)| (*c, u.jet(p[*c]))).collect()
    }

    fn value(&self, p: &[f64]) -> f64 {
        self.scale
            * self
                .factors
                .iter()
                .map(|(c, u)| u.value(p[*c]))
                .product::<f64>()
    }
}

/// A Lorentzian metric field `p -> g_ab(p)` on one coordinate chart.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval: MetricEval,
    analytic: Option<MetricJetEval>,
    mode: DerivativeMode,
    domain: Vec<Interval>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("mode", &self.mode)
            .field("domain", &self.domain)
            .finish()
    }
}

impl MetricField {
    /// Metric from a value callback only; derivatives by finite differences.
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MetricField {
            dim,
            eval: Arc::new(eval),
            analytic: None,
            mode: DerivativeMode::finite_difference(),
            domain: vec![Interval::unbounded(); dim],
        }
    }

    /// Attach closed-form jets and switch to analytic mode.
    pub fn with_analytic_jet(
        mut self,
        jet: impl Fn(&[f64], bool) -> MetricJet + Send + Sync + 'static,
    ) -> Self {
        self.analytic = Some(Arc::new(jet));
        self.mode = DerivativeMode::Analytic;
        self
    }

    /// Diagonal metric with product-form components and analytic jets.
    pub fn diagonal(entries: Vec<DiagonalEntry>) -> Self {
        let n = entries.len();
        let entries = Arc::new(entries);
        let value_entries = Arc::clone(&entries);
        let eval = move |p: &[f64]| {
            DMatrix::from_fn(n, n, |a, b| {
                if a == b {
                    value_entries[a].value(p)
                } else {
                    0.0
                }
            })
        };
        let jet = move |p: &[f64], second: bool| diagonal_jet(&entries, p, second);
        MetricField::new(n, eval).with_analytic_jet(jet)
    }

    /// Switch derivative mode. Requesting analytic mode without jets keeps
    /// finite differences.
    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = match mode {
            DerivativeMode::Analytic if self.analytic.is_none() => self.mode,
            m => m,
        };
        self
    }

    pub fn with_domain(mut self, domain: Vec<Interval>) -> Self {
        assert_eq!(domain.len(), self.dim, "domain must give one interval per coordinate");
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn has_analytic_jet(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    /// Index of the first coordinate outside the domain, if any.
    pub fn domain_violation(&self, p: &[f64]) -> Option<usize> {
        self.domain
            .iter()
            .zip(p)
            .position(|(iv, &x)| !iv.contains(x))
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<f64> {
        (self.eval)(p)
    }

    /// Metric jet at `p`, with second derivatives when `second` is set.
    pub fn jet(&self, p: &[f64], second: bool) -> MetricJet {
        match (self.mode, &self.analytic) {
            (DerivativeMode::Analytic, Some(jet)) => jet(p, second),
            (DerivativeMode::FiniteDifference { step, second_step }, _) => {
                fd_metric_jet(&*self.eval, self.dim, p, step, second_step, second)
            }
            (DerivativeMode::Analytic, None) => fd_metric_jet(
                &*self.eval,
                self.dim,
                p,
                DEFAULT_FD_STEP,
                DEFAULT_FD_SECOND_STEP,
                second,
            ),
        }
    }

    /// `g(v, w)` at `p`.
    pub fn inner(&self, p: &[f64], v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let g = self.eval(p);
        (v.transpose() * &g * w)[(0, 0)]
    }
}

fn diagonal_jet(entries: &[DiagonalEntry], p: &[f64], second: bool) -> MetricJet {
    let n = entries.len();
    let mut g = DMatrix::zeros(n, n);
    let mut dg = vec![DMatrix::zeros(n, n); n];
    let mut ddg = if second {
        Some(vec![DMatrix::zeros(n, n); n * n])
    } else {
        None
    };
    for (a, entry) in entries.iter().enumerate() {
        let jets = entry.jets(p);
        let prod_except = |skip: &[usize]| -> f64 {
            jets.iter()
                .enumerate()
                .filter(|(i, _)| !skip.contains(i))
                .map(|(_, (_, j))| j[0])
                .product::<f64>()
        };
        g[(a, a)] = entry.scale * prod_except(&[]);
        for (i, (ci, ji)) in jets.iter().enumerate() {
            dg[*ci][(a, a)] += entry.scale * ji[1] * prod_except(&[i]);
            if let Some(ddg) = ddg.as_mut() {
                for (l, (cl, jl)) in jets.iter().enumerate() {
                    let term = if i == l {
                        ji[2] * prod_except(&[i])
                    } else {
                        ji[1] * jl[1] * prod_except(&[i, l])
                    };
                    ddg[ci * n + cl][(a, a)] += entry.scale * term;
                }
            }
        }
    }
    MetricJet { g, dg, ddg }
}

#[inline]
fn scaled_step(h: f64, x: f64) -> f64 {
    h * x.abs().max(1.0)
}

fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for &(i, d) in moves {
        q[i] += d;
    }
    q
}

fn fd_metric_jet(
    eval: &(dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync),
    n: usize,
    p: &[f64],
    step: f64,
    second_step: f64,
    second: bool,
) -> MetricJet {
    let g = eval(p);
    let dg = (0..n)
        .map(|c| {
            let h = scaled_step(step, p[c]);
            (eval(&shifted(p, &[(c, h)])) - eval(&shifted(p, &[(c, -h)]))) / (2.0 * h)
        })
        .collect();
    let ddg = second.then(|| second_partials(eval, n, p, &g, second_step));
    MetricJet { g, dg, ddg }
}

fn second_partials(
    eval: &(dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync),
    n: usize,
    p: &[f64],
    center: &DMatrix<f64>,
    second_step: f64,
) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::zeros(center.nrows(), center.ncols()); n * n];
    for c in 0..n {
        let hc = scaled_step(second_step, p[c]);
        let diag = (eval(&shifted(p, &[(c, hc)])) - center * 2.0 + eval(&shifted(p, &[(c, -hc)])))
            / (hc * hc);
        out[c * n + c] = diag;
        for d in (c + 1)..n {
            let hd = scaled_step(second_step, p[d]);
            let mixed = (eval(&shifted(p, &[(c, hc), (d, hd)]))
                - eval(&shifted(p, &[(c, hc), (d, -hd)]))
                - eval(&shifted(p, &[(c, -hc), (d, hd)]))
                + eval(&shifted(p, &[(c, -hc), (d, -hd)])))
                / (4.0 * hc * hd);
            out[d * n + c] = mixed.clone();
            out[c * n + d] = mixed;
        }
    }
    out
}

/// Value, coordinate gradient and coordinate second partials of a scalar.
#[derive(Clone, Debug)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

type ScalarEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ScalarJetEval = Arc<dyn Fn(&[f64]) -> ScalarJet + Send + Sync>;

/// The weight function `f` of a weighted spacetime.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: ScalarEval,
    analytic: Option<ScalarJetEval>,
    mode: DerivativeMode,
    upper_bound: Option<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("mode", &self.mode)
            .field("upper_bound", &self.upper_bound)
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            eval: Arc::new(eval),
            analytic: None,
            mode: DerivativeMode::finite_difference(),
            upper_bound: None,
        }
    }

    pub fn with_analytic_jet(
        mut self,
        jet: impl Fn(&[f64]) -> ScalarJet + Send + Sync + 'static,
    ) -> Self {
        self.analytic = Some(Arc::new(jet));
        self.mode = DerivativeMode::Analytic;
        self
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = match mode {
            DerivativeMode::Analytic if self.analytic.is_none() => self.mode,
            m => m,
        };
        self
    }

    /// Declare `f <= k`. Sampled checks verify it; it is not enforced on evaluation.
    pub fn with_upper_bound(mut self, k: f64) -> Self {
        self.upper_bound = Some(k);
        self
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::new(dim, move |_| c)
            .with_analytic_jet(move |_| ScalarJet {
                value: c,
                grad: DVector::zeros(dim),
                hess: DMatrix::zeros(dim, dim),
            })
            .with_upper_bound(c)
    }

    /// `f(p) = u(p[coord])`.
    pub fn of_coordinate(dim: usize, coord: usize, u: Univariate) -> Self {
        let u_val = u.clone();
        ScalarField::new(dim, move |p| u_val.value(p[coord])).with_analytic_jet(move |p| {
            let [v, d, dd] = u.jet(p[coord]);
            let mut grad = DVector::zeros(dim);
            grad[coord] = d;
            let mut hess = DMatrix::zeros(dim, dim);
            hess[(coord, coord)] = dd;
            ScalarJet {
                value: v,
                grad,
                hess,
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn upper_bound(&self) -> Option<f64> {
        self.upper_bound
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (self.eval)(p)
    }

    pub fn jet(&self, p: &[f64]) -> ScalarJet {
        match (self.mode, &self.analytic) {
            (DerivativeMode::Analytic, Some(jet)) => jet(p),
            (DerivativeMode::FiniteDifference { step, second_step }, _) => {
                fd_scalar_jet(&*self.eval, self.dim, p, step, second_step)
            }
            (DerivativeMode::Analytic, None) => fd_scalar_jet(
                &*self.eval,
                self.dim,
                p,
                DEFAULT_FD_STEP,
                DEFAULT_FD_SECOND_STEP,
            ),
        }
    }
}

fn fd_scalar_jet(
    eval: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    n: usize,
    p: &[f64],
    step: f64,
    second_step: f64,
) -> ScalarJet {
    let value = eval(p);
    let grad = DVector::from_fn(n, |c, _| {
        let h = scaled_step(step, p[c]);
        (eval(&shifted(p, &[(c, h)])) - eval(&shifted(p, &[(c, -h)]))) / (2.0 * h)
    });
    let mut hess = DMatrix::zeros(n, n);
    for c in 0..n {
        let hc = scaled_step(second_step, p[c]);
        hess[(c, c)] =
            (eval(&shifted(p, &[(c, hc)])) - 2.0 * value + eval(&shifted(p, &[(c, -hc)]))) / (hc * hc);
        for d in (c + 1)..n {
            let hd = scaled_step(second_step, p[d]);
            let mixed = (eval(&shifted(p, &[(c, hc), (d, hd)]))
                - eval(&shifted(p, &[(c, hc), (d, -hd)]))
                - eval(&shifted(p, &[(c, -hc), (d, hd)]))
                + eval(&shifted(p, &[(c, -hc), (d, -hd)])))
                / (4.0 * hc * hd);
            hess[(c, d)] = mixed;
            hess[(d, c)] = mixed;
        }
    }
    ScalarJet { value, grad, hess }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(u: &Univariate, x: f64) {
        let h = 1e-5;
        let [v, d, dd] = u.jet(x);
        let d_fd = (u.value(x + h) - u.value(x - h)) / (2.0 * h);
        let dd_fd = (u.value(x + 1e-4) - 2.0 * v + u.value(x - 1e-4)) / 1e-8;
        assert!((d - d_fd).abs() < 1e-7 * (1.0 + d.abs()), "first derivative {d} vs {d_fd}");
        assert!((dd - dd_fd).abs() < 1e-4 * (1.0 + dd.abs()), "second derivative {dd} vs {dd_fd}");
    }

    #[test]
    fn univariate_jets_match_differences() {
        for x in [-1.3, 0.0, 0.4, 2.1] {
            fd_check(&Univariate::cosh(), x);
            fd_check(&Univariate::sech(), x);
            fd_check(&Univariate::cos(), x);
            fd_check(&Univariate::sin_squared(), x);
            fd_check(&Univariate::sinh_squared(1.7), x);
            fd_check(&Univariate::squared(Univariate::cosh()), x);
        }
        fd_check(&Univariate::power(4.0), 1.5);
        fd_check(&Univariate::power(2.5), 0.7);
    }

    #[test]
    fn diagonal_jet_matches_finite_differences() {
        let metric = MetricField::diagonal(vec![
            DiagonalEntry::constant(-1.0),
            DiagonalEntry::constant(1.0).with_factor(0, Univariate::squared(Univariate::cosh())),
            DiagonalEntry::constant(1.0)
                .with_factor(0, Univariate::squared(Univariate::cosh()))
                .with_factor(1, Univariate::sin_squared()),
        ]);
        let p = [0.3, 1.1, 0.2];
        let exact = metric.jet(&p, true);
        let fd = metric
            .clone()
            .with_mode(DerivativeMode::finite_difference())
            .jet(&p, true);
        for c in 0..3 {
            assert!((&exact.dg[c] - &fd.dg[c]).amax() < 1e-8);
        }
        let (e2, f2) = (exact.ddg.unwrap(), fd.ddg.unwrap());
        for k in 0..9 {
            assert!((&e2[k] - &f2[k]).amax() < 1e-5, "second partial {k}");
        }
    }

    #[test]
    fn scalar_fd_agrees_with_analytic() {
        let f = ScalarField::of_coordinate(3, 0, Univariate::sinh_squared(2.0));
        let p = [0.25, 0.0, 1.0];
        let a = f.jet(&p);
        let b = f.clone().with_mode(DerivativeMode::finite_difference()).jet(&p);
        assert!((&a.grad - &b.grad).amax() < 1e-7);
        assert!((&a.hess - &b.hess).amax() < 1e-4);
    }

    #[test]
    fn domain_violation_reports_coordinate() {
        let m = MetricField::new(2, |_| DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0])))
            .with_domain(vec![Interval::new(0.0, 1.0), Interval::unbounded()]);
        assert_eq!(m.domain_violation(&[0.5, 7.0]), None);
        assert_eq!(m.domain_violation(&[1.5, 7.0]), Some(0));
    }
}
