//! Monte Carlo action of `P_t` and `U_α` on test functions.
//!
//! `U_α f(z) = (1/α) E f(z + Z_T)` with `T ~ Exp(α)` is exact in
//! expectation, so resolvent estimates carry no time-discretization error.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::lyapunov::LyapunovNorm;
use crate::measures::LevyTriplet;
use crate::space::{dot, SpaceModel};
use crate::stats::{estimate, McEstimate, McPlan, Verdict};

/// A measurable function on the truncated space.
pub trait TestFunction: Send + Sync {
    fn eval(&self, z: &[f64]) -> f64;

    /// `sup |f|` when finite.
    fn bound(&self) -> Option<f64>;

    /// `Some(n)` when `f = φ ∘ P_n`; `eval` then reads only `z[..n]`.
    fn cylinder(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> String;
}

impl<T: TestFunction + ?Sized> TestFunction for &T {
    fn eval(&self, z: &[f64]) -> f64 {
        (**self).eval(z)
    }
    fn bound(&self) -> Option<f64> {
        (**self).bound()
    }
    fn cylinder(&self) -> Option<usize> {
        (**self).cylinder()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: TestFunction + ?Sized> TestFunction for Arc<T> {
    fn eval(&self, z: &[f64]) -> f64 {
        (**self).eval(z)
    }
    fn bound(&self) -> Option<f64> {
        (**self).bound()
    }
    fn cylinder(&self) -> Option<usize> {
        (**self).cylinder()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Clone, Debug)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn eval(&self, _: &[f64]) -> f64 {
        self.0
    }
    fn bound(&self) -> Option<f64> {
        Some(self.0.abs())
    }
    fn cylinder(&self) -> Option<usize> {
        Some(0)
    }
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Indicator of the closed E-ball `{||z - c|| ≤ r}`.
#[derive(Clone, Debug)]
pub struct IndicatorBall {
    pub center: Vec<f64>,
    pub radius: f64,
    weights: Vec<f64>,
}

impl IndicatorBall {
    pub fn new(space: &SpaceModel, center: Vec<f64>, radius: f64) -> Result<Self> {
        space.check(&center)?;
        if !(radius > 0.0) {
            return Err(Error::arg("ball radius must be positive"));
        }
        Ok(Self { center, radius, weights: space.weights().to_vec() })
    }
}

impl TestFunction for IndicatorBall {
    fn eval(&self, z: &[f64]) -> f64 {
        let d: f64 = self.weights.iter().zip(z).zip(&self.center).map(|((l, a), b)| l * (a - b).powi(2)).sum();
        f64::from(d <= self.radius * self.radius)
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn cylinder(&self) -> Option<usize> {
        // the ball only depends on the span of its nonzero data when centered
        None
    }
    fn name(&self) -> String {
        format!("indicator_ball(r={})", self.radius)
    }
}

/// `<ξ, z>^2` (unbounded).
#[derive(Clone, Debug)]
pub struct CoordinateSquare {
    pub xi: Vec<f64>,
}

impl TestFunction for CoordinateSquare {
    fn eval(&self, z: &[f64]) -> f64 {
        dot(&self.xi, z).powi(2)
    }
    fn bound(&self) -> Option<f64> {
        None
    }
    fn cylinder(&self) -> Option<usize> {
        Some(support(&self.xi))
    }
    fn name(&self) -> String {
        "coordinate_square".into()
    }
}

/// `<ξ, z>` (unbounded).
#[derive(Clone, Debug)]
pub struct Linear {
    pub xi: Vec<f64>,
}

impl TestFunction for Linear {
    fn eval(&self, z: &[f64]) -> f64 {
        dot(&self.xi, z)
    }
    fn bound(&self) -> Option<f64> {
        None
    }
    fn cylinder(&self) -> Option<usize> {
        Some(support(&self.xi))
    }
    fn name(&self) -> String {
        "linear".into()
    }
}

/// `1{<ξ, z> ≥ c}`.
#[derive(Clone, Debug)]
pub struct HalfspaceIndicator {
    pub xi: Vec<f64>,
    pub c: f64,
}

impl TestFunction for HalfspaceIndicator {
    fn eval(&self, z: &[f64]) -> f64 {
        f64::from(dot(&self.xi, z) >= self.c)
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn cylinder(&self) -> Option<usize> {
        Some(support(&self.xi))
    }
    fn name(&self) -> String {
        format!("halfspace_indicator(c={})", self.c)
    }
}

fn support(xi: &[f64]) -> usize {
    xi.iter().rposition(|x| *x != 0.0).map_or(0, |k| k + 1)
}

/// `min(1, |y|^{2-n})` with `y` the first `n` coordinates, `n ≥ 3`.
#[derive(Clone, Debug)]
pub struct NewtonTruncated {
    pub n: usize,
}

impl NewtonTruncated {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::arg("the Newton kernel is superharmonic only in dimension ≥ 3"));
        }
        Ok(Self { n })
    }
}

impl TestFunction for NewtonTruncated {
    fn eval(&self, z: &[f64]) -> f64 {
        let r = z[..self.n].iter().map(|c| c * c).sum::<f64>().sqrt();
        if r <= 1.0 {
            1.0
        } else {
            r.powi(2 - self.n as i32)
        }
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn cylinder(&self) -> Option<usize> {
        Some(self.n)
    }
    fn name(&self) -> String {
        format!("newton_truncated(n={})", self.n)
    }
}

/// `min(|y|^2, cap)` with `y` the first `n` coordinates.
#[derive(Clone, Debug)]
pub struct SquareCapped {
    pub n: usize,
    pub cap: f64,
}

impl TestFunction for SquareCapped {
    fn eval(&self, z: &[f64]) -> f64 {
        z[..self.n].iter().map(|c| c * c).sum::<f64>().min(self.cap)
    }
    fn bound(&self) -> Option<f64> {
        Some(self.cap)
    }
    fn cylinder(&self) -> Option<usize> {
        Some(self.n)
    }
    fn name(&self) -> String {
        format!("square_capped(n={}, cap={})", self.n, self.cap)
    }
}

/// `q_x^2` (unbounded).
#[derive(Clone, Debug)]
pub struct QxSquared(pub Arc<LyapunovNorm>);

impl TestFunction for QxSquared {
    fn eval(&self, z: &[f64]) -> f64 {
        self.0.q_sq(z)
    }
    fn bound(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String {
        "qx_squared".into()
    }
}

type Phi = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// `φ ∘ P_n` for an arbitrary bounded `φ` on the first `n` coordinates.
#[derive(Clone)]
pub struct Cylinder {
    pub n: usize,
    phi: Arc<Phi>,
    sup: f64,
    label: String,
}

impl Cylinder {
    pub fn new(n: usize, sup: f64, label: &str, phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { n, phi: Arc::new(phi), sup, label: label.into() }
    }
}

impl TestFunction for Cylinder {
    fn eval(&self, z: &[f64]) -> f64 {
        (self.phi)(&z[..self.n])
    }
    fn bound(&self) -> Option<f64> {
        Some(self.sup)
    }
    fn cylinder(&self) -> Option<usize> {
        Some(self.n)
    }
    fn name(&self) -> String {
        format!("cylinder({}, n={})", self.label, self.n)
    }
}

/// `min(f, cap)`.
pub struct Capped<F> {
    pub inner: F,
    pub cap: f64,
}

impl<F: TestFunction> TestFunction for Capped<F> {
    fn eval(&self, z: &[f64]) -> f64 {
        self.inner.eval(z).min(self.cap)
    }
    fn bound(&self) -> Option<f64> {
        Some(self.inner.bound().map_or(self.cap, |b| b.min(self.cap)).max(self.cap.abs()))
    }
    fn cylinder(&self) -> Option<usize> {
        self.inner.cylinder()
    }
    fn name(&self) -> String {
        format!("min({}, {})", self.inner.name(), self.cap)
    }
}

/// Guard recording sup-bound violations seen while sampling.
struct BoundGuard<'a> {
    f: &'a dyn TestFunction,
    bound: Option<f64>,
    violated: AtomicBool,
}

impl<'a> BoundGuard<'a> {
    fn new(f: &'a dyn TestFunction) -> Self {
        Self { f, bound: f.bound(), violated: AtomicBool::new(false) }
    }

    #[inline]
    fn eval(&self, z: &[f64]) -> f64 {
        let v = self.f.eval(z);
        if let Some(b) = self.bound {
            if v.abs() > b * (1.0 + 1e-12) {
                self.violated.store(true, Ordering::Relaxed);
            }
        }
        v
    }

    fn finish(&self) -> Result<()> {
        if self.violated.load(Ordering::Relaxed) {
            Err(Error::Argument(format!("{} exceeded its declared bound", self.f.name())))
        } else {
            Ok(())
        }
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be positive and finite")))
    }
}

/// `P_t f(z) = E f(z + Z_t)`.
pub fn apply_pt(triplet: &LevyTriplet, f: &dyn TestFunction, t: f64, z: &[f64], plan: &McPlan) -> Result<McEstimate> {
    positive(t, "time")?;
    check_dim(triplet.dim(), z.len())?;
    let g = BoundGuard::new(f);
    let est = estimate(plan, |rng| {
        let mut w = z.to_vec();
        triplet.add_increment(&mut w, t, 1.0, rng);
        g.eval(&w)
    })?;
    g.finish()?;
    Ok(est)
}

/// `U_α f(z) = (1/α) E f(z + Z_T)`, `T ~ Exp(α)`.
pub fn apply_ualpha(triplet: &LevyTriplet, f: &dyn TestFunction, alpha: f64, z: &[f64], plan: &McPlan) -> Result<McEstimate> {
    positive(alpha, "resolvent parameter")?;
    check_dim(triplet.dim(), z.len())?;
    let g = BoundGuard::new(f);
    let est = estimate(plan, |rng| {
        let mut w = z.to_vec();
        triplet.sample_at_exponential_time(alpha, &mut w, rng);
        g.eval(&w)
    })?;
    g.finish()?;
    Ok(est.scaled(1.0 / alpha))
}

fn cylinder_dim(f: &dyn TestFunction, dim: usize) -> Result<usize> {
    match f.cylinder() {
        Some(n) if n <= dim => Ok(n.max(1)),
        Some(n) => Err(Error::Dimension { expected: dim, got: n }),
        None => Err(Error::arg(format!("{} is not a cylinder function", f.name()))),
    }
}

/// `P_t^{(n)} φ (P_n z)`: the `n`-dimensional process started at the
/// projection.
pub fn apply_pt_projected(triplet: &LevyTriplet, f: &dyn TestFunction, t: f64, z: &[f64], plan: &McPlan) -> Result<McEstimate> {
    let n = cylinder_dim(f, triplet.dim())?;
    apply_pt(&triplet.project(n)?, f, t, &z[..n], plan)
}

/// `U_α^{(n)} φ (P_n z)`.
pub fn apply_ualpha_projected(
    triplet: &LevyTriplet,
    f: &dyn TestFunction,
    alpha: f64,
    z: &[f64],
    plan: &McPlan,
) -> Result<McEstimate> {
    let n = cylinder_dim(f, triplet.dim())?;
    check_dim(triplet.dim(), z.len())?;
    apply_ualpha(&triplet.project(n)?, f, alpha, &z[..n], plan)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionPair {
    pub full: McEstimate,
    pub projected: McEstimate,
    pub difference: McEstimate,
    pub verdict: Verdict,
}

/// `U_α f = (U_α^{(n)} φ) ∘ P_n` from two independent estimators.
pub fn projection_identity_check(
    triplet: &LevyTriplet,
    f: &dyn TestFunction,
    alpha: f64,
    z: &[f64],
    plan: &McPlan,
) -> Result<ProjectionPair> {
    let full = apply_ualpha(triplet, f, alpha, z, &plan.derive(1))?;
    let projected = apply_ualpha_projected(triplet, f, alpha, z, &plan.derive(2))?;
    let difference = full.minus_independent(&projected);
    let verdict = difference.verdict(0.0, 0.0);
    Ok(ProjectionPair { full, projected, difference, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventCheck {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub verdict: Verdict,
}

/// `U_α f - U_β f = (β - α) U_β U_α f` with a nested estimator on the right;
/// the inner `U_α f` uses `inner` samples per outer draw.
pub fn resolvent_identity_check(
    triplet: &LevyTriplet,
    f: &dyn TestFunction,
    alpha: f64,
    beta: f64,
    z: &[f64],
    inner: usize,
    plan: &McPlan,
) -> Result<ResolventCheck> {
    positive(alpha, "α")?;
    positive(beta, "β")?;
    if inner == 0 {
        return Err(Error::arg("inner sample count must be positive"));
    }
    let ua = apply_ualpha(triplet, f, alpha, z, &plan.derive(1))?;
    let ub = apply_ualpha(triplet, f, beta, z, &plan.derive(2))?;
    let lhs = ua.minus_independent(&ub);
    let g = BoundGuard::new(f);
    let nested = estimate(&plan.derive(3), |rng| {
        let mut y = z.to_vec();
        triplet.sample_at_exponential_time(beta, &mut y, rng);
        let mut acc = 0.0;
        for _ in 0..inner {
            let mut w = y.clone();
            triplet.sample_at_exponential_time(alpha, &mut w, rng);
            acc += g.eval(&w);
        }
        acc / (inner as f64 * alpha)
    })?;
    g.finish()?;
    let rhs = nested.scaled((beta - alpha) / beta);
    let verdict = lhs.minus_independent(&rhs).verdict(0.0, 0.0);
    Ok(ResolventCheck { lhs, rhs, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferRow {
    pub alpha: f64,
    pub start: usize,
    pub lhs: McEstimate,
    pub rhs: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    /// `α U_{β+α} v` nondecreasing in `α` at every start, within noise.
    pub trend: Verdict,
    pub verdict: Verdict,
}

/// `α U_{β+α}(v ∘ P_n)(z) ≤ v(P_n z)` on a grid of `α` and starts.
///
/// The `α`-trend is reported separately: it is the checkable half of the
/// limit `α U_{β+α} v → v`.
pub fn supermedian_transfer_check(
    triplet: &LevyTriplet,
    v: &dyn TestFunction,
    beta: f64,
    alpha_grid: &[f64],
    zs: &[Vec<f64>],
    plan: &McPlan,
) -> Result<TransferReport> {
    positive(beta, "β")?;
    if v.bound().is_none() {
        return Err(Error::arg(format!("{} is unbounded; cap it before testing", v.name())));
    }
    cylinder_dim(v, triplet.dim())?;
    let mut rows = Vec::new();
    let mut trend = Verdict::Pass;
    for (i, z) in zs.iter().enumerate() {
        check_dim(triplet.dim(), z.len())?;
        let rhs = v.eval(z);
        let mut prev: Option<McEstimate> = None;
        for (j, &alpha) in alpha_grid.iter().enumerate() {
            positive(alpha, "α")?;
            let u = apply_ualpha(triplet, v, beta + alpha, z, &plan.derive((i * 1000 + j) as u64))?;
            let lhs = u.scaled(alpha);
            let verdict = lhs.verdict_le(rhs, 1e-12);
            if let Some(p) = prev {
                trend = trend.and(lhs.minus_independent(&p).verdict_ge(0.0, 0.0));
            }
            prev = Some(lhs);
            rows.push(TransferRow { alpha, start: i, lhs, rhs, verdict });
        }
    }
    let verdict = Verdict::all(rows.iter().map(|r| r.verdict));
    Ok(TransferReport { rows, trend, verdict })
}

/// Exponential draw shared by resolvent-type estimators.
pub fn exponential_time(rate: f64, rng: &mut crate::rng::Stream) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}
