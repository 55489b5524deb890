//! Stochastic solution `H^V f(x) = E^x[f(W_{T_{E∖V}}); T_{E∖V} < ∞]` of
//! the Dirichlet problem, and the controlled-convergence checker.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lyapunov::DIVERGENCE_FACTOR;
use crate::measures::LevyTriplet;
use crate::operators::TestFunction;
use crate::potential::{simulate_multi, PathConfig, PointCloud, TargetSet};
use crate::space::{dot, SpaceModel};
use crate::stats::{estimate_many, z_value, McEstimate, McPlan, Verdict};

/// Non-exit mass above this fraction is flagged.
pub const NON_EXIT_LIMIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// `{||z - c||_E < r}`.
    EBall { center: Vec<f64>, radius: f64 },
    /// `{a < <ξ, z> < b}`.
    Slab { xi: Vec<f64>, a: f64, b: f64 },
    /// `{lower_k < z_k < upper_k}`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Open, strongly regular domain: every boundary point of a ball, slab or
/// box carries an exterior cone.
#[derive(Clone, Debug)]
pub struct Domain {
    pub kind: DomainKind,
    weights: Arc<[f64]>,
    exit: TargetSet,
}

impl Domain {
    pub fn e_ball(space: &SpaceModel, center: Vec<f64>, radius: f64) -> Result<Self> {
        let exit = TargetSet::e_ball(space, center.clone(), radius)?.complement();
        Ok(Self { kind: DomainKind::EBall { center, radius }, weights: space.weights().into(), exit })
    }

    pub fn slab(space: &SpaceModel, xi: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        space.check(&xi)?;
        if !(a < b) {
            return Err(Error::arg("slab needs a < b"));
        }
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        let exit = TargetSet::union(vec![TargetSet::halfspace(xi.clone(), b)?, TargetSet::halfspace(neg, -a)?]);
        Ok(Self { kind: DomainKind::Slab { xi, a, b }, weights: space.weights().into(), exit })
    }

    pub fn coordinate_box(space: &SpaceModel, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        space.check(&lower)?;
        space.check(&upper)?;
        let mut parts = Vec::new();
        for k in 0..lower.len() {
            if !(lower[k] < upper[k]) {
                return Err(Error::arg("box needs lower < upper"));
            }
            let mut e = vec![0.0; lower.len()];
            if upper[k].is_finite() {
                e[k] = 1.0;
                parts.push(TargetSet::halfspace(e.clone(), upper[k])?);
            }
            if lower[k].is_finite() {
                e[k] = -1.0;
                parts.push(TargetSet::halfspace(e, -lower[k])?);
            }
        }
        if parts.is_empty() {
            return Err(Error::arg("box must constrain at least one coordinate"));
        }
        Ok(Self { kind: DomainKind::Box { lower, upper }, weights: space.weights().into(), exit: TargetSet::union(parts) })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// The closed complement `E ∖ V`.
    pub fn exit_target(&self) -> &TargetSet {
        &self.exit
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.boundary_distance(z) > 0.0
    }

    /// Positive inside, zero on `∂V`, negative outside.
    pub fn boundary_distance(&self, z: &[f64]) -> f64 {
        self.exit.level(z)
    }

    /// Whether the closed E-ball `B_r(x)` lies in `V`.
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        let lam = &self.weights;
        match &self.kind {
            DomainKind::EBall { center, radius } => {
                let d: f64 = lam.iter().zip(x).zip(center).map(|((l, a), b)| l * (a - b).powi(2)).sum();
                d.sqrt() + r < *radius
            }
            DomainKind::Slab { xi, a, b } => {
                // sup of <ξ, d> over ||d||_E ≤ r
                let reach = r * xi.iter().zip(lam.iter()).map(|(x, l)| x * x / l).sum::<f64>().sqrt();
                let p = dot(xi, x);
                p - reach > *a && p + reach < *b
            }
            DomainKind::Box { lower, upper } => (0..lower.len()).all(|k| {
                let reach = r / lam[k].sqrt();
                x[k] - reach > lower[k] && x[k] + reach < upper[k]
            }),
        }
    }

    pub fn regularity_note(&self) -> &'static str {
        match self.kind {
            DomainKind::EBall { .. } => "convex ball: the exterior of a supporting half-space is a cone at each boundary point",
            DomainKind::Slab { .. } => "slab: each boundary point has the outer half-space as exterior cone",
            DomainKind::Box { .. } => "box: each boundary point has an exterior orthant-type cone",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataClass {
    BoundedContinuous,
    BoundedBorel,
    L1Positive,
}

/// Boundary data `f: ∂V → R`, clamped to `[-sup, sup]` so that exit points
/// in the collar (or beyond it, after a jump) stay admissible.
#[derive(Clone)]
pub struct BoundaryData {
    pub f: Arc<dyn TestFunction>,
    pub sup: f64,
    pub class: DataClass,
}

impl BoundaryData {
    pub fn new(f: Arc<dyn TestFunction>, sup: f64, class: DataClass) -> Result<Self> {
        if !(sup > 0.0) {
            return Err(Error::arg("boundary data bound must be positive"));
        }
        Ok(Self { f, sup, class })
    }
}

impl TestFunction for BoundaryData {
    fn eval(&self, z: &[f64]) -> f64 {
        self.f.eval(z).clamp(-self.sup, self.sup)
    }
    fn bound(&self) -> Option<f64> {
        Some(self.sup)
    }
    fn cylinder(&self) -> Option<usize> {
        self.f.cylinder()
    }
    fn name(&self) -> String {
        self.f.name()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub estimate: McEstimate,
    /// Fraction of paths still in `V` at the horizon.
    pub non_exit: McEstimate,
    pub flagged: bool,
}

fn bounded(f: &dyn TestFunction) -> Result<f64> {
    f.bound().ok_or_else(|| Error::arg(format!("{} is unbounded; use solve_l1", f.name())))
}

/// `H^V f_j(z)` for several boundary functions on shared paths. With
/// `antithetic`, each draw averages a path and its mirror image.
pub fn solve_many(
    triplet: &LevyTriplet,
    domain: &Domain,
    fs: &[&dyn TestFunction],
    z: &[f64],
    antithetic: bool,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<(Vec<McEstimate>, McEstimate)> {
    cfg.validate()?;
    check_dim(domain.dim(), z.len())?;
    check_dim(triplet.dim(), z.len())?;
    if !domain.contains(z) {
        return Err(Error::arg("start point is not in the domain"));
    }
    let k = fs.len();
    let exit = domain.exit_target();
    let est = estimate_many(plan, k + 1, |rng, out| {
        let signs: &[f64] = if antithetic { &[1.0, -1.0] } else { &[1.0] };
        let base = rng.clone();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &sign) in signs.iter().enumerate() {
            let o = if i == 0 {
                simulate_multi(triplet, z, &[exit], cfg, false, sign, rng)
            } else {
                let mut r = base.clone();
                simulate_multi(triplet, z, &[exit], cfg, false, sign, &mut r)
            };
            let h = &o.hits[0];
            for (j, f) in fs.iter().enumerate() {
                if h.hit {
                    out[j] += f.eval(&h.location);
                }
            }
            if !h.hit {
                out[k] += 1.0;
            }
        }
        let n = signs.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    })?;
    let mut est = est;
    let non_exit = est.pop().expect("non-exit column");
    Ok((est, non_exit))
}

/// `H^V f(z)` for bounded `f`.
pub fn solve(
    triplet: &LevyTriplet,
    domain: &Domain,
    f: &dyn TestFunction,
    z: &[f64],
    antithetic: bool,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<Solution> {
    let sup = bounded(f)?;
    let (est, non_exit) = solve_many(triplet, domain, &[f], z, antithetic, cfg, plan)?;
    // a missing exit could have contributed at most `sup` each
    let estimate = est[0].with_bias(sup * non_exit.mean);
    Ok(Solution { estimate, non_exit, flagged: non_exit.mean > NON_EXIT_LIMIT })
}

/// Geometric approach `x_k = y + 2^{-k}(x_0 - y)`, `k = 1..=points`.
pub fn approach_ray(y: &[f64], x0: &[f64], points: usize) -> Vec<Vec<f64>> {
    (1..=points)
        .map(|k| {
            let s = 0.5f64.powi(k as i32);
            y.iter().zip(x0).map(|(a, b)| a + s * (b - a)).collect()
        })
        .collect()
}

pub const APPROACH_POINTS: usize = 8;
pub const TAIL_WINDOW: usize = 3;

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityRow {
    pub k: usize,
    pub estimate: McEstimate,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub target: f64,
    pub rows: Vec<ContinuityRow>,
    pub trend: Verdict,
    pub last: Verdict,
    pub verdict: Verdict,
}

/// `H^V f(x_k) → f(y)` along the default ray from `x0` to `y ∈ ∂V`.
/// `modulus` bounds `|f(x) - f(y)| / |x - y|_H` near `y`; the allowance at
/// the finest point is `modulus |x_K - y|_H`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_continuity_check(
    triplet: &LevyTriplet,
    domain: &Domain,
    f: &dyn TestFunction,
    y: &[f64],
    x0: &[f64],
    modulus: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<ContinuityReport> {
    check_dim(domain.dim(), y.len())?;
    if domain.boundary_distance(y).abs() > 1e-9 {
        return Err(Error::arg("approach target is not on the boundary"));
    }
    let target = f.eval(y);
    let xs = approach_ray(y, x0, APPROACH_POINTS);
    let mut rows = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let s = solve(triplet, domain, f, x, false, cfg, &plan.derive(i as u64))?;
        rows.push(ContinuityRow { k: i + 1, estimate: s.estimate, gap: (s.estimate.mean - target).abs() });
    }
    let head: f64 = rows[..TAIL_WINDOW].iter().map(|r| r.gap).sum();
    let tail: f64 = rows[rows.len() - TAIL_WINDOW..].iter().map(|r| r.gap).sum();
    let noise: f64 = rows.iter().map(|r| r.estimate.z() * r.estimate.stderr).fold(0.0, f64::max);
    let trend = Verdict::from_bool(tail <= head + TAIL_WINDOW as f64 * noise);
    let xk = xs.last().expect("approach points");
    let dist = xk.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let last = rows.last().expect("rows").estimate.verdict(target, modulus * dist);
    Ok(ContinuityReport { target, rows, trend, last, verdict: trend.and(last) })
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicRow {
    pub radius: f64,
    pub two_stage: McEstimate,
    pub direct: McEstimate,
    pub verdict: Verdict,
}

/// `H^{B_r(x)} H^V f(x) = H^V f(x)`: exit the ball, restart from the exit
/// point, and compare with an independent direct solve.
pub fn harmonicity_check(
    triplet: &LevyTriplet,
    domain: &Domain,
    f: &dyn TestFunction,
    x: &[f64],
    r_grid: &[f64],
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<Vec<HarmonicRow>> {
    bounded(f)?;
    cfg.validate()?;
    check_dim(domain.dim(), x.len())?;
    let space = SpaceModel::explicit(domain.weights.to_vec())?;
    let exit = domain.exit_target();
    let mut rows = Vec::new();
    for (i, &r) in r_grid.iter().enumerate() {
        if !domain.contains_ball(x, r) {
            return Err(Error::arg(format!("ball of radius {r} is not contained in the domain")));
        }
        let ball_exit = TargetSet::e_ball(&space, x.to_vec(), r)?.complement();
        let p = plan.derive(2 * i as u64);
        let two = estimate_many(&p, 1, |rng, out| {
            let first = simulate_multi(triplet, x, &[&ball_exit], cfg, false, 1.0, rng);
            let h = &first.hits[0];
            out[0] = if h.hit {
                let second = simulate_multi(triplet, &h.location, &[exit], cfg, false, 1.0, rng);
                let g = &second.hits[0];
                if g.hit {
                    f.eval(&g.location)
                } else {
                    0.0
                }
            } else {
                0.0
            };
        })?[0];
        let direct = solve(triplet, domain, f, x, false, cfg, &plan.derive(2 * i as u64 + 1))?.estimate;
        let verdict = two.minus_independent(&direct).verdict(0.0, direct.bias);
        rows.push(HarmonicRow { radius: r, two_stage: two, direct, verdict });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    C1,
    C2,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlRecord {
    pub sequence: usize,
    pub y: Vec<f64>,
    pub h: Vec<McEstimate>,
    pub k: Vec<f64>,
    /// Largest control value over the tail window; infinite when the tail
    /// diverges.
    pub limsup_k: f64,
    pub branch: Branch,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub records: Vec<ControlRecord>,
    pub verdict: Verdict,
}

/// An approach sequence `x_k → y ∈ ∂V` inside `V_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub y: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Approach {
    pub fn ray(y: Vec<f64>, x0: &[f64]) -> Self {
        let points = approach_ray(&y, x0, APPROACH_POINTS);
        Self { y, points }
    }
}

/// Tail of the control: divergent when it is non-finite or grows by at
/// least [`DIVERGENCE_FACTOR`] across the window. The rule is invariant
/// under `k → c k`.
pub fn control_branch(k_tail: &[f64]) -> (f64, Branch) {
    let top = k_tail.iter().copied().fold(0.0, f64::max);
    if k_tail.iter().any(|k| !k.is_finite()) {
        return (f64::INFINITY, Branch::C2);
    }
    let (first, last) = (k_tail[0], k_tail[k_tail.len() - 1]);
    let diverging = if first > 0.0 { last / first >= DIVERGENCE_FACTOR } else { last > 0.0 };
    if diverging {
        (f64::INFINITY, Branch::C2)
    } else {
        (top, Branch::C1)
    }
}

/// Verdict of one sequence. (c1): the last `h` matches `f(y)` within `tol`
/// plus noise. (c2): every tail ratio `|h|/(1+k)` is at most `tol` plus
/// noise.
pub fn control_verdict(h: &[McEstimate], k: &[f64], fy: f64, tol: f64) -> (f64, Branch, Verdict) {
    let w = TAIL_WINDOW.min(h.len());
    let ht = &h[h.len() - w..];
    let kt = &k[k.len() - w..];
    let (limsup, branch) = control_branch(kt);
    let verdict = match branch {
        Branch::C1 => {
            if fy.is_finite() {
                ht[w - 1].verdict(fy, tol)
            } else {
                Verdict::Fail
            }
        }
        Branch::C2 => Verdict::all(ht.iter().zip(kt).map(|(e, &kv)| {
            if kv.is_infinite() {
                return Verdict::Pass;
            }
            let s = 1.0 + kv;
            McEstimate { mean: e.mean.abs() / s, stderr: e.stderr / s, ..*e }.verdict_le(0.0, tol)
        })),
    };
    (limsup, branch, verdict)
}

/// Controlled convergence of `h` to `f` along each approach sequence.
pub fn controlled_convergence_check(
    domain: &Domain,
    h: &dyn Fn(usize, &[f64]) -> Result<McEstimate>,
    f: &dyn TestFunction,
    k: &dyn Fn(&[f64]) -> f64,
    sequences: &[Approach],
    tol: f64,
) -> Result<ControlReport> {
    let mut records = Vec::new();
    for (s, seq) in sequences.iter().enumerate() {
        check_approach(domain, seq)?;
        let hs: Vec<McEstimate> =
            seq.points.iter().enumerate().map(|(i, x)| h(s * 1000 + i, x)).collect::<Result<_>>()?;
        let ks: Vec<f64> = seq.points.iter().map(|x| k(x)).collect();
        if ks.iter().any(|v| *v < 0.0) {
            return Err(Error::arg("control function must be nonnegative"));
        }
        let (limsup_k, branch, verdict) = control_verdict(&hs, &ks, f.eval(&seq.y), tol);
        records.push(ControlRecord { sequence: s, y: seq.y.clone(), h: hs, k: ks, limsup_k, branch, verdict });
    }
    let verdict = Verdict::all(records.iter().map(|r| r.verdict));
    Ok(ControlReport { records, verdict })
}

fn check_approach(domain: &Domain, seq: &Approach) -> Result<()> {
    if seq.points.len() < TAIL_WINDOW {
        return Err(Error::arg("approach sequence is too short"));
    }
    if domain.boundary_distance(&seq.y).abs() > 1e-9 {
        return Err(Error::arg("approach target is not on the boundary"));
    }
    let dist = |x: &[f64]| x.iter().zip(&seq.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if seq.points.iter().any(|x| !domain.contains(x)) {
        return Err(Error::arg("approach points must lie in the domain"));
    }
    let first = dist(&seq.points[0]);
    let last = dist(seq.points.last().expect("points"));
    if !(last < 0.125 * first) {
        return Err(Error::arg("approach sequence does not converge to its boundary point"));
    }
    Ok(())
}

/// A nonnegative control `k` on `V`.
pub type Control = dyn Fn(&[f64]) -> f64;

#[derive(Clone, Debug, Serialize)]
pub struct L1Solution {
    /// `λ(h_m)` up the ladder.
    pub lambda_h: Vec<McEstimate>,
    /// Ladder indices kept so that `Σ (λ(h) - λ(h_m))` converges.
    pub subsequence: Vec<usize>,
    /// Top-of-ladder `h` at each cloud point.
    pub h: Vec<McEstimate>,
    /// `k = k_0 + l` at each cloud point.
    pub k: Vec<f64>,
}

/// `H^V f` for `f ≥ 0` in `L^1` via the ladder `f_m = min(f, caps[m])`.
///
/// `controls[m]` is a declared control for `f_m` (zero for continuous
/// levels), normalized to `λ(k_m) = 1` before forming
/// `k_0 = Σ 2^{-m} k_m`. The correction `l = Σ (h - h_m)` runs over a
/// subsequence with `λ(h) - λ(h_m) ≤ 2^{-j}(λ(h) - λ(h_0))`.
#[allow(clippy::too_many_arguments)]
pub fn solve_l1(
    triplet: &LevyTriplet,
    domain: &Domain,
    f: &dyn TestFunction,
    caps: &[f64],
    controls: Option<&[&Control]>,
    lambda: &PointCloud,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<L1Solution> {
    if caps.is_empty() || caps.windows(2).any(|w| w[0] >= w[1]) || caps[0] <= 0.0 {
        return Err(Error::arg("caps must be positive and increasing"));
    }
    if let Some(c) = controls {
        check_dim(caps.len(), c.len())?;
    }
    let ladder: Vec<crate::operators::Capped<&dyn TestFunction>> =
        caps.iter().map(|&cap| crate::operators::Capped { inner: f, cap }).collect();
    let refs: Vec<&dyn TestFunction> = ladder.iter().map(|c| c as &dyn TestFunction).collect();
    let m = caps.len();
    let mut per_point: Vec<Vec<McEstimate>> = Vec::new();
    for (i, x) in lambda.points.iter().enumerate() {
        let (est, _) = solve_many(triplet, domain, &refs, x, false, cfg, &plan.derive(i as u64))?;
        if est.iter().any(|e| e.mean < 0.0) {
            return Err(Error::arg("boundary data must be nonnegative"));
        }
        per_point.push(est);
    }
    let lambda_h: Vec<McEstimate> = (0..m)
        .map(|j| {
            let parts: Vec<McEstimate> =
                per_point.iter().zip(&lambda.masses).map(|(e, &w)| e[j].scaled(w)).collect();
            McEstimate::sum_independent(&parts)
        })
        .collect();
    if m >= 3 {
        let d_first = lambda_h[1].mean - lambda_h[0].mean;
        let last = lambda_h[m - 1].minus_independent(&lambda_h[m - 2]);
        let noise = z_value(last.confidence) * last.stderr;
        if last.mean > noise && last.mean >= 0.5 * d_first {
            return Err(Error::Integrability("λ(h_m) does not settle up the ladder".into()));
        }
    }
    let top = lambda_h[m - 1].mean;
    let g0 = (top - lambda_h[0].mean).max(0.0);
    let mut subsequence = Vec::new();
    for (j, lh) in lambda_h.iter().enumerate().take(m - 1) {
        let need = g0 * 0.5f64.powi(subsequence.len() as i32);
        if top - lh.mean <= need + 1e-15 {
            subsequence.push(j);
        }
    }
    let mut k = vec![0.0; lambda.len()];
    for (i, e) in per_point.iter().enumerate() {
        k[i] = subsequence.iter().map(|&j| (e[m - 1].mean - e[j].mean).max(0.0)).sum();
    }
    if let Some(ctrl) = controls {
        for (j, c) in ctrl.iter().enumerate() {
            let vals: Vec<f64> = lambda.points.iter().map(|x| c(x)).collect();
            let norm: f64 = vals.iter().zip(&lambda.masses).map(|(v, w)| v * w).sum();
            if norm > 0.0 {
                let s = 0.5f64.powi(j as i32 + 1) / norm;
                k.iter_mut().zip(&vals).for_each(|(a, v)| *a += s * v);
            }
        }
    }
    let h = per_point.iter().map(|e| e[m - 1]).collect();
    Ok(L1Solution { lambda_h, subsequence, h, k })
}

/// The series rule: if each `h_n = H^V f_n` converges to `f_n` controlled
/// by `k`, then `Σ h_n` converges to `Σ f_n` controlled by `k + l` with
/// `l = Σ α_n |h_n|`. All `h_n` share paths at each approach point.
#[allow(clippy::too_many_arguments)]
pub fn series_rule(
    triplet: &LevyTriplet,
    domain: &Domain,
    fs: &[&dyn TestFunction],
    alphas: &[f64],
    k: &dyn Fn(&[f64]) -> f64,
    sequences: &[Approach],
    tol: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<ControlReport> {
    check_dim(fs.len(), alphas.len())?;
    if alphas.windows(2).any(|w| w[0] > w[1]) || alphas.iter().any(|a| *a <= 0.0) {
        return Err(Error::arg("α_n must be positive and nondecreasing"));
    }
    let mut records = Vec::new();
    for (s, seq) in sequences.iter().enumerate() {
        check_approach(domain, seq)?;
        let mut hs = Vec::new();
        let mut ks = Vec::new();
        for (i, x) in seq.points.iter().enumerate() {
            let (est, _) = solve_many(triplet, domain, fs, x, false, cfg, &plan.derive((s * 1000 + i) as u64))?;
            let l: f64 = est.iter().zip(alphas).map(|(e, a)| a * e.mean.abs()).sum();
            hs.push(McEstimate::sum_independent(&est).with_bias(0.0));
            ks.push(k(x) + l);
        }
        let fy: f64 = fs.iter().map(|f| f.eval(&seq.y)).sum();
        let (limsup_k, branch, verdict) = control_verdict(&hs, &ks, fy, tol);
        records.push(ControlRecord { sequence: s, y: seq.y.clone(), h: hs, k: ks, limsup_k, branch, verdict });
    }
    let verdict = Verdict::all(records.iter().map(|r| r.verdict));
    Ok(ControlReport { records, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Constant, Linear};
    use crate::rng::StreamKey;

    fn plan(n: u64, tag: &str) -> McPlan {
        McPlan::new(n, StreamKey::new(44).labeled(tag))
    }

    fn unit_slab(dim: usize) -> (SpaceModel, Domain) {
        let s = SpaceModel::geometric(dim);
        let mut e1 = vec![0.0; dim];
        e1[0] = 1.0;
        let d = Domain::slab(&s, e1, -1.0, 1.0).unwrap();
        (s, d)
    }

    #[test]
    fn domain_geometry() {
        let (s, d) = unit_slab(3);
        assert!(d.contains(&[0.0, 5.0, 0.0]));
        assert!(!d.contains(&[1.0, 0.0, 0.0]));
        assert!((d.boundary_distance(&[0.25, 0.0, 0.0]) - 0.75).abs() < 1e-15);
        assert!(d.contains_ball(&[0.0; 3], 0.4));
        assert!(!d.contains_ball(&[0.0; 3], 0.6));
        let b = Domain::e_ball(&s, s.zero(), 1.0).unwrap();
        assert!(b.contains(&[1.5, 0.0, 0.0]));
        assert!(!b.contains(&[2.5, 0.0, 0.0]));
        let bx = Domain::coordinate_box(&s, vec![-1.0, f64::NEG_INFINITY, f64::NEG_INFINITY], vec![1.0, f64::INFINITY, f64::INFINITY])
            .unwrap();
        assert!(bx.contains(&[0.0, 100.0, 0.0]));
    }

    #[test]
    fn constant_data_is_exact() {
        let (_, d) = unit_slab(3);
        let tr = LevyTriplet::brownian(3);
        let s = solve(&tr, &d, &Constant(1.0), &[0.3, 0.0, 0.0], false, &PathConfig::default(), &plan(500, "c"))
            .unwrap();
        assert_eq!(s.estimate.mean, 1.0);
        assert!(!s.flagged);
        assert!(solve(&tr, &d, &Constant(1.0), &[3.0, 0.0, 0.0], false, &PathConfig::default(), &plan(10, "x"))
            .is_err());
    }

    #[test]
    fn slab_gamblers_ruin() {
        let (_, d) = unit_slab(3);
        let tr = LevyTriplet::brownian(3);
        let f = BoundaryData::new(Arc::new(Linear { xi: vec![1.0, 0.0, 0.0] }), 1.0, DataClass::BoundedContinuous).unwrap();
        let x = 0.4;
        let s = solve(&tr, &d, &f, &[x, 0.0, 0.0], false, &PathConfig::default(), &plan(20000, "gr")).unwrap();
        // f(a) = -1, f(b) = 1
        let exact = -(1.0 - x) / 2.0 + (x + 1.0) / 2.0;
        assert_ne!(s.estimate.verdict(exact, 0.0), Verdict::Fail, "{:?}", s.estimate);
    }

    #[test]
    fn antithetic_ball_center_is_exact_for_linear_data() {
        let s = SpaceModel::geometric(6);
        let c = vec![0.2, -0.1, 0.0, 0.0, 0.0, 0.0];
        let d = Domain::e_ball(&s, c.clone(), 1.0).unwrap();
        let tr = LevyTriplet::brownian(6);
        let xi = vec![1.0, 2.0, 0.5, 0.0, 0.0, 1.0];
        let f = BoundaryData::new(Arc::new(Linear { xi: xi.clone() }), 1e3, DataClass::BoundedContinuous).unwrap();
        let r = solve(&tr, &d, &f, &c, true, &PathConfig::default(), &plan(256, "anti")).unwrap();
        assert!((r.estimate.mean - dot(&xi, &c)).abs() < 1e-9, "{:?}", r.estimate);
    }

    #[test]
    fn branch_rule_is_scale_invariant() {
        assert_eq!(control_branch(&[0.0, 0.0, 0.0]).1, Branch::C1);
        assert_eq!(control_branch(&[1.0, 2.0, 4.0]).1, Branch::C2);
        assert_eq!(control_branch(&[2.0, 4.0, 8.0]).1, Branch::C2);
        assert_eq!(control_branch(&[1.0, 1.1, 1.2]).1, Branch::C1);
        assert_eq!(control_branch(&[1.0, f64::INFINITY, 1.0]).1, Branch::C2);
    }

    #[test]
    fn approach_validation() {
        let (_, d) = unit_slab(2);
        let bad = Approach { y: vec![0.5, 0.0], points: vec![vec![0.0, 0.0]; 4] };
        let h = |_: usize, _: &[f64]| Ok(McEstimate::exact(0.0));
        assert!(controlled_convergence_check(&d, &h, &Constant(0.0), &|_| 0.0, &[bad], 0.1).is_err());
        let good = Approach::ray(vec![1.0, 0.0], &[0.0, 0.0]);
        let r = controlled_convergence_check(&d, &h, &Constant(0.0), &|_| 0.0, &[good], 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.records[0].branch, Branch::C1);
    }
}
