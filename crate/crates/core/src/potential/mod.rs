//! Hitting kernels, reduced functions, polarity diagnostics, capacity,
//! balayage and domination on empirical measures.
//!
//! Every quantity of the form `E^x[e^{-βT_M} v(X_{T_M}); T_M < ∞]` is
//! estimated on simulated paths truncated at `cfg.horizon`; the truncation
//! error `sup|v| e^{-β horizon}` is carried as the estimate's bias.

mod path;
mod target;

pub use path::{simulate_multi, simulate_to_hit, HitRecord, PathConfig, PathOutcome};
pub use target::{TargetSet, TargetSpec};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::LevyTriplet;
use crate::operators::{exponential_time, TestFunction};
use crate::space::SpaceModel;
use crate::stats::{estimate_many, z_value, McEstimate, McPlan, Verdict};

/// Finite measure `Σ m_i δ_{x_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        check_dim(points.len(), masses.len())?;
        if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::arg("masses must be finite and nonnegative"));
        }
        Ok(Self { points, masses })
    }

    pub fn dirac(x: Vec<f64>) -> Self {
        Self { points: vec![x], masses: vec![1.0] }
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { points: self.points.clone(), masses: self.masses.iter().map(|m| m * c).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check(&self, dim: usize) -> Result<()> {
        self.points.iter().try_for_each(|p| check_dim(dim, p.len()))
    }
}

/// Indicator of a target set as a test function.
#[derive(Clone, Debug)]
pub struct SetIndicator(pub TargetSet);

impl TestFunction for SetIndicator {
    fn eval(&self, z: &[f64]) -> f64 {
        f64::from(u8::from(self.0.contains(z)))
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn name(&self) -> String {
        "1_M".into()
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} must be positive and finite")))
    }
}

fn bounded(v: &dyn TestFunction) -> Result<f64> {
    v.bound().ok_or_else(|| Error::arg(format!("{} is unbounded", v.name())))
}

/// `E^z[e^{-βT_j}; T_j < horizon]` for each target on shared paths, plus
/// linear combinations of them evaluated per path.
pub fn hit_profile(
    triplet: &LevyTriplet,
    targets: &[&TargetSet],
    start: &[f64],
    beta: f64,
    cfg: &PathConfig,
    plan: &McPlan,
    combos: &[Vec<f64>],
) -> Result<(Vec<McEstimate>, Vec<McEstimate>)> {
    cfg.validate()?;
    check_dim(triplet.dim(), start.len())?;
    if !(beta >= 0.0) {
        return Err(Error::arg("β must be nonnegative"));
    }
    combos.iter().try_for_each(|c| check_dim(targets.len(), c.len()))?;
    let k = targets.len();
    let est = estimate_many(plan, k + combos.len(), |rng, out| {
        let o = simulate_multi(triplet, start, targets, cfg, false, 1.0, rng);
        for (j, h) in o.hits.iter().enumerate() {
            out[j] = h.discount(beta);
        }
        for (i, c) in combos.iter().enumerate() {
            out[k + i] = c.iter().zip(&out[..k]).map(|(a, b)| a * b).sum();
        }
    })?;
    let bias = (-beta * cfg.horizon).exp();
    let mut est: Vec<McEstimate> = est.into_iter().map(|e| e.with_bias(bias)).collect();
    let extra = est
        .split_off(k)
        .into_iter()
        .zip(combos)
        .map(|(e, c)| e.with_bias(bias * c.iter().map(|x| x.abs()).sum::<f64>()))
        .collect();
    Ok((est, extra))
}

/// `R̂_β^M v(z) = E^z[e^{-βT_M} v(X_{T_M}); T_M < ∞]`.
pub fn reduced_function(
    triplet: &LevyTriplet,
    v: &dyn TestFunction,
    target: &TargetSet,
    beta: f64,
    z: &[f64],
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<McEstimate> {
    if beta == 0.0 {
        return Err(Error::Precondition("β = 0 requires a transience certificate".into()));
    }
    positive(beta, "β")?;
    cfg.validate()?;
    check_dim(triplet.dim(), z.len())?;
    let sup = bounded(v)?;
    let est = estimate_many(plan, 1, |rng, out| {
        let o = simulate_multi(triplet, z, &[target], cfg, false, 1.0, rng);
        let h = &o.hits[0];
        out[0] = if h.hit { h.discount(beta) * v.eval(&h.location) } else { 0.0 };
    })?;
    Ok(est[0].with_bias(sup * (-beta * cfg.horizon).exp()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionInequality {
    /// `R̂_β^M (v ∘ P_n)(z)`.
    pub full: McEstimate,
    /// `R̂_β^{P_n M} v (P_n z)`, on the same paths.
    pub projected: McEstimate,
    /// `projected - full`, paired.
    pub difference: McEstimate,
    pub verdict: Verdict,
}

/// `R̂_β^M(v ∘ P_n) ≤ (R̂_β^{P_n M} v) ∘ P_n` for `v` excessive for the
/// `n`-dimensional process. The projected process is the first `n`
/// coordinates of the full one, so both sides are evaluated on one path:
/// the right side hits the cylinder over `P_n M`, which contains `M`.
#[allow(clippy::too_many_arguments)]
pub fn projection_inequality_check(
    triplet: &LevyTriplet,
    v: &dyn TestFunction,
    target: &TargetSet,
    beta: f64,
    z: &[f64],
    n: usize,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<ProjectionInequality> {
    positive(beta, "β")?;
    cfg.validate()?;
    check_dim(triplet.dim(), z.len())?;
    let sup = bounded(v)?;
    match v.cylinder() {
        Some(m) if m <= n => {}
        _ => return Err(Error::arg(format!("{} must depend on the first {n} coordinates only", v.name()))),
    }
    let image = target.project_dims(n)?;
    let est = estimate_many(plan, 3, |rng, out| {
        let o = simulate_multi(triplet, z, &[target, &image], cfg, false, 1.0, rng);
        let val = |h: &HitRecord| if h.hit { h.discount(beta) * v.eval(&h.location) } else { 0.0 };
        out[0] = val(&o.hits[0]);
        out[1] = val(&o.hits[1]);
        out[2] = out[1] - out[0];
    })?;
    let bias = sup * (-beta * cfg.horizon).exp();
    let (full, projected, difference) = (est[0].with_bias(bias), est[1].with_bias(bias), est[2].with_bias(2.0 * bias));
    let verdict = difference.verdict_ge(0.0, 0.0);
    Ok(ProjectionInequality { full, projected, difference, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct PolarityRow {
    pub start: usize,
    pub radius: f64,
    pub estimate: McEstimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolarityReport {
    pub rows: Vec<PolarityRow>,
    /// Per start: intercept at `r = 0` of the least-squares line of the
    /// profile against `1/ln(1/r)`.
    pub intercepts: Vec<McEstimate>,
    /// Per start: drop of the profile from the largest to the smallest
    /// radius, paired.
    pub drops: Vec<McEstimate>,
    pub trend: Verdict,
    pub verdict: Verdict,
    pub note: &'static str,
}

/// Intercept allowance, as a fraction of the profile at the largest radius.
pub const INTERCEPT_FRACTION: f64 = 0.25;

const DIAGNOSTIC_NOTE: &str = "shrinking-target diagnostic; not a proof of polarity";

/// Hit profile `E[e^{-βT}; hit]` of `B_r(y)` for shrinking `r`, run on the
/// first `n` coordinates.
///
/// Planar Brownian motion has profile `≈ c/ln(1/r)`, so the line against
/// `u = 1/ln(1/r)` passes near the origin; a process that hits points keeps
/// a positive intercept.
#[allow(clippy::too_many_arguments)]
pub fn polarity_diagnostic_point(
    space: &SpaceModel,
    triplet: &LevyTriplet,
    y: &[f64],
    r_grid: &[f64],
    starts: &[Vec<f64>],
    n: usize,
    beta: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<PolarityReport> {
    if triplet.nondegenerate_coordinates() < 2 {
        return Err(Error::Hypothesis("point polarity needs at least two nondegenerate Gaussian coordinates".into()));
    }
    check_dim(space.dim(), triplet.dim())?;
    check_dim(space.dim(), y.len())?;
    if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::arg("radius grid needs at least two radii in (0, 1)"));
    }
    let proj = triplet.project(n)?;
    let sub = SpaceModel::explicit(space.weights()[..n].to_vec())?;
    let balls: Vec<TargetSet> =
        r_grid.iter().map(|&r| TargetSet::e_ball(&sub, y[..n].to_vec(), r)).collect::<Result<_>>()?;
    let refs: Vec<&TargetSet> = balls.iter().collect();
    let u: Vec<f64> = r_grid.iter().map(|r| 1.0 / (1.0 / r).ln()).collect();
    let ubar = u.iter().sum::<f64>() / u.len() as f64;
    let sxx: f64 = u.iter().map(|x| (x - ubar).powi(2)).sum();
    // intercept = Σ_i w_i p_i with least-squares weights
    let w: Vec<f64> = u.iter().map(|x| 1.0 / u.len() as f64 - ubar * (x - ubar) / sxx).collect();
    let imax = (0..r_grid.len()).max_by(|a, b| r_grid[*a].total_cmp(&r_grid[*b])).unwrap_or(0);
    let imin = (0..r_grid.len()).min_by(|a, b| r_grid[*a].total_cmp(&r_grid[*b])).unwrap_or(0);
    let mut drop = vec![0.0; r_grid.len()];
    drop[imax] += 1.0;
    drop[imin] -= 1.0;
    let mut rows = Vec::new();
    let mut intercepts = Vec::new();
    let mut drops = Vec::new();
    let mut trend = Verdict::Pass;
    let mut verdict = Verdict::Pass;
    for (i, s) in starts.iter().enumerate() {
        check_dim(space.dim(), s.len())?;
        let (est, extra) =
            hit_profile(&proj, &refs, &s[..n], beta, cfg, &plan.derive(i as u64), &[w.clone(), drop.clone()])?;
        let pmax = est[imax].mean;
        let (icpt, d) = (extra[0], extra[1]);
        let z = z_value(d.confidence);
        let t = if d.mean - z * d.stderr > 0.0 {
            Verdict::Pass
        } else if d.mean <= 0.0 {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        trend = trend.and(t);
        verdict = verdict.and(icpt.verdict_le(0.0, INTERCEPT_FRACTION * pmax));
        for (r, e) in r_grid.iter().zip(est) {
            rows.push(PolarityRow { start: i, radius: *r, estimate: e });
        }
        intercepts.push(icpt);
        drops.push(d);
    }
    Ok(PolarityReport { rows, intercepts, drops, trend, verdict: verdict.and(trend), note: DIAGNOSTIC_NOTE })
}

#[derive(Clone, Debug, Serialize)]
pub struct HPolarityReport {
    pub rows: Vec<PolarityRow>,
    pub trend: Verdict,
    /// `E|X_t|_H^2` against `|z + tb|^2 + t Σ var_k` (continuous triplets).
    pub structural: Vec<(McEstimate, f64, Verdict)>,
    pub verdict: Verdict,
    pub note: &'static str,
}

/// Hit profile of the truncated H-balls `{|z|_H ≤ ρ}` from starts with
/// large H-norm, plus the second-moment growth `E|X_t|_H^2 = |z|^2 + N t`
/// behind `ν_t(H) = 0`.
pub fn polarity_diagnostic_h(
    triplet: &LevyTriplet,
    rho_grid: &[f64],
    starts: &[Vec<f64>],
    t: f64,
    beta: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<HPolarityReport> {
    positive(t, "time")?;
    let dim = triplet.dim();
    let balls: Vec<TargetSet> =
        rho_grid.iter().map(|&r| TargetSet::h_ball(vec![0.0; dim], r)).collect::<Result<_>>()?;
    let refs: Vec<&TargetSet> = balls.iter().collect();
    let imax = (0..rho_grid.len()).max_by(|a, b| rho_grid[*a].total_cmp(&rho_grid[*b])).unwrap_or(0);
    let imin = (0..rho_grid.len()).min_by(|a, b| rho_grid[*a].total_cmp(&rho_grid[*b])).unwrap_or(0);
    let mut drop = vec![0.0; rho_grid.len()];
    if imax != imin {
        drop[imax] += 1.0;
        drop[imin] -= 1.0;
    }
    let mut rows = Vec::new();
    let mut trend = Verdict::Pass;
    let mut structural = Vec::new();
    for (i, s) in starts.iter().enumerate() {
        let (est, extra) = hit_profile(triplet, &refs, s, beta, cfg, &plan.derive(2 * i as u64), &[drop.clone()])?;
        trend = trend.and(extra[0].verdict_ge(0.0, 0.0));
        for (r, e) in rho_grid.iter().zip(est) {
            rows.push(PolarityRow { start: i, radius: *r, estimate: e });
        }
        if !triplet.has_jumps() {
            let m = estimate_many(&plan.derive(2 * i as u64 + 1), 1, |rng, out| {
                let mut w = s.clone();
                triplet.add_increment(&mut w, t, 1.0, rng);
                out[0] = w.iter().map(|x| x * x).sum();
            })?[0];
            let target: f64 = s.iter().zip(triplet.drift()).map(|(a, b)| (a + t * b).powi(2)).sum::<f64>()
                + t * triplet.variance().iter().sum::<f64>();
            structural.push((m, target, m.verdict(target, 0.0)));
        }
    }
    let verdict = Verdict::all(structural.iter().map(|s| s.2)).and(trend);
    Ok(HPolarityReport { rows, trend, structural, verdict, note: DIAGNOSTIC_NOTE })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantRow {
    pub start: usize,
    pub value: f64,
    pub estimate: McEstimate,
    pub verdict: Verdict,
}

/// `P_t 1_A(z) ≈ 1_A(z)` for a large set `A` at starts far from its
/// boundary; `atol` absorbs the leakage of the finite proxy.
pub fn invariant_set_check(
    triplet: &LevyTriplet,
    set: &TargetSet,
    starts: &[Vec<f64>],
    t: f64,
    atol: f64,
    plan: &McPlan,
) -> Result<(Vec<InvariantRow>, Verdict)> {
    let f = SetIndicator(set.clone());
    let mut rows = Vec::new();
    for (i, z) in starts.iter().enumerate() {
        let estimate = crate::operators::apply_pt(triplet, &f, t, z, &plan.derive(i as u64))?;
        let value = f.eval(z);
        rows.push(InvariantRow { start: i, value, estimate, verdict: estimate.verdict(value, atol) });
    }
    let v = Verdict::all(rows.iter().map(|r| r.verdict));
    Ok((rows, v))
}

/// The bounded potential `p` of a capacity.
#[derive(Clone)]
pub enum PotentialSpec {
    /// `f_0 ≡ 1`, `p ≡ 1/β`.
    Unit,
    /// `p = U_β f_0` estimated with `inner` draws per hitting location.
    Nested { f0: std::sync::Arc<dyn TestFunction>, inner: usize },
}

/// `c_λ(M_j) = λ(R_β^{M_j} p)` for a family of sets on shared paths, and
/// linear combinations of the family (for monotonicity and
/// subadditivity contrasts). Atoms are sampled independently with the
/// plan's sample count each.
#[allow(clippy::too_many_arguments)]
pub fn capacity_family(
    triplet: &LevyTriplet,
    lambda: &PointCloud,
    sets: &[&TargetSet],
    beta: f64,
    p: &PotentialSpec,
    cfg: &PathConfig,
    plan: &McPlan,
    combos: &[Vec<f64>],
) -> Result<(Vec<McEstimate>, Vec<McEstimate>)> {
    positive(beta, "β")?;
    cfg.validate()?;
    lambda.check(triplet.dim())?;
    combos.iter().try_for_each(|c| check_dim(sets.len(), c.len()))?;
    if let PotentialSpec::Nested { f0, inner } = p {
        let b = bounded(f0.as_ref())?;
        if b > 1.0 || *inner == 0 {
            return Err(Error::arg("f0 must satisfy 0 < f0 ≤ 1 and inner > 0"));
        }
    }
    let k = sets.len();
    let width = k + combos.len();
    let mut parts: Vec<Vec<McEstimate>> = vec![Vec::new(); width];
    for (i, (x, &m)) in lambda.points.iter().zip(&lambda.masses).enumerate() {
        if m == 0.0 {
            continue;
        }
        let est = estimate_many(&plan.derive(i as u64), width, |rng, out| {
            let o = simulate_multi(triplet, x, sets, cfg, false, 1.0, rng);
            for (j, h) in o.hits.iter().enumerate() {
                out[j] = if !h.hit {
                    0.0
                } else {
                    let pv = match p {
                        PotentialSpec::Unit => 1.0 / beta,
                        PotentialSpec::Nested { f0, inner } => {
                            let mut acc = 0.0;
                            for _ in 0..*inner {
                                let mut w = h.location.clone();
                                triplet.sample_at_exponential_time(beta, &mut w, rng);
                                acc += f0.eval(&w);
                            }
                            acc / (*inner as f64 * beta)
                        }
                    };
                    h.discount(beta) * pv
                };
            }
            for (c, coeffs) in combos.iter().enumerate() {
                out[k + c] = coeffs.iter().zip(&out[..k]).map(|(a, b)| a * b).sum();
            }
        })?;
        for (j, e) in est.into_iter().enumerate() {
            parts[j].push(e.scaled(m));
        }
    }
    let bias = lambda.total() / beta * (-beta * cfg.horizon).exp();
    let total = |v: &[McEstimate]| {
        if v.is_empty() {
            McEstimate::exact(0.0).with_confidence(plan.confidence)
        } else {
            McEstimate::sum_independent(v)
        }
    };
    let mut out: Vec<McEstimate> = parts.iter().map(|v| total(v).with_bias(bias)).collect();
    let extra = out.split_off(k);
    let extra = extra
        .into_iter()
        .zip(combos)
        .map(|(e, c)| e.with_bias(bias * c.iter().map(|x| x.abs()).sum::<f64>()))
        .collect();
    Ok((out, extra))
}

#[allow(clippy::too_many_arguments)]
pub fn capacity(
    triplet: &LevyTriplet,
    lambda: &PointCloud,
    target: &TargetSet,
    beta: f64,
    p: &PotentialSpec,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<McEstimate> {
    Ok(capacity_family(triplet, lambda, &[target], beta, p, cfg, plan, &[])?.0[0])
}

/// A finite measure, or the balayage `ν_M = ν R̂_β^M` of one.
#[derive(Clone, Debug)]
pub enum Measure {
    Cloud(PointCloud),
    Swept { nu: PointCloud, target: TargetSet },
}

impl Measure {
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Measure::Cloud(p) => Measure::Cloud(p.scaled(c)),
            Measure::Swept { nu, target } => Measure::Swept { nu: nu.scaled(c), target: target.clone() },
        }
    }
}

/// `μ U_β(1_F)` for each `F`, on shared paths per atom.
///
/// For a swept measure the exponential time `T'` is drawn first and the
/// path is run to `T'`: by the strong Markov property and memorylessness,
/// `1{T_M ≤ T'} 1_F(X_{T'}) / β` is an unbiased draw of
/// `E[e^{-βT_M} U_β 1_F(X_{T_M})]`.
pub fn cloud_potential(
    triplet: &LevyTriplet,
    mu: &Measure,
    fs: &[&TargetSet],
    beta: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<Vec<McEstimate>> {
    Ok(swept_pair(triplet, mu, fs, beta, cfg, plan)?.0)
}

/// Estimates of `ν_M U_β 1_F`, `ν U_β 1_F` and their paired difference for
/// a swept measure; for a plain cloud both sides coincide.
#[allow(clippy::type_complexity)]
fn swept_pair(
    triplet: &LevyTriplet,
    mu: &Measure,
    fs: &[&TargetSet],
    beta: f64,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<(Vec<McEstimate>, Vec<McEstimate>, Vec<McEstimate>, bool, f64)> {
    positive(beta, "β")?;
    cfg.validate()?;
    let (cloud, target) = match mu {
        Measure::Cloud(c) => (c, None),
        Measure::Swept { nu, target } => (nu, Some(target)),
    };
    cloud.check(triplet.dim())?;
    let k = fs.len();
    let mut lhs = vec![Vec::new(); k];
    let mut rhs = vec![Vec::new(); k];
    let mut diff = vec![Vec::new(); k];
    let mut any_hit = target.is_none();
    let mut worst = f64::NEG_INFINITY;
    for (i, (x, &m)) in cloud.points.iter().zip(&cloud.masses).enumerate() {
        if m == 0.0 {
            continue;
        }
        let flags = std::sync::Mutex::new((false, f64::NEG_INFINITY));
        let est = estimate_many(&plan.derive(i as u64), 3 * k + 1, |rng, out| {
            let tp = exponential_time(beta, rng);
            let c = PathConfig { horizon: tp.max(f64::MIN_POSITIVE), dt: cfg.dt.min(tp).max(f64::MIN_POSITIVE), ..*cfg };
            let c = PathConfig { min_dt: c.min_dt.min(c.dt), ..c };
            let (hit, end, lvl) = match target {
                None => {
                    let mut w = x.clone();
                    triplet.add_increment(&mut w, tp, 1.0, rng);
                    (true, w, f64::NEG_INFINITY)
                }
                Some(t) => {
                    let o = simulate_multi(triplet, x, &[t], &c, true, 1.0, rng);
                    let h = &o.hits[0];
                    let lvl = if h.hit { t.level(&h.location) } else { f64::NEG_INFINITY };
                    (h.hit, o.end, lvl)
                }
            };
            for (j, f) in fs.iter().enumerate() {
                let r = if f.contains(&end) { 1.0 / beta } else { 0.0 };
                let l = if hit { r } else { 0.0 };
                out[j] = l;
                out[k + j] = r;
                out[2 * k + j] = l - r;
            }
            out[3 * k] = f64::from(u8::from(hit));
            if hit {
                let mut g = flags.lock().expect("flags");
                g.0 = true;
                g.1 = g.1.max(lvl);
            }
        })?;
        let g = flags.into_inner().expect("flags");
        any_hit |= g.0;
        worst = worst.max(g.1);
        for j in 0..k {
            lhs[j].push(est[j].scaled(m));
            rhs[j].push(est[k + j].scaled(m));
            diff[j].push(est[2 * k + j].scaled(m));
        }
    }
    let total = |v: &[McEstimate]| {
        if v.is_empty() {
            McEstimate::exact(0.0).with_confidence(plan.confidence)
        } else {
            McEstimate::sum_independent(v)
        }
    };
    Ok((
        lhs.iter().map(|v| total(v)).collect(),
        rhs.iter().map(|v| total(v)).collect(),
        diff.iter().map(|v| total(v)).collect(),
        any_hit,
        worst,
    ))
}

/// Hitting locations of `M` drawn from each atom of `ν`, weighted by
/// `ν_i e^{-βT_M} / draws`: an empirical version of `ν_M`.
pub fn balayage_cloud(
    triplet: &LevyTriplet,
    nu: &PointCloud,
    target: &TargetSet,
    beta: f64,
    draws: usize,
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<PointCloud> {
    positive(beta, "β")?;
    cfg.validate()?;
    nu.check(triplet.dim())?;
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for (i, (x, &m)) in nu.points.iter().zip(&nu.masses).enumerate() {
        let mut rng = plan.key.derive(i as u64).stream();
        for _ in 0..draws {
            let o = simulate_multi(triplet, x, &[target], cfg, false, 1.0, &mut rng);
            let h = &o.hits[0];
            if h.hit {
                masses.push(m * h.discount(beta) / draws as f64);
                points.push(h.location.clone());
            }
        }
    }
    PointCloud::new(points, masses)
}

#[derive(Clone, Debug, Serialize)]
pub struct BalayageRow {
    pub index: usize,
    pub inside: bool,
    pub swept: McEstimate,
    pub original: McEstimate,
    pub difference: McEstimate,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalayageReport {
    pub rows: Vec<BalayageRow>,
    /// Largest level of a hitting location; `≤ collar` means every sample
    /// of `ν_M` sits in `M` or its collar.
    pub carrier_level: f64,
    pub carrier: Verdict,
    /// No atom reached `M`: the comparison is vacuous.
    pub degenerate: bool,
    pub verdict: Verdict,
}

/// `ν_M U_β(1_F) = ν U_β(1_F)` for `F ⊆ M` and `≤` for other `F`, with both
/// sides on common random numbers. `fs` pairs each test set with whether
/// it lies inside `M`.
pub fn balayage_check(
    triplet: &LevyTriplet,
    nu: &PointCloud,
    target: &TargetSet,
    beta: f64,
    fs: &[(TargetSet, bool)],
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<BalayageReport> {
    let refs: Vec<&TargetSet> = fs.iter().map(|f| &f.0).collect();
    let swept = Measure::Swept { nu: nu.clone(), target: target.clone() };
    let (lhs, rhs, diff, any_hit, worst) = swept_pair(triplet, &swept, &refs, beta, cfg, plan)?;
    let mut rows = Vec::new();
    for (j, (_, inside)) in fs.iter().enumerate() {
        let d = diff[j];
        let verdict = if *inside {
            d.verdict(0.0, 0.0)
        } else {
            // per-sample `≤` makes every difference draw nonpositive
            Verdict::from_bool(d.mean <= 0.0).and(d.verdict_le(0.0, 0.0))
        };
        rows.push(BalayageRow { index: j, inside: *inside, swept: lhs[j], original: rhs[j], difference: d, verdict });
    }
    let collar = target.spread(triplet.variance()) * cfg.min_dt.sqrt() * cfg.safety + 1e-9;
    let carrier = Verdict::from_bool(worst <= collar);
    let degenerate = !any_hit;
    let verdict = if degenerate { Verdict::Pass } else { Verdict::all(rows.iter().map(|r| r.verdict)).and(carrier) };
    Ok(BalayageReport { rows, carrier_level: worst, carrier, degenerate, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationRow {
    pub probe: usize,
    pub in_g: bool,
    pub mu: McEstimate,
    pub nu: McEstimate,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub hypothesis: Verdict,
    /// `None` when the hypothesis gate failed.
    pub conclusion: Option<Verdict>,
    pub rows: Vec<DominationRow>,
    pub verdict: Verdict,
}

/// If `μ U_β ≤ ν U_β` on probe sets inside `G` (where `μ` lives), then
/// `μ U_β ≤ ν U_β` on probes outside `G`. The two sides use independent
/// streams.
#[allow(clippy::too_many_arguments)]
pub fn domination_check(
    triplet: &LevyTriplet,
    mu: &Measure,
    nu: &Measure,
    beta: f64,
    probes_in: &[TargetSet],
    probes_out: &[TargetSet],
    cfg: &PathConfig,
    plan: &McPlan,
) -> Result<DominationReport> {
    let probes: Vec<&TargetSet> = probes_in.iter().chain(probes_out).collect();
    let m = cloud_potential(triplet, mu, &probes, beta, cfg, &plan.derive(1))?;
    let n = cloud_potential(triplet, nu, &probes, beta, cfg, &plan.derive(2))?;
    let mut rows = Vec::new();
    for (j, (a, b)) in m.iter().zip(&n).enumerate() {
        let verdict = a.minus_independent(b).verdict_le(0.0, 0.0);
        rows.push(DominationRow { probe: j, in_g: j < probes_in.len(), mu: *a, nu: *b, verdict });
    }
    let hypothesis = Verdict::all(rows.iter().filter(|r| r.in_g).map(|r| r.verdict));
    let conclusion =
        (hypothesis == Verdict::Pass).then(|| Verdict::all(rows.iter().filter(|r| !r.in_g).map(|r| r.verdict)));
    let verdict = conclusion.unwrap_or(hypothesis);
    Ok(DominationReport { hypothesis, conclusion, rows, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub estimate: McEstimate,
    pub target: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Paired differences between consecutive `n` are positive.
    pub decreasing: Verdict,
    pub verdict: Verdict,
}

/// `E||Z_t - P_n Z_t||_E^2` across `n_grid` on shared draws; for a
/// continuous triplet the target is `Σ_{k>n} λ_k (t var_k + t^2 b_k^2)`.
pub fn projection_convergence(
    space: &SpaceModel,
    triplet: &LevyTriplet,
    t: f64,
    n_grid: &[usize],
    plan: &McPlan,
) -> Result<TailReport> {
    positive(t, "time")?;
    check_dim(space.dim(), triplet.dim())?;
    let dim = space.dim();
    if n_grid.iter().any(|n| *n > dim) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("n grid must be increasing within 0..=N"));
    }
    let lam = space.weights();
    let k = n_grid.len();
    let width = k + k.saturating_sub(1);
    let est = estimate_many(plan, width, |rng, out| {
        let z = triplet.sample_increment(t, rng);
        for (j, &n) in n_grid.iter().enumerate() {
            out[j] = lam[n..].iter().zip(&z[n..]).map(|(l, x)| l * x * x).sum();
        }
        for j in 0..k.saturating_sub(1) {
            out[k + j] = out[j] - out[j + 1];
        }
    })?;
    let mut rows = Vec::new();
    for (j, &n) in n_grid.iter().enumerate() {
        let target = (!triplet.has_jumps()).then(|| {
            (n..dim).map(|i| lam[i] * (t * triplet.variance()[i] + (t * triplet.drift()[i]).powi(2))).sum::<f64>()
        });
        let e = est[j];
        let verdict = match target {
            Some(x) if n == dim => Verdict::from_bool(e.mean == x),
            Some(x) => e.verdict(x, 0.0),
            None => Verdict::Pass,
        };
        rows.push(TailRow { n, estimate: e, target, verdict });
    }
    let decreasing = Verdict::all(est[k..].iter().enumerate().map(|(j, d)| {
        if n_grid[j + 1] == dim && d.mean > 0.0 {
            return Verdict::Pass;
        }
        let z = z_value(d.confidence);
        if d.mean - z * d.stderr > 0.0 {
            Verdict::Pass
        } else if d.mean <= 0.0 {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }));
    let verdict = Verdict::all(rows.iter().map(|r| r.verdict)).and(decreasing);
    Ok(TailReport { rows, decreasing, verdict })
}

#[cfg(test)]
mod tests;
