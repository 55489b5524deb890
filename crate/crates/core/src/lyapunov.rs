//! Compact Lyapunov norms `q_x` and the resolvent `v_0 = U_1 q_x^2`.
//!
//! Both kinds have the shape `q^2(z) = Σ_k w_k c_k^2 + g(z)^2` with
//! `g(z) = Σ_n 2^{-n/2} |<e_n^x, z>|`. The Gaussian kind takes
//! `w_k = 2^{n(k)} λ_k`, where `n(k)` counts the selected levels below `k`;
//! the Lévy kind takes `w_k = α_k λ_k`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::LevyTriplet;
use crate::rng::Stream;
use crate::space::{CarmonaDatum, SpaceModel, WeightSpec, XSpec};
use crate::stats::{estimate, estimate_checked, estimate_many, McEstimate, McPlan, Verdict};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Gaussian,
    #[default]
    Levy,
}

/// Minimal levels `m_1 < m_2 < ...` with `sqrt(λ_{m_n+1}) ≤ 2^{-n}` and
/// `Σ_{k>m_n} λ_k ≤ 8^{-n}`.
///
/// With `depth = None` every level that fits below the truncation is
/// returned; an explicit depth that does not fit is a range error.
pub fn select_subsequence(model: &SpaceModel, depth: Option<usize>) -> Result<Vec<usize>> {
    let dim = model.dim();
    let mut levels: Vec<usize> = Vec::new();
    let mut n = 1;
    loop {
        if let Some(j) = depth {
            if n > j {
                break;
            }
        }
        let lower = levels.last().map_or(0, |m| m + 1);
        let bound_op = 2f64.powi(-(n as i32));
        let bound_tail = 8f64.powi(-(n as i32));
        let found = (lower.max(1)..=dim)
            .find(|&m| model.weight(m + 1).sqrt() <= bound_op && model.tail(m) <= bound_tail);
        match found {
            Some(m) => levels.push(m),
            None => {
                if depth.is_some() {
                    return Err(Error::Range(format!(
                        "level {n} of the subsequence does not fit in truncation N = {dim}"
                    )));
                }
                break;
            }
        }
        n += 1;
    }
    if levels.is_empty() {
        return Err(Error::Range(format!("truncation N = {dim} admits no certified level")));
    }
    Ok(levels)
}

/// Coefficients `α_n` for the Lévy kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Named(String),
    Explicit(Vec<f64>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Named("2^n".into())
    }
}

type Generator = (fn(usize) -> f64, fn(usize) -> f64);

/// `(α_n, ln α_n)` for a named generator.
fn named_alpha(name: &str) -> Result<Generator> {
    match name {
        "2^n" => Ok((|n| 2f64.powi(n as i32), |n| n as f64 * 2f64.ln())),
        "sqrt(n)" => Ok((|n| (n as f64).sqrt(), |n| 0.5 * (n as f64).ln())),
        "n" => Ok((|n| n as f64, |n| (n as f64).ln())),
        other => Err(Error::arg(format!("unknown coefficient generator '{other}'"))),
    }
}

/// Cauchy condensation at a large index, in logs: `Σ a_n` converges when
/// `a_{2M}/a_M < 1/2` for a regularly varying or geometric term.
fn summable(ln_term: impl Fn(usize) -> f64) -> bool {
    const M: usize = 1 << 12;
    ln_term(2 * M) - ln_term(M) < 0.45f64.ln()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    #[serde(default = "default_kind")]
    pub kind: NormKind,
    #[serde(default)]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, rename = "J")]
    pub depth: Option<usize>,
}

fn default_kind() -> NormKind {
    NormKind::Levy
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovNorm {
    pub kind: NormKind,
    pub carmona: CarmonaDatum,
    /// Gaussian kind: `m_1..m_J` followed by `N`.
    pub levels: Vec<usize>,
    /// Lévy kind: `α_1..α_N`.
    pub alpha: Vec<f64>,
    weights: Vec<f64>,
    g_coeffs: Vec<f64>,
}

impl LyapunovNorm {
    pub fn build(model: &SpaceModel, carmona: CarmonaDatum, spec: &LyapunovSpec) -> Result<Self> {
        match spec.kind {
            NormKind::Gaussian => Self::gaussian(model, carmona, spec.depth),
            NormKind::Levy => Self::levy(model, carmona, spec.alpha.as_ref().unwrap_or(&AlphaSpec::default())),
        }
    }

    pub fn gaussian(model: &SpaceModel, carmona: CarmonaDatum, depth: Option<usize>) -> Result<Self> {
        check_dim(model.dim(), carmona.x.len())?;
        let mut levels = select_subsequence(model, depth)?;
        if *levels.last().expect("nonempty") < model.dim() {
            levels.push(model.dim());
        }
        let mut weights = Vec::with_capacity(model.dim());
        let mut n = 0;
        for k in 1..=model.dim() {
            while k > levels[n] {
                n += 1;
            }
            weights.push(2f64.powi(n as i32) * model.weight(k));
        }
        Ok(Self::assemble(NormKind::Gaussian, carmona, levels, Vec::new(), weights))
    }

    pub fn levy(model: &SpaceModel, carmona: CarmonaDatum, alpha: &AlphaSpec) -> Result<Self> {
        check_dim(model.dim(), carmona.x.len())?;
        let alpha: Vec<f64> = match alpha {
            AlphaSpec::Named(name) => {
                let (alpha, ln_alpha) = named_alpha(name)?;
                if model.ln_weight(1).is_some() {
                    let ok = summable(|n| ln_alpha(n) + model.ln_weight(n).expect("named generator"));
                    if !ok {
                        return Err(Error::arg(format!("Σ α_n λ_n diverges for α = {name} with these weights")));
                    }
                }
                (1..=model.dim()).map(alpha).collect()
            }
            AlphaSpec::Explicit(a) => {
                check_dim(model.dim(), a.len())?;
                a.clone()
            }
        };
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::arg("coefficients α_n must be positive"));
        }
        if alpha.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::arg("coefficients α_n must be nondecreasing"));
        }
        let weights = alpha.iter().zip(model.weights()).map(|(a, l)| a * l).collect();
        Ok(Self::assemble(NormKind::Levy, carmona, Vec::new(), alpha, weights))
    }

    fn assemble(kind: NormKind, carmona: CarmonaDatum, levels: Vec<usize>, alpha: Vec<f64>, weights: Vec<f64>) -> Self {
        let g_coeffs = (1..=carmona.len()).map(|n| 2f64.powf(-(n as f64) / 2.0)).collect();
        Self { kind, carmona, levels, alpha, weights, g_coeffs }
    }

    /// Defaults: canonical point, `λ_n = 4^{-n}`.
    pub fn canonical(model: &SpaceModel, kind: NormKind) -> Result<Self> {
        let spec = LyapunovSpec { kind, ..Default::default() };
        Self::build(model, CarmonaDatum::canonical(model), &spec)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Diagonal weights `w_k`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `g(z) = Σ_n 2^{-n/2} |<e_n^x, z>|`.
    pub fn carmona_sum(&self, z: &[f64]) -> f64 {
        self.carmona.basis.iter().zip(&self.g_coeffs).map(|(b, a)| a * b.pair(z).abs()).sum()
    }

    pub fn q_sq(&self, z: &[f64]) -> f64 {
        let diag: f64 = self.weights.iter().zip(z).map(|(w, c)| w * c * c).sum();
        let g = self.carmona_sum(z);
        diag + g * g
    }

    pub fn q(&self, z: &[f64]) -> f64 {
        self.q_sq(z).sqrt()
    }

    /// Checked evaluation.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok(self.q(z))
    }

    /// Gradient of `q` (a subgradient where a pairing vanishes).
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let q = self.q(z);
        let mut grad = vec![0.0; z.len()];
        if q == 0.0 {
            return grad;
        }
        let g = self.carmona_sum(z);
        for (k, (w, c)) in self.weights.iter().zip(z).enumerate() {
            grad[k] = w * c;
        }
        for (b, a) in self.carmona.basis.iter().zip(&self.g_coeffs) {
            let s = b.pair(z).signum();
            for (i, c) in b.coeffs.iter().enumerate() {
                grad[b.start + i] += g * a * s * c;
            }
        }
        grad.iter_mut().for_each(|x| *x /= q);
        grad
    }

    /// `E q^2(G)` for a centered Gaussian with the given diagonal variance.
    pub fn gaussian_second_moment(&self, variance: &[f64]) -> f64 {
        let diag: f64 = self.weights.iter().zip(variance).map(|(w, v)| w * v).sum();
        // pairings with disjoint blocks are independent normals
        let s: Vec<f64> = self
            .carmona
            .basis
            .iter()
            .zip(&self.g_coeffs)
            .map(|(b, a)| a * b.coeffs.iter().enumerate().map(|(i, c)| c * c * variance[b.start + i]).sum::<f64>().sqrt())
            .collect();
        let sum: f64 = s.iter().sum();
        let sq: f64 = s.iter().map(|x| x * x).sum();
        diag + (1.0 - 2.0 / PI) * sq + (2.0 / PI) * sum * sum
    }

    /// `M = ∫ q^2 dμ` for the unit Gaussian at time 1.
    pub fn unit_gaussian_mass(&self) -> f64 {
        self.gaussian_second_moment(&vec![1.0; self.dim()])
    }

    /// `Σ_k w_k`.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(Σ_n 2^{-n/2})^2` over the basis.
    pub fn carmona_constant(&self) -> f64 {
        self.g_coeffs.iter().sum::<f64>().powi(2)
    }

    /// Constant `c` with `||z||_E ≤ c q(z)` on the whole space.
    pub fn e_norm_constant(&self) -> f64 {
        match self.kind {
            NormKind::Gaussian => 2f64.sqrt(),
            NormKind::Levy => 1.0,
        }
    }

    /// Restriction to the first `n` coordinates. Requires every basis block
    /// to sit on one side of `n`.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.dim() {
            return Err(Error::arg(format!("truncation {n} outside 1..={}", self.dim())));
        }
        if !self.carmona.aligned_with(n) {
            return Err(Error::arg(format!("a basis block straddles coordinate {n}")));
        }
        let basis: Vec<_> = self.carmona.basis.iter().filter(|b| b.end() <= n).cloned().collect();
        let k = basis.len();
        let carmona = CarmonaDatum { x: self.carmona.x[..n].to_vec(), basis, growth: self.carmona.growth[..k].to_vec() };
        let mut levels: Vec<usize> = self.levels.iter().copied().filter(|m| *m < n).collect();
        if self.kind == NormKind::Gaussian {
            levels.push(n);
        }
        let alpha = if self.alpha.is_empty() { Vec::new() } else { self.alpha[..n].to_vec() };
        Ok(Self {
            kind: self.kind,
            carmona,
            levels,
            alpha,
            weights: self.weights[..n].to_vec(),
            g_coeffs: self.g_coeffs[..k].to_vec(),
        })
    }

    /// Gaussian-kind certificates, one flag per level.
    pub fn certificates(&self, model: &SpaceModel) -> Vec<bool> {
        let j = self.levels.len().saturating_sub(1);
        self.levels[..j]
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let n = (i + 1) as i32;
                model.weight(m + 1).sqrt() <= 2f64.powi(-n) && model.tail(m) <= 8f64.powi(-n)
            })
            .collect()
    }
}

fn shifted_q_sq(norm: &LyapunovNorm, z: &[f64], w: &mut [f64]) -> f64 {
    w.iter_mut().zip(z).for_each(|(a, b)| *a += b);
    norm.q_sq(w)
}

/// `v_0(z) = E q^2(z + Z_T)` with `T ~ Exp(1)`.
pub fn v0_estimate(norm: &LyapunovNorm, triplet: &LevyTriplet, z: &[f64], plan: &McPlan) -> Result<McEstimate> {
    check_dim(norm.dim(), z.len())?;
    check_dim(norm.dim(), triplet.dim())?;
    let (est, ratio) = estimate_checked(plan, |rng| {
        let mut w = vec![0.0; z.len()];
        triplet.sample_at_exponential_time(1.0, &mut w, rng);
        shifted_q_sq(norm, z, &mut w)
    })?;
    if !est.mean.is_finite() || ratio > 1.0 {
        return Err(Error::Integrability(format!(
            "v0 estimate not stabilizing (stderr ratio {ratio:.3}); check the second-moment hypothesis"
        )));
    }
    Ok(est)
}

/// Estimator of `v_{z}` at `y`: `v_0(y - z)`, run through the same stream.
pub fn v_shifted_estimate(
    norm: &LyapunovNorm,
    triplet: &LevyTriplet,
    shift: &[f64],
    y: &[f64],
    plan: &McPlan,
) -> Result<McEstimate> {
    check_dim(y.len(), shift.len())?;
    let w: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a - b).collect();
    v0_estimate(norm, triplet, &w, plan)
}

/// `M̂ = E q^2(G)` with `G` the unit Gaussian at time 1.
pub fn gaussian_mass_estimate(norm: &LyapunovNorm, plan: &McPlan) -> Result<McEstimate> {
    let tr = LevyTriplet::brownian(norm.dim());
    estimate(plan, |rng| {
        let z = tr.sample_increment(1.0, rng);
        norm.q_sq(&z)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentBound {
    /// Largest `F(t)/(1+t^2)` on the grid.
    pub c_tilde: f64,
    /// `(t, F(t))` with `F(t) = Σ w_k E c_k^2 + (Σ 2^{-n/2} sqrt(E<e_n^x,Z>^2))^2`.
    pub profile: Vec<(f64, f64)>,
}

pub fn default_moment_grid() -> Vec<f64> {
    (0..13).map(|i| 0.05 * 2f64.powf(i as f64 * 0.5)).collect()
}

/// Moment bound `∫ q^2 dν_t ≤ C̃ (1 + t^2)` estimated through the
/// per-coordinate second moments.
pub fn moment_bound(norm: &LyapunovNorm, triplet: &LevyTriplet, t_grid: &[f64], plan: &McPlan) -> Result<MomentBound> {
    check_dim(norm.dim(), triplet.dim())?;
    if t_grid.is_empty() {
        return Err(Error::arg("time grid must be nonempty"));
    }
    let dim = norm.dim();
    let k = dim + norm.carmona.len();
    let mut profile = Vec::new();
    let mut c_tilde: f64 = 0.0;
    for (i, &t) in t_grid.iter().enumerate() {
        let ests = estimate_many(&plan.derive(i as u64), k, |rng: &mut Stream, out| {
            let z = triplet.sample_increment(t, rng);
            for (o, c) in out[..dim].iter_mut().zip(&z) {
                *o = c * c;
            }
            for (o, b) in out[dim..].iter_mut().zip(&norm.carmona.basis) {
                *o = b.pair(&z).powi(2);
            }
        })?;
        let diag: f64 = norm.weights().iter().zip(&ests[..dim]).map(|(w, e)| w * e.mean).sum();
        let g: f64 = norm.g_coeffs.iter().zip(&ests[dim..]).map(|(a, e)| a * e.mean.max(0.0).sqrt()).sum();
        let f = diag + g * g;
        profile.push((t, f));
        c_tilde = c_tilde.max(f / (1.0 + t * t));
    }
    Ok(MomentBound { c_tilde, profile })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupermedianRow {
    pub q_sq: f64,
    pub estimate: McEstimate,
    pub verdict: Verdict,
}

/// `E q^2(z + Z_t) ≥ q^2(z)` for the unit Gaussian, with antithetic pairs.
pub fn supermedian_check(
    norm: &LyapunovNorm,
    triplet: &LevyTriplet,
    t: f64,
    zs: &[Vec<f64>],
    plan: &McPlan,
) -> Result<Vec<SupermedianRow>> {
    if !triplet.is_unit_gaussian() {
        return Err(Error::Precondition(
            "the supermedian inequality is established only for the driftless unit Gaussian".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::arg("time must be positive"));
    }
    zs.iter()
        .enumerate()
        .map(|(i, z)| {
            check_dim(norm.dim(), z.len())?;
            let q2 = norm.q_sq(z);
            let est = estimate(&plan.derive(i as u64), |rng| {
                let g = triplet.sample_increment(t, rng);
                let plus: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - b).collect();
                0.5 * (norm.q_sq(&plus) + norm.q_sq(&minus))
            })?;
            let verdict = est.verdict_ge(q2, 1e-9 * (1.0 + q2));
            Ok(SupermedianRow { q_sq: q2, estimate: est, verdict })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    InEx,
    NotInEx,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub values: Vec<(usize, f64)>,
    pub verdict: Membership,
}

/// Growth factor of `q` per doubling of the truncation that declares
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 1.5;
/// Relative change over the last step below which `q` counts as bounded.
pub const BOUNDED_TOLERANCE: f64 = 0.01;

/// Evaluates `q_x(z)` at increasing truncations for a coordinate formula.
pub fn membership_ex(
    spec: &LyapunovSpec,
    weights: &WeightSpec,
    x: &XSpec,
    z: impl Fn(usize) -> f64,
    n_grid: &[usize],
) -> Result<MembershipReport> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("truncation grid must be strictly increasing with at least two entries"));
    }
    let mut values = Vec::new();
    for &n in n_grid {
        let model = SpaceModel::new(n, weights)?;
        let carmona = CarmonaDatum::build(&model, x)?;
        let norm = LyapunovNorm::build(&model, carmona, spec)?;
        let v: Vec<f64> = (1..=n).map(&z).collect();
        values.push((n, norm.q(&v)));
    }
    let factors: Vec<f64> = values
        .windows(2)
        .map(|w| {
            let doublings = (w[1].0 as f64 / w[0].0 as f64).log2();
            if w[0].1 == 0.0 {
                if w[1].1 == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                (w[1].1 / w[0].1).powf(1.0 / doublings)
            }
        })
        .collect();
    let (a, b) = (values[values.len() - 2].1, values[values.len() - 1].1);
    let verdict = if factors.iter().all(|f| *f >= DIVERGENCE_FACTOR) {
        Membership::NotInEx
    } else if (b - a).abs() <= BOUNDED_TOLERANCE * a.abs().max(b.abs()) {
        Membership::InEx
    } else {
        Membership::Inconclusive
    };
    Ok(MembershipReport { values, verdict })
}
