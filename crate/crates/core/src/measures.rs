//! Increment laws `ν_t`: drift, diagonal Gaussian part and finite-intensity
//! compound Poisson jumps.
//!
//! The drift stored in a triplet is the effective drift of the sampled
//! process; small jumps and the compensator are folded into it. The
//! Lévy-Khintchine drift is recovered by [`LevyTriplet::lk_drift`].

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::Stream;
use crate::space::{dot, SpaceModel};
use crate::stats::{estimate, estimate_many, McEstimate, McPlan, Verdict};

#[derive(Clone, Debug, PartialEq)]
pub enum JumpKind {
    /// Finite mixture of fixed jump vectors; `probs` sum to one.
    PointMass { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
    /// `δ_U` with `U` uniform on (0,1), embedded via `e_n(u) = √2 sin(nπu)`.
    Poisson01,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpMeasure {
    pub intensity: f64,
    pub kind: JumpKind,
}

impl JumpMeasure {
    pub fn point_mass(intensity: f64, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::arg("jump intensity must be positive and finite"));
        }
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::arg("point-mass jumps need one positive weight per atom"));
        }
        let dim = atoms[0].len();
        for a in &atoms {
            check_dim(dim, a.len())?;
            if a.iter().all(|c| *c == 0.0) {
                return Err(Error::arg("zero jump: the jump measure must not charge the origin"));
            }
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::arg("atom weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(Self { intensity, kind: JumpKind::PointMass { atoms, probs } })
    }

    pub fn poisson01(intensity: f64) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::arg("jump intensity must be positive and finite"));
        }
        Ok(Self { intensity, kind: JumpKind::Poisson01 })
    }

    fn dim_hint(&self) -> Option<usize> {
        match &self.kind {
            JumpKind::PointMass { atoms, .. } => Some(atoms[0].len()),
            JumpKind::Poisson01 => None,
        }
    }

    /// Adds `sign * J` for one jump `J`.
    pub fn add_jump(&self, z: &mut [f64], sign: f64, rng: &mut Stream) {
        match &self.kind {
            JumpKind::PointMass { atoms, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                for (c, a) in z.iter_mut().zip(&atoms[idx]) {
                    *c += sign * a;
                }
            }
            JumpKind::Poisson01 => {
                let u: f64 = rng.random();
                for (k, c) in z.iter_mut().enumerate() {
                    *c += sign * SQRT_2 * ((k + 1) as f64 * PI * u).sin();
                }
            }
        }
    }

    fn project(&self, n: usize) -> Option<JumpMeasure> {
        match &self.kind {
            JumpKind::PointMass { atoms, probs } => {
                // atoms vanishing after projection are dropped; their mass is lost
                let kept: Vec<(Vec<f64>, f64)> = atoms
                    .iter()
                    .zip(probs)
                    .map(|(a, p)| (a[..n].to_vec(), *p))
                    .filter(|(a, _)| a.iter().any(|c| *c != 0.0))
                    .collect();
                if kept.is_empty() {
                    return None;
                }
                let mass: f64 = kept.iter().map(|(_, p)| p).sum();
                let (atoms, weights): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
                JumpMeasure::point_mass(self.intensity * mass, atoms, weights).ok()
            }
            JumpKind::Poisson01 => Some(self.clone()),
        }
    }

    /// `(∫<ξ,z> M(dz), ∫<ξ,z>^2 M(dz))` from closed forms.
    pub fn pairing_moments(&self, xi: &[f64]) -> (f64, f64) {
        match &self.kind {
            JumpKind::PointMass { atoms, probs } => {
                let mut m1 = 0.0;
                let mut m2 = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    let s = dot(xi, a);
                    m1 += p * s;
                    m2 += p * s * s;
                }
                (self.intensity * m1, self.intensity * m2)
            }
            JumpKind::Poisson01 => (self.intensity * sine_integral(xi), self.intensity * dot(xi, xi)),
        }
    }
}

/// `∫_0^1 Σ ξ_k √2 sin(kπu) du`.
pub fn sine_integral(xi: &[f64]) -> f64 {
    xi.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, x)| x * 2.0 * SQRT_2 / ((k + 1) as f64 * PI))
        .sum()
}

/// `t ∫ξ^2 dσ + t^2 (∫ξ dσ)^2` for the unit-intensity Poisson functional.
pub fn poisson_example_target(xi: &[f64], t: f64) -> f64 {
    let a = sine_integral(xi);
    t * dot(xi, xi) + t * t * a * a
}

/// Drift, diagonal Gaussian variance (per pairing coordinate and unit time)
/// and jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyTriplet {
    drift: Vec<f64>,
    variance: Vec<f64>,
    stddev: Vec<f64>,
    jumps: Option<JumpMeasure>,
}

impl LevyTriplet {
    pub fn new(drift: Vec<f64>, variance: Vec<f64>, jumps: Option<JumpMeasure>) -> Result<Self> {
        check_dim(drift.len(), variance.len())?;
        if drift.is_empty() {
            return Err(Error::arg("triplet dimension must be positive"));
        }
        if drift.iter().any(|b| !b.is_finite()) {
            return Err(Error::arg("drift must be finite"));
        }
        if variance.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::arg("Gaussian variances must be finite and nonnegative"));
        }
        if let Some(d) = jumps.as_ref().and_then(JumpMeasure::dim_hint) {
            check_dim(drift.len(), d)?;
        }
        let stddev = variance.iter().map(|v| v.sqrt()).collect();
        Ok(Self { drift, variance, stddev, jumps })
    }

    /// Unit cylinder Gaussian on H: pairing coordinates iid `N(0, t)`.
    pub fn brownian(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim], None).expect("valid")
    }

    pub fn pure_drift(drift: Vec<f64>) -> Result<Self> {
        let d = drift.len();
        Self::new(drift, vec![0.0; d], None)
    }

    /// Poisson random measure of intensity `t·Leb` on (0,1).
    pub fn poisson_example(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![0.0; dim], Some(JumpMeasure::poisson01(1.0).expect("valid")))
            .expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn stddev(&self) -> &[f64] {
        &self.stddev
    }

    pub fn jumps(&self) -> Option<&JumpMeasure> {
        self.jumps.as_ref()
    }

    pub fn jump_rate(&self) -> f64 {
        self.jumps.as_ref().map_or(0.0, |j| j.intensity)
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps.is_some()
    }

    pub fn is_unit_gaussian(&self) -> bool {
        self.jumps.is_none() && self.drift.iter().all(|b| *b == 0.0) && self.variance.iter().all(|v| *v == 1.0)
    }

    pub fn nondegenerate_coordinates(&self) -> usize {
        self.variance.iter().filter(|v| **v > 0.0).count()
    }

    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|b| *b != 0.0)
    }

    /// Triplet of the first `n` coordinates.
    pub fn project(&self, n: usize) -> Result<LevyTriplet> {
        if n == 0 || n > self.dim() {
            return Err(Error::arg(format!("projection index {n} outside 1..={}", self.dim())));
        }
        let jumps = self.jumps.as_ref().and_then(|j| j.project(n));
        Self::new(self.drift[..n].to_vec(), self.variance[..n].to_vec(), jumps)
    }

    /// Adds `sign * (h b + √h G)`.
    #[inline]
    pub fn add_diffusion(&self, z: &mut [f64], h: f64, sign: f64, rng: &mut Stream) {
        let sh = h.sqrt();
        for ((c, b), s) in z.iter_mut().zip(&self.drift).zip(&self.stddev) {
            if *s > 0.0 {
                let g: f64 = StandardNormal.sample(rng);
                *c += sign * (h * b + sh * s * g);
            } else {
                *c += sign * h * b;
            }
        }
    }

    pub fn add_jump(&self, z: &mut [f64], sign: f64, rng: &mut Stream) {
        if let Some(j) = &self.jumps {
            j.add_jump(z, sign, rng);
        }
    }

    /// Waiting time to the next jump (infinite without jumps).
    pub fn next_jump_wait(&self, rng: &mut Stream) -> f64 {
        match &self.jumps {
            Some(j) => {
                let e: f64 = Exp1.sample(rng);
                e / j.intensity
            }
            None => f64::INFINITY,
        }
    }

    /// Adds `sign * Z` with `Z ~ ν_t`.
    pub fn add_increment(&self, z: &mut [f64], t: f64, sign: f64, rng: &mut Stream) {
        self.add_diffusion(z, t, sign, rng);
        if let Some(j) = &self.jumps {
            let count: f64 = Poisson::new(t * j.intensity).map_or(0.0, |p| p.sample(rng));
            for _ in 0..count as u64 {
                j.add_jump(z, sign, rng);
            }
        }
    }

    pub fn sample_increment(&self, t: f64, rng: &mut Stream) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.add_increment(&mut z, t, 1.0, rng);
        z
    }

    /// `t ~ Exp(alpha)` followed by `Z_t`.
    pub fn sample_at_exponential_time(&self, alpha: f64, z: &mut [f64], rng: &mut Stream) -> f64 {
        let e: f64 = Exp1.sample(rng);
        let t = e / alpha;
        self.add_increment(z, t, 1.0, rng);
        t
    }

    /// Jump pairing moments; zero without jumps.
    pub fn jump_pairing_moments(&self, xi: &[f64]) -> (f64, f64) {
        self.jumps.as_ref().map_or((0.0, 0.0), |j| j.pairing_moments(xi))
    }

    /// `b_LK = b + ∫ z/(1+||z||^2) M(dz)` for point-mass jumps.
    pub fn lk_drift(&self, space: &SpaceModel) -> Result<Vec<f64>> {
        let mut b = self.drift.clone();
        match self.jumps.as_ref().map(|j| (j.intensity, &j.kind)) {
            None => {}
            Some((rate, JumpKind::PointMass { atoms, probs })) => {
                for (a, p) in atoms.iter().zip(probs) {
                    let w = rate * p / (1.0 + space.e_norm_sq(a));
                    b.iter_mut().zip(a).for_each(|(bi, ai)| *bi += w * ai);
                }
            }
            Some((_, JumpKind::Poisson01)) => {
                return Err(Error::arg("Lévy-Khintchine drift has no closed form for the Poisson functional"))
            }
        }
        Ok(b)
    }

    /// Closed form of `∫<ξ,z>^2 ν_t(dz)` in Lévy-Khintchine form:
    /// `t^2 (<ξ,b> + ∫<ξ,z> ||z||^2/(1+||z||^2) M)^2 + t (<ξ,Rξ> + ∫<ξ,z>^2 M)`.
    pub fn second_moment_lk(&self, space: &SpaceModel, xi: &[f64], t: f64) -> Result<f64> {
        check_dim(self.dim(), xi.len())?;
        let b = self.lk_drift(space)?;
        let mut first = dot(xi, &b);
        let mut jump2 = 0.0;
        if let Some(JumpMeasure { intensity, kind: JumpKind::PointMass { atoms, probs } }) = &self.jumps {
            for (a, p) in atoms.iter().zip(probs) {
                let s = dot(xi, a);
                let n2 = space.e_norm_sq(a);
                first += intensity * p * s * n2 / (1.0 + n2);
                jump2 += intensity * p * s * s;
            }
        }
        let gauss: f64 = xi.iter().zip(&self.variance).map(|(x, v)| x * x * v).sum();
        Ok(t * t * first * first + t * (gauss + jump2))
    }

    /// Same quantity from the mean and variance of `<ξ, Z_t>`.
    pub fn second_moment(&self, xi: &[f64], t: f64) -> f64 {
        let (m1, m2) = self.jump_pairing_moments(xi);
        let mean = t * (dot(xi, &self.drift) + m1);
        let gauss: f64 = xi.iter().zip(&self.variance).map(|(x, v)| x * x * v).sum();
        mean * mean + t * (gauss + m2)
    }
}

/// Serializable triplet description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    #[serde(default)]
    pub gaussian: Option<GaussianSpec>,
    #[serde(default)]
    pub jumps: Option<JumpSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GaussianSpec {
    Named(String),
    Diagonal(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub intensity: f64,
    pub kind: String,
    #[serde(default)]
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl TripletSpec {
    pub fn build(&self, dim: usize) -> Result<LevyTriplet> {
        let drift = match &self.drift {
            Some(d) => pad(d, dim)?,
            None => vec![0.0; dim],
        };
        let variance = match &self.gaussian {
            None => vec![1.0; dim],
            Some(GaussianSpec::Named(s)) if s == "unitH" => vec![1.0; dim],
            Some(GaussianSpec::Named(s)) if s == "none" => vec![0.0; dim],
            Some(GaussianSpec::Named(s)) => return Err(Error::arg(format!("unknown Gaussian part '{s}'"))),
            Some(GaussianSpec::Diagonal(v)) => pad(v, dim)?,
        };
        let jumps = match &self.jumps {
            None => None,
            Some(j) => Some(match j.kind.as_str() {
                "pointmass" => {
                    let weights = if j.weights.is_empty() { vec![1.0; j.atoms.len()] } else { j.weights.clone() };
                    let atoms = j.atoms.iter().map(|a| pad(a, dim)).collect::<Result<Vec<_>>>()?;
                    JumpMeasure::point_mass(j.intensity, atoms, weights)?
                }
                "poisson01" => JumpMeasure::poisson01(j.intensity)?,
                other => return Err(Error::arg(format!("unknown jump kind '{other}'"))),
            }),
        };
        check_dim(dim, drift.len())?;
        LevyTriplet::new(drift, variance, jumps)
    }
}

/// Zero-pads a short coordinate list to `dim`.
pub fn pad(v: &[f64], dim: usize) -> Result<Vec<f64>> {
    if v.len() > dim {
        return Err(Error::Dimension { expected: dim, got: v.len() });
    }
    let mut out = v.to_vec();
    out.resize(dim, 0.0);
    Ok(out)
}

/// Monte Carlo estimate of `∫<ξ,z>^2 ν_t(dz)`.
pub fn pairing_second_moment(triplet: &LevyTriplet, xi: &[f64], t: f64, plan: &McPlan) -> Result<McEstimate> {
    check_dim(triplet.dim(), xi.len())?;
    if !(t > 0.0) {
        return Err(Error::arg("time must be positive"));
    }
    estimate(plan, |rng| {
        let z = triplet.sample_increment(t, rng);
        dot(xi, &z).powi(2)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCell {
    pub t: f64,
    pub xi_index: usize,
    pub ratio: McEstimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub c_hat: f64,
    pub c_hat_doubled: f64,
    pub cells: Vec<HypothesisCell>,
    pub stable: bool,
    pub verdict: Verdict,
}

/// Relative change of `C_hat` tolerated when the sample size doubles.
pub const STABILITY_TOLERANCE: f64 = 0.2;

/// `C_hat = max ∫<ξ,z>^2 ν_t(dz) / ((1+t^2)|ξ|^2)` over the grid, computed at
/// `n` and `2n` samples.
pub fn check_hypothesis_h(
    triplet: &LevyTriplet,
    t_grid: &[f64],
    xi_set: &[Vec<f64>],
    plan: &McPlan,
) -> Result<HypothesisReport> {
    if t_grid.is_empty() || xi_set.is_empty() {
        return Err(Error::arg("time grid and test-vector set must be nonempty"));
    }
    for xi in xi_set {
        check_dim(triplet.dim(), xi.len())?;
        if dot(xi, xi) == 0.0 {
            return Err(Error::arg("test vectors must be nonzero"));
        }
    }
    let run = |plan: &McPlan| -> Result<Vec<HypothesisCell>> {
        let mut cells = Vec::new();
        for (i, &t) in t_grid.iter().enumerate() {
            // all test vectors share the increments at a given t
            let ests = estimate_many(&plan.derive(i as u64), xi_set.len(), |rng, out| {
                let z = triplet.sample_increment(t, rng);
                for (o, xi) in out.iter_mut().zip(xi_set) {
                    *o = dot(xi, &z).powi(2);
                }
            })?;
            for (j, e) in ests.into_iter().enumerate() {
                let norm = (1.0 + t * t) * dot(&xi_set[j], &xi_set[j]);
                cells.push(HypothesisCell { t, xi_index: j, ratio: e.scaled(1.0 / norm) });
            }
        }
        Ok(cells)
    };
    let cells = run(plan)?;
    let doubled = run(&plan.with_samples(plan.samples * 2).derive(0x5eed))?;
    for (a, b) in cells.iter().zip(&doubled) {
        if a.ratio.stderr > 0.0 && b.ratio.stderr > a.ratio.stderr {
            return Err(Error::Instability(format!(
                "standard error did not shrink when doubling samples at t = {}, test vector {}: {:.3e} -> {:.3e}",
                a.t, a.xi_index, a.ratio.stderr, b.ratio.stderr
            )));
        }
    }
    let max = |c: &[HypothesisCell]| c.iter().map(|x| x.ratio.mean).fold(f64::NEG_INFINITY, f64::max);
    let c_hat = max(&cells);
    let c_hat_doubled = max(&doubled);
    let stable = c_hat.is_finite()
        && c_hat_doubled.is_finite()
        && (c_hat - c_hat_doubled).abs() <= STABILITY_TOLERANCE * c_hat.abs().max(c_hat_doubled.abs());
    Ok(HypothesisReport { c_hat, c_hat_doubled, cells, stable, verdict: Verdict::from_bool(stable) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn plan(n: u64, label: &str) -> McPlan {
        McPlan::new(n, StreamKey::new(11).labeled(label))
    }

    #[test]
    fn pure_drift_is_deterministic() {
        let tr = LevyTriplet::pure_drift(vec![1.0, -2.0, 0.5]).unwrap();
        let mut rng = StreamKey::new(0).stream();
        assert_eq!(tr.sample_increment(2.0, &mut rng), vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn gaussian_coordinate_variance() {
        let tr = LevyTriplet::brownian(8);
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let est = pairing_second_moment(&tr, &e1, 2.0, &plan(100_000, "g")).unwrap();
        assert_eq!(est.verdict(2.0, 0.0), Verdict::Pass, "{est:?}");
        let zero = pairing_second_moment(&tr, &[0.0; 8], 2.0, &plan(100, "z")).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn lk_form_agrees_with_mean_variance_form() {
        let space = SpaceModel::geometric(4);
        let jumps = JumpMeasure::point_mass(
            1.5,
            vec![vec![1.0, 0.0, 2.0, 0.0], vec![-0.5, 1.0, 0.0, 0.0]],
            vec![2.0, 1.0],
        )
        .unwrap();
        let tr = LevyTriplet::new(vec![0.3, 0.0, -0.1, 0.0], vec![1.0, 0.5, 0.0, 2.0], Some(jumps)).unwrap();
        for xi in [[1.0, 0.0, 0.0, 0.0], [0.5, -1.0, 2.0, 1.0]] {
            for t in [0.1, 1.0, 5.0] {
                let a = tr.second_moment_lk(&space, &xi, t).unwrap();
                let b = tr.second_moment(&xi, t);
                assert!((a - b).abs() < 1e-12 * a.max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn poisson_example_sine_integral() {
        // ∫ √2 sin(πu) du = 2√2/π
        let mut xi = vec![0.0; 6];
        xi[0] = 1.0;
        assert!((sine_integral(&xi) - 2.0 * SQRT_2 / PI).abs() < 1e-15);
        xi[1] = 1.0;
        assert!((sine_integral(&xi) - 2.0 * SQRT_2 / PI).abs() < 1e-15);
        let tr = LevyTriplet::poisson_example(6);
        assert!((tr.second_moment(&xi, 2.0) - poisson_example_target(&xi, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn poisson_example_moment_mc() {
        let tr = LevyTriplet::poisson_example(8);
        let xi = vec![1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        let est = pairing_second_moment(&tr, &xi, 1.5, &plan(100_000, "p")).unwrap();
        assert_eq!(est.verdict(poisson_example_target(&xi, 1.5), 0.0), Verdict::Pass, "{est:?}");
    }

    #[test]
    fn hypothesis_constant_unit_gaussian() {
        let tr = LevyTriplet::brownian(4);
        let xis = vec![vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]];
        let rep = check_hypothesis_h(&tr, &[0.1, 1.0, 5.0], &xis, &plan(20_000, "h")).unwrap();
        assert!(rep.stable);
        assert!(rep.c_hat <= 0.5 + 0.02, "{}", rep.c_hat);
        assert!(rep.c_hat >= 0.45);
    }

    #[test]
    fn hypothesis_poisson_example_bounded_by_two() {
        let tr = LevyTriplet::poisson_example(8);
        let mut xis = Vec::new();
        for k in 0..3 {
            let mut v = vec![0.0; 8];
            v[k] = 1.0;
            xis.push(v);
        }
        let rep = check_hypothesis_h(&tr, &[0.5, 1.0, 2.0], &xis, &plan(20_000, "hp")).unwrap();
        assert!(rep.stable);
        assert!(rep.c_hat <= 2.0);
    }

    #[test]
    fn projection_keeps_leading_coordinates() {
        let jumps = JumpMeasure::point_mass(1.0, vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]], vec![1.0, 3.0]).unwrap();
        let tr = LevyTriplet::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0], Some(jumps)).unwrap();
        let p = tr.project(2).unwrap();
        assert_eq!(p.drift(), &[1.0, 2.0]);
        assert!((p.jump_rate() - 0.75).abs() < 1e-15);
        assert!(tr.project(0).is_err());
    }

    #[test]
    fn rejects_zero_jump() {
        assert!(JumpMeasure::point_mass(1.0, vec![vec![0.0, 0.0]], vec![1.0]).is_err());
        assert!(JumpMeasure::poisson01(0.0).is_err());
    }

    #[test]
    fn spec_roundtrip() {
        let spec: TripletSpec = toml::from_str(
            "gaussian = \"unitH\"\n[jumps]\nintensity = 2.0\nkind = \"pointmass\"\natoms = [[1.0, 0.5]]\n",
        )
        .unwrap();
        let tr = spec.build(4).unwrap();
        assert_eq!(tr.dim(), 4);
        assert_eq!(tr.jump_rate(), 2.0);
        assert!(toml::from_str::<TripletSpec>("gausian = \"unitH\"").is_err());
    }
}
