//! The truncated triple E' ⊂ H ⊂ E.
//!
//! A point is stored by its pairing coordinates `c_n = <e_n, z>`, so that
//! `|z|_H^2 = Σ c_n^2` and `||z||_E^2 = Σ λ_n c_n^2`. Indices are 0-based in
//! code; coordinate `k` carries the weight `λ_{k+1}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const DEFAULT_DIM: usize = 32;

/// Generator of the weights `λ_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Explicit(Vec<f64>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Named("4^-n".into())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Generator {
    Geometric4,
    Sine,
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceModel {
    weights: Vec<f64>,
    generator: Generator,
}

impl SpaceModel {
    pub fn new(dim: usize, spec: &WeightSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        let (weights, generator) = match spec {
            WeightSpec::Named(s) => match s.as_str() {
                "4^-n" => ((1..=dim).map(|n| 4f64.powi(-(n as i32))).collect(), Generator::Geometric4),
                "sine" => ((1..=dim).map(sine_weight).collect(), Generator::Sine),
                other => return Err(Error::arg(format!("unknown weight generator '{other}'"))),
            },
            WeightSpec::Explicit(w) => {
                check_dim(dim, w.len())?;
                (w.clone(), Generator::Explicit)
            }
        };
        Self::from_parts(weights, generator)
    }

    pub fn geometric(dim: usize) -> Self {
        Self::new(dim, &WeightSpec::default()).expect("valid default")
    }

    pub fn sine(dim: usize) -> Self {
        Self::new(dim, &WeightSpec::Named("sine".into())).expect("valid sine weights")
    }

    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        Self::from_parts(weights, Generator::Explicit)
    }

    fn from_parts(weights: Vec<f64>, generator: Generator) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("dimension must be positive"));
        }
        for (k, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::arg(format!("weight {} = {w} is not strictly positive", k + 1)));
            }
            if k > 0 && *w > weights[k - 1] {
                return Err(Error::arg(format!("weights must be nonincreasing (index {})", k + 1)));
            }
        }
        Ok(Self { weights, generator })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `λ_n` for 1-based `n`, including `n = N + 1` for named generators.
    /// Beyond the truncation an explicit list has weight 0.
    pub fn weight(&self, n: usize) -> f64 {
        match self.generator {
            Generator::Geometric4 => 4f64.powi(-(n as i32)),
            Generator::Sine => sine_weight(n),
            Generator::Explicit => self.weights.get(n.wrapping_sub(1)).copied().unwrap_or(0.0),
        }
    }

    /// `ln λ_n` for named generators at any `n`.
    pub fn ln_weight(&self, n: usize) -> Option<f64> {
        match self.generator {
            Generator::Geometric4 => Some(-(n as f64) * 4f64.ln()),
            Generator::Sine => Some(-sine_weight(n).recip().ln()),
            Generator::Explicit => None,
        }
    }

    /// `Σ_{k>m} λ_k` over the untruncated sequence (upper bound for sine).
    pub fn tail(&self, m: usize) -> f64 {
        match self.generator {
            Generator::Geometric4 => 4f64.powi(-(m as i32)) / 3.0,
            Generator::Sine => {
                let n = self.dim().max(m);
                let finite: f64 = (m + 1..=n).map(sine_weight).sum();
                finite + 1.0 / (PI * PI * n as f64)
            }
            Generator::Explicit => self.truncated_tail(m),
        }
    }

    /// `Σ_{m<k≤N} λ_k`.
    pub fn truncated_tail(&self, m: usize) -> f64 {
        self.weights.iter().skip(m).sum()
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Unit vector `e_n` (1-based).
    pub fn basis(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 || n > self.dim() {
            return Err(Error::arg(format!("basis index {n} outside 1..={}", self.dim())));
        }
        let mut v = self.zero();
        v[n - 1] = 1.0;
        Ok(v)
    }

    pub fn check(&self, z: &[f64]) -> Result<()> {
        check_dim(self.dim(), z.len())
    }

    /// Keeps the first `n` coordinates.
    pub fn project(&self, n: usize, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        if n == 0 || n > self.dim() {
            return Err(Error::arg(format!("projection index {n} outside 1..={}", self.dim())));
        }
        let mut out = z.to_vec();
        out[n..].iter_mut().for_each(|c| *c = 0.0);
        Ok(out)
    }

    pub fn e_norm_sq(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(l, c)| l * c * c).sum()
    }

    pub fn e_norm(&self, z: &[f64]) -> f64 {
        self.e_norm_sq(z).sqrt()
    }

    pub fn h_norm(&self, z: &[f64]) -> f64 {
        h_norm(z)
    }

    pub fn norms(&self, z: &[f64]) -> Result<(f64, f64)> {
        self.check(z)?;
        Ok((self.e_norm(z), self.h_norm(z)))
    }

    /// Dual norm of `ξ ∈ E'` given by H-coordinates: `sup_{||z||≤1} <ξ,z>`.
    pub fn dual_norm(&self, xi: &[f64]) -> f64 {
        self.weights.iter().zip(xi).map(|(l, x)| x * x / l).sum::<f64>().sqrt()
    }

    /// Point with coordinates `c_n = 2^{n/2}`.
    pub fn canonical_x(&self) -> Vec<f64> {
        (1..=self.dim()).map(|n| 2f64.powf(n as f64 / 2.0)).collect()
    }
}

fn sine_weight(n: usize) -> f64 {
    let a = n as f64 * PI;
    1.0 / (1.0 + a * a)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn h_norm(z: &[f64]) -> f64 {
    dot(z, z).sqrt()
}

/// The distinguished point off H.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XSpec {
    Named(String),
    Explicit(Vec<f64>),
}

impl Default for XSpec {
    fn default() -> Self {
        XSpec::Named("canonical".into())
    }
}

/// Minimum truncated `|x|_H^2` accepted for an explicitly given point.
pub const EXPLICIT_OFF_H_THRESHOLD: f64 = 100.0;

/// One basis vector `e_n^x`: a unit H-vector supported on
/// `start..start + coeffs.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    pub start: usize,
    pub coeffs: Vec<f64>,
}

impl BlockVector {
    pub fn pair(&self, z: &[f64]) -> f64 {
        dot(&self.coeffs, &z[self.start..self.start + self.coeffs.len()])
    }

    pub fn end(&self) -> usize {
        self.start + self.coeffs.len()
    }

    pub fn dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[self.start..self.end()].copy_from_slice(&self.coeffs);
        v
    }
}

/// A point `x` off H with an H-orthonormal family satisfying
/// `<e_n^x, x> ≥ 2^{n/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CarmonaDatum {
    pub x: Vec<f64>,
    pub basis: Vec<BlockVector>,
    pub growth: Vec<f64>,
}

impl CarmonaDatum {
    pub fn build(model: &SpaceModel, spec: &XSpec) -> Result<Self> {
        match spec {
            XSpec::Named(s) if s == "canonical" => {
                let threshold = 2f64.powi(model.dim() as i32) / 2.0;
                build_carmona_basis(model, &model.canonical_x(), threshold)
            }
            XSpec::Named(s) => Err(Error::arg(format!("unknown point '{s}'"))),
            XSpec::Explicit(x) => build_carmona_basis(model, x, EXPLICIT_OFF_H_THRESHOLD),
        }
    }

    pub fn canonical(model: &SpaceModel) -> Self {
        Self::build(model, &XSpec::default()).expect("canonical point is off H")
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Largest Gram-matrix deviation from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let dim = self.x.len();
        let dense: Vec<Vec<f64>> = self.basis.iter().map(|b| b.dense(dim)).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in dense.iter().enumerate() {
            for (j, b) in dense.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    /// True when every basis vector lies entirely inside or entirely outside
    /// the first `n` coordinates.
    pub fn aligned_with(&self, n: usize) -> bool {
        self.basis.iter().all(|b| b.end() <= n || b.start >= n)
    }
}

/// Builds `e_n^x` from consecutive coordinate blocks.
///
/// Block `n` is the shortest run of coordinates, starting where block
/// `n - 1` ended, on which the restriction of `x` has H-norm at least
/// `2^{n/2}`; `e_n^x` is that restriction normalized, so `<e_n^x, x>` equals
/// the restricted norm. Disjoint supports give exact orthogonality, and a
/// block of length one is stored as `±e_k` exactly.
pub fn build_carmona_basis(model: &SpaceModel, x: &[f64], threshold: f64) -> Result<CarmonaDatum> {
    model.check(x)?;
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::arg("point has non-finite coordinates"));
    }
    let h2 = dot(x, x);
    if h2 < threshold {
        return Err(Error::Construction(format!(
            "|x|_H^2 = {h2:.4} is below the off-H threshold {threshold}; x is not certified to lie outside H"
        )));
    }
    let mut basis = Vec::new();
    let mut growth = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for k in 0..x.len() {
        acc += x[k] * x[k];
        let n = basis.len() + 1;
        let need = 2f64.powf(n as f64 / 2.0);
        let r = acc.sqrt();
        if r >= need * (1.0 - 1e-14) {
            let coeffs = if k == start {
                vec![x[k].signum()]
            } else {
                x[start..=k].iter().map(|c| c / r).collect()
            };
            basis.push(BlockVector { start, coeffs });
            growth.push(r.max(need));
            start = k + 1;
            acc = 0.0;
        }
    }
    if basis.is_empty() {
        return Err(Error::Construction(format!(
            "no basis vector reaches the growth 2^(1/2): |x|_H = {:.4}",
            h2.sqrt()
        )));
    }
    Ok(CarmonaDatum { x: x.to_vec(), basis, growth })
}
