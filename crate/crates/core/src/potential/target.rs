//! Target sets given by a level function: `level ≤ 0` inside, `> 0` outside.
//!
//! Levels are distance-like near the boundary so that step control and the
//! Brownian-bridge crossing correction can use them directly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lyapunov::LyapunovNorm;
use crate::space::{dot, SpaceModel};

#[derive(Clone, Debug)]
pub enum TargetSet {
    Empty,
    Whole,
    /// `{||z - c||_E ≤ r}`.
    EBall { center: Vec<f64>, radius: f64, weights: Arc<[f64]> },
    /// `{|z - c|_H ≤ r}`.
    HBall { center: Vec<f64>, radius: f64 },
    /// `{<ξ, z> ≥ c}`.
    Halfspace { xi: Vec<f64>, c: f64 },
    /// `{lower_k ≤ z_k ≤ upper_k}`; infinite bounds leave a coordinate free.
    CoordinateBox { lower: Vec<f64>, upper: Vec<f64> },
    /// `{q_x ≤ c}`.
    QxLevel { norm: Arc<LyapunovNorm>, c: f64 },
    Complement(Box<TargetSet>),
    Union(Vec<TargetSet>),
    /// `{z : P_n z ∈ base}` with `base` living on the first `n` coordinates.
    Cylinder { n: usize, base: Box<TargetSet> },
}

impl TargetSet {
    pub fn e_ball(space: &SpaceModel, center: Vec<f64>, radius: f64) -> Result<Self> {
        space.check(&center)?;
        positive(radius)?;
        Ok(TargetSet::EBall { center, radius, weights: space.weights().into() })
    }

    pub fn h_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        positive(radius)?;
        Ok(TargetSet::HBall { center, radius })
    }

    pub fn halfspace(xi: Vec<f64>, c: f64) -> Result<Self> {
        if dot(&xi, &xi) == 0.0 {
            return Err(Error::arg("halfspace normal must be nonzero"));
        }
        Ok(TargetSet::Halfspace { xi, c })
    }

    pub fn coordinate_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::arg("box bounds must satisfy lower ≤ upper"));
        }
        Ok(TargetSet::CoordinateBox { lower, upper })
    }

    pub fn qx_level(norm: Arc<LyapunovNorm>, c: f64) -> Result<Self> {
        positive(c)?;
        Ok(TargetSet::QxLevel { norm, c })
    }

    pub fn complement(self) -> Self {
        TargetSet::Complement(Box::new(self))
    }

    pub fn union(sets: Vec<TargetSet>) -> Self {
        TargetSet::Union(sets)
    }

    pub fn level(&self, z: &[f64]) -> f64 {
        match self {
            TargetSet::Empty => f64::INFINITY,
            TargetSet::Whole => f64::NEG_INFINITY,
            TargetSet::EBall { center, radius, weights } => {
                let d: f64 = weights.iter().zip(z).zip(center).map(|((l, a), b)| l * (a - b).powi(2)).sum();
                d.sqrt() - radius
            }
            TargetSet::HBall { center, radius } => {
                let d: f64 = z.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                d.sqrt() - radius
            }
            TargetSet::Halfspace { xi, c } => (c - dot(xi, z)) / dot(xi, xi).sqrt(),
            TargetSet::CoordinateBox { lower, upper } => box_active(lower, upper, z).map_or(f64::NEG_INFINITY, |a| a.0),
            TargetSet::QxLevel { norm, c } => norm.q(z) - c,
            TargetSet::Complement(a) => -a.level(z),
            TargetSet::Union(sets) => sets.iter().map(|s| s.level(z)).fold(f64::INFINITY, f64::min),
            TargetSet::Cylinder { n, base } => base.level(&z[..*n]),
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.level(z) <= 0.0
    }

    /// Gradient of the level function (zero where it is flat or undefined).
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        self.add_gradient(z, 1.0, &mut g);
        g
    }

    fn add_gradient(&self, z: &[f64], scale: f64, g: &mut [f64]) {
        match self {
            TargetSet::Empty | TargetSet::Whole => {}
            TargetSet::EBall { center, weights, .. } => {
                let d: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let norm: f64 = weights.iter().zip(&d).map(|(l, x)| l * x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for ((gk, l), x) in g.iter_mut().zip(weights.iter()).zip(&d) {
                        *gk += scale * l * x / norm;
                    }
                }
            }
            TargetSet::HBall { center, .. } => {
                let d: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let norm = dot(&d, &d).sqrt();
                if norm > 0.0 {
                    for (gk, x) in g.iter_mut().zip(&d) {
                        *gk += scale * x / norm;
                    }
                }
            }
            TargetSet::Halfspace { xi, .. } => {
                let n = dot(xi, xi).sqrt();
                for (gk, x) in g.iter_mut().zip(xi) {
                    *gk -= scale * x / n;
                }
            }
            TargetSet::CoordinateBox { lower, upper } => {
                if let Some((_, k, upper_side)) = box_active(lower, upper, z) {
                    g[k] += if upper_side { scale } else { -scale };
                }
            }
            TargetSet::QxLevel { norm, .. } => {
                for (gk, x) in g.iter_mut().zip(norm.gradient(&z[..norm.dim()])) {
                    *gk += scale * x;
                }
            }
            TargetSet::Complement(a) => a.add_gradient(z, -scale, g),
            TargetSet::Union(sets) => {
                if let Some(s) = argmin(sets, z) {
                    s.add_gradient(z, scale, g);
                }
            }
            TargetSet::Cylinder { n, base } => base.add_gradient(&z[..*n], scale, &mut g[..*n]),
        }
    }

    /// Variance rate of the level along a diagonal Gaussian at `z`.
    pub fn directional_variance(&self, z: &[f64], variance: &[f64]) -> f64 {
        self.gradient(z).iter().zip(variance).map(|(g, v)| g * g * v).sum()
    }

    /// Upper bound on the standard deviation rate of the level under a
    /// diagonal Gaussian, uniform in the position.
    pub fn spread(&self, variance: &[f64]) -> f64 {
        let max_on = |len: usize, f: &dyn Fn(usize) -> f64| (0..len.min(variance.len())).map(f).fold(0.0, f64::max);
        match self {
            TargetSet::Empty | TargetSet::Whole => 0.0,
            TargetSet::EBall { weights, .. } => max_on(weights.len(), &|k| weights[k] * variance[k]).sqrt(),
            TargetSet::HBall { center, .. } => max_on(center.len(), &|k| variance[k]).sqrt(),
            TargetSet::Halfspace { xi, .. } => {
                (xi.iter().zip(variance).map(|(x, v)| x * x * v).sum::<f64>() / dot(xi, xi)).sqrt()
            }
            TargetSet::CoordinateBox { lower, upper } => max_on(lower.len(), &|k| {
                if lower[k].is_finite() || upper[k].is_finite() {
                    variance[k]
                } else {
                    0.0
                }
            })
            .sqrt(),
            TargetSet::QxLevel { norm, .. } => norm.gaussian_second_moment(&variance[..norm.dim()]).sqrt(),
            TargetSet::Complement(a) => a.spread(variance),
            TargetSet::Union(sets) => sets.iter().map(|s| s.spread(variance)).fold(0.0, f64::max),
            TargetSet::Cylinder { n, base } => base.spread(&variance[..*n]),
        }
    }

    /// Nearby point on the boundary.
    pub fn project_to_boundary(&self, z: &[f64]) -> Vec<f64> {
        match self {
            TargetSet::Empty | TargetSet::Whole => z.to_vec(),
            TargetSet::EBall { center, radius, weights } => {
                let d: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let norm: f64 = weights.iter().zip(&d).map(|(l, x)| l * x * x).sum::<f64>().sqrt();
                radial(z, center, &d, norm, *radius)
            }
            TargetSet::HBall { center, radius } => {
                let d: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let norm = dot(&d, &d).sqrt();
                radial(z, center, &d, norm, *radius)
            }
            TargetSet::Halfspace { xi, c } => {
                let s = (c - dot(xi, z)) / dot(xi, xi);
                let mut out = z.to_vec();
                out.iter_mut().zip(xi).for_each(|(o, x)| *o += s * x);
                out
            }
            TargetSet::CoordinateBox { lower, upper } => {
                let mut out = z.to_vec();
                if let Some((_, k, upper_side)) = box_active(lower, upper, z) {
                    out[k] = if upper_side { upper[k] } else { lower[k] };
                }
                out
            }
            TargetSet::QxLevel { norm, c } => {
                let q = norm.q(&z[..norm.dim()]);
                if q > 0.0 {
                    let mut out = z.to_vec();
                    out[..norm.dim()].iter_mut().for_each(|x| *x *= c / q);
                    out
                } else {
                    z.to_vec()
                }
            }
            TargetSet::Complement(a) => a.project_to_boundary(z),
            TargetSet::Union(sets) => argmin(sets, z).map_or_else(|| z.to_vec(), |s| s.project_to_boundary(z)),
            TargetSet::Cylinder { n, base } => {
                let mut out = z.to_vec();
                let head = base.project_to_boundary(&z[..*n]);
                out[..*n].copy_from_slice(&head);
                out
            }
        }
    }

    /// `P_n^{-1}(P_n M)`: the cylinder over the image of the set under the
    /// projection onto the first `n` coordinates.
    pub fn project_dims(&self, n: usize) -> Result<TargetSet> {
        if n == 0 {
            return Err(Error::arg("projection index must be positive"));
        }
        let cyl = |base: TargetSet| TargetSet::Cylinder { n, base: Box::new(base) };
        Ok(match self {
            TargetSet::Empty => TargetSet::Empty,
            TargetSet::Whole => TargetSet::Whole,
            TargetSet::EBall { center, radius, weights } => cyl(TargetSet::EBall {
                center: center[..n.min(center.len())].to_vec(),
                radius: *radius,
                weights: weights[..n.min(weights.len())].into(),
            }),
            TargetSet::HBall { center, radius } => {
                cyl(TargetSet::HBall { center: center[..n.min(center.len())].to_vec(), radius: *radius })
            }
            TargetSet::Halfspace { xi, c } => {
                if xi.iter().skip(n).any(|x| *x != 0.0) {
                    TargetSet::Whole
                } else {
                    cyl(TargetSet::Halfspace { xi: xi[..n.min(xi.len())].to_vec(), c: *c })
                }
            }
            TargetSet::CoordinateBox { lower, upper } => {
                let m = n.min(lower.len());
                cyl(TargetSet::CoordinateBox { lower: lower[..m].to_vec(), upper: upper[..m].to_vec() })
            }
            TargetSet::QxLevel { norm, c } => cyl(TargetSet::QxLevel { norm: Arc::new(norm.truncate(n)?), c: *c }),
            TargetSet::Complement(inner) => {
                // the complement of a set bounded in some coordinate beyond
                // `n` projects onto everything
                if inner.bounded_beyond(n) {
                    TargetSet::Whole
                } else {
                    return Err(Error::arg("projection of this complement has no closed form"));
                }
            }
            TargetSet::Union(sets) => {
                TargetSet::Union(sets.iter().map(|s| s.project_dims(n)).collect::<Result<Vec<_>>>()?)
            }
            TargetSet::Cylinder { n: m, base } => {
                if *m <= n {
                    self.clone()
                } else {
                    base.project_dims(n)?
                }
            }
        })
    }

    pub fn is_empty_set(&self) -> bool {
        matches!(self, TargetSet::Empty)
    }

    fn bounded_beyond(&self, n: usize) -> bool {
        match self {
            TargetSet::Empty => true,
            TargetSet::EBall { center, weights, .. } => center.len() > n && weights[n..].iter().any(|l| *l > 0.0),
            TargetSet::HBall { center, .. } => center.len() > n,
            TargetSet::CoordinateBox { lower, upper } => {
                lower.iter().zip(upper).skip(n).any(|(l, u)| l.is_finite() && u.is_finite())
            }
            TargetSet::QxLevel { norm, .. } => norm.dim() > n && norm.weights()[n..].iter().any(|w| *w > 0.0),
            TargetSet::Union(sets) => sets.iter().all(|s| s.bounded_beyond(n)),
            _ => false,
        }
    }
}

fn positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::arg("radius and level must be positive"))
    }
}

fn radial(z: &[f64], center: &[f64], d: &[f64], norm: f64, radius: f64) -> Vec<f64> {
    if norm == 0.0 {
        return z.to_vec();
    }
    let mut out = z.to_vec();
    for ((o, c), x) in out.iter_mut().zip(center).zip(d) {
        *o = c + radius * x / norm;
    }
    out
}

/// Largest constraint violation `(value, coordinate, upper side)`.
fn box_active(lower: &[f64], upper: &[f64], z: &[f64]) -> Option<(f64, usize, bool)> {
    let mut best: Option<(f64, usize, bool)> = None;
    for k in 0..lower.len().min(z.len()) {
        for (v, up) in [(lower[k] - z[k], false), (z[k] - upper[k], true)] {
            if v.is_finite() && best.is_none_or(|b| v > b.0) {
                best = Some((v, k, up));
            }
        }
    }
    best
}

fn argmin<'a>(sets: &'a [TargetSet], z: &[f64]) -> Option<&'a TargetSet> {
    sets.iter().min_by(|a, b| a.level(z).total_cmp(&b.level(z)))
}

/// Serializable description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Empty,
    Whole,
    EBall { center: Vec<f64>, radius: f64 },
    EBallComplement { center: Vec<f64>, radius: f64 },
    HBall { #[serde(default)] center: Vec<f64>, radius: f64 },
    Halfspace { xi: Vec<f64>, c: f64 },
    CoordinateBox { lower: Vec<f64>, upper: Vec<f64> },
    LevelsetQx { c: f64 },
    LevelsetQxComplement { c: f64 },
}

impl TargetSpec {
    pub fn build(&self, space: &SpaceModel, norm: Option<&Arc<LyapunovNorm>>) -> Result<TargetSet> {
        let dim = space.dim();
        let pad = |v: &[f64]| crate::measures::pad(v, dim);
        let need_norm = || norm.cloned().ok_or_else(|| Error::arg("q_x level sets need a Lyapunov section"));
        match self {
            TargetSpec::Empty => Ok(TargetSet::Empty),
            TargetSpec::Whole => Ok(TargetSet::Whole),
            TargetSpec::EBall { center, radius } => TargetSet::e_ball(space, pad(center)?, *radius),
            TargetSpec::EBallComplement { center, radius } => {
                Ok(TargetSet::e_ball(space, pad(center)?, *radius)?.complement())
            }
            TargetSpec::HBall { center, radius } => TargetSet::h_ball(pad(center)?, *radius),
            TargetSpec::Halfspace { xi, c } => TargetSet::halfspace(pad(xi)?, *c),
            TargetSpec::CoordinateBox { lower, upper } => {
                let mut lo = lower.clone();
                let mut up = upper.clone();
                lo.resize(dim, f64::NEG_INFINITY);
                up.resize(dim, f64::INFINITY);
                TargetSet::coordinate_box(lo, up)
            }
            TargetSpec::LevelsetQx { c } => TargetSet::qx_level(need_norm()?, *c),
            TargetSpec::LevelsetQxComplement { c } => Ok(TargetSet::qx_level(need_norm()?, *c)?.complement()),
        }
    }
}
