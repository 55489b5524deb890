//! First-entrance simulation with exact Gaussian steps and exact jump times.
//!
//! Membership is checked at time 0 (the `D_M` convention) and after every
//! step. Steps shrink near the boundary; a crossing inside a step is caught
//! either by the end point (refined by one bisection on the Brownian bridge)
//! or by the bridge crossing probability of the level function.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::target::TargetSet;
use crate::error::{check_dim, Error, Result};
use crate::measures::LevyTriplet;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    /// Largest step.
    pub dt: f64,
    pub horizon: f64,
    /// Smallest adaptive step.
    pub min_dt: f64,
    /// Bisection on the bridge at a detected crossing.
    pub refine: bool,
    /// Bridge crossing probability between monitoring times.
    pub bridge: bool,
    /// Steps are chosen so the level moves by about `gap / safety`.
    pub safety: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { dt: 0.25, horizon: 50.0, min_dt: 1e-7, refine: true, bridge: true, safety: 2.0 }
    }
}

impl PathConfig {
    /// Horizon `50/β`, making `e^{-β·horizon}` negligible.
    pub fn for_beta(beta: f64) -> Self {
        let horizon = if beta > 0.0 { 50.0 / beta } else { 50.0 };
        Self { horizon, ..Self::default() }.fit()
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }.fit()
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    fn fit(mut self) -> Self {
        self.dt = self.dt.min(self.horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(self.dt) && ok(self.horizon) && ok(self.min_dt) && ok(self.safety)) {
            return Err(Error::arg("path config fields must be positive and finite"));
        }
        if self.dt > self.horizon {
            return Err(Error::arg(format!("dt {} exceeds horizon {}", self.dt, self.horizon)));
        }
        if self.min_dt > self.dt {
            return Err(Error::arg("min_dt exceeds dt"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitRecord {
    pub hit: bool,
    pub time: f64,
    pub location: Vec<f64>,
}

impl HitRecord {
    fn miss() -> Self {
        Self { hit: false, time: f64::INFINITY, location: Vec::new() }
    }

    /// `e^{-β T}` on a hit, else 0.
    pub fn discount(&self, beta: f64) -> f64 {
        if self.hit {
            (-beta * self.time).exp()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub hits: Vec<HitRecord>,
    pub end: Vec<f64>,
    pub end_time: f64,
}

/// Walks one path until every target is hit, or to the horizon when
/// `until_horizon` is set. `sign = -1` gives the antithetic path.
pub fn simulate_multi(
    triplet: &LevyTriplet,
    start: &[f64],
    targets: &[&TargetSet],
    cfg: &PathConfig,
    until_horizon: bool,
    sign: f64,
    rng: &mut Stream,
) -> PathOutcome {
    let dim = start.len();
    let var = triplet.variance();
    let drift = triplet.drift();
    let spreads: Vec<f64> = targets.iter().map(|m| m.spread(var)).collect();
    let mut hits: Vec<HitRecord> = vec![HitRecord::miss(); targets.len()];
    let mut open = targets.len();
    let mut z = start.to_vec();
    let mut t = 0.0;
    let mut levels: Vec<f64> = targets.iter().map(|m| m.level(&z)).collect();
    for (j, l) in levels.iter().enumerate() {
        if *l <= 0.0 {
            hits[j] = HitRecord { hit: true, time: 0.0, location: z.clone() };
            open -= 1;
        }
    }
    let mut next_jump = triplet.next_jump_wait(rng);
    let mut w = vec![0.0; dim];
    let mut mid = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    while t < cfg.horizon && (open > 0 || until_horizon) {
        let mut h = cfg.dt;
        if cfg.refine || cfg.bridge {
            for j in 0..targets.len() {
                if hits[j].hit || !levels[j].is_finite() {
                    continue;
                }
                let gap = levels[j] / cfg.safety;
                if spreads[j] > 0.0 {
                    h = h.min((gap / spreads[j]).powi(2));
                }
                let rate = targets[j].gradient(&z).iter().zip(drift).map(|(g, b)| g * b).sum::<f64>().abs();
                if rate > 0.0 {
                    h = h.min(gap / rate);
                }
            }
            h = h.max(cfg.min_dt);
        }
        h = h.min(cfg.horizon - t);
        let jump_now = next_jump - t <= h;
        if jump_now {
            h = (next_jump - t).max(0.0);
        }
        // Gaussian part, drawn as drift plus scaled noise so the bridge
        // midpoint can reuse it.
        let sh = h.sqrt();
        for k in 0..dim {
            let g: f64 = if var[k] > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
            noise[k] = sh * triplet.stddev()[k] * g;
            w[k] = z[k] + sign * (h * drift[k] + noise[k]);
        }
        let mut mid_ready = false;
        let mut uniform: Option<f64> = None;
        for j in 0..targets.len() {
            if hits[j].hit {
                continue;
            }
            let la = levels[j];
            let lb = targets[j].level(&w);
            if lb <= 0.0 {
                let (time, loc) = if cfg.refine {
                    if !mid_ready {
                        for k in 0..dim {
                            let g: f64 = if var[k] > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
                            mid[k] = 0.5 * (z[k] + w[k]) + sign * 0.5 * sh * triplet.stddev()[k] * g;
                        }
                        mid_ready = true;
                    }
                    let lm = targets[j].level(&mid);
                    if lm <= 0.0 {
                        crossing(targets[j], &z, &mid, la, lm, t, 0.5 * h)
                    } else {
                        crossing(targets[j], &mid, &w, lm, lb, t + 0.5 * h, 0.5 * h)
                    }
                } else {
                    crossing(targets[j], &z, &w, la, lb, t, h)
                };
                hits[j] = HitRecord { hit: true, time, location: loc };
                open -= 1;
            } else if cfg.bridge && la.is_finite() && lb.is_finite() && h > 0.0 {
                let s2 = targets[j].directional_variance(&z, var);
                if s2 > 0.0 {
                    let p = (-2.0 * la * lb / (s2 * h)).exp();
                    let u = *uniform.get_or_insert_with(|| rng.random::<f64>());
                    if u < p {
                        let frac = la / (la + lb);
                        let mut at: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + frac * (b - a)).collect();
                        at = targets[j].project_to_boundary(&at);
                        hits[j] = HitRecord { hit: true, time: t + frac * h, location: at };
                        open -= 1;
                    }
                }
            }
        }
        std::mem::swap(&mut z, &mut w);
        t += h;
        if jump_now {
            triplet.add_jump(&mut z, sign, rng);
            next_jump = t + triplet.next_jump_wait(rng);
        }
        for j in 0..targets.len() {
            levels[j] = targets[j].level(&z);
            if !hits[j].hit && levels[j] <= 0.0 {
                hits[j] = HitRecord { hit: true, time: t, location: z.clone() };
                open -= 1;
            }
        }
    }
    PathOutcome { hits, end: z, end_time: t }
}

fn crossing(m: &TargetSet, a: &[f64], b: &[f64], la: f64, lb: f64, t0: f64, h: f64) -> (f64, Vec<f64>) {
    let frac = if la.is_finite() && la - lb > 0.0 { (la / (la - lb)).clamp(0.0, 1.0) } else { 1.0 };
    let at: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect();
    (t0 + frac * h, m.project_to_boundary(&at))
}

/// First entrance into `target` before the horizon.
pub fn simulate_to_hit(
    triplet: &LevyTriplet,
    start: &[f64],
    target: &TargetSet,
    cfg: &PathConfig,
    rng: &mut Stream,
) -> Result<HitRecord> {
    cfg.validate()?;
    check_dim(triplet.dim(), start.len())?;
    Ok(simulate_multi(triplet, start, &[target], cfg, false, 1.0, rng).hits.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::space::SpaceModel;

    #[test]
    fn start_inside_hits_at_zero() {
        let tr = LevyTriplet::brownian(3);
        let s = SpaceModel::geometric(3);
        let b = TargetSet::e_ball(&s, s.zero(), 1.0).unwrap();
        let mut rng = StreamKey::new(1).stream();
        let r = simulate_to_hit(&tr, &s.zero(), &b, &PathConfig::default(), &mut rng).unwrap();
        assert!(r.hit && r.time == 0.0);
        let r = simulate_to_hit(&tr, &[5.0, 0.0, 0.0], &TargetSet::Whole, &PathConfig::default(), &mut rng).unwrap();
        assert!(r.hit && r.time == 0.0);
        let r = simulate_to_hit(&tr, &[5.0, 0.0, 0.0], &TargetSet::Empty, &PathConfig::default().with_horizon(2.0), &mut rng)
            .unwrap();
        assert!(!r.hit);
    }

    #[test]
    fn hits_lie_in_the_closed_set() {
        let tr = LevyTriplet::brownian(2);
        let m = TargetSet::halfspace(vec![1.0, 0.0], 1.0).unwrap();
        let cfg = PathConfig::default().with_horizon(5.0);
        let mut rng = StreamKey::new(3).stream();
        for _ in 0..200 {
            let r = simulate_to_hit(&tr, &[0.0, 0.0], &m, &cfg, &mut rng).unwrap();
            if r.hit {
                assert!(m.level(&r.location) <= 1e-12);
                assert!(r.time <= cfg.horizon);
            }
        }
    }

    #[test]
    fn gamblers_ruin_exit_law() {
        // Exit of (a, b) for standard 1-d Brownian motion from x.
        let tr = LevyTriplet::brownian(1);
        let (a, b, x) = (-1.0, 2.0, 0.5);
        let out = TargetSet::union(vec![
            TargetSet::halfspace(vec![1.0], b).unwrap(),
            TargetSet::halfspace(vec![-1.0], -a).unwrap(),
        ]);
        let cfg = PathConfig::default().with_horizon(200.0);
        let mut rng = StreamKey::new(9).stream();
        let n = 4000;
        let mut right = 0.0;
        for _ in 0..n {
            let r = simulate_to_hit(&tr, &[x], &out, &cfg, &mut rng).unwrap();
            assert!(r.hit);
            if r.location[0] > 0.0 {
                right += 1.0;
            }
        }
        let p = right / n as f64;
        let exact = (x - a) / (b - a);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p - exact).abs() < 4.0 * se, "{p} vs {exact}");
    }

    #[test]
    fn first_passage_time_law() {
        // P(T_c ≤ s) = 2 P(W_s ≥ c) for the level c = 1 at s = 1.
        let tr = LevyTriplet::brownian(1);
        let m = TargetSet::halfspace(vec![1.0], 1.0).unwrap();
        let cfg = PathConfig::default().with_horizon(1.0);
        let mut rng = StreamKey::new(10).stream();
        let n = 20000;
        let hits = (0..n).filter(|_| simulate_to_hit(&tr, &[0.0], &m, &cfg, &mut rng).unwrap().hit).count();
        let p = hits as f64 / n as f64;
        let exact = statrs::function::erf::erfc(1.0 / 2f64.sqrt());
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p - exact).abs() < 4.0 * se, "{p} vs {exact}");
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::default().validate().is_ok());
        assert!(PathConfig { dt: 2.0, horizon: 1.0, ..PathConfig::default() }.validate().is_err());
        assert!(PathConfig { min_dt: 0.0, ..PathConfig::default() }.validate().is_err());
    }
}
