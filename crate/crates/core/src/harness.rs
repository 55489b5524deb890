//! Config-driven experiment runner: TOML in, CSV summary and JSON detail out.
//!
//! Every experiment gets its own stream family keyed by the run seed and the
//! experiment name, so results do not depend on the order or parallelism
//! in which experiments and shards execute.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dirichlet::{self, Approach, BoundaryData, DataClass, Domain};
use crate::error::{Error, Result};
use crate::lyapunov::{self, AlphaSpec, LyapunovNorm, LyapunovSpec, NormKind};
use crate::measures::{self, pad, LevyTriplet, TripletSpec};
use crate::operators::{self, Constant, Cylinder, HalfspaceIndicator, Linear, TestFunction};
use crate::potential::{self, Measure, PathConfig, PointCloud, PotentialSpec, TargetSet, TargetSpec};
use crate::rng::{StreamKey, RNG_ALGORITHM};
use crate::space::{dot, CarmonaDatum, SpaceModel, WeightSpec, XSpec};
use crate::stats::{z_value, McEstimate, McPlan, Verdict};

pub const CSV_HEADER: &str = "experiment,op,param_hash,mean,stderr,n,target,verdict,seconds";
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const ENV_SEED: &str = "LEVYLAB_SEED";
pub const ENV_OUT: &str = "LEVYLAB_OUT";
pub const MIN_SAMPLES: u64 = 100;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// The bundled configuration running the full acceptance battery.
pub const BUNDLED_SUITE: &str = include_str!("../configs/paper-suite.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub x: XSpec,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self { dim: default_dim(), weights: WeightSpec::default(), x: XSpec::default() }
    }
}

fn default_dim() -> usize {
    crate::space::DEFAULT_DIM
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_samples() -> u64 {
    10_000
}

fn default_confidence() -> f64 {
    crate::stats::DEFAULT_CONFIDENCE
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Pass,
    /// Negative control: the experiment must fail.
    Fail,
    /// Negative control: the operation must refuse its input.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub op: String,
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub expect: Expect,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub triplet: TripletSpec,
    #[serde(default)]
    pub lyapunov: LyapunovSpec,
    #[serde(default)]
    pub path: PathConfig,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Checks every experiment and builds its job.
    pub fn validate(&self) -> Result<Vec<Job>> {
        check_confidence("confidence", self.confidence)?;
        self.path.validate().map_err(|e| Error::Config(format!("path: {e}")))?;
        Context::new(self).map_err(|e| Error::Config(format!("context: {e}")))?;
        let mut names = BTreeSet::new();
        let mut jobs = Vec::new();
        for e in &self.experiments {
            if !names.insert(e.name.as_str()) {
                return Err(Error::Config(format!("duplicate experiment name '{}'", e.name)));
            }
            let samples = e.samples.unwrap_or(self.samples);
            if samples < MIN_SAMPLES {
                return Err(Error::Config(format!("experiment '{}': samples must be at least {MIN_SAMPLES}", e.name)));
            }
            let confidence = e.confidence.unwrap_or(self.confidence);
            check_confidence(&format!("experiment '{}': confidence", e.name), confidence)?;
            let parse = lookup(&e.op)
                .ok_or_else(|| Error::Config(format!("experiment '{}': unknown op '{}'", e.name, e.op)))?;
            let op = parse(toml::Value::Table(e.params.clone()))
                .map_err(|err| Error::Config(format!("experiment '{}': params: {err}", e.name)))?;
            jobs.push(Job { spec: e.clone(), samples, confidence, op: Arc::from(op) });
        }
        Ok(jobs)
    }
}

fn check_confidence(what: &str, c: f64) -> Result<()> {
    if c > 0.5 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must lie in (0.5, 1), got {c}")))
    }
}

/// Shared, read-only state of a run.
pub struct Context {
    pub space: SpaceModel,
    pub carmona: CarmonaDatum,
    pub triplet: LevyTriplet,
    pub lyapunov: LyapunovSpec,
    pub path: PathConfig,
}

impl Context {
    pub fn new(cfg: &SuiteConfig) -> Result<Self> {
        let space = SpaceModel::new(cfg.space.dim, &cfg.space.weights)?;
        let carmona = CarmonaDatum::build(&space, &cfg.space.x)?;
        let triplet = cfg.triplet.build(space.dim())?;
        Ok(Self { space, carmona, triplet, lyapunov: cfg.lyapunov.clone(), path: cfg.path })
    }

    fn triplet(&self, spec: &Option<TripletSpec>) -> Result<LevyTriplet> {
        match spec {
            Some(s) => s.build(self.space.dim()),
            None => Ok(self.triplet.clone()),
        }
    }

    fn norm(&self, kind: Option<NormKind>, alpha: &Option<AlphaSpec>) -> Result<LyapunovNorm> {
        let mut spec = self.lyapunov.clone();
        if let Some(k) = kind {
            spec.kind = k;
        }
        if alpha.is_some() {
            spec.alpha = alpha.clone();
        }
        LyapunovNorm::build(&self.space, self.carmona.clone(), &spec)
    }

    fn pad(&self, v: &[f64]) -> Result<Vec<f64>> {
        pad(v, self.space.dim())
    }

    fn target(&self, spec: &TargetSpec) -> Result<TargetSet> {
        let norm = match spec {
            TargetSpec::LevelsetQx { .. } | TargetSpec::LevelsetQxComplement { .. } => {
                Some(Arc::new(self.norm(None, &None)?))
            }
            _ => None,
        };
        spec.build(&self.space, norm.as_ref())
    }

    fn cloud(&self, c: &PointCloud) -> Result<PointCloud> {
        PointCloud::new(c.points.iter().map(|p| self.pad(p)).collect::<Result<_>>()?, c.masses.clone())
    }
}

/// One output row of an operation.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub label: String,
    pub estimate: McEstimate,
    pub target: Option<f64>,
    pub verdict: Verdict,
}

impl Row {
    fn new(label: impl Into<String>, estimate: McEstimate, target: Option<f64>, verdict: Verdict) -> Self {
        Self { label: label.into(), estimate, target, verdict }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub verdict: Verdict,
    pub details: serde_json::Value,
}

impl Outcome {
    fn from_rows(rows: Vec<Row>) -> Self {
        let verdict = Verdict::all(rows.iter().map(|r| r.verdict));
        Self { rows, verdict, details: serde_json::Value::Null }
    }

    fn with_details(mut self, d: impl Serialize) -> Self {
        self.details = serde_json::to_value(d).unwrap_or(serde_json::Value::Null);
        self
    }
}

pub trait Operation: Send + Sync {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome>;
}

type Parser = fn(toml::Value) -> Result<Box<dyn Operation>>;

fn parse<T: Operation + DeserializeOwned + 'static>(v: toml::Value) -> Result<Box<dyn Operation>> {
    let op: T = v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(Box::new(op))
}

const REGISTRY: &[(&str, Parser)] = &[
    ("second_moment", parse::<SecondMomentOp>),
    ("moment_formula", parse::<MomentFormulaOp>),
    ("poisson_example", parse::<PoissonExampleOp>),
    ("hypothesis_h", parse::<HypothesisOp>),
    ("lyapunov_bounds", parse::<LyapunovBoundsOp>),
    ("supermedian", parse::<SupermedianOp>),
    ("projection_identity", parse::<ProjectionIdentityOp>),
    ("projection_inequality", parse::<ProjectionInequalityOp>),
    ("capacity_trivial", parse::<CapacityTrivialOp>),
    ("capacity_tightness", parse::<CapacityTightnessOp>),
    ("balayage", parse::<BalayageOp>),
    ("domination", parse::<DominationOp>),
    ("projection_convergence", parse::<ProjectionConvergenceOp>),
    ("polarity_point", parse::<PolarityPointOp>),
    ("polarity_h", parse::<PolarityHOp>),
    ("dirichlet_slab", parse::<DirichletSlabOp>),
    ("dirichlet_ball", parse::<DirichletBallOp>),
    ("harmonicity", parse::<HarmonicityOp>),
    ("boundary_continuity", parse::<ContinuityOp>),
    ("controlled_convergence", parse::<ControlledOp>),
];

pub fn registry_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|r| r.0).collect()
}

fn lookup(name: &str) -> Option<Parser> {
    REGISTRY.iter().find(|r| r.0 == name).map(|r| r.1)
}

fn sigma3(e: &McEstimate) -> f64 {
    z_value(e.confidence) * e.stderr
}

/// Strictly positive at the plan's confidence.
fn positive_verdict(d: &McEstimate) -> Verdict {
    if d.mean - sigma3(d) > 0.0 {
        Verdict::Pass
    } else if d.mean <= 0.0 {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

// ---------------------------------------------------------------- measures

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SecondMomentOp {
    xis: Vec<Vec<f64>>,
    ts: Vec<f64>,
    /// Start points; an empty list means the origin. The word "random" is
    /// not accepted here: give explicit coordinates.
    #[serde(default)]
    starts: Vec<Vec<f64>>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for SecondMomentOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let starts = if self.starts.is_empty() { vec![vec![]] } else { self.starts.clone() };
        let mut rows = Vec::new();
        let mut cell = 0u64;
        for (i, xi) in self.xis.iter().enumerate() {
            let xi = ctx.pad(xi)?;
            for &t in &self.ts {
                for (j, z) in starts.iter().enumerate() {
                    let z = ctx.pad(z)?;
                    let a = dot(&xi, &z);
                    let est = crate::stats::estimate(&plan.derive(cell), |rng| {
                        let w = tr.sample_increment(t, rng);
                        (a + dot(&xi, &w)).powi(2)
                    })?;
                    cell += 1;
                    let (m1, _) = tr.jump_pairing_moments(&xi);
                    let mean = t * (dot(&xi, tr.drift()) + m1);
                    let target = tr.second_moment(&xi, t) + 2.0 * a * mean + a * a;
                    rows.push(Row::new(format!("xi{i}/t{t}/z{j}"), est, Some(target), est.verdict(target, 0.0)));
                }
            }
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentFormulaOp {
    xis: Vec<Vec<f64>>,
    ts: Vec<f64>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for MomentFormulaOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let mut rows = Vec::new();
        let mut cell = 0u64;
        for (i, xi) in self.xis.iter().enumerate() {
            let xi = ctx.pad(xi)?;
            for &t in &self.ts {
                let target = tr.second_moment_lk(&ctx.space, &xi, t)?;
                let est = measures::pairing_second_moment(&tr, &xi, t, &plan.derive(cell))?;
                cell += 1;
                rows.push(Row::new(format!("xi{i}/t{t}"), est, Some(target), est.verdict(target, 0.0)));
            }
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonExampleOp {
    xis: Vec<Vec<f64>>,
    t: f64,
}

impl Operation for PoissonExampleOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let dim = ctx.space.dim();
        let tr = LevyTriplet::poisson_example(dim);
        let mut rows = Vec::new();
        for (i, xi) in self.xis.iter().enumerate() {
            let xi = pad(xi, dim)?;
            let target = measures::poisson_example_target(&xi, self.t);
            let est = measures::pairing_second_moment(&tr, &xi, self.t, &plan.derive(i as u64))?;
            rows.push(Row::new(format!("xi{i}"), est, Some(target), est.verdict(target, 0.0)));
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisOp {
    ts: Vec<f64>,
    xis: Vec<Vec<f64>>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for HypothesisOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let xis: Vec<Vec<f64>> = self.xis.iter().map(|x| ctx.pad(x)).collect::<Result<_>>()?;
        let r = measures::check_hypothesis_h(&tr, &self.ts, &xis, plan)?;
        let rows = r
            .cells
            .iter()
            .map(|c| Row::new(format!("t{}/xi{}", c.t, c.xi_index), c.ratio, None, r.verdict))
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

// --------------------------------------------------------------- lyapunov

/// Random start points: `spread` times a unit Gaussian vector.
fn random_starts(ctx: &Context, count: usize, spread: f64, key: StreamKey) -> Vec<Vec<f64>> {
    let g = LevyTriplet::brownian(ctx.space.dim());
    let mut rng = key.stream();
    (0..count).map(|_| g.sample_increment(spread * spread, &mut rng)).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LyapunovBoundsOp {
    kind: NormKind,
    starts: usize,
    #[serde(default = "one")]
    spread: f64,
    #[serde(default)]
    alpha: Option<AlphaSpec>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

fn one() -> f64 {
    1.0
}

impl Operation for LyapunovBoundsOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let norm = ctx.norm(Some(self.kind), &self.alpha)?;
        let zs = random_starts(ctx, self.starts, self.spread, plan.key.derive(0xA11CE));
        let mut rows = Vec::new();
        let constant = match self.kind {
            NormKind::Gaussian => lyapunov::gaussian_mass_estimate(&norm, &plan.derive(1))?,
            NormKind::Levy => {
                McEstimate::exact(lyapunov::moment_bound(&norm, &tr, &lyapunov::default_moment_grid(), &plan.derive(2))?.c_tilde)
            }
        };
        for (i, z) in zs.iter().enumerate() {
            let q2 = norm.q_sq(z);
            let v0 = lyapunov::v0_estimate(&norm, &tr, z, &plan.derive(100 + i as u64))?;
            let (lo, hi) = match self.kind {
                NormKind::Gaussian => (q2, 2.0 * q2 + 2.0 * constant.mean),
                NormKind::Levy => (0.5 * q2 - 3.0 * constant.mean, 2.0 * q2 + 6.0 * constant.mean),
            };
            rows.push(Row::new(format!("z{i}/lower"), v0, Some(lo), v0.verdict_ge(lo, 0.0)));
            let upper = match self.kind {
                NormKind::Gaussian => v0.minus_independent(&constant.scaled(2.0)).verdict_le(2.0 * q2, 0.0),
                NormKind::Levy => v0.verdict_le(hi, 0.0),
            };
            rows.push(Row::new(format!("z{i}/upper"), v0, Some(hi), upper));
        }
        Ok(Outcome::from_rows(rows).with_details(serde_json::json!({ "constant": constant })))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupermedianOp {
    t: f64,
    starts: usize,
    #[serde(default = "one")]
    spread: f64,
    #[serde(default)]
    kind: Option<NormKind>,
}

impl Operation for SupermedianOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let norm = ctx.norm(self.kind.or(Some(NormKind::Gaussian)), &None)?;
        let tr = LevyTriplet::brownian(ctx.space.dim());
        let zs = random_starts(ctx, self.starts, self.spread, plan.key.derive(0xA11CE));
        let r = lyapunov::supermedian_check(&norm, &tr, self.t, &zs, plan)?;
        let rows =
            r.iter().enumerate().map(|(i, x)| Row::new(format!("z{i}"), x.estimate, Some(x.q_sq), x.verdict)).collect();
        Ok(Outcome::from_rows(rows))
    }
}

// -------------------------------------------------------------- operators

/// `cos(z_1 + ... + z_n)`, a bounded cylinder function.
pub fn cosine_cylinder(n: usize) -> Cylinder {
    Cylinder::new(n, 1.0, &format!("cos-sum{n}"), move |z| z[..n].iter().sum::<f64>().cos())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionIdentityOp {
    ns: Vec<usize>,
    alphas: Vec<f64>,
    #[serde(default)]
    start: Vec<f64>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for ProjectionIdentityOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let z = ctx.pad(&self.start)?;
        let mut rows = Vec::new();
        for (i, &n) in self.ns.iter().enumerate() {
            let f = cosine_cylinder(n);
            for (j, &a) in self.alphas.iter().enumerate() {
                let r = operators::projection_identity_check(&tr, &f, a, &z, &plan.derive((i * 100 + j) as u64))?;
                rows.push(Row::new(format!("n{n}/alpha{a}"), r.full, Some(r.projected.mean), r.verdict));
            }
        }
        Ok(Outcome::from_rows(rows))
    }
}

// -------------------------------------------------------------- potential

fn path_for(ctx: &Context, beta: f64) -> PathConfig {
    PathConfig { horizon: 50.0 / beta, dt: ctx.path.dt.min(50.0 / beta), ..ctx.path }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionInequalityOp {
    targets: Vec<TargetSpec>,
    n: usize,
    beta: f64,
    #[serde(default)]
    start: Vec<f64>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for ProjectionInequalityOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let z = ctx.pad(&self.start)?;
        let cfg = path_for(ctx, self.beta);
        let mut rows = Vec::new();
        for (i, t) in self.targets.iter().enumerate() {
            let m = ctx.target(t)?;
            let r = potential::projection_inequality_check(
                &tr,
                &Constant(1.0),
                &m,
                self.beta,
                &z,
                self.n,
                &cfg,
                &plan.derive(i as u64),
            )?;
            rows.push(Row::new(format!("M{i}"), r.full, Some(r.projected.mean), r.verdict));
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityTrivialOp {
    cloud: PointCloud,
    beta: f64,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for CapacityTrivialOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let lam = ctx.cloud(&self.cloud)?;
        let cfg = path_for(ctx, self.beta);
        let empty = potential::capacity(&tr, &lam, &TargetSet::Empty, self.beta, &PotentialSpec::Unit, &cfg.with_horizon(cfg.dt), plan)?;
        let whole = potential::capacity(&tr, &lam, &TargetSet::Whole, self.beta, &PotentialSpec::Unit, &cfg, plan)?;
        let exact = lam.total() / self.beta;
        Ok(Outcome::from_rows(vec![
            Row::new("empty", empty, Some(0.0), Verdict::from_bool(empty.mean == 0.0)),
            Row::new("whole", whole, Some(exact), Verdict::from_bool((whole.mean - exact).abs() <= 1e-12 * exact)),
        ]))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityTightnessOp {
    cloud: PointCloud,
    beta: f64,
    levels: Vec<f64>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for CapacityTightnessOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let lam = ctx.cloud(&self.cloud)?;
        let norm = Arc::new(ctx.norm(None, &None)?);
        let sets: Vec<TargetSet> = self
            .levels
            .iter()
            .map(|&c| Ok(TargetSet::qx_level(norm.clone(), c)?.complement()))
            .collect::<Result<_>>()?;
        let refs: Vec<&TargetSet> = sets.iter().collect();
        let k = sets.len();
        let combos: Vec<Vec<f64>> = (0..k.saturating_sub(1))
            .map(|j| {
                let mut c = vec![0.0; k];
                c[j] = 1.0;
                c[j + 1] = -1.0;
                c
            })
            .collect();
        let (est, diffs) = potential::capacity_family(
            &tr,
            &lam,
            &refs,
            self.beta,
            &PotentialSpec::Unit,
            &path_for(ctx, self.beta),
            plan,
            &combos,
        )?;
        let mut rows = Vec::new();
        for (c, e) in self.levels.iter().zip(&est) {
            rows.push(Row::new(format!("level{c}"), *e, None, Verdict::Pass));
        }
        for (j, d) in diffs.iter().enumerate() {
            rows.push(Row::new(format!("drop{}", j + 1), *d, Some(0.0), positive_verdict(d)));
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BalayageTest {
    set: TargetSpec,
    inside: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BalayageOp {
    nu: PointCloud,
    target: TargetSpec,
    beta: f64,
    tests: Vec<BalayageTest>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for BalayageOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let nu = ctx.cloud(&self.nu)?;
        let m = ctx.target(&self.target)?;
        let fs: Vec<(TargetSet, bool)> =
            self.tests.iter().map(|t| Ok((ctx.target(&t.set)?, t.inside))).collect::<Result<_>>()?;
        let r = potential::balayage_check(&tr, &nu, &m, self.beta, &fs, &path_for(ctx, self.beta), plan)?;
        let rows = r
            .rows
            .iter()
            .map(|x| Row::new(format!("F{}", x.index), x.swept, Some(x.original.mean), x.verdict))
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DominationOp {
    nu: PointCloud,
    beta: f64,
    probes_in: Vec<TargetSpec>,
    probes_out: Vec<TargetSpec>,
    /// `μ = ν_M` for this `M`.
    #[serde(default)]
    sweep_onto: Option<TargetSpec>,
    /// `μ = c ν` otherwise.
    #[serde(default)]
    mu_scale: Option<f64>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for DominationOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let nu = ctx.cloud(&self.nu)?;
        let mu = match (&self.sweep_onto, self.mu_scale) {
            (Some(t), None) => Measure::Swept { nu: nu.clone(), target: ctx.target(t)? },
            (None, Some(c)) => Measure::Cloud(nu.scaled(c)),
            (None, None) => Measure::Cloud(nu.clone()),
            _ => return Err(Error::arg("give at most one of sweep_onto and mu_scale")),
        };
        let pin: Vec<TargetSet> = self.probes_in.iter().map(|t| ctx.target(t)).collect::<Result<_>>()?;
        let pout: Vec<TargetSet> = self.probes_out.iter().map(|t| ctx.target(t)).collect::<Result<_>>()?;
        let r = potential::domination_check(
            &tr,
            &mu,
            &Measure::Cloud(nu),
            self.beta,
            &pin,
            &pout,
            &path_for(ctx, self.beta),
            plan,
        )?;
        let rows = r
            .rows
            .iter()
            .map(|x| {
                let tag = if x.in_g { "in" } else { "out" };
                Row::new(format!("probe{}/{tag}", x.probe), x.mu, Some(x.nu.mean), x.verdict)
            })
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionConvergenceOp {
    t: f64,
    ns: Vec<usize>,
    /// "poisson" selects the sine-basis Poisson example on sine weights.
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for ProjectionConvergenceOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let (space, tr) = match self.model.as_deref() {
            None => (ctx.space.clone(), ctx.triplet(&self.triplet)?),
            Some("poisson") => (SpaceModel::sine(ctx.space.dim()), LevyTriplet::poisson_example(ctx.space.dim())),
            Some(other) => return Err(Error::arg(format!("unknown model '{other}'"))),
        };
        let r = potential::projection_convergence(&space, &tr, self.t, &self.ns, plan)?;
        let mut rows: Vec<Row> =
            r.rows.iter().map(|x| Row::new(format!("n{}", x.n), x.estimate, x.target, x.verdict)).collect();
        if let Some(last) = rows.last_mut() {
            last.verdict = last.verdict.and(r.decreasing);
        }
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolarityPointOp {
    y: Vec<f64>,
    radii: Vec<f64>,
    starts: Vec<Vec<f64>>,
    n: usize,
    #[serde(default = "one")]
    beta: f64,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for PolarityPointOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let starts: Vec<Vec<f64>> = self.starts.iter().map(|s| ctx.pad(s)).collect::<Result<_>>()?;
        let r = potential::polarity_diagnostic_point(
            &ctx.space,
            &tr,
            &ctx.pad(&self.y)?,
            &self.radii,
            &starts,
            self.n,
            self.beta,
            &path_for(ctx, self.beta),
            plan,
        )?;
        let rows = r
            .intercepts
            .iter()
            .enumerate()
            .map(|(i, e)| Row::new(format!("start{i}/intercept"), *e, Some(0.0), r.verdict))
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolarityHOp {
    rhos: Vec<f64>,
    starts: Vec<Vec<f64>>,
    t: f64,
    #[serde(default = "one")]
    beta: f64,
    #[serde(default)]
    triplet: Option<TripletSpec>,
}

impl Operation for PolarityHOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let tr = ctx.triplet(&self.triplet)?;
        let starts: Vec<Vec<f64>> = self.starts.iter().map(|s| ctx.pad(s)).collect::<Result<_>>()?;
        let r =
            potential::polarity_diagnostic_h(&tr, &self.rhos, &starts, self.t, self.beta, &path_for(ctx, self.beta), plan)?;
        let rows = r
            .structural
            .iter()
            .enumerate()
            .map(|(i, (e, target, v))| Row::new(format!("start{i}/second-moment"), *e, Some(*target), *v))
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

// -------------------------------------------------------------- dirichlet

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    EBall { #[serde(default)] center: Vec<f64>, radius: f64 },
    Slab { xi: Vec<f64>, a: f64, b: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl DomainSpec {
    fn build(&self, ctx: &Context) -> Result<Domain> {
        let dim = ctx.space.dim();
        match self {
            DomainSpec::EBall { center, radius } => Domain::e_ball(&ctx.space, pad(center, dim)?, *radius),
            DomainSpec::Slab { xi, a, b } => Domain::slab(&ctx.space, pad(xi, dim)?, *a, *b),
            DomainSpec::Box { lower, upper } => {
                let mut lo = lower.clone();
                let mut up = upper.clone();
                lo.resize(dim, f64::NEG_INFINITY);
                up.resize(dim, f64::INFINITY);
                Domain::coordinate_box(&ctx.space, lo, up)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Constant { c: f64 },
    Linear { xi: Vec<f64>, sup: f64 },
    /// `1{<ξ, z> ≥ c}`: discontinuous where the hyperplane meets `∂V`.
    HalfspaceIndicator { xi: Vec<f64>, c: f64 },
}

impl DataSpec {
    fn build(&self, ctx: &Context) -> Result<BoundaryData> {
        let dim = ctx.space.dim();
        match self {
            DataSpec::Constant { c } => {
                BoundaryData::new(Arc::new(Constant(*c)), c.abs().max(f64::MIN_POSITIVE), DataClass::BoundedContinuous)
            }
            DataSpec::Linear { xi, sup } => {
                BoundaryData::new(Arc::new(Linear { xi: pad(xi, dim)? }), *sup, DataClass::BoundedContinuous)
            }
            DataSpec::HalfspaceIndicator { xi, c } => {
                BoundaryData::new(Arc::new(HalfspaceIndicator { xi: pad(xi, dim)?, c: *c }), 1.0, DataClass::BoundedBorel)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletSlabOp {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    points: Vec<f64>,
}

impl Operation for DirichletSlabOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let dim = ctx.space.dim();
        let (a, b, fa, fb) = (self.a, self.b, self.fa, self.fb);
        let d = Domain::slab(&ctx.space, pad(&[1.0], dim)?, a, b)?;
        let mid = 0.5 * (a + b);
        let sup = fa.abs().max(fb.abs()).max(f64::MIN_POSITIVE);
        let f = Cylinder::new(1, sup, "slab-data", move |z| if z[0] <= mid { fa } else { fb });
        let tr = LevyTriplet::brownian(dim);
        let mut rows = Vec::new();
        for (i, &x) in self.points.iter().enumerate() {
            let z = pad(&[x], dim)?;
            let s = dirichlet::solve(&tr, &d, &f, &z, false, &ctx.path, &plan.derive(i as u64))?;
            let exact = fa * (b - x) / (b - a) + fb * (x - a) / (b - a);
            rows.push(Row::new(format!("x{x}"), s.estimate, Some(exact), s.estimate.verdict(exact, 0.0)));
        }
        Ok(Outcome::from_rows(rows))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletBallOp {
    xi: Vec<f64>,
    #[serde(default)]
    center: Vec<f64>,
    radius: f64,
}

impl Operation for DirichletBallOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let dim = ctx.space.dim();
        let c = pad(&self.center, dim)?;
        let xi = pad(&self.xi, dim)?;
        let d = Domain::e_ball(&ctx.space, c.clone(), self.radius)?;
        let f = BoundaryData::new(Arc::new(Linear { xi: xi.clone() }), 1e6, DataClass::BoundedContinuous)?;
        let tr = LevyTriplet::brownian(dim);
        let s = dirichlet::solve(&tr, &d, &f, &c, true, &ctx.path, plan)?;
        let exact = dot(&xi, &c);
        Ok(Outcome::from_rows(vec![Row::new("center", s.estimate, Some(exact), s.estimate.verdict(exact, 1e-9))]))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HarmonicityOp {
    domain: DomainSpec,
    data: DataSpec,
    x: Vec<f64>,
    radii: Vec<f64>,
}

impl Operation for HarmonicityOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let d = self.domain.build(ctx)?;
        let f = self.data.build(ctx)?;
        let tr = LevyTriplet::brownian(ctx.space.dim());
        let rows = dirichlet::harmonicity_check(&tr, &d, &f, &ctx.pad(&self.x)?, &self.radii, &ctx.path, plan)?;
        Ok(Outcome::from_rows(
            rows.iter().map(|r| Row::new(format!("r{}", r.radius), r.two_stage, Some(r.direct.mean), r.verdict)).collect(),
        ))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuityOp {
    domain: DomainSpec,
    data: DataSpec,
    y: Vec<f64>,
    x0: Vec<f64>,
    #[serde(default)]
    modulus: f64,
}

impl Operation for ContinuityOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let d = self.domain.build(ctx)?;
        let f = self.data.build(ctx)?;
        let tr = LevyTriplet::brownian(ctx.space.dim());
        let r = dirichlet::boundary_continuity_check(
            &tr,
            &d,
            &f,
            &ctx.pad(&self.y)?,
            &ctx.pad(&self.x0)?,
            self.modulus,
            &ctx.path,
            plan,
        )?;
        let rows = r.rows.iter().map(|x| Row::new(format!("k{}", x.k), x.estimate, Some(r.target), Verdict::Pass)).collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproachSpec {
    y: Vec<f64>,
    x0: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlledOp {
    domain: DomainSpec,
    data: DataSpec,
    sequences: Vec<ApproachSpec>,
    tol: f64,
}

impl Operation for ControlledOp {
    fn run(&self, ctx: &Context, plan: &McPlan) -> Result<Outcome> {
        let d = self.domain.build(ctx)?;
        let f = self.data.build(ctx)?;
        let tr = LevyTriplet::brownian(ctx.space.dim());
        let seqs: Vec<Approach> =
            self.sequences.iter().map(|s| Ok(Approach::ray(ctx.pad(&s.y)?, &ctx.pad(&s.x0)?))).collect::<Result<_>>()?;
        let h = |i: usize, x: &[f64]| {
            Ok(dirichlet::solve(&tr, &d, &f, x, false, &ctx.path, &plan.derive(i as u64))?.estimate)
        };
        let r = dirichlet::controlled_convergence_check(&d, &h, &f, &|_| 0.0, &seqs, self.tol)?;
        let rows = r
            .records
            .iter()
            .map(|x| Row::new(format!("seq{}/{:?}", x.sequence, x.branch), *x.h.last().expect("h"), Some(f.eval(&x.y)), x.verdict))
            .collect();
        Ok(Outcome { rows, verdict: r.verdict, details: serde_json::Value::Null }.with_details(&r))
    }
}

// ----------------------------------------------------------------- runner

pub struct Job {
    pub spec: ExperimentSpec,
    pub samples: u64,
    pub confidence: f64,
    op: Arc<dyn Operation>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub samples_scale: f64,
    pub filter: Option<String>,
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, samples_scale: 1.0, filter: None, timings: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub op: String,
    pub param_hash: String,
    pub samples: u64,
    pub expect: Expect,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    /// The experiment met its expectation; `None` when inconclusive.
    pub as_expected: Option<bool>,
    pub rows: Vec<Row>,
    pub details: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub experiments: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub version: &'static str,
    pub rng: &'static str,
    pub csv_schema: u32,
    pub spec_hash: String,
    pub seed: u64,
    pub samples_scale: f64,
    pub experiments: Vec<ExperimentRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl RunRecord {
    pub fn exit_code(&self) -> i32 {
        if self.summary.failed > 0 {
            EXIT_FAILURES
        } else {
            EXIT_OK
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for e in &self.experiments {
            let secs = e.seconds.map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
            if let Some(err) = &e.error {
                let _ = writeln!(out, "{},{},{},,,0,,error,{}", csv_field(&e.name), e.op, e.param_hash, secs);
                let _ = err;
                continue;
            }
            for r in &e.rows {
                let target = r.target.map_or_else(String::new, |t| t.to_string());
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(&format!("{}/{}", e.name, r.label)),
                    e.op,
                    e.param_hash,
                    r.estimate.mean,
                    r.estimate.stderr,
                    r.estimate.n,
                    target,
                    r.verdict,
                    secs
                );
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join("summary.csv");
        let json = dir.join("run.json");
        std::fs::write(&csv, self.to_csv())?;
        let body = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&json, body)?;
        Ok((csv, json))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn param_hash(e: &ExperimentSpec, samples: u64, confidence: f64, seed: u64) -> String {
    let v = serde_json::json!({
        "op": e.op,
        "params": e.params,
        "samples": samples,
        "confidence": confidence,
        "seed": seed,
    });
    hex(&Sha256::digest(v.to_string().as_bytes()))[..16].to_string()
}

/// Seed from the options, then the environment, then the config.
pub fn effective_seed(cfg: &SuiteConfig, opts: &RunOptions) -> Result<u64> {
    if let Some(s) = opts.seed {
        return Ok(s);
    }
    match std::env::var(ENV_SEED) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{ENV_SEED} is not an integer: '{v}'"))),
        Err(_) => Ok(cfg.seed),
    }
}

/// Runs every selected experiment. Estimator errors are recorded per
/// experiment; configuration errors abort before anything runs.
pub fn run_suite(cfg: &SuiteConfig, text: &str, opts: &RunOptions) -> Result<RunRecord> {
    if !(opts.samples_scale > 0.0 && opts.samples_scale.is_finite()) {
        return Err(Error::Config("samples scale must be positive".into()));
    }
    let pattern = opts
        .filter
        .as_deref()
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| Error::Config(format!("filter: {e}")))?;
    let seed = effective_seed(cfg, opts)?;
    let jobs = cfg.validate()?;
    let ctx = Context::new(cfg)?;
    let start = Instant::now();
    let selected: Vec<&Job> =
        jobs.iter().filter(|j| pattern.as_ref().is_none_or(|p| p.matches(&j.spec.name))).collect();
    let experiments: Vec<ExperimentRecord> = selected
        .par_iter()
        .map(|job| {
            let samples = ((job.samples as f64 * opts.samples_scale).round() as u64).max(2);
            let plan = McPlan::new(samples, StreamKey::new(seed).labeled(&job.spec.name)).with_confidence(job.confidence);
            let hash = param_hash(&job.spec, samples, job.confidence, seed);
            let t0 = Instant::now();
            let result = job.op.run(&ctx, &plan);
            let seconds = opts.timings.then(|| t0.elapsed().as_secs_f64());
            let (verdict, error, rows, details) = match result {
                Ok(o) => (Some(o.verdict), None, o.rows, o.details),
                Err(e) => (None, Some(e.to_string()), Vec::new(), serde_json::Value::Null),
            };
            let as_expected = match (job.spec.expect, verdict) {
                (Expect::Error, v) => Some(v.is_none()),
                (_, None) => Some(false),
                (_, Some(Verdict::Inconclusive)) => None,
                (Expect::Pass, Some(v)) => Some(v == Verdict::Pass),
                (Expect::Fail, Some(v)) => Some(v == Verdict::Fail),
            };
            ExperimentRecord {
                name: job.spec.name.clone(),
                op: job.spec.op.clone(),
                param_hash: hash,
                samples,
                expect: job.spec.expect,
                verdict,
                error,
                as_expected,
                rows,
                details,
                seconds,
            }
        })
        .collect();
    let mut summary = Summary { experiments: experiments.len(), ..Summary::default() };
    for e in &experiments {
        match e.as_expected {
            Some(true) => summary.passed += 1,
            Some(false) => summary.failed += 1,
            None => summary.inconclusive += 1,
        }
    }
    Ok(RunRecord {
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        csv_schema: CSV_SCHEMA_VERSION,
        spec_hash: hex(&Sha256::digest(text.as_bytes())),
        seed,
        samples_scale: opts.samples_scale,
        experiments,
        summary,
        wall_seconds: opts.timings.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Output directory from the argument, then the environment, then `results`.
pub fn effective_out(arg: Option<&Path>) -> PathBuf {
    arg.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(ENV_OUT).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregateTable {
    pub verdicts: Vec<Verdict>,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

/// Per-row three-valued verdicts of estimates against targets.
pub fn verdict_aggregate(estimates: &[McEstimate], targets: &[f64], tolerances: &[f64]) -> Result<AggregateTable> {
    if estimates.len() != targets.len() || estimates.len() != tolerances.len() {
        return Err(Error::arg("estimates, targets and tolerances must have equal lengths"));
    }
    let verdicts: Vec<Verdict> =
        estimates.iter().zip(targets).zip(tolerances).map(|((e, t), a)| e.verdict(*t, *a)).collect();
    let count = |v: Verdict| verdicts.iter().filter(|x| **x == v).count();
    Ok(AggregateTable {
        passed: count(Verdict::Pass),
        failed: count(Verdict::Fail),
        inconclusive: count(Verdict::Inconclusive),
        verdicts,
    })
}
