//! Acceptance battery: one line per criterion, exit status 1 if any fails.
//!
//! Run with `cargo test -p levylab --test acceptance`.

use std::sync::Arc;
use std::time::Instant;

use levylab::dirichlet::{self, Approach, BoundaryData, Branch, DataClass, Domain};
use levylab::harness::{self, RunOptions, SuiteConfig};
use levylab::lyapunov::{self, LyapunovNorm, NormKind};
use levylab::measures::{self, JumpMeasure, LevyTriplet};
use levylab::operators::{self, Constant, Cylinder, HalfspaceIndicator, Linear};
use levylab::potential::{self, Measure, PathConfig, PointCloud, PotentialSpec, TargetSet};
use levylab::space::{dot, SpaceModel};
use levylab::stats::{confidence_for_sigmas, estimate, z_value};
use levylab::{McPlan, Result, StreamKey, Verdict};
use rand::Rng;

const DIM: usize = 32;
const SEED: u64 = 0x5eed_2024;
const SIGMAS: f64 = 3.0;

const VARIANCE_SAMPLES: u64 = 100_000;
const VARIANCE_MIN_PASS: usize = 16;
const LYAPUNOV_SAMPLES: u64 = 100_000;
const LYAPUNOV_STARTS: usize = 20;
const MOMENT_SAMPLES: u64 = 100_000;
const PROJECTION_SAMPLES: u64 = 50_000;
const REDUCED_SAMPLES: u64 = 5_000;
const DIRICHLET_SAMPLES: u64 = 10_000;
const CONTROL_SAMPLES: u64 = 4_000;
const CONTROL_TOL: f64 = 0.05;
const CONTROL_FIXTURES: usize = 10;
const POTENTIAL_SAMPLES: u64 = 5_000;
const TAIL_SAMPLES: u64 = 20_000;
const SUITE_SCALE: f64 = 0.05;

fn plan(samples: u64, label: &str) -> McPlan {
    McPlan::new(samples, StreamKey::new(SEED).labeled(label)).with_confidence(confidence_for_sigmas(SIGMAS))
}

fn space() -> SpaceModel {
    SpaceModel::geometric(DIM)
}

fn e(k: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    for &i in k {
        v[i] = 1.0;
    }
    v
}

fn padded(v: &[f64]) -> Vec<f64> {
    measures::pad(v, DIM).unwrap()
}

fn random_starts(count: usize, label: &str) -> Vec<Vec<f64>> {
    let g = LevyTriplet::brownian(DIM);
    let mut rng = StreamKey::new(SEED).labeled(label).stream();
    (0..count).map(|_| g.sample_increment(1.0, &mut rng)).collect()
}

fn tally(vs: &[Verdict]) -> (usize, usize) {
    (vs.iter().filter(|v| **v == Verdict::Pass).count(), vs.len())
}

type Check = Result<(bool, String)>;

fn variance_identity() -> Check {
    let tr = LevyTriplet::brownian(DIM);
    let starts = [vec![0.0; DIM], random_starts(1, "variance-start").remove(0)];
    let mut verdicts = Vec::new();
    for (i, xi) in [e(&[0]), e(&[2]), e(&[0, 1])].iter().enumerate() {
        for &t in &[0.1, 1.0, 5.0] {
            for (j, z) in starts.iter().enumerate() {
                let a = dot(xi, z);
                let est = estimate(&plan(VARIANCE_SAMPLES, &format!("var/{i}/{t}/{j}")), |rng| {
                    (a + dot(xi, &tr.sample_increment(t, rng))).powi(2)
                })?;
                verdicts.push(est.verdict(t * dot(xi, xi) + a * a, 0.0));
            }
        }
    }
    let (p, n) = tally(&verdicts);
    Ok((p >= VARIANCE_MIN_PASS, format!("{p}/{n} cells within 3σ (need ≥ {VARIANCE_MIN_PASS})")))
}

fn lyapunov_gaussian() -> Check {
    let s = space();
    let norm = LyapunovNorm::canonical(&s, NormKind::Gaussian)?;
    let tr = LevyTriplet::brownian(DIM);
    let mass = lyapunov::gaussian_mass_estimate(&norm, &plan(LYAPUNOV_SAMPLES, "gauss-mass"))?;
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for (i, z) in random_starts(LYAPUNOV_STARTS, "gauss-starts").iter().enumerate() {
        let q2 = norm.q_sq(z);
        let v0 = lyapunov::v0_estimate(&norm, &tr, z, &plan(LYAPUNOV_SAMPLES, &format!("gauss-v0/{i}")))?;
        lower.push(v0.verdict_ge(q2, 0.0));
        upper.push(v0.minus_independent(&mass.scaled(2.0)).verdict_le(2.0 * q2, 0.0));
    }
    let (pl, n) = tally(&lower);
    let (pu, _) = tally(&upper);
    Ok((pl == n && pu == n, format!("lower {pl}/{n}, upper {pu}/{n}; M̂ = {:.4} ± {:.4}", mass.mean, mass.stderr)))
}

fn lyapunov_levy() -> Check {
    let s = space();
    let norm = LyapunovNorm::canonical(&s, NormKind::Levy)?;
    let jumps = JumpMeasure::point_mass(1.0, vec![padded(&[0.5]), padded(&[0.0, -0.5])], vec![1.0, 1.0])?;
    let tr = LevyTriplet::new(vec![0.0; DIM], vec![1.0; DIM], Some(jumps))?;
    let c = lyapunov::moment_bound(&norm, &tr, &lyapunov::default_moment_grid(), &plan(MOMENT_SAMPLES, "levy-c"))?.c_tilde;
    let mut verdicts = Vec::new();
    for (i, z) in random_starts(LYAPUNOV_STARTS, "levy-starts").iter().enumerate() {
        let q2 = norm.q_sq(z);
        let v0 = lyapunov::v0_estimate(&norm, &tr, z, &plan(LYAPUNOV_SAMPLES, &format!("levy-v0/{i}")))?;
        verdicts.push(v0.verdict_ge(0.5 * q2 - 3.0 * c, 0.0).and(v0.verdict_le(2.0 * q2 + 6.0 * c, 0.0)));
    }
    let (p, n) = tally(&verdicts);
    Ok((p == n, format!("sandwich holds at {p}/{n} starts; C̃ = {c:.4}")))
}

fn moment_formulas() -> Check {
    let s = space();
    let jumps = JumpMeasure::point_mass(2.0, vec![padded(&[0.5, 0.0]), padded(&[0.0, -0.3, 0.2])], vec![0.6, 0.4])?;
    let tr = LevyTriplet::new(padded(&[0.2, -0.1]), vec![1.0; DIM], Some(jumps))?;
    let mut lk = Vec::new();
    for (i, xi) in [padded(&[1.0]), padded(&[0.0, 1.0]), padded(&[1.0, -0.5, 0.25])].iter().enumerate() {
        for &t in &[0.1, 1.0, 3.0] {
            let target = tr.second_moment_lk(&s, xi, t)?;
            let est = measures::pairing_second_moment(&tr, xi, t, &plan(MOMENT_SAMPLES, &format!("lk/{i}/{t}")))?;
            lk.push(est.verdict(target, 0.0));
        }
    }
    let pois = LevyTriplet::poisson_example(DIM);
    let mut ex = Vec::new();
    for (i, xi) in [padded(&[1.0]), padded(&[0.0, 1.0]), padded(&[0.5, -0.5, 0.25])].iter().enumerate() {
        let target = measures::poisson_example_target(xi, 1.0);
        let est = measures::pairing_second_moment(&pois, xi, 1.0, &plan(MOMENT_SAMPLES, &format!("poisson/{i}")))?;
        ex.push(est.verdict(target, 0.0));
    }
    let (a, n) = tally(&lk);
    let (b, m) = tally(&ex);
    Ok((a == n && b == m, format!("closed form {a}/{n}, sine-basis example {b}/{m}")))
}

fn cosine_cylinder(n: usize) -> Cylinder {
    Cylinder::new(n, 1.0, "cos-sum", move |z| z[..n].iter().sum::<f64>().cos())
}

fn projection_consistency() -> Check {
    let tr = LevyTriplet::brownian(DIM);
    let z = padded(&[0.3, -0.2, 0.1, 0.5]);
    let mut verdicts = Vec::new();
    for n in 1..=3 {
        for &a in &[0.5, 1.0, 2.0] {
            let r = operators::projection_identity_check(
                &tr,
                &cosine_cylinder(n),
                a,
                &z,
                &plan(PROJECTION_SAMPLES, &format!("proj/{n}/{a}")),
            )?;
            verdicts.push(r.verdict);
        }
    }
    let (p, n) = tally(&verdicts);
    Ok((p == n, format!("{p}/{n} (n, α) cells agree within 3σ")))
}

fn reduced_projection() -> Check {
    let s = space();
    let tr = LevyTriplet::brownian(DIM);
    let cfg = PathConfig::for_beta(1.0).with_dt(0.05);
    let targets = [
        TargetSet::e_ball(&s, padded(&[1.0, 0.5]), 0.6)?,
        TargetSet::halfspace(padded(&[1.0, 0.0, 1.0]), 1.0)?,
        TargetSet::h_ball(padded(&[1.5, 0.0, 0.5]), 1.0)?,
        TargetSet::coordinate_box(
            [vec![0.8, -1.0], vec![f64::NEG_INFINITY; DIM - 2]].concat(),
            [vec![2.0, 1.0], vec![f64::INFINITY; DIM - 2]].concat(),
        )?,
        TargetSet::e_ball(&s, vec![0.0; DIM], 1.5)?.complement(),
    ];
    let mut verdicts = Vec::new();
    for (i, m) in targets.iter().enumerate() {
        let r = potential::projection_inequality_check(
            &tr,
            &Constant(1.0),
            m,
            1.0,
            &vec![0.0; DIM],
            2,
            &cfg,
            &plan(REDUCED_SAMPLES, &format!("reduced/{i}")),
        )?;
        verdicts.push(r.verdict);
    }
    let (p, n) = tally(&verdicts);
    Ok((p == n, format!("{p}/{n} target sets satisfy the inequality")))
}

fn slab(s: &SpaceModel, a: f64, b: f64) -> Result<Domain> {
    Domain::slab(s, e(&[0]), a, b)
}

fn dirichlet_oracles() -> Check {
    let s = space();
    let tr = LevyTriplet::brownian(DIM);
    let cfg = PathConfig::default().with_dt(0.05);
    let mut notes = Vec::new();
    let mut ok = true;

    let (a, b) = (-1.0, 2.0);
    let d = slab(&s, a, b)?;
    let f = Cylinder::new(1, 1.0, "ruin", move |z| if z[0] <= 0.5 { 0.0 } else { 1.0 });
    let mut ruin = Vec::new();
    for (i, &x) in [-0.5, 0.0, 0.5, 1.0, 1.5].iter().enumerate() {
        let r = dirichlet::solve(&tr, &d, &f, &padded(&[x]), false, &cfg, &plan(DIRICHLET_SAMPLES, &format!("ruin/{i}")))?;
        ruin.push(r.estimate.verdict((x - a) / (b - a), 0.0));
    }
    let (p, n) = tally(&ruin);
    ok &= p == n;
    notes.push(format!("slab {p}/{n}"));

    let c = padded(&[0.2, 0.1]);
    let xi = padded(&[1.0, 0.5]);
    let ball = Domain::e_ball(&s, c.clone(), 1.0)?;
    let lin = BoundaryData::new(Arc::new(Linear { xi: xi.clone() }), 1e6, DataClass::BoundedContinuous)?;
    let r = dirichlet::solve(&tr, &ball, &lin, &c, true, &cfg, &plan(DIRICHLET_SAMPLES, "ball"))?;
    let v = r.estimate.verdict(dot(&xi, &c), 1e-9);
    ok &= v == Verdict::Pass;
    notes.push(format!("ball {v}"));

    let unit = slab(&s, -1.0, 1.0)?;
    let ind = BoundaryData::new(Arc::new(HalfspaceIndicator { xi: e(&[0]), c: 0.0 }), 1.0, DataClass::BoundedBorel)?;
    let rows = dirichlet::harmonicity_check(&tr, &unit, &ind, &vec![0.0; DIM], &[0.1, 0.2, 0.4], &cfg, &plan(DIRICHLET_SAMPLES, "harm"))?;
    let (p, n) = tally(&rows.iter().map(|r| r.verdict).collect::<Vec<_>>());
    ok &= p == n;
    notes.push(format!("harmonicity {p}/{n}"));

    let lin2 = BoundaryData::new(Arc::new(Linear { xi: e(&[1]) }), 100.0, DataClass::BoundedContinuous)?;
    let cont = dirichlet::boundary_continuity_check(
        &tr, &unit, &lin2, &padded(&[1.0, 0.5]), &padded(&[0.0, 0.5]), 1.0, &cfg, &plan(CONTROL_SAMPLES, "cont"),
    )?;
    let disc_f = BoundaryData::new(Arc::new(HalfspaceIndicator { xi: e(&[1]), c: 0.0 }), 1.0, DataClass::BoundedBorel)?;
    let disc = dirichlet::boundary_continuity_check(
        &tr, &unit, &disc_f, &padded(&[1.0, 0.0]), &vec![0.0; DIM], 1.0, &cfg, &plan(CONTROL_SAMPLES, "disc"),
    )?;
    ok &= cont.verdict == Verdict::Pass && disc.verdict == Verdict::Fail;
    notes.push(format!("continuity {} / discontinuous control {}", cont.verdict, disc.verdict));
    Ok((ok, notes.join(", ")))
}

fn controlled_convergence() -> Check {
    let s = space();
    let tr = LevyTriplet::brownian(DIM);
    let cfg = PathConfig::default().with_dt(0.05);
    let unit = slab(&s, -1.0, 1.0)?;
    let mut notes = Vec::new();
    let mut ok = true;

    let lin = BoundaryData::new(Arc::new(Linear { xi: e(&[1]) }), 100.0, DataClass::BoundedContinuous)?;
    let h_lin = |i: usize, x: &[f64]| {
        Ok(dirichlet::solve(&tr, &unit, &lin, x, false, &cfg, &plan(CONTROL_SAMPLES, &format!("c-lin/{i}")))?.estimate)
    };
    let seqs = vec![
        Approach::ray(padded(&[1.0, 0.5]), &padded(&[0.0, 0.5])),
        Approach::ray(padded(&[-1.0, -0.3]), &padded(&[0.0, -0.3])),
    ];
    let r = dirichlet::controlled_convergence_check(&unit, &h_lin, &lin, &|_| 0.0, &seqs, CONTROL_TOL)?;
    let classical = r.verdict == Verdict::Pass && r.records.iter().all(|x| x.branch == Branch::C1);
    ok &= classical;
    notes.push(format!("k = 0: {}", r.verdict));

    // Cap data 1{z_2 ≥ 0} on the slab faces; the control is the harmonic
    // extension of a tent over the cap edge.
    let cap = BoundaryData::new(Arc::new(HalfspaceIndicator { xi: e(&[1]), c: 0.0 }), 1.0, DataClass::BoundedBorel)?;
    let tent = Cylinder::new(2, 1.0, "edge-tent", |z| (1.0 - z[1].abs() / 0.25).max(0.0));
    let control = |x: &[f64]| {
        dirichlet::solve(&tr, &unit, &tent, x, false, &cfg, &plan(CONTROL_SAMPLES, "c-tent"))
            .map_or(f64::INFINITY, |s| s.estimate.mean.max(0.0))
    };
    let h_cap = |i: usize, x: &[f64]| {
        Ok(dirichlet::solve(&tr, &unit, &cap, x, false, &cfg, &plan(CONTROL_SAMPLES, &format!("c-cap/{i}")))?.estimate)
    };
    let cap_seqs = vec![
        Approach::ray(padded(&[1.0, 0.6]), &padded(&[0.0, 0.6])),
        Approach::ray(padded(&[-1.0, -0.6]), &padded(&[0.0, -0.6])),
    ];
    let r = dirichlet::controlled_convergence_check(&unit, &h_cap, &cap, &control, &cap_seqs, CONTROL_TOL)?;
    let nonzero = r.records.iter().any(|x| x.k.iter().any(|k| *k > 0.0));
    let cap_ok = r.verdict == Verdict::Pass && r.records.iter().all(|x| x.branch == Branch::C1);
    ok &= cap_ok;
    notes.push(format!("cap data: {} (control nonzero: {nonzero})", r.verdict));

    let mut flips = 0;
    let mut passes = 0;
    for i in 0..CONTROL_FIXTURES {
        let mut rng = StreamKey::new(SEED).labeled("fixtures").derive(i as u64).stream();
        let u = |rng: &mut levylab::rng::Stream| rng.random::<f64>();
        let side = if u(&mut rng) < 0.5 { 1.0 } else { -1.0 };
        let y2 = 2.0 * u(&mut rng) - 1.0;
        let xi2 = 2.0 * u(&mut rng) - 1.0;
        let (amp, rate) = (3.0 * u(&mut rng), 4.0 * u(&mut rng) - 2.0);
        let f = BoundaryData::new(Arc::new(Linear { xi: padded(&[0.3, xi2]) }), 100.0, DataClass::BoundedContinuous)?;
        let y = padded(&[side, y2]);
        let yc = y.clone();
        let k = move |x: &[f64]| amp * (rate * (x[0] - yc[0]).abs()).exp();
        let k2 = |x: &[f64]| 2.0 * k(x);
        let h = |j: usize, x: &[f64]| {
            Ok(dirichlet::solve(&tr, &unit, &f, x, false, &cfg, &plan(CONTROL_SAMPLES / 2, &format!("fx/{i}/{j}")))?.estimate)
        };
        let seq = vec![Approach::ray(y, &padded(&[0.0, y2]))];
        let a = dirichlet::controlled_convergence_check(&unit, &h, &f, &k, &seq, CONTROL_TOL)?;
        let b = dirichlet::controlled_convergence_check(&unit, &h, &f, &k2, &seq, CONTROL_TOL)?;
        if a.verdict == Verdict::Pass {
            passes += 1;
            if b.verdict != Verdict::Pass {
                flips += 1;
            }
        }
    }
    ok &= flips == 0;
    notes.push(format!("k → 2k: {flips} flips over {passes} passing of {CONTROL_FIXTURES} fixtures"));
    Ok((ok, notes.join(", ")))
}

fn capacity_balayage() -> Check {
    let s = space();
    let tr = LevyTriplet::brownian(DIM);
    let beta = 1.0;
    let cfg = PathConfig::for_beta(beta).with_dt(0.05);
    let mut notes = Vec::new();
    let mut ok = true;

    let lam = PointCloud::new(vec![vec![0.0; DIM], padded(&[1.0, 0.5])], vec![0.5, 1.5])?;
    let empty = potential::capacity(&tr, &lam, &TargetSet::Empty, beta, &PotentialSpec::Unit, &cfg.with_horizon(0.05), &plan(1000, "cap-empty"))?;
    let whole = potential::capacity(&tr, &lam, &TargetSet::Whole, beta, &PotentialSpec::Unit, &cfg, &plan(1000, "cap-whole"))?;
    let exact = empty.mean == 0.0 && whole.mean == lam.total() / beta && whole.stderr == 0.0;
    ok &= exact;
    notes.push(format!("c(∅) = {}, c(E) = {}", empty.mean, whole.mean));

    let norm = Arc::new(LyapunovNorm::canonical(&s, NormKind::Levy)?);
    let sets: Vec<TargetSet> =
        (1..=5).map(|c| Ok(TargetSet::qx_level(norm.clone(), c as f64)?.complement())).collect::<Result<_>>()?;
    let refs: Vec<&TargetSet> = sets.iter().collect();
    let combos: Vec<Vec<f64>> = (0..4)
        .map(|j| {
            let mut c = vec![0.0; 5];
            c[j] = 1.0;
            c[j + 1] = -1.0;
            c
        })
        .collect();
    let origin = PointCloud::dirac(vec![0.0; DIM]);
    let (_, drops) = potential::capacity_family(&tr, &origin, &refs, beta, &PotentialSpec::Unit, &cfg, &plan(POTENTIAL_SAMPLES, "tight"), &combos)?;
    let strict = drops.iter().filter(|d| d.mean - z_value(d.confidence) * d.stderr > 0.0).count();
    ok &= strict == drops.len();
    notes.push(format!("tightness drops {strict}/{} strictly positive", drops.len()));

    let m = TargetSet::halfspace(e(&[0]), 1.0)?;
    let nu = PointCloud::new(vec![vec![0.0; DIM], padded(&[2.0])], vec![1.0, 0.5])?;
    let fs = vec![
        (TargetSet::halfspace(e(&[0]), 1.5)?, true),
        (
            TargetSet::coordinate_box(
                [vec![1.0, -1.0], vec![f64::NEG_INFINITY; DIM - 2]].concat(),
                [vec![3.0, 1.0], vec![f64::INFINITY; DIM - 2]].concat(),
            )?,
            true,
        ),
        (TargetSet::halfspace(padded(&[-1.0]), 0.0)?, false),
    ];
    let bal = potential::balayage_check(&tr, &nu, &m, beta, &fs, &cfg, &plan(POTENTIAL_SAMPLES, "balayage"))?;
    ok &= bal.verdict == Verdict::Pass;
    notes.push(format!("balayage {}", bal.verdict));

    let nu0 = PointCloud::dirac(vec![0.0; DIM]);
    let swept = Measure::Swept { nu: nu0.clone(), target: TargetSet::halfspace(e(&[0]), 0.5)? };
    let dom = potential::domination_check(
        &tr,
        &swept,
        &Measure::Cloud(nu0.clone()),
        beta,
        &[TargetSet::halfspace(e(&[0]), 1.0)?],
        &[TargetSet::halfspace(padded(&[-1.0]), 0.5)?],
        &cfg,
        &plan(POTENTIAL_SAMPLES, "dom"),
    )?;
    let box_g = TargetSet::coordinate_box(
        [vec![-1.0, -1.0], vec![f64::NEG_INFINITY; DIM - 2]].concat(),
        [vec![1.0, 1.0], vec![f64::INFINITY; DIM - 2]].concat(),
    )?;
    let neg = potential::domination_check(
        &tr,
        &Measure::Cloud(nu0.scaled(2.0)),
        &Measure::Cloud(nu0),
        beta,
        &[box_g],
        &[TargetSet::halfspace(e(&[0]), 1.5)?],
        &cfg,
        &plan(POTENTIAL_SAMPLES, "dom-neg"),
    )?;
    let chain = dom.hypothesis == Verdict::Pass && dom.conclusion == Some(Verdict::Pass);
    let gate = neg.hypothesis == Verdict::Fail && neg.conclusion.is_none();
    ok &= chain && gate;
    notes.push(format!("domination {} / μ = 2ν gate {}", dom.verdict, neg.hypothesis));
    Ok((ok, notes.join(", ")))
}

fn tail_norms() -> Check {
    let s = space();
    let g = potential::projection_convergence(&s, &LevyTriplet::brownian(DIM), 1.0, &[4, 8, 16], &plan(TAIL_SAMPLES, "tail-g"))?;
    let gauss: Vec<Verdict> = g.rows.iter().map(|r| r.verdict).collect();
    let (p, n) = tally(&gauss);
    let sine = SpaceModel::sine(DIM);
    let pois = potential::projection_convergence(
        &sine,
        &LevyTriplet::poisson_example(DIM),
        1.0,
        &[2, 4, 8, 16],
        &plan(TAIL_SAMPLES, "tail-p"),
    )?;
    Ok((p == n && pois.decreasing == Verdict::Pass, format!("Gaussian tail {p}/{n}, Poisson decreasing {}", pois.decreasing)))
}

fn determinism() -> Check {
    let cfg = SuiteConfig::parse(harness::BUNDLED_SUITE)?;
    let opts = RunOptions { samples_scale: SUITE_SCALE, ..RunOptions::default() };
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        Ok(pool.install(|| harness::run_suite(&cfg, harness::BUNDLED_SUITE, &opts))?.to_csv())
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(4)?;
    let lines = a.lines().count() - 1;
    Ok((a == b && a == c, format!("{lines} CSV rows; repeat identical: {}, 1 vs 4 threads identical: {}", a == b, a == c)))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 11] = [
        ("variance identity", variance_identity),
        ("Lyapunov bounds, Gaussian", lyapunov_gaussian),
        ("Lyapunov sandwich, Lévy", lyapunov_levy),
        ("moment formulas", moment_formulas),
        ("projection consistency", projection_consistency),
        ("reduced-function projection inequality", reduced_projection),
        ("Dirichlet oracles", dirichlet_oracles),
        ("controlled convergence", controlled_convergence),
        ("capacity and balayage", capacity_balayage),
        ("projection tail norms", tail_norms),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, note) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {note} ({:.1}s)", i + 1, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
