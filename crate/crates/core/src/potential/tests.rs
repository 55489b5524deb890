use std::sync::Arc;

use super::*;
use crate::lyapunov::{LyapunovNorm, NormKind};
use crate::operators::Constant;
use crate::rng::StreamKey;

fn plan(n: u64, tag: &str) -> McPlan {
    McPlan::new(n, StreamKey::new(33).labeled(tag))
}

#[test]
fn reduced_function_trivial_cases() {
    let tr = LevyTriplet::brownian(4);
    let cfg = PathConfig::for_beta(1.0);
    let one = Constant(1.0);
    let r = reduced_function(&tr, &one, &TargetSet::Whole, 1.0, &[0.0; 4], &cfg, &plan(200, "a")).unwrap();
    assert_eq!(r.mean, 1.0);
    let r = reduced_function(&tr, &one, &TargetSet::Empty, 1.0, &[0.0; 4], &cfg.with_horizon(1.0), &plan(200, "b"))
        .unwrap();
    assert_eq!(r.mean, 0.0);
    assert!(matches!(
        reduced_function(&tr, &one, &TargetSet::Whole, 0.0, &[0.0; 4], &cfg, &plan(10, "c")),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn reduced_function_matches_laplace_transform_of_first_passage() {
    // E e^{-βT_c} = e^{-c sqrt(2β)} for standard Brownian motion.
    let tr = LevyTriplet::brownian(1);
    let m = TargetSet::halfspace(vec![1.0], 1.0).unwrap();
    let beta = 0.5;
    let r = reduced_function(&tr, &Constant(1.0), &m, beta, &[0.0], &PathConfig::for_beta(beta), &plan(20000, "lt"))
        .unwrap();
    let exact = (-(2.0 * beta).sqrt()).exp();
    assert_ne!(r.verdict(exact, 0.0), Verdict::Fail, "{r:?} vs {exact}");
}

#[test]
fn strong_drift_away_gives_horizon_bound() {
    let tr = LevyTriplet::new(vec![-5.0, 0.0], vec![1.0, 1.0], None).unwrap();
    let m = TargetSet::halfspace(vec![1.0, 0.0], 3.0).unwrap();
    let cfg = PathConfig::for_beta(1.0).with_horizon(5.0);
    let r = reduced_function(&tr, &Constant(1.0), &m, 1.0, &[0.0, 0.0], &cfg, &plan(2000, "drift")).unwrap();
    assert!(r.mean <= (-5.0f64).exp() + 3.0 * r.stderr + 1e-3);
}

#[test]
fn projection_inequality_holds_per_path() {
    let s = SpaceModel::geometric(6);
    let tr = LevyTriplet::brownian(6);
    let m = TargetSet::e_ball(&s, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0], 0.6).unwrap();
    let r = projection_inequality_check(
        &tr,
        &Constant(1.0),
        &m,
        1.0,
        &s.zero(),
        2,
        &PathConfig::for_beta(1.0),
        &plan(2000, "pi"),
    )
    .unwrap();
    assert!(r.difference.mean >= 0.0);
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn capacity_exact_cases_and_nesting() {
    let tr = LevyTriplet::brownian(3);
    let lam = PointCloud::new(vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]], vec![0.5, 1.5]).unwrap();
    let cfg = PathConfig::for_beta(2.0);
    let p = plan(500, "cap");
    let c = capacity(&tr, &lam, &TargetSet::Empty, 2.0, &PotentialSpec::Unit, &cfg.with_horizon(1.0), &p).unwrap();
    assert_eq!(c.mean, 0.0);
    let c = capacity(&tr, &lam, &TargetSet::Whole, 2.0, &PotentialSpec::Unit, &cfg, &p).unwrap();
    assert_eq!(c.mean, 1.0);
    assert_eq!(c.stderr, 0.0);
    let small = TargetSet::h_ball(vec![2.0, 0.0, 0.0], 0.5).unwrap();
    let big = TargetSet::h_ball(vec![2.0, 0.0, 0.0], 1.0).unwrap();
    let (est, diff) =
        capacity_family(&tr, &lam, &[&small, &big], 2.0, &PotentialSpec::Unit, &cfg, &p, &[vec![-1.0, 1.0]]).unwrap();
    assert!(est[0].mean <= est[1].mean);
    assert!(diff[0].mean >= 0.0);
}

#[test]
fn balayage_trivial_and_halfspace() {
    let tr = LevyTriplet::brownian(2);
    let m = TargetSet::halfspace(vec![1.0, 0.0], 1.0).unwrap();
    let inside = PointCloud::dirac(vec![2.0, 0.0]);
    let f_in = TargetSet::halfspace(vec![1.0, 0.0], 1.5).unwrap();
    let f_out = TargetSet::halfspace(vec![-1.0, 0.0], 0.0).unwrap();
    let cfg = PathConfig::for_beta(1.0);
    let r = balayage_check(&tr, &inside, &m, 1.0, &[(f_in.clone(), true), (f_out.clone(), false)], &cfg, &plan(2000, "b1"))
        .unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.rows[1].difference.mean, 0.0);
    let outside = PointCloud::dirac(vec![0.0, 0.0]);
    let r = balayage_check(&tr, &outside, &m, 1.0, &[(f_in, true), (f_out, false)], &cfg, &plan(4000, "b2")).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    assert!(r.rows[1].difference.mean < 0.0);
    assert!(!r.degenerate);
}

#[test]
fn domination_gate() {
    let tr = LevyTriplet::brownian(2);
    let nu = Measure::Cloud(PointCloud::dirac(vec![0.0, 0.0]));
    let g = TargetSet::h_ball(vec![0.0, 0.0], 1.0).unwrap();
    let probes_out = vec![TargetSet::halfspace(vec![1.0, 0.0], 1.5).unwrap()];
    let cfg = PathConfig::for_beta(1.0);
    let r = domination_check(&tr, &nu, &nu, 1.0, std::slice::from_ref(&g), &probes_out, &cfg, &plan(2000, "d1")).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let r = domination_check(&tr, &nu.scaled(2.0), &nu, 1.0, &[g], &probes_out, &cfg, &plan(2000, "d2")).unwrap();
    assert_eq!(r.hypothesis, Verdict::Fail);
    assert!(r.conclusion.is_none());
}

#[test]
fn projection_convergence_gaussian_tail() {
    let s = SpaceModel::geometric(12);
    let tr = LevyTriplet::brownian(12);
    let r = projection_convergence(&s, &tr, 1.0, &[2, 4, 8, 12], &plan(20000, "tail")).unwrap();
    assert_eq!(r.rows[3].estimate.mean, 0.0);
    assert_ne!(r.verdict, Verdict::Fail, "{r:?}");
}

#[test]
fn polarity_needs_two_coordinates() {
    let s = SpaceModel::geometric(3);
    let tr = LevyTriplet::new(vec![0.0; 3], vec![1.0, 0.0, 0.0], None).unwrap();
    let e = polarity_diagnostic_point(
        &s,
        &tr,
        &[1.0, 0.0, 0.0],
        &[0.1, 0.01],
        &[vec![0.0; 3]],
        1,
        1.0,
        &PathConfig::default(),
        &plan(10, "pol"),
    );
    assert!(matches!(e, Err(Error::Hypothesis(_))));
}

#[test]
fn h_polarity_structural_moment() {
    let tr = LevyTriplet::brownian(8);
    let r = polarity_diagnostic_h(&tr, &[1.0, 0.5], &[vec![0.0; 8]], 0.5, 1.0, &PathConfig::default(), &plan(2000, "h"))
        .unwrap();
    assert_eq!(r.structural[0].1, 4.0);
    assert_ne!(r.structural[0].2, Verdict::Fail);
}

#[test]
fn invariant_proxy_set() {
    let s = SpaceModel::geometric(8);
    let norm = Arc::new(LyapunovNorm::canonical(&s, NormKind::Levy).unwrap());
    let set = TargetSet::qx_level(norm, 50.0).unwrap();
    let tr = LevyTriplet::brownian(8);
    let starts = vec![s.zero(), vec![500.0; 8]];
    let (_, v) = invariant_set_check(&tr, &set, &starts, 1.0, 0.0, &plan(500, "inv")).unwrap();
    assert_eq!(v, Verdict::Pass);
}
