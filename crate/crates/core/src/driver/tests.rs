use super::*;
use crate::model::{fixture, AffineConstraint, DeterministicSet, FixtureName, NormSpec, Order, PNorm, ReferenceDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn with_delta(delta1: f64) -> SolveOptions {
    SolveOptions { delta1: Some(delta1), ..SolveOptions::default() }
}

#[test]
fn example_four_pipelines() {
    let inst = fixture(FixtureName::E4);
    let (t_l, t_u) = initial_bounds(&inst, &LowerOptions::default()).unwrap();
    assert!(t_l.abs() < 1e-8 && (t_u - 8.0 / 3.0).abs() < 1e-6);
    for m in [Method::AlsoXWeakSharp, Method::AlsoXSharp] {
        let r = solve(&inst, m, &with_delta(1e-3)).unwrap();
        assert!(r.feasible && (r.value - 2.0).abs() <= 1e-3, "{m}: {}", r.value);
        let trace = r.trace.unwrap();
        assert!(trace.t_upper - trace.t_lower <= 1e-3);
        assert!(r.value <= t_u + 1e-12);
    }
    let mut boxed = inst.clone();
    boxed.set = DeterministicSet::Box { lower: vec![0.0], upper: vec![4.0] };
    let b = brute_force(&boxed, Some(0.01)).unwrap();
    assert!((b.value - 2.0).abs() < 1e-9);
}

#[test]
fn example_two_pipelines() {
    let inst = fixture(FixtureName::E2);
    let sharp = solve(&inst, Method::AlsoXSharp, &with_delta(0.25)).unwrap();
    assert!(sharp.feasible && sharp.value == 0.0 && sharp.x == vec![0.0]);
    for m in [Method::AlsoX, Method::AlsoXWeakSharp, Method::CVaR] {
        assert!(!solve(&inst, m, &SolveOptions::default()).unwrap().feasible, "{m}");
    }
    assert_eq!(big_m_exact(&inst, &BigMOptions::default()).unwrap().value, 0.0);
    assert_eq!(brute_force(&inst, None).unwrap().value, 0.0);
}

#[test]
fn example_one_pipelines() {
    let inst = fixture(FixtureName::E1);
    let cvar = solve(&inst, Method::CVaR, &SolveOptions::default()).unwrap();
    assert!(cvar.feasible && cvar.value.abs() < 1e-9);
    assert!(!solve(&inst, Method::AlsoX, &SolveOptions::default()).unwrap().feasible);
    assert_eq!(big_m_exact(&inst, &BigMOptions::default()).unwrap().value, 0.0);
}

#[test]
fn example_three_brute_force() {
    let inst = fixture(FixtureName::E3);
    let b = brute_force(&inst, Some(0.25)).unwrap();
    assert!(b.feasible && (b.value - 0.5).abs() < 1e-12);
    let sharp = solve(&inst, Method::AlsoXSharp, &SolveOptions::default()).unwrap();
    assert!(sharp.feasible && sharp.value >= 0.5 - 1e-9);
}

#[test]
fn empty_grid_is_infeasible() {
    let mut inst = fixture(FixtureName::E4);
    inst.set = DeterministicSet::Box { lower: vec![0.0], upper: vec![1.0] };
    let b = brute_force(&inst, Some(0.1)).unwrap();
    assert!(!b.feasible && b.value.is_infinite());
}

#[test]
fn missing_upper_bound_is_expanded() {
    let inst = fixture(FixtureName::E4);
    let r = bisect(&inst, Method::AlsoXSharp, 1e-3, 0.0, f64::INFINITY, &SolveOptions::default()).unwrap();
    assert!(r.feasible && (r.value - 2.0).abs() <= 1e-3);
    let r = bisect(&inst, Method::AlsoXSharp, 1e-3, f64::NEG_INFINITY, 8.0 / 3.0, &SolveOptions::default()).unwrap();
    assert!(r.feasible && (r.value - 2.0).abs() <= 1e-3);
}

#[test]
fn non_bisection_method_is_rejected() {
    let inst = fixture(FixtureName::E4);
    assert!(bisect(&inst, Method::CVaR, 1e-2, 0.0, 1.0, &SolveOptions::default()).is_err());
}

fn random_binary(rng: &mut ChaCha8Rng, n: usize) -> DrccpInstance {
    let n_sc = rng.gen_range(4..=12);
    DrccpInstance {
        objective: (0..n).map(|_| -f64::from(rng.gen_range(1..10))).collect(),
        constraints: vec![AffineConstraint {
            a_mat: (0..n).map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect(),
            a_vec: vec![0.0; n],
            b_vec: vec![0.0; n],
            b0: f64::from(rng.gen_range(10..30)),
        }],
        set: DeterministicSet::Binary { n },
        epsilon: [0.1, 0.2, 0.3][rng.gen_range(0..3)],
        theta: rng.gen_range(0.0..1.0),
        q: Order::Infinity,
        norm: NormSpec::p([PNorm::One, PNorm::Two, PNorm::Inf][rng.gen_range(0..3)]),
        distribution: ReferenceDistribution::uniform(
            (0..n_sc).map(|_| (0..n).map(|_| f64::from(rng.gen_range(-2..8))).collect()).collect(),
        ),
        groups: None,
    }
}

#[test]
fn big_m_matches_brute_force_on_random_binaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..8 {
        let inst = random_binary(&mut rng, 10);
        let a = big_m_exact(&inst, &BigMOptions::default()).unwrap();
        let b = brute_force(&inst, None).unwrap();
        assert_eq!(a.feasible, b.feasible);
        assert!((a.value - b.value).abs() < 1e-6, "{} {}", a.value, b.value);
        assert_eq!(a.gap, Some(0.0));
    }
}

#[test]
fn node_limited_big_m_reports_a_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_binary(&mut rng, 10);
    let r = big_m_exact(&inst, &BigMOptions { node_limit: 1, heuristic: true, ..BigMOptions::default() }).unwrap();
    if r.feasible {
        assert!(r.gap.unwrap() >= 0.0);
    }
}

#[test]
fn big_m_rejects_unsupported_instances() {
    assert!(big_m_exact(&fixture(FixtureName::E4), &BigMOptions::default()).is_err());
    assert!(big_m_exact(&fixture(FixtureName::E5), &BigMOptions::default()).is_err());
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, format!("\"{}\"", m.name()));
    }
    assert!("nope".parse::<Method>().is_err());
}

#[test]
fn reports_round_trip_through_json() {
    let r = solve(&fixture(FixtureName::E2), Method::AlsoX, &SolveOptions::default()).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    assert!(text.contains("\"value\":\"inf\""));
    let back: SolveReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn classification_examples() {
    let g = classify(&fixture(FixtureName::GaussCond1));
    assert_eq!((g.exactness, g.uniqueness), (Some(ExactnessClass::CondI), Uniqueness::SingleConvexX));
    let g2 = classify(&fixture(FixtureName::GaussCond2));
    assert_eq!(g2.exactness, Some(ExactnessClass::CondII));
    let e3 = classify(&fixture(FixtureName::E3));
    assert_eq!((e3.exactness, e3.uniqueness), (None, Uniqueness::None));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut packing = random_binary(&mut rng, 5);
    packing.distribution = ReferenceDistribution::uniform(vec![vec![1.0, 2.0, 0.0, 3.0, 1.0]; 3]);
    assert_eq!(classify(&packing).exactness, Some(ExactnessClass::Packing));
}
