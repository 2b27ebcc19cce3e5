use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::driver::{is_feasible, solve, Method, SolveOptions, CHECK_TOL};
use crate::model::{fixture, save_instance, validate, FixtureName};
use crate::risk::{chance_check, violation_budget};

#[test]
fn generators_are_deterministic() {
    for kind in [PresetKind::Table1, PresetKind::Table2, PresetKind::Table3, PresetKind::Table4, PresetKind::ResourceAlloc] {
        let mut preset = GeneratorPreset::new(kind, 30, 4, 0.1, 17);
        preset.horizon = 3;
        let a = generate(&preset).unwrap();
        let b = generate(&preset).unwrap();
        assert_eq!(save_instance(&a), save_instance(&b));
        assert!(validate(&a).is_empty(), "{kind:?}: {:?}", validate(&a));
        preset.seed = 18;
        assert_ne!(generate(&preset).unwrap(), a);
    }
}

#[test]
fn table_ranges() {
    let t1 = generate(&GeneratorPreset::new(PresetKind::Table1, 200, 10, 0.1, 3)).unwrap();
    assert!(t1.objective.iter().all(|c| (-30.0..=-1.0).contains(c) && c.fract() == 0.0));
    assert_eq!(t1.set, DeterministicSet::Box { lower: vec![0.0; 10], upper: vec![1.0; 10] });
    assert_eq!((t1.theta, t1.q), (0.05, Order::Infinity));
    let (sc, _) = t1.empirical().unwrap();
    assert!(sc.iter().all(|z| z[..10].iter().all(|v| (1.0..=80.0).contains(v)) && (1.0..=20.0).contains(&z[10])));

    let t2 = generate(&GeneratorPreset::new(PresetKind::Table2, 200, 10, 0.1, 3)).unwrap();
    assert_eq!(t2.set, DeterministicSet::Binary { n: 10 });
    let (sc, _) = t2.empirical().unwrap();
    assert!(sc.iter().all(|z| z[..10].iter().all(|v| (-10.0..=20.0).contains(v)) && (1.0..=200.0).contains(&z[10])));
    assert!(t2.objective.iter().all(|c| (-10.0..=-1.0).contains(c)));
    assert_eq!(t2.norm, NormSpec::P { p: PNorm::Inf, fixed: vec![10] });

    let t3 = generate(&GeneratorPreset::new(PresetKind::Table3, 50, 5, 0.1, 3)).unwrap();
    assert_eq!((t3.theta, t3.q, t3.constraints[0].b0), (0.5, Order::Finite(2.0), 10.0));
    let t4 = generate(&GeneratorPreset::new(PresetKind::Table4, 50, 5, 0.1, 3)).unwrap();
    assert_eq!((t4.theta, t4.q, t4.constraints[0].b0), (0.2, Order::Finite(2.0), 400.0));
    assert!(t4.set.is_binary());
    let (sc, _) = t4.empirical().unwrap();
    assert!(sc.iter().flatten().all(|v| (-20.0..=50.0).contains(v)));
}

#[test]
fn random_rhs_margin_matches_the_printed_constraint() {
    let inst = generate(&GeneratorPreset::new(PresetKind::Table1, 20, 3, 0.1, 9)).unwrap();
    let x = [0.2, 0.5, 1.0];
    let (sc, _) = inst.empirical().unwrap();
    for z in sc {
        let direct = x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() - z[3];
        assert!((inst.constraints[0].nominal_margin(&x, z) - direct).abs() < 1e-12);
    }
    // The robust margin adds θ‖x‖₂ only: b cannot be transported.
    let robust = crate::risk::robust_margin_inf(&inst, &x, 0, 0).unwrap();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((robust - inst.constraints[0].nominal_margin(&x, &sc[0]) - 0.05 * norm).abs() < 1e-12);
}

#[test]
fn single_slot_resource_instance() {
    let inst = resource_allocation_with(1, 1, 1.0, vec![vec![30.0]], 0.1, 0.0);
    assert!(is_feasible(&inst, &[1.0 / 30.0], CHECK_TOL).unwrap());
    assert!(is_feasible(&inst, &[0.5], CHECK_TOL).unwrap());
    assert!(!is_feasible(&inst, &[0.03], CHECK_TOL).unwrap());
}

#[test]
fn resource_demand_ramp_and_groups() {
    let inst = resource_allocation_instance(3, 4, 1.5, 10, 0.2, 0.5, 1).unwrap();
    assert_eq!(inst.n(), 12);
    assert_eq!(inst.constraints.len(), 12);
    for (i, g) in inst.groups.as_ref().unwrap().iter().enumerate() {
        assert_eq!(g.len(), 4);
        for (t, &k) in g.iter().enumerate() {
            assert_eq!(inst.constraints[k].b0, -((t + 1) as f64) * 1.5);
            let c = &inst.constraints[k];
            for s in 0..4 {
                let idx = resource_index(4, i, s);
                assert_eq!(c.a_mat[idx][idx], if s <= t { -1.0 } else { 0.0 });
            }
        }
    }
    let (sc, _) = inst.empirical().unwrap();
    assert!(sc.iter().flatten().all(|v| (20.0..=40.0).contains(v) && v.fract() == 0.0));
    assert!(validate(&inst).is_empty());
}

#[test]
fn out_of_sample_trivial_cases() {
    let inst = fixture(FixtureName::E3);
    let mut sampler = integer_sampler(2, 1, 5);
    let all = out_of_sample(&inst, &[1.0, 1.0], &mut sampler, 4, 50, 10).unwrap();
    assert_eq!((all.ci_low, all.ci_high), (1.0, 1.0));
    let none = out_of_sample(&inst, &[0.0, 0.0], &mut sampler, 4, 50, 10).unwrap();
    assert_eq!((none.ci_low, none.ci_high), (0.0, 0.0));
    assert!(out_of_sample(&inst, &[0.0], &mut sampler, 4, 50, 10).is_err());
}

#[test]
fn confidence_width_shrinks_like_inverse_square_root() {
    let inst = fixture(FixtureName::E3);
    let x = [0.3, 0.3];
    let widths: Vec<f64> = [10, 40, 160]
        .iter()
        .map(|&r| {
            let mut sampler = integer_sampler(2, 0, 3);
            let e = out_of_sample(&inst, &x, &mut sampler, 99, 20, r).unwrap();
            e.ci_high - e.ci_low
        })
        .collect();
    for w in widths.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.4..=2.9).contains(&ratio), "{widths:?}");
    }
}

#[test]
fn training_scenarios_reproduce_the_chance_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..200 {
        let mut inst = generate(&GeneratorPreset::new(PresetKind::Table1, 25, 4, 0.2, k)).unwrap();
        inst.theta = 0.0;
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..0.3)).collect();
        let (sc, _) = inst.empirical().unwrap();
        let s = satisfaction(&inst, &x, sc);
        let held = (s * 25.0).round() as usize;
        let verdict = held >= 25 - violation_budget(25, 0.2);
        assert_eq!(verdict, chance_check(&inst, &x, 0.0).unwrap(), "instance {k}");
    }
}

#[test]
fn improvement_formula() {
    assert!((improvement(-10.0, -11.0).unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(improvement(-3.5, -3.5), Some(0.0));
    let e5 = improvement(-2.033, -2.4929).unwrap();
    assert!((e5 - 22.62).abs() < 0.01, "{e5}");
    assert_eq!(improvement(0.0, 1.0), None);
    assert_eq!(improvement(f64::INFINITY, 1.0), None);
}

#[test]
fn compare_reports_percentages() {
    let inst = fixture(FixtureName::E4);
    assert!(compare(&inst, &[Method::CVaR], None, &SolveOptions::default()).is_err());
    let r = compare(&inst, &[Method::CVaR, Method::AlsoXSharp], Some(1e-4), &SolveOptions::default()).unwrap();
    let sharp = r.get(Method::AlsoXSharp).unwrap();
    assert!((sharp.improvement_from_cvar.unwrap() - 25.0).abs() < 1e-2);
    assert_eq!(r.get(Method::CVaR).unwrap().improvement_from_cvar, None);
    let text = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<EvaluationReport>(&text).unwrap(), r);
}

/// `ζ x ≤ 5` on X = [0,1] with `ζ ∈ {1..10}`.
struct ScalarFamily;

impl ScenarioFamily for ScalarFamily {
    fn n_scenarios(&self) -> usize {
        20
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.gen_range(1..=10) as f64]
    }

    fn instance(&self, scenarios: Vec<Vec<f64>>, theta: f64) -> DrccpInstance {
        DrccpInstance {
            objective: vec![-1.0],
            constraints: vec![AffineConstraint { a_mat: vec![vec![1.0]], a_vec: vec![0.0], b_vec: vec![0.0], b0: 5.0 }],
            set: DeterministicSet::Box { lower: vec![0.0], upper: vec![1.0] },
            epsilon: 0.3,
            theta,
            q: Order::Infinity,
            norm: NormSpec::p(PNorm::Two),
            distribution: ReferenceDistribution::uniform(scenarios),
            groups: None,
        }
    }
}

#[test]
fn tuning_picks_the_first_dominating_radius() {
    let opts = TuneOptions { seed: 2, ..TuneOptions::default() };
    let r = tune_radius(&ScalarFamily, &[5.0, 6.0], 20, &opts).unwrap();
    assert_eq!(r.chosen, RadiusChoice::Theta(5.0));
    assert!(r.rows[0].dominates);
}

#[test]
fn tuning_reports_when_nothing_dominates() {
    let opts = TuneOptions { seed: 2, ..TuneOptions::default() };
    let r = tune_radius(&ScalarFamily, &[0.0], 10, &opts).unwrap();
    assert_eq!(r.chosen, RadiusChoice::NoneDominates);
    assert_eq!(r.rows[0].drccp, r.rows[0].ccp);
    assert!(tune_radius(&ScalarFamily, &[1.0, 0.5], 10, &opts).is_err());
}

#[test]
fn tuning_the_resource_family() {
    let family = ResourceFamily { users: 2, horizon: 3, demand: 1.0, n_scenarios: 20, epsilon: 0.2, noise: 0.0 };
    let opts = TuneOptions { seed: 5, solve: SolveOptions { delta1: Some(0.05), ..SolveOptions::default() }, ..TuneOptions::default() };
    let r = tune_radius(&family, &[0.5, 1.0, 2.0, 4.0], 12, &opts).unwrap();
    let RadiusChoice::Theta(theta) = r.chosen else { panic!("no radius dominates: {:?}", r.rows) };
    let row = r.rows.iter().find(|row| row.theta == theta).unwrap();
    assert!(row.drccp.ci_low > row.ccp.ci_high);
    assert!(r.rows.iter().take_while(|row| row.theta < theta).all(|row| !row.dominates));
}

#[test]
fn reduced_resource_instance_solves() {
    let inst = resource_allocation_instance(2, 3, 1.0, 15, 0.2, 0.5, 4).unwrap();
    let r = solve(&inst, Method::AlsoXSharp, &SolveOptions { delta1: Some(0.05), ..SolveOptions::default() }).unwrap();
    assert!(r.feasible);
    assert!(is_feasible(&inst, &r.x, CHECK_TOL).unwrap());
}
