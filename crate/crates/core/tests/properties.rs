mod common;

use nsbell::bell::{canonicalize, BellExpression, Direction, ProbTerm};
use nsbell::constraints::build_constraint_system;
use nsbell::correlators::{probabilities_from_correlators, umc};
use nsbell::projection::{project_l2, project_nonneg, project_weighted, SettingsWeights};
use nsbell::scenario::deterministic_behavior;
use nsbell::{BehaviorVector, Role, Scenario};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    prop::sample::select(vec![(1, 2), (1, 3), (2, 2), (2, 3), (3, 2)])
        .prop_map(|(n, m)| Scenario::new(n, m).unwrap())
}

fn raw_vector() -> impl Strategy<Value = (Scenario, Vec<f64>)> {
    scenario().prop_flat_map(|s| (Just(s), prop::collection::vec(-2.0..2.0f64, s.dim())))
}

fn normalized() -> impl Strategy<Value = BehaviorVector> {
    scenario().prop_flat_map(normalized_in)
}

fn normalized_in(s: Scenario) -> impl Strategy<Value = BehaviorVector> {
    prop::collection::vec(0.01..1.0f64, s.dim()).prop_map(move |mut e| {
        for chunk in e.chunks_mut(s.block_len()) {
            let t: f64 = chunk.iter().sum();
            chunk.iter_mut().for_each(|v| *v /= t);
        }
        BehaviorVector::new(s, e, Role::Frequency).unwrap()
    })
}

/// A random local mixture of deterministic strategies.
fn local() -> impl Strategy<Value = BehaviorVector> {
    scenario().prop_flat_map(local_in)
}

fn local_in(s: Scenario) -> impl Strategy<Value = BehaviorVector> {
    {
        let strat = prop::collection::vec(
            prop::collection::vec(prop::collection::vec(0u8..2, s.settings()), s.parties()),
            1..5,
        );
        (strat, prop::collection::vec(0.1..1.0f64, 5)).prop_map(move |(strats, w)| {
            let total: f64 = w[..strats.len()].iter().sum();
            let mut e = vec![0.0; s.dim()];
            for (st, wi) in strats.iter().zip(&w) {
                let d = deterministic_behavior(s, st).unwrap();
                for (x, v) in e.iter_mut().zip(d.entries()) {
                    *x += wi / total * v;
                }
            }
            BehaviorVector::new(s, e, Role::Probability).unwrap()
        })
    }
}

proptest! {
    #[test]
    fn encode_decode_round_trip(s in scenario(), seed in any::<usize>()) {
        let idx = seed % s.dim();
        let (a, x) = s.decode_index(idx).unwrap();
        prop_assert_eq!(s.encode_index(&a, &x).unwrap(), idx);
    }

    #[test]
    fn projection_lands_on_hull_and_is_idempotent((s, e) in raw_vector()) {
        let v = BehaviorVector::unconstrained(s, e).unwrap();
        let p = project_l2(&v);
        let sys = build_constraint_system(s);
        prop_assert!(sys.residual(&p).unwrap().max_abs() < 1e-12);
        prop_assert!(project_l2(&p).max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn projection_is_affine((s, e) in raw_vector(), t in 0.0..1.0f64, shift in prop::collection::vec(-1.0..1.0f64, 216)) {
        let u = BehaviorVector::unconstrained(s, e.clone()).unwrap();
        let w_e: Vec<f64> = e.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let w = BehaviorVector::unconstrained(s, w_e.clone()).unwrap();
        let mix: Vec<f64> = e.iter().zip(&w_e).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = project_l2(&BehaviorVector::unconstrained(s, mix).unwrap());
        let (pu, pw) = (project_l2(&u), project_l2(&w));
        let rhs: Vec<f64> = pu.entries().iter().zip(pw.entries()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        prop_assert!(common::max_abs_diff(lhs.entries(), &rhs) < 1e-12);
    }

    #[test]
    fn projection_minimises_distance_to_hull(
        (f, l) in scenario().prop_flat_map(|s| (normalized_in(s), local_in(s)))
    ) {
        // Any no-signalling point is at least as far from f as the projection.
        let p = project_l2(&f);
        let dist = |a: &[f64]| a.iter().zip(f.entries()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(p.entries()) <= dist(l.entries()) + 1e-12);
    }

    #[test]
    fn no_signalling_points_are_fixed(l in local()) {
        prop_assert!(project_l2(&l).max_abs_diff(&l) < 1e-12);
        let back = probabilities_from_correlators(&umc(&l));
        prop_assert!(back.max_abs_diff(&l) < 1e-12);
    }

    #[test]
    fn canonical_value_is_projection_invariant(f in normalized(), seed in prop::collection::vec(-3i32..4, 216)) {
        let s = f.scenario();
        let terms: Vec<ProbTerm> = (0..s.dim())
            .filter(|i| seed[*i] != 0)
            .map(|i| {
                let (a, x) = s.decode_index(i).unwrap();
                ProbTerm { a, x, coef: seed[i] as f64 }
            })
            .collect();
        prop_assume!(!terms.is_empty());
        let expr = BellExpression::new(s, Some(terms), None, 0.0, Direction::Le).unwrap();
        let form = canonicalize(&expr);
        let a = form.value(&f).unwrap();
        let b = form.value(&project_l2(&f)).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        // The raw and canonical functionals agree on the hull.
        let p = project_l2(&f);
        prop_assert!((p.dot(&expr.gamma()) - b).abs() < 1e-10);
        // Canonicalising twice changes nothing.
        let again = canonicalize(&form.to_expression());
        prop_assert!(common::max_abs_diff(&again.gamma, &form.gamma) < 1e-12);
    }

    #[test]
    fn weighted_projection_is_on_hull(f in normalized(), w in prop::collection::vec(0.01..5.0f64, 27)) {
        let s = f.scenario();
        let w = SettingsWeights::new(s, w[..s.setting_blocks()].to_vec()).unwrap();
        let p = project_weighted(&f, &w).unwrap();
        let sys = build_constraint_system(s);
        prop_assert!(sys.residual(&p).unwrap().max_abs() < 1e-12);
        prop_assert!(project_weighted(&p, &w).unwrap().max_abs_diff(&p) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonneg_refinement_is_feasible_and_no_farther_than_local_points(
        (s, e, l) in prop::sample::select(vec![(1, 2), (2, 2), (2, 3)]).prop_flat_map(|(n, m)| {
            let s = Scenario::new(n, m).unwrap();
            (Just(s), prop::collection::vec(-2.0..2.0f64, s.dim()), local_in(s))
        }),
    ) {
        let v = BehaviorVector::unconstrained(s, e).unwrap();
        let sys = build_constraint_system(s);
        let p = project_nonneg(&v, &sys).unwrap();
        prop_assert!(p.min_entry() >= 0.0);
        prop_assert!(sys.residual(&p).unwrap().max_abs() < 1e-9);
        let dist = |a: &[f64]| a.iter().zip(v.entries()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(p.entries()) <= dist(l.entries()) + 1e-8);
    }
}
