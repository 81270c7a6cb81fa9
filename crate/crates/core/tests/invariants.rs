//! Property tests for the library invariants.

use gptw_core::composites::{self, BipartiteState};
use gptw_core::convex::{mix, ExtremePoints, StateSpace, StateVector};
use gptw_core::groups::{self, GroupKind};
use gptw_core::postulates::{self, CheckOptions};
use gptw_core::sampling;
use gptw_core::theories::{self, builtin, Builtin};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn builtins() -> Vec<Builtin> {
    vec![
        Builtin::Classical(2),
        Builtin::Classical(3),
        Builtin::SquareGbit,
        Builtin::Qubit,
        Builtin::Ball(2),
        Builtin::Ball(4),
        Builtin::Quantum(2),
    ]
}

#[test]
fn valid_effects_stay_in_unit_interval() {
    for b in builtins() {
        let t = builtin(b).unwrap();
        let tol = t.space.tolerance();
        let states = t.space.sample_states(100, 1);
        let mut rng = sampling::rng(2);
        for _ in 0..100 {
            let e = t.space.random_effect(&mut rng);
            for s in &states {
                let v = e.eval(s);
                assert!(v >= -tol && v <= 1.0 + tol, "{b}: {v}");
            }
        }
    }
}

#[test]
fn group_elements_preserve_the_space() {
    for b in builtins() {
        let t = builtin(b).unwrap();
        assert!(t.validate(1000, 0).unwrap().is_none(), "{b}");
    }
}

#[test]
fn faces_are_subsets_of_extreme_points() {
    for b in [Builtin::Classical(3), Builtin::SquareGbit] {
        let space = builtin(b).unwrap().space;
        let ExtremePoints::Finite(verts) = space.extreme_points() else { unreachable!() };
        let mut rng = sampling::rng(4);
        for _ in 0..200 {
            let e = space.random_effect(&mut rng);
            let (lo, hi) = space.effect_range(&e).unwrap();
            if hi - lo < 1e-6 {
                continue;
            }
            let scaled = gptw_core::convex::Effect::new((&e.coeffs - &space.unit_effect().coeffs * lo) / (hi - lo));
            for f in space.face_of_effect(&scaled).unwrap() {
                assert!(verts.iter().any(|v| (&v.coords - &f.coords).amax() < 1e-12));
            }
        }
    }
}

#[test]
fn qubit_never_distinguishes_three() {
    let space = StateSpace::quantum(1).unwrap();
    for seed in 0..5 {
        let pool = space.sample_pure(6, seed);
        assert!(space.max_distinguishable(&pool).unwrap().c <= 2);
    }
}

#[test]
fn nse_geometric_passes_on_balls() {
    for d in 2..=8 {
        let r = postulates::check_nse_geometric(&StateSpace::ball(d).unwrap(), &CheckOptions::default()).unwrap();
        assert!(r.passed(), "d = {d}");
    }
}

#[test]
fn product_states_span_composites() {
    for b in builtins() {
        let t = builtin(b).unwrap();
        let pool = match t.space.extreme_points() {
            ExtremePoints::Finite(v) => v,
            _ => t.space.sample_pure(2 * t.space.k() + 4, 0),
        };
        let products: Vec<StateVector> = pool
            .iter()
            .flat_map(|a| pool.iter().map(move |c| composites::tensor_state(a, c)))
            .collect();
        let k = t.space.k();
        assert!(composites::span_check(&products, k * k), "{b}");
    }
}

#[test]
fn invariant_forms_are_invariant() {
    for b in [Builtin::Classical(3), Builtin::SquareGbit, Builtin::Qubit, Builtin::Ball(4)] {
        let t = builtin(b).unwrap();
        let m = groups::invariant_metric(&t.group, &t.space, 0).unwrap();
        let mut rng = sampling::rng(7);
        for _ in 0..20 {
            let g = t.group.random_element(&mut rng);
            assert!((g.transpose() * &m.w_squared * &g - &m.w_squared).amax() < 1e-8, "{b}");
        }
    }
}

#[test]
fn bloch_form_is_idempotent() {
    let mut rng = sampling::rng(8);
    let l0 = sampling::random_rotation(&mut rng, 4) * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 0.5, 2.0]));
    let space = StateSpace::ellipsoid(l0.clone()).unwrap();
    let group = groups::TransformationGroup::named_ball(3).unwrap().conjugated(&l0).unwrap();
    let first = groups::bloch_form(&space, &group, 0).unwrap();
    let second = groups::bloch_form(&first.space, &first.group, 0).unwrap();
    let l2 = &second.frame_map;
    assert!((l2.transpose() * l2 - DMatrix::identity(4, 4)).amax() < 1e-8);
}

#[test]
fn reversible_pair_pass_implies_unit_preservation() {
    for (s, t) in [
        (Builtin::Classical(2), Builtin::Qubit),
        (Builtin::Classical(3), Builtin::Quantum(2)),
        (Builtin::Ball(3), Builtin::Qubit),
    ] {
        let (s, t) = (builtin(s).unwrap(), builtin(t).unwrap());
        let enc = theories::canonical_encoding(&s, &t).unwrap();
        let r = groups::check_reversible_pair(&enc.t, &enc.f, &enc.source, &enc.target, 500, 0).unwrap();
        assert!(r.passed());
        let functional = enc.t.matrix.transpose() * &enc.target.unit_effect().coeffs - &enc.source.unit_effect().coeffs;
        assert!(functional.amax() < r.tolerance);
    }
}

#[test]
fn quantum_c_squared_is_k() {
    for n in 1..=3 {
        let t = builtin(Builtin::Quantum(n)).unwrap();
        let basis = t.space.pauli().unwrap();
        let dim = 1 << n;
        let states: Vec<StateVector> = (0..dim)
            .map(|i| {
                let psi = DVector::from_fn(dim, |r, _| nalgebra::Complex::new(if r == i { 1.0 } else { 0.0 }, 0.0));
                StateVector::new(basis.pure_coefficients(&psi))
            })
            .collect();
        let refs: Vec<&StateVector> = states.iter().collect();
        assert!(t.space.distinguishing_measurement(&refs).is_some(), "n = {n}");
        assert_eq!(t.space.k(), dim * dim);
    }
}

#[test]
fn finite_witnesses_replay() {
    let opts = CheckOptions::default();
    for b in [Builtin::Classical(2), Builtin::Classical(3), Builtin::SquareGbit, Builtin::Quantum(2), Builtin::Ball(2)] {
        let t = builtin(b).unwrap();
        for id in postulates::PostulateId::ALL {
            let r = postulates::run_check(&t, id, &opts).unwrap();
            if let Some(w) = &r.witness {
                let replay = w.replay(&t, 2.0 * r.tolerance).unwrap();
                assert!(replay.reproduced, "{b} {id}: {w:?}");
            }
        }
    }
}

#[test]
fn finite_groups_have_no_lie_kind() {
    for b in [Builtin::Classical(2), Builtin::SquareGbit] {
        let t = builtin(b).unwrap();
        assert!(matches!(t.group.kind(), GroupKind::Finite(_)));
        assert!(!t.group.connected());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decompose_recombines(seed in any::<u64>(), which in 0usize..5) {
        let b = [Builtin::Classical(3), Builtin::SquareGbit, Builtin::Qubit, Builtin::Ball(5), Builtin::Quantum(2)][which];
        let space = builtin(b).unwrap().space;
        for s in space.sample_states(20, seed) {
            let (u, nu) = space.decompose(&s).unwrap();
            if let Some(nu) = nu {
                prop_assert!((nu.coords * u - &s.coords).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_then_marginals_is_identity(seed in any::<u64>(), which in 0usize..4) {
        let b = [Builtin::Classical(3), Builtin::SquareGbit, Builtin::Qubit, Builtin::Ball(3)][which];
        let space = builtin(b).unwrap().space;
        let mut rng = sampling::rng(seed);
        let a = space.random_normalized(&mut rng);
        let c = space.random_normalized(&mut rng);
        let w = composites::tensor_state(&a, &c);
        let (ma, mc) = composites::marginals(&w, &space, &space).unwrap();
        prop_assert!((ma.coords - a.coords).amax() < 1e-12);
        prop_assert!((mc.coords - c.coords).amax() < 1e-12);
    }

    #[test]
    fn bipartite_view_round_trips(v in prop::collection::vec(-1.0f64..1.0, 16)) {
        let w = StateVector::from_slice(&v);
        let b = BipartiteState::from_vector(&w, 3).unwrap();
        prop_assert!((b.to_vector().coords - &w.coords).amax() < 1e-14);
        let back = BipartiteState::from_block_vector(&b.to_block_vector(), 3).unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn separable_states_pass_consistency(seed in any::<u64>()) {
        let q = StateSpace::quantum(1).unwrap();
        let mut rng = sampling::rng(seed);
        let w = composites::random_separable(&q, &q, &mut rng);
        let v = composites::product_effect_consistency(&w, &q, &q, &[], &[], 1e-9, seed).unwrap();
        prop_assert!(v.passed, "{} {}", v.min_value, v.max_value);
    }

    #[test]
    fn density_map_is_linear(seed in any::<u64>(), q in 0.0f64..1.0) {
        let space = StateSpace::quantum(2).unwrap();
        let mut rng = sampling::rng(seed);
        let a = space.random_normalized(&mut rng);
        let c = space.random_normalized(&mut rng);
        let m = mix(&[a.clone(), c.clone()], &[q, 1.0 - q]).unwrap();
        let lhs = theories::bloch_to_density(&m, 2).unwrap().matrix;
        let ra = theories::bloch_to_density(&a, 2).unwrap().matrix;
        let rc = theories::bloch_to_density(&c, 2).unwrap().matrix;
        let rhs = ra * nalgebra::Complex::new(q, 0.0) + rc * nalgebra::Complex::new(1.0 - q, 0.0);
        prop_assert!((lhs - rhs).camax() < 1e-14);
    }

    #[test]
    fn scan_rank_is_non_increasing(seed in 0u64..4) {
        let r = postulates::interaction_scan(2, 0, seed).unwrap();
        prop_assert!(r.stable);
        prop_assert!(r.dims_by_level.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(r.solution_dim, r.local_dim);
    }
}
