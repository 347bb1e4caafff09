use proptest::prelude::*;

use crate::boardgame::{build_tree_graph, path_to_representative, upper_echelon_classes, CollisionMap, Vertex};
use crate::collision::collision_apply;
use crate::density::{DensityMatrix, HierarchySequence, ProductKernel};
use crate::hierarchy::growth_bound_check;
use crate::nbody::{build_potential, marginal, nbody_evolve, HamiltonianHandle, Method, NBodyState, Profile};
use crate::nls::{evolve_to, free_propagate, Integrator, NlsParams};
use crate::probe::trilinear_lhs;
use crate::spectral::random::{random_field, random_unit_field, Envelope};
use crate::spectral::{dyadic_multiplier, make_lattice, Direction, TorusField};
use crate::C64;

fn field(m: usize, seed: u64) -> TorusField {
    random_field(make_lattice(m).unwrap(), seed, 0, Envelope::Gaussian { width: 1.5 })
}

fn hermitian_state(seed: u64) -> DensityMatrix {
    let lat = make_lattice(1).unwrap();
    let f = |s| random_unit_field(lat, seed, s, Envelope::Flat);
    let (a, b) = (f(0), f(1));
    let mut g = DensityMatrix::product_of(&[(&a, &a), (&b, &b)]).unwrap();
    g.axpy(C64::new(1.0, 0.0), &DensityMatrix::product_of(&[(&b, &b), (&a, &a)]).unwrap()).unwrap();
    g
}

/// Maps with `k + r <= 8`, drawn value by value so that `rho(j) < j`.
fn collision_map() -> impl Strategy<Value = CollisionMap> {
    (1usize..=4, 0usize..=4).prop_flat_map(|(k, r)| {
        let cols: Vec<_> = (0..r).map(|l| 1..(k + l + 1)).collect();
        cols.prop_map(move |rho| CollisionMap::new(k, rho).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip_and_plancherel(m in 1usize..=5, seed in any::<u64>()) {
        let f = field(m, seed);
        let back = f.transform(Direction::ToGrid).unwrap();
        prop_assert!(back.max_abs_diff(&f) <= 1e-12 * f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max));
        let g = f.to_padded_grid();
        let n = g.size as f64;
        let grid_mass: f64 = g.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * (2.0 * std::f64::consts::PI / n).powi(3);
        prop_assert!((grid_mass / f.l2_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn littlewood_paley_partition_of_unity(x in -12i64..=12, y in -12i64..=12, z in -12i64..=12) {
        let total: f64 = (0..6).map(|j| dyadic_multiplier(1 << j, [x, y, z])).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sobolev_norms_are_monotone(seed in any::<u64>(), s in 0.0f64..2.0, ds in 0.0f64..1.0) {
        let f = field(3, seed);
        prop_assert!((f.sobolev_norm(0.0).unwrap() - f.l2_norm()).abs() < 1e-13 * f.l2_norm());
        prop_assert!(f.sobolev_norm(s).unwrap() <= f.sobolev_norm(s + ds).unwrap() * (1.0 + 1e-14));
    }

    #[test]
    fn free_group_law_and_unitarity(seed in any::<u64>(), s in -2.0f64..2.0, t in -2.0f64..2.0, sob in 0.0f64..2.0) {
        let f = field(3, seed);
        let two = free_propagate(&free_propagate(&f, s), t);
        prop_assert!(two.max_abs_diff(&free_propagate(&f, s + t)) < 1e-12 * f.l2_norm());
        let a = f.sobolev_norm(sob).unwrap();
        prop_assert!((free_propagate(&f, t).sobolev_norm(sob).unwrap() - a).abs() < 1e-13 * a);
    }

    #[test]
    fn strang_is_mass_conserving_and_reversible(seed in any::<u64>(), lambda in prop::sample::select(vec![1.0, -1.0])) {
        let phi = random_unit_field(make_lattice(2).unwrap(), seed, 0, Envelope::Gaussian { width: 1.0 });
        let p = NlsParams::new(lambda, 1e-3, 0.05, Integrator::SplitStepStrang).unwrap();
        let u = evolve_to(&phi, 0.05, &p).unwrap();
        prop_assert!((u.l2_norm_sq() - 1.0).abs() < 1e-12);
        let back = evolve_to(&u.conj(), 0.05, &p).unwrap().conj();
        prop_assert!(back.max_abs_diff(&phi) < 1e-10);
    }

    #[test]
    fn partial_trace_of_factorized_states(seed in any::<u64>(), scale in 0.5f64..2.0) {
        let phi = field(1, seed).normalized().unwrap().scale(C64::new(scale, 0.0));
        let g2 = DensityMatrix::factorized_state(&phi, 2).unwrap();
        let w = phi.l2_norm_sq();
        for k in 1..2 {
            let lower = g2.partial_trace(k).unwrap();
            let expect = DensityMatrix::factorized_state(&phi, k).unwrap().scale(C64::new(w.powi(2 - k as i32), 0.0));
            prop_assert!(lower.sub(&expect).unwrap().hs_norm() < 1e-12 * expect.hs_norm());
        }
        prop_assert!((g2.trace().re - w.powi(2)).abs() < 1e-12 * w.powi(2));
    }

    #[test]
    fn dense_operations_preserve_structure(seed in any::<u64>(), t in -1.0f64..1.0, alpha in 0.0f64..2.0) {
        let g = hermitian_state(seed);
        prop_assert!(g.trace_norm() >= g.trace().norm() * (1.0 - 1e-12));
        let a = g.free_evolve(t).sobolev_weight(alpha);
        let b = g.sobolev_weight(alpha).free_evolve(t);
        prop_assert!(a.sub(&b).unwrap().hs_norm() < 1e-13 * a.hs_norm());
        for h in [&a, &g.partial_trace(1).unwrap()] {
            prop_assert!(h.hermitian_defect() < 1e-12 * h.hs_norm().max(1.0));
            prop_assert!(h.symmetry_defect() < 1e-12 * h.hs_norm().max(1.0));
        }
        let positive = DensityMatrix::factorized_state(&random_unit_field(make_lattice(1).unwrap(), seed, 7, Envelope::Flat), 1).unwrap();
        prop_assert!((positive.trace_norm() - positive.trace().re).abs() < 1e-12);
    }

    #[test]
    fn collision_is_linear_and_traceless(seed in any::<u64>(), c in -2.0f64..2.0) {
        let (g, h) = (hermitian_state(seed), hermitian_state(seed ^ 0x5555));
        let mut sum = g.clone();
        sum.axpy(C64::new(c, 0.0), &h).unwrap();
        let lhs = collision_apply(&sum, 1).unwrap();
        let mut rhs = collision_apply(&g, 1).unwrap();
        rhs.axpy(C64::new(c, 0.0), &collision_apply(&h, 1).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().hs_norm() < 1e-12 * lhs.hs_norm().max(1.0));
        prop_assert!(collision_apply(&g, 1).unwrap().trace().norm() < 1e-10);
    }

    #[test]
    fn forest_shape(sigma in collision_map()) {
        let (k, r) = (sigma.k(), sigma.r());
        let forest = build_tree_graph(&sigma).unwrap();
        prop_assert_eq!(forest.trees.len(), k);
        prop_assert_eq!(forest.trees.iter().map(|t| t.m()).sum::<usize>(), r);
        prop_assert_eq!(forest.trees.iter().map(|t| t.leaves.len()).sum::<usize>(), k + r);
        prop_assert_eq!(forest.distinguished_vertex(), (r > 0).then_some(r));
        if r > 0 {
            prop_assert!(forest.children(Vertex::Internal(r)).iter().all(|v| matches!(v, Vertex::Leaf(_))));
        }
    }

    #[test]
    fn moves_reach_the_class_representative(sigma in collision_map()) {
        let (rep, perm) = path_to_representative(&sigma);
        prop_assert!(rep.is_upper_echelon());
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..sigma.r()).collect::<Vec<_>>());
        let classes = upper_echelon_classes(sigma.k(), sigma.r()).unwrap();
        let class = classes.iter().find(|c| c.members.contains(&sigma)).unwrap();
        prop_assert_eq!(&class.representative, &rep);
    }

    #[test]
    fn trilinear_lhs_is_homogeneous(seed in any::<u64>(), c in 0.1f64..10.0, shift in 0.0f64..0.5) {
        let lat = make_lattice(2).unwrap();
        let u: Vec<_> = (0..3).map(|j| random_unit_field(lat, seed, j, Envelope::Flat)).collect();
        let scaled = u[0].scale(C64::new(c, 0.0));
        let (a, _) = trilinear_lhs([&u[0], &u[1], &u[2]], (0.0, 0.5));
        let (b, _) = trilinear_lhs([&scaled, &u[1], &u[2]], (0.0, 0.5));
        prop_assert!((b / (c * a) - 1.0).abs() < 1e-12);
        let (lhs, check) = trilinear_lhs([&u[0], &u[1], &u[2]], (shift, shift + 0.5));
        prop_assert!((lhs - check).abs() < 1e-10 * lhs);
    }

    #[test]
    fn growth_values_increase_with_alpha(seed in any::<u64>(), alpha in 0.0f64..2.0, da in 0.0f64..1.0) {
        let seq = HierarchySequence::<ProductKernel>::factorized(&field(2, seed).normalized().unwrap(), 3).unwrap();
        let lo = growth_bound_check(&seq, alpha, 1.0).unwrap();
        let hi = growth_bound_check(&seq, alpha + da, 1.0).unwrap();
        prop_assert!(lo.values.iter().zip(&hi.values).all(|(a, b)| *a <= b * (1.0 + 1e-12)));
        prop_assert!(lo.minimal_bound <= hi.minimal_bound * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn nbody_marginals_and_flow(seed in any::<u64>(), t in 0.0f64..0.3, beta in 0.1f64..0.59) {
        let lat = make_lattice(1).unwrap();
        let v = build_potential(Profile::default(), 2, beta, lat).unwrap();
        prop_assert!((v.coeff([0, 0, 0]) - 1.0).abs() < 1e-12);
        prop_assert_eq!(v.coeff([1, -1, 0]), v.coeff([-1, 1, 0]));
        let h = HamiltonianHandle::new(&v, 1.0).unwrap();
        let psi = NBodyState::random_symmetric(lat, 2, seed).unwrap();
        let out = nbody_evolve(&psi, &h, t, Method::Dense).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        prop_assert!(out.symmetry_defect() < 1e-12);
        prop_assert!((h.energy(&out).unwrap() - h.energy(&psi).unwrap()).abs() < 1e-9);
        let g2 = marginal(&out, 2).unwrap();
        let g1 = marginal(&out, 1).unwrap();
        prop_assert!((g1.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(g2.partial_trace(1).unwrap().sub(&g1).unwrap().hs_norm() < 1e-12);
        prop_assert!(g1.eigenvalues().iter().all(|&e| e > -1e-12));
    }
}
