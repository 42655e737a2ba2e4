//! Randomized invariants across the core modules.

mod common;

use std::collections::BTreeSet;

use ccop_core::bridge::{binomial, companion_count, lift};
use ccop_core::numkern::{rank_and_nullbasis, restricted_inertia, solve_multipliers};
use ccop_core::regmpoc::{check_mpoc_licq, check_y_structure};
use ccop_core::{census_quadratic, check_cc_licq, certify_m, parse, Problem};
use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(96))]

    #[test]
    fn jet_matches_central_differences(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_polynomial(&mut rng, n, 3);
        let x = random_vec(&mut rng, n, -1.5, 1.5);
        let jet = e.eval2(&x).unwrap();
        let h = 1e-5;
        let shifted = |i: usize, d: f64| {
            let mut z = x.clone();
            z[i] += d;
            z
        };
        for i in 0..n {
            let (p, m) = (shifted(i, h), shifted(i, -h));
            let fd = (e.value(&p).unwrap() - e.value(&m).unwrap()) / (2.0 * h);
            prop_assert!(rel_err(jet.gradient()[i], fd) <= 1e-6, "d{} {} vs {}", i, jet.gradient()[i], fd);
            let gp = e.eval2(&p).unwrap();
            let gm = e.eval2(&m).unwrap();
            for j in 0..n {
                let fd2 = (gp.gradient()[j] - gm.gradient()[j]) / (2.0 * h);
                prop_assert!(rel_err(jet.hessian_entry(i, j), fd2) <= 1e-6);
            }
        }
        let hess = jet.hessian();
        prop_assert_eq!(&hess, &hess.transpose());
    }

    #[test]
    fn printing_and_reparsing_is_stable(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_polynomial(&mut rng, n, 4);
        let once = parse(&e.to_string(), n).unwrap();
        let twice = parse(&once.to_string(), n).unwrap();
        prop_assert_eq!(&once, &twice);
        let x = random_vec(&mut rng, n, -1.0, 1.0);
        prop_assert!(rel_err(e.value(&x).unwrap(), once.value(&x).unwrap()) <= 1e-12);
    }

    #[test]
    fn null_basis_is_orthonormal_and_annihilated(seed in any::<u64>(), m in 0usize..5, k in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(m, k, |_, _| uniform(&mut rng, -1.0, 1.0));
        if m >= 2 && rng.gen_bool(0.5) {
            // force a dependent row
            let row = a.row(0) * 2.0;
            a.set_row(m - 1, &row);
        }
        let t = tol();
        let (r, nb) = rank_and_nullbasis(&a, &t);
        prop_assert_eq!(r + nb.ncols(), k);
        let sigma_max = if m == 0 { 0.0 } else { a.singular_values().max() };
        prop_assert!((&a * &nb).amax() <= 10.0 * t.tol_rank * sigma_max.max(1.0));
        let gram = nb.transpose() * &nb;
        prop_assert!((gram - DMatrix::identity(nb.ncols(), nb.ncols())).amax() <= 1e-12);
    }

    #[test]
    fn inertia_survives_rebasing(seed in any::<u64>(), k in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.gen_range(k..=k + 3);
        let v = random_orthonormal(&mut rng, dim, dim);
        let d: Vec<f64> = (0..dim)
            .map(|_| match rng.gen_range(0..3) {
                0 => 0.0,
                _ => signed(&mut rng, 0.1, 3.0),
            })
            .collect();
        let h = &v * DMatrix::from_diagonal(&DVector::from_vec(d)) * v.transpose();
        let basis = random_orthonormal(&mut rng, dim, k);
        let q = random_orthonormal(&mut rng, k, k);
        let t = tol();
        prop_assert_eq!(restricted_inertia(&h, &basis, &t), restricted_inertia(&h, &(&basis * q), &t));
    }

    #[test]
    fn least_squares_residual_is_distance_to_range(seed in any::<u64>(), m in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=m);
        let g = DMatrix::from_fn(m, k, |_, _| uniform(&mut rng, -1.0, 1.0));
        prop_assume!(g.singular_values().min() > 1e-3);
        let target = DVector::from_fn(m, |_, _| uniform(&mut rng, -1.0, 1.0));
        let (_, residual) = solve_multipliers(&g, &target, &tol());
        let gram = g.transpose() * &g;
        let projector = &g * gram.try_inverse().unwrap() * g.transpose();
        let distance = (&target - projector * &target).norm();
        prop_assert!((residual - distance).abs() <= 1e-10);
    }

    #[test]
    fn binomials_are_symmetric(n in 0u64..60, k in 0u64..60) {
        prop_assume!(k <= n);
        prop_assert_eq!(binomial(n, k).unwrap(), binomial(n, n - k).unwrap());
        if k >= 1 {
            prop_assert_eq!(
                binomial(n + 1, k).unwrap(),
                binomial(n, k).unwrap() + binomial(n, k - 1).unwrap()
            );
        }
    }
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn licq_verdicts_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_feasible_case(&mut rng, 6);
        let t = tol();
        prop_assert_eq!(
            check_cc_licq(&case.problem, &case.x, &t).unwrap(),
            check_mpoc_licq(&case.rp, &case.x, &case.y, &t).unwrap()
        );
    }
}

/// Nondegenerate census points of a random quadratic instance.
fn census_instance(seed: u64, max_n: usize) -> (Problem, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::random(&mut rng, max_n, 1, 2);
    let pr = random_quadratic(&mut rng, shape);
    let census = census_quadratic(&pr, &tol()).unwrap();
    let points = census
        .m_points
        .iter()
        .filter(|m| m.nondegenerate())
        .map(|m| m.point.clone())
        .collect();
    (pr, points)
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn index_zero_means_full_support(seed in any::<u64>()) {
        let (pr, points) = census_instance(seed, 5);
        for x in points {
            let m = certify_m(&pr, &x, &tol()).unwrap();
            if m.m_index == Some(0) {
                prop_assert_eq!(m.quadratic_index, 0);
                prop_assert_eq!(m.sparsity_index, 0);
                prop_assert_eq!(m.activity.x_norm0, pr.s());
            }
        }
    }

    #[test]
    fn scaling_the_objective_scales_multipliers(seed in any::<u64>(), alpha in 0.5f64..2.0) {
        let (pr, points) = census_instance(seed, 5);
        let scaled = pr.with_scaled_objective(alpha);
        for x in points {
            let a = certify_m(&pr, &x, &tol()).unwrap();
            let b = certify_m(&scaled, &x, &tol()).unwrap();
            prop_assert_eq!(a.ndm, b.ndm);
            prop_assert_eq!(a.m_index, b.m_index);
            let (ma, mb) = (&a.multipliers, &b.multipliers);
            for (p, q) in ma.lambda.iter().zip(&mb.lambda) {
                prop_assert!((alpha * p - q).abs() <= 1e-8 * (1.0 + q.abs()));
            }
            for (map_a, map_b) in [(&ma.mu, &mb.mu), (&ma.gamma, &mb.gamma)] {
                prop_assert_eq!(map_a.keys().collect::<Vec<_>>(), map_b.keys().collect::<Vec<_>>());
                for (i, p) in map_a {
                    prop_assert!((alpha * p - map_b[i]).abs() <= 1e-8 * (1.0 + p.abs()));
                }
            }
        }
    }

    #[test]
    fn unique_multipliers_ignore_constraint_order(seed in any::<u64>()) {
        let (pr, points) = census_instance(seed, 5);
        let k = pr.inequalities().len();
        prop_assume!(k >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let g = order.iter().map(|&i| pr.inequalities()[i].clone()).collect();
        let shuffled = Problem::new(pr.n(), pr.s(), pr.objective().clone(), pr.equalities().to_vec(), g).unwrap();
        for x in points {
            let a = certify_m(&pr, &x, &tol()).unwrap();
            prop_assume!(a.ndm.ndm1);
            let b = certify_m(&shuffled, &x, &tol()).unwrap();
            for (new, &old) in order.iter().enumerate() {
                match (a.multipliers.mu.get(&old), b.multipliers.mu.get(&new)) {
                    (Some(p), Some(q)) => prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs())),
                    (None, None) => {}
                    other => prop_assert!(false, "activity differs: {:?}", other),
                }
            }
            for (i, p) in &a.multipliers.gamma {
                prop_assert!((p - b.multipliers.gamma[i]).abs() <= 1e-9 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn lifts_are_counted_distinct_and_structured(seed in any::<u64>()) {
        let (pr, points) = census_instance(seed, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11f7);
        let rp = regularize(&mut rng, pr.clone());
        let t = tol();
        for x in points {
            let set = lift(&rp, &x, &t).unwrap();
            let m = &set.base;
            prop_assert_eq!(
                set.companions.len() as u64,
                companion_count(rp.n(), rp.s(), m.activity.x_norm0).unwrap()
            );
            let distinct: BTreeSet<Vec<u64>> = set
                .companions
                .iter()
                .map(|c| c.y.iter().map(|v| v.to_bits()).collect())
                .collect();
            prop_assert_eq!(distinct.len(), set.companions.len());
            for c in &set.companions {
                let tc = &c.certificate;
                prop_assert!(check_y_structure(&rp, &c.y, &t));
                prop_assert!(tc.nondegenerate() && tc.ndt.ndt5, "{:?}", tc.degenerate_reason);
                prop_assert_eq!(tc.t_index, m.m_index);
                prop_assert!(tc.residual <= 1e-8);
            }
        }
    }
}
