mod common;

use approx::relative_eq;
use common::{band_limited, rng, ALPHA, BETA, Q};
use paneitz_core::coefficients::paneitz_constants;
use paneitz_core::diagnostics::ratio_and_complement;
use paneitz_core::functional::{level_from_quotient, quotient_from_level};
use paneitz_core::groundstate::rescale;
use paneitz_core::solver::translation_distance;
use paneitz_core::{EnergyParams, LinearCoefficients, ProductSpec, TorusGrid, TorusPoint};
use proptest::prelude::*;

fn params(dim: usize, eps: f64, length: f64, points: usize) -> EnergyParams {
    let grid = TorusGrid::new(dim, length, points).unwrap();
    EnergyParams::new(eps, Q, LinearCoefficients::limit(ALPHA, BETA), grid).unwrap()
}

fn points_for(dim: usize) -> usize {
    [32, 16, 8][dim - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(seed in any::<u64>(), dim in 1usize..=3, length in 0.5f64..4.0) {
        let grid = TorusGrid::new(dim, length, points_for(dim)).unwrap();
        let u = band_limited(&grid, &mut rng(seed), 3, 0.3);
        let nodal = u.inner(&u).unwrap();
        prop_assert!(relative_eq!(nodal, u.spectral_l2_sq(), max_relative = 1e-12));
    }

    #[test]
    fn linear_operator_is_self_adjoint(seed in any::<u64>(), dim in 1usize..=3, eps in 0.05f64..1.0) {
        let p = params(dim, eps, 1.0, points_for(dim));
        let mut r = rng(seed);
        let u = band_limited(p.grid(), &mut r, 3, 0.0);
        let v = band_limited(p.grid(), &mut r, 3, 0.0);
        let a = p.linear_operator(&u).unwrap().inner(&v).unwrap();
        let b = u.inner(&p.linear_operator(&v).unwrap()).unwrap();
        let scale = p.linear_operator(&u).unwrap().l2_norm() * v.l2_norm();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn solve_linear_inverts_the_operator(seed in any::<u64>(), dim in 1usize..=2, eps in 0.05f64..1.0) {
        let p = params(dim, eps, 1.0, points_for(dim));
        let u = band_limited(p.grid(), &mut rng(seed), 3, 0.4);
        let back = p.solve_linear(&p.linear_operator(&u).unwrap()).unwrap();
        prop_assert!(back.sub(&u).unwrap().max_abs() <= 1e-11 * u.max_abs());
    }

    #[test]
    fn translation_commutes_with_the_laplacian(seed in any::<u64>(), dim in 1usize..=3, s0 in -20i64..20, s1 in -20i64..20, s2 in -20i64..20) {
        let grid = TorusGrid::new(dim, 1.3, points_for(dim)).unwrap();
        let u = band_limited(&grid, &mut rng(seed), 3, 0.0);
        let shift = &[s0, s1, s2][..dim];
        let a = u.laplacian().translate(shift);
        let b = u.translate(shift).laplacian();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-11 * a.max_abs().max(1.0));
        let (dist, _) = translation_distance(&u, &u.translate(shift)).unwrap();
        prop_assert!(dist < 1e-7);
    }

    #[test]
    fn rescaling_identity(seed in any::<u64>(), dim in 1usize..=3, eps in 0.02f64..1.0) {
        let one = params(dim, 1.0, 6.0, points_for(dim));
        let u = band_limited(one.grid(), &mut rng(seed), 3, 0.5);
        let small = rescale(&u, eps).unwrap();
        let p = EnergyParams::new(eps, Q, LinearCoefficients::limit(ALPHA, BETA), small.grid().clone()).unwrap();
        let a = p.quadratic_form(&small).unwrap();
        let b = one.quadratic_form(&u).unwrap();
        prop_assert!(relative_eq!(a, b, max_relative = 1e-10));
        prop_assert!(relative_eq!(p.energy(&small).unwrap(), one.energy(&u).unwrap(), max_relative = 1e-9, epsilon = 1e-12));
    }

    #[test]
    fn quotient_and_lambda_scaling(seed in any::<u64>(), dim in 1usize..=2, c in 0.05f64..20.0) {
        let p = params(dim, 0.3, 1.0, points_for(dim));
        let u = band_limited(p.grid(), &mut rng(seed), 3, 1.0);
        let cu = u.scale(c);
        prop_assert!(relative_eq!(p.y_quotient(&cu).unwrap(), p.y_quotient(&u).unwrap(), max_relative = 1e-12));
        prop_assert!(relative_eq!(p.nehari_lambda(&cu).unwrap() * c, p.nehari_lambda(&u).unwrap(), max_relative = 1e-12));
    }

    #[test]
    fn nehari_point_invariants(seed in any::<u64>(), dim in 1usize..=2, eps in 0.1f64..1.0) {
        let p = params(dim, eps, 1.0, points_for(dim));
        let u = band_limited(p.grid(), &mut rng(seed), 3, 0.8);
        let on = p.nehari_project(&u).unwrap();
        prop_assert!(on.nehari_defect() <= 1e-12);
        prop_assert!(on.quad > 0.0 && on.mass > 0.0);
        prop_assert!(relative_eq!(on.energy, on.mass_level(Q), max_relative = 1e-10));
        let again = p.nehari_project(&on.u).unwrap();
        prop_assert!((again.lambda - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn level_and_quotient_are_inverse(y in 0.01f64..100.0, q in 1.5f64..5.0) {
        prop_assert!(relative_eq!(quotient_from_level(q, level_from_quotient(q, y)), y, max_relative = 1e-12));
    }

    #[test]
    fn concentration_is_translation_equivariant(seed in any::<u64>(), dim in 1usize..=2, s0 in -40i64..40, s1 in -40i64..40, fx in 0.0f64..1.0, fy in 0.0f64..1.0, r in 0.05f64..0.45) {
        let grid = TorusGrid::new(dim, 1.0, points_for(dim)).unwrap();
        let u = band_limited(&grid, &mut rng(seed), 3, 2.0);
        let shift = &[s0, s1][..dim];
        let x: Vec<f64> = [fx, fy][..dim].to_vec();
        let h = grid.spacing();
        let y: Vec<f64> = x.iter().zip(shift).map(|(&c, &s)| (c + s as f64 * h).rem_euclid(1.0)).collect();
        let a = ratio_and_complement(&u, &TorusPoint(x), r, Q).unwrap();
        let b = ratio_and_complement(&u.translate(shift), &TorusPoint(y), r, Q).unwrap();
        prop_assert!((a.0 - b.0).abs() <= 1e-14 && (a.1 - b.1).abs() <= 1e-14, "{a:?} vs {b:?}");
    }

    #[test]
    fn constants_scale_with_the_einstein_constant(pair in 0usize..25, l in 0.1f64..10.0, t in 0.1f64..10.0) {
        let (n, m) = if pair < 5 { (7 + pair as u32, 2) } else { (2 + (pair as u32 - 5) % 5, 3 + (pair as u32 - 5) / 5) };
        let one = paneitz_constants(&ProductSpec::flat(n, m, l).unwrap()).unwrap();
        let two = paneitz_constants(&ProductSpec::flat(n, m, t * l).unwrap()).unwrap();
        prop_assert!(relative_eq!(two.big_a, t * t * one.big_a, max_relative = 1e-13));
        prop_assert!(relative_eq!(two.a, t * t * one.a, max_relative = 1e-13));
        prop_assert!(relative_eq!(two.b, t * one.b, max_relative = 1e-13));
        prop_assert!(two.sign_ok());
    }
}
