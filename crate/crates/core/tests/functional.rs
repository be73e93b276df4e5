mod common;

use std::f64::consts::PI;

use common::{band_limited, bisect, limit_params, rel, rng, ALPHA, BETA, Q};
use paneitz_core::coefficients::paneitz_constants;
use paneitz_core::functional::{level_from_quotient, quotient_from_level};
use paneitz_core::{BaseKind, EnergyParams, Error, Field, LinearCoefficients, ProductSpec, TorusGrid};

fn gaussian(grid: &std::sync::Arc<TorusGrid>, width: f64) -> Field {
    let c = grid.center_point();
    let g = grid.clone();
    Field::from_fn(grid.clone(), |x| {
        let d2: f64 = g.displacement(x, c.coords()).iter().map(|d| d * d).sum();
        (-d2 / (2.0 * width * width)).exp()
    })
    .unwrap()
}

#[test]
fn zero_has_zero_energy() {
    let p = limit_params(0.3, 2, 1.0, 16);
    assert_eq!(p.energy(&Field::zeros(p.grid().clone())).unwrap(), 0.0);
}

#[test]
fn constant_energy_closed_form() {
    let (eps, l, c) = (0.2, 1.5, 0.7);
    for dim in 1..=3 {
        let p = limit_params(eps, dim, l, 8);
        let u = Field::constant(p.grid().clone(), c);
        let expect = eps.powi(-(dim as i32)) * l.powi(dim as i32) * (ALPHA * c * c / 2.0 - c.powf(Q + 1.0) / (Q + 1.0));
        assert!(rel(p.energy(&u).unwrap(), expect) < 1e-13);
    }
}

#[test]
fn energy_matches_dense_quadrature() {
    // u = c(1 + 0.1 cos kx): derivatives in closed form, trapezoid rule on a
    // fine uniform mesh.
    let (eps, l, c) = (0.3, 2.0, 1.1);
    let k = 2.0 * PI / l;
    let p = limit_params(eps, 1, l, 32);
    let u = Field::from_fn(p.grid().clone(), |x| c * (1.0 + 0.1 * (k * x[0]).cos())).unwrap();
    let fine = 4096;
    let h = l / fine as f64;
    let mut sum = 0.0;
    for i in 0..fine {
        let x = i as f64 * h;
        let val = c * (1.0 + 0.1 * (k * x).cos());
        let grad = -0.1 * c * k * (k * x).sin();
        let lap = -0.1 * c * k * k * (k * x).cos();
        let e2 = eps * eps;
        sum += 0.5 * e2 * e2 * lap * lap + 0.5 * e2 * BETA * grad * grad + 0.5 * ALPHA * val * val
            - val.powf(Q + 1.0) / (Q + 1.0);
    }
    let oracle = sum * h / eps;
    assert!(rel(p.energy(&u).unwrap(), oracle) < 1e-8);
}

#[test]
fn curvature_terms_fold_into_effective_coefficients() {
    let spec = ProductSpec::new(2, 7, 1.0, BaseKind::EinsteinLike(0.4)).unwrap();
    let c = paneitz_constants(&spec).unwrap();
    let coeffs = LinearCoefficients::from(&c);
    let eps = 0.3;
    let grid = TorusGrid::new(1, 1.0, 16).unwrap();
    let p = EnergyParams::new(eps, Q, coeffs, grid).unwrap();
    let n_total = 9.0;
    assert!(rel(p.b_eff(), c.b - eps * eps * c.c_phi) < 1e-15);
    let a_eff = c.a + (n_total - 4.0) / 2.0 * (eps.powi(4) * c.f0 + eps * eps * c.f2);
    assert!(rel(p.a_eff(), a_eff) < 1e-15);
}

#[test]
fn non_coercive_forms_are_rejected() {
    let grid = TorusGrid::new(1, 1.0, 16).unwrap();
    let bad = EnergyParams::new(0.1, Q, LinearCoefficients::limit(1.0, -0.5), grid.clone());
    assert!(matches!(bad, Err(Error::NotCoercive(_))));
    let bad = EnergyParams::new(0.1, Q, LinearCoefficients::limit(-1.0, 2.0), grid.clone());
    assert!(matches!(bad, Err(Error::NotCoercive(_))));
    assert!(EnergyParams::new(0.0, Q, LinearCoefficients::limit(1.0, 2.0), grid.clone()).is_err());
    assert!(EnergyParams::new(0.1, 1.0, LinearCoefficients::limit(1.0, 2.0), grid).is_err());
}

#[test]
fn gradient_matches_central_differences() {
    let p = limit_params(0.15, 1, 1.0, 64);
    let mut r = rng(5);
    let t = 1e-5;
    for _ in 0..20 {
        let u = band_limited(p.grid(), &mut r, 4, 1.2);
        let v = band_limited(p.grid(), &mut r, 4, 0.0);
        let fd = (p.energy(&u.axpy(t, &v).unwrap()).unwrap() - p.energy(&u.axpy(-t, &v).unwrap()).unwrap()) / (2.0 * t);
        let exact = p.gradient(&u).unwrap().inner(&v).unwrap();
        assert!(rel(fd, exact) <= 1e-6, "fd {fd} vs {exact}");
    }
}

#[test]
fn gradient_of_a_nonpositive_field_is_linear() {
    let p = limit_params(0.2, 2, 1.0, 16);
    let u = band_limited(p.grid(), &mut rng(3), 3, -5.0);
    assert!(u.max() <= 0.0);
    let lin = p.linear_operator(&u).unwrap().scale(p.weight());
    assert_eq!(p.gradient(&u).unwrap(), lin);
}

#[test]
fn constant_solution_is_critical() {
    let p = limit_params(0.1, 2, 1.0, 16);
    let u = Field::constant(p.grid().clone(), p.constant_solution_value());
    assert!(p.gradient(&u).unwrap().max_abs() < 1e-10);
}

#[test]
fn lambda_on_the_manifold_is_one() {
    let p = limit_params(0.25, 1, 1.0, 32);
    let u = band_limited(p.grid(), &mut rng(9), 3, 2.0);
    let on = p.nehari_project(&u).unwrap();
    assert!((p.nehari_lambda(&on.u).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn lambda_is_homogeneous() {
    let p = limit_params(0.25, 2, 1.0, 16);
    let u = band_limited(p.grid(), &mut rng(10), 3, 1.0);
    let c = 3.7;
    let lu = p.nehari_lambda(&u).unwrap();
    let lcu = p.nehari_lambda(&u.scale(c)).unwrap();
    assert!(rel(lcu, lu / c) < 1e-12);
}

#[test]
fn lambda_matches_bisection() {
    let p = limit_params(0.2, 1, 1.0, 64);
    let u = gaussian(p.grid(), 0.1);
    let quad = p.quadratic_form(&u).unwrap();
    let root = bisect(|t| t * t * quad - p.mass(&u.scale(t)).unwrap(), 1e-3, 1e3);
    assert!(rel(p.nehari_lambda(&u).unwrap(), root) < 1e-12);
}

#[test]
fn projection_properties() {
    let p = limit_params(0.3, 2, 1.0, 16);
    let u = band_limited(p.grid(), &mut rng(12), 3, 0.8);
    let a = p.nehari_project(&u).unwrap();
    let b = p.nehari_project(&u.scale(3.0)).unwrap();
    let diff = a.u.sub(&b.u).unwrap().max_abs() / a.u.max_abs();
    assert!(diff < 1e-10);
    let again = p.nehari_project(&a.u).unwrap();
    assert!((again.lambda - 1.0).abs() < 1e-10);
    assert!(a.nehari_defect() < 1e-12);
    assert!(rel(a.energy, a.mass_level(Q)) < 1e-8);
    assert!(rel(a.energy, a.quad / 2.0 - a.mass / (Q + 1.0)) < 1e-10);
    assert!(a.energy > 0.0);
}

#[test]
fn projection_of_a_nonpositive_field_is_degenerate() {
    let p = limit_params(0.3, 1, 1.0, 16);
    let u = Field::constant(p.grid().clone(), -1.0);
    assert!(matches!(p.nehari_lambda(&u), Err(Error::DegenerateInput(_))));
    assert!(matches!(p.nehari_project(&u), Err(Error::DegenerateInput(_))));
}

#[test]
fn quotient_is_scale_invariant_and_maps_to_the_level() {
    let p = limit_params(0.3, 1, 1.0, 32);
    let u = band_limited(p.grid(), &mut rng(13), 3, 1.5);
    let y = p.y_quotient(&u).unwrap();
    assert!(rel(p.y_quotient(&u.scale(0.37)).unwrap(), y) < 1e-12);
    let m = level_from_quotient(Q, y);
    assert!(rel(quotient_from_level(Q, m), y) < 1e-13);
    // On the manifold the level equals the energy of the projected field
    // exactly when u is a critical point; the map itself is monotone.
    assert!(level_from_quotient(Q, 1.1 * y) > m);
}

#[test]
fn grid_mismatch_is_reported() {
    let p = limit_params(0.3, 1, 1.0, 32);
    let other = Field::constant(TorusGrid::new(1, 2.0, 32).unwrap(), 1.0);
    assert!(matches!(p.energy(&other), Err(Error::GridMismatch)));
}
