use std::f64::consts::PI;
use std::sync::Arc;

use overdet_core::assembly::ScalarField;
use overdet_core::cone::*;
use overdet_core::geometry::*;

fn sector_mesh(angle: f64, n_arc: usize, h: f64) -> Arc<Mesh> {
    Arc::new(triangulate(&PolygonalDomain::sector(angle, 1.0, n_arc, 32).unwrap(), h).unwrap())
}

fn saddle(p: Point) -> f64 {
    p.x * p.x - p.y * p.y
}

fn ellipse_cone(h: f64) -> Arc<Mesh> {
    let (a, b) = (1.2, 1.0 / 1.2);
    let d = PolygonalDomain::cone(PI / 2.0, |phi: f64| 1.0 / ((phi.cos() / a).powi(2) + (phi.sin() / b).powi(2)).sqrt(), 64, 32)
        .unwrap();
    Arc::new(triangulate(&d, h).unwrap())
}

#[test]
fn constant_data_has_exact_means() {
    let m = sector_mesh(PI / 2.0, 64, 0.02);
    let ex = ConeExperiment::new(m.clone(), |_| 1.0).unwrap();
    let r = mean_value_residuals(&ex, &radius_grid(&m, 10).unwrap()).unwrap();
    assert!(r.max_cap_dev <= 1e-10 && r.solid_mean_dev <= 1e-10);
}

#[test]
fn superposed_data_keeps_unit_mean() {
    let m = sector_mesh(PI / 2.0, 64, 0.02);
    let ex = ConeExperiment::new(m.clone(), |p| 1.0 + saddle(p)).unwrap();
    let grid = radius_grid(&m, 10).unwrap();
    let r = mean_value_residuals(&ex, &grid).unwrap();
    assert!(r.table.iter().all(|row| (row.psi - 1.0).abs() < 4.0 * 0.02 * 0.02));
    assert!(r.psi_spread <= 2.0 * r.max_cap_dev + 1e-15);
    assert!(r.coarea_residual < 1e-6);
}

#[test]
fn mean_value_refinement() {
    let mut devs = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let m = sector_mesh(PI / 2.0, 64, h);
        let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
        let r = mean_value_residuals(&ex, &radius_grid(&m, 10).unwrap()).unwrap();
        devs.push(r.max_cap_dev.max(r.solid_mean_dev));
    }
    assert!(devs[0] <= 0.02);
    assert!(devs[1] <= 0.5 * devs[0] && devs[2] <= 0.5 * devs[1], "{devs:?}");
    let analytic = arc_mean(|p| Some(saddle(p)), Point::ORIGIN, 0.0, PI / 2.0, 0.5).unwrap();
    assert!(analytic.abs() <= 1e-10);
}

#[test]
fn wide_sector_with_corner_exponent() {
    let m = sector_mesh(2.0 * PI / 3.0, 96, 0.02);
    let ex = ConeExperiment::new(m.clone(), |p| p.norm().powf(1.5) * (1.5 * p.angle()).cos()).unwrap();
    let r = mean_value_residuals(&ex, &radius_grid(&m, 10).unwrap()).unwrap();
    assert!(r.max_cap_dev <= 0.03 && r.solid_mean_dev <= 0.03);
}

#[test]
fn cap_radius_must_stay_inside() {
    let m = sector_mesh(PI / 2.0, 64, 0.05);
    let f = ScalarField::constant(m.clone(), 1.0);
    assert!(cap_mean(&f, Point::ORIGIN, 1.0).is_err());
    assert!(cap_mean(&f, Point::ORIGIN, 0.0).is_err());
    assert!(cap_mean(&f, Point::new(0.1, 0.1), 0.5).is_err());
    assert!(PolygonalDomain::sector(1.5 * PI, 1.0, 64, 32).is_err());
}

#[test]
fn duality_on_the_quarter_disk() {
    let m = sector_mesh(PI / 2.0, 64, 0.02);
    let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
    let hs = vec![ScalarField::constant(m.clone(), 1.0), ex.harmonic.field.clone()];
    let d = duality_check(&ex, &hs).unwrap();
    assert!(d.uflux_const_dev <= 0.02 && d.max_mean_match_dev() <= 0.02);
    assert!(d.max_integration_identity_residual() <= 0.02);
    assert!(d.torsion_flux_balance <= 1e-8);
    assert!(d.rows.iter().all(|r| r.integration_identity_edge_residual <= 0.02));
    assert!(duality_check(&ex, &[]).is_err());
}

#[test]
fn duality_fails_together_off_the_ball() {
    let m = ellipse_cone(0.02);
    let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
    let hs = vec![ScalarField::constant(m.clone(), 1.0), ex.harmonic.field.clone()];
    let d = duality_check(&ex, &hs).unwrap();
    let tol = m.h() * m.h();
    assert!(d.uflux_const_dev > 5.0 * tol && d.uflux_const_dev > 0.02);
    assert!(d.max_mean_match_dev() > 0.02);
    assert!(d.max_integration_identity_residual() <= 0.02 && d.torsion_flux_balance <= 1e-8);
}

#[test]
fn cone_poincare_cases() {
    let m = sector_mesh(PI / 2.0, 64, 0.02);
    let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
    let c = cone_poincare_check(&ex).unwrap();
    assert!(c.ratio <= 1.05 && c.ratio > 0.0, "{c:?}");

    let half = sector_mesh(PI, 128, 0.02);
    let ex = ConeExperiment::new(half, saddle).unwrap();
    let c = cone_poincare_check(&ex).unwrap();
    assert!(c.ratio <= 1.05 && c.ratio > 0.0, "{c:?}");

    let flat = ConeExperiment::new(m, |_| 1.0).unwrap();
    let c = cone_poincare_bound(&flat, 0.5).unwrap();
    assert!(c.lhs < 1e-12 && c.rhs_bound < 1e-10 && c.ratio == 0.0);
}
