use std::f64::consts::PI;
use std::sync::Arc;

use overdet_core::assembly::*;
use overdet_core::geometry::{triangulate, Mesh, PartLabel, Point, PolygonalDomain};

fn disk(h: f64) -> Arc<Mesh> {
    Arc::new(triangulate(&PolygonalDomain::fourier(1.0, &[], &[], 512).unwrap(), h).unwrap())
}

fn quarter(h: f64) -> Arc<Mesh> {
    Arc::new(triangulate(&PolygonalDomain::sector(PI / 2.0, 1.0, 64, 32).unwrap(), h).unwrap())
}

/// ∫_{B_1} (1-ρ)^2 dx by composite Simpson in ρ.
fn radial_weight_oracle() -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let f = |r: f64| (1.0 - r).powi(2) * 2.0 * PI * r;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn weighted_stiffness_of_coordinate_function() {
    let m = disk(0.02);
    let w = WeightSpec::new(1.0, PartLabel::Whole).unwrap();
    let k = stiffness(&m, Some(&w)).unwrap();
    let v: Vec<f64> = m.vertices().iter().map(|p| p.x).collect();
    let oracle = radial_weight_oracle();
    assert!((oracle - PI / 6.0).abs() < 1e-10);
    let got = k.quad_form(&v);
    assert!((got / oracle - 1.0).abs() < 0.03, "{got} vs {oracle}");
}

#[test]
fn dirichlet_linear_data_is_reproduced() {
    let m = disk(0.05);
    let s = solve_mixed_bvp(&m, 0.0, PartLabel::Whole, |p| p.x, None).unwrap();
    let err = m.vertices().iter().zip(s.field.values()).map(|(p, v)| (p.x - v).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-9, "{err}");
}

#[test]
fn dirichlet_flux_of_linear_data_is_normal_component() {
    let m = disk(0.05);
    let s = solve_mixed_bvp(&m, 0.0, PartLabel::Whole, |p| p.x, None).unwrap();
    let flux = boundary_flux(&s, PartLabel::Whole).unwrap();
    for (&e, q) in m.part_edges(PartLabel::Whole).iter().zip(&flux) {
        let mid = m.edge_midpoint(&m.boundary_edges()[e]);
        assert!((q - mid.angle().cos()).abs() < 3.0 * m.h(), "{q} at {mid:?}");
    }
}

#[test]
fn neumann_mean_zero_solution() {
    let m = disk(0.05);
    let k = stiffness(&m, None).unwrap();
    let b = boundary_mass(&m, PartLabel::Whole).unwrap();
    let f: Vec<f64> = m.vertices().iter().map(|p| p.angle().cos()).collect();
    let rhs = b.mul_vec(&f);
    let weights = load_vector(&m);
    let u = solve_spd(&k, &rhs, &Constraints::MeanZero(weights.clone())).unwrap();
    let mean: f64 = u.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / m.area();
    assert!(mean.abs() < 1e-12, "{mean}");
}

#[test]
fn torsion_on_quarter_disk() {
    let m = quarter(0.02);
    let s = solve_mixed_bvp(&m, 2.0, PartLabel::Gamma0, |_| 0.0, Some(PartLabel::Gamma1)).unwrap();
    let err = m
        .vertices()
        .iter()
        .zip(s.field.values())
        .map(|(p, v)| (v - 0.5 * (p.norm_squared() - 1.0)).abs())
        .fold(0.0, f64::max);
    assert!(err < 2.0 * m.h() * m.h(), "{err}");
    let flux = boundary_flux(&s, PartLabel::Gamma0).unwrap();
    for q in flux {
        assert!((q - 1.0).abs() < 0.02, "{q}");
    }
}

#[test]
fn neumann_compatible_harmonic_on_quarter_disk() {
    let exact = |p: Point| p.x * p.x - p.y * p.y;
    let mut errs = Vec::new();
    for h in [0.04, 0.02] {
        let m = quarter(h);
        let s = solve_mixed_bvp(&m, 0.0, PartLabel::Gamma0, exact, Some(PartLabel::Gamma1)).unwrap();
        let err = m.vertices().iter().zip(s.field.values()).map(|(&p, v)| (v - exact(p)).abs()).fold(0.0, f64::max);
        errs.push(err);
        assert!(err < 2.0 * m.h() * m.h(), "{err} at h = {h}");
    }
    assert!(errs[1] < errs[0]);
}

#[test]
fn discrete_maximum_principle() {
    let m = disk(0.05);
    let s = solve_mixed_bvp(&m, 0.0, PartLabel::Whole, |p| (3.0 * p.angle()).sin() + p.y * p.y, None).unwrap();
    let bv = m.part_vertices(PartLabel::Whole);
    let (lo, hi) = bv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
        let v = s.field.values()[i];
        (a.min(v), b.max(v))
    });
    for v in s.field.values() {
        assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
    }
}

#[test]
fn galerkin_orthogonality_and_flux_balance() {
    let m = quarter(0.04);
    let s = solve_mixed_bvp(&m, 3.0, PartLabel::Gamma0, |p| p.x, Some(PartLabel::Gamma1)).unwrap();
    let k = stiffness(&m, None).unwrap();
    let b = load_vector(&m);
    let kv = k.mul_vec(s.field.values());
    let dv = m.part_vertices(PartLabel::Gamma0);
    let scale = b.iter().fold(0.0f64, |a, x| a.max(x.abs())) * 3.0;
    for i in 0..m.num_vertices() {
        if dv.binary_search(&i).is_err() {
            assert!((kv[i] + 3.0 * b[i]).abs() < 1e-10 * scale.max(1.0));
        }
    }
    let flux = boundary_flux(&s, PartLabel::Whole).unwrap();
    let total: f64 = m
        .part_edges(PartLabel::Whole)
        .iter()
        .zip(&flux)
        .map(|(&e, q)| q * m.edge_length(&m.boundary_edges()[e]))
        .sum();
    assert!((total / (3.0 * m.area()) - 1.0).abs() < 1e-8);
}

#[test]
fn pcg_path_agrees_with_direct_path() {
    let m = disk(0.1);
    let k = stiffness(&m, None).unwrap().add_scaled(1.0, &mass(&m));
    let b = load_vector(&m);
    let x1 = Cholesky::factor(&k).unwrap().solve(&b);
    let x2 = pcg(&k, &b, None, 1e-12, 10_000).unwrap();
    for (a, c) in x1.iter().zip(&x2) {
        assert!((a - c).abs() < 1e-9);
    }
}

#[test]
fn operator_triplet_file_roundtrip() {
    let m = disk(0.2);
    let k = stiffness(&m, None).unwrap();
    let back = SparseOperator::from_triplet_text(&k.to_triplet_text()).unwrap();
    assert_eq!(k, back);
}
