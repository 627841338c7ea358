use std::f64::consts::PI;

use overdet_core::assembly::{boundary_mass, mass, stiffness, WeightSpec};
use overdet_core::geometry::*;
use overdet_core::poincare::*;

/// First positive zero of J1' from the power series of J1, by bisection.
fn first_zero_of_j1_prime() -> f64 {
    let dj1 = |x: f64| {
        let mut s = 0.0;
        let mut fact_k = 1.0;
        let mut fact_k1 = 1.0;
        for k in 0..40 {
            if k > 0 {
                fact_k *= k as f64;
                fact_k1 *= (k + 1) as f64;
            }
            let n = (2 * k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * n * (x / 2.0).powi(2 * k) / (2.0 * fact_k * fact_k1);
        }
        s
    };
    let (mut a, mut b) = (1.5, 2.2);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if dj1(a) * dj1(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn disk(r: f64) -> PolygonalDomain {
    PolygonalDomain::fourier(r, &[], &[], 512).unwrap()
}

fn square() -> PolygonalDomain {
    PolygonalDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
}

/// Marks square sides as `Gamma1` when `on(mid)` holds.
fn square_with(h: f64, on: impl Fn(Point) -> bool) -> Mesh {
    triangulate(&square(), h)
        .unwrap()
        .relabeled(|a, b| if on((a + b) * 0.5) { PartLabel::Gamma1 } else { PartLabel::Whole })
        .unwrap()
}

#[test]
fn disk_constant_against_bessel_root() {
    let j = first_zero_of_j1_prime();
    assert!((j - 1.84118).abs() < 1e-5);
    let m = triangulate(&disk(1.0), 0.02).unwrap();
    let e = estimate_scalar_constant(&m, &WeightSpec::unweighted()).unwrap();
    assert!((e.constant - 1.0 / j).abs() < 0.02 / j, "{}", e.constant);
    let k = stiffness(&m, None).unwrap();
    let q = rayleigh_quotient(&k, &mass(&m), &e.minimizer);
    assert!((q - e.eigenvalue).abs() < 1e-8 * e.eigenvalue);
    let mean: f64 = mass(&m).mul_vec(&e.minimizer).iter().sum();
    assert!(mean.abs() < 1e-10 * e.minimizer.iter().map(|x| x.abs()).fold(0.0, f64::max));
}

#[test]
fn square_constant_is_one_over_pi() {
    let m = triangulate(&square(), 0.02).unwrap();
    let e = estimate_scalar_constant(&m, &WeightSpec::unweighted()).unwrap();
    assert!((e.constant * PI - 1.0).abs() < 0.02, "{}", e.constant);
}

#[test]
fn weight_makes_constant_larger_on_small_disk() {
    let m = triangulate(&disk(0.5), 0.02).unwrap();
    let c0 = estimate_scalar_constant(&m, &WeightSpec::unweighted()).unwrap().constant;
    let c4 = estimate_scalar_constant(&m, &WeightSpec::new(0.4, PartLabel::Whole).unwrap()).unwrap().constant;
    assert!(c4 > c0);
    assert!(WeightSpec::new(1.2, PartLabel::Whole).is_err());
}

#[test]
fn trace_constant_properties() {
    let w = WeightSpec::unweighted();
    let consts: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&h| estimate_trace_constant(&triangulate(&disk(1.0), h).unwrap(), PartLabel::Whole, &w).unwrap().constant)
        .collect();
    assert!((consts[2] - consts[1]).abs() < 0.02 * consts[2]);

    let m = triangulate(&disk(1.0), 0.04).unwrap();
    let whole = estimate_trace_constant(&m, PartLabel::Whole, &w).unwrap();
    let lower = (2.0 * PI * (1.0 - 1e-4) / m.area()).sqrt();
    assert!(whole.constant > lower);
    let quarter = m
        .relabeled(|a, b| {
            let mid = (a + b) * 0.5;
            if mid.x > 0.0 && mid.y > 0.0 {
                PartLabel::Gamma1
            } else {
                PartLabel::Gamma0
            }
        })
        .unwrap();
    let q = estimate_trace_constant(&quarter, PartLabel::Gamma1, &w).unwrap();
    assert!(q.constant <= whole.constant);
    let ba = boundary_mass(&quarter, PartLabel::Gamma1).unwrap();
    let b = mass(&quarter).add_scaled(1.0, &stiffness(&quarter, None).unwrap());
    assert!((rayleigh_quotient(&ba, &b, &q.minimizer) - q.eigenvalue).abs() < 1e-8 * q.eigenvalue);
    assert!(estimate_trace_constant(&m, PartLabel::Whole, &WeightSpec::new(0.5, PartLabel::Whole).unwrap()).is_err());
}

#[test]
fn vector_constant_matches_dense_oracle() {
    let w = WeightSpec::new(0.25, PartLabel::Whole).unwrap();
    let m = square_with(0.2, |p| p.y < 1e-9 || p.x < 1e-9);
    let sparse = estimate_vector_constant(&m, PartLabel::Gamma1, &w).unwrap();
    let dense = dense_vector_constant(&m, PartLabel::Gamma1, &w).unwrap();
    assert!((sparse.constant - dense).abs() < 1e-8, "{} {}", sparse.constant, dense);
    assert!(sparse.eigenvalue > 0.0);
    let span = normal_span(&m, PartLabel::Gamma1).unwrap();
    assert_eq!(span.rank, 2);
    // the minimizer has no normal component on A
    for (i, n) in span.vertex_normals {
        let v = Point::new(sparse.minimizer[2 * i], sparse.minimizer[2 * i + 1]);
        assert!(v.dot(n).abs() < 1e-10);
    }
}

#[test]
fn rank_one_reduces_to_zero_trace() {
    for alpha in [0.0, 0.25] {
        let w = WeightSpec::new(alpha, PartLabel::Whole).unwrap();
        let m = square_with(0.1, |p| p.y < 1e-9);
        let v = estimate_vector_constant(&m, PartLabel::Gamma1, &w).unwrap();
        let s = estimate_zero_trace_constant(&m, PartLabel::Gamma1, &w).unwrap();
        assert!((v.constant - s.constant).abs() < 1e-8 * s.constant);
        let d = dense_vector_constant(&m, PartLabel::Gamma1, &w).unwrap();
        assert!((v.constant - d).abs() < 1e-8);
        let rb = explicit_bound(&m, PartLabel::Gamma1, &w).unwrap();
        assert!(rb.holds, "{rb:?}");
    }
}

#[test]
fn growing_a_along_a_side_never_increases_the_constant() {
    let w = WeightSpec::new(0.25, PartLabel::Whole).unwrap();
    let mut prev = f64::INFINITY;
    for reach in [0.25, 0.5, 1.0] {
        let m = square_with(0.05, |p| p.x < 1e-9 || (p.y < 1e-9 && p.x < reach));
        let c = estimate_vector_constant(&m, PartLabel::Gamma1, &w).unwrap().constant;
        assert!(c <= prev * (1.0 + 1e-10), "{c} > {prev}");
        prev = c;
    }
}

#[test]
fn distance_to_gamma0_path_checks_disjointness() {
    let w = WeightSpec::new(0.8, PartLabel::Gamma0).unwrap();
    let m = triangulate(&square(), 0.1)
        .unwrap()
        .relabeled(|a, b| {
            let mid = (a + b) * 0.5;
            if mid.y < 1e-9 {
                PartLabel::Gamma1
            } else if mid.y > 1.0 - 1e-9 {
                PartLabel::Gamma0
            } else {
                PartLabel::Whole
            }
        })
        .unwrap();
    let e = estimate_vector_constant(&m, PartLabel::Gamma1, &w).unwrap();
    assert!(e.constant.is_finite() && e.constant > 0.0);
    let touching = m
        .relabeled(|a, b| {
            let mid = (a + b) * 0.5;
            if mid.y < 1e-9 {
                PartLabel::Gamma1
            } else {
                PartLabel::Gamma0
            }
        })
        .unwrap();
    assert!(estimate_vector_constant(&touching, PartLabel::Gamma1, &w).is_err());
    let bad = WeightSpec::new(0.6, PartLabel::Whole).unwrap();
    assert!(estimate_vector_constant(&m, PartLabel::Gamma1, &bad).is_err());
}

#[test]
fn randomized_audit_has_no_violations() {
    let t = triangulate(&PolygonalDomain::fourier(1.0, &[0.0, 0.0, 0.1], &[], 256).unwrap(), 0.08).unwrap();
    let a = inequality_audit(&t, 1000, 42).unwrap();
    assert_eq!(a.total_violations(), 0, "{:?}", a.rows);
    assert_eq!(a.row("mean_swap_f_equals_g").unwrap().worst_ratio, 0.5);
    let again = inequality_audit(&t, 1000, 42).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&again).unwrap());
    assert!(inequality_audit(&t, 10, 42).is_err());
}
