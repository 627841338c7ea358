//! Acceptance suite: one PASS/FAIL line per criterion, with runtimes.
//!
//! Criteria listed in `EXPECTED_FAILURES` are reported as FAIL but do not
//! fail the target as long as the failure is the documented one.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use overdet_core::assembly::{ScalarField, WeightSpec};
use overdet_core::cone::*;
use overdet_core::functionals::*;
use overdet_core::geometry::*;
use overdet_core::pfunction::*;
use overdet_core::poincare::*;
use overdet_core::report::{parse_config, run_experiment};
use overdet_core::singular::*;
use rand::{Rng, SeedableRng};

/// Criterion 4: the ε = 0.1 trefoil has M - 1 ≈ 0.49, so its gate cannot hold.
const EXPECTED_FAILURES: &[usize] = &[4];

struct Outcome {
    pass: bool,
    detail: String,
    /// For expected failures: whether the failure is exactly the documented one.
    documented: bool,
}

fn ok(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, documented: false }
}

fn mesh_of(d: &PolygonalDomain, h: f64) -> Arc<Mesh> {
    Arc::new(triangulate(d, h).unwrap())
}

fn ellipse() -> PolygonalDomain {
    PolygonalDomain::ellipse(1.2, 1.0 / 1.2, 512).unwrap()
}

fn trefoil(eps: f64, n: usize) -> PolygonalDomain {
    PolygonalDomain::fourier(1.0, &[0.0, 0.0, eps], &[], n).unwrap()
}

fn saddle(p: Point) -> f64 {
    p.x * p.x - p.y * p.y
}

fn sector_mesh(angle: f64, n_arc: usize, h: f64) -> Arc<Mesh> {
    mesh_of(&PolygonalDomain::sector(angle, 1.0, n_arc, 32).unwrap(), h)
}

fn square_with(h: f64, on: impl Fn(Point) -> bool) -> Mesh {
    triangulate(&PolygonalDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), h)
        .unwrap()
        .relabeled(|a, b| if on((a + b) * 0.5) { PartLabel::Gamma1 } else { PartLabel::Whole })
        .unwrap()
}

fn c1() -> Outcome {
    let s = solve_punctured(&mesh_of(&ellipse(), 0.02), 0.0).unwrap();
    let st = boundary_gradient_stats(&s);
    let dev = (st.mean_flux - 1.0).abs();
    ok(dev <= 0.02, format!("|mean flux - 1| = {dev:.2e}"))
}

fn c2() -> Outcome {
    let s = solve_punctured(&mesh_of(&PolygonalDomain::fourier(1.0, &[], &[], 512).unwrap(), 0.02), 0.0).unwrap();
    let r = stability_report(&s).unwrap();
    let w = s.corrector().max_abs();
    ok(
        r.m_minus_1 <= 0.02 && r.asymmetry_f <= 0.05 && w <= 1e-9,
        format!("M - 1 = {:.2e}, F = {:.2e}, max|corrector| = {w:.2e}", r.m_minus_1, r.asymmetry_f),
    )
}

fn c3() -> Outcome {
    let res: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&h| x_field_identities_2d(&solve_punctured(&mesh_of(&ellipse(), h), 0.0).unwrap()).unwrap().flux_square_identity)
        .collect();
    ok(res[0] <= 0.03 && res[1] < res[0], format!("residual {:.2e} at h = 0.02, {:.2e} at h = 0.01", res[0], res[1]))
}

fn c4() -> Outcome {
    let mut gate_ok = true;
    let mut deficit_ok = true;
    let mut ratio_ok = true;
    let mut parts = Vec::new();
    for eps in [0.02, 0.05, 0.1] {
        let r = stability_report(&solve_punctured(&mesh_of(&trefoil(eps, 512), 0.02), 0.0).unwrap()).unwrap();
        gate_ok &= r.m_minus_1 <= 0.25;
        deficit_ok &= r.verdict("deficit_le_5_2_m_minus_1_slack").unwrap().holds;
        ratio_ok &= r.ratio.is_some_and(|q| q <= ASYMMETRY_BOUND_CONSTANT);
        parts.push(format!("eps {eps}: M-1 {:.3}, D {:.2e}, F/sqrt(M-1) {:.3}", r.m_minus_1, r.deficit_d, r.ratio.unwrap_or(f64::NAN)));
    }
    let mut out = ok(
        gate_ok && deficit_ok && ratio_ok,
        format!("gate {gate_ok}, deficit {deficit_ok}, ratio <= {ASYMMETRY_BOUND_CONSTANT} {ratio_ok}; {}", parts.join("; ")),
    );
    out.documented = !gate_ok && deficit_ok && ratio_ok;
    out
}

fn c5() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut chain = true;
    for _ in 0..20 {
        let c = p_ball_checks_n3(rng.random_range(0.2..5.0)).unwrap();
        worst = worst.max(c.p_constant_gap).max(c.integral_identity_gap);
        chain &= c.chain.iter().all(|v| v.holds);
    }
    ok(worst <= 1e-9 && chain, format!("worst identity gap {worst:.2e}, chain holds {chain}"))
}

fn bessel_oracle() -> f64 {
    // first zero of J1' by bisection on the power series
    let dj1 = |x: f64| {
        let (mut s, mut fk, mut fk1) = (0.0, 1.0, 1.0);
        for k in 0..40 {
            if k > 0 {
                fk *= k as f64;
                fk1 *= (k + 1) as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * (2 * k + 1) as f64 * (x / 2.0).powi(2 * k) / (2.0 * fk * fk1);
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
    2.0 / (a + b)
}

fn c6() -> Outcome {
    let w = WeightSpec::unweighted();
    let t = Instant::now();
    let disk = estimate_scalar_constant(&triangulate(&PolygonalDomain::fourier(1.0, &[], &[], 512).unwrap(), 0.02).unwrap(), &w)
        .unwrap()
        .constant;
    let t_disk = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let square = estimate_scalar_constant(&triangulate(&PolygonalDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 0.02).unwrap(), &w)
        .unwrap()
        .constant;
    let t_square = t.elapsed().as_secs_f64();
    let e_disk = (disk / 0.5436 - 1.0).abs();
    let e_square = (square * PI - 1.0).abs();
    ok(
        e_disk <= 0.02 && e_square <= 0.02 && t_disk < 30.0 && t_square < 30.0,
        format!(
            "disk {disk:.5} (rel. err {e_disk:.1e} vs 0.5436, Bessel oracle {:.5}), square {square:.5} (rel. err {e_square:.1e} vs 1/pi); {t_disk:.1}s / {t_square:.1}s",
            bessel_oracle()
        ),
    )
}

fn c7() -> Outcome {
    let w = WeightSpec::new(0.25, PartLabel::Whole).unwrap();
    let coarse = square_with(0.2, |p| p.y < 1e-9 || p.x < 1e-9);
    let sparse = estimate_vector_constant(&coarse, PartLabel::Gamma1, &w).unwrap().constant;
    let dense = dense_vector_constant(&coarse, PartLabel::Gamma1, &w).unwrap();
    let d1 = (sparse - dense).abs();
    let one = square_with(0.1, |p| p.y < 1e-9);
    let v = estimate_vector_constant(&one, PartLabel::Gamma1, &w).unwrap().constant;
    let s = estimate_zero_trace_constant(&one, PartLabel::Gamma1, &w).unwrap().constant;
    let d2 = (v - s).abs();
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for reach in [0.25, 0.5, 1.0] {
        let c = estimate_vector_constant(&square_with(0.05, |p| p.x < 1e-9 || (p.y < 1e-9 && p.x < reach)), PartLabel::Gamma1, &w)
            .unwrap()
            .constant;
        monotone &= c <= prev * (1.0 + 1e-10);
        prev = c;
    }
    ok(d1 <= 1e-8 && d2 <= 1e-8 && monotone, format!("sparse-dense {d1:.1e}, rank one vs zero trace {d2:.1e}, monotone {monotone}"))
}

fn c8() -> Outcome {
    let t = triangulate(&trefoil(0.1, 256), 0.08).unwrap();
    let a = inequality_audit(&t, 1000, 42).unwrap();
    ok(a.total_violations() == 0, format!("{} violations over {} checks x 1000 trials", a.total_violations(), a.rows.len()))
}

fn c9() -> Outcome {
    let mut devs = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let m = sector_mesh(PI / 2.0, 64, h);
        let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
        let r = mean_value_residuals(&ex, &radius_grid(&m, 10).unwrap()).unwrap();
        devs.push(r.max_cap_dev.max(r.solid_mean_dev));
    }
    // sup of r²cos2φ on the quarter disk is 1
    let analytic = (0..10)
        .map(|k| arc_mean(|p| Some(saddle(p)), Point::ORIGIN, 0.0, PI / 2.0, 0.09 * (k + 1) as f64).unwrap().abs())
        .fold(0.0, f64::max);
    let halving = devs[1] <= 0.5 * devs[0] && devs[2] <= 0.5 * devs[1];
    ok(
        devs[0] <= 0.02 && halving && analytic <= 1e-10,
        format!("max deviation {:.2e} / {:.2e} / {:.2e}, analytic path {analytic:.1e}", devs[0], devs[1], devs[2]),
    )
}

fn c10() -> Outcome {
    let m = sector_mesh(PI / 2.0, 64, 0.02);
    let ex = ConeExperiment::new(m.clone(), saddle).unwrap();
    let hs = vec![ScalarField::constant(m.clone(), 1.0), ScalarField::interpolate(m.clone(), saddle)];
    let d = duality_check(&ex, &hs).unwrap();
    let ball_ok = d.uflux_const_dev <= 0.02 && d.max_mean_match_dev() <= 0.02;

    let (a, b) = (1.2, 1.0 / 1.2);
    let cone = PolygonalDomain::cone(PI / 2.0, |phi: f64| 1.0 / ((phi.cos() / a).powi(2) + (phi.sin() / b).powi(2)).sqrt(), 64, 32)
        .unwrap();
    let m2 = mesh_of(&cone, 0.02);
    let ex2 = ConeExperiment::new(m2.clone(), saddle).unwrap();
    let hs2 = vec![ScalarField::constant(m2.clone(), 1.0), ScalarField::interpolate(m2.clone(), saddle)];
    let d2 = duality_check(&ex2, &hs2).unwrap();
    let cofail = d2.uflux_const_dev > 0.02 && d2.max_mean_match_dev() > 0.02;
    let identity_ok = d2.max_integration_identity_residual() <= 0.02;
    ok(
        ball_ok && cofail && identity_ok,
        format!(
            "ball: constancy {:.2e}, mean match {:.2e}; ellipse cone: constancy {:.2e}, mean match {:.2e}, identity {:.1e}",
            d.uflux_const_dev,
            d.max_mean_match_dev(),
            d2.uflux_const_dev,
            d2.max_mean_match_dev(),
            d2.max_integration_identity_residual()
        ),
    )
}

fn c11() -> Outcome {
    let q = cone_poincare_check(&ConeExperiment::new(sector_mesh(PI / 2.0, 64, 0.02), saddle).unwrap()).unwrap();
    let h = cone_poincare_check(&ConeExperiment::new(sector_mesh(PI, 128, 0.02), saddle).unwrap()).unwrap();
    ok(q.ratio <= 1.05 && h.ratio <= 1.05, format!("ratios {:.3} (quarter), {:.3} (half disk)", q.ratio, h.ratio))
}

fn c12() -> Outcome {
    let configs = [
        "kind = stability_sweep\nseed = 3\n[domain]\ntype = fourier\nn_boundary = 256\n[mesh]\nh = 0.05\n[sweep]\neps = 0.02, 0.05, 0.1\n",
        "kind = mean_value\n[domain]\ntype = sector\nangle = pi/2\n[mesh]\nh = 0.04\n[data]\nf = random_harmonic\n",
        "kind = cone_duality\nseed = 9\n[domain]\ntype = sector\nangle = pi/2\n[mesh]\nh = 0.04\n[data]\nh_fields = one, random_harmonic\n",
        "kind = poincare_constants\n[domain]\ntype = rectangle\n[mesh]\nh = 0.08\n[sweep]\nalpha = 0, 0.25\n",
        "kind = inequality_audit\nseed = 4\n[domain]\ntype = rectangle\n[mesh]\nh = 0.1\n[sweep]\ntrials = 100\n",
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = 0;
    for (i, text) in configs.iter().enumerate() {
        let cfg = parse_config(text, None).unwrap();
        let mut csv = Vec::new();
        for run in 0..2 {
            let dir = tmp.path().join(format!("{i}-{run}"));
            run_experiment(&cfg, &dir).unwrap();
            csv.push(std::fs::read(dir.join("results.csv")).unwrap());
        }
        identical += usize::from(csv[0] == csv[1]);
    }
    ok(identical == configs.len(), format!("{identical}/{} experiment kinds byte-identical on repeat", configs.len()))
}

fn main() {
    let criteria: [(usize, &str, f64, fn() -> Outcome); 12] = [
        (1, "normalization of the mean flux", 10.0, c1),
        (2, "rigidity on the disk", 10.0, c2),
        (3, "flux-square identity", 30.0, c3),
        (4, "stability chain on the trefoil sweep", 60.0, c4),
        (5, "three-dimensional P-function identities", 1.0, c5),
        (6, "scalar Poincare constant", 60.0, c6),
        (7, "vector-field constant", 60.0, c7),
        (8, "mean-swap audit", 10.0, c8),
        (9, "cone mean value", 30.0, c9),
        (10, "duality on cones", 60.0, c10),
        (11, "cone Poincare bound", 30.0, c11),
        (12, "determinism", f64::INFINITY, c12),
    ];
    let mut unexpected = Vec::new();
    for (n, name, budget, run) in criteria {
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < budget;
        let pass = out.pass && in_time;
        let timing = if in_time { String::new() } else { format!(" over budget {budget}s") };
        println!(
            "criterion {n:>2} {} {name}: {} [{secs:.2}s{timing}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
        if !pass && !(EXPECTED_FAILURES.contains(&n) && out.documented && in_time) {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
