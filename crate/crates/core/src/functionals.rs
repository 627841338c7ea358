//! Shape functionals: isoperimetric deficit, Fraenkel asymmetry and the
//! normal-deviation asymmetry, plus the stability report.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{disk_polygon_moments, Mesh, PartLabel, Point};
use crate::optimize::nelder_mead;
use crate::pfunction::{chain_inequality_audit, x_field_identities_2d, Verdict};
use crate::singular::{boundary_gradient_stats, SingularSolution};

/// Constant used for the reported bound `F ≤ C √(M - 1)`.
pub const ASYMMETRY_BOUND_CONSTANT: f64 = 2.0;
/// Relative slack on `D ≤ (5/2)(M - 1)` for discretization error.
pub const CHAIN_SLACK: f64 = 0.1;

/// `|∂Ω| / (2 √(π |Ω|)) - 1`.
pub fn isoperimetric_deficit(mesh: &Mesh) -> f64 {
    let per: f64 = mesh.boundary_edges().iter().map(|e| mesh.edge_length(e)).sum();
    per / (2.0 * (PI * mesh.area()).sqrt()) - 1.0
}

/// `|Ω ∩ B_r(z)|` summed triangle by triangle.
pub fn intersection_area_by_triangles(mesh: &Mesh, z: Point, r: f64) -> f64 {
    (0..mesh.num_triangles())
        .map(|k| {
            let t = mesh.triangle_points(k);
            let (lo, hi) = (
                Point::new(t[0].x.min(t[1].x).min(t[2].x), t[0].y.min(t[1].y).min(t[2].y)),
                Point::new(t[0].x.max(t[1].x).max(t[2].x), t[0].y.max(t[1].y).max(t[2].y)),
            );
            let nearest = Point::new(z.x.clamp(lo.x, hi.x), z.y.clamp(lo.y, hi.y));
            if nearest.distance(z) >= r {
                0.0
            } else {
                disk_polygon_moments(&t, z, r).area
            }
        })
        .sum()
}

/// `|Ω ∩ B_r(z)|` from the boundary polygon.
pub fn intersection_area(polygon: &[Point], z: Point, r: f64) -> f64 {
    disk_polygon_moments(polygon, z, r).area
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FraenkelResult {
    #[serde(rename = "F")]
    pub f: f64,
    pub z_star: Point,
    pub r: f64,
    /// Set when no start met the simplex-diameter criterion.
    pub warning: bool,
}

fn area_centroid(polygon: &[Point]) -> Point {
    let n = polygon.len();
    let (mut a, mut c) = (0.0, Point::ORIGIN);
    for i in 0..n {
        let (p, q) = (polygon[i], polygon[(i + 1) % n]);
        let w = p.cross(q);
        a += 0.5 * w;
        c += (p + q) * (w / 6.0);
    }
    c * (1.0 / a)
}

/// Minimizes `(|Ω| + |B_r| - 2|Ω ∩ B_r(z)|) / r²` over `z` with `|B_r| = |Ω|`.
pub fn fraenkel_asymmetry(mesh: &Mesh) -> FraenkelResult {
    let polygon = mesh.boundary_polygon();
    let area = mesh.area();
    let r = (area / PI).sqrt();
    let objective = |z: [f64; 2]| 2.0 * (area - intersection_area(&polygon, Point::new(z[0], z[1]), r)) / (r * r);
    let c = area_centroid(&polygon);
    let d = 0.1 * r;
    let starts = [c, c + Point::new(d, 0.0), c + Point::new(-d, 0.0), c + Point::new(0.0, d), c + Point::new(0.0, -d)];
    let mut best: Option<(f64, Point)> = None;
    let mut any_converged = false;
    for s in starts {
        let res = nelder_mead(objective, [s.x, s.y], 0.25 * r, 1e-6 * r, 4000);
        any_converged |= res.converged;
        if best.is_none_or(|(v, _)| res.value < v) {
            best = Some((res.value, Point::new(res.x[0], res.x[1])));
        }
    }
    let (f, z_star) = best.expect("at least one start");
    FraenkelResult { f: f.max(0.0), z_star, r, warning: !any_converged }
}

/// `|Ω Δ B_r(z)| / r² + (1/r) ∫_{∂Ω} |ν_Ω(x) - (x - z)/|x - z||² dS`,
/// the boundary term by edge-midpoint quadrature.
pub fn strong_asymmetry(mesh: &Mesh, z: Point, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let scale = mesh.boundary_polygon().iter().map(|p| p.distance(z)).fold(0.0, f64::max).max(1.0);
    if mesh.distance_to_part(z, PartLabel::Whole) <= 1e-12 * scale {
        return Err(LabError::InvalidArgument("center lies on the boundary; the radial projection is undefined".into()));
    }
    let polygon = mesh.boundary_polygon();
    let inter = intersection_area(&polygon, z, r);
    let sym_diff = mesh.area() + PI * r * r - 2.0 * inter;
    let mut normal_term = 0.0;
    for e in mesh.boundary_edges() {
        let mid = mesh.edge_midpoint(e);
        let radial = (mid - z).normalized();
        normal_term += (mesh.edge_normal(e) - radial).norm_squared() * mesh.edge_length(e);
    }
    Ok(sym_diff.max(0.0) / (r * r) + normal_term / r)
}

/// Shape functionals, identity residuals and proof-chain verdicts for one domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalReport {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_minus_1")]
    pub m_minus_1: f64,
    pub mean_flux: f64,
    #[serde(rename = "deficit_D")]
    pub deficit_d: f64,
    #[serde(rename = "asymmetry_F")]
    pub asymmetry_f: f64,
    #[serde(rename = "optimal_center_F")]
    pub optimal_center_f: Point,
    #[serde(rename = "radius_F")]
    pub radius_f: f64,
    #[serde(rename = "asymmetry_A")]
    pub asymmetry_a: f64,
    /// `F / √(M - 1)`; absent when `M - 1` is at rounding level.
    #[serde(rename = "ratio_F_sqrt_M_minus_1")]
    pub ratio: Option<f64>,
    pub optimizer_warning: bool,
    /// Absolute tolerance used by the verdicts (`h²`).
    pub mesh_tolerance: f64,
    pub identity_residuals: BTreeMap<String, f64>,
    pub chain_verdicts: Vec<Verdict>,
}

impl FunctionalReport {
    pub fn all_verdicts_hold(&self) -> bool {
        self.chain_verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.chain_verdicts.iter().find(|v| v.name == name)
    }
}

pub fn stability_report(solution: &SingularSolution) -> Result<FunctionalReport> {
    if solution.dimension != 2 {
        return Err(LabError::InvalidArgument("stability report needs the planar FEM solution".into()));
    }
    let mesh = solution.mesh();
    let stats = boundary_gradient_stats(solution);
    let d = isoperimetric_deficit(mesh);
    let fr = fraenkel_asymmetry(mesh);
    let a = strong_asymmetry(mesh, fr.z_star, fr.r)?;
    let m_minus_1 = stats.m - 1.0;
    let ratio = (m_minus_1 > 1e-12).then(|| fr.f / m_minus_1.sqrt());

    let ids = x_field_identities_2d(solution)?;
    let mut identity_residuals = BTreeMap::new();
    identity_residuals.insert("flux_square_identity".to_string(), ids.flux_square_identity);
    identity_residuals.insert("deficit_relation".to_string(), ids.deficit_relation);
    identity_residuals.insert("deficit_display_gap".to_string(), ids.deficit_display_gap);
    identity_residuals.insert("divergence_interior".to_string(), ids.divergence_interior);
    // M - 1 = (1/|∂Ω|) ∫ (M - |∇u|) dS holds iff the mean of |∇u| is 1
    let integral = stats.per_edge.iter().map(|g| (stats.m - g.flux) * g.length).sum::<f64>()
        / solution.total_boundary_measure;
    identity_residuals.insert("m_minus_1_integral".to_string(), (m_minus_1 - integral).abs());
    identity_residuals.insert("mean_flux_deviation".to_string(), (stats.mean_flux - 1.0).abs());

    let mut report = FunctionalReport {
        m: stats.m,
        m_minus_1,
        mean_flux: stats.mean_flux,
        deficit_d: d,
        asymmetry_f: fr.f,
        optimal_center_f: fr.z_star,
        radius_f: fr.r,
        asymmetry_a: a,
        ratio,
        optimizer_warning: fr.warning,
        mesh_tolerance: mesh_tolerance(mesh),
        identity_residuals,
        chain_verdicts: Vec::new(),
    };
    let mut verdicts = chain_inequality_audit(&report, 2);
    verdicts.push(Verdict::new(
        "deficit_le_5_2_m_minus_1_slack",
        d,
        2.5 * m_minus_1,
        1.0 + CHAIN_SLACK,
        mesh_tolerance(mesh),
    ));
    verdicts.push(Verdict::new(
        "fraenkel_le_c_sqrt_m_minus_1",
        fr.f,
        ASYMMETRY_BOUND_CONSTANT * m_minus_1.max(0.0).sqrt(),
        1.0,
        mesh_tolerance(mesh),
    ));
    verdicts.push(Verdict::new("fraenkel_le_2_ball", fr.f, 2.0 * PI, 1.0, 0.0));
    verdicts.push(Verdict::new("strong_ge_fraenkel", fr.f, a, 1.0, 1e-12));
    report.chain_verdicts = verdicts;
    Ok(report)
}

/// Absolute tolerance for verdicts that degenerate to `0 ≤ 0` on the disk.
pub fn mesh_tolerance(mesh: &Mesh) -> f64 {
    mesh.h() * mesh.h()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, PolygonalDomain};

    #[test]
    fn square_deficit() {
        let m = triangulate(&PolygonalDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 0.2).unwrap();
        assert!((isoperimetric_deficit(&m) - (2.0 / PI.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn polygon_and_triangle_routes_agree() {
        let d = PolygonalDomain::fourier(1.0, &[0.0, 0.0, 0.1], &[], 128).unwrap();
        let m = triangulate(&d, 0.1).unwrap();
        let poly = m.boundary_polygon();
        for (z, r) in [(Point::new(0.1, -0.2), 0.9), (Point::new(0.7, 0.3), 0.5), (Point::new(3.0, 0.0), 1.0)] {
            let a = intersection_area(&poly, z, r);
            let b = intersection_area_by_triangles(&m, z, r);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn strong_asymmetry_rejects_boundary_center() {
        let m = triangulate(&PolygonalDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 0.2).unwrap();
        assert!(strong_asymmetry(&m, Point::new(0.0, 0.5), 0.5).is_err());
    }
}
