//! Harmonic functions in planar cones: cap and solid means at the vertex,
//! the mixed torsion problem, duality and the cone Poincaré bound.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{boundary_flux, solve_mixed_bvp, BvpSolution, ScalarField};
use crate::error::{LabError, Result};
use crate::geometry::{disk_polygon_moments, Mesh, PartLabel, Point};
use crate::quadrature::gauss_legendre_on;

/// Gauss points on each cap.
pub const CAP_POINTS: usize = 128;

/// Space dimension used for the torsion source `Δu = N`.
const DIM: f64 = 2.0;

/// Opening `[φ0, φ1]` of the cone at the apex, read off the two boundary
/// edges incident to the apex vertex.
pub fn cone_opening(mesh: &Mesh) -> Result<(Point, f64, f64)> {
    let apex = mesh.apex().ok_or_else(|| LabError::InvalidMesh("mesh has no cone-vertex marker".into()))?;
    let x0 = mesh.vertices()[apex];
    let out = mesh.boundary_edges().iter().find(|e| e.a == apex);
    let inc = mesh.boundary_edges().iter().find(|e| e.b == apex);
    let (Some(out), Some(inc)) = (out, inc) else {
        return Err(LabError::InvalidMesh("apex is not a boundary vertex".into()));
    };
    let phi0 = (mesh.vertices()[out.b] - x0).angle();
    let mut phi1 = (mesh.vertices()[inc.a] - x0).angle();
    if phi1 <= phi0 {
        phi1 += 2.0 * std::f64::consts::PI;
    }
    Ok((x0, phi0, phi1))
}

/// Mean of `f` over the arc `{x0 + r e^{iφ} : φ0 < φ < φ1}`.
pub fn arc_mean(f: impl Fn(Point) -> Option<f64>, x0: Point, phi0: f64, phi1: f64, r: f64) -> Option<f64> {
    let (nodes, weights) = gauss_legendre_on(CAP_POINTS, phi0, phi1);
    let mut s = 0.0;
    for (&phi, &w) in nodes.iter().zip(&weights) {
        s += w * f(x0 + Point::polar(r, phi))?;
    }
    Some(s / (phi1 - phi0))
}

fn check_radius(mesh: &Mesh, x0: Point, r: f64) -> Result<()> {
    let delta = mesh.distance_to_part(x0, PartLabel::Gamma0);
    if !(r > 0.0 && r < delta) {
        return Err(LabError::InvalidArgument(format!("cap radius {r} outside (0, {delta})")));
    }
    Ok(())
}

/// `ψ(r)`: mean of the interpolated field over `Σ ∩ ∂B_r(x0)`.
pub fn cap_mean(field: &ScalarField, x0: Point, r: f64) -> Result<f64> {
    let mesh = field.mesh();
    let (apex, phi0, phi1) = cone_opening(mesh)?;
    if apex.distance(x0) > 1e-12 * (1.0 + apex.norm()) {
        return Err(LabError::InvalidArgument("cap center must be the cone vertex".into()));
    }
    check_radius(mesh, x0, r)?;
    arc_mean(|p| field.evaluate(p), x0, phi0, phi1, r)
        .ok_or_else(|| LabError::InvalidArgument("cap leaves the mesh".into()))
}

/// Mean over `Σ ∩ B_r(x0)`, exact for the piecewise-linear field: each
/// triangle is clipped against the disk and the linear field is evaluated
/// at the centroid of the clipped piece.
pub fn solid_mean(field: &ScalarField, x0: Point, r: f64) -> Result<f64> {
    let mesh = field.mesh();
    check_radius(mesh, x0, r)?;
    let (mut area, mut integral) = (0.0, 0.0);
    for k in 0..mesh.num_triangles() {
        let t = mesh.triangle_points(k);
        let lo = Point::new(t[0].x.min(t[1].x).min(t[2].x), t[0].y.min(t[1].y).min(t[2].y));
        let hi = Point::new(t[0].x.max(t[1].x).max(t[2].x), t[0].y.max(t[1].y).max(t[2].y));
        if Point::new(x0.x.clamp(lo.x, hi.x), x0.y.clamp(lo.y, hi.y)).distance(x0) >= r {
            continue;
        }
        let m = disk_polygon_moments(&t, x0, r);
        if m.area <= 0.0 {
            continue;
        }
        let c = m.centroid();
        let tri = mesh.triangles()[k];
        let l = crate::geometry::barycentric(&t, c);
        let v = &field.values();
        integral += m.area * (l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]]);
        area += m.area;
    }
    Ok(integral / area)
}

/// Radius grid `δ k / (n + 1)`, `k = 1..=n`, with `δ = δ_{Γ0}(x0)`.
pub fn radius_grid(mesh: &Mesh, n: usize) -> Result<Vec<f64>> {
    let (x0, _, _) = cone_opening(mesh)?;
    let delta = mesh.distance_to_part(x0, PartLabel::Gamma0);
    Ok((1..=n).map(|k| delta * k as f64 / (n + 1) as f64).collect())
}

/// Mixed problem `Δv = 0`, `v = f` on `Γ0`, `v_ν = 0` on `Γ1`.
pub fn solve_cone_harmonic(mesh: &Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<BvpSolution> {
    solve_mixed_bvp(mesh, 0.0, PartLabel::Gamma0, f, Some(PartLabel::Gamma1))
}

/// Mixed torsion problem `Δu = N`, `u = 0` on `Γ0`, `u_ν = 0` on `Γ1`.
pub fn solve_cone_torsion(mesh: &Arc<Mesh>) -> Result<BvpSolution> {
    solve_mixed_bvp(mesh, DIM, PartLabel::Gamma0, |_| 0.0, Some(PartLabel::Gamma1))
}

/// A sector-type mesh with its harmonic and torsion solves.
#[derive(Clone, Debug)]
pub struct ConeExperiment {
    pub mesh: Arc<Mesh>,
    pub x0: Point,
    pub phi0: f64,
    pub phi1: f64,
    /// `δ_{Γ0}(x0)`.
    pub delta: f64,
    pub harmonic: BvpSolution,
    pub torsion: BvpSolution,
}

impl ConeExperiment {
    pub fn new(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let (x0, phi0, phi1) = cone_opening(&mesh)?;
        let delta = mesh.distance_to_part(x0, PartLabel::Gamma0);
        let harmonic = solve_cone_harmonic(&mesh, f)?;
        let torsion = solve_cone_torsion(&mesh)?;
        Ok(Self { mesh, x0, phi0, phi1, delta, harmonic, torsion })
    }

    /// `v(x0)`, read from the apex vertex.
    pub fn vertex_value(&self) -> f64 {
        self.harmonic.field.values()[self.mesh.apex().expect("checked at construction")]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapRow {
    pub r: f64,
    pub psi: f64,
    pub solid_mean: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanValueResiduals {
    pub vertex_value: f64,
    pub max_cap_dev: f64,
    pub solid_mean_dev: f64,
    /// `max |ψ(r) - ψ(r')|` over the grid.
    pub psi_spread: f64,
    /// Largest gap between the solid mean and `(2/r²)∫_0^r s ψ(s) ds`.
    pub coarea_residual: f64,
    pub table: Vec<CapRow>,
}

pub fn mean_value_residuals(exp: &ConeExperiment, radius_grid: &[f64]) -> Result<MeanValueResiduals> {
    let field = &exp.harmonic.field;
    let v0 = exp.vertex_value();
    let table = radius_grid
        .par_iter()
        .map(|&r| Ok(CapRow { r, psi: cap_mean(field, exp.x0, r)?, solid_mean: solid_mean(field, exp.x0, r)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut res = MeanValueResiduals {
        vertex_value: v0,
        max_cap_dev: 0.0,
        solid_mean_dev: 0.0,
        psi_spread: 0.0,
        coarea_residual: 0.0,
        table: Vec::new(),
    };
    let (lo, hi) = table.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), row| (a.min(row.psi), b.max(row.psi)));
    res.psi_spread = if table.is_empty() { 0.0 } else { hi - lo };
    for row in &table {
        res.max_cap_dev = res.max_cap_dev.max((row.psi - v0).abs());
        res.solid_mean_dev = res.solid_mean_dev.max((row.solid_mean - v0).abs());
        let by_caps = solid_mean_by_caps(field, exp.x0, row.r)?;
        res.coarea_residual = res.coarea_residual.max((by_caps - row.solid_mean).abs());
    }
    res.table = table;
    Ok(res)
}

/// `(2/r²) ∫_0^r s ψ(s) ds` by Gauss quadrature in the radius.
pub fn solid_mean_by_caps(field: &ScalarField, x0: Point, r: f64) -> Result<f64> {
    let (nodes, weights) = gauss_legendre_on(64, 0.0, r);
    let mut s = 0.0;
    for (&t, &w) in nodes.iter().zip(&weights) {
        s += w * t * cap_mean(field, x0, t)?;
    }
    Ok(2.0 * s / (r * r))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityRow {
    pub mean_match_dev: f64,
    /// Identity residual with `∫_{Γ0} u_ν h` taken as the variational flux pairing.
    pub integration_identity_residual: f64,
    /// Same identity with per-edge fluxes and the trapezoidal rule.
    pub integration_identity_edge_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityCheck {
    pub uflux_const_dev: f64,
    /// `|∫_{Γ0} u_ν dS - N |Σ∩Ω|| / (N |Σ∩Ω|)`.
    pub torsion_flux_balance: f64,
    pub rows: Vec<DualityRow>,
}

impl DualityCheck {
    pub fn max_mean_match_dev(&self) -> f64 {
        self.rows.iter().map(|r| r.mean_match_dev).fold(0.0, f64::max)
    }

    pub fn max_integration_identity_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.integration_identity_residual).fold(0.0, f64::max)
    }
}

/// `∫_{label} h dS`, exact for piecewise-linear `h`.
fn boundary_integral(mesh: &Mesh, values: &[f64], label: PartLabel) -> f64 {
    mesh.part_edges(label)
        .iter()
        .map(|&e| {
            let be = mesh.boundary_edges()[e];
            0.5 * mesh.edge_length(&be) * (values[be.a] + values[be.b])
        })
        .sum()
}

pub fn duality_check(exp: &ConeExperiment, h_fields: &[ScalarField]) -> Result<DualityCheck> {
    if h_fields.is_empty() {
        return Err(LabError::InvalidArgument("duality check needs at least one h field".into()));
    }
    let mesh = &exp.mesh;
    let flux = boundary_flux(&exp.torsion, PartLabel::Gamma0)?;
    let edges = mesh.part_edges(PartLabel::Gamma0);
    let g0 = mesh.boundary_measures(PartLabel::Gamma0)?.length;
    let area = mesh.area();
    let (lo, hi) = flux.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &q| (a.min(q), b.max(q)));
    let total: f64 = flux.iter().zip(&edges).map(|(q, &e)| q * mesh.edge_length(&mesh.boundary_edges()[e])).sum();
    let mean = total / g0;
    let uflux_const_dev = (hi - lo) / mean;
    let torsion_flux_balance = (total - DIM * area).abs() / (DIM * area);

    let rows = h_fields
        .par_iter()
        .map(|h| {
            let v = h.values();
            let sup = h.max_abs().max(f64::MIN_POSITIVE);
            let int_omega = h.integral();
            let int_g0 = boundary_integral(mesh, v, PartLabel::Gamma0);
            let mean_match_dev = (int_omega / area - int_g0 / g0).abs() / sup;
            let lhs = int_omega - area / g0 * int_g0;
            let rhs = exp.torsion.flux_pairing(v) / DIM - area / g0 * int_g0;
            let edge_pair: f64 = flux
                .iter()
                .zip(&edges)
                .map(|(q, &e)| {
                    let be = mesh.boundary_edges()[e];
                    q * 0.5 * mesh.edge_length(&be) * (v[be.a] + v[be.b])
                })
                .sum();
            let rhs_edge = edge_pair / DIM - area / g0 * int_g0;
            DualityRow {
                mean_match_dev,
                integration_identity_residual: (lhs - rhs).abs() / (area * sup),
                integration_identity_edge_residual: (lhs - rhs_edge).abs() / (area * sup),
            }
        })
        .collect();
    Ok(DualityCheck { uflux_const_dev, torsion_flux_balance, rows })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConePoincare {
    pub lhs: f64,
    pub rhs_bound: f64,
    pub ratio: f64,
    /// `μ̄_{2,0}(Σ∩Ω)⁻¹` used in the bound.
    pub poincare_constant: f64,
    pub volume_factor: f64,
}

/// `‖v - v(x0)‖₂` against `(1 + |Σ∩Ω|/|Σ∩B_δ|)^{1/2} μ̄⁻¹ ‖∇v‖₂`, with the
/// unweighted mean-zero Poincaré constant of the mesh supplied by the caller.
pub fn cone_poincare_bound(exp: &ConeExperiment, poincare_constant: f64) -> Result<ConePoincare> {
    let v0 = exp.vertex_value();
    let shifted = exp.harmonic.field.map(|v| v - v0);
    let lhs = shifted.l2_norm();
    let ball = disk_polygon_moments(&exp.mesh.boundary_polygon(), exp.x0, exp.delta).area;
    let volume_factor = (1.0 + exp.mesh.area() / ball).sqrt();
    let rhs_bound = volume_factor * poincare_constant * exp.harmonic.field.gradient_l2_norm();
    // constant fields give 0 ≤ 0 up to rounding
    let ratio = if lhs <= 1e-12 * exp.harmonic.field.l2_norm() {
        0.0
    } else if rhs_bound > 0.0 {
        lhs / rhs_bound
    } else {
        f64::INFINITY
    };
    Ok(ConePoincare { lhs, rhs_bound, ratio, poincare_constant, volume_factor })
}

/// [`cone_poincare_bound`] with the constant estimated on the same mesh.
pub fn cone_poincare_check(exp: &ConeExperiment) -> Result<ConePoincare> {
    let est = crate::poincare::estimate_scalar_constant(&exp.mesh, &crate::assembly::WeightSpec::unweighted())?;
    cone_poincare_bound(exp, est.constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, PolygonalDomain};
    use std::f64::consts::PI;

    fn quarter(h: f64) -> Arc<Mesh> {
        Arc::new(triangulate(&PolygonalDomain::sector(PI / 2.0, 1.0, 64, 32).unwrap(), h).unwrap())
    }

    #[test]
    fn constant_field_means() {
        let m = quarter(0.05);
        let f = ScalarField::constant(m.clone(), 1.0);
        assert!((cap_mean(&f, Point::ORIGIN, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!((solid_mean(&f, Point::ORIGIN, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!(cap_mean(&f, Point::ORIGIN, 1.5).is_err());
    }

    #[test]
    fn analytic_cap_mean_vanishes() {
        let v = arc_mean(|p| Some(p.x * p.x - p.y * p.y), Point::ORIGIN, 0.0, PI / 2.0, 0.5).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn solid_mean_of_linear_field_is_exact() {
        // x over the quarter disk of radius r: (4r/3π), exact on the polygon up to arc chords
        let m = quarter(0.05);
        let f = ScalarField::interpolate(m.clone(), |p| p.x);
        let r: f64 = 0.5;
        let (n, w) = gauss_legendre_on(64, 0.0, PI / 2.0);
        let exact_poly: f64 = n.iter().zip(&w).map(|(&t, &wt)| wt * t.cos()).sum::<f64>() * r.powi(3) / 3.0 / (PI / 4.0 * r * r);
        assert!((solid_mean(&f, Point::ORIGIN, r).unwrap() - exact_poly).abs() < 1e-12);
    }
}
