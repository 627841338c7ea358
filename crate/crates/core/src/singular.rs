//! Punctured-domain problem `-Δu = |∂Ω| δ_o`, `u = c` on `∂Ω`, solved by
//! splitting off the fundamental solution.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::assembly::{boundary_flux, BvpSolution, ScalarField};
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, PartLabel, Point};

/// `u = |∂Ω| Φ + w` with `Φ(x) = -(1/2π) log|x - o|` and `w` a discrete harmonic corrector.
#[derive(Clone, Debug)]
pub struct SingularSolution {
    corrector: BvpSolution,
    /// Polygon perimeter `|∂Ω|`.
    pub total_boundary_measure: f64,
    /// Boundary constant.
    pub c: f64,
    pub origin: Point,
    pub dimension: usize,
}

/// `Φ(x) = -(1/2π) log|x - o|`.
pub fn phi(x: Point, origin: Point) -> f64 {
    -(x - origin).norm().ln() / (2.0 * PI)
}

/// `∇Φ(x) = -(x - o) / (2π|x - o|²)`.
pub fn grad_phi(x: Point, origin: Point) -> Point {
    let d = x - origin;
    d * (-1.0 / (2.0 * PI * d.norm_squared()))
}

/// Mean of `∂_ν Φ` over the segment `[a, b]` (outward normal for a
/// counterclockwise boundary): `-θ / (2π L)` with `θ` the angle it subtends at `o`.
pub fn edge_mean_normal_derivative(a: Point, b: Point, origin: Point) -> f64 {
    let (pa, pb) = (a - origin, b - origin);
    let theta = pa.cross(pb).atan2(pa.dot(pb));
    -theta / (2.0 * PI * a.distance(b))
}

impl SingularSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.corrector.mesh()
    }

    /// The harmonic part `w`.
    pub fn corrector(&self) -> &ScalarField {
        &self.corrector.field
    }

    pub fn corrector_solution(&self) -> &BvpSolution {
        &self.corrector
    }

    /// `u(p)`, `None` outside the mesh or at the origin.
    pub fn value(&self, p: Point) -> Option<f64> {
        if p == self.origin {
            return None;
        }
        Some(self.total_boundary_measure * phi(p, self.origin) + self.corrector.field.evaluate(p)?)
    }

    /// `∇u(p)` from the analytic `∇Φ` and the interpolated recovered `∇w`.
    pub fn gradient(&self, recovered: &[Point], p: Point) -> Option<Point> {
        if p == self.origin {
            return None;
        }
        Some(grad_phi(p, self.origin) * self.total_boundary_measure + self.corrector.field.smooth_gradient_at(recovered, p)?)
    }
}

/// Solves the punctured problem on a mesh whose origin marker is a vertex.
pub fn solve_punctured(mesh: &Arc<Mesh>, c: f64) -> Result<SingularSolution> {
    let oi = mesh
        .origin()
        .ok_or_else(|| LabError::InvalidArgument("mesh has no origin marker".into()))?;
    let origin = mesh.vertices()[oi];
    let delta = mesh.distance_to_part(origin, PartLabel::Whole);
    if delta < 3.0 * mesh.h() {
        return Err(LabError::InvalidArgument(format!(
            "origin is {delta:.3e} from the boundary, closer than 3h = {:.3e}; the singular splitting is unresolved",
            3.0 * mesh.h()
        )));
    }
    let perimeter = mesh.boundary_measures(PartLabel::Whole)?.length;
    let fixed: Vec<(usize, f64)> = mesh
        .part_vertices(PartLabel::Whole)
        .into_iter()
        .map(|i| (i, c - perimeter * phi(mesh.vertices()[i], origin)))
        .collect();
    let corrector = crate::assembly::solve_with_values(mesh, 0.0, PartLabel::Whole, None, fixed)?;
    Ok(SingularSolution { corrector, total_boundary_measure: perimeter, c, origin, dimension: 2 })
}

/// Gradient data on one boundary edge.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EdgeGradient {
    /// Arclength of the edge midpoint along the boundary loop.
    pub arclength: f64,
    pub x: f64,
    pub y: f64,
    pub length: f64,
    /// Outward normal derivative `u_ν` (edge mean).
    pub normal: f64,
    pub tangential: f64,
    /// `|∇u|`.
    pub flux: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientStats {
    /// `max |∇u|` over edges.
    #[serde(rename = "M")]
    pub m: f64,
    /// `(1/|∂Ω|) ∫ |∇u| dS`.
    pub mean_flux: f64,
    pub per_edge: Vec<EdgeGradient>,
}

pub fn boundary_gradient_stats(solution: &SingularSolution) -> GradientStats {
    let mesh = solution.mesh();
    let perimeter = solution.total_boundary_measure;
    let edges = mesh.part_edges(PartLabel::Whole);
    let wflux = boundary_flux(&solution.corrector, PartLabel::Whole).expect("whole boundary is nonempty");
    let w = solution.corrector.field.values();
    let mut s = 0.0;
    let mut per_edge = Vec::with_capacity(edges.len());
    for (&e, wn) in edges.iter().zip(&wflux) {
        let be = mesh.boundary_edges()[e];
        let (a, b) = mesh.edge_points(&be);
        let len = a.distance(b);
        let mid = a.lerp(b, 0.5);
        let tangent = (b - a) * (1.0 / len);
        let normal = perimeter * edge_mean_normal_derivative(a, b, solution.origin) + wn;
        let tangential = perimeter * grad_phi(mid, solution.origin).dot(tangent) + (w[be.b] - w[be.a]) / len;
        per_edge.push(EdgeGradient {
            arclength: s + 0.5 * len,
            x: mid.x,
            y: mid.y,
            length: len,
            normal,
            tangential,
            flux: normal.hypot(tangential),
        });
        s += len;
    }
    let m = per_edge.iter().map(|g| g.flux).fold(0.0, f64::max);
    let mean_flux = per_edge.iter().map(|g| g.flux * g.length).sum::<f64>() / perimeter;
    GradientStats { m, mean_flux, per_edge }
}

/// Per-edge table with columns `arclength,x,y,flux`.
pub fn gradient_csv(stats: &GradientStats) -> String {
    let mut out = String::from("arclength,x,y,flux\n");
    for g in &stats.per_edge {
        let _ = writeln!(out, "{},{},{},{}", g.arclength, g.x, g.y, g.flux);
    }
    out
}

/// Closed-form solution on the ball `B_R ⊂ R³` centered at the Dirac site.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BallN3 {
    pub radius: f64,
    /// Boundary constant `c = M^{1/2} (|∂Ω|/ω_3)^{1/2}`.
    pub c_star: f64,
    /// `P(0) = (ω_3/|∂Ω|)²`.
    pub p0: f64,
    /// `M = max_{∂B_R} |∇u|`.
    pub m: f64,
    /// Whether `c_star` was evaluated from the constant's formula rather
    /// than its closed form `R`.
    pub c_from_formula: bool,
}

/// Surface measure of the unit sphere in R³.
pub const OMEGA_3: f64 = 4.0 * PI;

pub fn analytic_ball_n3(radius: f64, report_c_choice: bool) -> Result<BallN3> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(LabError::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    let boundary = OMEGA_3 * radius * radius;
    // |∇(|∂Ω|Φ)| on ∂B_R with Φ = 1/(ω_3 |x|)
    let m = boundary / (OMEGA_3 * radius * radius);
    let c_star = if report_c_choice { m.sqrt() * (boundary / OMEGA_3).sqrt() } else { radius };
    let p0 = (OMEGA_3 / boundary).powi(2);
    Ok(BallN3 { radius, c_star, p0, m, c_from_formula: report_c_choice })
}

impl BallN3 {
    pub fn boundary_measure(&self) -> f64 {
        OMEGA_3 * self.radius * self.radius
    }

    /// `u(x) = |∂Ω|/(ω_3 |x|) + (c - R)`.
    pub fn u(&self, x: [f64; 3]) -> f64 {
        let r = norm3(x);
        self.boundary_measure() / (OMEGA_3 * r) + (self.c_star - self.radius)
    }

    pub fn grad_u(&self, x: [f64; 3]) -> [f64; 3] {
        let r = norm3(x);
        let s = -self.boundary_measure() / (OMEGA_3 * r * r * r);
        [s * x[0], s * x[1], s * x[2]]
    }

    /// `P = |∇u|² / u⁴`.
    pub fn p(&self, x: [f64; 3]) -> f64 {
        let g = self.grad_u(x);
        (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) / self.u(x).powi(4)
    }
}

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtended_angle_average() {
        // full circle of edges subtends 2π, so the mean flux integrates to -1
        let n = 64;
        let pts: Vec<Point> = (0..n).map(|k| Point::polar(2.0, 2.0 * PI * k as f64 / n as f64)).collect();
        let total: f64 = (0..n)
            .map(|k| {
                let (a, b) = (pts[k], pts[(k + 1) % n]);
                edge_mean_normal_derivative(a, b, Point::new(0.3, -0.4)) * a.distance(b)
            })
            .sum();
        assert!((total + 1.0).abs() < 1e-14);
    }

    #[test]
    fn ball_constants() {
        let b = analytic_ball_n3(1.0, true).unwrap();
        assert!((b.c_star - 1.0).abs() < 1e-15 && (b.p0 - 1.0).abs() < 1e-15);
        let b = analytic_ball_n3(2.0, false).unwrap();
        assert!((b.p0 - 1.0 / 16.0).abs() < 1e-15);
        assert!((b.p([0.3, -1.0, 0.2]) - 1.0 / 16.0).abs() < 1e-15);
        assert!(analytic_ball_n3(0.0, true).is_err());
    }
}
