use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::SparseOperator;
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, PartLabel, Point};

/// Distance weight `δ_part^{2α}` applied to the stiffness form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
    pub part: PartLabel,
}

impl WeightSpec {
    pub fn new(alpha: f64, part: PartLabel) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LabError::InvalidArgument(format!("weight exponent alpha = {alpha} is outside [0, 1]")));
        }
        Ok(Self { alpha, part })
    }

    pub fn unweighted() -> Self {
        Self { alpha: 0.0, part: PartLabel::Whole }
    }

    /// `δ^{2α}`, with `0^0 = 1`.
    pub fn factor(&self, delta: f64) -> f64 {
        if self.alpha == 0.0 {
            1.0
        } else {
            delta.powf(2.0 * self.alpha)
        }
    }
}

/// Piecewise-linear field given by its vertex values.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(LabError::InvalidArgument(format!(
                "{} coefficients for a mesh with {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_vertices();
        Self { mesh, values: vec![c; n] }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `p`, or `None` outside the mesh.
    pub fn evaluate(&self, p: Point) -> Option<f64> {
        let (k, l) = self.mesh.locate(p)?;
        let t = self.mesh.triangles()[k];
        Some(l[0] * self.values[t[0]] + l[1] * self.values[t[1]] + l[2] * self.values[t[2]])
    }

    /// Constant gradient on triangle `k`.
    pub fn triangle_gradient(&self, k: usize) -> Point {
        let t = self.mesh.triangles()[k];
        let g = shape_gradients(&self.mesh.triangle_points(k));
        g[0] * self.values[t[0]] + g[1] * self.values[t[1]] + g[2] * self.values[t[2]]
    }

    /// Area-weighted average of the adjacent triangle gradients at each vertex.
    pub fn recovered_gradient(&self) -> Vec<Point> {
        let n = self.mesh.num_vertices();
        let mut acc = vec![Point::ORIGIN; n];
        let mut wsum = vec![0.0; n];
        for k in 0..self.mesh.num_triangles() {
            let g = self.triangle_gradient(k);
            let a = self.mesh.signed_triangle_area(k);
            for &i in &self.mesh.triangles()[k] {
                acc[i] += g * a;
                wsum[i] += a;
            }
        }
        acc.iter().zip(&wsum).map(|(&g, &w)| if w > 0.0 { g * (1.0 / w) } else { g }).collect()
    }

    /// Interpolated recovered gradient at `p`.
    pub fn smooth_gradient_at(&self, recovered: &[Point], p: Point) -> Option<Point> {
        let (k, l) = self.mesh.locate(p)?;
        let t = self.mesh.triangles()[k];
        Some(recovered[t[0]] * l[0] + recovered[t[1]] * l[1] + recovered[t[2]] * l[2])
    }

    /// `∫ v dx`.
    pub fn integral(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|k| {
                let t = self.mesh.triangles()[k];
                self.mesh.signed_triangle_area(k) * (self.values[t[0]] + self.values[t[1]] + self.values[t[2]]) / 3.0
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.mesh.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact `L^2` norm of the piecewise-linear field.
    pub fn l2_norm(&self) -> f64 {
        mass(&self.mesh).quad_form(&self.values).max(0.0).sqrt()
    }

    /// `‖∇v‖_{L^2}`.
    pub fn gradient_l2_norm(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|k| self.triangle_gradient(k).norm_squared() * self.mesh.signed_triangle_area(k))
            .sum::<f64>()
            .sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Gradients of the three barycentric hat functions.
pub fn shape_gradients(tri: &[Point; 3]) -> [Point; 3] {
    let [a, b, c] = *tri;
    let two_area = (b - a).cross(c - a);
    let s = 1.0 / two_area;
    // ∇λ_i = rot(edge opposite i) / (2|T|)
    [(c - b).rotate_ccw() * s, (a - c).rotate_ccw() * s, (b - a).rotate_ccw() * s]
}

fn local_stiffness(tri: &[Point; 3]) -> [[f64; 3]; 3] {
    let g = shape_gradients(tri);
    let area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(g[j]);
        }
    }
    k
}

fn scatter(mesh: &Mesh, locals: &[[[f64; 3]; 3]]) -> SparseOperator {
    let mut t = Vec::with_capacity(9 * locals.len());
    for (tri, k) in mesh.triangles().iter().zip(locals) {
        for a in 0..3 {
            for b in 0..3 {
                t.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    SparseOperator::from_triplets(mesh.num_vertices(), &t)
}

/// Average of `δ^{2α}` over the three edge midpoints of triangle `k`.
pub fn triangle_weight(mesh: &Mesh, k: usize, weight: &WeightSpec) -> f64 {
    if weight.alpha == 0.0 {
        return 1.0;
    }
    let [a, b, c] = mesh.triangle_points(k);
    [a.lerp(b, 0.5), b.lerp(c, 0.5), c.lerp(a, 0.5)]
        .iter()
        .map(|&m| weight.factor(mesh.distance_to_part(m, weight.part)))
        .sum::<f64>()
        / 3.0
}

/// Stiffness form `∫ δ^{2α} ∇u·∇v`; unweighted when `weight` is `None`.
pub fn stiffness(mesh: &Mesh, weight: Option<&WeightSpec>) -> Result<SparseOperator> {
    if let Some(w) = weight {
        WeightSpec::new(w.alpha, w.part)?;
        if w.alpha > 0.0 && mesh.part_edges(w.part).is_empty() {
            return Err(LabError::EmptyPart(w.part));
        }
    }
    check_triangles(mesh)?;
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let mut loc = local_stiffness(&mesh.triangle_points(k));
            if let Some(w) = weight {
                let s = triangle_weight(mesh, k, w);
                loc.iter_mut().flatten().for_each(|v| *v *= s);
            }
            loc
        })
        .collect();
    Ok(scatter(mesh, &locals))
}

/// Consistent mass matrix `∫ u v`.
pub fn mass(mesh: &Mesh) -> SparseOperator {
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_triangles())
        .map(|k| {
            let a = mesh.signed_triangle_area(k) / 12.0;
            [[2.0 * a, a, a], [a, 2.0 * a, a], [a, a, 2.0 * a]]
        })
        .collect();
    scatter(mesh, &locals)
}

/// Consistent boundary mass `∫_label u v dS`.
pub fn boundary_mass(mesh: &Mesh, label: PartLabel) -> Result<SparseOperator> {
    let edges = mesh.part_edges(label);
    if edges.is_empty() {
        return Err(LabError::EmptyPart(label));
    }
    let mut t = Vec::with_capacity(4 * edges.len());
    for &e in &edges {
        let be = mesh.boundary_edges()[e];
        let l = mesh.edge_length(&be);
        t.push((be.a, be.a, l / 3.0));
        t.push((be.b, be.b, l / 3.0));
        t.push((be.a, be.b, l / 6.0));
        t.push((be.b, be.a, l / 6.0));
    }
    Ok(SparseOperator::from_triplets(mesh.num_vertices(), &t))
}

/// `b_i = ∫ φ_i dx`.
pub fn load_vector(mesh: &Mesh) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (k, t) in mesh.triangles().iter().enumerate() {
        let a = mesh.signed_triangle_area(k) / 3.0;
        for &i in t {
            b[i] += a;
        }
    }
    b
}

fn check_triangles(mesh: &Mesh) -> Result<()> {
    for k in 0..mesh.num_triangles() {
        let area = mesh.signed_triangle_area(k);
        if !(area > 0.0) {
            return Err(LabError::DegenerateTriangle { index: k, area });
        }
    }
    Ok(())
}

/// Stiffness, mass and per-part boundary mass of one mesh.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    mesh: Arc<Mesh>,
}

impl Assembly {
    pub fn boundary_mass(&self, label: PartLabel) -> Result<SparseOperator> {
        boundary_mass(&self.mesh, label)
    }
}

pub fn assemble(mesh: &Arc<Mesh>, weight: Option<&WeightSpec>) -> Result<Assembly> {
    Ok(Assembly { stiffness: stiffness(mesh, weight)?, mass: mass(mesh), mesh: mesh.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, PolygonalDomain};
    use std::f64::consts::PI;

    fn disk(h: f64) -> Arc<Mesh> {
        Arc::new(triangulate(&PolygonalDomain::fourier(1.0, &[], &[], 256).unwrap(), h).unwrap())
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let m = disk(0.1);
        let k = stiffness(&m, None).unwrap();
        let one = vec![1.0; m.num_vertices()];
        assert!(k.mul_vec(&one).iter().all(|v| v.abs() < 1e-12));
        assert!((mass(&m).quad_form(&one) / PI - 1.0).abs() < 0.01);
        assert!(k.max_asymmetry() < 1e-15);
    }

    #[test]
    fn boundary_mass_of_one_is_perimeter() {
        let m = disk(0.1);
        let one = vec![1.0; m.num_vertices()];
        let b = boundary_mass(&m, PartLabel::Whole).unwrap();
        let per = m.boundary_measures(PartLabel::Whole).unwrap().length;
        assert!((b.quad_form(&one) - per).abs() < 1e-12);
        assert!(boundary_mass(&m, PartLabel::Gamma0).is_err());
    }

    #[test]
    fn linear_field_gradient() {
        let m = disk(0.2);
        let f = ScalarField::interpolate(m.clone(), |p| 2.0 * p.x - p.y);
        for k in 0..m.num_triangles() {
            assert!(f.triangle_gradient(k).distance(Point::new(2.0, -1.0)) < 1e-12);
        }
        let k = stiffness(&m, None).unwrap();
        assert!((k.quad_form(f.values()) - 5.0 * m.area()).abs() < 1e-10);
        assert!((f.evaluate(Point::new(0.3, 0.1)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(WeightSpec::new(1.5, PartLabel::Whole).is_err());
    }
}
