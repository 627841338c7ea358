use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::point::{point_segment_distance, polygon_contains, segments_intersect, signed_area, Point};
use crate::error::{LabError, Result};

/// Label carried by every boundary edge.
///
/// As a *query*, `Whole` selects every boundary edge regardless of its own
/// label; `Gamma0` and `Gamma1` select only edges carrying that label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartLabel {
    Gamma0,
    Gamma1,
    Whole,
}

impl PartLabel {
    #[inline]
    pub fn selects(self, edge_label: PartLabel) -> bool {
        self == PartLabel::Whole || self == edge_label
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PartLabel::Gamma0 => "Gamma0",
            PartLabel::Gamma1 => "Gamma1",
            PartLabel::Whole => "Whole",
        }
    }
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PartLabel {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Gamma0" | "gamma0" => Ok(PartLabel::Gamma0),
            "Gamma1" | "gamma1" => Ok(PartLabel::Gamma1),
            "Whole" | "whole" => Ok(PartLabel::Whole),
            other => Err(LabError::InvalidArgument(format!("unknown part label `{other}`"))),
        }
    }
}

/// Closed, counterclockwise, simple boundary polyline with labeled edges.
///
/// Edge `i` joins vertex `i` to vertex `i + 1` (cyclically) and carries
/// `labels[i]`. The optional origin marker is the interior Dirac site; the
/// optional apex marker is the vertex of a cone and lies on the closure of
/// the `Gamma1` part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonalDomain {
    vertices: Vec<Point>,
    labels: Vec<PartLabel>,
    origin: Option<Point>,
    apex: Option<Point>,
}

impl PolygonalDomain {
    pub fn new(
        vertices: Vec<Point>,
        labels: Vec<PartLabel>,
        origin: Option<Point>,
        apex: Option<Point>,
    ) -> Result<Self> {
        let domain = Self { vertices, labels, origin, apex };
        domain.validate()?;
        Ok(domain)
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(LabError::InvalidDomain(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if self.labels.len() != n {
            return Err(LabError::InvalidDomain(format!(
                "{} labels for {} edges",
                self.labels.len(),
                n
            )));
        }
        if self.vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(LabError::InvalidDomain("non-finite vertex coordinate".into()));
        }
        let area = signed_area(&self.vertices);
        if area <= 0.0 {
            return Err(LabError::InvalidDomain(format!(
                "boundary must be counterclockwise with positive area (signed area {area:e})"
            )));
        }
        for i in 0..n {
            if self.vertices[i] == self.vertices[(i + 1) % n] {
                return Err(LabError::InvalidDomain(format!("zero-length edge {i}")));
            }
        }
        if let Some((i, j)) = self.find_self_intersection() {
            return Err(LabError::InvalidDomain(format!("boundary edges {i} and {j} intersect")));
        }
        if let Some(o) = self.origin {
            if !polygon_contains(&self.vertices, o) || self.distance_to_boundary(o) <= 0.0 {
                return Err(LabError::InvalidDomain("origin marker is not strictly interior".into()));
            }
        }
        if let Some(x0) = self.apex {
            let scale = self.diameter();
            let d = self.distance_to_part(x0, PartLabel::Gamma1);
            if !(d <= 1e-12 * scale) {
                return Err(LabError::InvalidDomain(
                    "apex marker does not lie on the closure of Gamma1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Returns the first pair of non-adjacent intersecting edges, if any.
    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        // bounding boxes sorted by min-x to prune the quadratic scan
        let mut order: Vec<usize> = (0..n).collect();
        let bbox = |i: usize| {
            let (a, b) = self.edge(i);
            (a.x.min(b.x), a.x.max(b.x))
        };
        order.sort_by(|&i, &j| bbox(i).0.total_cmp(&bbox(j).0));
        for (k, &i) in order.iter().enumerate() {
            let (_, max_x) = bbox(i);
            for &j in &order[k + 1..] {
                if bbox(j).0 > max_x {
                    break;
                }
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    // adjacent edges may only share their common vertex; a
                    // folded-back edge shows up as collinear overlap
                    let (a, b) = self.edge(i);
                    let (c, d) = self.edge(j);
                    let shared = if (i + 1) % n == j { b } else { a };
                    let other_i = if shared == a { b } else { a };
                    let other_j = if shared == c { d } else { c };
                    let u = other_i - shared;
                    let v = other_j - shared;
                    if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                        return Some((i.min(j), i.max(j)));
                    }
                    continue;
                }
                let (a, b) = self.edge(i);
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }

    /// Disk perturbed by a finite Fourier series:
    /// `r(t) = base_radius * (1 + sum a_k cos(k t) + sum b_k sin(k t))`,
    /// `k = 1, 2, ...`. The origin marker is placed at `(0, 0)`.
    pub fn fourier(
        base_radius: f64,
        cosine_coeffs: &[f64],
        sine_coeffs: &[f64],
        n_boundary: usize,
    ) -> Result<Self> {
        if !(base_radius > 0.0) {
            return Err(LabError::InvalidDomain("base radius must be positive".into()));
        }
        if n_boundary < 16 {
            return Err(LabError::InvalidDomain(format!("n_boundary must be >= 16, got {n_boundary}")));
        }
        let radius = |t: f64| {
            let mut s = 1.0;
            for (k, a) in cosine_coeffs.iter().enumerate() {
                s += a * ((k + 1) as f64 * t).cos();
            }
            for (k, b) in sine_coeffs.iter().enumerate() {
                s += b * ((k + 1) as f64 * t).sin();
            }
            base_radius * s
        };
        // positivity is checked on a grid much finer than the boundary sampling
        let n_check = 16 * n_boundary;
        for i in 0..n_check {
            let t = 2.0 * PI * i as f64 / n_check as f64;
            let r = radius(t);
            if !(r > 0.0) {
                return Err(LabError::InvalidDomain(format!(
                    "radial function is non-positive at angle {t:.6} (r = {r:.6})"
                )));
            }
        }
        let vertices = (0..n_boundary)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n_boundary as f64;
                Point::polar(radius(t), t)
            })
            .collect();
        Self::new(vertices, vec![PartLabel::Whole; n_boundary], Some(Point::ORIGIN), None)
    }

    /// Ellipse with semi-axes `a` (along x) and `b` (along y), centered at the origin marker.
    pub fn ellipse(a: f64, b: f64, n_boundary: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(LabError::InvalidDomain("ellipse semi-axes must be positive".into()));
        }
        if n_boundary < 16 {
            return Err(LabError::InvalidDomain(format!("n_boundary must be >= 16, got {n_boundary}")));
        }
        let vertices = (0..n_boundary)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n_boundary as f64;
                Point::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::new(vertices, vec![PartLabel::Whole; n_boundary], Some(Point::ORIGIN), None)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`, all edges labeled `Whole`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let vertices = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ];
        Self::new(vertices, vec![PartLabel::Whole; 4], None, None)
    }

    /// Circular sector `{0 < phi < angle, 0 < rho < radius}` with apex at the origin.
    pub fn sector(angle: f64, radius: f64, n_arc: usize, n_side: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidDomain("sector radius must be positive".into()));
        }
        Self::cone(angle, |_| radius, n_arc, n_side)
    }

    /// Intersection of the planar cone `{0 < phi < angle}` with a star-shaped
    /// set whose boundary inside the cone is `rho = radius_of(phi)`.
    ///
    /// The arc is labeled `Gamma0`, the two straight sides `Gamma1`, and the
    /// apex marker sits at the origin.
    pub fn cone(
        angle: f64,
        radius_of: impl Fn(f64) -> f64,
        n_arc: usize,
        n_side: usize,
    ) -> Result<Self> {
        if !(angle > 0.0 && angle <= PI) {
            return Err(LabError::InvalidDomain(format!(
                "cone opening {angle} is outside (0, pi]; the cone must be convex"
            )));
        }
        if n_arc < 2 || n_side < 1 {
            return Err(LabError::InvalidDomain("need n_arc >= 2 and n_side >= 1".into()));
        }
        let mut vertices = Vec::with_capacity(n_arc + 2 * n_side);
        let mut labels = Vec::with_capacity(n_arc + 2 * n_side);
        let r0 = radius_of(0.0);
        let r1 = radius_of(angle);
        if !(r0 > 0.0 && r1 > 0.0) {
            return Err(LabError::InvalidDomain("cone radial function must be positive".into()));
        }
        for k in 0..n_side {
            vertices.push(Point::new(r0 * k as f64 / n_side as f64, 0.0));
            labels.push(PartLabel::Gamma1);
        }
        for k in 0..n_arc {
            let phi = angle * k as f64 / n_arc as f64;
            let r = radius_of(phi);
            if !(r > 0.0) {
                return Err(LabError::InvalidDomain("cone radial function must be positive".into()));
            }
            vertices.push(Point::polar(r, phi));
            labels.push(PartLabel::Gamma0);
        }
        let dir = Point::polar(1.0, angle);
        for k in 0..n_side {
            vertices.push(dir * (r1 * (n_side - k) as f64 / n_side as f64));
            labels.push(PartLabel::Gamma1);
        }
        Self::new(vertices, labels, None, Some(Point::ORIGIN))
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn labels(&self) -> &[PartLabel] {
        &self.labels
    }

    pub fn origin(&self) -> Option<Point> {
        self.origin
    }

    pub fn apex(&self) -> Option<Point> {
        self.apex
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.distance(b)
            })
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max(p.distance(*q));
            }
        }
        d
    }

    pub fn contains(&self, p: Point) -> bool {
        polygon_contains(&self.vertices, p)
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.distance_to_part(p, PartLabel::Whole)
    }

    pub fn distance_to_part(&self, p: Point, label: PartLabel) -> f64 {
        (0..self.num_edges())
            .filter(|&i| label.selects(self.labels[i]))
            .map(|i| {
                let (a, b) = self.edge(i);
                point_segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Returns a copy with edge labels reassigned by `label_of(edge_index, a, b)`.
    pub fn relabeled(&self, label_of: impl Fn(usize, Point, Point) -> PartLabel) -> Result<Self> {
        let labels = (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                label_of(i, a, b)
            })
            .collect();
        Self::new(self.vertices.clone(), labels, self.origin, self.apex)
    }

    /// Rigid motion / dilation `p -> scale * R(angle) p + shift` applied to
    /// the boundary and both markers.
    pub fn transformed(&self, scale: f64, angle: f64, shift: Point) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(LabError::InvalidArgument("scale must be positive".into()));
        }
        let map = |p: Point| p.rotated(angle) * scale + shift;
        Self::new(
            self.vertices.iter().map(|&p| map(p)).collect(),
            self.labels.clone(),
            self.origin.map(map),
            self.apex.map(map),
        )
    }

    pub fn with_origin(&self, origin: Option<Point>) -> Result<Self> {
        Self::new(self.vertices.clone(), self.labels.clone(), origin, self.apex)
    }
}
