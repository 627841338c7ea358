use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use spade::handles::FixedVertexHandle;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::domain::{PartLabel, PolygonalDomain};
use super::point::{point_segment_distance, polygon_contains, Point};
use crate::error::{LabError, Result};

/// Boundary edge oriented with the domain on its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub label: PartLabel,
}

/// Conforming P1 triangulation with labeled boundary edges.
#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    origin: Option<usize>,
    apex: Option<usize>,
    h: f64,
    locator: OnceLock<Locator>,
}

/// Per-part boundary measures.
#[derive(Clone, Debug)]
pub struct BoundaryMeasures {
    /// Total length of the selected edges.
    pub length: f64,
    /// Indices into [`Mesh::boundary_edges`] of the selected edges.
    pub edges: Vec<usize>,
    /// Outward unit normal of each selected edge.
    pub normals: Vec<Point>,
    /// Area of the whole mesh.
    pub area: f64,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            origin: self.origin,
            apex: self.apex,
            h: self.h,
            locator: OnceLock::new(),
        }
    }
}

impl Mesh {
    /// Builds a mesh from raw parts and checks every structural invariant.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        origin: Option<usize>,
        apex: Option<usize>,
    ) -> Result<Self> {
        let h = triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(i, j)| vertices[i].distance(vertices[j]))
            .fold(0.0, f64::max);
        let mesh = Self {
            vertices,
            triangles,
            boundary_edges,
            origin,
            apex,
            h,
            locator: OnceLock::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (k, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nv) {
                return Err(LabError::InvalidMesh(format!("triangle {k} references a missing vertex")));
            }
            let area = self.signed_triangle_area(k);
            if !(area > 0.0) {
                return Err(LabError::DegenerateTriangle { index: k, area });
            }
        }
        // every undirected edge is shared by one (boundary) or two (interior) triangles
        let mut count: HashMap<(usize, usize), (usize, Option<(usize, usize)>)> = HashMap::new();
        for t in &self.triangles {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let e = count.entry((i.min(j), i.max(j))).or_insert((0, None));
                e.0 += 1;
                e.1 = Some((i, j));
            }
        }
        let mut open: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (key, (c, dir)) in &count {
            match c {
                1 => {
                    open.insert(*key, dir.expect("edge direction"));
                }
                2 => {}
                _ => {
                    return Err(LabError::InvalidMesh(format!(
                        "edge {key:?} is shared by {c} triangles (non-conforming)"
                    )))
                }
            }
        }
        if open.len() != self.boundary_edges.len() {
            return Err(LabError::InvalidMesh(format!(
                "{} boundary edges declared but the triangulation has {} free edges",
                self.boundary_edges.len(),
                open.len()
            )));
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            match open.get(&(e.a.min(e.b), e.a.max(e.b))) {
                Some(&(i, j)) if i == e.a && j == e.b => {}
                _ => {
                    return Err(LabError::InvalidMesh(format!(
                        "boundary edge ({}, {}) is not a free, positively oriented triangle edge",
                        e.a, e.b
                    )))
                }
            }
            if next.insert(e.a, e.b).is_some() {
                return Err(LabError::InvalidMesh(format!("vertex {} starts two boundary edges", e.a)));
            }
        }
        // closed loops
        for e in &self.boundary_edges {
            if !next.contains_key(&e.b) {
                return Err(LabError::InvalidMesh(format!("boundary loop is open at vertex {}", e.b)));
            }
        }
        for m in [self.origin, self.apex].into_iter().flatten() {
            if m >= nv {
                return Err(LabError::InvalidMesh("marker index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Vertex index of the interior Dirac site, if any.
    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    /// Vertex index of the cone apex, if any.
    pub fn apex(&self) -> Option<usize> {
        self.apex
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn signed_triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        0.5 * (b - a).cross(c - a)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.signed_triangle_area(k)).sum()
    }

    pub fn edge_points(&self, e: &BoundaryEdge) -> (Point, Point) {
        (self.vertices[e.a], self.vertices[e.b])
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        self.vertices[e.a].distance(self.vertices[e.b])
    }

    /// Outward unit normal: the edge tangent rotated by -pi/2.
    pub fn edge_normal(&self, e: &BoundaryEdge) -> Point {
        (self.vertices[e.b] - self.vertices[e.a]).rotate_cw().normalized()
    }

    pub fn edge_midpoint(&self, e: &BoundaryEdge) -> Point {
        self.vertices[e.a].lerp(self.vertices[e.b], 0.5)
    }

    /// Indices of the boundary edges selected by `label`.
    pub fn part_edges(&self, label: PartLabel) -> Vec<usize> {
        (0..self.boundary_edges.len())
            .filter(|&i| label.selects(self.boundary_edges[i].label))
            .collect()
    }

    /// Sorted, deduplicated vertex indices touched by the selected edges.
    pub fn part_vertices(&self, label: PartLabel) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .part_edges(label)
            .into_iter()
            .flat_map(|i| [self.boundary_edges[i].a, self.boundary_edges[i].b])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn boundary_measures(&self, label: PartLabel) -> Result<BoundaryMeasures> {
        let edges = self.part_edges(label);
        if edges.is_empty() {
            return Err(LabError::EmptyPart(label));
        }
        let length = edges.iter().map(|&i| self.edge_length(&self.boundary_edges[i])).sum();
        let normals = edges.iter().map(|&i| self.edge_normal(&self.boundary_edges[i])).collect();
        Ok(BoundaryMeasures { length, edges, normals, area: self.area() })
    }

    /// Exact Euclidean distance from `p` to the union of the selected edges;
    /// infinite when the part is empty.
    pub fn distance_to_part(&self, p: Point, label: PartLabel) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| label.selects(e.label))
            .map(|e| point_segment_distance(p, self.vertices[e.a], self.vertices[e.b]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary loops as ordered vertex lists (counterclockwise).
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            next.insert(e.a, e.b);
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut loops = Vec::new();
        for e in &self.boundary_edges {
            if seen[e.a] {
                continue;
            }
            let mut lp = Vec::new();
            let mut v = e.a;
            while !seen[v] {
                seen[v] = true;
                lp.push(v);
                v = next[&v];
            }
            loops.push(lp);
        }
        loops
    }

    /// The outer boundary polygon (the single loop for simply connected meshes).
    pub fn boundary_polygon(&self) -> Vec<Point> {
        self.boundary_loops()
            .into_iter()
            .max_by_key(|l| l.len())
            .unwrap_or_default()
            .into_iter()
            .map(|i| self.vertices[i])
            .collect()
    }

    pub fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        self.locator().locate(self, p)
    }

    /// Copy of the mesh with every boundary-edge label reassigned.
    pub fn relabeled(&self, label_of: impl Fn(Point, Point) -> PartLabel) -> Result<Mesh> {
        let edges = self
            .boundary_edges
            .iter()
            .map(|e| BoundaryEdge { label: label_of(self.vertices[e.a], self.vertices[e.b]), ..*e })
            .collect();
        Mesh::from_parts(self.vertices.clone(), self.triangles.clone(), edges, self.origin, self.apex)
    }

    /// Applies `p -> scale * R(angle) p + shift` to every vertex.
    pub fn transformed(&self, scale: f64, angle: f64, shift: Point) -> Result<Mesh> {
        let vertices = self.vertices.iter().map(|&p| p.rotated(angle) * scale + shift).collect();
        Mesh::from_parts(vertices, self.triangles.clone(), self.boundary_edges.clone(), self.origin, self.apex)
    }

    /// Plain-text serialization: `vertices N`, `triangles M`, `bedges K`
    /// section headers followed by coordinate pairs, index triples and
    /// `i j LABEL` lines; optional `origin i` / `apex i` marker lines close
    /// the file.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "bedges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.label);
        }
        if let Some(o) = self.origin {
            let _ = writeln!(s, "origin {o}");
        }
        if let Some(a) = self.apex {
            let _ = writeln!(s, "apex {a}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |line: usize, msg: &str| LabError::Config { line: line + 1, message: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut section = |name: &str| -> Result<(usize, Vec<(usize, Vec<&str>)>)> {
            let (ln, l) = lines.next().ok_or_else(|| bad(0, &format!("missing `{name}` header")))?;
            let mut t = l.split_whitespace();
            if t.next() != Some(name) {
                return Err(bad(ln, &format!("expected `{name} <count>`")));
            }
            let n: usize = t.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(ln, "bad count"))?;
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, l) = lines.next().ok_or_else(|| bad(ln, &format!("truncated `{name}` section")))?;
                rows.push((ln, l.split_whitespace().collect()));
            }
            Ok((ln, rows))
        };
        let (_, vrows) = section("vertices")?;
        let mut vertices = Vec::with_capacity(vrows.len());
        for (ln, tok) in vrows {
            let xs: Vec<f64> = tok.iter().filter_map(|t| t.parse().ok()).collect();
            if xs.len() != 2 || tok.len() != 2 {
                return Err(bad(ln, "expected `x y`"));
            }
            vertices.push(Point::new(xs[0], xs[1]));
        }
        let (_, trows) = section("triangles")?;
        let mut triangles = Vec::with_capacity(trows.len());
        for (ln, tok) in trows {
            let ix: Vec<usize> = tok.iter().filter_map(|t| t.parse().ok()).collect();
            if ix.len() != 3 || tok.len() != 3 {
                return Err(bad(ln, "expected `i j k`"));
            }
            triangles.push([ix[0], ix[1], ix[2]]);
        }
        let (_, erows) = section("bedges")?;
        let mut edges = Vec::with_capacity(erows.len());
        for (ln, tok) in erows {
            if tok.len() != 3 {
                return Err(bad(ln, "expected `i j LABEL`"));
            }
            let a = tok[0].parse().map_err(|_| bad(ln, "bad index"))?;
            let b = tok[1].parse().map_err(|_| bad(ln, "bad index"))?;
            let label = tok[2].parse().map_err(|_| bad(ln, "bad label"))?;
            edges.push(BoundaryEdge { a, b, label });
        }
        let (mut origin, mut apex) = (None, None);
        for (ln, l) in lines {
            let tok: Vec<&str> = l.split_whitespace().collect();
            let idx = tok.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| bad(ln, "bad marker"))?;
            match tok[0] {
                "origin" => origin = Some(idx),
                "apex" => apex = Some(idx),
                _ => return Err(bad(ln, "unexpected trailing line")),
            }
        }
        Mesh::from_parts(vertices, triangles, edges, origin, apex)
    }
}

/// Meshes `domain` with a constrained Delaunay triangulation of the
/// subdivided boundary plus a hexagonal lattice of spacing `h_target`.
///
/// Every domain vertex and marker is a mesh vertex; boundary edges are
/// straight subdivisions of the domain edges and inherit their labels.
pub fn triangulate(domain: &PolygonalDomain, h_target: f64) -> Result<Mesh> {
    let diameter = domain.diameter();
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(LabError::Meshing(format!("h_target must be positive, got {h_target}")));
    }
    if h_target >= 0.5 * diameter {
        return Err(LabError::Meshing(format!(
            "h_target = {h_target} cannot resolve a domain of diameter {diameter:.4}; use h_target < {:.4}",
            0.5 * diameter
        )));
    }
    let h = h_target;

    // boundary subdivision
    let mut points: Vec<Point> = Vec::new();
    let mut loop_labels: Vec<PartLabel> = Vec::new();
    for i in 0..domain.num_edges() {
        let (a, b) = domain.edge(i);
        let m = ((a.distance(b) / h).ceil() as usize).max(1);
        for k in 0..m {
            points.push(a.lerp(b, k as f64 / m as f64));
            loop_labels.push(domain.labels()[i]);
        }
    }
    let nb = points.len();
    let boundary_poly: Vec<Point> = points.clone();

    let apex = match domain.apex() {
        Some(x0) => Some(
            (0..nb)
                .find(|&i| points[i] == x0)
                .ok_or_else(|| LabError::Meshing("apex marker is not a boundary vertex".into()))?,
        ),
        None => None,
    };

    let seg_grid = SegmentGrid::new(&boundary_poly, h);
    let min_gap = 0.35 * h;
    let origin = domain.origin().map(|o| {
        points.push(o);
        points.len() - 1
    });
    if let Some(oi) = origin {
        if seg_grid.distance(points[oi], &boundary_poly) < 0.25 * h {
            return Err(LabError::Meshing(format!(
                "origin marker lies within {:.3e} of the boundary; refine h_target",
                0.25 * h
            )));
        }
    }

    // hexagonal lattice, anchored at the origin marker when present
    let (lo, hi) = bbox(&boundary_poly);
    let anchor = domain.origin().unwrap_or(lo);
    let dy = h * 3f64.sqrt() / 2.0;
    let j0 = ((lo.y - anchor.y) / dy).floor() as i64 - 1;
    let j1 = ((hi.y - anchor.y) / dy).ceil() as i64 + 1;
    let i0 = ((lo.x - anchor.x) / h).floor() as i64 - 1;
    let i1 = ((hi.x - anchor.x) / h).ceil() as i64 + 1;
    for j in j0..=j1 {
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in i0..=i1 {
            let p = Point::new(anchor.x + i as f64 * h + shift, anchor.y + j as f64 * dy);
            if !polygon_contains(&boundary_poly, p) {
                continue;
            }
            if let Some(o) = domain.origin() {
                if p.distance(o) < 0.5 * h {
                    continue;
                }
            }
            if seg_grid.distance(p, &boundary_poly) < min_gap {
                continue;
            }
            points.push(p);
        }
    }

    let spade_points: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let constraints: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();
    let mut cdt = Cdt::bulk_load_cdt(spade_points, constraints)
        .map_err(|e| LabError::Meshing(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(LabError::Meshing("duplicate mesh points (boundary too fine for h_target?)".into()));
    }

    // split interior edges longer than the target bound at their midpoints
    let max_len = 1.3 * h;
    let mut inside = inside_faces(&cdt, nb)?;
    for _ in 0..20 {
        let mut splits: Vec<(usize, usize)> = Vec::new();
        for face in cdt.inner_faces() {
            if !inside[face.fix().index()] {
                continue;
            }
            for e in face.adjacent_edges() {
                if cdt.is_constraint_edge(e.as_undirected().fix()) {
                    continue;
                }
                let (i, j) = (e.from().fix().index(), e.to().fix().index());
                if i < j && points[i].distance(points[j]) > max_len {
                    splits.push((i, j));
                }
            }
        }
        if splits.is_empty() {
            break;
        }
        splits.sort_unstable();
        splits.dedup();
        for (i, j) in splits {
            let m = points[i].lerp(points[j], 0.5);
            let v = cdt
                .insert(Point2::new(m.x, m.y))
                .map_err(|e| LabError::Meshing(format!("refinement failed: {e:?}")))?;
            if v.index() == points.len() {
                points.push(m);
            }
        }
        if cdt.num_vertices() != points.len() {
            return Err(LabError::Meshing("refinement produced a duplicate vertex".into()));
        }
        inside = inside_faces(&cdt, nb)?;
    }

    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        if !inside[face.fix().index()] {
            continue;
        }
        let vs = face.vertices();
        let t = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        triangles.push(t);
    }
    // deterministic ordering independent of the triangulator's face order
    triangles.sort_unstable_by_key(|t| {
        let mut s = *t;
        s.sort_unstable();
        s
    });
    let boundary_edges = (0..nb)
        .map(|i| BoundaryEdge { a: i, b: (i + 1) % nb, label: loop_labels[i] })
        .collect();
    Mesh::from_parts(points, triangles, boundary_edges, origin, apex)
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

/// Faces enclosed by the boundary constraints, found by flood fill from the
/// left side of each boundary segment (vertices `0..nb` form the loop).
fn inside_faces(cdt: &Cdt, nb: usize) -> Result<Vec<bool>> {
    let mut inside = vec![false; cdt.num_all_faces()];
    let mut stack = Vec::new();
    for i in 0..nb {
        let e = cdt
            .get_edge_from_neighbors(FixedVertexHandle::from_index(i), FixedVertexHandle::from_index((i + 1) % nb))
            .ok_or_else(|| LabError::Meshing(format!("boundary segment {i} is missing from the triangulation")))?;
        if let Some(f) = e.face().as_inner() {
            stack.push(f.fix());
        }
    }
    while let Some(f) = stack.pop() {
        if std::mem::replace(&mut inside[f.index()], true) {
            continue;
        }
        for e in cdt.face(f).adjacent_edges() {
            if cdt.is_constraint_edge(e.as_undirected().fix()) {
                continue;
            }
            match e.rev().face().as_inner() {
                Some(g) if !inside[g.fix().index()] => stack.push(g.fix()),
                Some(_) => {}
                None => return Err(LabError::Meshing("boundary is not closed in the triangulation".into())),
            }
        }
    }
    Ok(inside)
}

fn bbox(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Bucket grid over the edges of a closed polyline for nearest-distance queries.
struct SegmentGrid {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SegmentGrid {
    fn new(poly: &[Point], cell: f64) -> Self {
        let (lo, hi) = bbox(poly);
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let cx0 = (((a.x.min(b.x) - lo.x) / cell).floor() as usize).min(nx - 1);
            let cx1 = (((a.x.max(b.x) - lo.x) / cell).floor() as usize).min(nx - 1);
            let cy0 = (((a.y.min(b.y) - lo.y) / cell).floor() as usize).min(ny - 1);
            let cy1 = (((a.y.max(b.y) - lo.y) / cell).floor() as usize).min(ny - 1);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    buckets[cy * nx + cx].push(i);
                }
            }
        }
        Self { lo, cell, nx, ny, buckets }
    }

    /// Distance to the polyline, exact when it is below one cell; otherwise
    /// a lower bound of at least one cell.
    fn distance(&self, p: Point, poly: &[Point]) -> f64 {
        let n = poly.len();
        let cx = ((p.x - self.lo.x) / self.cell).floor() as i64;
        let cy = ((p.y - self.lo.y) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                if x < 0 || y < 0 || x as usize >= self.nx || y as usize >= self.ny {
                    continue;
                }
                for &i in &self.buckets[y as usize * self.nx + x as usize] {
                    best = best.min(point_segment_distance(p, poly[i], poly[(i + 1) % n]));
                }
            }
        }
        if best.is_finite() { best } else { self.cell }
    }
}

/// Uniform bucket grid over triangles for point location.
#[derive(Debug)]
pub struct Locator {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = bbox(mesh.vertices());
        let n = mesh.num_triangles().max(1) as f64;
        let cell = (((hi.x - lo.x) * (hi.y - lo.y)) / n).sqrt().max(1e-300) * 1.5;
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for k in 0..mesh.num_triangles() {
            let (tlo, thi) = bbox(&mesh.triangle_points(k));
            let cx0 = (((tlo.x - lo.x) / cell).floor() as usize).min(nx - 1);
            let cx1 = (((thi.x - lo.x) / cell).floor() as usize).min(nx - 1);
            let cy0 = (((tlo.y - lo.y) / cell).floor() as usize).min(ny - 1);
            let cy1 = (((thi.y - lo.y) / cell).floor() as usize).min(ny - 1);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    buckets[cy * nx + cx].push(k as u32);
                }
            }
        }
        Self { lo, cell, nx, ny, buckets }
    }

    fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        let cx = ((p.x - self.lo.x) / self.cell).floor();
        let cy = ((p.y - self.lo.y) / self.cell).floor();
        if cx < -1.0 || cy < -1.0 || cx > self.nx as f64 || cy > self.ny as f64 {
            return None;
        }
        let cx = (cx.max(0.0) as usize).min(self.nx - 1);
        let cy = (cy.max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[cy * self.nx + cx] {
            let k = k as usize;
            let l = barycentric(&mesh.triangle_points(k), p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((k, l));
            }
            if best.map_or(true, |b| worst > b.2) {
                best = Some((k, l, worst));
            }
        }
        match best {
            Some((k, l, worst)) if worst > -1e-10 => Some((k, l)),
            _ => None,
        }
    }
}

pub fn barycentric(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = *tri;
    let det = (b - a).cross(c - a);
    let l1 = (p - a).cross(c - a) / det;
    let l2 = (b - a).cross(p - a) / det;
    [1.0 - l1 - l2, l1, l2]
}
