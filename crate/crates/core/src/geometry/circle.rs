//! Exact area and first moment of the intersection of a disk with a polygon.

use super::point::Point;

/// Area and first moment (∫x dA, ∫y dA) of a planar region.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub moment: Point,
}

impl Moments {
    pub fn centroid(&self) -> Point {
        self.moment * (1.0 / self.area)
    }
}

/// Moments of `poly ∩ B_r(center)` for a counterclockwise simple polygon.
///
/// Each edge contributes the signed region bounded by the center, the edge
/// and the circle: straight triangles where the edge is inside the disk,
/// circular sectors where it is outside.
pub fn disk_polygon_moments(poly: &[Point], center: Point, r: f64) -> Moments {
    let n = poly.len();
    let mut area = 0.0;
    let mut m = Point::ORIGIN;
    for i in 0..n {
        let a = poly[i] - center;
        let b = poly[(i + 1) % n] - center;
        let (da, dm) = edge_contribution(a, b, r);
        area += da;
        m += dm;
    }
    Moments { area, moment: m + center * area }
}

fn edge_contribution(a: Point, b: Point, r: f64) -> (f64, Point) {
    let d = b - a;
    let qa = d.norm_squared();
    if qa == 0.0 {
        return (0.0, Point::ORIGIN);
    }
    let qb = a.dot(d);
    let qc = a.norm_squared() - r * r;
    let disc = qb * qb - qa * qc;
    if disc <= 0.0 {
        return arc(a, b, r);
    }
    let s = disc.sqrt();
    let t1 = ((-qb - s) / qa).clamp(0.0, 1.0);
    let t2 = ((-qb + s) / qa).clamp(0.0, 1.0);
    let p1 = a + d * t1;
    let p2 = a + d * t2;
    let mut area = 0.0;
    let mut m = Point::ORIGIN;
    if t1 > 0.0 {
        let (x, y) = arc(a, p1, r);
        area += x;
        m += y;
    }
    if t2 > t1 {
        let c = p1.cross(p2);
        area += 0.5 * c;
        m += (p1 + p2) * (c / 6.0);
    }
    if t2 < 1.0 {
        let (x, y) = arc(p2, b, r);
        area += x;
        m += y;
    }
    (area, m)
}

/// Signed circular sector of radius `r` swept from direction `a` to `b`.
fn arc(a: Point, b: Point, r: f64) -> (f64, Point) {
    let dphi = a.cross(b).atan2(a.dot(b));
    if dphi == 0.0 {
        return (0.0, Point::ORIGIN);
    }
    let p1 = a.angle();
    let p2 = p1 + dphi;
    let k = r * r * r / 3.0;
    (0.5 * r * r * dphi, Point::new(k * (p2.sin() - p1.sin()), k * (p1.cos() - p2.cos())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square(c: f64) -> Vec<Point> {
        vec![Point::new(-c, -c), Point::new(c, -c), Point::new(c, c), Point::new(-c, c)]
    }

    #[test]
    fn disk_inside_square() {
        let m = disk_polygon_moments(&square(2.0), Point::new(0.3, -0.2), 1.0);
        assert!((m.area - PI).abs() < 1e-13);
        assert!(m.centroid().distance(Point::new(0.3, -0.2)) < 1e-13);
    }

    #[test]
    fn square_inside_disk() {
        let m = disk_polygon_moments(&square(0.5), Point::new(0.1, 0.0), 2.0);
        assert!((m.area - 1.0).abs() < 1e-14);
        assert!(m.moment.norm() < 1e-14);
    }

    #[test]
    fn quarter_disk_on_corner() {
        // disk centered at a square corner: a quarter disk with centroid 4r/(3pi) on each axis
        let sq = vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 2.0), Point::new(0.0, 2.0)];
        let m = disk_polygon_moments(&sq, Point::ORIGIN, 1.0);
        assert!((m.area - PI / 4.0).abs() < 1e-14);
        let c = 4.0 / (3.0 * PI);
        assert!(m.centroid().distance(Point::new(c, c)) < 1e-13);
    }

    #[test]
    fn half_plane_chord() {
        // unit disk cut by the line x = 0.5: segment area acos(d) - d sqrt(1-d^2)
        let poly = vec![Point::new(-3.0, -3.0), Point::new(0.5, -3.0), Point::new(0.5, 3.0), Point::new(-3.0, 3.0)];
        let m = disk_polygon_moments(&poly, Point::ORIGIN, 1.0);
        let d: f64 = 0.5;
        let cap = d.acos() - d * (1.0 - d * d).sqrt();
        assert!((m.area - (PI - cap)).abs() < 1e-14);
        // moment of the removed cap is 2/3 (1-d^2)^{3/2}
        let cap_mx = 2.0 / 3.0 * (1.0 - d * d).powf(1.5);
        assert!((m.moment.x + cap_mx).abs() < 1e-14);
    }
}
