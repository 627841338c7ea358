mod circle;
mod domain;
mod mesh;
mod point;

pub use circle::{disk_polygon_moments, Moments};
pub use domain::{PartLabel, PolygonalDomain};
pub use mesh::{barycentric, triangulate, BoundaryEdge, BoundaryMeasures, Locator, Mesh};
pub use point::{point_segment_distance, polygon_contains, segments_intersect, signed_area, Point};
