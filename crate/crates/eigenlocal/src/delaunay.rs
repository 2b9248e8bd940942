//! Thin wrapper over spade's Delaunay triangulation. All regions we mesh
//! are convex, so the triangulation of the point set covers the region
//! exactly and no constraint edges are needed.

use spade::{DelaunayTriangulation, HasPosition, InsertionError, Point2 as SpadePoint, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::Point2;

struct IndexedPoint {
    pos: SpadePoint<f64>,
    index: usize,
}

impl HasPosition for IndexedPoint {
    type Scalar = f64;
    fn position(&self) -> SpadePoint<f64> {
        self.pos
    }
}

/// Delaunay triangulation of a point set, returned as index triples into
/// the input slice (counterclockwise).
pub fn triangulate_points(points: &[Point2]) -> Result<Vec<[usize; 3]>> {
    let mut dt: DelaunayTriangulation<IndexedPoint> = DelaunayTriangulation::new();
    for (index, p) in points.iter().enumerate() {
        dt.insert(IndexedPoint {
            pos: SpadePoint::new(p.x, p.y),
            index,
        })
        .map_err(|e: InsertionError| Error::Geometry(format!("point insertion failed: {e:?}")))?;
    }
    if dt.num_vertices() != points.len() {
        return Err(Error::Geometry(format!(
            "duplicate points: {} inserted, {} unique",
            points.len(),
            dt.num_vertices()
        )));
    }
    let mut tris = Vec::with_capacity(dt.num_inner_faces());
    for face in dt.inner_faces() {
        let [a, b, c] = face.vertices();
        tris.push([a.data().index, b.data().index, c.data().index]);
    }
    // deterministic ordering independent of spade internals
    for t in &mut tris {
        let min_pos = (0..3).min_by_key(|&i| t[i]).unwrap();
        t.rotate_left(min_pos);
    }
    tris.sort();
    Ok(tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_center() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let tris = triangulate_points(&pts).unwrap();
        assert_eq!(tris.len(), 4);
        let area: f64 = tris
            .iter()
            .map(|t| {
                let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
                0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
            })
            .sum();
        assert!((area - 1.0).abs() < 1e-14);
    }
}
