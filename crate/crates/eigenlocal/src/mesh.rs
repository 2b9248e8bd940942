//! Conforming, region-tagged triangulations of composite domains.
//!
//! Each convex region is meshed from a pre-subdivided boundary loop plus a
//! jittered hexagonal lattice of interior points, Delaunay-triangulated and
//! relaxed by Laplacian smoothing. The symmetric room is meshed on a half
//! domain and mirrored so its vertex set is closed under the reflection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::delaunay;
use crate::error::{Error, Result};
use crate::geometry::{
    omega1_is_symmetric, reflect_point, shared_edge, shoelace, DomainSpec, Point2, PolygonRegion,
    ReflectionLine, SYM_TOL,
};
pub use crate::geometry::RegionTag;

const MERGE_TOL: f64 = 1e-10;
pub const MIN_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub region_tag: Vec<RegionTag>,
    pub boundary_edges: Vec<[usize; 2]>,
    pub axis_vertices: Vec<usize>,
    /// Reflection line the mesh was built against, if any.
    pub axis: Option<ReflectionLine>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeshQuality {
    pub min_angle: f64,
    pub max_aspect: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

pub fn tri_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> (Point2, Point2, Point2) {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let (a, b, c) = self.triangle_points(t);
        tri_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Vertex indices incident to at least one triangle with a tag in `tags`.
    pub fn vertices_in_regions(&self, tags: &[RegionTag]) -> Vec<usize> {
        let mut seen = vec![false; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if tags.contains(&self.region_tag[t]) {
                for &v in tri {
                    seen[v] = true;
                }
            }
        }
        (0..self.vertices.len()).filter(|&v| seen[v]).collect()
    }

    /// Vertex index closest to `p`, if within `tol`.
    pub fn find_vertex(&self, p: Point2, tol: f64) -> Option<usize> {
        let mut best = None;
        let mut best_d = tol;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.dist(p);
            if d <= best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0usize) += 1;
            }
        }
        counts
    }

    /// Structural and quality invariants. `expected_area` is checked to
    /// 1e-9 relative when given.
    pub fn validate(&self, expected_area: Option<f64>) -> Result<()> {
        let scale = self.total_area().abs().max(1e-30);
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) <= 1e-14 * scale {
                let (a, b, c) = self.triangle_points(t);
                return Err(Error::Geometry(format!(
                    "triangle {t} has non-positive area {:e}: ({}, {}) ({}, {}) ({}, {})",
                    self.triangle_area(t),
                    a.x, a.y, b.x, b.y, c.x, c.y
                )));
            }
        }
        let counts = self.edge_counts();
        let mut n_boundary = 0usize;
        for (&(a, b), &c) in &counts {
            if c > 2 {
                return Err(Error::Geometry(format!(
                    "edge ({a},{b}) shared by {c} triangles"
                )));
            }
            if c == 1 {
                n_boundary += 1;
            }
        }
        if n_boundary != self.boundary_edges.len() {
            return Err(Error::Geometry(format!(
                "boundary edge list has {} entries, expected {}",
                self.boundary_edges.len(),
                n_boundary
            )));
        }
        // Euler characteristic of a simply connected triangulated disc
        let v = self.vertices.len() as i64;
        let e = counts.len() as i64;
        let t = self.triangles.len() as i64;
        if v - e + t != 1 {
            return Err(Error::Geometry(format!(
                "Euler check failed: V - E + T = {}",
                v - e + t
            )));
        }
        let q = self.quality();
        if q.min_angle < MIN_ANGLE_DEG {
            return Err(Error::Geometry(format!(
                "minimum interior angle {:.2} below {MIN_ANGLE_DEG} degrees",
                q.min_angle
            )));
        }
        if let Some(area) = expected_area {
            let sum = self.total_area();
            if ((sum - area) / area).abs() > 1e-9 {
                return Err(Error::Geometry(format!(
                    "triangle area sum {sum} differs from domain area {area}"
                )));
            }
        }
        if let Some(line) = &self.axis {
            for &v in &self.axis_vertices {
                if line.signed_distance(self.vertices[v]).abs() > SYM_TOL {
                    return Err(Error::Geometry(format!(
                        "axis vertex {v} is off the symmetry line"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn quality(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        let mut max_aspect: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let (a, b, c) = self.triangle_points(t);
            let pts = [a, b, c];
            let mut emin = f64::INFINITY;
            let mut emax = 0.0f64;
            for i in 0..3 {
                let p = pts[i];
                let q = pts[(i + 1) % 3];
                let r = pts[(i + 2) % 3];
                let v1 = (q.x - p.x, q.y - p.y);
                let v2 = (r.x - p.x, r.y - p.y);
                let dot = v1.0 * v2.0 + v1.1 * v2.1;
                let cross = v1.0 * v2.1 - v1.1 * v2.0;
                min_angle = min_angle.min(cross.atan2(dot).abs().to_degrees());
                let elen = p.dist(q);
                emin = emin.min(elen);
                emax = emax.max(elen);
            }
            max_aspect = max_aspect.max(emax / emin);
        }
        MeshQuality {
            min_angle,
            max_aspect,
            n_vertices: self.vertices.len(),
            n_triangles: self.triangles.len(),
        }
    }

    /// Legacy OFF text for external viewers.
    pub fn to_off(&self) -> String {
        let mut out = String::from("OFF\n");
        let counts = self.edge_counts();
        out.push_str(&format!(
            "{} {} {}\n",
            self.vertices.len(),
            self.triangles.len(),
            counts.len()
        ));
        for v in &self.vertices {
            out.push_str(&format!("{:.17} {:.17} 0\n", v.x, v.y));
        }
        for t in &self.triangles {
            out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        out
    }
}

pub fn mesh_quality(mesh: &Mesh) -> MeshQuality {
    mesh.quality()
}

// --- boundary loop construction ---

/// Uniformly subdivide polygon edges at spacing `spacing`, except edges that
/// match a constrained chain, which contribute the chain's points verbatim.
fn build_loop(polygon: &[Point2], chains: &[Vec<Point2>], spacing: f64) -> Vec<Point2> {
    let close = |p: Point2, q: Point2| p.dist(q) <= 1e-12;
    let mut out = Vec::new();
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let chain = chains.iter().find_map(|c| {
            let (f, l) = (*c.first().unwrap(), *c.last().unwrap());
            if close(a, f) && close(b, l) {
                Some(c.clone())
            } else if close(a, l) && close(b, f) {
                let mut r = c.clone();
                r.reverse();
                Some(r)
            } else {
                None
            }
        });
        match chain {
            Some(c) => out.extend_from_slice(&c[..c.len() - 1]),
            None => {
                let len = a.dist(b);
                let pieces = (len / spacing).ceil().max(1.0) as usize;
                for k in 0..pieces {
                    let t = k as f64 / pieces as f64;
                    out.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
                }
            }
        }
    }
    // collapse exact duplicates where a chain endpoint met the next edge start
    out.dedup_by(|p, q| p.dist(*q) <= 1e-13);
    if out.len() > 1 && out[0].dist(*out.last().unwrap()) <= 1e-13 {
        out.pop();
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn jitter(i: i64, j: i64) -> (f64, f64) {
    let h = splitmix64((i as u64) << 32 ^ (j as u64) ^ 0x5eed);
    let a = ((h & 0xffff_ffff) as f64 / u32::MAX as f64 - 0.5) * 2.0;
    let b = ((h >> 32) as f64 / u32::MAX as f64 - 0.5) * 2.0;
    (a, b)
}

/// Mesh one convex region from its subdivided boundary loop.
fn mesh_convex_region(loop_pts: &[Point2], spacing: f64) -> Result<(Vec<Point2>, Vec<[usize; 3]>)> {
    let poly = PolygonRegion {
        vertices: loop_pts.to_vec(),
        label: RegionTag::Omega1,
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = loop_pts.iter().map(|p| (p.x, p.y)).unzip();
    let (xmin, xmax) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (ymin, ymax) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );

    let mut points = loop_pts.to_vec();
    let n_boundary = points.len();
    let dy = spacing * 3f64.sqrt() / 2.0;
    let margin = 0.62 * spacing;
    let nrows = ((ymax - ymin) / dy).ceil() as i64;
    let ncols = ((xmax - xmin) / spacing).ceil() as i64 + 1;
    for j in 0..=nrows {
        let y0 = ymin + (j as f64 + 0.5) * dy;
        if y0 > ymax {
            break;
        }
        let xoff = if j % 2 == 0 { 0.25 } else { 0.75 };
        for i in 0..=ncols {
            let x0 = xmin + (i as f64 + xoff) * spacing;
            if x0 > xmax {
                break;
            }
            let (jx, jy) = jitter(i, j);
            let p = Point2::new(x0 + 0.06 * spacing * jx, y0 + 0.06 * spacing * jy);
            if poly.contains(p) && poly.boundary_distance(p) >= margin {
                points.push(p);
            }
        }
    }

    // Subdivision points on slanted edges are not exactly collinear in
    // floating point, so the Delaunay hull can grow sliver faces along
    // them; drop anything with negligible area. The hull can also cover
    // shallow notches of a mildly non-convex loop (a perturbed vertex),
    // so triangles whose centroid falls outside the loop are dropped too.
    let drop_slivers = |tris: Vec<[usize; 3]>, pts: &[Point2]| -> Vec<[usize; 3]> {
        tris.into_iter()
            .filter(|t| {
                let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
                if tri_area(a, b, c).abs() <= 1e-6 * spacing * spacing {
                    return false;
                }
                let centroid =
                    Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
                poly.contains(centroid)
            })
            .collect()
    };
    let mut tris = drop_slivers(delaunay::triangulate_points(&points)?, &points);
    // Laplacian relaxation of the interior lattice, boundary fixed
    for _ in 0..3 {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
        for t in &tris {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                }
                if !adj[b].contains(&a) {
                    adj[b].push(a);
                }
            }
        }
        for _ in 0..5 {
            let snapshot = points.clone();
            for v in n_boundary..points.len() {
                if adj[v].is_empty() {
                    continue;
                }
                let (mut sx, mut sy) = (0.0, 0.0);
                for &w in &adj[v] {
                    sx += snapshot[w].x;
                    sy += snapshot[w].y;
                }
                let m = adj[v].len() as f64;
                points[v] = Point2::new(sx / m, sy / m);
            }
        }
        tris = drop_slivers(delaunay::triangulate_points(&points)?, &points);
    }
    Ok((points, tris))
}

/// Clip a convex polygon by the half-plane on the positive-normal side of
/// `line`. Intersection points are projected exactly onto the line.
fn clip_to_halfplane(polygon: &[Point2], line: &ReflectionLine) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::new();
    let n = polygon.len();
    let push = |out: &mut Vec<Point2>, p: Point2| {
        if out.last().map_or(true, |q| q.dist(p) > 1e-12) {
            out.push(p);
        }
    };
    for i in 0..n {
        let cur = polygon[i];
        let nxt = polygon[(i + 1) % n];
        let sc = line.signed_distance(cur);
        let sn = line.signed_distance(nxt);
        let cur_in = sc >= -1e-12;
        let nxt_in = sn >= -1e-12;
        if cur_in {
            push(&mut out, if sc.abs() <= 1e-12 { line.project(cur) } else { cur });
        }
        if cur_in != nxt_in {
            let t = sc / (sc - sn);
            let p = Point2::new(cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y));
            push(&mut out, line.project(p));
        }
    }
    if out.len() > 1 && out[0].dist(*out.last().unwrap()) <= 1e-12 {
        out.pop();
    }
    out
}

/// Mesh a mirror-symmetric convex polygon by meshing the half on the
/// positive side of `line` and reflecting it.
fn mesh_symmetric_region(
    polygon: &[Point2],
    line: &ReflectionLine,
    chains: &[Vec<Point2>],
    spacing: f64,
) -> Result<(Vec<Point2>, Vec<[usize; 3]>)> {
    let half_poly = clip_to_halfplane(polygon, line);
    if half_poly.len() < 3 {
        return Err(Error::Geometry(
            "symmetry line does not cut the polygon".into(),
        ));
    }
    // keep only the on-positive-side portion of each constrained chain
    let half_chains: Vec<Vec<Point2>> = chains
        .iter()
        .map(|c| {
            c.iter()
                .cloned()
                .filter(|p| line.signed_distance(*p) >= -1e-12)
                .collect::<Vec<_>>()
        })
        .filter(|c: &Vec<Point2>| c.len() >= 2)
        .collect();
    let loop_pts = build_loop(&half_poly, &half_chains, spacing);
    let (points, tris) = mesh_convex_region(&loop_pts, spacing)?;

    // mirror: vertices on the line are shared, others get a reflected twin
    let mut full_points = points.clone();
    let mut twin = vec![usize::MAX; points.len()];
    for (i, p) in points.iter().enumerate() {
        if line.signed_distance(*p).abs() <= SYM_TOL {
            twin[i] = i;
        } else {
            twin[i] = full_points.len();
            full_points.push(reflect_point(*p, line));
        }
    }
    let mut full_tris = tris.clone();
    for t in &tris {
        full_tris.push([twin[t[0]], twin[t[2]], twin[t[1]]]);
    }
    Ok((full_points, full_tris))
}

// --- merging region meshes into one conforming mesh ---

struct MeshBuilder {
    vertices: Vec<Point2>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
    triangles: Vec<[usize; 3]>,
    region_tag: Vec<RegionTag>,
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            grid: HashMap::new(),
            cell: 16.0 * MERGE_TOL,
            triangles: Vec::new(),
            region_tag: Vec::new(),
        }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn add_vertex(&mut self, p: Point2) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(cands) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &c in cands {
                        if self.vertices[c].dist(p) <= MERGE_TOL {
                            return c;
                        }
                    }
                }
            }
        }
        let idx = self.vertices.len();
        self.vertices.push(p);
        self.grid.entry((kx, ky)).or_default().push(idx);
        idx
    }

    fn add_region(&mut self, points: &[Point2], tris: &[[usize; 3]], tag: RegionTag) {
        let map: Vec<usize> = points.iter().map(|&p| self.add_vertex(p)).collect();
        for t in tris {
            let mut tri = [map[t[0]], map[t[1]], map[t[2]]];
            let (a, b, c) = (
                self.vertices[tri[0]],
                self.vertices[tri[1]],
                self.vertices[tri[2]],
            );
            if tri_area(a, b, c) < 0.0 {
                tri.swap(1, 2);
            }
            self.triangles.push(tri);
            self.region_tag.push(tag);
        }
    }

    fn finish(self, axis: Option<ReflectionLine>) -> Mesh {
        let mut mesh = Mesh {
            vertices: self.vertices,
            triangles: self.triangles,
            region_tag: self.region_tag,
            boundary_edges: Vec::new(),
            axis_vertices: Vec::new(),
            axis,
        };
        let counts = mesh.edge_counts();
        let mut boundary: Vec<[usize; 2]> = counts
            .iter()
            .filter(|&(_, &c)| c == 1)
            .map(|(&(a, b), _)| [a, b])
            .collect();
        boundary.sort();
        mesh.boundary_edges = boundary;
        if let Some(line) = &mesh.axis {
            mesh.axis_vertices = (0..mesh.vertices.len())
                .filter(|&v| line.signed_distance(mesh.vertices[v]).abs() <= SYM_TOL)
                .collect();
        }
        mesh
    }
}

/// Build a symmetric axis-crossing subdivision of the shared segment
/// `(a, b)`: endpoints, the on-axis midpoint, and uniform points in between.
fn aperture_chain(a: Point2, b: Point2, line: &ReflectionLine, spacing: f64) -> Vec<Point2> {
    let mid = line.project(Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
    let len = a.dist(b);
    let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
    let half = 0.5 * len;
    let n_half = (half / spacing).ceil().max(1.0) as usize;
    let step = half / n_half as f64;
    let mut pts = Vec::with_capacity(2 * n_half + 1);
    for i in (1..=n_half).rev() {
        let t = i as f64 * step;
        pts.push(Point2::new(mid.x - t * ux, mid.y - t * uy));
    }
    pts.push(mid);
    for i in 1..=n_half {
        let t = i as f64 * step;
        pts.push(Point2::new(mid.x + t * ux, mid.y + t * uy));
    }
    *pts.first_mut().unwrap() = a;
    *pts.last_mut().unwrap() = b;
    pts
}

/// Triangulate a composite domain. The aperture must be resolved by the
/// requested edge length (`target_edge < aperture_h`).
pub fn triangulate(spec: &DomainSpec, target_edge: f64) -> Result<Mesh> {
    if !(target_edge > 0.0) {
        return Err(Error::Parameter(format!(
            "target_edge must be positive, got {target_edge}"
        )));
    }
    if target_edge >= spec.aperture_h {
        return Err(Error::Resolution(format!(
            "target_edge = {target_edge} does not resolve the aperture h = {}",
            spec.aperture_h
        )));
    }
    spec.omega1.validate()?;
    spec.omega2.validate()?;
    if let Some(p) = &spec.passage {
        p.validate()?;
    }
    let line = spec.symmetry_line;

    // constrained chains along every segment shared between two regions
    let mut chains: Vec<Vec<Point2>> = Vec::new();
    let port = spec.passage.as_ref().unwrap_or(&spec.omega2);
    let (a1, b1) = shared_edge(&spec.omega1, port)
        .ok_or_else(|| Error::Geometry("no shared edge between omega1 and the next region".into()))?;
    chains.push(aperture_chain(a1, b1, &line, target_edge));
    if let Some(pass) = &spec.passage {
        let (a2, b2) = shared_edge(pass, &spec.omega2).ok_or_else(|| {
            Error::Geometry("no shared edge between the passage and omega2".into())
        })?;
        chains.push(aperture_chain(a2, b2, &line, target_edge));
    }

    let mut builder = MeshBuilder::new();
    let symmetric = omega1_is_symmetric(spec);
    if symmetric {
        let (pts, tris) =
            mesh_symmetric_region(&spec.omega1.vertices, &line, &chains, target_edge)?;
        builder.add_region(&pts, &tris, RegionTag::Omega1);
    } else {
        let loop_pts = build_loop(&spec.omega1.vertices, &chains, target_edge);
        let (pts, tris) = mesh_convex_region(&loop_pts, target_edge)?;
        builder.add_region(&pts, &tris, RegionTag::Omega1);
    }
    if let Some(pass) = &spec.passage {
        let loop_pts = build_loop(&pass.vertices, &chains, target_edge);
        let (pts, tris) = mesh_convex_region(&loop_pts, target_edge)?;
        builder.add_region(&pts, &tris, RegionTag::Passage);
    }
    {
        let loop_pts = build_loop(&spec.omega2.vertices, &chains, target_edge);
        let (pts, tris) = mesh_convex_region(&loop_pts, target_edge)?;
        builder.add_region(&pts, &tris, RegionTag::Omega2);
    }
    let mesh = builder.finish(Some(line));
    mesh.validate(Some(spec.total_area()))?;
    if symmetric {
        check_omega1_mirror_closure(&mesh, &line, RegionTag::Omega1)?;
    }
    Ok(mesh)
}

/// Triangulate a single convex polygon (no symmetry handling).
pub fn triangulate_convex_polygon(poly: &PolygonRegion, target_edge: f64) -> Result<Mesh> {
    poly.validate()?;
    if !(target_edge > 0.0) {
        return Err(Error::Parameter("target_edge must be positive".into()));
    }
    let loop_pts = build_loop(&poly.vertices, &[], target_edge);
    let (pts, tris) = mesh_convex_region(&loop_pts, target_edge)?;
    let mut builder = MeshBuilder::new();
    builder.add_region(&pts, &tris, poly.label);
    let mesh = builder.finish(None);
    mesh.validate(Some(shoelace(&poly.vertices)))?;
    Ok(mesh)
}

/// Triangulate a single mirror-symmetric convex polygon; the result's
/// vertex set is closed under reflection across `line`.
pub fn triangulate_polygon_symmetric(
    poly: &PolygonRegion,
    line: &ReflectionLine,
    target_edge: f64,
) -> Result<Mesh> {
    poly.validate()?;
    if !(target_edge > 0.0) {
        return Err(Error::Parameter("target_edge must be positive".into()));
    }
    let (pts, tris) = mesh_symmetric_region(&poly.vertices, line, &[], target_edge)?;
    let mut builder = MeshBuilder::new();
    builder.add_region(&pts, &tris, poly.label);
    let mesh = builder.finish(Some(*line));
    mesh.validate(Some(shoelace(&poly.vertices)))?;
    check_omega1_mirror_closure(&mesh, line, poly.label)?;
    Ok(mesh)
}

fn check_omega1_mirror_closure(mesh: &Mesh, line: &ReflectionLine, tag: RegionTag) -> Result<()> {
    let verts = mesh.vertices_in_regions(&[tag]);
    let set: Vec<Point2> = verts.iter().map(|&v| mesh.vertices[v]).collect();
    for (i, &v) in verts.iter().enumerate() {
        let r = reflect_point(set[i], line);
        if !set
            .iter()
            .any(|w| (w.x - r.x).abs() <= SYM_TOL && (w.y - r.y).abs() <= SYM_TOL)
        {
            return Err(Error::Symmetry(format!(
                "vertex {v} at ({}, {}) has no mirror partner",
                set[i].x, set[i].y
            )));
        }
    }
    Ok(())
}

/// Split every triangle into four by its edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut get_mid = |a: usize, b: usize, vertices: &mut Vec<Point2>| -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = midpoint.get(&key) {
            return m;
        }
        let (p, q) = (vertices[a], vertices[b]);
        let m = vertices.len();
        vertices.push(Point2::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y)));
        midpoint.insert(key, m);
        m
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut region_tag = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let ab = get_mid(a, b, &mut vertices);
        let bc = get_mid(b, c, &mut vertices);
        let ca = get_mid(c, a, &mut vertices);
        for child in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
            triangles.push(child);
            region_tag.push(mesh.region_tag[t]);
        }
    }
    let mut out = Mesh {
        vertices,
        triangles,
        region_tag,
        boundary_edges: Vec::new(),
        axis_vertices: Vec::new(),
        axis: mesh.axis,
    };
    let counts = out.edge_counts();
    let mut boundary: Vec<[usize; 2]> = counts
        .iter()
        .filter(|&(_, &c)| c == 1)
        .map(|(&(a, b), _)| [a, b])
        .collect();
    boundary.sort();
    out.boundary_edges = boundary;
    if let Some(line) = &out.axis {
        out.axis_vertices = (0..out.vertices.len())
            .filter(|&v| line.signed_distance(out.vertices[v]).abs() <= SYM_TOL)
            .collect();
    }
    out
}

// --- P1 interpolation across meshes ---

struct TriLocator<'a> {
    mesh: &'a Mesh,
    cell: f64,
    x0: f64,
    y0: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> TriLocator<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let mut cell = 0.0f64;
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        for t in 0..mesh.triangles.len() {
            let (a, b, c) = mesh.triangle_points(t);
            cell = cell.max(a.dist(b)).max(b.dist(c)).max(c.dist(a));
            x0 = x0.min(a.x.min(b.x).min(c.x));
            y0 = y0.min(a.y.min(b.y).min(c.y));
        }
        cell = cell.max(1e-12);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for t in 0..mesh.triangles.len() {
            let (a, b, c) = mesh.triangle_points(t);
            let (xmin, xmax) = (a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x));
            let (ymin, ymax) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
            let i0 = ((xmin - x0) / cell).floor() as i64;
            let i1 = ((xmax - x0) / cell).floor() as i64;
            let j0 = ((ymin - y0) / cell).floor() as i64;
            let j1 = ((ymax - y0) / cell).floor() as i64;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    grid.entry((i, j)).or_default().push(t);
                }
            }
        }
        TriLocator {
            mesh,
            cell,
            x0,
            y0,
            grid,
        }
    }

    fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let (a, b, c) = self.mesh.triangle_points(t);
        let area = tri_area(a, b, c);
        [
            tri_area(p, b, c) / area,
            tri_area(a, p, c) / area,
            tri_area(a, b, p) / area,
        ]
    }

    fn tri_distance(&self, t: usize, p: Point2) -> f64 {
        let bary = self.barycentric(t, p);
        if bary.iter().all(|&l| l >= 0.0) {
            return 0.0;
        }
        let (a, b, c) = self.mesh.triangle_points(t);
        [(a, b), (b, c), (c, a)]
            .iter()
            .map(|&(u, v)| {
                let (dx, dy) = (v.x - u.x, v.y - u.y);
                let len2 = dx * dx + dy * dy;
                let s = (((p.x - u.x) * dx + (p.y - u.y) * dy) / len2).clamp(0.0, 1.0);
                p.dist(Point2::new(u.x + s * dx, u.y + s * dy))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Containing (or nearest) triangle and its clamped barycentrics, plus
    /// the distance from `p` to that triangle.
    fn locate(&self, p: Point2) -> Option<(usize, [f64; 3], f64)> {
        let ci = ((p.x - self.x0) / self.cell).floor() as i64;
        let cj = ((p.y - self.y0) / self.cell).floor() as i64;
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=2i64 {
            for di in -ring..=ring {
                for dj in -ring..=ring {
                    if di.abs() != ring && dj.abs() != ring {
                        continue;
                    }
                    if let Some(cands) = self.grid.get(&(ci + di, cj + dj)) {
                        for &t in cands {
                            let d = self.tri_distance(t, p);
                            if best.map_or(true, |(_, bd)| d < bd) {
                                best = Some((t, d));
                            }
                        }
                    }
                }
            }
            if let Some((_, d)) = best {
                if d == 0.0 {
                    break;
                }
            }
        }
        let (t, d) = best?;
        let mut bary = self.barycentric(t, p);
        for l in &mut bary {
            *l = l.max(0.0);
        }
        let s: f64 = bary.iter().sum();
        for l in &mut bary {
            *l /= s;
        }
        Some((t, bary, d))
    }

    fn locate_global(&self, p: Point2) -> (usize, [f64; 3], f64) {
        if let Some(hit) = self.locate(p) {
            if hit.2 < self.cell {
                return hit;
            }
        }
        let mut best = (0usize, f64::INFINITY);
        for t in 0..self.mesh.triangles.len() {
            let d = self.tri_distance(t, p);
            if d < best.1 {
                best = (t, d);
            }
        }
        let (t, d) = best;
        let mut bary = self.barycentric(t, p);
        for l in &mut bary {
            *l = l.max(0.0);
        }
        let s: f64 = bary.iter().sum();
        for l in &mut bary {
            *l /= s;
        }
        (t, bary, d)
    }
}

/// Barycentric P1 interpolation of `values` from `source` onto the vertices
/// of `target`. Target vertices must lie in the source domain or within
/// 1e-6 of its boundary.
pub fn interpolate_p1(source: &Mesh, values: &[f64], target: &Mesh) -> Result<Vec<f64>> {
    if values.len() != source.n_vertices() {
        return Err(Error::Parameter(format!(
            "expected {} values, got {}",
            source.n_vertices(),
            values.len()
        )));
    }
    let loc = TriLocator::new(source);
    let mut out = Vec::with_capacity(target.n_vertices());
    for (v, &p) in target.vertices.iter().enumerate() {
        let (t, bary, d) = loc.locate_global(p);
        if d > 1e-6 {
            return Err(Error::Extrapolation(format!(
                "target vertex {v} at ({}, {}) lies {d:.3e} outside the source domain",
                p.x, p.y
            )));
        }
        let tri = source.triangles[t];
        out.push(bary[0] * values[tri[0]] + bary[1] * values[tri[1]] + bary[2] * values[tri[2]]);
    }
    Ok(out)
}

/// Like `interpolate_p1` but clamps points outside the source domain to the
/// nearest source triangle (used for mode tracking across slightly
/// different domains).
pub fn interpolate_p1_clamped(source: &Mesh, values: &[f64], target: &Mesh) -> Result<Vec<f64>> {
    if values.len() != source.n_vertices() {
        return Err(Error::Parameter(format!(
            "expected {} values, got {}",
            source.n_vertices(),
            values.len()
        )));
    }
    let loc = TriLocator::new(source);
    let mut out = Vec::with_capacity(target.n_vertices());
    for &p in &target.vertices {
        let (t, bary, _) = loc.locate_global(p);
        let tri = source.triangles[t];
        out.push(bary[0] * values[tri[0]] + bary[1] * values[tri[1]] + bary[2] * values[tri[2]]);
    }
    Ok(out)
}

// --- serialization ---

#[derive(Serialize, Deserialize)]
struct MeshDto {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<RegionTag>,
    boundary_edges: Vec<[usize; 2]>,
    axis_vertices: Vec<usize>,
}

impl Serialize for Mesh {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeshDto {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            tags: self.region_tag.clone(),
            boundary_edges: self.boundary_edges.clone(),
            axis_vertices: self.axis_vertices.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mesh {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dto = MeshDto::deserialize(d)?;
        Ok(Mesh {
            vertices: dto.vertices,
            triangles: dto.triangles,
            region_tag: dto.tags,
            boundary_edges: dto.boundary_edges,
            axis_vertices: dto.axis_vertices,
            axis: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_two_room_domain, DomainFamily};

    fn unit_square() -> PolygonRegion {
        PolygonRegion::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            RegionTag::Omega1,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_mesh_conserves_area() {
        let mesh = triangulate_convex_polygon(&unit_square(), 0.25).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-9);
        mesh.validate(Some(1.0)).unwrap();
    }

    #[test]
    fn diamond_box_mesh_has_tags_and_aperture_vertices() {
        let spec = build_two_room_domain(DomainFamily::DiamondBox, 0.1).unwrap();
        let mesh = triangulate(&spec, 0.05).unwrap();
        let (a, b) = spec.aperture_endpoints();
        assert!(mesh.find_vertex(a, 1e-9).is_some());
        assert!(mesh.find_vertex(b, 1e-9).is_some());
        assert!(mesh.region_tag.iter().any(|&t| t == RegionTag::Omega1));
        assert!(mesh.region_tag.iter().any(|&t| t == RegionTag::Omega2));
        assert!((mesh.total_area() - spec.total_area()).abs() < 1e-9 * spec.total_area());
    }

    #[test]
    fn coarse_target_edge_is_a_resolution_error() {
        let spec = build_two_room_domain(DomainFamily::DiamondBox, 0.1).unwrap();
        match triangulate(&spec, 0.2) {
            Err(Error::Resolution(_)) => {}
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn all_families_mesh_and_validate() {
        for family in [
            DomainFamily::DiamondBox,
            DomainFamily::DiscBox,
            DomainFamily::RoomsAndPassage,
        ] {
            let spec = build_two_room_domain(family, 0.15).unwrap();
            let mesh = triangulate(&spec, 0.06).unwrap();
            mesh.validate(Some(spec.total_area())).unwrap();
            assert!(!mesh.axis_vertices.is_empty(), "{family:?}");
        }
    }

    #[test]
    fn refine_quadruples_and_preserves_area_and_angle() {
        let spec = build_two_room_domain(DomainFamily::DiamondBox, 0.2).unwrap();
        let mesh = triangulate(&spec, 0.09).unwrap();
        let fine = refine_uniform(&mesh);
        assert_eq!(fine.n_triangles(), 4 * mesh.n_triangles());
        assert!((fine.total_area() - mesh.total_area()).abs() < 1e-12 * mesh.total_area());
        let (q0, q1) = (mesh.quality(), fine.quality());
        assert!((q0.min_angle - q1.min_angle).abs() < 1e-9);
        fine.validate(Some(spec.total_area())).unwrap();
    }

    #[test]
    fn interpolation_reproduces_linears() {
        let coarse = triangulate_convex_polygon(&unit_square(), 0.3).unwrap();
        let fine = triangulate_convex_polygon(&unit_square(), 0.13).unwrap();
        let lin: Vec<f64> = coarse.vertices.iter().map(|p| p.x + 2.0 * p.y).collect();
        let out = interpolate_p1(&coarse, &lin, &fine).unwrap();
        for (v, p) in fine.vertices.iter().enumerate() {
            assert!((out[v] - (p.x + 2.0 * p.y)).abs() < 1e-12);
        }
        let ones = vec![1.0; coarse.n_vertices()];
        let out = interpolate_p1(&coarse, &ones, &fine).unwrap();
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn interpolation_onto_same_mesh_is_identity() {
        let mesh = triangulate_convex_polygon(&unit_square(), 0.2).unwrap();
        let vals: Vec<f64> = mesh.vertices.iter().map(|p| (3.1 * p.x).sin() + p.y).collect();
        let out = interpolate_p1(&mesh, &vals, &mesh).unwrap();
        for (a, b) in vals.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn extrapolation_is_rejected() {
        let small = triangulate_convex_polygon(&unit_square(), 0.2).unwrap();
        let big_poly = PolygonRegion::new(
            vec![
                Point2::new(-0.5, -0.5),
                Point2::new(1.5, -0.5),
                Point2::new(1.5, 1.5),
                Point2::new(-0.5, 1.5),
            ],
            RegionTag::Omega1,
        )
        .unwrap();
        let big = triangulate_convex_polygon(&big_poly, 0.3).unwrap();
        let vals = vec![1.0; small.n_vertices()];
        match interpolate_p1(&small, &vals, &big) {
            Err(Error::Extrapolation(_)) => {}
            other => panic!("expected extrapolation error, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_square_mesh_closed_under_reflection() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let line = ReflectionLine::new(Point2::new(0.0, 0.0), Point2::new(s, s)).unwrap();
        let mesh = triangulate_polygon_symmetric(&unit_square(), &line, 0.2).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-9);
        assert!(!mesh.axis_vertices.is_empty());
        // diagonal corner is a mesh vertex
        assert!(mesh.find_vertex(Point2::new(0.0, 0.0), 1e-9).is_some());
    }

    #[test]
    fn mesh_json_round_trip() {
        let mesh = triangulate_convex_polygon(&unit_square(), 0.3).unwrap();
        let json = serde_json::to_string(&mesh).unwrap();
        let back: Mesh = serde_json::from_str(&json).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.boundary_edges, mesh.boundary_edges);
    }

    #[test]
    fn off_export_shape() {
        let mesh = triangulate_convex_polygon(&unit_square(), 0.4).unwrap();
        let off = mesh.to_off();
        assert!(off.starts_with("OFF\n"));
        assert_eq!(
            off.lines().count(),
            2 + mesh.n_vertices() + mesh.n_triangles()
        );
    }
}
