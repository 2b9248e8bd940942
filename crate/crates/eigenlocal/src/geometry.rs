//! Parametric two-room domains: a reflection-symmetric room joined to a
//! second room through an aperture of height `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYM_TOL: f64 = 1e-9;

/// Point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Region label used both for domain pieces and mesh triangle tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    Omega1,
    Omega2,
    Passage,
}

/// Result of classifying a point against a `DomainSpec`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    InOmega1,
    InOmega2,
    InPassage,
    Outside,
}

/// Simple polygon with counterclockwise orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRegion {
    pub vertices: Vec<Point2>,
    pub label: RegionTag,
}

impl PolygonRegion {
    pub fn new(vertices: Vec<Point2>, label: RegionTag) -> Result<Self> {
        let poly = PolygonRegion { vertices, label };
        poly.validate()?;
        Ok(poly)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                self.vertices.len()
            )));
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("polygon has non-finite vertex".into()));
        }
        let area = shoelace(&self.vertices);
        if area <= 1e-14 {
            return Err(Error::Geometry(format!(
                "polygon signed area must be positive, got {area:e}"
            )));
        }
        if self_intersects(&self.vertices) {
            return Err(Error::Geometry("polygon is self-intersecting".into()));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Point2 {
        // area-weighted centroid of the polygon
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            a += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Closed point-in-polygon test (boundary counts as inside).
    pub fn contains(&self, p: Point2) -> bool {
        if self.boundary_distance(p) <= 1e-12 {
            return true;
        }
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < xint {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            best = best.min(segment_distance(p, a, b));
        }
        best
    }
}

/// Shoelace area of a closed vertex loop (positive for ccw).
pub fn shoelace(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut sum = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        sum += p.x * q.y - q.x * p.y;
    }
    0.5 * sum
}

/// Positive polygon area; errors on degenerate input.
pub fn polygon_area(poly: &PolygonRegion) -> Result<f64> {
    poly.validate()?;
    Ok(shoelace(&poly.vertices))
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point2::new(a.x + t * dx, a.y + t * dy))
}

fn segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let cross = |o: Point2, p: Point2, q: Point2| (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn self_intersects(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            // skip adjacent edges (they share a vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Line of reflection given by a point on the line and a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionLine {
    pub point: Point2,
    pub direction: Point2,
}

impl ReflectionLine {
    pub fn new(point: Point2, direction: Point2) -> Result<Self> {
        let norm = (direction.x * direction.x + direction.y * direction.y).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Geometry(format!(
                "reflection line direction must be unit length, |d| = {norm}"
            )));
        }
        Ok(ReflectionLine { point, direction })
    }

    /// Signed distance of `p` from the line (positive on the left of `direction`).
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let (vx, vy) = (p.x - self.point.x, p.y - self.point.y);
        self.direction.x * vy - self.direction.y * vx
    }

    /// Nearest point on the line.
    pub fn project(&self, p: Point2) -> Point2 {
        let (vx, vy) = (p.x - self.point.x, p.y - self.point.y);
        let t = vx * self.direction.x + vy * self.direction.y;
        Point2::new(
            self.point.x + t * self.direction.x,
            self.point.y + t * self.direction.y,
        )
    }

    /// Unit normal to the line.
    pub fn normal(&self) -> Point2 {
        Point2::new(-self.direction.y, self.direction.x)
    }
}

/// Mirror `p` across the line.
pub fn reflect_point(p: Point2, line: &ReflectionLine) -> Point2 {
    let proj = line.project(p);
    Point2::new(2.0 * proj.x - p.x, 2.0 * proj.y - p.y)
}

/// The built-in domain families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum DomainFamily {
    /// Unit square rotated 45 degrees joined to an axis-aligned unit square.
    DiamondBox,
    /// Regular-64-gon disc of radius 1 joined to a unit square.
    DiscBox,
    /// Two unit squares joined by a short corridor of width `h`.
    RoomsAndPassage,
}

impl DomainFamily {
    pub fn max_aperture(self) -> f64 {
        match self {
            DomainFamily::DiamondBox => std::f64::consts::FRAC_1_SQRT_2,
            DomainFamily::DiscBox => 1.0,
            DomainFamily::RoomsAndPassage => 0.5,
        }
    }
}

/// Composite domain: symmetric room, second room, optional passage.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub family: DomainFamily,
    pub omega1: PolygonRegion,
    pub omega2: PolygonRegion,
    pub passage: Option<PolygonRegion>,
    pub symmetry_line: ReflectionLine,
    pub aperture_h: f64,
    /// Point where the symmetry line meets the boundary of the symmetric
    /// room at the junction with the rest of the domain.
    pub corner_point: Point2,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        self.omega1.validate()?;
        self.omega2.validate()?;
        if let Some(p) = &self.passage {
            p.validate()?;
        }
        if !(self.aperture_h > 0.0) {
            return Err(Error::Parameter(format!(
                "aperture_h must be positive, got {}",
                self.aperture_h
            )));
        }
        if self.symmetry_line.signed_distance(self.corner_point).abs() > SYM_TOL {
            return Err(Error::Geometry(
                "corner point does not lie on the symmetry line".into(),
            ));
        }
        if !omega1_is_symmetric(self) {
            return Err(Error::Symmetry(
                "omega1 vertex set is not closed under the reflection".into(),
            ));
        }
        // interiors of the two rooms must not overlap
        for v in &self.omega2.vertices {
            if self.omega1.contains(*v) && self.omega1.boundary_distance(*v) > SYM_TOL {
                return Err(Error::Geometry(
                    "omega2 vertex lies strictly inside omega1".into(),
                ));
            }
        }
        for v in &self.omega1.vertices {
            if self.omega2.contains(*v) && self.omega2.boundary_distance(*v) > SYM_TOL {
                return Err(Error::Geometry(
                    "omega1 vertex lies strictly inside omega2".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> Vec<&PolygonRegion> {
        let mut out = vec![&self.omega1, &self.omega2];
        if let Some(p) = &self.passage {
            out.push(p);
        }
        out
    }

    pub fn total_area(&self) -> f64 {
        self.regions().iter().map(|r| shoelace(&r.vertices)).sum()
    }

    /// Endpoints of the aperture segment on the boundary of omega1,
    /// ordered (negative side, positive side) of the line normal.
    pub fn aperture_endpoints(&self) -> (Point2, Point2) {
        let n = self.symmetry_line.normal();
        let half = 0.5 * self.aperture_h;
        (
            Point2::new(self.corner_point.x - half * n.x, self.corner_point.y - half * n.y),
            Point2::new(self.corner_point.x + half * n.x, self.corner_point.y + half * n.y),
        )
    }
}

/// True if omega1's vertex set maps to itself under the reflection
/// (within `SYM_TOL` per coordinate).
pub fn omega1_is_symmetric(spec: &DomainSpec) -> bool {
    let verts = &spec.omega1.vertices;
    verts.iter().all(|&v| {
        let r = reflect_point(v, &spec.symmetry_line);
        verts
            .iter()
            .any(|&w| (w.x - r.x).abs() <= SYM_TOL && (w.y - r.y).abs() <= SYM_TOL)
    })
}

/// Build one of the canonical two-room domains with aperture height `h`.
pub fn build_two_room_domain(family: DomainFamily, h: f64) -> Result<DomainSpec> {
    let hmax = family.max_aperture();
    if !(h > 0.0 && h < hmax) {
        return Err(Error::Parameter(format!(
            "aperture h = {h} out of range for {family:?}: must satisfy 0 < h < {hmax}"
        )));
    }
    let spec = match family {
        DomainFamily::DiamondBox => build_diamond_box(h)?,
        DomainFamily::DiscBox => build_disc_box(h)?,
        DomainFamily::RoomsAndPassage => build_rooms_and_passage(h)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn build_diamond_box(h: f64) -> Result<DomainSpec> {
    let s = std::f64::consts::FRAC_1_SQRT_2; // half-diagonal of the unit square
    let xc = s - 0.5 * h; // truncation abscissa where the chord has length h
    let omega1 = PolygonRegion::new(
        vec![
            Point2::new(-s, 0.0),
            Point2::new(0.0, -s),
            Point2::new(xc, -0.5 * h),
            Point2::new(xc, 0.5 * h),
            Point2::new(0.0, s),
        ],
        RegionTag::Omega1,
    )?;
    let omega2 = box_with_left_port(xc, h)?;
    Ok(DomainSpec {
        family: DomainFamily::DiamondBox,
        omega1,
        omega2,
        passage: None,
        symmetry_line: ReflectionLine::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))?,
        aperture_h: h,
        corner_point: Point2::new(xc, 0.0),
    })
}

fn build_disc_box(h: f64) -> Result<DomainSpec> {
    // regular 64-gon, exactly symmetric about y = 0
    let n = 64usize;
    let mut verts: Vec<Point2> = Vec::with_capacity(n);
    for k in 0..=n / 2 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        verts.push(Point2::new(theta.cos(), theta.sin()));
    }
    for k in (1..n / 2).rev() {
        let p = verts[k];
        verts.push(Point2::new(p.x, -p.y));
    }

    // truncation abscissa: x at which the upper boundary has y = h/2
    let half = 0.5 * h;
    let mut xc = None;
    for k in 0..n / 2 {
        let (a, b) = (verts[k], verts[k + 1]);
        if a.y <= half && half <= b.y && b.y > a.y {
            let t = (half - a.y) / (b.y - a.y);
            xc = Some(a.x + t * (b.x - a.x));
            break;
        }
    }
    let xc = xc.ok_or_else(|| Error::Geometry("disc truncation chord not found".into()))?;

    // clip to x <= xc, snapping the cut to exactly (xc, +-h/2)
    let mut clipped: Vec<Point2> = Vec::new();
    let m = verts.len();
    for i in 0..m {
        let cur = verts[i];
        let nxt = verts[(i + 1) % m];
        let cur_in = cur.x <= xc + 1e-15;
        let nxt_in = nxt.x <= xc + 1e-15;
        if cur_in {
            clipped.push(cur);
        }
        if cur_in != nxt_in {
            let y = if cur.y + nxt.y > 0.0 { half } else { -half };
            clipped.push(Point2::new(xc, y));
        }
    }
    // rotate so the loop starts away from the cut and dedupe exact repeats
    clipped.dedup_by(|a, b| a == b);
    let omega1 = PolygonRegion::new(clipped, RegionTag::Omega1)?;
    let omega2 = box_with_left_port(xc, h)?;
    Ok(DomainSpec {
        family: DomainFamily::DiscBox,
        omega1,
        omega2,
        passage: None,
        symmetry_line: ReflectionLine::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))?,
        aperture_h: h,
        corner_point: Point2::new(xc, 0.0),
    })
}

/// Unit square `[xc, xc+1] x [-1/2, 1/2]` whose left edge carries the
/// aperture endpoints as explicit vertices.
fn box_with_left_port(xc: f64, h: f64) -> Result<PolygonRegion> {
    PolygonRegion::new(
        vec![
            Point2::new(xc, -0.5),
            Point2::new(xc + 1.0, -0.5),
            Point2::new(xc + 1.0, 0.5),
            Point2::new(xc, 0.5),
            Point2::new(xc, 0.5 * h),
            Point2::new(xc, -0.5 * h),
        ],
        RegionTag::Omega2,
    )
}

const PASSAGE_LENGTH: f64 = 0.05;

fn build_rooms_and_passage(h: f64) -> Result<DomainSpec> {
    let half = 0.5 * h;
    let omega1 = PolygonRegion::new(
        vec![
            Point2::new(-1.0, -0.5),
            Point2::new(0.0, -0.5),
            Point2::new(0.0, -half),
            Point2::new(0.0, half),
            Point2::new(0.0, 0.5),
            Point2::new(-1.0, 0.5),
        ],
        RegionTag::Omega1,
    )?;
    let omega2 = PolygonRegion::new(
        vec![
            Point2::new(PASSAGE_LENGTH, -0.5),
            Point2::new(PASSAGE_LENGTH + 1.0, -0.5),
            Point2::new(PASSAGE_LENGTH + 1.0, 0.5),
            Point2::new(PASSAGE_LENGTH, 0.5),
            Point2::new(PASSAGE_LENGTH, half),
            Point2::new(PASSAGE_LENGTH, -half),
        ],
        RegionTag::Omega2,
    )?;
    let passage = PolygonRegion::new(
        vec![
            Point2::new(0.0, -half),
            Point2::new(PASSAGE_LENGTH, -half),
            Point2::new(PASSAGE_LENGTH, half),
            Point2::new(0.0, half),
        ],
        RegionTag::Passage,
    )?;
    Ok(DomainSpec {
        family: DomainFamily::RoomsAndPassage,
        omega1,
        omega2,
        passage: Some(passage),
        symmetry_line: ReflectionLine::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))?,
        aperture_h: h,
        corner_point: Point2::new(0.0, 0.0),
    })
}

/// Classify a point into the region partition. Points on the closed
/// aperture segment (omega1 boundary) resolve to omega1.
pub fn classify_point(p: Point2, spec: &DomainSpec) -> PointClass {
    if spec.omega1.contains(p) {
        return PointClass::InOmega1;
    }
    if let Some(pass) = &spec.passage {
        if pass.contains(p) {
            return PointClass::InPassage;
        }
    }
    if spec.omega2.contains(p) {
        return PointClass::InOmega2;
    }
    PointClass::Outside
}

/// Displace one off-axis vertex of omega1 along its outward angle-bisector
/// normal. The result intentionally breaks the reflection symmetry, so the
/// symmetry invariant is NOT re-validated here.
pub fn perturb_symmetry(spec: &DomainSpec, delta: f64) -> Result<DomainSpec> {
    if delta.abs() >= 0.5 {
        return Err(Error::Parameter(format!(
            "|delta| must be < 0.5, got {delta}"
        )));
    }
    let mut out = spec.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    let verts = &out.omega1.vertices;
    let n = verts.len();
    // outward normal: sum of the two adjacent edge outward normals (ccw
    // polygon: outward normal of edge (a,b) is (b.y-a.y, a.x-b.x) normalized)
    let edge_normal = |a: Point2, b: Point2| {
        let len = a.dist(b);
        Point2::new((b.y - a.y) / len, (a.x - b.x) / len)
    };
    let displaced = |idx: usize| {
        let prev = verts[(idx + n - 1) % n];
        let cur = verts[idx];
        let next = verts[(idx + 1) % n];
        let n1 = edge_normal(prev, cur);
        let n2 = edge_normal(cur, next);
        let (mut nx, mut ny) = (n1.x + n2.x, n1.y + n2.y);
        let len = (nx * nx + ny * ny).sqrt();
        nx /= len;
        ny /= len;
        Point2::new(cur.x + delta * nx, cur.y + delta * ny)
    };
    // candidates: off-axis vertices that are not aperture endpoints, nearest
    // to the junction first. Skip a candidate when its displaced copy would
    // land inside another region or break the polygon.
    let port = spec.passage.as_ref().unwrap_or(&spec.omega2);
    let aperture = shared_edge(&spec.omega1, port);
    let on_aperture = |p: Point2| {
        aperture.map_or(false, |(a, b)| p.dist(a) <= SYM_TOL || p.dist(b) <= SYM_TOL)
    };
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            spec.symmetry_line.signed_distance(verts[i]).abs() > SYM_TOL
                && !on_aperture(verts[i])
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Geometry("omega1 has no vertex off the axis".into()));
    }
    candidates.sort_by(|&a, &b| {
        verts[a]
            .dist(spec.corner_point)
            .partial_cmp(&verts[b].dist(spec.corner_point))
            .unwrap()
    });
    let mut last_err = None;
    for idx in candidates {
        let p = displaced(idx);
        if spec.omega2.contains(p)
            || spec.passage.as_ref().map_or(false, |pass| pass.contains(p))
        {
            continue;
        }
        let mut trial = out.omega1.clone();
        trial.vertices[idx] = p;
        match trial.validate() {
            Ok(()) => {
                out.omega1 = trial;
                return Ok(out);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::Geometry("no displaceable omega1 vertex keeps the domain valid".into())
    }))
}

/// Find the edge of `omega1` that also appears (reversed) on `other`.
pub fn shared_edge(omega1: &PolygonRegion, other: &PolygonRegion) -> Option<(Point2, Point2)> {
    let eq = |a: Point2, b: Point2| a.x == b.x && a.y == b.y;
    let n = omega1.vertices.len();
    let m = other.vertices.len();
    for i in 0..n {
        let (a, b) = (omega1.vertices[i], omega1.vertices[(i + 1) % n]);
        for j in 0..m {
            let (c, d) = (other.vertices[j], other.vertices[(j + 1) % m]);
            if (eq(a, d) && eq(b, c)) || (eq(a, c) && eq(b, d)) {
                return Some((a, b));
            }
        }
    }
    None
}

// --- JSON document per the external interface ---

#[derive(Serialize, Deserialize)]
struct DomainDto {
    family: DomainFamily,
    h: f64,
    omega1: Vec<Point2>,
    omega2: Vec<Point2>,
    passage: Option<Vec<Point2>>,
    axis: AxisDto,
}

#[derive(Serialize, Deserialize)]
struct AxisDto {
    point: Point2,
    direction: Point2,
}

impl Serialize for DomainSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DomainDto {
            family: self.family,
            h: self.aperture_h,
            omega1: self.omega1.vertices.clone(),
            omega2: self.omega2.vertices.clone(),
            passage: self.passage.as_ref().map(|p| p.vertices.clone()),
            axis: AxisDto {
                point: self.symmetry_line.point,
                direction: self.symmetry_line.direction,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DomainSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let dto = DomainDto::deserialize(d)?;
        let omega1 = PolygonRegion::new(dto.omega1, RegionTag::Omega1).map_err(D::Error::custom)?;
        let omega2 = PolygonRegion::new(dto.omega2, RegionTag::Omega2).map_err(D::Error::custom)?;
        let passage = dto
            .passage
            .map(|v| PolygonRegion::new(v, RegionTag::Passage))
            .transpose()
            .map_err(D::Error::custom)?;
        let line = ReflectionLine::new(dto.axis.point, dto.axis.direction)
            .map_err(D::Error::custom)?;
        // recover the junction corner from the shared aperture edge
        let port = passage.as_ref().unwrap_or(&omega2);
        let (a, b) = shared_edge(&omega1, port)
            .ok_or_else(|| D::Error::custom("no shared aperture edge between regions"))?;
        let corner = line.project(Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        let spec = DomainSpec {
            family: dto.family,
            omega1,
            omega2,
            passage,
            symmetry_line: line,
            aperture_h: dto.h,
            corner_point: corner,
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}
