//! Reflection symmetry of discrete eigenfunctions.
//!
//! A mesh whose Omega_1 vertices are closed under the reflection induces a
//! vertex permutation R. Eigenfunctions supported on a symmetric operator
//! split into symmetric (u o R = u on Omega_1) and skew (u o R = -u) parts;
//! the skew ones vanish identically along the symmetry axis, which is what
//! makes them insensitive to anything on the far side of the aperture.

use crate::error::{Error, Result};
use crate::fem::element_gradient;
use crate::geometry::{reflect_point, Point2, ReflectionLine, RegionTag};
use crate::mesh::Mesh;
use crate::sparse::SparseSymMatrix;

const MATCH_TOL: f64 = 1e-9;

/// Vertex permutation realizing the reflection on Omega_1.
#[derive(Debug, Clone)]
pub struct ReflectionPermutation {
    /// `vertex_map[i] = Some(j)` when vertex i lies in Omega_1 and its
    /// mirror image is vertex j; `None` for vertices outside Omega_1.
    pub vertex_map: Vec<Option<usize>>,
    /// Omega_1 vertices on the axis (fixed points of the reflection).
    pub fixed_vertices: Vec<usize>,
}

impl ReflectionPermutation {
    /// Apply the permutation: (u o R)_i = u_{map(i)} on Omega_1, and the
    /// identity elsewhere.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| match self.vertex_map[i] {
                Some(j) => u[j],
                None => v,
            })
            .collect()
    }

    pub fn omega1_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertex_map
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|_| i))
    }
}

/// Build the reflection permutation for the Omega_1 vertices of `mesh`.
///
/// Fails with a `Symmetry` error identifying the first unmatched vertex if
/// Omega_1 is not closed under the reflection (e.g. a perturbed mesh).
pub fn reflection_permutation(mesh: &Mesh, line: &ReflectionLine) -> Result<ReflectionPermutation> {
    let n = mesh.n_vertices();
    let mut in_omega1 = vec![false; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.region_tag[t] == RegionTag::Omega1 {
            for &v in tri {
                in_omega1[v] = true;
            }
        }
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| in_omega1[i]).collect();
    // spatial hash on reflected coordinates for O(n) matching
    let cell = |p: Point2| -> (i64, i64) {
        ((p.x / MATCH_TOL / 16.0).floor() as i64, (p.y / MATCH_TOL / 16.0).floor() as i64)
    };
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for &i in &candidates {
        buckets.entry(cell(mesh.vertices[i])).or_default().push(i);
    }
    let mut vertex_map = vec![None; n];
    let mut fixed_vertices = Vec::new();
    for &i in &candidates {
        let r = reflect_point(mesh.vertices[i], line);
        let (cx, cy) = cell(r);
        let mut found = None;
        'outer: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = buckets.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        let q = mesh.vertices[j];
                        if (q.x - r.x).abs() <= MATCH_TOL && (q.y - r.y).abs() <= MATCH_TOL {
                            found = Some(j);
                            break 'outer;
                        }
                    }
                }
            }
        }
        let Some(j) = found else {
            let p = mesh.vertices[i];
            return Err(Error::Symmetry(format!(
                "vertex {i} at ({}, {}) has no mirror image within {MATCH_TOL:e}; \
                 the Omega_1 mesh is not closed under the reflection",
                p.x, p.y
            )));
        };
        vertex_map[i] = Some(j);
        if j == i {
            fixed_vertices.push(i);
        }
    }
    Ok(ReflectionPermutation {
        vertex_map,
        fixed_vertices,
    })
}

/// Parity classification of a mode restricted to Omega_1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    Symmetric,
    Skew,
    Mixed,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Symmetric => write!(f, "symmetric"),
            Parity::Skew => write!(f, "skew"),
            Parity::Mixed => write!(f, "mixed"),
        }
    }
}

/// Parity of `u` with respect to the reflection on Omega_1.
///
/// Returns the label and the skew ratio a/(s+a), where s and a are the
/// l2 norms on Omega_1 of u o R - u and u o R + u. Ratio <= 0.01 means
/// skew-dominated content is negligible -> Symmetric is the >= 0.99 side.
pub fn classify_parity(perm: &ReflectionPermutation, u: &[f64]) -> (Parity, f64) {
    let mut s = 0.0f64;
    let mut a = 0.0f64;
    for i in perm.omega1_vertices() {
        let r = u[perm.vertex_map[i].unwrap()];
        s += (r - u[i]).powi(2);
        a += (r + u[i]).powi(2);
    }
    let (s, a) = (s.sqrt(), a.sqrt());
    if s + a == 0.0 {
        return (Parity::Symmetric, 0.0);
    }
    let ratio = a / (s + a);
    let parity = if ratio <= 0.01 {
        Parity::Skew
    } else if ratio >= 0.99 {
        Parity::Symmetric
    } else {
        Parity::Mixed
    };
    (parity, ratio)
}

/// Evidence that a mode's nodal line contains the symmetry axis.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NodalLineCheck {
    /// max |u| over Omega_1 axis vertices
    pub max_axis_abs: f64,
    /// u at the corner vertex p
    pub corner_value: f64,
    /// norm of the area-weighted average P1 gradient over triangles at p
    pub corner_gradient_norm: f64,
}

/// Evaluate the axis trace and corner behaviour of `u` near the junction
/// point `corner` (which must be a mesh vertex).
pub fn nodal_line_check(
    mesh: &Mesh,
    perm: &ReflectionPermutation,
    u: &[f64],
    corner: Point2,
) -> Result<NodalLineCheck> {
    let corner_idx = mesh.find_vertex(corner, 1e-9).ok_or_else(|| {
        Error::Geometry(format!(
            "corner point ({}, {}) is not a mesh vertex",
            corner.x, corner.y
        ))
    })?;
    let max_axis_abs = perm
        .fixed_vertices
        .iter()
        .map(|&i| u[i].abs())
        .fold(0.0f64, f64::max);
    let mut grad = [0.0f64; 2];
    let mut area_sum = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.contains(&corner_idx) {
            let g = element_gradient(mesh, u, t);
            let area = mesh.triangle_area(t);
            grad[0] += area * g[0];
            grad[1] += area * g[1];
            area_sum += area;
        }
    }
    if area_sum == 0.0 {
        return Err(Error::Geometry(
            "corner vertex belongs to no triangle".into(),
        ));
    }
    grad[0] /= area_sum;
    grad[1] /= area_sum;
    Ok(NodalLineCheck {
        max_axis_abs,
        corner_value: u[corner_idx],
        corner_gradient_norm: (grad[0] * grad[0] + grad[1] * grad[1]).sqrt(),
    })
}

/// Rotate eigenvectors within numerically degenerate clusters so each
/// vector has definite parity, when the cluster spans both parities.
///
/// Clusters are maximal runs where consecutive eigenvalue gaps are at most
/// `10 * tol * max(|lambda|, 1)`. Within a cluster the vectors are combined
/// via the eigendecomposition of the Gram matrix of their skew parts; the
/// rotated vectors are re-M-orthonormalized, given fresh Rayleigh quotients
/// and re-sorted in place.
pub fn disentangle_clusters(
    k_mat: &SparseSymMatrix,
    m_mat: &SparseSymMatrix,
    perm: &ReflectionPermutation,
    eigenvalues: &mut [f64],
    eigenvectors: &mut [Vec<f64>],
    tol: f64,
) -> Result<()> {
    use nalgebra::{DMatrix, SymmetricEigen};
    let k = eigenvalues.len();
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k {
            let gap = eigenvalues[end] - eigenvalues[end - 1];
            if gap > 10.0 * tol * eigenvalues[end].abs().max(1.0) {
                break;
            }
            end += 1;
        }
        let width = end - start;
        if width > 1 {
            let cluster = &eigenvectors[start..end];
            // skew parts s_i = (u_i o R - u_i) restricted to Omega_1
            let skews: Vec<Vec<f64>> = cluster
                .iter()
                .map(|u| {
                    let r = perm.apply(u);
                    perm.omega1_vertices().map(|i| r[i] - u[i]).collect()
                })
                .collect();
            let mut gram = DMatrix::zeros(width, width);
            for i in 0..width {
                for j in 0..width {
                    gram[(i, j)] = skews[i].iter().zip(&skews[j]).map(|(a, b)| a * b).sum();
                }
            }
            let scale = (0..width).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
            if scale > 0.0 {
                let sym = SymmetricEigen::new(gram);
                let n = eigenvectors[0].len();
                let mut rotated = vec![vec![0.0f64; n]; width];
                for c in 0..width {
                    for r in 0..width {
                        let w = sym.eigenvectors[(r, c)];
                        for i in 0..n {
                            rotated[c][i] += w * cluster[r][i];
                        }
                    }
                }
                let rotated = crate::eigensolver::m_orthonormalize(m_mat, &rotated)?;
                for (c, mut v) in rotated.into_iter().enumerate() {
                    crate::eigensolver::fix_sign(&mut v);
                    eigenvalues[start + c] =
                        crate::eigensolver::rayleigh_quotient(k_mat, m_mat, &v)?;
                    eigenvectors[start + c] = v;
                }
                // keep ascending order inside the cluster
                let mut idx: Vec<usize> = (0..width).collect();
                idx.sort_by(|&a, &b| eigenvalues[start + a].total_cmp(&eigenvalues[start + b]));
                let vals: Vec<f64> = idx.iter().map(|&i| eigenvalues[start + i]).collect();
                let vecs: Vec<Vec<f64>> =
                    idx.iter().map(|&i| eigenvectors[start + i].clone()).collect();
                for (c, (val, vec)) in vals.into_iter().zip(vecs).enumerate() {
                    eigenvalues[start + c] = val;
                    eigenvectors[start + c] = vec;
                }
            }
        }
        start = end;
    }
    Ok(())
}
