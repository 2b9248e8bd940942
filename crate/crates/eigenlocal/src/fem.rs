//! P1 finite element assembly for the weak Laplacian eigenproblem
//! K u = lambda M u, plus region-restricted norms of FEM functions.
//!
//! Neumann conditions are natural: no boundary rows are modified. Dirichlet
//! conditions are imposed by eliminating constrained rows and columns.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mesh::{tri_area, Mesh, RegionTag};
use crate::sparse::SparseSymMatrix;

/// Element stiffness for constant P1 hat gradients:
/// `K_ij = area * (grad phi_i . grad phi_j)`.
pub fn element_stiffness(a: Point2, b: Point2, c: Point2) -> Result<[[f64; 3]; 3]> {
    let area = tri_area(a, b, c);
    if area <= 0.0 {
        return Err(Error::Geometry(format!(
            "degenerate triangle ({},{}) ({},{}) ({},{})",
            a.x, a.y, b.x, b.y, c.x, c.y
        )));
    }
    // grad phi_i = (rot of opposite edge) / (2 area)
    let gb = [
        [b.y - c.y, c.x - b.x],
        [c.y - a.y, a.x - c.x],
        [a.y - b.y, b.x - a.x],
    ];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (gb[i][0] * gb[j][0] + gb[i][1] * gb[j][1]) / (4.0 * area);
        }
    }
    Ok(k)
}

/// Consistent element mass: `(area/12) * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass(a: Point2, b: Point2, c: Point2) -> Result<[[f64; 3]; 3]> {
    let area = tri_area(a, b, c);
    if area <= 0.0 {
        return Err(Error::Geometry("degenerate triangle in mass matrix".into()));
    }
    let mut m = [[area / 12.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = area / 6.0;
    }
    Ok(m)
}

/// P1 gradient of the nodal values `u` on triangle `t` (constant per element).
pub fn element_gradient(mesh: &Mesh, u: &[f64], t: usize) -> [f64; 2] {
    let [i, j, k] = mesh.triangles[t];
    let (a, b, c) = mesh.triangle_points(t);
    let area = tri_area(a, b, c);
    let gb = [
        [b.y - c.y, c.x - b.x],
        [c.y - a.y, a.x - c.x],
        [a.y - b.y, b.x - a.x],
    ];
    let w = [u[i], u[j], u[k]];
    let mut g = [0.0; 2];
    for v in 0..3 {
        g[0] += w[v] * gb[v][0] / (2.0 * area);
        g[1] += w[v] * gb[v][1] / (2.0 * area);
    }
    g
}

/// Assemble global stiffness and mass matrices over the whole mesh.
pub fn assemble(mesh: &Mesh) -> Result<(SparseSymMatrix, SparseSymMatrix)> {
    assemble_tagged(mesh, None)
}

/// Assemble over the triangles whose tag is in `tags` (all when `None`).
pub fn assemble_tagged(
    mesh: &Mesh,
    tags: Option<&[RegionTag]>,
) -> Result<(SparseSymMatrix, SparseSymMatrix)> {
    let n = mesh.n_vertices();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if let Some(tags) = tags {
            if !tags.contains(&mesh.region_tag[t]) {
                continue;
            }
        }
        let (a, b, c) = mesh.triangle_points(t);
        let ke = element_stiffness(a, b, c)?;
        let me = element_mass(a, b, c)?;
        for i in 0..3 {
            for j in i..3 {
                let (gi, gj) = (tri[i], tri[j]);
                kt.push((gi, gj, ke[i][j]));
                mt.push((gi, gj, me[i][j]));
            }
        }
    }
    Ok((
        SparseSymMatrix::from_triplets(n, &kt)?,
        SparseSymMatrix::from_triplets(n, &mt)?,
    ))
}

/// Mapping between the full vertex numbering and the reduced system after
/// Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_full: usize,
    pub reduced_to_full: Vec<usize>,
    pub full_to_reduced: Vec<Option<usize>>,
}

impl DofMap {
    pub fn compress(&self, full: &[f64]) -> Vec<f64> {
        self.reduced_to_full.iter().map(|&v| full[v]).collect()
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full];
        for (r, &v) in self.reduced_to_full.iter().enumerate() {
            out[v] = reduced[r];
        }
        out
    }
}

/// Eliminate the rows/columns of `constrained` vertices from K and M.
pub fn apply_dirichlet(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    constrained: &[usize],
) -> Result<(SparseSymMatrix, SparseSymMatrix, DofMap)> {
    let n = k.n;
    let mut is_constrained = vec![false; n];
    for &v in constrained {
        if v >= n {
            return Err(Error::Parameter(format!(
                "constrained vertex {v} out of range"
            )));
        }
        is_constrained[v] = true;
    }
    let reduced_to_full: Vec<usize> = (0..n).filter(|&v| !is_constrained[v]).collect();
    if reduced_to_full.is_empty() {
        return Err(Error::Parameter(
            "no interior degrees of freedom left after elimination".into(),
        ));
    }
    let mut full_to_reduced = vec![None; n];
    for (r, &v) in reduced_to_full.iter().enumerate() {
        full_to_reduced[v] = Some(r);
    }
    let restrict = |a: &SparseSymMatrix| -> Result<SparseSymMatrix> {
        let mut triplets = Vec::new();
        for i in 0..n {
            let Some(ri) = full_to_reduced[i] else { continue };
            for idx in a.row_offsets[i]..a.row_offsets[i + 1] {
                let j = a.col_indices[idx];
                if let Some(rj) = full_to_reduced[j] {
                    triplets.push((ri, rj, a.values[idx]));
                }
            }
        }
        SparseSymMatrix::from_triplets(reduced_to_full.len(), &triplets)
    };
    Ok((
        restrict(k)?,
        restrict(m)?,
        DofMap {
            n_full: n,
            reduced_to_full,
            full_to_reduced,
        },
    ))
}

/// Norm kind for `norm_region`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
}

/// Region-restricted norm of the P1 function with nodal values `u`:
/// L2 over the masked triangles via the element mass matrices, or the
/// max of |u| over vertices incident to masked triangles.
pub fn norm_region(mesh: &Mesh, u: &[f64], mask: &[RegionTag], kind: NormKind) -> Result<f64> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::Parameter(format!(
            "expected {} nodal values, got {}",
            mesh.n_vertices(),
            u.len()
        )));
    }
    let masked: Vec<usize> = (0..mesh.n_triangles())
        .filter(|&t| mask.contains(&mesh.region_tag[t]))
        .collect();
    if masked.is_empty() {
        return Err(Error::Parameter(format!(
            "region mask {mask:?} selects no triangles"
        )));
    }
    match kind {
        NormKind::L2 => {
            let mut sum = 0.0;
            for &t in &masked {
                let [i, j, k] = mesh.triangles[t];
                let area = mesh.triangle_area(t);
                let (a, b, c) = (u[i], u[j], u[k]);
                sum += area / 6.0 * (a * a + b * b + c * c + a * b + a * c + b * c);
            }
            Ok(sum.max(0.0).sqrt())
        }
        NormKind::Linf => {
            let mut best = 0.0f64;
            for &t in &masked {
                for &v in &mesh.triangles[t] {
                    best = best.max(u[v].abs());
                }
            }
            Ok(best)
        }
    }
}
