//! Smallest eigenpairs of the sparse symmetric generalized problem
//! K u = lambda M u by blocked, preconditioned Rayleigh-quotient
//! minimization (locally optimal block conjugate-gradient style).
//!
//! The search block is [X | W | P]: current iterates, diagonally
//! preconditioned residuals, and the previous step directions. Each
//! iteration M-orthonormalizes the block and solves the small Rayleigh-Ritz
//! problem in it. For Neumann problems the block is seeded with the constant
//! vector, which is an exact null vector of K and locks immediately.
//!
//! Swap point for a shift-invert backend: replace `solve_smallest` behind
//! the same signature; everything downstream only consumes `EigenBasis`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

pub const DEFAULT_TOL: f64 = 1e-8;
const ITER_CAP_PER_PAIR: usize = 500;

/// M-orthonormal eigenpairs sorted by ascending eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    /// One vector per eigenvalue, each of length n.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Relative residuals `|K u - lambda M u| / max(lambda, 1)`.
    pub residuals: Vec<f64>,
    pub tol: f64,
    pub seed: u64,
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Check sorting, residual bounds and M-orthonormality (1e-8).
    pub fn validate(&self, m: &SparseSymMatrix) -> Result<()> {
        for w in self.eigenvalues.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Contract("eigenvalues not sorted ascending".into()));
            }
        }
        for (i, &r) in self.residuals.iter().enumerate() {
            if r > self.tol {
                return Err(Error::Contract(format!(
                    "pair {i} residual {r:e} exceeds tol {:e}",
                    self.tol
                )));
            }
        }
        for i in 0..self.k() {
            for j in i..self.k() {
                let g = m.quad_form(&self.eigenvectors[i], &self.eigenvectors[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g - expect).abs() > 1e-8 {
                    return Err(Error::Contract(format!(
                        "pair ({i},{j}) M-inner product {g} deviates from {expect}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rayleigh quotient u^T K u / u^T M u.
pub fn rayleigh_quotient(k: &SparseSymMatrix, m: &SparseSymMatrix, u: &[f64]) -> Result<f64> {
    let denom = m.quad_form(u, u);
    if denom <= 0.0 {
        return Err(Error::Parameter(
            "rayleigh quotient of a zero (or M-null) vector".into(),
        ));
    }
    Ok(k.quad_form(u, u) / denom)
}

/// M-orthonormalize a block of vectors by modified Gram-Schmidt in the
/// M inner product. Fails on rank deficiency, naming the dependent column.
pub fn m_orthonormalize(m: &SparseSymMatrix, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut m_out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (col, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        let orig = m.quad_form(&w, &w).sqrt();
        for (q, mq) in out.iter().zip(&m_out) {
            let c: f64 = w.iter().zip(mq).map(|(a, b)| a * b).sum();
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        // second pass for numerical orthogonality
        for (q, mq) in out.iter().zip(&m_out) {
            let c: f64 = w.iter().zip(mq).map(|(a, b)| a * b).sum();
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        let norm = m.quad_form(&w, &w).max(0.0).sqrt();
        if !(norm > 1e-12 * orig.max(1e-300)) || norm == 0.0 {
            return Err(Error::Parameter(format!(
                "column {col} is linearly dependent on the preceding block"
            )));
        }
        for wi in &mut w {
            *wi /= norm;
        }
        m_out.push(m.matvec_alloc(&w));
        out.push(w);
    }
    Ok(out)
}

/// Flip the sign of `u` in place so its entry of largest magnitude is
/// positive (first such entry on ties).
pub fn fix_sign(u: &mut [f64]) {
    let mut best = 0usize;
    for (i, &v) in u.iter().enumerate() {
        if v.abs() > u[best].abs() {
            best = i;
        }
    }
    if u[best] < 0.0 {
        for v in u.iter_mut() {
            *v = -*v;
        }
    }
}

fn column_slice(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

fn matvec_block(a: &SparseSymMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (x.nrows(), x.ncols());
    let mut out = DMatrix::zeros(n, m);
    for j in 0..m {
        let src = column_slice(x, j);
        let mut col = vec![0.0; n];
        a.matvec(src, &mut col);
        out.column_mut(j).copy_from_slice(&col);
    }
    out
}

/// M-orthonormalize the columns of `s` by two-pass modified Gram-Schmidt
/// in the M inner product, dropping numerically dependent columns.
/// Returns None if nothing survives.
fn mgs_m_columns(m_mat: &SparseSymMatrix, s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(s.ncols());
    let mut kept_m: Vec<Vec<f64>> = Vec::with_capacity(s.ncols());
    for j in 0..s.ncols() {
        let mut v = column_slice(s, j).to_vec();
        let orig = m_mat.quad_form(&v, &v).max(0.0).sqrt();
        if !(orig > 0.0) {
            continue;
        }
        for _pass in 0..2 {
            for (q, mq) in kept.iter().zip(&kept_m) {
                let c: f64 = v.iter().zip(mq).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = m_mat.quad_form(&v, &v).max(0.0).sqrt();
        if norm <= 1e-10 * orig {
            continue;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        kept_m.push(m_mat.matvec_alloc(&v));
        kept.push(v);
    }
    if kept.is_empty() {
        return None;
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, v) in kept.iter().enumerate() {
        out.column_mut(j).copy_from_slice(v);
    }
    Some(out)
}

/// Solve the k smallest eigenpairs of K u = lambda M u.
///
/// Deterministic for a fixed `(K, M, k, tol, seed)` on one machine; the
/// iteration cap is `500 * k` block steps.
pub fn solve_smallest(
    k_mat: &SparseSymMatrix,
    m_mat: &SparseSymMatrix,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenBasis> {
    let n = k_mat.n;
    if m_mat.n != n {
        return Err(Error::Parameter("K and M dimensions differ".into()));
    }
    if k == 0 || k >= n / 4 {
        return Err(Error::Parameter(format!(
            "k = {k} must satisfy 1 <= k < n/4 = {}",
            n / 4
        )));
    }
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::Parameter(format!(
            "tol = {tol:e} outside [1e-12, 1e-4]"
        )));
    }
    let m_diag = m_mat.diagonal();
    if m_diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Parameter(
            "M is not positive definite (non-positive diagonal entry)".into(),
        ));
    }
    // spot-check positive definiteness on deterministic pseudo-random vectors
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xdead_beef);
        for _ in 0..3 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            if m_mat.quad_form(&v, &v) <= 0.0 {
                return Err(Error::Parameter("M is not positive definite".into()));
            }
        }
    }

    // block width: requested pairs plus a few guard vectors
    let extra = (2 + k / 2).min(8);
    let width = (k + extra).min(n / 3).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(n, width, |_, _| rng.gen::<f64>() - 0.5);
    // seed the constant vector so the Neumann null mode locks immediately
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    x = mgs_m_columns(m_mat, &x)
        .ok_or_else(|| Error::Parameter("M is not positive definite".into()))?;
    if x.ncols() < width {
        return Err(Error::Convergence(
            "starting block collapsed during orthonormalization".into(),
        ));
    }

    let k_diag = k_mat.diagonal();
    let precond: Vec<f64> = k_diag
        .iter()
        .zip(&m_diag)
        .map(|(&kd, &md)| 1.0 / (kd + md).max(1e-300))
        .collect();

    let cap = ITER_CAP_PER_PAIR * k;
    let mut p: Option<DMatrix<f64>> = None;
    let mut worst = f64::INFINITY;
    for _iter in 0..cap {
        let ax = matvec_block(k_mat, &x);
        let bx = matvec_block(m_mat, &x);
        let lambdas: Vec<f64> = (0..x.ncols())
            .map(|j| x.column(j).dot(&ax.column(j)))
            .collect();
        // residuals R = AX - BX diag(lambda)
        let mut r = ax.clone();
        for j in 0..x.ncols() {
            let l = lambdas[j];
            for i in 0..n {
                r[(i, j)] -= l * bx[(i, j)];
            }
        }
        let resnorms: Vec<f64> = (0..x.ncols())
            .map(|j| r.column(j).norm() / lambdas[j].max(1.0))
            .collect();
        worst = resnorms
            .iter()
            .take(k)
            .cloned()
            .fold(0.0f64, f64::max);
        if worst <= tol {
            return finalize(k_mat, m_mat, &x, k, tol, seed);
        }

        // preconditioned residuals for pairs that are not yet converged
        let active: Vec<usize> = (0..x.ncols()).filter(|&j| resnorms[j] > tol).collect();
        let mut w = DMatrix::zeros(n, active.len());
        for (c, &j) in active.iter().enumerate() {
            for i in 0..n {
                w[(i, c)] = precond[i] * r[(i, j)];
            }
        }

        let mut cols = x.ncols() + w.ncols();
        if let Some(pm) = &p {
            cols += pm.ncols();
        }
        let mut s = DMatrix::zeros(n, cols);
        s.view_mut((0, 0), (n, x.ncols())).copy_from(&x);
        s.view_mut((0, x.ncols()), (n, w.ncols())).copy_from(&w);
        if let Some(pm) = &p {
            s.view_mut((0, x.ncols() + w.ncols()), (n, pm.ncols()))
                .copy_from(pm);
        }

        let Some(q) = mgs_m_columns(m_mat, &s) else {
            return Err(Error::Convergence(
                "search subspace collapsed; M may be indefinite".into(),
            ));
        };
        // Rayleigh-Ritz in the orthonormalized subspace
        let aq = matvec_block(k_mat, &q);
        let h = q.transpose() * &aq;
        let h = SymmetricEigen::new(0.5 * (&h + h.transpose()));
        let mut order: Vec<usize> = (0..h.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| h.eigenvalues[a].total_cmp(&h.eigenvalues[b]));
        let take = width.min(order.len());
        let mut z = DMatrix::zeros(q.ncols(), take);
        for (c, &i) in order.iter().take(take).enumerate() {
            z.column_mut(c).copy_from(&h.eigenvectors.column(i));
        }
        let x_new = &q * &z;
        // previous-direction block: the change from the old iterate,
        // M-orthogonalized implicitly by next round's whitening
        let delta = &x_new - &x * (x.transpose() * matvec_block(m_mat, &x_new));
        p = Some(delta);
        x = x_new;
    }
    Err(Error::Convergence(format!(
        "no convergence after {cap} block iterations; worst residual {worst:e} (tol {tol:e})"
    )))
}

fn finalize(
    k_mat: &SparseSymMatrix,
    m_mat: &SparseSymMatrix,
    x: &DMatrix<f64>,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenBasis> {
    let n = x.nrows();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..x.ncols())
        .map(|j| {
            let v = column_slice(x, j).to_vec();
            let l = k_mat.quad_form(&v, &v) / m_mat.quad_form(&v, &v);
            (l, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);

    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (l, mut v) in pairs {
        let norm = m_mat.quad_form(&v, &v).sqrt();
        for vi in &mut v {
            *vi /= norm;
        }
        fix_sign(&mut v);
        let ku = k_mat.matvec_alloc(&v);
        let mu = m_mat.matvec_alloc(&v);
        let mut res = 0.0;
        for i in 0..n {
            let d = ku[i] - l * mu[i];
            res += d * d;
        }
        eigenvalues.push(l);
        eigenvectors.push(v);
        residuals.push(res.sqrt() / l.max(1.0));
    }
    Ok(EigenBasis {
        eigenvalues,
        eigenvectors,
        residuals,
        tol,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::geometry::{Point2, PolygonRegion, RegionTag};
    use crate::mesh::triangulate_convex_polygon;

    fn unit_square_mesh(edge: f64) -> crate::mesh::Mesh {
        let sq = PolygonRegion::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            RegionTag::Omega1,
        )
        .unwrap();
        triangulate_convex_polygon(&sq, edge).unwrap()
    }

    #[test]
    fn neumann_square_low_spectrum() {
        let mesh = unit_square_mesh(0.045);
        let (k, m) = assemble(&mesh).unwrap();
        let basis = solve_smallest(&k, &m, 6, 1e-8, 7).unwrap();
        basis.validate(&m).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let expect = [0.0, pi2, pi2, 2.0 * pi2, 4.0 * pi2, 4.0 * pi2];
        assert!(basis.eigenvalues[0].abs() <= 1e-8 * basis.eigenvalues[1]);
        for i in 1..6 {
            let rel = (basis.eigenvalues[i] - expect[i]).abs() / expect[i];
            assert!(rel < 0.01, "mode {i}: {} vs {}", basis.eigenvalues[i], expect[i]);
        }
    }

    #[test]
    fn fem_eigenvalues_bound_above_and_decrease_under_refinement() {
        let coarse = unit_square_mesh(0.14);
        let fine = crate::mesh::refine_uniform(&coarse);
        let pi2 = std::f64::consts::PI.powi(2);
        let solve = |mesh: &crate::mesh::Mesh| {
            let (k, m) = assemble(mesh).unwrap();
            solve_smallest(&k, &m, 4, 1e-9, 3).unwrap().eigenvalues
        };
        let (lc, lf) = (solve(&coarse), solve(&fine));
        for i in 1..4 {
            let exact = [0.0, pi2, pi2, 2.0 * pi2][i];
            assert!(lc[i] >= exact - 1e-9);
            assert!(lf[i] >= exact - 1e-9);
            assert!(lf[i] <= lc[i] + 1e-9, "mode {i}: {} -> {}", lc[i], lf[i]);
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let mesh = unit_square_mesh(0.12);
        let (k, m) = assemble(&mesh).unwrap();
        let a = solve_smallest(&k, &m, 5, 1e-9, 42).unwrap();
        let b = solve_smallest(&k, &m, 5, 1e-9, 42).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn rayleigh_quotient_basics() {
        let mesh = unit_square_mesh(0.2);
        let (k, m) = assemble(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        assert!(rayleigh_quotient(&k, &m, &ones).unwrap().abs() < 1e-12);
        assert!(rayleigh_quotient(&k, &m, &vec![0.0; mesh.n_vertices()]).is_err());
    }

    #[test]
    fn rayleigh_quotient_of_cos_converges_quadratically() {
        let pi = std::f64::consts::PI;
        let pi2 = pi * pi;
        let mut mesh = unit_square_mesh(0.2);
        let mut errs = Vec::new();
        for _ in 0..3 {
            let (k, m) = assemble(&mesh).unwrap();
            let u: Vec<f64> = mesh.vertices.iter().map(|p| (pi * p.x).cos()).collect();
            errs.push((rayleigh_quotient(&k, &m, &u).unwrap() - pi2).abs());
            mesh = crate::mesh::refine_uniform(&mesh);
        }
        // one refinement halves h; the quotient error should shrink ~4x
        assert!(errs[1] < errs[0] / 2.5);
        assert!(errs[2] < errs[1] / 2.5);
    }

    #[test]
    fn orthonormalize_single_and_idempotent() {
        let mesh = unit_square_mesh(0.2);
        let (_, m) = assemble(&mesh).unwrap();
        let v: Vec<f64> = mesh.vertices.iter().map(|p| p.x + 0.3).collect();
        let out = m_orthonormalize(&m, &[v.clone()]).unwrap();
        let norm = m.quad_form(&v, &v).sqrt();
        for (a, b) in out[0].iter().zip(&v) {
            assert!((a - b / norm).abs() < 1e-12);
        }
        let again = m_orthonormalize(&m, &out).unwrap();
        for (a, b) in again[0].iter().zip(&out[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_constant_and_x_matches_gram_schmidt() {
        let mesh = unit_square_mesh(0.1);
        let (_, m) = assemble(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let x: Vec<f64> = mesh.vertices.iter().map(|p| p.x).collect();
        let out = m_orthonormalize(&m, &[ones, x]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let g = m.quad_form(&out[i], &out[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "({i},{j}) -> {g}");
            }
        }
        // second column should be proportional to sqrt(12) (x - 1/2)
        let ref_val = |x: f64| 12f64.sqrt() * (x - 0.5);
        let probe = mesh
            .vertices
            .iter()
            .position(|p| (p.x - 1.0).abs() < 1e-12)
            .unwrap();
        assert!((out[1][probe].abs() - ref_val(1.0).abs()).abs() < 1e-8);
    }

    #[test]
    fn orthonormalize_rejects_dependent_columns() {
        let mesh = unit_square_mesh(0.3);
        let (_, m) = assemble(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let twos = vec![2.0; mesh.n_vertices()];
        let err = m_orthonormalize(&m, &[ones, twos]).unwrap_err();
        assert!(err.to_string().contains("column 1"));
    }

    #[test]
    fn parameter_validation() {
        let mesh = unit_square_mesh(0.3);
        let (k, m) = assemble(&mesh).unwrap();
        assert!(solve_smallest(&k, &m, mesh.n_vertices(), 1e-8, 0).is_err());
        assert!(solve_smallest(&k, &m, 2, 1e-2, 0).is_err());
    }
}
