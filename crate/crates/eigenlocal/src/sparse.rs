//! Compressed-row symmetric sparse matrices. Only the upper triangle
//! (including the diagonal) is stored; symmetry is implicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSymMatrix {
    pub n: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from (row, col, value) triplets; entries are mirrored into the
    /// upper triangle and duplicates are summed in a fixed order, so the
    /// result is deterministic for a given triplet sequence.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::Parameter(format!(
                    "triplet index ({i},{j}) out of bounds for n = {n}"
                )));
            }
        }
        let mut upper: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        upper.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(upper.len());
        let mut values = Vec::with_capacity(upper.len());
        let mut idx = 0usize;
        for row in 0..n {
            let mut last_col: Option<usize> = None;
            while idx < upper.len() && upper[idx].0 == row {
                let (_, j, v) = upper[idx];
                if last_col == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                    last_col = Some(j);
                }
                idx += 1;
            }
            row_offsets[row + 1] = col_indices.len();
        }
        Ok(SparseSymMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn nnz_stored(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                if self.col_indices[idx] == i {
                    d[i] = self.values[idx];
                }
            }
        }
        d
    }

    /// y = A x, expanding the implicit lower triangle.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let mut yi = 0.0;
            let xi = x[i];
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[idx];
                let v = self.values[idx];
                yi += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += yi;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Quadratic form x^T A y.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec_alloc(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Sum of all entries of the full (symmetrized) matrix.
    pub fn total_sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[idx];
                s += if j == i { self.values[idx] } else { 2.0 * self.values[idx] };
            }
        }
        s
    }

    /// Matrix Market coordinate text, symmetric storage.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
        out.push_str(&format!("{} {} {}\n", self.n, self.n, self.nnz_stored()));
        for i in 0..self.n {
            for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                // symmetric MM stores the lower triangle: swap to (col,row)
                out.push_str(&format!(
                    "{} {} {:.17e}\n",
                    self.col_indices[idx] + 1,
                    i + 1,
                    self.values[idx]
                ));
            }
        }
        out
    }
}
