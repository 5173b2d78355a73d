use crate::error::{GeneoError, Result};
use crate::linalg::{DenseMatrix, SparseSymMatrix};

/// No-fill incomplete Cholesky factor `L` with the pattern of the lower
/// triangle of the input. Rows are stored in CSR with the diagonal last.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// IC(0). A nonpositive pivot is reported, never shifted away.
    pub fn new(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            if col_idx.last() != Some(&i) {
                return Err(GeneoError::BreakdownNonpositivePivot { row: i, pivot: 0.0 });
            }
            row_ptr[i + 1] = col_idx.len();
        }
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for p in start..end {
                let k = col_idx[p];
                // l_ik = (a_ik − Σ_{j<k} l_ij l_kj) / l_kk over the shared pattern
                let mut acc = values[p];
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1]);
                let (mut q, mut r) = (start, ks);
                while q < p && r < ke - 1 {
                    let (cq, cr) = (col_idx[q], col_idx[r]);
                    if cq == cr {
                        acc -= values[q] * values[r];
                        q += 1;
                        r += 1;
                    } else if cq < cr {
                        q += 1;
                    } else {
                        r += 1;
                    }
                }
                if k == i {
                    if !(acc > 0.0) {
                        return Err(GeneoError::BreakdownNonpositivePivot { row: i, pivot: acc });
                    }
                    values[p] = acc.sqrt();
                } else {
                    values[p] = acc / values[ke - 1];
                }
            }
        }
        Ok(Self {
            dim: n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// (L Lᵀ)⁻¹ v
    pub fn solve_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        out.copy_from_slice(v);
        for i in 0..self.dim {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = out[i];
            for p in s..e - 1 {
                acc -= self.values[p] * out[self.col_idx[p]];
            }
            out[i] = acc / self.values[e - 1];
        }
        for i in (0..self.dim).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let xi = out[i] / self.values[e - 1];
            out[i] = xi;
            for p in s..e - 1 {
                out[self.col_idx[p]] -= self.values[p] * xi;
            }
        }
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.solve_into(v, &mut out);
        out
    }

    /// Dense lower factor.
    pub fn lower_dense(&self) -> DenseMatrix {
        let mut l = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                l[(i, self.col_idx[p])] = self.values[p];
            }
        }
        l
    }

    /// L Lᵀ as a dense matrix.
    pub fn product_dense(&self) -> DenseMatrix {
        let l = self.lower_dense();
        &l * l.transpose()
    }

    /// Number of stored entries of L.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}
