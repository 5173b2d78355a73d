use crate::error::{GeneoError, Result};
use crate::linalg::{DenseMatrix, LinearOperator};

/// Symmetric sparse matrix in CSR form with both triangles stored.
///
/// Column indices are sorted within each row and duplicates are summed at
/// construction, so `get` can binary-search.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates symmetric contributions before compressing into CSR.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `v` at (i, j) and, for off-diagonal positions, at (j, i).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim, "triplet index out of range");
        self.entries.push((i, j, v));
        if i != j {
            self.entries.push((j, i, v));
        }
    }

    /// Adds `v` at (i, j) only. The caller is responsible for symmetry.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim, "triplet index out of range");
        self.entries.push((i, j, v));
    }

    /// Compresses to CSR. Duplicates are summed in insertion order.
    pub fn build(mut self) -> SparseSymMatrix {
        // stable sort keeps insertion order among duplicates
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseSymMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    /// Builds from a dense matrix, keeping entries with nonzero value.
    /// Fails if the input is not symmetric to `1e-14 * max|a_ij|`.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GeneoError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let scale = m.amax();
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if defect > 1e-14 * scale {
            return Err(GeneoError::NotSymmetric { defect });
        }
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        Ok(b.build())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// A X for a dense block X with `dim` rows.
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.nrows(), self.dim);
        let mut y = DenseMatrix::zeros(self.dim, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for i in 0..self.dim {
                let mut acc = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[k] * xc[self.col_idx[k]];
                }
                yc[i] = acc;
            }
        }
        y
    }

    /// ⟨x, A x⟩
    pub fn energy(&self, x: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        dot(x, &ax)
    }

    /// Principal submatrix on the index set `idx` (local numbering follows `idx`).
    pub fn submatrix(&self, idx: &[usize]) -> SparseSymMatrix {
        let mut local = vec![usize::MAX; self.dim];
        for (l, &g) in idx.iter().enumerate() {
            local[g] = l;
        }
        let mut b = TripletBuilder::new(idx.len());
        for (l, &g) in idx.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                let lc = local[c];
                if lc != usize::MAX {
                    b.add(l, lc, v);
                }
            }
        }
        b.build()
    }

    /// Rectangular block (rows `ri`, cols `ci`) as a dense matrix.
    pub fn block_dense(&self, ri: &[usize], ci: &[usize]) -> DenseMatrix {
        let mut local = vec![usize::MAX; self.dim];
        for (l, &g) in ci.iter().enumerate() {
            local[g] = l;
        }
        let mut out = DenseMatrix::zeros(ri.len(), ci.len());
        for (l, &g) in ri.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                let lc = local[c];
                if lc != usize::MAX {
                    out[(l, lc)] = v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ‖self − other‖_F for two matrices of equal dimension.
    pub fn frobenius_distance(&self, other: &SparseSymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let d = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    p += 1;
                    va[p - 1]
                } else if p >= ca.len() || cb[q] < ca[p] {
                    q += 1;
                    -vb[q - 1]
                } else {
                    p += 1;
                    q += 1;
                    va[p - 1] - vb[q - 1]
                };
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// Largest |a_ij − a_ji|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        defect
    }

    /// D A D for a diagonal D given by its entries.
    pub fn scale_sym(&self, d: &[f64]) -> SparseSymMatrix {
        assert_eq!(d.len(), self.dim);
        let mut out = self.clone();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[k] *= d[i] * d[self.col_idx[k]];
            }
        }
        out
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> SparseSymMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Iterates (i, j, v) over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    /// Adds `Rᵀ self R` into a global builder, where `map[l]` is the global
    /// index of local index `l`.
    pub fn lift_into(&self, map: &[usize], out: &mut TripletBuilder) {
        assert_eq!(map.len(), self.dim);
        for (i, j, v) in self.iter() {
            out.add(map[i], map[j], v);
        }
    }

    /// MatrixMarket coordinate format, symmetric, lower triangle, 1-based.
    pub fn to_matrix_market(&self) -> String {
        let lower: Vec<_> = self.iter().filter(|&(i, j, _)| j <= i).collect();
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
        s.push_str(&format!("{} {} {}\n", self.dim, self.dim, lower.len()));
        for (i, j, v) in lower {
            s.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
        }
        s
    }
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseSymMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add_sym(i, i, 2.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2);
        b.add_sym(0, 1, 1.0);
        b.add_sym(1, 0, 2.0);
        b.add_sym(0, 0, 4.0);
        let m = b.build();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = tridiag(5);
        let x = [1.0, -2.0, 0.5, 3.0, 1.0];
        let y = m.mul_vec(&x);
        let yd = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..5 {
            assert!((y[i] - yd[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn submatrix_and_block() {
        let m = tridiag(6);
        let s = m.submatrix(&[1, 2, 4]);
        assert_eq!(s.to_dense(), m.to_dense().select_rows(&[1, 2, 4]).select_columns(&[1, 2, 4]));
        let b = m.block_dense(&[0, 1], &[1, 2, 3]);
        assert_eq!(b[(0, 0)], -1.0);
        assert_eq!(b[(1, 0)], 2.0);
        assert_eq!(b[(1, 1)], -1.0);
        assert_eq!(b[(0, 2)], 0.0);
    }

    #[test]
    fn frobenius_distance_counts_both_patterns() {
        let a = tridiag(3);
        let mut b = TripletBuilder::new(3);
        b.add_sym(0, 2, 1.0);
        let b = b.build();
        let expect = (a.to_dense() - b.to_dense()).norm();
        assert!((a.frobenius_distance(&b) - expect).abs() < 1e-14);
        assert_eq!(a.frobenius_distance(&a), 0.0);
    }

    #[test]
    fn scale_sym_is_dad() {
        let a = tridiag(4);
        let d = [1.0, 2.0, 3.0, 0.5];
        let dm = DenseMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&d));
        let expect = &dm * a.to_dense() * &dm;
        assert!((a.scale_sym(&d).to_dense() - expect).norm() < 1e-14);
    }

    #[test]
    fn matrix_market_header() {
        let s = tridiag(3).to_matrix_market();
        let mut lines = s.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        assert_eq!(lines.next().unwrap(), "3 3 5");
    }

    #[test]
    fn from_dense_rejects_asymmetry() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SparseSymMatrix::from_dense(&m), Err(GeneoError::NotSymmetric { .. })));
    }
}
