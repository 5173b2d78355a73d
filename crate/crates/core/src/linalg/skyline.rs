use crate::error::{GeneoError, Result};
use crate::linalg::SparseSymMatrix;

/// Envelope (skyline) Cholesky, the reference sparse direct solver.
///
/// Row i stores entries from its first nonzero column up to the diagonal;
/// Cholesky creates no fill outside this envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    dim: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn new(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let mut first = vec![0usize; n];
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            let (cols, _) = a.row(i);
            first[i] = cols.first().copied().unwrap_or(i).min(i);
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut acc = values[start[i] + j - fi];
                let ri = &values[start[i] + lo - fi..start[i] + j - fi];
                let rj = &values[start[j] + lo - fj..start[j] + j - fj];
                acc -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j == i {
                    if !(acc > 0.0) {
                        return Err(GeneoError::IndefiniteMatrix { index: i, pivot: acc });
                    }
                    values[start[i] + i - fi] = acc.sqrt();
                } else {
                    values[start[i] + j - fi] = acc / values[start[j + 1] - 1];
                }
            }
        }
        Ok(Self {
            dim: n,
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let mut x = b.to_vec();
        for i in 0..self.dim {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let acc: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - acc) / row[i - fi];
        }
        for i in (0..self.dim).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            for (l, v) in row[..i - fi].iter().zip(&mut x[fi..i]) {
                *v -= l * xi;
            }
        }
        x
    }

    /// Stored envelope size.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, TripletBuilder};

    #[test]
    fn solves_banded_system() {
        let n = 30;
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 6.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.5);
            }
            if i + 5 < n {
                b.add_sym(i, i + 5, -1.0);
            }
        }
        let a = b.build();
        let f = SkylineCholesky::new(&a).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = f.solve(&rhs);
        let r = a.mul_vec(&x);
        for i in 0..n {
            assert!((r[i] - rhs[i]).abs() < 1e-12);
        }
        let xd = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SparseSymMatrix::from_dense(&DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(SkylineCholesky::new(&a).is_err());
    }
}
