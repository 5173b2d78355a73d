use nalgebra::{DVector, SymmetricEigen};

use crate::error::{GeneoError, Result};
use crate::linalg::DenseMatrix;

const BLOCK: usize = 64;

/// Dense Cholesky `M = L Lᵀ` of an spd matrix, recursive blocked so that the
/// bulk of the work runs through matrix products. Returns `None` on a
/// nonpositive pivot.
pub fn cholesky(m: &DenseMatrix) -> Option<DenseMatrix> {
    assert_eq!(m.nrows(), m.ncols());
    let mut l = m.clone();
    if !chol_in_place(&mut l) {
        return None;
    }
    l.fill_upper_triangle(0.0, 1);
    Some(l)
}

fn chol_in_place(a: &mut DenseMatrix) -> bool {
    let n = a.nrows();
    if n <= BLOCK {
        for k in 0..n {
            let d = a[(k, k)];
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let s = d.sqrt();
            a[(k, k)] = s;
            for i in k + 1..n {
                a[(i, k)] /= s;
            }
            for j in k + 1..n {
                let ljk = a[(j, k)];
                if ljk != 0.0 {
                    for i in j..n {
                        a[(i, j)] -= a[(i, k)] * ljk;
                    }
                }
            }
        }
        return true;
    }
    let h = n / 2;
    let mut a11 = a.view((0, 0), (h, h)).clone_owned();
    if !chol_in_place(&mut a11) {
        return false;
    }
    a11.fill_upper_triangle(0.0, 1);
    let inv11 = lower_tri_inverse(&a11);
    // L21 = A21 L11⁻ᵀ
    let l21 = a.view((h, 0), (n - h, h)) * inv11.transpose();
    let mut a22 = a.view((h, h), (n - h, n - h)).clone_owned();
    a22.gemm(-1.0, &l21, &l21.transpose(), 1.0);
    if !chol_in_place(&mut a22) {
        return false;
    }
    a.view_mut((0, 0), (h, h)).copy_from(&a11);
    a.view_mut((h, 0), (n - h, h)).copy_from(&l21);
    a.view_mut((h, h), (n - h, n - h)).copy_from(&a22);
    true
}

/// Inverse of a nonsingular lower-triangular matrix.
pub fn lower_tri_inverse(l: &DenseMatrix) -> DenseMatrix {
    let n = l.nrows();
    if n <= BLOCK {
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = 1.0 / l[(j, j)];
            for i in j + 1..n {
                let mut acc = 0.0;
                for k in j..i {
                    acc += l[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -acc / l[(i, i)];
            }
        }
        return inv;
    }
    let h = n / 2;
    let i11 = lower_tri_inverse(&l.view((0, 0), (h, h)).clone_owned());
    let i22 = lower_tri_inverse(&l.view((h, h), (n - h, n - h)).clone_owned());
    let i21 = -(&i22 * l.view((h, 0), (n - h, h)) * &i11);
    let mut inv = DenseMatrix::zeros(n, n);
    inv.view_mut((0, 0), (h, h)).copy_from(&i11);
    inv.view_mut((h, h), (n - h, n - h)).copy_from(&i22);
    inv.view_mut((h, 0), (n - h, h)).copy_from(&i21);
    inv
}

/// Solves L y = b in place for lower-triangular L (first `r` rows/cols used).
fn forward_subst(l: &DenseMatrix, r: usize, y: &mut [f64]) {
    for j in 0..r {
        let yj = y[j] / l[(j, j)];
        y[j] = yj;
        if yj != 0.0 {
            let col = l.column(j);
            for i in j + 1..r {
                y[i] -= col[i] * yj;
            }
        }
    }
}

/// Solves Lᵀ x = y in place.
fn backward_subst(l: &DenseMatrix, r: usize, y: &mut [f64]) {
    for j in (0..r).rev() {
        let col = l.column(j);
        let mut acc = y[j];
        for i in j + 1..r {
            acc -= col[i] * y[i];
        }
        y[j] = acc / l[(j, j)];
    }
}

/// Diagonally pivoted Cholesky of a symmetric positive semi-definite matrix
/// with an explicit orthonormal kernel basis.
///
/// A remaining pivot is declared zero when it falls below `tol` times the
/// original diagonal entry of the same row. This relative test is invariant
/// under diagonal scaling `M ↦ D M D`.
#[derive(Debug, Clone)]
pub struct PivotedFactor {
    dim: usize,
    perm: Vec<usize>,
    /// Leading `rank` columns hold the factor of the permuted matrix.
    lower: DenseMatrix,
    rank: usize,
    kernel: DenseMatrix,
    tol: f64,
}

impl PivotedFactor {
    pub const DEFAULT_TOL: f64 = 1e-10;

    pub fn new(m: &DenseMatrix, tol: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(GeneoError::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        let scale_m = m.amax();
        let mut defect = 0.0f64;
        for j in 0..n {
            for i in j + 1..n {
                defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if defect > 1e-12 * scale_m {
            return Err(GeneoError::NotSymmetric { defect });
        }

        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut scale: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        let max_diag = scale.iter().cloned().fold(0.0, f64::max);
        let mut rank = 0;
        for k in 0..n {
            // relative pivot choice
            let mut best = k;
            let mut best_rel = f64::NEG_INFINITY;
            for j in k..n {
                let rel = if scale[j] > 0.0 { a[(j, j)] / scale[j] } else { 0.0 };
                if rel > best_rel {
                    best_rel = rel;
                    best = j;
                }
            }
            if best_rel <= tol {
                break;
            }
            if best != k {
                sym_swap_lower(&mut a, k, best);
                perm.swap(k, best);
                scale.swap(k, best);
            }
            let s = a[(k, k)].sqrt();
            a[(k, k)] = s;
            for i in k + 1..n {
                a[(i, k)] /= s;
            }
            for j in k + 1..n {
                let ljk = a[(j, k)];
                if ljk != 0.0 {
                    for i in j..n {
                        a[(i, j)] -= a[(i, k)] * ljk;
                    }
                }
            }
            rank = k + 1;
        }
        for j in rank..n {
            let d = a[(j, j)];
            let bound = if scale[j] > 0.0 { tol * scale[j] } else { tol * max_diag };
            if d < -bound {
                return Err(GeneoError::IndefiniteMatrix {
                    index: perm[j],
                    pivot: d,
                });
            }
        }

        let kernel = if rank < n {
            kernel_from_factor(&a, rank, &perm)
        } else {
            DenseMatrix::zeros(n, 0)
        };
        // only the leading block is meaningful
        let mut lower = a;
        lower.fill_upper_triangle(0.0, 1);
        Ok(Self {
            dim: n,
            perm,
            lower,
            rank,
            kernel,
            tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn drop_tolerance(&self) -> f64 {
        self.tol
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Orthonormal basis Z of the numerical kernel (dim × (dim − rank)).
    pub fn kernel_basis(&self) -> &DenseMatrix {
        &self.kernel
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim
    }

    /// M† v
    pub fn apply_pinv(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(GeneoError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.apply_pinv_into(v, &mut out);
        Ok(out)
    }

    /// M† v written into `out`. Panics on length mismatch.
    pub fn apply_pinv_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        let k = self.kernel.ncols();
        let mut w = v.to_vec();
        if k > 0 {
            project_out(&self.kernel, &mut w);
        }
        let mut y: Vec<f64> = self.perm[..self.rank].iter().map(|&p| w[p]).collect();
        forward_subst(&self.lower, self.rank, &mut y);
        backward_subst(&self.lower, self.rank, &mut y);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &p) in self.perm[..self.rank].iter().enumerate() {
            out[p] = y[i];
        }
        if k > 0 {
            project_out(&self.kernel, out);
        }
    }

    /// M† X column by column.
    pub fn apply_pinv_mat(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.nrows(), self.dim);
        let mut out = DenseMatrix::zeros(self.dim, x.ncols());
        let mut buf = vec![0.0; self.dim];
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            self.apply_pinv_into(&col, &mut buf);
            out.column_mut(c).copy_from_slice(&buf);
        }
        out
    }

    /// Orthonormal basis W of range(M) = Ker(M)^⊥, built from Householder
    /// reflectors of the kernel basis.
    pub fn range_basis(&self) -> DenseMatrix {
        complement_basis(&self.kernel)
    }
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `z`.
pub fn complement_basis(z: &DenseMatrix) -> DenseMatrix {
    let n = z.nrows();
    let k = z.ncols();
    if k == 0 {
        return DenseMatrix::identity(n, n);
    }
    let mut a = z.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let x = a.view((j, j), (n - j, 1)).clone_owned();
        let nx = x.norm();
        let mut v = DVector::from_iterator(n - j, x.iter().copied());
        let alpha = if v[0] >= 0.0 { -nx } else { nx };
        v[0] -= alpha;
        let nv = v.norm();
        if nv > 0.0 {
            v /= nv;
        }
        // apply H = I − 2vvᵀ to trailing block
        let mut block = a.view_mut((j, j), (n - j, k - j));
        let vt_b = v.transpose() * &block;
        block.ger(-2.0, &v, &vt_b.transpose(), 1.0);
        reflectors.push(v);
    }
    let mut q = DenseMatrix::identity(n, n);
    for j in (0..k).rev() {
        let v = &reflectors[j];
        let mut rows = q.view_mut((j, 0), (n - j, n));
        let vt_q = v.transpose() * &rows;
        rows.ger(-2.0, v, &vt_q.transpose(), 1.0);
    }
    q.columns(k, n - k).clone_owned()
}

fn project_out(z: &DenseMatrix, w: &mut [f64]) {
    for c in 0..z.ncols() {
        let col = z.column(c);
        let d: f64 = col.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        for (wi, zi) in w.iter_mut().zip(col.iter()) {
            *wi -= d * zi;
        }
    }
}

/// Swap indices k < p of a symmetric matrix stored in its lower triangle,
/// where columns < k already hold factor entries.
fn sym_swap_lower(a: &mut DenseMatrix, k: usize, p: usize) {
    let n = a.nrows();
    debug_assert!(k < p);
    for j in 0..k {
        a.swap((k, j), (p, j));
    }
    a.swap((k, k), (p, p));
    for i in k + 1..p {
        a.swap((i, k), (p, i));
    }
    for i in p + 1..n {
        a.swap((i, k), (i, p));
    }
}

fn kernel_from_factor(a: &DenseMatrix, rank: usize, perm: &[usize]) -> DenseMatrix {
    let n = a.nrows();
    let k = n - rank;
    // permuted kernel [−L11⁻ᵀ L21ᵀ; I]
    let mut kp = DenseMatrix::zeros(n, k);
    for c in 0..k {
        let mut y: Vec<f64> = (0..rank).map(|i| a[(rank + c, i)]).collect();
        backward_subst(a, rank, &mut y);
        for i in 0..rank {
            kp[(i, c)] = -y[i];
        }
        kp[(rank + c, c)] = 1.0;
    }
    let mut z = DenseMatrix::zeros(n, k);
    for (i, &p) in perm.iter().enumerate() {
        z.row_mut(p).copy_from(&kp.row(i));
    }
    let q = nalgebra::QR::new(z).q();
    q.columns(0, k).clone_owned()
}

/// Result of a generalized symmetric-definite eigensolve `M_A y = λ M_B y`.
#[derive(Debug, Clone)]
pub struct GenEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// M_B-orthonormal; column j pairs with `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
}

/// Textbook reduction: `M_B = L Lᵀ`, eigendecomposition of `L⁻¹ M_A L⁻ᵀ`,
/// back-transformation `Y = L⁻ᵀ Q`.
pub fn gen_eig(m_a: &DenseMatrix, m_b: &DenseMatrix) -> Result<GenEigResult> {
    let n = m_b.nrows();
    if m_a.nrows() != n || m_a.ncols() != n || m_b.ncols() != n {
        return Err(GeneoError::DimensionMismatch {
            expected: n,
            got: m_a.nrows(),
        });
    }
    if n == 0 {
        return Ok(GenEigResult {
            eigenvalues: vec![],
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    let l = cholesky(m_b).ok_or(GeneoError::PencilNotDefinite)?;
    let linv = lower_tri_inverse(&l);
    let mut c = &linv * m_a * linv.transpose();
    symmetrize(&mut c);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let q = eig.eigenvectors.select_columns(&order);
    let eigenvectors = linv.transpose() * q;
    Ok(GenEigResult {
        eigenvalues,
        eigenvectors,
    })
}

pub fn symmetrize(c: &mut DenseMatrix) {
    let n = c.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

/// Split of a generalized eigenbasis at a threshold τ.
#[derive(Debug, Clone)]
pub struct EigenSelection {
    pub tau: f64,
    /// Number of eigenvalues strictly below τ.
    pub m_low: usize,
    pub low: DenseMatrix,
    pub high: DenseMatrix,
    pub low_values: Vec<f64>,
    pub high_values: Vec<f64>,
}

/// Eigenvectors with λ < τ go to `low`, λ ≥ τ to `high`.
pub fn split_threshold(r: &GenEigResult, tau: f64) -> EigenSelection {
    assert!(tau > 0.0, "threshold must be positive");
    let m = r.eigenvalues.len();
    let m_low = r.eigenvalues.iter().take_while(|&&l| l < tau).count();
    EigenSelection {
        tau,
        m_low,
        low: r.eigenvectors.columns(0, m_low).clone_owned(),
        high: r.eigenvectors.columns(m_low, m - m_low).clone_owned(),
        low_values: r.eigenvalues[..m_low].to_vec(),
        high_values: r.eigenvalues[m_low..].to_vec(),
    }
}

/// Rank-revealing orthonormalization by classical Gram–Schmidt with
/// reorthogonalization. Each column is normalized before projection and is
/// dropped when less than `tol` of it survives.
pub fn orthonormalize_columns(v: &DenseMatrix, tol: f64) -> DenseMatrix {
    let n = v.nrows();
    let mut q = DenseMatrix::zeros(n, v.ncols().min(n));
    let mut k = 0;
    for c in 0..v.ncols() {
        if k == n {
            break;
        }
        let mut x = v.column(c).clone_owned();
        let nx = x.norm();
        if nx == 0.0 || !nx.is_finite() {
            continue;
        }
        x /= nx;
        for _ in 0..2 {
            if k > 0 {
                let basis = q.columns(0, k);
                let coef = basis.tr_mul(&x);
                x.gemv(-1.0, &basis, &coef, 1.0);
            }
        }
        let r = x.norm();
        if r > tol {
            x /= r;
            q.set_column(k, &x);
            k += 1;
        }
    }
    q.columns(0, k).clone_owned()
}
