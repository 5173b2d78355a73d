//! Dense and sparse symmetric kernels.
//!
//! Dense matrices are nalgebra's column-major `DMatrix<f64>`.

mod dense;
mod ichol;
mod skyline;
mod sparse;

pub use dense::{
    cholesky, complement_basis, gen_eig, lower_tri_inverse, orthonormalize_columns,
    split_threshold, symmetrize, EigenSelection, GenEigResult, PivotedFactor,
};
pub use ichol::IncompleteCholesky;
pub use skyline::SkylineCholesky;
pub use sparse::{axpy, dot, norm2, SparseSymMatrix, TripletBuilder};

pub type DenseMatrix = nalgebra::DMatrix<f64>;

/// A linear map on ℝⁿ given by its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// y = Op x
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Identity operator, handy as a trivial preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, self.nrows());
        yv.gemv(1.0, self, &xv, 0.0);
    }
}
