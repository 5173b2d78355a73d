//! One-level abstract Schwarz preconditioners and their two-level
//! combinations with a coarse space.

use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::linalg::{
    DenseMatrix, IncompleteCholesky, LinearOperator, PivotedFactor, SparseSymMatrix,
};
use crate::partition::RestrictionMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ã^s = R^s A R^sᵀ
    #[serde(alias = "as")]
    AdditiveSchwarz,
    /// Ã^s = M^s = D⁻¹ A_Neu D⁻¹, applied through its pseudo-inverse
    #[serde(alias = "nn")]
    NeumannNeumann,
    /// Ã^s = L Lᵀ, the IC(0) factor of R^s A R^sᵀ
    #[serde(alias = "is")]
    InexactSchwarz,
}

impl Variant {
    pub fn short_name(self) -> &'static str {
        match self {
            Variant::AdditiveSchwarz => "as",
            Variant::NeumannNeumann => "nn",
            Variant::InexactSchwarz => "is",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneLevel,
    /// Deflation: PCG on range(Π) preconditioned by H.
    Projected,
    /// ΠHΠᵀ + R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰
    Hybrid,
    /// H + R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰
    Additive,
}

#[derive(Debug, Clone)]
enum LocalFactor {
    Dense(PivotedFactor),
    Incomplete(IncompleteCholesky),
}

/// Local operators Ã^s and their (pseudo-)inverses.
#[derive(Debug, Clone)]
pub struct LocalSolverSet {
    pub variant: Variant,
    pub restrictions: Vec<RestrictionMap>,
    /// R^s A R^sᵀ
    pub dirichlet: Vec<SparseSymMatrix>,
    /// Ã^s for AS and NN; empty for IS, whose operator is the factor product.
    operators: Vec<SparseSymMatrix>,
    factors: Vec<LocalFactor>,
}

impl LocalSolverSet {
    /// `ms` must be given for Neumann–Neumann.
    pub fn build(
        variant: Variant,
        a: &SparseSymMatrix,
        restrictions: &[RestrictionMap],
        ms: Option<&[SparseSymMatrix]>,
    ) -> Result<Self> {
        let dirichlet: Vec<SparseSymMatrix> =
            restrictions.iter().map(|r| a.submatrix(&r.global_index)).collect();
        let mut operators = Vec::new();
        let mut factors = Vec::with_capacity(restrictions.len());
        match variant {
            Variant::AdditiveSchwarz => {
                for (s, d) in dirichlet.iter().enumerate() {
                    let f = PivotedFactor::new(&d.to_dense(), PivotedFactor::DEFAULT_TOL)?;
                    if !f.is_full_rank() {
                        return Err(GeneoError::LocalSolverSingular { subdomain: s });
                    }
                    factors.push(LocalFactor::Dense(f));
                }
                operators = dirichlet.clone();
            }
            Variant::NeumannNeumann => {
                let ms = ms.ok_or_else(|| GeneoError::InvalidConfig {
                    field: "ms".into(),
                    message: "Neumann-Neumann needs the weighted Neumann matrices".into(),
                })?;
                if ms.len() != restrictions.len() {
                    return Err(GeneoError::DimensionMismatch {
                        expected: restrictions.len(),
                        got: ms.len(),
                    });
                }
                for m in ms {
                    factors.push(LocalFactor::Dense(PivotedFactor::new(
                        &m.to_dense(),
                        PivotedFactor::DEFAULT_TOL,
                    )?));
                }
                operators = ms.to_vec();
            }
            Variant::InexactSchwarz => {
                for d in &dirichlet {
                    factors.push(LocalFactor::Incomplete(IncompleteCholesky::new(d)?));
                }
            }
        }
        Ok(Self {
            variant,
            restrictions: restrictions.to_vec(),
            dirichlet,
            operators,
            factors,
        })
    }

    pub fn n_subdomains(&self) -> usize {
        self.restrictions.len()
    }

    /// Ã^s as a dense matrix.
    pub fn local_matrix(&self, s: usize) -> DenseMatrix {
        match &self.factors[s] {
            LocalFactor::Incomplete(f) => f.product_dense(),
            LocalFactor::Dense(_) => self.operators[s].to_dense(),
        }
    }

    /// Orthonormal basis of Ker(Ã^s) (zero columns when nonsingular).
    pub fn kernel(&self, s: usize) -> DenseMatrix {
        match &self.factors[s] {
            LocalFactor::Dense(f) => f.kernel_basis().clone(),
            LocalFactor::Incomplete(_) => DenseMatrix::zeros(self.restrictions[s].len(), 0),
        }
    }

    pub fn is_singular(&self, s: usize) -> bool {
        self.kernel(s).ncols() > 0
    }

    /// Ã^s† v
    pub fn local_solve(&self, s: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        match &self.factors[s] {
            LocalFactor::Dense(f) => f.apply_pinv_into(v, &mut out),
            LocalFactor::Incomplete(f) => f.solve_into(v, &mut out),
        }
        out
    }

    /// H x = Σ R^sᵀ Ã^s† R^s x
    pub fn apply_one_level(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (s, r) in self.restrictions.iter().enumerate() {
            let local = self.local_solve(s, &r.restrict(x));
            r.lift_add(&local, y);
        }
    }
}

/// Coarse basis R⁰ᵀ (orthonormal columns) with the factorized coarse
/// matrix R⁰AR⁰ᵀ.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    basis: DenseMatrix,
    a_basis: DenseMatrix,
    factor: Option<PivotedFactor>,
    /// Columns contributed by each subdomain before global orthonormalization.
    pub counts: Vec<usize>,
}

impl CoarseSpace {
    pub fn empty(n: usize) -> Self {
        Self {
            basis: DenseMatrix::zeros(n, 0),
            a_basis: DenseMatrix::zeros(n, 0),
            factor: None,
            counts: Vec::new(),
        }
    }

    /// `basis` must have orthonormal columns.
    pub fn from_orthonormal(a: &SparseSymMatrix, basis: DenseMatrix, counts: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let n0 = basis.ncols();
        if basis.nrows() != n {
            return Err(GeneoError::DimensionMismatch {
                expected: n,
                got: basis.nrows(),
            });
        }
        if n0 >= n && n > 0 {
            return Err(GeneoError::CoarseIsWholeSpace { n });
        }
        if n0 == 0 {
            return Ok(Self {
                counts,
                ..Self::empty(n)
            });
        }
        let a_basis = a.mul_dense(&basis);
        let mut e0 = basis.tr_mul(&a_basis);
        crate::linalg::symmetrize(&mut e0);
        let factor = PivotedFactor::new(&e0, 1e-14)?;
        if !factor.is_full_rank() {
            return Err(GeneoError::CoarseSingular {
                rank: factor.rank(),
                dim: n0,
            });
        }
        Ok(Self {
            basis,
            a_basis,
            factor: Some(factor),
            counts,
        })
    }

    pub fn n0(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    /// A R⁰ᵀ
    pub fn a_basis(&self) -> &DenseMatrix {
        &self.a_basis
    }

    fn solve_small(&self, r0: &[f64]) -> Vec<f64> {
        match &self.factor {
            Some(f) => f.apply_pinv(r0).expect("coarse dimension"),
            None => Vec::new(),
        }
    }

    fn basis_t(&self, m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        m.tr_mul(&xv).iter().copied().collect()
    }

    fn combine(&self, m: &DenseMatrix, c: &[f64], y: &mut [f64]) {
        if c.is_empty() {
            return;
        }
        let cv = nalgebra::DVectorView::from_slice(c, c.len());
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, m.nrows());
        yv.gemv(1.0, m, &cv, 1.0);
    }

    /// R⁰ᵀ (R⁰AR⁰ᵀ)⁻¹ R⁰ x
    pub fn coarse_component(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        if self.n0() > 0 {
            let c = self.solve_small(&self.basis_t(&self.basis, x));
            self.combine(&self.basis, &c, &mut y);
        }
        y
    }

    /// Π x = x − R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰A x
    pub fn apply_projector(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if self.n0() > 0 {
            // R⁰ A x = (A R⁰ᵀ)ᵀ x
            let c = self.solve_small(&self.basis_t(&self.a_basis, x));
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            self.combine(&self.basis, &neg, &mut y);
        }
        y
    }

    /// Πᵀ x = x − A R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰ x
    pub fn apply_projector_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if self.n0() > 0 {
            let c = self.solve_small(&self.basis_t(&self.basis, x));
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            self.combine(&self.a_basis, &neg, &mut y);
        }
        y
    }

    /// ‖(I − Π) x‖₂
    pub fn coarse_part_norm(&self, x: &[f64]) -> f64 {
        let px = self.apply_projector(x);
        x.iter().zip(&px).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Matrix-free preconditioner in one of the four modes.
///
/// As a `LinearOperator`, projected mode applies the one-level H; the
/// projection is carried out by the deflated solver.
pub struct SchwarzPreconditioner<'a> {
    pub a: &'a SparseSymMatrix,
    pub locals: &'a LocalSolverSet,
    pub coarse: Option<&'a CoarseSpace>,
    pub mode: Mode,
}

/// Tolerance of the build-time check Σ R^sᵀ Ker(Ã^s) ⊆ V⁰.
pub const KERNEL_INCLUSION_TOL: f64 = 1e-8;

impl<'a> SchwarzPreconditioner<'a> {
    pub fn new(
        a: &'a SparseSymMatrix,
        locals: &'a LocalSolverSet,
        coarse: Option<&'a CoarseSpace>,
        mode: Mode,
    ) -> Result<Self> {
        if mode != Mode::OneLevel && coarse.is_none() {
            return Err(GeneoError::InvalidConfig {
                field: "mode".into(),
                message: format!("{mode:?} needs a coarse space"),
            });
        }
        if mode == Mode::Additive && locals.variant == Variant::NeumannNeumann {
            return Err(GeneoError::UnsupportedVariant(
                "additive two-level Neumann-Neumann".into(),
            ));
        }
        let pre = Self {
            a,
            locals,
            coarse,
            mode,
        };
        if matches!(mode, Mode::Projected | Mode::Hybrid) {
            let (s, defect) = pre.kernel_inclusion_defect();
            if defect > KERNEL_INCLUSION_TOL {
                return Err(GeneoError::KernelNotInCoarseSpace { subdomain: s, defect });
            }
        }
        Ok(pre)
    }

    /// max over s and kernel columns z of ‖Π R^sᵀ z‖_A / ‖R^sᵀ z‖_A, with the
    /// subdomain attaining it.
    pub fn kernel_inclusion_defect(&self) -> (usize, f64) {
        let n = self.a.dim();
        let empty = CoarseSpace::empty(n);
        let coarse = self.coarse.unwrap_or(&empty);
        let mut worst = (0, 0.0f64);
        for s in 0..self.locals.n_subdomains() {
            let z = self.locals.kernel(s);
            let r = &self.locals.restrictions[s];
            for c in 0..z.ncols() {
                let mut zg = vec![0.0; n];
                r.lift_add(z.column(c).as_slice(), &mut zg);
                let pz = coarse.apply_projector(&zg);
                let ratio = (self.a.energy(&pz) / self.a.energy(&zg)).max(0.0).sqrt();
                if ratio > worst.1 {
                    worst = (s, ratio);
                }
            }
        }
        worst
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn apply_one_level(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.locals.apply_one_level(x, &mut y);
        y
    }

    fn coarse(&self) -> &CoarseSpace {
        self.coarse.expect("coarse space checked at construction")
    }

    pub fn apply_projector(&self, x: &[f64]) -> Vec<f64> {
        self.coarse().apply_projector(x)
    }

    pub fn apply_projector_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.coarse().apply_projector_transpose(x)
    }

    pub fn coarse_component(&self, b: &[f64]) -> Vec<f64> {
        self.coarse().coarse_component(b)
    }

    /// ΠHΠᵀx + R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰x
    pub fn apply_hybrid(&self, x: &[f64]) -> Vec<f64> {
        let c = self.coarse();
        let mut y = c.apply_projector(&self.apply_one_level(&c.apply_projector_transpose(x)));
        crate::linalg::axpy(1.0, &c.coarse_component(x), &mut y);
        y
    }

    /// Hx + R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰x
    pub fn apply_additive(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.apply_one_level(x);
        crate::linalg::axpy(1.0, &self.coarse().coarse_component(x), &mut y);
        y
    }
}

impl LinearOperator for SchwarzPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.mode {
            Mode::OneLevel | Mode::Projected => self.locals.apply_one_level(x, y),
            Mode::Hybrid => y.copy_from_slice(&self.apply_hybrid(x)),
            Mode::Additive => y.copy_from_slice(&self.apply_additive(x)),
        }
    }
}

/// Result of the greedy subdomain coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    pub n_colors: usize,
    pub colors: Vec<usize>,
    /// Sorted neighbor lists of the interaction graph.
    pub neighbors: Vec<Vec<usize>>,
}

/// Greedy largest-degree-first coloring of the graph with an edge s–t
/// whenever R^s A R^tᵀ ≠ 0.
pub fn coloring_constant(a: &SparseSymMatrix, restrictions: &[RestrictionMap]) -> Coloring {
    let n = a.dim();
    let ns = restrictions.len();
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, r) in restrictions.iter().enumerate() {
        for &g in &r.global_index {
            owners[g].push(s);
        }
    }
    let mut adj = vec![vec![false; ns]; ns];
    for (s, r) in restrictions.iter().enumerate() {
        for &g in &r.global_index {
            let (cols, vals) = a.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    for &t in &owners[j] {
                        if t != s {
                            adj[s][t] = true;
                            adj[t][s] = true;
                        }
                    }
                }
            }
        }
    }
    let neighbors: Vec<Vec<usize>> = (0..ns).map(|s| (0..ns).filter(|&t| adj[s][t]).collect()).collect();
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&x, &y| neighbors[y].len().cmp(&neighbors[x].len()).then(x.cmp(&y)));
    let mut colors = vec![usize::MAX; ns];
    for &s in &order {
        let used: Vec<usize> = neighbors[s].iter().map(|&t| colors[t]).collect();
        colors[s] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    let n_colors = colors.iter().map(|c| c + 1).max().unwrap_or(0);
    Coloring {
        n_colors,
        colors,
        neighbors,
    }
}

/// max |entry| of R^s A R^tᵀ.
pub fn coupling_max(a: &SparseSymMatrix, rs: &RestrictionMap, rt: &RestrictionMap) -> f64 {
    a.block_dense(&rs.global_index, &rt.global_index).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    fn laplace_1d(n: usize) -> SparseSymMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let a = laplace_1d(6);
        let r = vec![RestrictionMap {
            global_index: (0..6).collect(),
        }];
        let set = LocalSolverSet::build(Variant::AdditiveSchwarz, &a, &r, None).unwrap();
        let pre = SchwarzPreconditioner::new(&a, &set, None, Mode::OneLevel).unwrap();
        let x = [1.0, 0.0, -1.0, 2.0, 0.5, 0.0];
        let hx = pre.apply_one_level(&a.mul_vec(&x));
        for i in 0..6 {
            assert!((hx[i] - x[i]).abs() < 1e-12);
        }
        let c = coloring_constant(&a, &r);
        assert_eq!(c.n_colors, 1);
    }

    #[test]
    fn block_diagonal_solve() {
        let mut b = TripletBuilder::new(4);
        b.add(0, 0, 2.0);
        b.add(1, 1, 2.0);
        b.add_sym(0, 1, 1.0);
        b.add(2, 2, 4.0);
        b.add(3, 3, 1.0);
        let a = b.build();
        let r = vec![
            RestrictionMap { global_index: vec![0, 1] },
            RestrictionMap { global_index: vec![2, 3] },
        ];
        let set = LocalSolverSet::build(Variant::AdditiveSchwarz, &a, &r, None).unwrap();
        let y = a.mul_vec(&[1.0, 2.0, 3.0, 4.0]);
        let mut hx = vec![0.0; 4];
        set.apply_one_level(&y, &mut hx);
        for (i, v) in hx.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-14);
        }
        // non-interacting blocks share a color
        assert_eq!(coloring_constant(&a, &r).n_colors, 1);
    }

    #[test]
    fn projector_identities() {
        let a = laplace_1d(8);
        let raw = DenseMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let basis = crate::linalg::orthonormalize_columns(&raw, 1e-10);
        let c = CoarseSpace::from_orthonormal(&a, basis.clone(), vec![]).unwrap();
        let x: Vec<f64> = (0..8).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let y: Vec<f64> = (0..8).map(|i| ((i * 3) % 4) as f64).collect();
        let px = c.apply_projector(&x);
        let ppx = c.apply_projector(&px);
        for i in 0..8 {
            assert!((px[i] - ppx[i]).abs() < 1e-10);
        }
        // ⟨Πx, A(I−Π)y⟩ = 0
        let py = c.apply_projector(&y);
        let qy: Vec<f64> = y.iter().zip(&py).map(|(a, b)| a - b).collect();
        assert!(crate::linalg::dot(&px, &a.mul_vec(&qy)).abs() < 1e-10);
        // AΠ = ΠᵀA
        let lhs = a.mul_vec(&px);
        let rhs = c.apply_projector_transpose(&a.mul_vec(&x));
        for i in 0..8 {
            assert!((lhs[i] - rhs[i]).abs() < 1e-10);
        }
        // Π annihilates V⁰ and the coarse component recovers x* ∈ V⁰
        let v0: Vec<f64> = basis.column(1).iter().copied().collect();
        assert!(crate::linalg::norm2(&c.apply_projector(&v0)) < 1e-12);
        let rec = c.coarse_component(&a.mul_vec(&v0));
        for i in 0..8 {
            assert!((rec[i] - v0[i]).abs() < 1e-10);
        }
        assert!(c.coarse_component(&[0.0; 8]).iter().all(|&v| v == 0.0));
        let e = CoarseSpace::empty(8);
        assert_eq!(e.apply_projector(&x), x);
    }

    #[test]
    fn coarse_space_rejects_whole_space() {
        let a = laplace_1d(3);
        assert!(matches!(
            CoarseSpace::from_orthonormal(&a, DenseMatrix::identity(3, 3), vec![]),
            Err(GeneoError::CoarseIsWholeSpace { n: 3 })
        ));
    }

    #[test]
    fn additive_nn_is_unsupported() {
        let a = laplace_1d(4);
        let r = vec![RestrictionMap {
            global_index: (0..4).collect(),
        }];
        let ms = vec![a.clone()];
        let set = LocalSolverSet::build(Variant::NeumannNeumann, &a, &r, Some(&ms)).unwrap();
        let c = CoarseSpace::empty(4);
        assert!(matches!(
            SchwarzPreconditioner::new(&a, &set, Some(&c), Mode::Additive),
            Err(GeneoError::UnsupportedVariant(_))
        ));
        assert!(SchwarzPreconditioner::new(&a, &set, None, Mode::Hybrid).is_err());
    }

    #[test]
    fn chain_of_subdomains_needs_two_colors() {
        let a = laplace_1d(9);
        let r: Vec<RestrictionMap> = (0..4)
            .map(|s| RestrictionMap {
                global_index: (2 * s..2 * s + 3).collect(),
            })
            .collect();
        let c = coloring_constant(&a, &r);
        assert_eq!(c.n_colors, 2);
        for s in 0..4 {
            for t in 0..4 {
                if s != t && c.colors[s] == c.colors[t] {
                    assert_eq!(coupling_max(&a, &r[s], &r[t]), 0.0);
                }
            }
        }
    }
}
