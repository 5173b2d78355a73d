//! Brute-force verification at desk scale: dense preconditioned operators,
//! their exact spectra, and checks of the theoretical bounds.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{GeneoError, Result};
use crate::geneo::FlatSpectrum;
use crate::linalg::{cholesky, dot, symmetrize, DenseMatrix, LinearOperator, PivotedFactor, SparseSymMatrix};
use crate::partition::{pou_defect, RestrictionMap};
use crate::schwarz::{CoarseSpace, LocalSolverSet, Mode, SchwarzPreconditioner, Variant};

pub const DEFAULT_CAP: usize = 3000;
/// Relative tolerance of every bound check.
pub const BOUND_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of λ_max count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// Materializes an operator by applying it to the identity columns.
pub fn dense_operator(op: &dyn LinearOperator, cap: usize) -> Result<DenseMatrix> {
    let n = op.dim();
    if n > cap {
        return Err(GeneoError::ProblemTooLarge { n, cap });
    }
    let mut m = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        m.column_mut(j).copy_from_slice(&y);
        e[j] = 0.0;
    }
    Ok(m)
}

struct FnOp<'a>(usize, &'a dyn Fn(&[f64]) -> Vec<f64>);

impl LinearOperator for FnOp<'_> {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&(self.1)(x));
    }
}

fn dense_of(n: usize, f: &dyn Fn(&[f64]) -> Vec<f64>, cap: usize) -> Result<DenseMatrix> {
    dense_operator(&FnOp(n, f), cap)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub zero_multiplicity: usize,
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
    pub effective_kappa: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
        let thr = ZERO_THRESHOLD * lambda_max.abs();
        let zero_multiplicity = eigenvalues.iter().filter(|v| v.abs() <= thr).count();
        let lambda_min_nonzero = eigenvalues
            .iter()
            .copied()
            .find(|v| v.abs() > thr)
            .unwrap_or(f64::NAN);
        Self {
            effective_kappa: lambda_max / lambda_min_nonzero,
            eigenvalues,
            zero_multiplicity,
            lambda_min_nonzero,
            lambda_max,
        }
    }
}

/// Spectrum of H K for spd H and symmetric K, computed as the spectrum of
/// the symmetric matrix Lᵀ K L with H = L Lᵀ, so it is real by construction.
pub fn product_spectrum(h: &DenseMatrix, k: &DenseMatrix) -> Result<SpectrumReport> {
    let mut hs = h.clone();
    symmetrize(&mut hs);
    let l = cholesky(&hs).ok_or(GeneoError::IndefiniteMatrix {
        index: 0,
        pivot: f64::NAN,
    })?;
    let mut c = l.transpose() * k * &l;
    symmetrize(&mut c);
    Ok(SpectrumReport::from_eigenvalues(
        SymmetricEigen::new(c).eigenvalues.iter().copied().collect(),
    ))
}

/// Exact spectrum of the preconditioned operator of `pre`:
/// HA (one level), HAΠ (projected), H_hyb A (hybrid), H_ad A (additive).
pub fn preconditioned_spectrum(pre: &SchwarzPreconditioner, cap: usize) -> Result<SpectrumReport> {
    let n = pre.n();
    let a = pre.a.to_dense();
    if n > cap {
        return Err(GeneoError::ProblemTooLarge { n, cap });
    }
    match pre.mode {
        Mode::OneLevel => {
            let h = dense_of(n, &|x| pre.apply_one_level(x), cap)?;
            product_spectrum(&h, &a)
        }
        Mode::Projected => {
            // HAΠ = H (ΠᵀAΠ) because AΠ = ΠᵀAΠ
            let h = dense_of(n, &|x| pre.apply_one_level(x), cap)?;
            let pi = dense_of(n, &|x| pre.apply_projector(x), cap)?;
            let mut k = pi.transpose() * &a * &pi;
            symmetrize(&mut k);
            product_spectrum(&h, &k)
        }
        Mode::Hybrid => {
            let h = dense_of(n, &|x| pre.apply_hybrid(x), cap)?;
            product_spectrum(&h, &a)
        }
        Mode::Additive => {
            let h = dense_of(n, &|x| pre.apply_additive(x), cap)?;
            product_spectrum(&h, &a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Upper,
    Equal,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: BoundKind,
    pub theoretical_bound: f64,
    pub observed: f64,
    pub satisfied: bool,
    /// Distance to the bound, positive on the safe side.
    pub slack: f64,
}

impl BoundCheck {
    /// Checks with tolerance `BOUND_TOL · |bound|`.
    pub fn new(name: impl Into<String>, kind: BoundKind, bound: f64, observed: f64) -> Self {
        Self::with_tol(name, kind, bound, observed, BOUND_TOL * bound.abs())
    }

    pub fn with_tol(name: impl Into<String>, kind: BoundKind, bound: f64, observed: f64, tol: f64) -> Self {
        let slack = match kind {
            BoundKind::Lower => observed - bound,
            BoundKind::Upper => bound - observed,
            BoundKind::Equal => -(observed - bound).abs(),
        };
        Self {
            name: name.into(),
            kind,
            theoretical_bound: bound,
            observed,
            satisfied: slack >= -tol && observed.is_finite(),
            slack,
        }
    }
}

/// Theoretical spectral interval of a preconditioned operator; `None` where
/// the theory gives no bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct TheoryBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl TheoryBounds {
    pub fn kappa(&self) -> Option<f64> {
        Some(self.upper? / self.lower?)
    }
}

/// Parameters entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub variant: Variant,
    pub coloring: usize,
    pub n_prime: f64,
    pub tau_sharp: Option<f64>,
    pub tau_flat: Option<f64>,
}

impl BoundParams {
    /// Lower bound of the nonzero spectrum of HAΠ.
    fn projected_lower(&self) -> Option<f64> {
        match (self.tau_flat, self.variant) {
            (Some(t), _) => Some(1.0 / (self.n_prime * t)),
            // the identity pencil leaves only the kernels, which the sharp
            // space already contains
            (None, Variant::NeumannNeumann) => Some(1.0),
            _ => None,
        }
    }

    /// Upper bound of the spectrum of HAΠ.
    fn projected_upper(&self) -> Option<f64> {
        let nc = self.coloring as f64;
        let sharp = self.tau_sharp.map(|t| nc / t);
        let exact = (self.variant == Variant::AdditiveSchwarz).then_some(nc);
        match (sharp, exact) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn theory(&self, mode: Mode) -> TheoryBounds {
        let nc = self.coloring as f64;
        match mode {
            Mode::OneLevel => TheoryBounds {
                lower: None,
                upper: (self.variant == Variant::AdditiveSchwarz).then_some(nc),
            },
            Mode::Projected => TheoryBounds {
                lower: self.projected_lower(),
                upper: self.projected_upper(),
            },
            Mode::Hybrid => TheoryBounds {
                lower: self.projected_lower().map(|l| l.min(1.0)),
                upper: self.projected_upper().map(|u| u.max(1.0)),
            },
            Mode::Additive => {
                // C♯ = 1 plays the role of τ♯ for exact local solvers
                let t_sharp = match self.variant {
                    Variant::AdditiveSchwarz => Some(1.0),
                    _ => self.tau_sharp,
                };
                let lower = match (t_sharp, self.tau_flat) {
                    (Some(ts), Some(tf)) => {
                        Some(1.0 / ((2.0f64).max(1.0 + 2.0 * nc / ts) * (1.0f64).max(self.n_prime * tf)))
                    }
                    _ => None,
                };
                TheoryBounds {
                    lower,
                    upper: (self.variant == Variant::AdditiveSchwarz).then_some(nc + 1.0),
                }
            }
        }
    }
}

/// Checks a spectrum against the bounds of `mode`. In projected mode the
/// zero eigenspace must have dimension exactly `n0`.
pub fn check_bounds(spectrum: &SpectrumReport, params: &BoundParams, mode: Mode, n0: usize) -> Vec<BoundCheck> {
    let th = params.theory(mode);
    let tag = match mode {
        Mode::OneLevel => "one_level",
        Mode::Projected => "projected",
        Mode::Hybrid => "hybrid",
        Mode::Additive => "additive",
    };
    let mut out = Vec::new();
    let lo_obs = if mode == Mode::Projected {
        spectrum.lambda_min_nonzero
    } else {
        spectrum.eigenvalues.first().copied().unwrap_or(f64::NAN)
    };
    if let Some(l) = th.lower {
        out.push(BoundCheck::new(format!("{tag}.lambda_min"), BoundKind::Lower, l, lo_obs));
    }
    if let Some(u) = th.upper {
        out.push(BoundCheck::new(format!("{tag}.lambda_max"), BoundKind::Upper, u, spectrum.lambda_max));
    }
    if mode == Mode::Projected {
        out.push(BoundCheck::with_tol(
            "projected.zero_multiplicity",
            BoundKind::Equal,
            n0 as f64,
            spectrum.zero_multiplicity as f64,
            0.0,
        ));
    }
    out
}

/// Check of the projected-operator bounds.
pub fn check_projected_bounds(spectrum: &SpectrumReport, params: &BoundParams, n0: usize) -> Vec<BoundCheck> {
    check_bounds(spectrum, params, Mode::Projected, n0)
}

pub fn check_hybrid_bounds(spectrum: &SpectrumReport, params: &BoundParams) -> Vec<BoundCheck> {
    check_bounds(spectrum, params, Mode::Hybrid, 0)
}

pub fn check_additive_bounds(spectrum: &SpectrumReport, params: &BoundParams) -> Vec<BoundCheck> {
    check_bounds(spectrum, params, Mode::Additive, 0)
}

/// Deterministic pseudo-random vectors for sampling (splitmix64).
pub fn sample_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// Everything the assumption audit looks at.
pub struct AuditInput<'a> {
    pub a: &'a SparseSymMatrix,
    pub restrictions: &'a [RestrictionMap],
    pub pou: &'a [Vec<f64>],
    pub a_neu: &'a [SparseSymMatrix],
    pub ms: &'a [SparseSymMatrix],
    pub locals: &'a LocalSolverSet,
    pub coarse: Option<&'a CoarseSpace>,
    pub mode: Mode,
    /// Dense checks are skipped above this size.
    pub cap: usize,
}

/// Numerical audit of the framework's structural assumptions.
pub fn audit_assumptions(input: &AuditInput) -> Vec<BoundCheck> {
    let n = input.a.dim();
    let mut out = Vec::new();

    let mut dup = 0usize;
    for r in input.restrictions {
        let mut idx = r.global_index.clone();
        idx.sort_unstable();
        dup += idx.windows(2).filter(|w| w[0] == w[1]).count();
    }
    out.push(BoundCheck::with_tol("restriction_rows_orthonormal", BoundKind::Equal, 0.0, dup as f64, 0.0));

    let mut mult = vec![0usize; n];
    for r in input.restrictions {
        for &g in &r.global_index {
            mult[g] += 1;
        }
    }
    let uncovered = mult.iter().filter(|&&m| m == 0).count();
    out.push(BoundCheck::with_tol("cover", BoundKind::Equal, 0.0, uncovered as f64, 0.0));

    out.push(BoundCheck::with_tol(
        "partition_of_unity",
        BoundKind::Upper,
        1e-14,
        pou_defect(input.restrictions, input.pou, n),
        0.0,
    ));

    let mut builder = crate::linalg::TripletBuilder::new(n);
    for (r, m) in input.restrictions.iter().zip(input.a_neu) {
        m.lift_into(&r.global_index, &mut builder);
    }
    let split = builder.build().frobenius_distance(input.a) / input.a.frobenius_norm();
    out.push(BoundCheck::with_tol("neumann_splitting", BoundKind::Upper, 1e-12, split, 0.0));

    // Σ ⟨D R x, M D R x⟩ = ⟨x, A x⟩, i.e. 𝒩′ = 1 with y^s = D^s R^s x
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let x = sample_vector(n, 11 + seed);
        let xax = input.a.energy(&x);
        let mut acc = 0.0;
        for ((r, d), m) in input.restrictions.iter().zip(input.pou).zip(input.ms) {
            let y: Vec<f64> = r.restrict(&x).iter().zip(d).map(|(v, w)| v * w).collect();
            acc += m.energy(&y);
        }
        worst = worst.max((acc - xax).abs() / xax);
    }
    out.push(BoundCheck::with_tol("stable_split_identity", BoundKind::Upper, 1e-12, worst, 0.0));

    let mut min_ratio = f64::INFINITY;
    let mut dense_ok = true;
    for s in 0..input.locals.n_subdomains() {
        if input.restrictions[s].len() > input.cap {
            dense_ok = false;
            break;
        }
        let ev = SymmetricEigen::new(input.locals.local_matrix(s)).eigenvalues;
        min_ratio = min_ratio.min(ev.min() / ev.max().abs().max(f64::MIN_POSITIVE));
    }
    if dense_ok {
        out.push(BoundCheck::with_tol("local_solvers_spsd", BoundKind::Lower, 0.0, min_ratio, 1e-12));
    }

    let n0 = input.coarse.map_or(0, |c| c.n0());
    out.push(BoundCheck::with_tol("coarse_dim_below_n", BoundKind::Upper, (n - 1) as f64, n0 as f64, 0.0));

    if n <= input.cap {
        let h = dense_of(n, &|x| {
            let mut y = vec![0.0; n];
            input.locals.apply_one_level(x, &mut y);
            y
        }, input.cap);
        if let Ok(mut h) = h {
            symmetrize(&mut h);
            let ev = SymmetricEigen::new(h).eigenvalues;
            out.push(BoundCheck::with_tol("one_level_spd", BoundKind::Lower, 0.0, ev.min() / ev.max(), 0.0));
        }
    }

    if matches!(input.mode, Mode::Projected | Mode::Hybrid) {
        let empty = CoarseSpace::empty(n);
        let pre = SchwarzPreconditioner {
            a: input.a,
            locals: input.locals,
            coarse: Some(input.coarse.unwrap_or(&empty)),
            mode: Mode::OneLevel,
        };
        let (_, defect) = pre.kernel_inclusion_defect();
        out.push(BoundCheck::with_tol(
            "kernel_inclusion",
            BoundKind::Upper,
            crate::schwarz::KERNEL_INCLUSION_TOL,
            defect,
            0.0,
        ));
    }
    out
}

/// Principal angles between the column spans of orthonormal U and V,
/// ascending. Small angles come from sines, large ones from cosines.
pub fn subspace_angles(u: &DenseMatrix, v: &DenseMatrix) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() {
        return Err(GeneoError::DimensionMismatch {
            expected: u.nrows(),
            got: v.nrows(),
        });
    }
    let (big, small) = if u.ncols() >= v.ncols() { (u, v) } else { (v, u) };
    let k = small.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut cos: Vec<f64> = (big.transpose() * small).singular_values().iter().map(|s| s.min(1.0)).collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let resid = small - big * (big.transpose() * small);
    let mut sin: Vec<f64> = resid.singular_values().iter().map(|s| s.min(1.0)).collect();
    sin.sort_by(f64::total_cmp);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..k)
        .map(|i| if sin[i] < half { sin[i].asin() } else { cos[i].max(0.0).acos() })
        .collect())
}

/// Ξ^s = I − Z̃(Z̃ᵀAZ̃)⁻¹Z̃ᵀA with Z̃ = R^sᵀZ^s: the A-orthogonal projection
/// whose kernel is the lifted local kernel.
pub struct XiProjection {
    z: DenseMatrix,
    az: DenseMatrix,
    factor: Option<PivotedFactor>,
}

impl XiProjection {
    pub fn new(a: &SparseSymMatrix, r: &RestrictionMap, kernel: &DenseMatrix) -> Result<Self> {
        let z = r.lift_dense(kernel, a.dim());
        if z.ncols() == 0 {
            return Ok(Self {
                az: z.clone(),
                z,
                factor: None,
            });
        }
        let az = a.mul_dense(&z);
        let mut g = z.transpose() * &az;
        symmetrize(&mut g);
        let factor = PivotedFactor::new(&g, 1e-14)?;
        Ok(Self {
            z,
            az,
            factor: Some(factor),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if let Some(f) = &self.factor {
            let xv = nalgebra::DVectorView::from_slice(x, x.len());
            let c: Vec<f64> = self.az.tr_mul(&xv).iter().copied().collect();
            let w = f.apply_pinv(&c).expect("kernel dimension");
            for (j, wj) in w.iter().enumerate() {
                for (yi, zi) in y.iter_mut().zip(self.z.column(j).iter()) {
                    *yi -= wj * zi;
                }
            }
        }
        y
    }
}

/// Largest sampled ratio ‖Ξ^s R^sᵀ x^s‖²_A / |x^s|²_{Ã^s} over
/// x^s = Ã^s† R^s Πᵀ x for random x.
pub fn empirical_omega(pre: &SchwarzPreconditioner, samples: usize) -> Result<f64> {
    let n = pre.n();
    let empty = CoarseSpace::empty(n);
    let coarse = pre.coarse.unwrap_or(&empty);
    let mut worst = 0.0f64;
    for s in 0..pre.locals.n_subdomains() {
        let r = &pre.locals.restrictions[s];
        let xi = XiProjection::new(pre.a, r, &pre.locals.kernel(s))?;
        let at = pre.locals.local_matrix(s);
        for k in 0..samples {
            let x = sample_vector(n, 1000 * s as u64 + k as u64);
            let xs = pre.locals.local_solve(s, &r.restrict(&coarse.apply_projector_transpose(&x)));
            let xsv = nalgebra::DVector::from_column_slice(&xs);
            let den = xsv.dot(&(&at * &xsv));
            if den <= 0.0 {
                continue;
            }
            let mut lifted = vec![0.0; n];
            r.lift_add(&xs, &mut lifted);
            let num = pre.a.energy(&xi.apply(&lifted));
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

/// Empirical C₀² of the splitting z^s = V_L V_Lᵀ M^s D^s R^s x used in the
/// λ_min theory, for x ∈ range(Π): the largest sampled
/// Σ |z^s|²_{Ã^s} / ‖x‖²_A, together with the worst relative defect of the
/// reconstruction x = Σ Π R^sᵀ z^s.
pub fn empirical_c0_squared(
    pre: &SchwarzPreconditioner,
    pou: &[Vec<f64>],
    ms: &[SparseSymMatrix],
    flat: &[FlatSpectrum],
    tau_flat: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    let n = pre.n();
    let empty = CoarseSpace::empty(n);
    let coarse = pre.coarse.unwrap_or(&empty);
    let mut worst = 0.0f64;
    let mut defect = 0.0f64;
    let locals: Vec<DenseMatrix> = (0..pre.locals.n_subdomains()).map(|s| pre.locals.local_matrix(s)).collect();
    for k in 0..samples {
        let x = coarse.apply_projector(&sample_vector(n, 77 + k as u64));
        let xax = pre.a.energy(&x);
        if xax <= 0.0 {
            continue;
        }
        let mut sum = 0.0;
        let mut recon = vec![0.0; n];
        for s in 0..pre.locals.n_subdomains() {
            let r = &pre.locals.restrictions[s];
            let y: Vec<f64> = r.restrict(&x).iter().zip(&pou[s]).map(|(v, d)| v * d).collect();
            let my = ms[s].mul_vec(&y);
            let f = &flat[s];
            let m_low = f.eigenvalues.iter().take_while(|&&l| l < tau_flat).count();
            let vl = f.vectors.columns(0, m_low);
            let c = vl.tr_mul(&nalgebra::DVector::from_column_slice(&my));
            let z = vl * c;
            sum += z.dot(&(&locals[s] * &z));
            let mut lifted = vec![0.0; n];
            r.lift_add(z.as_slice(), &mut lifted);
            crate::linalg::axpy(1.0, &coarse.apply_projector(&lifted), &mut recon);
        }
        worst = worst.max(sum / xax);
        let diff: Vec<f64> = recon.iter().zip(&x).map(|(p, q)| p - q).collect();
        defect = defect.max(dot(&diff, &diff).sqrt() / dot(&x, &x).sqrt());
    }
    Ok((worst, defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Identity, TripletBuilder};

    #[test]
    fn dense_identity_operator() {
        let m = dense_operator(&Identity(4), 10).unwrap();
        assert_eq!(m, DenseMatrix::identity(4, 4));
        assert!(matches!(dense_operator(&Identity(4), 3), Err(GeneoError::ProblemTooLarge { .. })));
    }

    #[test]
    fn spectrum_counts_zeros() {
        let s = SpectrumReport::from_eigenvalues(vec![2.0, 1e-12, 0.5, -1e-13]);
        assert_eq!(s.zero_multiplicity, 2);
        assert_eq!(s.lambda_min_nonzero, 0.5);
        assert_eq!(s.effective_kappa, 4.0);
    }

    #[test]
    fn product_spectrum_of_diagonals() {
        let h = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let k = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0]));
        let s = product_spectrum(&h, &k).unwrap();
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn bound_check_tolerance() {
        assert!(BoundCheck::new("x", BoundKind::Upper, 2.0, 2.0 + 1e-10).satisfied);
        assert!(!BoundCheck::new("x", BoundKind::Upper, 2.0, 2.0 + 1e-8).satisfied);
        assert!(BoundCheck::new("x", BoundKind::Lower, 0.1, 0.1 - 1e-11).satisfied);
        assert!(!BoundCheck::with_tol("x", BoundKind::Equal, 3.0, 4.0, 0.0).satisfied);
    }

    #[test]
    fn theory_for_additive_schwarz() {
        let p = BoundParams {
            variant: Variant::AdditiveSchwarz,
            coloring: 3,
            n_prime: 1.0,
            tau_sharp: None,
            tau_flat: Some(10.0),
        };
        assert_eq!(p.theory(Mode::Projected), TheoryBounds { lower: Some(0.1), upper: Some(3.0) });
        assert_eq!(p.theory(Mode::Hybrid).kappa(), Some(30.0));
        let ad = p.theory(Mode::Additive);
        assert_eq!(ad.upper, Some(4.0));
        assert!((ad.lower.unwrap() - 1.0 / 70.0).abs() < 1e-15);
        let nn = BoundParams {
            variant: Variant::NeumannNeumann,
            tau_sharp: Some(0.5),
            tau_flat: None,
            ..p
        };
        assert_eq!(nn.theory(Mode::Projected), TheoryBounds { lower: Some(1.0), upper: Some(6.0) });
    }

    #[test]
    fn angles_between_simple_subspaces() {
        let e1 = DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DenseMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let a = subspace_angles(&e1, &e2).unwrap();
        assert!((a[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let a = subspace_angles(&e1, &e1).unwrap();
        assert_eq!(a[0], 0.0);
        let t = 1e-9f64;
        let v = DenseMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        let a = subspace_angles(&e1, &v).unwrap();
        assert!((a[0] - t).abs() < 1e-20);
    }

    #[test]
    fn xi_without_kernel_is_identity() {
        let mut b = TripletBuilder::new(3);
        for i in 0..3 {
            b.add(i, i, 2.0);
        }
        let a = b.build();
        let r = RestrictionMap {
            global_index: vec![0, 1, 2],
        };
        let xi = XiProjection::new(&a, &r, &DenseMatrix::zeros(3, 0)).unwrap();
        assert_eq!(xi.apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let z = DenseMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let xi = XiProjection::new(&a, &r, &z).unwrap();
        assert!(xi.apply(&[0.0, 5.0, 0.0]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn samples_are_deterministic_and_bounded() {
        let a = sample_vector(100, 3);
        assert_eq!(a, sample_vector(100, 3));
        assert_ne!(a, sample_vector(100, 4));
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
    }
}
