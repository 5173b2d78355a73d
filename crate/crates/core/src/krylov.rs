//! Preconditioned CG and projected (deflated) PCG.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix, LinearOperator, SparseSymMatrix};
use crate::schwarz::CoarseSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// ‖x_i − x*‖_A ≤ tol ‖x*‖_A against a reference solution.
    #[default]
    ErrorANorm,
    /// √⟨r_i, z_i⟩ ≤ tol √⟨r_0, z_0⟩
    PreconditionedResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovConfig {
    pub max_iterations: usize,
    pub rel_error_tol: f64,
    pub stopping: StoppingRule,
    pub full_reorthogonalization: bool,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_error_tol: 1e-9,
            stopping: StoppingRule::ErrorANorm,
            full_reorthogonalization: false,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_error_tol > 0.0) {
            return Err(GeneoError::InvalidConfig {
                field: "krylov.rel_error_tol".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative A-norm errors, entry 0 for the zero initial guess. Empty
    /// without a reference solution.
    pub a_norm_errors: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// CG step lengths α_j.
    pub lanczos_alpha: Vec<f64>,
    /// CG direction coefficients β_j = ρ_{j+1}/ρ_j.
    pub lanczos_beta: Vec<f64>,
    pub ritz_min: f64,
    pub ritz_max: f64,
    pub kappa_estimate: f64,
    pub final_error: Option<f64>,
    pub stopping: StoppingRule,
    /// Largest ‖(I − Π) y_i‖ / ‖y_i‖ over the deflated iterates.
    pub range_leak: Option<f64>,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

/// Eigenvalues of the Lanczos tridiagonal assembled from CG coefficients.
pub fn lanczos_ritz_values(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let k = alpha.len();
    if k == 0 {
        return Vec::new();
    }
    let mut t = DenseMatrix::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alpha[j] + if j > 0 { beta[j - 1] / alpha[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = beta[j].sqrt() / alpha[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// (λ_min, λ_max, κ) from the extreme Ritz values.
pub fn ritz_bounds(report: &SolveReport) -> (f64, f64, f64) {
    let ev = lanczos_ritz_values(&report.lanczos_alpha, &report.lanczos_beta);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi, hi / lo),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    }
}

struct Reorth {
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl Reorth {
    fn push(&mut self, r: &[f64], z: &[f64], rho: f64) {
        let s = rho.sqrt();
        self.v.push(r.iter().map(|x| x / s).collect());
        self.w.push(z.iter().map(|x| x / s).collect());
    }

    /// Orthogonalizes r against previous residuals in the ⟨·, H·⟩ product,
    /// updating z = H r consistently. Two passes.
    fn apply(&self, r: &mut [f64], z: &mut [f64]) {
        for _ in 0..2 {
            for (v, w) in self.v.iter().zip(&self.w) {
                let c = dot(r, w);
                axpy(-c, v, r);
                axpy(-c, w, z);
            }
        }
    }
}

fn a_norm_error(a: &SparseSymMatrix, x: &[f64], x_ref: &[f64], scale: f64) -> f64 {
    let e: Vec<f64> = x.iter().zip(x_ref).map(|(p, q)| p - q).collect();
    a.energy(&e).max(0.0).sqrt() / scale
}

/// Shared CG loop. `precond` maps a residual to a search-direction update
/// (H r for PCG, Π H r for deflated CG). `offset` is added to the iterate
/// when measuring the error against `x_ref`.
fn cg_core(
    a: &SparseSymMatrix,
    rhs: &[f64],
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    cfg: &KrylovConfig,
    x_ref: Option<&[f64]>,
    offset: &[f64],
    mut on_iterate: impl FnMut(&[f64]),
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = a.dim();
    if rhs.len() != n {
        return Err(GeneoError::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let use_error = cfg.stopping == StoppingRule::ErrorANorm && x_ref.is_some();
    let ref_scale = x_ref.map(|xr| a.energy(xr).max(0.0).sqrt());
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = precond(&r);
    let mut rho = dot(&r, &z);
    let rho0 = rho;
    let mut reorth = cfg.full_reorthogonalization.then(|| Reorth {
        v: Vec::new(),
        w: Vec::new(),
    });
    let mut report = SolveReport {
        iterations: 0,
        converged: false,
        a_norm_errors: Vec::new(),
        residual_norms: vec![norm2(&r)],
        lanczos_alpha: Vec::new(),
        lanczos_beta: Vec::new(),
        ritz_min: f64::NAN,
        ritz_max: f64::NAN,
        kappa_estimate: f64::NAN,
        final_error: None,
        stopping: if use_error {
            StoppingRule::ErrorANorm
        } else {
            StoppingRule::PreconditionedResidual
        },
        range_leak: None,
        solution: Vec::new(),
    };
    let measure = |x: &[f64]| -> Option<f64> {
        let (xr, sc) = (x_ref?, ref_scale?);
        if sc == 0.0 {
            return Some(0.0);
        }
        let full: Vec<f64> = x.iter().zip(offset).map(|(p, q)| p + q).collect();
        Some(a_norm_error(a, &full, xr, sc))
    };
    if let Some(e0) = measure(&x) {
        report.a_norm_errors.push(e0);
    }
    let done = |err: Option<f64>, rho: f64| -> bool {
        if use_error {
            err.is_some_and(|e| e <= cfg.rel_error_tol)
        } else {
            rho0 <= 0.0 || (rho.max(0.0) / rho0).sqrt() <= cfg.rel_error_tol
        }
    };
    if norm2(&r) == 0.0 || done(report.a_norm_errors.first().copied(), rho) {
        report.converged = true;
    } else {
        if let Some(ro) = reorth.as_mut() {
            ro.push(&r, &z, rho);
        }
        let mut p = z.clone();
        for it in 1..=cfg.max_iterations {
            if !(rho > 0.0) {
                break;
            }
            let ap = a.mul_vec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rho / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            on_iterate(&x);
            report.lanczos_alpha.push(alpha);
            report.iterations = it;
            report.residual_norms.push(norm2(&r));
            let err = measure(&x);
            if let Some(e) = err {
                report.a_norm_errors.push(e);
            }
            z = precond(&r);
            if let Some(ro) = reorth.as_ref() {
                ro.apply(&mut r, &mut z);
            }
            let rho_new = dot(&r, &z);
            if done(err, rho_new) {
                report.converged = true;
                break;
            }
            let beta = rho_new / rho;
            report.lanczos_beta.push(beta);
            rho = rho_new;
            if let Some(ro) = reorth.as_mut() {
                ro.push(&r, &z, rho);
            }
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
    }
    report.final_error = report.a_norm_errors.last().copied();
    let (lo, hi, k) = ritz_bounds(&report);
    report.ritz_min = lo;
    report.ritz_max = hi;
    report.kappa_estimate = k;
    report.solution = x;
    Ok(report)
}

/// Preconditioned CG from the zero initial guess.
pub fn pcg(
    a: &SparseSymMatrix,
    b: &[f64],
    preconditioner: &dyn LinearOperator,
    cfg: &KrylovConfig,
    x_ref: Option<&[f64]>,
) -> Result<SolveReport> {
    let zero = vec![0.0; a.dim()];
    cg_core(a, b, &|r| preconditioner.apply_vec(r), cfg, x_ref, &zero, |_| {})
}

/// Deflated CG: the coarse component R⁰ᵀ(R⁰AR⁰ᵀ)⁻¹R⁰b is computed directly
/// and CG runs on A y = Πᵀ b with directions Π H r, so that iterates stay
/// in range(Π). The returned solution is coarse component + y.
pub fn ppcg(
    a: &SparseSymMatrix,
    b: &[f64],
    h: &dyn LinearOperator,
    coarse: &CoarseSpace,
    cfg: &KrylovConfig,
    x_ref: Option<&[f64]>,
) -> Result<SolveReport> {
    let xc = coarse.coarse_component(b);
    let rhs = coarse.apply_projector_transpose(b);
    let mut leak = 0.0f64;
    let mut report = cg_core(
        a,
        &rhs,
        &|r| coarse.apply_projector(&h.apply_vec(r)),
        cfg,
        x_ref,
        &xc,
        |y| {
            let ny = norm2(y);
            if ny > 0.0 {
                leak = leak.max(coarse.coarse_part_norm(y) / ny);
            }
        },
    )?;
    report.range_leak = Some(leak);
    axpy(1.0, &xc, &mut report.solution);
    Ok(report)
}

/// `iteration,a_norm_error,residual` rows.
pub fn convergence_csv(report: &SolveReport) -> String {
    let mut s = String::from("iteration,a_norm_error,residual\n");
    for (i, r) in report.residual_norms.iter().enumerate() {
        let e = report.a_norm_errors.get(i).map_or(String::new(), |e| format!("{e:.12e}"));
        s.push_str(&format!("{i},{e},{r:.12e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Identity, SkylineCholesky, TripletBuilder};

    fn laplace_1d(n: usize) -> SparseSymMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0 + 0.01 * i as f64);
            if i + 1 < n {
                b.add_sym(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    struct ExactInverse(SkylineCholesky, usize);

    impl LinearOperator for ExactInverse {
        fn dim(&self) -> usize {
            self.1
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(&self.0.solve(x));
        }
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let a = laplace_1d(5);
        let r = pcg(&a, &[0.0; 5], &Identity(5), &KrylovConfig::default(), Some(&[0.0; 5])).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
        assert!(r.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let a = laplace_1d(20);
        let b: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let h = ExactInverse(SkylineCholesky::new(&a).unwrap(), 20);
        let xs = h.apply_vec(&b);
        let r = pcg(&a, &b, &h, &KrylovConfig::default(), Some(&xs)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert!((r.ritz_min - 1.0).abs() < 1e-12 && (r.kappa_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors_decrease_and_ritz_inside_spectrum() {
        let n = 40;
        let a = laplace_1d(n);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let xs = SkylineCholesky::new(&a).unwrap().solve(&b);
        let cfg = KrylovConfig {
            max_iterations: 200,
            ..Default::default()
        };
        let r = pcg(&a, &b, &Identity(n), &cfg, Some(&xs)).unwrap();
        assert!(r.converged);
        for w in r.a_norm_errors.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let ev = SymmetricEigen::new(a.to_dense()).eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        let d = 1e-8 * hi;
        assert!(r.ritz_min >= lo - d && r.ritz_max <= hi + d);
        let xe: f64 = r.solution.iter().zip(&xs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(xe < 1e-6);
    }

    #[test]
    fn single_step_ritz_is_rayleigh_quotient() {
        let a = laplace_1d(10);
        let b = vec![1.0; 10];
        let cfg = KrylovConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let r = pcg(&a, &b, &Identity(10), &cfg, None).unwrap();
        let rq = a.energy(&b) / dot(&b, &b);
        assert!((r.ritz_min - rq).abs() < 1e-12);
        assert!(!r.converged);
    }

    #[test]
    fn convergence_csv_has_header() {
        let a = laplace_1d(4);
        let r = pcg(&a, &[1.0; 4], &Identity(4), &KrylovConfig::default(), None).unwrap();
        let csv = convergence_csv(&r);
        assert!(csv.starts_with("iteration,a_norm_error,residual\n0,,"));
    }
}
