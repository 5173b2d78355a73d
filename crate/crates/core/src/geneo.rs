//! GenEO coarse spaces built from per-subdomain generalized eigenproblems.
//!
//! Local pencils are decomposed once ([`GenEOSpectra`]) and thresholds are
//! applied afterwards, so a sweep over τ reuses the same decompositions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::linalg::{
    gen_eig, orthonormalize_columns, DenseMatrix, GenEigResult, PivotedFactor, SparseSymMatrix,
};
use crate::partition::{PouKind, RestrictionMap};
use crate::schwarz::{CoarseSpace, LocalSolverSet};

/// Drop tolerance of the global coarse-basis orthonormalization.
pub const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlatVariant {
    /// Kernels plus W Y_H(τ♭, WᵀÃW, WᵀMW).
    #[default]
    Standard,
    /// Y_L(1/τ♭, M, Ã); needs nonsingular local solvers.
    Prime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenEOConfig {
    pub tau_sharp: Option<f64>,
    pub tau_flat: Option<f64>,
    pub scaling: PouKind,
    #[serde(default)]
    pub flat_variant: FlatVariant,
    /// Cap on eigenvectors taken per subdomain and pencil; kernels are
    /// always kept.
    #[serde(default)]
    pub max_per_subdomain: Option<usize>,
}

impl GenEOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_sharp.is_none() && self.tau_flat.is_none() {
            return Err(GeneoError::InvalidConfig {
                field: "geneo".into(),
                message: "at least one of tau_sharp, tau_flat is required".into(),
            });
        }
        for (name, t) in [("tau_sharp", self.tau_sharp), ("tau_flat", self.tau_flat)] {
            if let Some(t) = t {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(GeneoError::InvalidConfig {
                        field: name.into(),
                        message: format!("{t} is not a positive finite number"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseOrigin {
    KerLocalSolver,
    KerMs,
    SharpEig,
    FlatEig,
}

/// Local coarse vectors of one subdomain, before lifting.
#[derive(Debug, Clone)]
pub struct SubdomainContribution {
    pub subdomain: usize,
    pub vectors: DenseMatrix,
    pub origins: Vec<CoarseOrigin>,
    pub eigenvalues: Vec<Option<f64>>,
}

impl SubdomainContribution {
    fn empty(subdomain: usize, rows: usize) -> Self {
        Self {
            subdomain,
            vectors: DenseMatrix::zeros(rows, 0),
            origins: Vec::new(),
            eigenvalues: Vec::new(),
        }
    }

    fn push_block(&mut self, block: &DenseMatrix, origin: CoarseOrigin, eig: Option<&[f64]>) {
        if block.ncols() == 0 {
            return;
        }
        let old = std::mem::replace(&mut self.vectors, DenseMatrix::zeros(0, 0));
        let rows = old.nrows();
        let mut v = DenseMatrix::zeros(rows, old.ncols() + block.ncols());
        v.columns_mut(0, old.ncols()).copy_from(&old);
        v.columns_mut(old.ncols(), block.ncols()).copy_from(block);
        self.vectors = v;
        for c in 0..block.ncols() {
            self.origins.push(origin);
            self.eigenvalues.push(eig.map(|e| e[c]));
        }
    }

    fn merge(&mut self, other: &SubdomainContribution) {
        assert_eq!(self.subdomain, other.subdomain);
        let old = std::mem::replace(&mut self.vectors, DenseMatrix::zeros(0, 0));
        let mut v = DenseMatrix::zeros(old.nrows(), old.ncols() + other.vectors.ncols());
        v.columns_mut(0, old.ncols()).copy_from(&old);
        v.columns_mut(old.ncols(), other.vectors.ncols()).copy_from(&other.vectors);
        self.vectors = v;
        self.origins.extend_from_slice(&other.origins);
        self.eigenvalues.extend_from_slice(&other.eigenvalues);
    }
}

/// M^s = D⁻¹ A_Neu D⁻¹
pub fn build_ms(d: &[f64], a_neu: &SparseSymMatrix) -> SparseSymMatrix {
    let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    a_neu.scale_sym(&inv)
}

/// Decomposition of the reduced pencil (WᵀÃW, WᵀMW) of one subdomain.
#[derive(Debug, Clone)]
pub struct FlatSpectrum {
    pub ker_local: DenseMatrix,
    pub ker_ms: DenseMatrix,
    pub eigenvalues: Vec<f64>,
    /// W Y, lifted back to local coordinates.
    pub vectors: DenseMatrix,
}

/// Decompositions needed by a configuration; `None` where not requested.
#[derive(Debug, Clone, Default)]
pub struct GenEOSpectra {
    /// gen_eig(Ã^s, R^sAR^sᵀ)
    pub sharp: Option<Vec<GenEigResult>>,
    pub flat: Option<Vec<FlatSpectrum>>,
    /// gen_eig(M^s, Ã^s)
    pub prime: Option<Vec<GenEigResult>>,
}

pub fn sharp_spectra(locals: &LocalSolverSet) -> Result<Vec<GenEigResult>> {
    (0..locals.n_subdomains())
        .map(|s| gen_eig(&locals.local_matrix(s), &locals.dirichlet[s].to_dense()))
        .collect()
}

pub fn flat_spectra(locals: &LocalSolverSet, ms: &[SparseSymMatrix]) -> Result<Vec<FlatSpectrum>> {
    (0..locals.n_subdomains())
        .map(|s| {
            let m = ms[s].to_dense();
            let f = PivotedFactor::new(&m, PivotedFactor::DEFAULT_TOL)?;
            let w = f.range_basis();
            let at = locals.local_matrix(s);
            let mut ra = w.transpose() * (&at * &w);
            let mut rb = w.transpose() * (&m * &w);
            crate::linalg::symmetrize(&mut ra);
            crate::linalg::symmetrize(&mut rb);
            let eig = gen_eig(&ra, &rb)?;
            Ok(FlatSpectrum {
                ker_local: locals.kernel(s),
                ker_ms: f.kernel_basis().clone(),
                eigenvalues: eig.eigenvalues,
                vectors: w * eig.eigenvectors,
            })
        })
        .collect()
}

pub fn prime_spectra(locals: &LocalSolverSet, ms: &[SparseSymMatrix]) -> Result<Vec<GenEigResult>> {
    (0..locals.n_subdomains())
        .map(|s| {
            if locals.is_singular(s) {
                return Err(GeneoError::LocalSolverSingular { subdomain: s });
            }
            gen_eig(&ms[s].to_dense(), &locals.local_matrix(s)).map_err(|e| match e {
                GeneoError::PencilNotDefinite => GeneoError::LocalSolverSingular { subdomain: s },
                other => other,
            })
        })
        .collect()
}

impl GenEOSpectra {
    /// Computes the decompositions the configuration calls for: the sharp
    /// pencil when τ♯ is set, the flat (or prime) pencil when τ♭ is set.
    pub fn compute(cfg: &GenEOConfig, locals: &LocalSolverSet, ms: &[SparseSymMatrix]) -> Result<Self> {
        cfg.validate()?;
        let mut out = Self::default();
        if cfg.tau_sharp.is_some() {
            out.sharp = Some(sharp_spectra(locals)?);
        }
        if cfg.tau_flat.is_some() {
            match cfg.flat_variant {
                FlatVariant::Standard => out.flat = Some(flat_spectra(locals, ms)?),
                FlatVariant::Prime => out.prime = Some(prime_spectra(locals, ms)?),
            }
        }
        Ok(out)
    }

    /// Contributions for the thresholds of `cfg`, one entry per subdomain.
    pub fn contributions(&self, cfg: &GenEOConfig, locals: &LocalSolverSet) -> Result<Vec<SubdomainContribution>> {
        let ns = locals.n_subdomains();
        let mut out: Vec<SubdomainContribution> = (0..ns)
            .map(|s| SubdomainContribution::empty(s, locals.restrictions[s].len()))
            .collect();
        if let Some(tau) = cfg.tau_sharp {
            let sp = self.sharp.as_ref().ok_or_else(|| missing("sharp"))?;
            for (c, part) in out.iter_mut().zip(select_sharp(sp, tau, cfg.max_per_subdomain)) {
                c.merge(&part);
            }
        }
        if let Some(tau) = cfg.tau_flat {
            let parts = match cfg.flat_variant {
                FlatVariant::Standard => select_flat(self.flat.as_ref().ok_or_else(|| missing("flat"))?, tau, cfg.max_per_subdomain),
                FlatVariant::Prime => select_prime(self.prime.as_ref().ok_or_else(|| missing("prime"))?, tau, cfg.max_per_subdomain),
            };
            for (c, part) in out.iter_mut().zip(parts) {
                c.merge(&part);
            }
        }
        Ok(out)
    }

    /// `subdomain,index,eigenvalue,selected` rows for the flat (or prime)
    /// pencil when present, else the sharp pencil.
    pub fn eigenvalue_csv(&self, cfg: &GenEOConfig) -> String {
        let mut s = String::from("subdomain,index,eigenvalue,selected\n");
        let mut rows = |sub: usize, vals: &[f64], sel: &dyn Fn(f64) -> bool| {
            for (i, &v) in vals.iter().enumerate() {
                let _ = writeln!(s, "{sub},{i},{v:.12e},{}", sel(v) as u8);
            }
        };
        if let (Some(fl), Some(t)) = (&self.flat, cfg.tau_flat) {
            for (sub, f) in fl.iter().enumerate() {
                rows(sub, &f.eigenvalues, &|v| v >= t);
            }
        } else if let (Some(pr), Some(t)) = (&self.prime, cfg.tau_flat) {
            for (sub, g) in pr.iter().enumerate() {
                rows(sub, &g.eigenvalues, &|v| v < 1.0 / t);
            }
        } else if let (Some(sh), Some(t)) = (&self.sharp, cfg.tau_sharp) {
            for (sub, g) in sh.iter().enumerate() {
                rows(sub, &g.eigenvalues, &|v| v < t);
            }
        }
        s
    }
}

fn missing(which: &str) -> GeneoError {
    GeneoError::InvalidConfig {
        field: format!("spectra.{which}"),
        message: "decomposition was not computed for this configuration".into(),
    }
}

/// Y_L(τ♯, Ã, RARᵀ) per subdomain. Kernel vectors of Ã are picked up as the
/// λ = 0 eigenvectors.
pub fn select_sharp(spectra: &[GenEigResult], tau: f64, cap: Option<usize>) -> Vec<SubdomainContribution> {
    spectra
        .iter()
        .enumerate()
        .map(|(s, g)| {
            let sel = crate::linalg::split_threshold(g, tau);
            let k = cap.map_or(sel.m_low, |c| c.min(sel.m_low));
            let mut c = SubdomainContribution::empty(s, g.eigenvectors.nrows());
            c.push_block(
                &sel.low.columns(0, k).clone_owned(),
                CoarseOrigin::SharpEig,
                Some(&sel.low_values[..k]),
            );
            c
        })
        .collect()
}

/// Ker(Ã) + Ker(M) + W Y_H(τ♭) per subdomain.
pub fn select_flat(spectra: &[FlatSpectrum], tau: f64, cap: Option<usize>) -> Vec<SubdomainContribution> {
    spectra
        .iter()
        .enumerate()
        .map(|(s, f)| {
            let rows = f.vectors.nrows();
            let mut c = SubdomainContribution::empty(s, rows);
            c.push_block(&f.ker_local, CoarseOrigin::KerLocalSolver, None);
            c.push_block(&f.ker_ms, CoarseOrigin::KerMs, None);
            let m_low = f.eigenvalues.iter().take_while(|&&l| l < tau).count();
            let m = f.eigenvalues.len();
            let take = cap.map_or(m - m_low, |c| c.min(m - m_low));
            // the largest eigenvalues first when capped
            let start = m - take;
            c.push_block(
                &f.vectors.columns(start, take).clone_owned(),
                CoarseOrigin::FlatEig,
                Some(&f.eigenvalues[start..]),
            );
            c
        })
        .collect()
}

/// Y_L(1/τ♭, M, Ã) per subdomain.
pub fn select_prime(spectra: &[GenEigResult], tau: f64, cap: Option<usize>) -> Vec<SubdomainContribution> {
    select_sharp(spectra, 1.0 / tau, cap)
        .into_iter()
        .map(|mut c| {
            c.origins.iter_mut().for_each(|o| *o = CoarseOrigin::FlatEig);
            c
        })
        .collect()
}

/// Lifts, concatenates and orthonormalizes the contributions, then
/// factorizes the coarse matrix.
pub fn assemble_coarse(
    contributions: &[SubdomainContribution],
    restrictions: &[RestrictionMap],
    a: &SparseSymMatrix,
) -> Result<CoarseSpace> {
    let n = a.dim();
    let total: usize = contributions.iter().map(|c| c.vectors.ncols()).sum();
    let mut raw = DenseMatrix::zeros(n, total);
    let mut col = 0;
    for c in contributions {
        let r = &restrictions[c.subdomain];
        for j in 0..c.vectors.ncols() {
            let mut dst = raw.column_mut(col);
            for (l, &g) in r.global_index.iter().enumerate() {
                dst[g] = c.vectors[(l, j)];
            }
            col += 1;
        }
    }
    let basis = orthonormalize_columns(&raw, ORTHO_TOL);
    let counts = contributions.iter().map(|c| c.vectors.ncols()).collect();
    CoarseSpace::from_orthonormal(a, basis, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn ms_with_unit_weights_is_neumann() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 2.0);
        b.add(1, 1, 3.0);
        b.add_sym(0, 1, -1.0);
        let a = b.build();
        assert_eq!(build_ms(&[1.0, 1.0], &a), a);
        let m = build_ms(&[0.5, 1.0], &a);
        assert_eq!(m.get(0, 0), 8.0);
        assert_eq!(m.get(0, 1), -2.0);
    }

    #[test]
    fn config_validation() {
        let mut c = GenEOConfig {
            tau_sharp: None,
            tau_flat: None,
            scaling: PouKind::Multiplicity,
            flat_variant: FlatVariant::Standard,
            max_per_subdomain: None,
        };
        assert!(c.validate().is_err());
        c.tau_flat = Some(-1.0);
        assert!(c.validate().is_err());
        c.tau_flat = Some(10.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn selection_nesting_and_caps() {
        let g = GenEigResult {
            eigenvalues: vec![0.0, 0.2, 0.7, 3.0, 20.0],
            eigenvectors: DenseMatrix::identity(5, 5),
        };
        let a = select_sharp(std::slice::from_ref(&g), 0.5, None);
        let b = select_sharp(std::slice::from_ref(&g), 1.0, None);
        assert_eq!(a[0].vectors.ncols(), 2);
        assert_eq!(b[0].vectors.ncols(), 3);
        assert_eq!(select_sharp(std::slice::from_ref(&g), 1.0, Some(1))[0].vectors.ncols(), 1);
        let f = FlatSpectrum {
            ker_local: DenseMatrix::zeros(5, 0),
            ker_ms: DenseMatrix::zeros(5, 1),
            eigenvalues: g.eigenvalues.clone(),
            vectors: DenseMatrix::identity(5, 5),
        };
        let sel = select_flat(std::slice::from_ref(&f), 3.0, None);
        assert_eq!(sel[0].vectors.ncols(), 3);
        assert_eq!(sel[0].origins[0], CoarseOrigin::KerMs);
        assert_eq!(sel[0].eigenvalues[1], Some(3.0));
        let capped = select_flat(std::slice::from_ref(&f), 3.0, Some(1));
        assert_eq!(capped[0].eigenvalues[1], Some(20.0));
    }
}
