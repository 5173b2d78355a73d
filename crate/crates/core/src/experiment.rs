//! End-to-end experiment pipeline: mesh, partition, assembly, local solvers,
//! GenEO coarse space, solve, and the report that goes with it.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::geneo::{assemble_coarse, build_ms, FlatVariant, GenEOConfig, GenEOSpectra};
use crate::krylov::{pcg, ppcg, ritz_bounds, KrylovConfig, SolveReport};
use crate::linalg::SparseSymMatrix;
use crate::oracle::{self, AuditInput, BoundCheck, BoundKind, BoundParams, TheoryBounds};
use crate::partition::{
    build_restrictions, partition_elements, pou_matrices, InterfaceReport, PartitionMethod, PartitionSpec, PouKind,
    RestrictionMap,
};
use crate::problem2d::{assemble, assemble_local_neumann, young_field, CoefficientKind, Mesh2D, ProblemInstance};
use crate::schwarz::{coloring_constant, CoarseSpace, Coloring, LocalSolverSet, Mode, SchwarzPreconditioner, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nx: usize,
    pub ny: usize,
    pub coefficients: CoefficientKind,
    pub poisson: f64,
    pub n_subdomains: usize,
    pub partition: PartitionMethod,
    /// Overrides `partition` and `n_subdomains` when set.
    pub partition_file: Option<PathBuf>,
    pub variant: Variant,
    pub scaling: PouKind,
    pub mode: Mode,
    pub tau_sharp: Option<f64>,
    pub tau_flat: Option<f64>,
    pub flat_variant: FlatVariant,
    pub max_per_subdomain: Option<usize>,
    pub krylov: KrylovConfig,
    pub oracle: bool,
    pub oracle_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nx: 84,
            ny: 42,
            coefficients: CoefficientKind::NoLayers,
            poisson: 0.4,
            n_subdomains: 8,
            partition: PartitionMethod::Rcb,
            partition_file: None,
            variant: Variant::AdditiveSchwarz,
            scaling: PouKind::KScaling,
            mode: Mode::Hybrid,
            tau_sharp: None,
            tau_flat: None,
            flat_variant: FlatVariant::Standard,
            max_per_subdomain: None,
            krylov: KrylovConfig::default(),
            oracle: false,
            oracle_cap: oracle::DEFAULT_CAP,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> GeneoError {
    GeneoError::InvalidConfig {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// The toy instance used throughout the tests.
    pub fn toy(variant: Variant, mode: Mode) -> Self {
        Self {
            nx: 20,
            ny: 10,
            n_subdomains: 4,
            variant,
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(invalid("nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(invalid("ny", "must be at least 1"));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(invalid("poisson", format!("{} not in (0, 0.5)", self.poisson)));
        }
        if self.n_subdomains == 0 && self.partition_file.is_none() {
            return Err(invalid("n_subdomains", "must be at least 1"));
        }
        for (name, t) in [("tau_sharp", self.tau_sharp), ("tau_flat", self.tau_flat)] {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(invalid(name, format!("{t} is not a positive finite number")));
                }
            }
        }
        self.krylov.validate()?;
        if self.mode == Mode::OneLevel {
            return Ok(());
        }
        match self.variant {
            Variant::AdditiveSchwarz => {
                if self.tau_flat.is_none() {
                    return Err(invalid("tau_flat", "additive Schwarz needs tau_flat"));
                }
            }
            Variant::NeumannNeumann => {
                if self.mode == Mode::Additive {
                    return Err(invalid("mode", "Neumann-Neumann has no additive two-level variant"));
                }
                if self.tau_sharp.is_none() {
                    return Err(invalid("tau_sharp", "Neumann-Neumann needs tau_sharp"));
                }
                if self.tau_flat.is_some() && self.flat_variant == FlatVariant::Prime {
                    return Err(invalid("flat_variant", "prime needs nonsingular local solvers"));
                }
            }
            Variant::InexactSchwarz => {
                if self.tau_sharp.is_none() {
                    return Err(invalid("tau_sharp", "inexact Schwarz needs tau_sharp"));
                }
                if self.tau_flat.is_none() {
                    return Err(invalid("tau_flat", "inexact Schwarz needs tau_flat"));
                }
            }
        }
        Ok(())
    }

    pub fn geneo(&self) -> GenEOConfig {
        GenEOConfig {
            tau_sharp: self.tau_sharp,
            tau_flat: self.tau_flat,
            scaling: self.scaling,
            flat_variant: self.flat_variant,
            max_per_subdomain: self.max_per_subdomain,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub setup_s: f64,
    pub eigen_s: f64,
    pub solve_s: f64,
    pub oracle_s: f64,
}

/// Everything built before the coarse space is chosen.
pub struct Setup {
    pub config: ExperimentConfig,
    pub problem: ProblemInstance,
    pub partition: PartitionSpec,
    pub restrictions: Vec<RestrictionMap>,
    pub interface: InterfaceReport,
    pub a_neu: Vec<SparseSymMatrix>,
    pub pou: Vec<Vec<f64>>,
    pub ms: Vec<SparseSymMatrix>,
    pub locals: LocalSolverSet,
    pub coloring: Coloring,
    /// Local decompositions; `None` in one-level mode.
    pub spectra: Option<GenEOSpectra>,
    pub x_ref: Vec<f64>,
    pub timings: Timings,
}

impl Setup {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let t0 = Instant::now();
        let mesh = Mesh2D::new(config.nx, config.ny);
        let partition = match &config.partition_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                PartitionSpec::from_file_str(&text, mesh.n_elements())?
            }
            None => partition_elements(&mesh, config.n_subdomains, config.partition)?,
        };
        let field = young_field(config.coefficients, &partition, &mesh, config.poisson)?;
        let problem = assemble(&mesh, &field)?;
        let (restrictions, interface) = build_restrictions(&mesh, &partition, &problem.dofs)?;
        let a_neu = assemble_local_neumann(&problem, &partition, &restrictions)?;
        let pou = pou_matrices(&restrictions, config.scaling, &problem.a, &a_neu)?;
        let ms: Vec<SparseSymMatrix> = pou.iter().zip(&a_neu).map(|(d, m)| build_ms(d, m)).collect();
        let locals = LocalSolverSet::build(config.variant, &problem.a, &restrictions, Some(&ms))?;
        let coloring = coloring_constant(&problem.a, &restrictions);
        let x_ref = problem.reference_solution()?;
        let setup_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let spectra = if config.mode == Mode::OneLevel {
            None
        } else {
            Some(GenEOSpectra::compute(&config.geneo(), &locals, &ms)?)
        };
        Ok(Self {
            config: config.clone(),
            problem,
            partition,
            restrictions,
            interface,
            a_neu,
            pou,
            ms,
            locals,
            coloring,
            spectra,
            x_ref,
            timings: Timings {
                setup_s,
                eigen_s: t1.elapsed().as_secs_f64(),
                ..Timings::default()
            },
        })
    }

    /// Coarse space for the given thresholds, reusing the decompositions.
    pub fn coarse_space(&self, tau_sharp: Option<f64>, tau_flat: Option<f64>) -> Result<Option<CoarseSpace>> {
        let Some(spectra) = &self.spectra else {
            return Ok(None);
        };
        let cfg = GenEOConfig {
            tau_sharp,
            tau_flat,
            ..self.config.geneo()
        };
        let contributions = spectra.contributions(&cfg, &self.locals)?;
        assemble_coarse(&contributions, &self.restrictions, &self.problem.a).map(Some)
    }

    pub fn preconditioner<'a>(&'a self, coarse: Option<&'a CoarseSpace>) -> Result<SchwarzPreconditioner<'a>> {
        self.preconditioner_for(coarse, self.config.mode)
    }

    /// Same local solvers, another way of adding the coarse space.
    pub fn preconditioner_for<'a>(
        &'a self,
        coarse: Option<&'a CoarseSpace>,
        mode: Mode,
    ) -> Result<SchwarzPreconditioner<'a>> {
        SchwarzPreconditioner::new(&self.problem.a, &self.locals, coarse, mode)
    }

    pub fn bound_params(&self, tau_sharp: Option<f64>, tau_flat: Option<f64>) -> BoundParams {
        BoundParams {
            variant: self.config.variant,
            coloring: self.coloring.n_colors,
            n_prime: 1.0,
            tau_sharp,
            tau_flat,
        }
    }

    pub fn solve(&self, pre: &SchwarzPreconditioner) -> Result<SolveReport> {
        let a = &self.problem.a;
        let b = &self.problem.b;
        let cfg = &self.config.krylov;
        match (pre.mode, pre.coarse) {
            (Mode::Projected, Some(coarse)) => ppcg(a, b, pre, coarse, cfg, Some(&self.x_ref)),
            _ => pcg(a, b, pre, cfg, Some(&self.x_ref)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorStats {
    pub n: usize,
    pub n0: usize,
    pub n_subdomains: usize,
    pub coloring: usize,
    pub n_gamma: usize,
    pub variant: Variant,
    pub scaling: PouKind,
    pub mode: Mode,
    pub coarse_per_subdomain: Vec<usize>,
    pub coarse_min_per_subdomain: usize,
    pub coarse_max_per_subdomain: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_error: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub range_leak: Option<f64>,
    /// ‖x − x*‖_A / ‖x*‖_A of the returned solution, against the direct solve.
    pub solution_error: f64,
    pub theory: TheoryBounds,
    pub theory_kappa: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub zero_multiplicity: usize,
    pub effective_kappa: f64,
    pub eigenvalues: Vec<f64>,
    pub bound_checks: Vec<BoundCheck>,
    pub assumptions: Vec<BoundCheck>,
    pub omega: Option<f64>,
    pub omega_bound: Option<f64>,
    pub c0_squared: Option<f64>,
    pub c0_squared_bound: Option<f64>,
    pub splitting_defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub operator: OperatorStats,
    pub interface: InterfaceReport,
    pub solve: SolveSummary,
    /// Checks of the Ritz estimates against the theory; Ritz values lie in
    /// the spectral hull, so these are necessary conditions.
    pub bound_checks: Vec<BoundCheck>,
    pub oracle: Option<OracleSection>,
    pub timings: Timings,
}

impl ExperimentReport {
    pub fn all_checks_pass(&self) -> bool {
        let oracle_ok = self.oracle.as_ref().is_none_or(|o| {
            o.bound_checks.iter().chain(&o.assumptions).all(|c| c.satisfied)
        });
        oracle_ok && self.bound_checks.iter().all(|c| c.satisfied)
    }
}

/// Output of a full run, including the raw solver report and spectra for
/// the CSV dumps.
pub struct RunOutput {
    pub report: ExperimentReport,
    pub solve: SolveReport,
    pub eigenvalue_csv: String,
    pub partition: PartitionSpec,
}

fn a_norm_error(a: &SparseSymMatrix, x: &[f64], x_ref: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(x_ref).map(|(p, q)| p - q).collect();
    (a.energy(&diff) / a.energy(x_ref)).max(0.0).sqrt()
}

fn ritz_checks(theory: &TheoryBounds, lo: f64, hi: f64) -> Vec<BoundCheck> {
    let mut out = Vec::new();
    if let Some(l) = theory.lower {
        out.push(BoundCheck::new("ritz.lambda_min", BoundKind::Lower, l, lo));
    }
    if let Some(u) = theory.upper {
        out.push(BoundCheck::new("ritz.lambda_max", BoundKind::Upper, u, hi));
    }
    if let Some(k) = theory.kappa() {
        out.push(BoundCheck::new("ritz.kappa", BoundKind::Upper, k, hi / lo));
    }
    out
}

impl Setup {
    /// Solves with the configured thresholds and assembles the report.
    pub fn run(&self) -> Result<RunOutput> {
        let cfg = &self.config;
        let (ts, tf) = (cfg.tau_sharp, cfg.tau_flat);
        let mut timings = self.timings.clone();
        let t0 = Instant::now();
        let coarse = self.coarse_space(ts, tf)?;
        timings.eigen_s += t0.elapsed().as_secs_f64();
        let pre = self.preconditioner(coarse.as_ref())?;

        let t1 = Instant::now();
        let solve = self.solve(&pre)?;
        timings.solve_s = t1.elapsed().as_secs_f64();

        let params = self.bound_params(ts, tf);
        let theory = params.theory(cfg.mode);
        let (lo, hi, kappa) = ritz_bounds(&solve);
        let counts = coarse.as_ref().map_or_else(|| vec![0; self.restrictions.len()], |c| c.counts.clone());
        let n0 = coarse.as_ref().map_or(0, |c| c.n0());
        let operator = OperatorStats {
            n: self.problem.n(),
            n0,
            n_subdomains: self.restrictions.len(),
            coloring: self.coloring.n_colors,
            n_gamma: self.interface.n_gamma,
            variant: cfg.variant,
            scaling: cfg.scaling,
            mode: cfg.mode,
            coarse_min_per_subdomain: counts.iter().copied().min().unwrap_or(0),
            coarse_max_per_subdomain: counts.iter().copied().max().unwrap_or(0),
            coarse_per_subdomain: counts,
        };
        let summary = SolveSummary {
            iterations: solve.iterations,
            converged: solve.converged,
            final_error: solve.final_error,
            lambda_min: lo,
            lambda_max: hi,
            kappa,
            range_leak: solve.range_leak,
            solution_error: a_norm_error(&self.problem.a, &solve.solution, &self.x_ref),
            theory,
            theory_kappa: theory.kappa(),
        };

        let t2 = Instant::now();
        let oracle = if cfg.oracle {
            Some(self.oracle_section(&pre, &params, n0)?)
        } else {
            None
        };
        timings.oracle_s = t2.elapsed().as_secs_f64();

        let eigenvalue_csv = self
            .spectra
            .as_ref()
            .map_or_else(|| "subdomain,index,eigenvalue,selected\n".to_string(), |s| s.eigenvalue_csv(&cfg.geneo()));
        Ok(RunOutput {
            report: ExperimentReport {
                config: cfg.clone(),
                operator,
                interface: self.interface.clone(),
                solve: summary,
                bound_checks: ritz_checks(&theory, lo, hi),
                oracle,
                timings,
            },
            solve,
            eigenvalue_csv,
            partition: self.partition.clone(),
        })
    }

    fn oracle_section(&self, pre: &SchwarzPreconditioner, params: &BoundParams, n0: usize) -> Result<OracleSection> {
        let cfg = &self.config;
        let spectrum = oracle::preconditioned_spectrum(pre, cfg.oracle_cap)?;
        let bound_checks = oracle::check_bounds(&spectrum, params, cfg.mode, n0);
        let assumptions = oracle::audit_assumptions(&AuditInput {
            a: &self.problem.a,
            restrictions: &self.restrictions,
            pou: &self.pou,
            a_neu: &self.a_neu,
            ms: &self.ms,
            locals: &self.locals,
            coarse: pre.coarse,
            mode: cfg.mode,
            cap: cfg.oracle_cap,
        });
        let omega_bound = match cfg.variant {
            Variant::AdditiveSchwarz => Some(1.0),
            _ => cfg.tau_sharp.filter(|_| cfg.mode != Mode::OneLevel).map(|t| 1.0 / t),
        };
        let omega = if cfg.mode == Mode::OneLevel && cfg.variant != Variant::AdditiveSchwarz {
            None
        } else {
            Some(oracle::empirical_omega(pre, 4)?)
        };
        let flat = self.spectra.as_ref().and_then(|s| s.flat.as_ref());
        let (c0_squared, splitting_defect, c0_squared_bound) = match (flat, cfg.tau_flat) {
            (Some(flat), Some(tf)) if cfg.mode != Mode::OneLevel => {
                let (c0, defect) = oracle::empirical_c0_squared(pre, &self.pou, &self.ms, flat, tf, 4)?;
                (Some(c0), Some(defect), Some(tf))
            }
            _ => (None, None, None),
        };
        Ok(OracleSection {
            lambda_min: spectrum.lambda_min_nonzero,
            lambda_max: spectrum.lambda_max,
            zero_multiplicity: spectrum.zero_multiplicity,
            effective_kappa: spectrum.effective_kappa,
            eigenvalues: spectrum.eigenvalues,
            bound_checks,
            assumptions,
            omega,
            omega_bound,
            c0_squared,
            c0_squared_bound,
            splitting_defect,
        })
    }
}

/// Builds and runs one experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    Setup::build(config)?.run()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub tau_flat: f64,
    pub n0: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_error: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub kappa_bound: Option<f64>,
}

/// Runs the configured experiment for each τ♭, reusing the local
/// decompositions.
pub fn sweep_tau_flat(config: &ExperimentConfig, taus: &[f64]) -> Result<Vec<SweepRow>> {
    if taus.is_empty() {
        return Err(invalid("taus", "empty sweep"));
    }
    let first = ExperimentConfig {
        tau_flat: Some(taus[0]),
        ..config.clone()
    };
    let setup = Setup::build(&first)?;
    taus.iter()
        .map(|&tf| {
            let coarse = setup.coarse_space(config.tau_sharp, Some(tf))?;
            let pre = setup.preconditioner(coarse.as_ref())?;
            let solve = setup.solve(&pre)?;
            let (lo, hi, kappa) = ritz_bounds(&solve);
            Ok(SweepRow {
                tau_flat: tf,
                n0: coarse.as_ref().map_or(0, |c| c.n0()),
                iterations: solve.iterations,
                converged: solve.converged,
                final_error: solve.final_error,
                lambda_min: lo,
                lambda_max: hi,
                kappa,
                kappa_bound: setup.bound_params(config.tau_sharp, Some(tf)).theory(config.mode).kappa(),
            })
        })
        .collect()
}
