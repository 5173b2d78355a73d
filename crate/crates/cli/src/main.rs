//! `geneo`: experiment runner for two-level Schwarz preconditioners with
//! GenEO coarse spaces on the 2D elasticity testbed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geneo_core::experiment::{self, ExperimentConfig, Setup};
use geneo_core::krylov::convergence_csv;
use geneo_core::{CoefficientKind, FlatVariant, Mode, PartitionMethod, PouKind, StoppingRule, Variant};

const EXIT_MAX_ITERATIONS: u8 = 2;
const EXIT_BOUND_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "geneo", version, about = "GenEO two-level Schwarz experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write the report files.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Repeat a run over several values of tau_flat.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,10,100,1000")]
        taus: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the matrix, load vector, mesh and partition in MatrixMarket form.
    Export {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    As,
    Nn,
    Is,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(alias = "one_level")]
    OneLevel,
    Projected,
    Hybrid,
    Additive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    #[value(alias = "multiplicity")]
    Mu,
    #[value(alias = "k_scaling")]
    K,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Strips,
    Rcb,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlatArg {
    Standard,
    Prime,
}

#[derive(Clone, Copy, ValueEnum)]
enum StoppingArg {
    Error,
    Residual,
}

/// Flags override the values read from `--config`.
#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Number of subdomains.
    #[arg(long = "n")]
    n_subdomains: Option<usize>,
    /// Add the hard layers to the coefficient field.
    #[arg(long)]
    layers: bool,
    #[arg(long)]
    poisson: Option<f64>,
    #[arg(long, value_enum)]
    partition: Option<PartitionArg>,
    /// `element owner` lines, 0-based.
    #[arg(long)]
    partition_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    scaling: Option<ScalingArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tau_sharp: Option<f64>,
    #[arg(long)]
    tau_flat: Option<f64>,
    #[arg(long, value_enum)]
    flat_variant: Option<FlatArg>,
    #[arg(long)]
    max_per_subdomain: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    stopping: Option<StoppingArg>,
    /// Fully reorthogonalize the CG residuals.
    #[arg(long)]
    reorth: bool,
    /// Dense spectral checks (small problems only).
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    oracle_cap: Option<usize>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        anyhow::anyhow!("config {}: field `{}`: {}", path.display(), field, e.into_inner())
    })
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.nx {
            c.nx = v;
        }
        if let Some(v) = self.ny {
            c.ny = v;
        }
        if let Some(v) = self.n_subdomains {
            c.n_subdomains = v;
        }
        if self.layers {
            c.coefficients = CoefficientKind::WithLayers;
        }
        if let Some(v) = self.poisson {
            c.poisson = v;
        }
        if let Some(v) = self.partition {
            c.partition = match v {
                PartitionArg::Strips => PartitionMethod::Strips,
                PartitionArg::Rcb => PartitionMethod::Rcb,
            };
        }
        if let Some(p) = &self.partition_file {
            c.partition_file = Some(p.clone());
        }
        if let Some(v) = self.variant {
            c.variant = match v {
                VariantArg::As => Variant::AdditiveSchwarz,
                VariantArg::Nn => Variant::NeumannNeumann,
                VariantArg::Is => Variant::InexactSchwarz,
            };
        }
        if let Some(v) = self.scaling {
            c.scaling = match v {
                ScalingArg::Mu => PouKind::Multiplicity,
                ScalingArg::K => PouKind::KScaling,
            };
        }
        if let Some(v) = self.mode {
            c.mode = match v {
                ModeArg::OneLevel => Mode::OneLevel,
                ModeArg::Projected => Mode::Projected,
                ModeArg::Hybrid => Mode::Hybrid,
                ModeArg::Additive => Mode::Additive,
            };
        }
        if self.tau_sharp.is_some() {
            c.tau_sharp = self.tau_sharp;
        }
        if self.tau_flat.is_some() {
            c.tau_flat = self.tau_flat;
        }
        if let Some(v) = self.flat_variant {
            c.flat_variant = match v {
                FlatArg::Standard => FlatVariant::Standard,
                FlatArg::Prime => FlatVariant::Prime,
            };
        }
        if self.max_per_subdomain.is_some() {
            c.max_per_subdomain = self.max_per_subdomain;
        }
        if let Some(v) = self.max_iterations {
            c.krylov.max_iterations = v;
        }
        if let Some(v) = self.tol {
            c.krylov.rel_error_tol = v;
        }
        if let Some(v) = self.stopping {
            c.krylov.stopping = match v {
                StoppingArg::Error => StoppingRule::ErrorANorm,
                StoppingArg::Residual => StoppingRule::PreconditionedResidual,
            };
        }
        if self.reorth {
            c.krylov.full_reorthogonalization = true;
        }
        if self.oracle {
            c.oracle = true;
        }
        if let Some(v) = self.oracle_cap {
            c.oracle_cap = v;
        }
        Ok(c)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(exp: &ExperimentArgs, out: &Path) -> Result<u8> {
    let cfg = exp.resolve()?;
    cfg.validate()?;
    let run = experiment::run(&cfg)?;
    fs::create_dir_all(out)?;
    let r = &run.report;
    write(out, "report.json", &(serde_json::to_string_pretty(r)? + "\n"))?;
    write(out, "convergence.csv", &convergence_csv(&run.solve))?;
    write(out, "eigenvalues.csv", &run.eigenvalue_csv)?;
    write(out, "partition.txt", &run.partition.to_file_string())?;
    let err = r.solve.final_error.map_or("n/a".to_string(), |e| format!("{e:.2e}"));
    println!(
        "n={} n0={} colors={} it={} converged={} error={} kappa={:.4} bound={}",
        r.operator.n,
        r.operator.n0,
        r.operator.coloring,
        r.solve.iterations,
        r.solve.converged,
        err,
        r.solve.kappa,
        r.solve.theory_kappa.map_or("none".to_string(), |k| format!("{k:.4}")),
    );
    Ok(if !r.all_checks_pass() {
        for c in r.bound_checks.iter().chain(r.oracle.iter().flat_map(|o| o.bound_checks.iter().chain(&o.assumptions))) {
            if !c.satisfied {
                eprintln!("bound check failed: {} observed {:e} bound {:e}", c.name, c.observed, c.theoretical_bound);
            }
        }
        EXIT_BOUND_FAILED
    } else if !r.solve.converged {
        EXIT_MAX_ITERATIONS
    } else {
        0
    })
}

fn cmd_sweep(exp: &ExperimentArgs, taus: &[f64], out: &Path) -> Result<u8> {
    let mut cfg = exp.resolve()?;
    if let Some(&t) = taus.first() {
        cfg.tau_flat = Some(t);
    }
    cfg.validate()?;
    let rows = experiment::sweep_tau_flat(&cfg, taus)?;
    fs::create_dir_all(out)?;
    write(out, "sweep.json", &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    let mut csv = String::from("tau_flat,n0,iterations,converged,final_error,lambda_min,lambda_max,kappa,kappa_bound\n");
    for r in &rows {
        csv += &format!(
            "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{}\n",
            r.tau_flat,
            r.n0,
            r.iterations,
            r.converged,
            r.final_error.map_or(String::new(), |e| format!("{e:.12e}")),
            r.lambda_min,
            r.lambda_max,
            r.kappa,
            r.kappa_bound.map_or(String::new(), |k| format!("{k:.12e}")),
        );
    }
    write(out, "sweep.csv", &csv)?;
    print!("{csv}");
    let over = rows.iter().any(|r| r.kappa_bound.is_some_and(|b| r.kappa > b * (1.0 + 1e-9)));
    Ok(if over {
        EXIT_BOUND_FAILED
    } else if rows.iter().any(|r| !r.converged) {
        EXIT_MAX_ITERATIONS
    } else {
        0
    })
}

fn cmd_export(exp: &ExperimentArgs, out: &Path) -> Result<u8> {
    let mut cfg = exp.resolve()?;
    cfg.mode = Mode::OneLevel;
    cfg.validate()?;
    let setup = Setup::build(&cfg)?;
    fs::create_dir_all(out)?;
    let p = &setup.problem;
    write(out, "matrix.mtx", &p.a.to_matrix_market())?;
    let mut rhs = format!("%%MatrixMarket matrix array real general\n{} 1\n", p.n());
    for v in &p.b {
        rhs += &format!("{v:.17e}\n");
    }
    write(out, "rhs.mtx", &rhs)?;
    let (vertices, triangles) = p.mesh.to_matrix_market();
    write(out, "vertices.mtx", &vertices)?;
    write(out, "triangles.mtx", &triangles)?;
    write(out, "partition.txt", &setup.partition.to_file_string())?;
    println!("n={} nnz={} elements={}", p.n(), p.a.nnz(), p.mesh.n_elements());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run { exp, out } => cmd_run(exp, out),
        Command::Sweep { exp, taus, out } => cmd_sweep(exp, taus, out),
        Command::Export { exp, out } => cmd_export(exp, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
