use geneo_core::experiment::{run, ExperimentConfig, Setup};
use geneo_core::oracle::{self, dense_operator, XiProjection};
use geneo_core::partition::{partition_elements, PartitionMethod};
use geneo_core::problem2d::Mesh2D;
use geneo_core::{CoefficientKind, Mode, PouKind, Variant};

fn without_timings(cfg: &ExperimentConfig) -> String {
    let mut r = run(cfg).unwrap().report;
    r.timings = Default::default();
    serde_json::to_string(&r).unwrap()
}

#[test]
fn reports_are_deterministic() {
    let cfg = ExperimentConfig {
        tau_sharp: Some(0.5),
        tau_flat: Some(10.0),
        oracle: true,
        coefficients: CoefficientKind::WithLayers,
        ..ExperimentConfig::toy(Variant::InexactSchwarz, Mode::Hybrid)
    };
    assert_eq!(without_timings(&cfg), without_timings(&cfg));
}

#[test]
fn additive_schwarz_omega_is_one() {
    let cfg = ExperimentConfig {
        tau_flat: Some(10.0),
        ..ExperimentConfig::toy(Variant::AdditiveSchwarz, Mode::Projected)
    };
    let setup = Setup::build(&cfg).unwrap();
    let coarse = setup.coarse_space(None, Some(10.0)).unwrap().unwrap();
    let pre = setup.preconditioner(Some(&coarse)).unwrap();
    let omega = oracle::empirical_omega(&pre, 3).unwrap();
    assert!((omega - 1.0).abs() < 1e-10, "{omega}");
}

#[test]
fn neumann_neumann_omega_below_inverse_tau() {
    for tau in [0.1, 0.5] {
        let cfg = ExperimentConfig {
            tau_sharp: Some(tau),
            scaling: PouKind::Multiplicity,
            ..ExperimentConfig::toy(Variant::NeumannNeumann, Mode::Projected)
        };
        let setup = Setup::build(&cfg).unwrap();
        let coarse = setup.coarse_space(Some(tau), None).unwrap().unwrap();
        let pre = setup.preconditioner(Some(&coarse)).unwrap();
        let omega = oracle::empirical_omega(&pre, 3).unwrap();
        assert!(omega <= 1.0 / tau * (1.0 + 1e-9), "tau {tau}: {omega}");
    }
}

#[test]
fn xi_kills_lifted_kernel() {
    let cfg = ExperimentConfig {
        tau_sharp: Some(0.5),
        ..ExperimentConfig::toy(Variant::NeumannNeumann, Mode::Projected)
    };
    let setup = Setup::build(&cfg).unwrap();
    let a = &setup.problem.a;
    for s in 0..setup.locals.n_subdomains() {
        let z = setup.locals.kernel(s);
        let r = &setup.locals.restrictions[s];
        let xi = XiProjection::new(a, r, &z).unwrap();
        for c in 0..z.ncols() {
            let mut lifted = vec![0.0; a.dim()];
            r.lift_add(z.column(c).as_slice(), &mut lifted);
            let scale = lifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(xi.apply(&lifted).iter().all(|v| v.abs() <= 1e-10 * scale));
        }
    }
}

#[test]
fn stable_splitting_constant_within_tau_flat() {
    for field in [CoefficientKind::NoLayers, CoefficientKind::WithLayers] {
        for scaling in [PouKind::Multiplicity, PouKind::KScaling] {
            let cfg = ExperimentConfig {
                tau_flat: Some(10.0),
                coefficients: field,
                scaling,
                oracle: true,
                ..ExperimentConfig::toy(Variant::AdditiveSchwarz, Mode::Projected)
            };
            let o = run(&cfg).unwrap().report.oracle.unwrap();
            let c0 = o.c0_squared.unwrap();
            assert!(c0 <= 10.0 * (1.0 + 1e-9), "{c0}");
            assert!(o.splitting_defect.unwrap() <= 1e-8, "{:?}", o.splitting_defect);
        }
    }
}

#[test]
fn projected_operator_kernel_is_coarse_space() {
    let cfg = ExperimentConfig {
        tau_flat: Some(10.0),
        ..ExperimentConfig::toy(Variant::AdditiveSchwarz, Mode::Projected)
    };
    let setup = Setup::build(&cfg).unwrap();
    let coarse = setup.coarse_space(None, Some(10.0)).unwrap().unwrap();
    let pre = setup.preconditioner(Some(&coarse)).unwrap();
    let n = pre.n();
    let a = setup.problem.a.to_dense();
    let h = dense_operator(&pre, 3000).unwrap();
    let pi = geneo_core::linalg::DenseMatrix::from_fn(n, n, |i, j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        coarse.apply_projector(&e)[i]
    });
    let hap = &h * &a * &pi;
    let v0 = coarse.basis();
    assert!((&hap * v0).amax() <= 1e-8 * hap.amax());
    let spectrum = oracle::preconditioned_spectrum(&pre, 3000).unwrap();
    assert_eq!(spectrum.zero_multiplicity, coarse.n0());
}

#[test]
fn rcb_on_reference_grid_is_connected_and_balanced() {
    let mesh = Mesh2D::new(84, 42);
    let part = partition_elements(&mesh, 8, PartitionMethod::Rcb).unwrap();
    let counts = part.counts();
    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(*hi as f64 / *lo as f64 <= 2.0);
    // connectivity through shared triangle edges
    for s in 0..8 {
        let elems: Vec<usize> = (0..mesh.n_elements()).filter(|&e| part.element_owner[e] == s).collect();
        let mut seen = vec![false; mesh.n_elements()];
        let mut stack = vec![elems[0]];
        seen[elems[0]] = true;
        let mut reached = 0;
        while let Some(e) = stack.pop() {
            reached += 1;
            for &f in &elems {
                if !seen[f] {
                    let shared = mesh.triangles[e].iter().filter(|v| mesh.triangles[f].contains(v)).count();
                    if shared == 2 {
                        seen[f] = true;
                        stack.push(f);
                    }
                }
            }
        }
        assert_eq!(reached, elems.len(), "subdomain {s} is not connected");
    }
}

#[test]
fn sweep_rows_carry_bounds() {
    let cfg = ExperimentConfig {
        tau_flat: Some(4.0),
        ..ExperimentConfig::toy(Variant::AdditiveSchwarz, Mode::Hybrid)
    };
    let rows = geneo_core::experiment::sweep_tau_flat(&cfg, &[4.0, 10.0, 100.0]).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r.kappa <= r.kappa_bound.unwrap());
    }
    assert!(rows.windows(2).all(|w| w[0].n0 >= w[1].n0));
}
