//! Non-overlapping element partitions, restriction maps with duplicated
//! interface DOFs, and partitions of unity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::linalg::SparseSymMatrix;
use crate::problem2d::{DofMap, Mesh2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    /// Vertical strips of whole quad columns.
    Strips,
    /// Recursive coordinate bisection of element barycenters.
    Rcb,
}

/// Owner (0-based subdomain) of every element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub n_subdomains: usize,
    pub element_owner: Vec<usize>,
}

impl PartitionSpec {
    pub fn single(n_elements: usize) -> Self {
        Self {
            n_subdomains: 1,
            element_owner: vec![0; n_elements],
        }
    }

    /// Checks that owners are in range and every subdomain is nonempty.
    pub fn new(n_subdomains: usize, element_owner: Vec<usize>) -> Result<Self> {
        let spec = Self {
            n_subdomains,
            element_owner,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = self.counts();
        if let Some(e) = self.element_owner.iter().position(|&o| o >= self.n_subdomains) {
            return Err(GeneoError::UnassignedElement { element: e });
        }
        if let Some(s) = counts.iter().position(|&c| c == 0) {
            return Err(GeneoError::InvalidConfig {
                field: "partition".into(),
                message: format!("subdomain {s} owns no element"),
            });
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_subdomains];
        for &o in &self.element_owner {
            if o < self.n_subdomains {
                c[o] += 1;
            }
        }
        c
    }

    /// `element_id owner` per line.
    pub fn to_file_string(&self) -> String {
        let mut s = String::with_capacity(self.element_owner.len() * 8);
        for (e, o) in self.element_owner.iter().enumerate() {
            let _ = writeln!(s, "{e} {o}");
        }
        s
    }

    /// Parses `element_id owner` lines. Blank lines and lines starting with
    /// `#` are ignored. Every element must appear exactly once.
    pub fn from_file_str(text: &str, n_elements: usize) -> Result<Self> {
        let mut owner: Vec<Option<usize>> = vec![None; n_elements];
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<usize> {
                tok.ok_or_else(|| GeneoError::Parse {
                    line: ln + 1,
                    message: format!("missing {what}"),
                })?
                .parse()
                .map_err(|e| GeneoError::Parse {
                    line: ln + 1,
                    message: format!("bad {what}: {e}"),
                })
            };
            let e = parse(it.next(), "element id")?;
            let o = parse(it.next(), "owner")?;
            if it.next().is_some() {
                return Err(GeneoError::Parse {
                    line: ln + 1,
                    message: "trailing tokens".into(),
                });
            }
            if e >= n_elements {
                return Err(GeneoError::Parse {
                    line: ln + 1,
                    message: format!("element {e} out of range"),
                });
            }
            if owner[e].replace(o).is_some() {
                return Err(GeneoError::Parse {
                    line: ln + 1,
                    message: format!("element {e} listed twice"),
                });
            }
        }
        let element_owner = owner
            .iter()
            .enumerate()
            .map(|(e, o)| o.ok_or(GeneoError::UnassignedElement { element: e }))
            .collect::<Result<Vec<_>>>()?;
        let n = element_owner.iter().max().map_or(0, |m| m + 1);
        Self::new(n, element_owner)
    }
}

pub fn partition_elements(mesh: &Mesh2D, n: usize, method: PartitionMethod) -> Result<PartitionSpec> {
    let ne = mesh.n_elements();
    if n == 0 {
        return Err(GeneoError::InvalidConfig {
            field: "n_subdomains".into(),
            message: "must be at least 1".into(),
        });
    }
    match method {
        PartitionMethod::Strips => {
            if n > mesh.nx {
                return Err(GeneoError::TooManySubdomains {
                    requested: n,
                    max: mesh.nx,
                });
            }
            let owner = (0..ne).map(|e| mesh.element_column(e) * n / mesh.nx).collect();
            PartitionSpec::new(n, owner)
        }
        PartitionMethod::Rcb => {
            if n > ne {
                return Err(GeneoError::TooManySubdomains { requested: n, max: ne });
            }
            let centers: Vec<[f64; 2]> = (0..ne).map(|e| mesh.barycenter(e)).collect();
            let mut owner = vec![0; ne];
            let mut ids: Vec<usize> = (0..ne).collect();
            bisect(&centers, &mut ids, 0, n, &mut owner);
            PartitionSpec::new(n, owner)
        }
    }
}

fn bisect(centers: &[[f64; 2]], ids: &mut [usize], base: usize, parts: usize, owner: &mut [usize]) {
    if parts == 1 {
        for &e in ids.iter() {
            owner[e] = base;
        }
        return;
    }
    let extent = |c: usize| {
        let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(centers[e][c]), hi.max(centers[e][c]))
        });
        hi - lo
    };
    // ties go to x
    let axis = if extent(1) > extent(0) * (1.0 + 1e-9) { 1 } else { 0 };
    let other = 1 - axis;
    ids.sort_by(|&a, &b| {
        centers[a][axis]
            .total_cmp(&centers[b][axis])
            .then(centers[a][other].total_cmp(&centers[b][other]))
            .then(a.cmp(&b))
    });
    let left_parts = parts / 2;
    let cut = (ids.len() * left_parts + parts / 2) / parts;
    let (l, r) = ids.split_at_mut(cut);
    bisect(centers, l, base, left_parts, owner);
    bisect(centers, r, base + left_parts, parts - left_parts, owner);
}

/// Boolean restriction R^s, stored as the local-to-global DOF list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictionMap {
    pub global_index: Vec<usize>,
}

impl RestrictionMap {
    pub fn len(&self) -> usize {
        self.global_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global_index.is_empty()
    }

    /// R x
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.global_index.iter().map(|&g| x[g]).collect()
    }

    /// y += Rᵀ x
    pub fn lift_add(&self, x: &[f64], y: &mut [f64]) {
        for (&g, &v) in self.global_index.iter().zip(x) {
            y[g] += v;
        }
    }

    /// Rᵀ X for a local dense block.
    pub fn lift_dense(&self, x: &crate::linalg::DenseMatrix, n: usize) -> crate::linalg::DenseMatrix {
        let mut out = crate::linalg::DenseMatrix::zeros(n, x.ncols());
        for (l, &g) in self.global_index.iter().enumerate() {
            out.row_mut(g).copy_from(&x.row(l));
        }
        out
    }
}

/// DOFs belonging to more than one subdomain.
#[derive(Debug, Clone, Serialize)]
pub struct InterfaceReport {
    pub n_gamma: usize,
    /// Local indices of interface DOFs per subdomain (Γ^s).
    pub interface: Vec<Vec<usize>>,
    /// Number of subdomains containing each global DOF.
    #[serde(skip)]
    pub multiplicity: Vec<usize>,
}

/// V^s = free DOFs of every vertex touching an element owned by s.
pub fn build_restrictions(
    mesh: &Mesh2D,
    partition: &PartitionSpec,
    dofs: &DofMap,
) -> Result<(Vec<RestrictionMap>, InterfaceReport)> {
    partition.validate()?;
    if partition.element_owner.len() != mesh.n_elements() {
        return Err(GeneoError::UnassignedElement {
            element: partition.element_owner.len().min(mesh.n_elements()),
        });
    }
    let n = dofs.n_dofs();
    let mut marks = vec![vec![false; n]; partition.n_subdomains];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let s = partition.element_owner[e];
        for &v in tri {
            if let Some([dx, dy]) = dofs.vertex(v) {
                marks[s][dx] = true;
                marks[s][dy] = true;
            }
        }
    }
    let mut multiplicity = vec![0usize; n];
    let maps: Vec<RestrictionMap> = marks
        .iter()
        .map(|m| {
            let global_index: Vec<usize> = (0..n).filter(|&g| m[g]).collect();
            for &g in &global_index {
                multiplicity[g] += 1;
            }
            RestrictionMap { global_index }
        })
        .collect();
    let interface = maps
        .iter()
        .map(|r| (0..r.len()).filter(|&l| multiplicity[r.global_index[l]] > 1).collect())
        .collect();
    let n_gamma = multiplicity.iter().filter(|&&m| m > 1).count();
    Ok((
        maps,
        InterfaceReport {
            n_gamma,
            interface,
            multiplicity,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PouKind {
    /// D_ii = 1 / multiplicity (μ-scaling).
    Multiplicity,
    /// D_ii = (A_Neu)_ii / (R A Rᵀ)_ii.
    KScaling,
}

/// Diagonal partition-of-unity weights D^s, one vector per subdomain.
pub fn pou_matrices(
    restrictions: &[RestrictionMap],
    kind: PouKind,
    a: &SparseSymMatrix,
    a_neu: &[SparseSymMatrix],
) -> Result<Vec<Vec<f64>>> {
    let n = a.dim();
    match kind {
        PouKind::Multiplicity => {
            let mut mult = vec![0usize; n];
            for r in restrictions {
                for &g in &r.global_index {
                    mult[g] += 1;
                }
            }
            Ok(restrictions
                .iter()
                .map(|r| r.global_index.iter().map(|&g| 1.0 / mult[g] as f64).collect())
                .collect())
        }
        PouKind::KScaling => {
            if a_neu.len() != restrictions.len() {
                return Err(GeneoError::DimensionMismatch {
                    expected: restrictions.len(),
                    got: a_neu.len(),
                });
            }
            let diag = a.diagonal();
            restrictions
                .iter()
                .zip(a_neu)
                .map(|(r, m)| {
                    r.global_index
                        .iter()
                        .enumerate()
                        .map(|(l, &g)| {
                            if diag[g] == 0.0 {
                                Err(GeneoError::ZeroDiagonal { dof: g })
                            } else {
                                Ok(m.get(l, l) / diag[g])
                            }
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// max_i |1 − (Σ_s R^sᵀ D^s R^s)_ii|
pub fn pou_defect(restrictions: &[RestrictionMap], d: &[Vec<f64>], n: usize) -> f64 {
    let mut sum = vec![0.0; n];
    for (r, ds) in restrictions.iter().zip(d) {
        r.lift_add(ds, &mut sum);
    }
    sum.iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subdomain() {
        let mesh = Mesh2D::new(4, 2);
        let p = partition_elements(&mesh, 1, PartitionMethod::Rcb).unwrap();
        assert!(p.element_owner.iter().all(|&o| o == 0));
        let dofs = DofMap::new(&mesh);
        let (maps, iface) = build_restrictions(&mesh, &p, &dofs).unwrap();
        assert_eq!(maps[0].global_index, (0..dofs.n_dofs()).collect::<Vec<_>>());
        assert_eq!(iface.n_gamma, 0);
    }

    #[test]
    fn strips_of_two_columns() {
        let mesh = Mesh2D::new(8, 3);
        let p = partition_elements(&mesh, 4, PartitionMethod::Strips).unwrap();
        for e in 0..mesh.n_elements() {
            assert_eq!(p.element_owner[e], mesh.element_column(e) / 2);
        }
        assert!(partition_elements(&mesh, 9, PartitionMethod::Strips).is_err());
    }

    #[test]
    fn two_strips_share_one_column() {
        // nx = 2, ny = 1: the middle vertex column (2 vertices) is shared
        let mesh = Mesh2D::new(2, 1);
        let p = partition_elements(&mesh, 2, PartitionMethod::Strips).unwrap();
        let dofs = DofMap::new(&mesh);
        let (maps, iface) = build_restrictions(&mesh, &p, &dofs).unwrap();
        assert_eq!(iface.n_gamma, 2 * 2);
        assert_eq!(maps[0].len(), 4);
        assert_eq!(maps[1].len(), 8);
        let total: usize = maps.iter().map(|m| m.len()).sum();
        assert_eq!(iface.n_gamma, total - dofs.n_dofs());
    }

    #[test]
    fn multiplicity_weights() {
        let mesh = Mesh2D::new(4, 2);
        let p = partition_elements(&mesh, 2, PartitionMethod::Strips).unwrap();
        let dofs = DofMap::new(&mesh);
        let (maps, iface) = build_restrictions(&mesh, &p, &dofs).unwrap();
        let a = SparseSymMatrix::identity(dofs.n_dofs());
        let d = pou_matrices(&maps, PouKind::Multiplicity, &a, &[]).unwrap();
        for (s, r) in maps.iter().enumerate() {
            for &l in &iface.interface[s] {
                assert_eq!(d[s][l], 0.5);
            }
            assert_eq!(d[s].len(), r.len());
        }
        assert_eq!(pou_defect(&maps, &d, dofs.n_dofs()), 0.0);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let mesh = Mesh2D::new(4, 2);
        let p = partition_elements(&mesh, 3, PartitionMethod::Rcb).unwrap();
        let text = p.to_file_string();
        assert_eq!(PartitionSpec::from_file_str(&text, mesh.n_elements()).unwrap(), p);
        let missing: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            PartitionSpec::from_file_str(&missing, mesh.n_elements()),
            Err(GeneoError::UnassignedElement { element: 0 })
        ));
        assert!(matches!(
            PartitionSpec::from_file_str("0 x\n", 1),
            Err(GeneoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PartitionSpec::from_file_str("0 0\n0 0\n", 1),
            Err(GeneoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn rcb_is_balanced() {
        let mesh = Mesh2D::new(84, 42);
        let p = partition_elements(&mesh, 8, PartitionMethod::Rcb).unwrap();
        let c = p.counts();
        let (mn, mx) = (*c.iter().min().unwrap(), *c.iter().max().unwrap());
        assert!(mx <= 2 * mn);
    }
}
