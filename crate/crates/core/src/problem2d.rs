//! P1 linear elasticity on a structured triangulation of [0,2]×[0,1],
//! clamped on the left edge and loaded by the body force g = (0, 1).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeneoError, Result};
use crate::linalg::{SkylineCholesky, SparseSymMatrix, TripletBuilder};
use crate::partition::{PartitionSpec, RestrictionMap};

pub const LX: f64 = 2.0;
pub const LY: f64 = 1.0;

/// Structured mesh. Vertex (i, j) has index `i * (ny + 1) + j`; quad
/// `q = i * ny + j` is split along its bottom-left to top-right diagonal
/// into triangles `2q` and `2q + 1`.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// True for vertices on x = 0.
    pub dirichlet: Vec<bool>,
}

impl Mesh2D {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "mesh needs at least one element per direction");
        let hx = LX / nx as f64;
        let hy = LY / ny as f64;
        let vid = |i: usize, j: usize| i * (ny + 1) + j;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut dirichlet = Vec::with_capacity((nx + 1) * (ny + 1));
        for i in 0..=nx {
            for j in 0..=ny {
                vertices.push([i as f64 * hx, j as f64 * hy]);
                dirichlet.push(i == 0);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self {
            nx,
            ny,
            vertices,
            triangles,
            dirichlet,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn hx(&self) -> f64 {
        LX / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        LY / self.ny as f64
    }

    pub fn barycenter(&self, e: usize) -> [f64; 2] {
        let t = self.triangles[e];
        let mut c = [0.0; 2];
        for &v in &t {
            c[0] += self.vertices[v][0] / 3.0;
            c[1] += self.vertices[v][1] / 3.0;
        }
        c
    }

    /// Quad column of element `e`.
    pub fn element_column(&self, e: usize) -> usize {
        (e / 2) / self.ny
    }

    /// Vertex and triangle tables in MatrixMarket array format.
    pub fn to_matrix_market(&self) -> (String, String) {
        let mut v = String::from("%%MatrixMarket matrix array real general\n");
        let _ = writeln!(v, "{} 2", self.n_vertices());
        for c in 0..2 {
            for p in &self.vertices {
                let _ = writeln!(v, "{:.17e}", p[c]);
            }
        }
        let mut t = String::from("%%MatrixMarket matrix array integer general\n");
        let _ = writeln!(t, "{} 3", self.n_elements());
        for c in 0..3 {
            for tri in &self.triangles {
                let _ = writeln!(t, "{}", tri[c] + 1);
            }
        }
        (v, t)
    }
}

/// Global numbering of free displacement components. Free vertex k owns
/// DOFs `2k` (x) and `2k + 1` (y).
#[derive(Debug, Clone)]
pub struct DofMap {
    vertex_dofs: Vec<Option<[usize; 2]>>,
    n_dofs: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D) -> Self {
        let mut next = 0;
        let vertex_dofs = mesh
            .dirichlet
            .iter()
            .map(|&d| {
                if d {
                    None
                } else {
                    next += 2;
                    Some([next - 2, next - 1])
                }
            })
            .collect();
        Self {
            vertex_dofs,
            n_dofs: next,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn vertex(&self, v: usize) -> Option<[usize; 2]> {
        self.vertex_dofs[v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    NoLayers,
    WithLayers,
}

/// Young's modulus per element and a global Poisson ratio.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub young: Vec<f64>,
    pub poisson: f64,
}

impl CoefficientField {
    pub fn uniform(n_elements: usize, young: f64, poisson: f64) -> Self {
        assert!(poisson > 0.0 && poisson < 0.5);
        Self {
            young: vec![young; n_elements],
            poisson,
        }
    }

    /// Lamé parameters (μ, L) of element `e`.
    pub fn lame(&self, e: usize) -> (f64, f64) {
        let (ym, nu) = (self.young[e], self.poisson);
        (ym / (2.0 * (1.0 + nu)), ym * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }
}

const SOFT: f64 = 1e5;
const HARD: f64 = 1e8;
const LAYER: f64 = 1e9;

fn in_layer(y: f64) -> bool {
    [(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]
        .iter()
        .any(|&(a, b)| y >= a / 7.0 && y <= b / 7.0)
}

/// Subdomain s (1-based) gets E = 1e5 when odd and 1e8 when even; the
/// layered variant adds 1e9 to elements whose barycenter lies in one of the
/// bands [1/7, 2/7], [3/7, 4/7], [5/7, 6/7].
pub fn young_field(
    kind: CoefficientKind,
    partition: &PartitionSpec,
    mesh: &Mesh2D,
    poisson: f64,
) -> Result<CoefficientField> {
    if partition.element_owner.len() != mesh.n_elements() {
        return Err(GeneoError::UnassignedElement {
            element: partition.element_owner.len().min(mesh.n_elements()),
        });
    }
    if !(poisson > 0.0 && poisson < 0.5) {
        return Err(GeneoError::InvalidConfig {
            field: "poisson_ratio".into(),
            message: format!("{poisson} not in (0, 0.5)"),
        });
    }
    let young = (0..mesh.n_elements())
        .map(|e| {
            let owner = partition.element_owner[e];
            let mut ym = if (owner + 1) % 2 == 1 { SOFT } else { HARD };
            if kind == CoefficientKind::WithLayers && in_layer(mesh.barycenter(e)[1]) {
                ym += LAYER;
            }
            ym
        })
        .collect();
    Ok(CoefficientField { young, poisson })
}

/// Element stiffness in the local order (u_x0, u_y0, u_x1, u_y1, u_x2, u_y2)
/// and the element area.
pub fn element_stiffness(p: [[f64; 2]; 3], mu: f64, lam: f64) -> ([[f64; 6]; 6], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    let mut gx = [0.0; 3];
    let mut gy = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        gx[i] = (p[j][1] - p[k][1]) / det;
        gy[i] = (p[k][0] - p[j][0]) / det;
    }
    // strain (ε_xx, ε_yy, γ_xy) = B u
    let mut bm = [[0.0; 6]; 3];
    for i in 0..3 {
        bm[0][2 * i] = gx[i];
        bm[1][2 * i + 1] = gy[i];
        bm[2][2 * i] = gy[i];
        bm[2][2 * i + 1] = gx[i];
    }
    let d = [[2.0 * mu + lam, lam, 0.0], [lam, 2.0 * mu + lam, 0.0], [0.0, 0.0, mu]];
    let mut k = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            let mut acc = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    acc += bm[r][a] * d[r][c] * bm[c][b];
                }
            }
            k[a][b] = area * acc;
        }
    }
    (k, area)
}

/// Assembled system with Dirichlet DOFs eliminated.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub mesh: Mesh2D,
    pub field: CoefficientField,
    pub dofs: DofMap,
    pub a: SparseSymMatrix,
    pub b: Vec<f64>,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Direct solve of A x = b.
    pub fn reference_solution(&self) -> Result<Vec<f64>> {
        Ok(SkylineCholesky::new(&self.a)?.solve(&self.b))
    }

    /// Global DOFs of element `e` in local order; `None` for Dirichlet.
    pub fn element_dofs(&self, e: usize) -> [Option<usize>; 6] {
        element_dofs(&self.mesh, &self.dofs, e)
    }
}

fn element_dofs(mesh: &Mesh2D, dofs: &DofMap, e: usize) -> [Option<usize>; 6] {
    let mut out = [None; 6];
    for (i, &v) in mesh.triangles[e].iter().enumerate() {
        if let Some([dx, dy]) = dofs.vertex(v) {
            out[2 * i] = Some(dx);
            out[2 * i + 1] = Some(dy);
        }
    }
    out
}

fn element_points(mesh: &Mesh2D, e: usize) -> [[f64; 2]; 3] {
    let t = mesh.triangles[e];
    [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]
}

fn assemble_elements(
    mesh: &Mesh2D,
    field: &CoefficientField,
    dofs: &DofMap,
    elements: impl Iterator<Item = usize>,
    local_of: impl Fn(usize) -> usize,
    dim: usize,
    mut rhs: Option<&mut Vec<f64>>,
) -> SparseSymMatrix {
    let mut builder = TripletBuilder::with_capacity(dim, 36 * 2 * mesh.n_elements());
    for e in elements {
        let (mu, lam) = field.lame(e);
        let (k, area) = element_stiffness(element_points(mesh, e), mu, lam);
        let ed = element_dofs(mesh, dofs, e);
        for a in 0..6 {
            let Some(ga) = ed[a] else { continue };
            for b in 0..6 {
                if let Some(gb) = ed[b] {
                    builder.add(local_of(ga), local_of(gb), k[a][b]);
                }
            }
            if a % 2 == 1 {
                if let Some(r) = rhs.as_deref_mut() {
                    r[local_of(ga)] += area / 3.0;
                }
            }
        }
    }
    builder.build()
}

/// Global stiffness matrix and load vector.
pub fn assemble(mesh: &Mesh2D, field: &CoefficientField) -> Result<ProblemInstance> {
    if field.young.len() != mesh.n_elements() {
        return Err(GeneoError::UnassignedElement {
            element: field.young.len().min(mesh.n_elements()),
        });
    }
    if !mesh.dirichlet.iter().any(|&d| d) {
        return Err(GeneoError::SingularAfterBC);
    }
    let dofs = DofMap::new(mesh);
    let n = dofs.n_dofs();
    let mut b = vec![0.0; n];
    let a = assemble_elements(mesh, field, &dofs, 0..mesh.n_elements(), |g| g, n, Some(&mut b));
    Ok(ProblemInstance {
        mesh: mesh.clone(),
        field: field.clone(),
        dofs,
        a,
        b,
    })
}

/// Neumann matrices A_Neu^s assembled over the elements owned by each
/// subdomain, in the local numbering of its restriction map.
pub fn assemble_local_neumann(
    problem: &ProblemInstance,
    partition: &PartitionSpec,
    restrictions: &[RestrictionMap],
) -> Result<Vec<SparseSymMatrix>> {
    let mesh = &problem.mesh;
    if partition.element_owner.len() != mesh.n_elements() {
        return Err(GeneoError::UnassignedElement {
            element: partition.element_owner.len().min(mesh.n_elements()),
        });
    }
    let n = problem.n();
    let mut out = Vec::with_capacity(restrictions.len());
    let mut local = vec![usize::MAX; n];
    for (s, r) in restrictions.iter().enumerate() {
        for (l, &g) in r.global_index.iter().enumerate() {
            local[g] = l;
        }
        let elems = (0..mesh.n_elements()).filter(|&e| partition.element_owner[e] == s);
        let m = assemble_elements(mesh, &problem.field, &problem.dofs, elems, |g| local[g], r.len(), None);
        for &g in &r.global_index {
            local[g] = usize::MAX;
        }
        out.push(m);
    }
    Ok(out)
}

/// Rigid body modes (two translations, one rotation) restricted to a set of
/// global DOFs.
pub fn rigid_body_modes(problem: &ProblemInstance, global_dofs: &[usize]) -> crate::linalg::DenseMatrix {
    let mut coords = vec![[0.0; 2]; problem.n()];
    let mut comp = vec![0usize; problem.n()];
    for v in 0..problem.mesh.n_vertices() {
        if let Some([dx, dy]) = problem.dofs.vertex(v) {
            coords[dx] = problem.mesh.vertices[v];
            coords[dy] = problem.mesh.vertices[v];
            comp[dy] = 1;
        }
    }
    crate::linalg::DenseMatrix::from_fn(global_dofs.len(), 3, |l, c| {
        let g = global_dofs[l];
        let [x, y] = coords[g];
        match (c, comp[g]) {
            (0, 0) | (1, 1) => 1.0,
            (2, 0) => -y,
            (2, 1) => x,
            _ => 0.0,
        }
    })
}
