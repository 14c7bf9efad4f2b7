//! Scott–Vogelius `P2 / P1dc` discretization on the barycentrically refined
//! fine mesh: dof tables, assembly of the Stokes forms, the fine reference
//! solve and error norms.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::MeshHierarchy;
use crate::quadrature::triangle_rule;
use crate::solver::{SaddleFactor, SolverOptions};
use crate::sparse::{DenseColumns, SparseOperator, Triplet};

/// Quadrature degree used for source terms.
pub const SOURCE_QUAD_DEGREE: usize = 8;

const NO_DOF: usize = usize::MAX;

/// Piecewise-constant viscosity `nu` and damping `sigma` on the fine mesh.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seed: Option<u64>,
    pub eps_level: Option<usize>,
    pub description: String,
}

impl CoefficientField {
    pub fn constant(n_fine: usize, nu: f64, sigma: f64) -> Self {
        CoefficientField {
            nu: vec![nu; n_fine],
            sigma: vec![sigma; n_fine],
            seed: None,
            eps_level: None,
            description: format!("constant nu = {nu}, sigma = {sigma}"),
        }
    }

    pub fn validate(&self, n_fine: usize) -> Result<()> {
        if self.nu.len() != n_fine || self.sigma.len() != n_fine {
            return Err(Error::validation(format!(
                "coefficient defined on {} triangles, mesh has {n_fine}",
                self.nu.len()
            )));
        }
        if let Some(t) = self.nu.iter().position(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::validation(format!("nu = {} on fine triangle {t} is not positive", self.nu[t])));
        }
        if let Some(t) = self.sigma.iter().position(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::validation(format!("sigma = {} on fine triangle {t} is negative", self.sigma[t])));
        }
        Ok(())
    }

    pub fn nu_range(&self) -> (f64, f64) {
        self.nu.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }
}

/// Geometry of one fine triangle needed for `P2` evaluation.
#[derive(Clone, Copy, Debug)]
pub struct TriangleGeometry {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let grad_lambda = [
            [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
            [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
            [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
        ];
        TriangleGeometry {
            vertices,
            area: 0.5 * two_area.abs(),
            grad_lambda,
        }
    }

    pub fn map(&self, st: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.vertices;
        [
            a[0] + st[0] * (b[0] - a[0]) + st[1] * (c[0] - a[0]),
            a[1] + st[0] * (b[1] - a[1]) + st[1] * (c[1] - a[1]),
        ]
    }

    /// Quadrature `(point, barycentric coordinates, physical weight)`.
    pub fn quadrature(&self, degree: usize) -> impl Iterator<Item = ([f64; 2], [f64; 3], f64)> + '_ {
        let rule = triangle_rule(degree);
        rule.points.iter().zip(&rule.weights).map(move |(&st, &w)| {
            (self.map(st), [1.0 - st[0] - st[1], st[0], st[1]], 2.0 * self.area * w)
        })
    }
}

/// Values of the six `P2` basis functions (vertices 0, 1, 2, then edges
/// 01, 12, 20) at barycentric coordinates `l`.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients of the six `P2` basis functions.
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        for c in 0..2 {
            out[i][c] = (4.0 * l[i] - 1.0) * g[i][c];
        }
    }
    for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        for c in 0..2 {
            out[3 + k][c] = 4.0 * (l[i] * g[j][c] + l[j] * g[i][c]);
        }
    }
    out
}

/// Velocity and pressure dof tables on the fine mesh of a hierarchy.
///
/// `P2` nodes are the fine vertices followed by the fine edges. Velocity dof
/// `2 i + c` is component `c` at the `i`-th interior node; pressure dof
/// `3 t + k` is the nodal value at local vertex `k` of fine triangle `t`.
#[derive(Clone, Debug)]
pub struct FineSpace {
    hierarchy: MeshHierarchy,
    node_dof: Vec<usize>,
    interior_nodes: Vec<usize>,
    geometry: Vec<TriangleGeometry>,
}

impl FineSpace {
    pub fn new(hierarchy: MeshHierarchy) -> Self {
        let fine = hierarchy.fine();
        let nv = fine.num_vertices();
        let mut node_dof = vec![NO_DOF; nv + fine.num_faces()];
        let mut interior_nodes = Vec::new();
        for v in 0..nv {
            if !fine.is_boundary_vertex(v) {
                node_dof[v] = interior_nodes.len();
                interior_nodes.push(v);
            }
        }
        for (e, face) in fine.faces().iter().enumerate() {
            if face.interior {
                node_dof[nv + e] = interior_nodes.len();
                interior_nodes.push(nv + e);
            }
        }
        let geometry = (0..fine.num_triangles())
            .map(|t| TriangleGeometry::new(fine.triangle_coords(t)))
            .collect();
        FineSpace {
            hierarchy,
            node_dof,
            interior_nodes,
            geometry,
        }
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hierarchy
    }

    pub fn num_fine_triangles(&self) -> usize {
        self.geometry.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_dof.len()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.interior_nodes.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        3 * self.geometry.len()
    }

    pub fn geometry(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    /// Global `P2` node indices of fine triangle `t` in local order.
    pub fn local_nodes(&self, t: usize) -> [usize; 6] {
        let fine = self.hierarchy.fine();
        let nv = fine.num_vertices();
        let tri = fine.triangles()[t];
        let tf = fine.triangle_faces(t);
        [tri[0], tri[1], tri[2], nv + tf[2], nv + tf[0], nv + tf[1]]
    }

    /// Velocity dof of component `c` at `node`, `None` on the boundary.
    pub fn velocity_dof(&self, node: usize, c: usize) -> Option<usize> {
        let d = self.node_dof[node];
        (d != NO_DOF).then(|| 2 * d + c)
    }

    /// Twelve local velocity dofs (node-major, component-minor).
    pub fn local_velocity_dofs(&self, t: usize) -> [Option<usize>; 12] {
        let nodes = self.local_nodes(t);
        let mut out = [None; 12];
        for (i, &n) in nodes.iter().enumerate() {
            out[2 * i] = self.velocity_dof(n, 0);
            out[2 * i + 1] = self.velocity_dof(n, 1);
        }
        out
    }

    /// Node of velocity dof `d`.
    pub fn dof_node(&self, d: usize) -> usize {
        self.interior_nodes[d / 2]
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let fine = self.hierarchy.fine();
        let nv = fine.num_vertices();
        if node < nv {
            fine.vertices()[node]
        } else {
            let f = &fine.faces()[node - nv];
            let a = fine.vertices()[f.vertices[0]];
            let b = fine.vertices()[f.vertices[1]];
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }
    }

    /// Nodal interpolation of a vector field (boundary values dropped).
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.num_velocity_dofs()];
        for (i, &node) in self.interior_nodes.iter().enumerate() {
            let val = f(self.node_coords(node));
            v[2 * i] = val[0];
            v[2 * i + 1] = val[1];
        }
        v
    }

    /// Velocity of `v` at barycentric point `l` of fine triangle `t`.
    pub fn eval_velocity(&self, v: &[f64], t: usize, l: [f64; 3]) -> [f64; 2] {
        let phi = p2_values(l);
        let dofs = self.local_velocity_dofs(t);
        let mut out = [0.0; 2];
        for i in 0..6 {
            for c in 0..2 {
                if let Some(d) = dofs[2 * i + c] {
                    out[c] += phi[i] * v[d];
                }
            }
        }
        out
    }

    /// Velocity gradient `[du_c/dx_k]` of `v` at `l` in fine triangle `t`.
    pub fn eval_gradient(&self, v: &[f64], t: usize, l: [f64; 3]) -> [[f64; 2]; 2] {
        let g = p2_gradients(l, &self.geometry[t].grad_lambda);
        let dofs = self.local_velocity_dofs(t);
        let mut out = [[0.0; 2]; 2];
        for i in 0..6 {
            for c in 0..2 {
                if let Some(d) = dofs[2 * i + c] {
                    out[c][0] += g[i][0] * v[d];
                    out[c][1] += g[i][1] * v[d];
                }
            }
        }
        out
    }

    pub fn eval_pressure(&self, p: &[f64], t: usize, l: [f64; 3]) -> f64 {
        (0..3).map(|k| p[3 * t + k] * l[k]).sum()
    }

    /// `[int_K q]` for every coarse element `K`: one row per coarse element,
    /// one column per pressure dof.
    pub fn coarse_mean_matrix(&self) -> SparseOperator {
        let mut t = Vec::with_capacity(self.num_pressure_dofs());
        for (ft, g) in self.geometry.iter().enumerate() {
            let k = self.hierarchy.coarse_parent(ft);
            for j in 0..3 {
                t.push((k, 3 * ft + j, g.area / 3.0));
            }
        }
        SparseOperator::from_triplets(self.hierarchy.coarse().num_triangles(), self.num_pressure_dofs(), &t)
    }

    /// `int_Omega q` for every pressure dof.
    pub fn pressure_integrals(&self) -> Vec<f64> {
        self.geometry.iter().flat_map(|g| [g.area / 3.0; 3]).collect()
    }

    /// `L^2` norm of a fine velocity field.
    pub fn velocity_l2(&self, v: &[f64]) -> f64 {
        self.geometry
            .iter()
            .enumerate()
            .map(|(t, g)| {
                g.quadrature(4)
                    .map(|(_, l, w)| {
                        let u = self.eval_velocity(v, t, l);
                        w * (u[0] * u[0] + u[1] * u[1])
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn local_velocity_matrices(g: &TriangleGeometry) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
    let mut k = [[0.0; 6]; 6];
    let mut m = [[0.0; 6]; 6];
    for (_, l, w) in g.quadrature(4) {
        let phi = p2_values(l);
        let grad = p2_gradients(l, &g.grad_lambda);
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] += w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                m[i][j] += w * phi[i] * phi[j];
            }
        }
    }
    (k, m)
}

/// `-int lambda_k d_c phi_i` for local pressure `k`, velocity dof `(i, c)`.
fn local_divergence_matrix(g: &TriangleGeometry) -> [[f64; 12]; 3] {
    let mut b = [[0.0; 12]; 3];
    for (_, l, w) in g.quadrature(2) {
        let grad = p2_gradients(l, &g.grad_lambda);
        for k in 0..3 {
            for i in 0..6 {
                for c in 0..2 {
                    b[k][2 * i + c] -= w * l[k] * grad[i][c];
                }
            }
        }
    }
    b
}

fn collect_triplets(n: usize, f: impl Fn(usize, &mut Vec<Triplet>) + Sync) -> Vec<Triplet> {
    const CHUNK: usize = 1024;
    let chunks: Vec<Vec<Triplet>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for t in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(t, &mut out);
            }
            out
        })
        .collect();
    chunks.concat()
}

/// Matrix of `(nu grad u, grad v) + (sigma u, v)` on the zero-boundary space.
pub fn assemble_a(space: &FineSpace, coeff: &CoefficientField) -> Result<SparseOperator> {
    coeff.validate(space.num_fine_triangles())?;
    Ok(assemble_velocity_form(space, &coeff.nu, &coeff.sigma))
}

/// Same as [`assemble_a`] with per-triangle weights that may vanish.
pub fn assemble_velocity_form(space: &FineSpace, nu: &[f64], sigma: &[f64]) -> SparseOperator {
    let triplets = collect_triplets(space.num_fine_triangles(), |t, out| {
        let (k, m) = local_velocity_matrices(space.geometry(t));
        let dofs = space.local_velocity_dofs(t);
        for i in 0..6 {
            for j in 0..6 {
                let v = nu[t] * k[i][j] + sigma[t] * m[i][j];
                for c in 0..2 {
                    if let (Some(a), Some(b)) = (dofs[2 * i + c], dofs[2 * j + c]) {
                        out.push((a, b, v));
                    }
                }
            }
        }
    });
    let n = space.num_velocity_dofs();
    SparseOperator::from_triplets(n, n, &triplets).with_symmetry(true)
}

/// Vector `P2` stiffness matrix with unit viscosity (the `H^1` seminorm).
pub fn stiffness_matrix(space: &FineSpace) -> SparseOperator {
    let n = space.num_fine_triangles();
    assemble_velocity_form(space, &vec![1.0; n], &vec![0.0; n])
}

/// Vector `P2` mass matrix.
pub fn velocity_mass_matrix(space: &FineSpace) -> SparseOperator {
    let n = space.num_fine_triangles();
    assemble_velocity_form(space, &vec![0.0; n], &vec![1.0; n])
}

/// Block-diagonal `P1dc` mass matrix.
pub fn pressure_mass_matrix(space: &FineSpace) -> SparseOperator {
    let mut t = Vec::with_capacity(9 * space.num_fine_triangles());
    for ft in 0..space.num_fine_triangles() {
        let a = space.geometry(ft).area;
        for i in 0..3 {
            for j in 0..3 {
                t.push((3 * ft + i, 3 * ft + j, if i == j { a / 6.0 } else { a / 12.0 }));
            }
        }
    }
    let n = space.num_pressure_dofs();
    SparseOperator::from_triplets(n, n, &t).with_symmetry(true)
}

/// Matrix of `b(u, q) = -(q, div u)`: rows are pressure dofs, columns
/// velocity dofs.
pub fn assemble_b(space: &FineSpace) -> SparseOperator {
    let triplets = collect_triplets(space.num_fine_triangles(), |t, out| {
        let b = local_divergence_matrix(space.geometry(t));
        let dofs = space.local_velocity_dofs(t);
        for (k, row) in b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if let Some(d) = dofs[j] {
                    out.push((3 * t + k, d, v));
                }
            }
        }
    });
    SparseOperator::from_triplets(space.num_pressure_dofs(), space.num_velocity_dofs(), &triplets)
}

/// `(f, v)` for every velocity dof.
pub fn load_vector(space: &FineSpace, f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync)) -> Vec<f64> {
    let mut out = vec![0.0; space.num_velocity_dofs()];
    for t in 0..space.num_fine_triangles() {
        let dofs = space.local_velocity_dofs(t);
        for (x, l, w) in space.geometry(t).quadrature(SOURCE_QUAD_DEGREE) {
            let phi = p2_values(l);
            let fx = f(x);
            for i in 0..6 {
                for c in 0..2 {
                    if let Some(d) = dofs[2 * i + c] {
                        out[d] += w * phi[i] * fx[c];
                    }
                }
            }
        }
    }
    out
}

/// `A_T v`: the form `a` restricted to the fine triangles `tris`, applied to
/// `v`, added into `out` with factor `alpha`.
pub fn apply_a_restricted(
    space: &FineSpace,
    coeff: &CoefficientField,
    tris: &[usize],
    v: &[f64],
    alpha: f64,
    out: &mut [f64],
) {
    for &t in tris {
        let (k, m) = local_velocity_matrices(space.geometry(t));
        let dofs = space.local_velocity_dofs(t);
        for i in 0..6 {
            for c in 0..2 {
                let Some(a) = dofs[2 * i + c] else { continue };
                let mut s = 0.0;
                for j in 0..6 {
                    if let Some(b) = dofs[2 * j + c] {
                        s += (coeff.nu[t] * k[i][j] + coeff.sigma[t] * m[i][j]) * v[b];
                    }
                }
                out[a] += alpha * s;
            }
        }
    }
}

/// `B_T v`, added into the pressure vector `out` with factor `alpha`.
pub fn apply_b_restricted(space: &FineSpace, tris: &[usize], v: &[f64], alpha: f64, out: &mut [f64]) {
    for &t in tris {
        let b = local_divergence_matrix(space.geometry(t));
        let dofs = space.local_velocity_dofs(t);
        for (k, row) in b.iter().enumerate() {
            let s: f64 = row
                .iter()
                .zip(dofs.iter())
                .filter_map(|(&x, d)| d.map(|d| x * v[d]))
                .sum();
            out[3 * t + k] += alpha * s;
        }
    }
}

/// Fine reference solution.
#[derive(Clone, Debug)]
pub struct FineSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

/// Builds the symmetric saddle matrix
/// `[A B^T 0; B 0 e; 0 e^T 0]` where `e` holds pressure integrals, together
/// with the expected pivot signs.
fn stokes_saddle(a: &SparseOperator, b: &SparseOperator, e: &[f64]) -> (SparseOperator, Vec<i8>) {
    let nu = a.nrows();
    let np = b.nrows();
    let n = nu + np + 1;
    let mut t: Vec<Triplet> = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 2 * np);
    t.extend(a.iter());
    for (i, j, v) in b.iter() {
        t.push((nu + i, j, v));
        t.push((j, nu + i, v));
    }
    for (i, &v) in e.iter().enumerate() {
        t.push((nu + i, n - 1, v));
        t.push((n - 1, nu + i, v));
    }
    let mut signs = vec![1i8; nu];
    signs.extend(std::iter::repeat_n(-1i8, np));
    signs.push(1);
    (SparseOperator::from_triplets(n, n, &t).with_symmetry(true), signs)
}

/// Factorization of the global Stokes system with a mean-zero pressure row.
pub struct StokesSolver {
    nu: usize,
    np: usize,
    factor: SaddleFactor,
}

impl StokesSolver {
    pub fn new(space: &FineSpace, a: &SparseOperator, b: &SparseOperator) -> Result<Self> {
        let (k, signs) = stokes_saddle(a, b, &space.pressure_integrals());
        let factor = SaddleFactor::new(&k, &signs, SolverOptions::default())?;
        Ok(StokesSolver {
            nu: a.nrows(),
            np: b.nrows(),
            factor,
        })
    }

    /// Solves with momentum right-hand side `f` and mass right-hand side `g`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<FineSolution> {
        let mut rhs = vec![0.0; self.nu + self.np + 1];
        rhs[..self.nu].copy_from_slice(f);
        rhs[self.nu..self.nu + self.np].copy_from_slice(g);
        let x = self.factor.solve(&rhs)?;
        Ok(FineSolution {
            u: x[..self.nu].to_vec(),
            p: x[self.nu..self.nu + self.np].to_vec(),
        })
    }

    pub fn factor(&self) -> &SaddleFactor {
        &self.factor
    }
}

/// Solves the fine Stokes problem with source `f` and `int p = 0`.
pub fn solve_reference(
    space: &FineSpace,
    coeff: &CoefficientField,
    f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
) -> Result<FineSolution> {
    let a = assemble_a(space, coeff)?;
    let b = assemble_b(space);
    let solver = StokesSolver::new(space, &a, &b)?;
    solver.solve(&load_vector(space, f), &vec![0.0; space.num_pressure_dofs()])
}

/// `(||grad(u_ref - u_ms)||, ||u_ref - u_ms||)` using precomputed unit
/// stiffness and mass matrices.
pub fn error_norms(
    stiffness: &SparseOperator,
    mass: &SparseOperator,
    u_ref: &[f64],
    u_ms: &[f64],
) -> Result<(f64, f64)> {
    if u_ref.len() != u_ms.len() || u_ref.len() != stiffness.ncols() || u_ref.len() != mass.ncols() {
        return Err(Error::validation(format!(
            "velocity layouts differ: {} vs {} dofs",
            u_ref.len(),
            u_ms.len()
        )));
    }
    let e: Vec<f64> = u_ref.iter().zip(u_ms).map(|(a, b)| a - b).collect();
    let h1 = stiffness.bilinear(&e, &e).max(0.0).sqrt();
    let l2 = mass.bilinear(&e, &e).max(0.0).sqrt();
    Ok((h1, l2))
}

/// `sup lambda` of `M v = lambda K v` over velocities on one coarse element
/// `t` (no boundary condition) with vanishing normal flux through each of
/// its three faces, divided by `H^2`.
pub fn local_poincare_constant(space: &FineSpace, t: usize) -> Result<f64> {
    let h = space.hierarchy();
    let coarse = h.coarse();
    let children = h.fine_children(t);
    // local numbering of all P2 nodes of the children
    let mut local = std::collections::BTreeMap::new();
    for &ft in children {
        for n in space.local_nodes(ft) {
            let len = local.len();
            local.entry(n).or_insert(len);
        }
    }
    let nn = local.len();
    let nd = 2 * nn;
    let mut k = DMatrix::<f64>::zeros(nd, nd);
    let mut m = DMatrix::<f64>::zeros(nd, nd);
    for &ft in children {
        let (kl, ml) = local_velocity_matrices(space.geometry(ft));
        let nodes = space.local_nodes(ft).map(|n| local[&n]);
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    k[(2 * nodes[i] + c, 2 * nodes[j] + c)] += kl[i][j];
                    m[(2 * nodes[i] + c, 2 * nodes[j] + c)] += ml[i][j];
                }
            }
        }
    }
    // normal flux through each coarse face: fine edges of the children that
    // lie on the face; Simpson is exact for the quadratic trace
    let mut c = DMatrix::<f64>::zeros(3, nd);
    let fine = h.fine();
    let nv = fine.num_vertices();
    for (row, &cf) in coarse.triangle_faces(t).iter().enumerate() {
        let face = &coarse.faces()[cf];
        let a = coarse.vertices()[face.vertices[0]];
        let b = coarse.vertices()[face.vertices[1]];
        let on_face = |x: [f64; 2]| {
            let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
            cross.abs() <= 1e-12 * face.length
                && (x[0] - a[0]) * (b[0] - a[0]) + (x[1] - a[1]) * (b[1] - a[1]) >= -1e-12
                && (x[0] - b[0]) * (a[0] - b[0]) + (x[1] - b[1]) * (a[1] - b[1]) >= -1e-12
        };
        for &ft in children {
            for e in fine.triangle_faces(ft) {
                let fe = &fine.faces()[e];
                let p = fine.vertices()[fe.vertices[0]];
                let q = fine.vertices()[fe.vertices[1]];
                if !(on_face(p) && on_face(q)) {
                    continue;
                }
                let weights = [
                    (fe.vertices[0], fe.length / 6.0),
                    (fe.vertices[1], fe.length / 6.0),
                    (nv + e, 4.0 * fe.length / 6.0),
                ];
                for (node, w) in weights {
                    let ln = local[&node];
                    for comp in 0..2 {
                        c[(row, 2 * ln + comp)] += w * face.normal[comp];
                    }
                }
            }
        }
    }
    // orthonormal basis of ker C from the SVD of C^T
    let svd = c.transpose().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    if svd.singular_values.iter().any(|&s| s <= 1e-12) {
        return Err(Error::structure(format!("face fluxes of coarse element {t} are dependent")));
    }
    let projector = DMatrix::<f64>::identity(nd, nd) - &u * u.transpose();
    let eig = projector.symmetric_eigen();
    let keep: Vec<usize> = (0..nd).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let z = eig.eigenvectors.select_columns(&keep);
    let kz = z.transpose() * &k * &z;
    let mz = z.transpose() * &m * &z;
    let chol = kz
        .cholesky()
        .ok_or_else(|| Error::solver("stiffness matrix is singular on the flux-free subspace"))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::solver("triangular inverse failed"))?;
    let sym = &l_inv * mz * l_inv.transpose();
    let lambda = sym.symmetric_eigenvalues().max();
    let hh = h.coarse_size();
    Ok(lambda / (hh * hh))
}

/// Estimate of the discrete inf-sup constant `beta` with
/// `beta^2 = min (q^T S q) / (q^T M_p q)` over mean-zero pressures, where
/// `S = B A^{-1} B^T`. Uses block inverse iteration with Rayleigh-Ritz.
pub fn inf_sup_constant(space: &FineSpace, block: usize, iterations: usize) -> Result<f64> {
    let a = stiffness_matrix(space);
    let b = assemble_b(space);
    let mp = pressure_mass_matrix(space);
    let solver = StokesSolver::new(space, &a, &b)?;
    let np = space.num_pressure_dofs();
    let nu = space.num_velocity_dofs();
    let weights = space.pressure_integrals();
    let total: f64 = weights.iter().sum();
    let mut x = DenseColumns::zeros(np, block);
    for j in 0..block {
        let col = x.col_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            // deterministic pseudo-random start
            let s = ((i as u64 + 1) * 2654435761 + (j as u64 + 1) * 40503) % 1000;
            *v = s as f64 / 1000.0 - 0.5;
        }
        let mean: f64 = col.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() / total;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    let mut lambda_min = f64::INFINITY;
    for _ in 0..iterations {
        // y = S^{-1} M_p x via the saddle system
        let mut ys = Vec::with_capacity(block);
        for j in 0..block {
            let g = mp.matvec(x.col(j));
            let g: Vec<f64> = g.iter().map(|v| -v).collect();
            let sol = solver.solve(&vec![0.0; nu], &g)?;
            ys.push(sol.p);
        }
        let y = DMatrix::from_fn(np, block, |i, j| ys[j][i]);
        let mut my = DMatrix::<f64>::zeros(np, block);
        for j in 0..block {
            let col = mp.matvec(&ys[j]);
            my.set_column(j, &DVector::from_vec(col));
        }
        let ymy = y.transpose() * &my;
        let mpx = {
            let mut out = DMatrix::<f64>::zeros(np, block);
            for j in 0..block {
                out.set_column(j, &DVector::from_vec(mp.matvec(x.col(j))));
            }
            out
        };
        // y^T S y = y^T M_p x
        let ysy = y.transpose() * mpx;
        let ysy = 0.5 * (&ysy + ysy.transpose());
        let chol = ymy
            .cholesky()
            .ok_or_else(|| Error::solver("Rayleigh-Ritz basis degenerated"))?;
        let l_inv = chol.l().try_inverse().expect("triangular inverse");
        let sym = &l_inv * ysy * l_inv.transpose();
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        lambda_min = eig.eigenvalues[order[0]];
        let coeffs = l_inv.transpose() * &eig.eigenvectors;
        let next = &y * coeffs;
        for (jj, &j) in order.iter().enumerate() {
            let col = next.column(j);
            let norm = col.norm();
            x.col_mut(jj).iter_mut().zip(col.iter()).for_each(|(d, s)| *d = s / norm);
        }
    }
    Ok(lambda_min.max(0.0).sqrt())
}
