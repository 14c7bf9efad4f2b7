//! Quantities of interest: the multiplier space, the constraint form `c`,
//! its one-element variants `c_T`, and the flux-based quasi-interpolant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{p2_values, FineSpace};
use crate::mesh::{MeshHierarchy, Patch};
use crate::polyspaces::{num_element_qois, num_face_qois, ElementPolyBasis, FacePolyBasis};
use crate::quadrature::line_rule;
use crate::sparse::{SparseOperator, Triplet};

/// Minimum `|det [n_1; n_2]|` of the face pair selected at a coarse node.
pub const MIN_PAIR_DET: f64 = 0.1;

/// Which quantity a multiplier dof stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QoiIndex {
    /// Normal flux against the `j`-th face polynomial (0-based).
    Face { face: usize, j: usize },
    /// Moment against the `k`-th complement basis function (0-based).
    Element { element: usize, k: usize },
}

/// Coefficients of `(mu, bold mu)`: `J` per interior coarse face followed
/// by `K` per coarse element.
#[derive(Clone, Debug)]
pub struct MultiplierSpace {
    m: usize,
    h: f64,
    interior_faces: Vec<usize>,
    face_slot: Vec<Option<usize>>,
    face_bases: Vec<FacePolyBasis>,
    element_bases: Vec<ElementPolyBasis>,
    element_grams: Vec<DMatrix<f64>>,
}

impl MultiplierSpace {
    pub fn new(hierarchy: &MeshHierarchy, m: usize) -> Self {
        let coarse = hierarchy.coarse();
        let interior_faces: Vec<usize> = coarse.interior_faces().collect();
        let mut face_slot = vec![None; coarse.num_faces()];
        for (s, &f) in interior_faces.iter().enumerate() {
            face_slot[f] = Some(s);
        }
        let face_bases = interior_faces.iter().map(|&f| FacePolyBasis::new(coarse, f, m)).collect();
        let element_bases: Vec<ElementPolyBasis> = (0..coarse.num_triangles())
            .map(|t| ElementPolyBasis::new(coarse.triangle_coords(t), t, m))
            .collect();
        let element_grams = element_bases
            .iter()
            .map(|b| {
                let k = b.dim_q();
                DMatrix::from_fn(k, k, |i, j| b.l2_inner(&b.q_basis[i], &b.q_basis[j]))
            })
            .collect();
        MultiplierSpace {
            m,
            h: hierarchy.coarse_size(),
            interior_faces,
            face_slot,
            face_bases,
            element_bases,
            element_grams,
        }
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn coarse_size(&self) -> f64 {
        self.h
    }

    pub fn num_face_qois(&self) -> usize {
        num_face_qois(self.m)
    }

    pub fn num_element_qois(&self) -> usize {
        num_element_qois(self.m)
    }

    pub fn interior_faces(&self) -> &[usize] {
        &self.interior_faces
    }

    pub fn num_elements(&self) -> usize {
        self.element_bases.len()
    }

    pub fn dim(&self) -> usize {
        self.num_face_qois() * self.interior_faces.len() + self.num_element_qois() * self.num_elements()
    }

    pub fn face_basis(&self, face: usize) -> Option<&FacePolyBasis> {
        self.face_slot[face].map(|s| &self.face_bases[s])
    }

    pub fn element_basis(&self, t: usize) -> &ElementPolyBasis {
        &self.element_bases[t]
    }

    /// `int_T p_{T,k} . p_{T,l}`.
    pub fn element_gram(&self, t: usize) -> &DMatrix<f64> {
        &self.element_grams[t]
    }

    /// Dof of a face quantity, `None` for boundary faces.
    pub fn face_dof(&self, face: usize, j: usize) -> Option<usize> {
        self.face_slot[face].map(|s| self.num_face_qois() * s + j)
    }

    pub fn element_dof(&self, t: usize, k: usize) -> usize {
        self.num_face_qois() * self.interior_faces.len() + self.num_element_qois() * t + k
    }

    pub fn index_of(&self, dof: usize) -> QoiIndex {
        let nf = self.num_face_qois() * self.interior_faces.len();
        if dof < nf {
            let j = self.num_face_qois();
            QoiIndex::Face {
                face: self.interior_faces[dof / j],
                j: dof % j,
            }
        } else {
            let k = self.num_element_qois();
            QoiIndex::Element {
                element: (dof - nf) / k,
                k: (dof - nf) % k,
            }
        }
    }

    pub fn dof_of(&self, index: QoiIndex) -> Option<usize> {
        match index {
            QoiIndex::Face { face, j } => self.face_dof(face, j),
            QoiIndex::Element { element, k } => Some(self.element_dof(element, k)),
        }
    }

    /// Multiplier dofs of `M_{H,T}^ell`: faces of `Sigma_T^ell` and all
    /// patch elements, sorted.
    pub fn patch_dofs(&self, patch: &Patch) -> Vec<usize> {
        let mut out = Vec::new();
        for &f in &patch.interior_faces {
            for j in 0..self.num_face_qois() {
                out.extend(self.face_dof(f, j));
            }
        }
        for &t in &patch.elements {
            for k in 0..self.num_element_qois() {
                out.push(self.element_dof(t, k));
            }
        }
        out.sort_unstable();
        out
    }

    /// `c(p_target, mu)` for the unit target of `dof`: the row of the
    /// block-diagonal target Gram matrix, as `(dof, value)` pairs.
    pub fn target_row(&self, dof: usize) -> Vec<(usize, f64)> {
        match self.index_of(dof) {
            QoiIndex::Face { face, j } => {
                let b = self.face_basis(face).expect("interior face");
                vec![(dof, self.h * b.gram_diagonal(j))]
            }
            QoiIndex::Element { element, k } => {
                let g = &self.element_grams[element];
                (0..g.ncols()).map(|l| (self.element_dof(element, l), g[(k, l)])).collect()
            }
        }
    }

    /// `||mu||^2_{M_H} = H ||mu||^2_Sigma + ||bold mu||^2_Omega`.
    pub fn norm_squared(&self, coeffs: &[f64]) -> f64 {
        let mut s = 0.0;
        let j = self.num_face_qois();
        for (slot, b) in self.face_bases.iter().enumerate() {
            for jj in 0..j {
                let c = coeffs[j * slot + jj];
                s += self.h * b.gram_diagonal(jj) * c * c;
            }
        }
        let k = self.num_element_qois();
        for t in 0..self.num_elements() {
            let c = DVector::from_fn(k, |i, _| coeffs[self.element_dof(t, i)]);
            s += c.dot(&(&self.element_grams[t] * &c));
        }
        s
    }

    /// Applies the inverse of the block-diagonal target Gram matrix.
    pub fn normalize(&self, qoi: &[f64]) -> Result<Vec<f64>> {
        let mut out = qoi.to_vec();
        let j = self.num_face_qois();
        for (slot, b) in self.face_bases.iter().enumerate() {
            for jj in 0..j {
                out[j * slot + jj] /= self.h * b.gram_diagonal(jj);
            }
        }
        let k = self.num_element_qois();
        if k > 0 {
            for t in 0..self.num_elements() {
                let chol = self.element_grams[t]
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::structure(format!("singular moment Gram matrix on element {t}")))?;
                let rhs = DVector::from_fn(k, |i, _| qoi[self.element_dof(t, i)]);
                let x = chol.solve(&rhs);
                for i in 0..k {
                    out[self.element_dof(t, i)] = x[i];
                }
            }
        }
        Ok(out)
    }
}

/// Fine edges lying on each coarse face.
pub fn coarse_face_fine_edges(h: &MeshHierarchy) -> Vec<Vec<usize>> {
    let coarse = h.coarse();
    let fine = h.fine();
    let mut out = vec![Vec::new(); coarse.num_faces()];
    for (e, fe) in fine.faces().iter().enumerate() {
        let p = fine.vertices()[fe.vertices[0]];
        let q = fine.vertices()[fe.vertices[1]];
        let k = h.coarse_parent(fe.triangles[0]);
        for cf in coarse.triangle_faces(k) {
            let f = &coarse.faces()[cf];
            let a = coarse.vertices()[f.vertices[0]];
            let b = coarse.vertices()[f.vertices[1]];
            let off = |x: [f64; 2]| ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])).abs() / f.length;
            if off(p) <= 1e-12 && off(q) <= 1e-12 {
                out[cf].push(e);
                break;
            }
        }
    }
    out
}

/// Weights `kappa_T|_F` per coarse element and local face (order of
/// `triangle_faces`).
#[derive(Clone, Debug)]
pub struct KappaTable {
    pub weights: Vec<[f64; 3]>,
}

impl KappaTable {
    /// `1/2` on both sides of every interior face.
    pub fn symmetric(h: &MeshHierarchy) -> Self {
        let coarse = h.coarse();
        let weights = (0..coarse.num_triangles())
            .map(|t| coarse.triangle_faces(t).map(|f| if coarse.faces()[f].interior { 0.5 } else { 0.0 }))
            .collect();
        KappaTable { weights }
    }

    pub fn validate(&self, h: &MeshHierarchy) -> Result<()> {
        let coarse = h.coarse();
        if self.weights.len() != coarse.num_triangles() {
            return Err(Error::validation("kappa table size does not match the coarse mesh"));
        }
        let mut sums = vec![0.0; coarse.num_faces()];
        for (t, w) in self.weights.iter().enumerate() {
            for (i, f) in coarse.triangle_faces(t).into_iter().enumerate() {
                if w[i] < 0.0 || !w[i].is_finite() {
                    return Err(Error::validation(format!("negative weight on element {t}")));
                }
                sums[f] += w[i];
            }
        }
        for f in coarse.interior_faces() {
            if (sums[f] - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!("weights on face {f} sum to {}", sums[f])));
            }
        }
        Ok(())
    }

    pub fn weight(&self, h: &MeshHierarchy, t: usize, face: usize) -> f64 {
        let faces = h.coarse().triangle_faces(t);
        faces.iter().position(|&f| f == face).map_or(0.0, |i| self.weights[t][i])
    }
}

/// The multiplier space together with the assembled matrix of `c`.
#[derive(Clone, Debug)]
pub struct QoiSystem {
    pub multipliers: MultiplierSpace,
    /// Rows: multiplier dofs; columns: fine velocity dofs.
    pub c: SparseOperator,
}

impl QoiSystem {
    pub fn new(space: &FineSpace, m: usize) -> Self {
        let multipliers = MultiplierSpace::new(space.hierarchy(), m);
        let c = assemble_c(space, &multipliers);
        QoiSystem { multipliers, c }
    }

    /// Raw QOIs `q_i(v) = c(v, e_i)`.
    pub fn qoi_of(&self, v: &[f64]) -> Vec<f64> {
        self.c.matvec(v)
    }

    /// QOIs measured in units of the targets.
    pub fn normalized_qoi_of(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.multipliers.normalize(&self.qoi_of(v))
    }

    /// `c_T(v, e_i)` for all multiplier dofs touched by element `t`.
    pub fn apply_c_t(&self, h: &MeshHierarchy, kappa: &KappaTable, t: usize, v: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for face in h.coarse().triangle_faces(t) {
            let w = kappa.weight(h, t, face);
            for j in 0..self.multipliers.num_face_qois() {
                if let Some(d) = self.multipliers.face_dof(face, j) {
                    out.push((d, w * row_dot(&self.c, d, v)));
                }
            }
        }
        for k in 0..self.multipliers.num_element_qois() {
            let d = self.multipliers.element_dof(t, k);
            out.push((d, row_dot(&self.c, d, v)));
        }
        out
    }
}

fn row_dot(a: &SparseOperator, i: usize, v: &[f64]) -> f64 {
    let (c, x) = a.row(i);
    c.iter().zip(x).map(|(&j, &a)| a * v[j]).sum()
}

fn face_row_triplets(space: &FineSpace, mult: &MultiplierSpace, edges: &[usize], face: usize, out: &mut Vec<Triplet>) {
    let Some(basis) = mult.face_basis(face) else { return };
    let fine = space.hierarchy().fine();
    let nv = fine.num_vertices();
    let normal = space.hierarchy().coarse().faces()[face].normal;
    let h = mult.coarse_size();
    let nj = basis.len();
    let rule = line_rule(mult.degree() + 2);
    let mut pj = vec![0.0; nj];
    for &e in edges {
        let fe = &fine.faces()[e];
        let a = fine.vertices()[fe.vertices[0]];
        let b = fine.vertices()[fe.vertices[1]];
        let nodes = [fe.vertices[0], fe.vertices[1], nv + e];
        let mut acc = [[0.0; 3]; 8];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            basis.values_at(basis.parameter(x), &mut pj);
            let trace = [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)];
            for j in 0..nj {
                for i in 0..3 {
                    acc[j][i] += w * fe.length * trace[i] * pj[j];
                }
            }
        }
        for j in 0..nj {
            let row = mult.face_dof(face, j).expect("interior face");
            for i in 0..3 {
                for c in 0..2 {
                    if let Some(d) = space.velocity_dof(nodes[i], c) {
                        out.push((row, d, h * normal[c] * acc[j][i]));
                    }
                }
            }
        }
    }
}

fn element_row_triplets(space: &FineSpace, mult: &MultiplierSpace, t: usize, out: &mut Vec<Triplet>) {
    let basis = mult.element_basis(t);
    let nk = basis.dim_q();
    if nk == 0 {
        return;
    }
    for &ft in space.hierarchy().fine_children(t) {
        let dofs = space.local_velocity_dofs(ft);
        let mut acc = vec![[0.0; 12]; nk];
        for (x, l, w) in space.geometry(ft).quadrature(mult.degree() + 2) {
            let phi = p2_values(l);
            let local = basis.frame.to_local(x);
            for (k, q) in basis.q_basis.iter().enumerate() {
                let qv = q.eval(local);
                for i in 0..6 {
                    for c in 0..2 {
                        acc[k][2 * i + c] += w * phi[i] * qv[c];
                    }
                }
            }
        }
        for (k, row) in acc.iter().enumerate() {
            let r = mult.element_dof(t, k);
            for (i, &v) in row.iter().enumerate() {
                if let Some(d) = dofs[i] {
                    out.push((r, d, v));
                }
            }
        }
    }
}

/// Matrix of `c(v, mu) = H int_Sigma (v.n) mu + int_Omega v . bold mu`.
pub fn assemble_c(space: &FineSpace, mult: &MultiplierSpace) -> SparseOperator {
    let h = space.hierarchy();
    let edges = coarse_face_fine_edges(h);
    let mut t = Vec::new();
    for &f in mult.interior_faces() {
        face_row_triplets(space, mult, &edges[f], f, &mut t);
    }
    for k in 0..mult.num_elements() {
        element_row_triplets(space, mult, k, &mut t);
    }
    SparseOperator::from_triplets(mult.dim(), space.num_velocity_dofs(), &t)
}

/// Matrix of the weighted one-element form
/// `c_T(v, mu) = H int_{dT} kappa_T (v.n) mu + int_T v . bold mu`.
pub fn assemble_c_t(space: &FineSpace, mult: &MultiplierSpace, t: usize, kappa: &KappaTable) -> Result<SparseOperator> {
    let h = space.hierarchy();
    kappa.validate(h)?;
    let edges = coarse_face_fine_edges(h);
    let mut out = Vec::new();
    for face in h.coarse().triangle_faces(t) {
        let w = kappa.weight(h, t, face);
        let mut rows = Vec::new();
        face_row_triplets(space, mult, &edges[face], face, &mut rows);
        out.extend(rows.into_iter().map(|(i, j, v)| (i, j, w * v)));
    }
    element_row_triplets(space, mult, t, &mut out);
    Ok(SparseOperator::from_triplets(mult.dim(), space.num_velocity_dofs(), &out))
}

/// Face pair and inverse normal matrix at one interior coarse node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRule {
    pub faces: [usize; 2],
    /// Inverse of `[n_1^T; n_2^T]`.
    pub inverse: [[f64; 2]; 2],
    pub det: f64,
}

/// Quasi-interpolation onto continuous piecewise-linear vector fields,
/// determined by average normal fluxes over interior coarse faces.
#[derive(Clone, Debug)]
pub struct QuasiInterpolant {
    rules: Vec<Option<NodeRule>>,
}

impl QuasiInterpolant {
    pub fn new(h: &MeshHierarchy) -> Result<Self> {
        let coarse = h.coarse();
        let mut rules = vec![None; coarse.num_vertices()];
        for z in coarse.interior_vertices() {
            let mut faces: Vec<usize> = coarse.vertex_faces(z).to_vec();
            faces.sort_unstable();
            let mut best: Option<(f64, [usize; 2])> = None;
            for (a, &fa) in faces.iter().enumerate() {
                for &fb in &faces[a + 1..] {
                    let na = coarse.faces()[fa].normal;
                    let nb = coarse.faces()[fb].normal;
                    let det = (na[0] * nb[1] - na[1] * nb[0]).abs();
                    if best.is_none_or(|(d, _)| det > d + 1e-12) {
                        best = Some((det, [fa, fb]));
                    }
                }
            }
            let Some((det, pair)) = best.filter(|(d, _)| *d >= MIN_PAIR_DET) else {
                return Err(Error::Construction(format!(
                    "no face pair with |det| >= {MIN_PAIR_DET} at coarse node {z}"
                )));
            };
            let n1 = coarse.faces()[pair[0]].normal;
            let n2 = coarse.faces()[pair[1]].normal;
            let d = n1[0] * n2[1] - n1[1] * n2[0];
            rules[z] = Some(NodeRule {
                faces: pair,
                inverse: [[n2[1] / d, -n1[1] / d], [-n2[0] / d, n1[0] / d]],
                det,
            });
        }
        Ok(QuasiInterpolant { rules })
    }

    pub fn rule(&self, z: usize) -> Option<&NodeRule> {
        self.rules[z].as_ref()
    }

    /// Nodal values from average normal fluxes `|F|^{-1} int_F v.n`.
    pub fn nodal_from_fluxes(&self, flux: impl Fn(usize) -> f64) -> Vec<[f64; 2]> {
        self.rules
            .iter()
            .map(|r| match r {
                None => [0.0, 0.0],
                Some(r) => {
                    let a = [flux(r.faces[0]), flux(r.faces[1])];
                    [
                        r.inverse[0][0] * a[0] + r.inverse[0][1] * a[1],
                        r.inverse[1][0] * a[0] + r.inverse[1][1] * a[1],
                    ]
                }
            })
            .collect()
    }

    /// Nodal values of `I_H v` for a fine velocity `v`.
    pub fn apply(&self, h: &MeshHierarchy, qoi: &QoiSystem, v: &[f64]) -> Vec<[f64; 2]> {
        let coarse = h.coarse();
        let hh = qoi.multipliers.coarse_size();
        self.nodal_from_fluxes(|f| match qoi.multipliers.face_dof(f, 0) {
            Some(d) => row_dot(&qoi.c, d, v) / (hh * coarse.faces()[f].length),
            None => 0.0,
        })
    }

    /// Nonzero nodal values `theta_z` of the coarse lift for the target
    /// `(face, j)`.
    pub fn coarse_nodal_lift(&self, face: usize, j: usize) -> Vec<(usize, [f64; 2])> {
        if j > 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (z, r) in self.rules.iter().enumerate() {
            if let Some(r) = r {
                if let Some(col) = r.faces.iter().position(|&f| f == face) {
                    out.push((z, [r.inverse[0][col], r.inverse[1][col]]));
                }
            }
        }
        out
    }
}

/// Fine `P2` representation of a coarse continuous `P1` field with nodal
/// values `nodal`, restricted to the fine triangles `tris` (all when `None`).
pub fn coarse_p1_to_fine(space: &FineSpace, nodal: &[[f64; 2]], tris: Option<&[usize]>) -> Vec<f64> {
    let h = space.hierarchy();
    let coarse = h.coarse();
    let mut out = vec![0.0; space.num_velocity_dofs()];
    let mut visit = |ft: usize| {
        let k = h.coarse_parent(ft);
        let tri = coarse.triangles()[k];
        for node in space.local_nodes(ft) {
            if space.velocity_dof(node, 0).is_none() {
                continue;
            }
            let l = coarse.barycentric_coords(k, space.node_coords(node));
            for c in 0..2 {
                let v: f64 = (0..3).map(|i| l[i] * nodal[tri[i]][c]).sum();
                out[space.velocity_dof(node, c).unwrap()] = v;
            }
        }
    };
    match tris {
        Some(ts) => ts.iter().copied().for_each(&mut visit),
        None => (0..space.num_fine_triangles()).for_each(&mut visit),
    }
    out
}

/// Nodal values as a sparse table over coarse vertices.
pub fn nodal_table(n: usize, entries: &[(usize, [f64; 2])]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; n];
    for &(z, v) in entries {
        out[z] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(m: usize) -> (FineSpace, QoiSystem) {
        let space = FineSpace::new(MeshHierarchy::new(1, 3, true).unwrap());
        let q = QoiSystem::new(&space, m);
        (space, q)
    }

    #[test]
    fn dimension_and_dofs() {
        let (space, q) = setup(1);
        let coarse = space.hierarchy().coarse();
        let nfi = coarse.interior_faces().count();
        assert_eq!(q.multipliers.dim(), 2 * nfi + coarse.num_triangles());
        for d in 0..q.multipliers.dim() {
            assert_eq!(q.multipliers.dof_of(q.multipliers.index_of(d)), Some(d));
        }
    }

    #[test]
    fn constant_flux() {
        let space = FineSpace::new(MeshHierarchy::new(2, 3, true).unwrap());
        let q = QoiSystem::new(&space, 0);
        let coarse = space.hierarchy().coarse();
        let f = coarse
            .interior_faces()
            .find(|&f| coarse.faces()[f].vertices.iter().all(|&w| !coarse.is_boundary_vertex(w)))
            .unwrap();
        let n = coarse.faces()[f].normal;
        let v = space.interpolate(|_| n);
        let d = q.multipliers.face_dof(f, 0).unwrap();
        let expect = q.multipliers.coarse_size() * coarse.faces()[f].length;
        assert!((q.qoi_of(&v)[d] - expect).abs() < 1e-13);
    }

    #[test]
    fn element_weights_sum_to_c() {
        let (space, q) = setup(1);
        let h = space.hierarchy();
        let kappa = KappaTable::symmetric(h);
        let mut total: Vec<Triplet> = Vec::new();
        for t in 0..h.coarse().num_triangles() {
            total.extend(assemble_c_t(&space, &q.multipliers, t, &kappa).unwrap().iter());
        }
        let sum = SparseOperator::from_triplets(q.c.nrows(), q.c.ncols(), &total);
        for (i, j, v) in q.c.iter() {
            assert!((sum.get(i, j) - v).abs() < 1e-12);
        }
        let mut bad = kappa.clone();
        let t = (0..bad.weights.len()).find(|&t| bad.weights[t][0] > 0.0).unwrap();
        bad.weights[t][0] = 0.7;
        assert!(matches!(assemble_c_t(&space, &q.multipliers, 0, &bad), Err(Error::Validation(_))));
    }

    #[test]
    fn interpolant_reproduces_constants() {
        let space = FineSpace::new(MeshHierarchy::new(2, 3, true).unwrap());
        let q = QoiSystem::new(&space, 0);
        let h = space.hierarchy();
        let coarse = h.coarse();
        let ih = QuasiInterpolant::new(h).unwrap();
        let v = space.interpolate(|_| [1.0, -2.0]);
        let nodal = ih.apply(h, &q, &v);
        let mut checked = 0;
        for z in coarse.interior_vertices() {
            assert!(ih.rule(z).unwrap().det >= MIN_PAIR_DET);
            // fluxes are exact only where the constant is not cut off
            let away = coarse
                .vertex_faces(z)
                .iter()
                .all(|&f| coarse.faces()[f].vertices.iter().all(|&w| !coarse.is_boundary_vertex(w)));
            if away {
                assert!((nodal[z][0] - 1.0).abs() < 1e-12 && (nodal[z][1] + 2.0).abs() < 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
