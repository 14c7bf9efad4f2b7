//! Localized multiscale basis: patch corrector problems, basis assembly,
//! the coarse Galerkin system and pressure post-processing.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    apply_a_restricted, apply_b_restricted, assemble_a, assemble_b, load_vector, CoefficientField, FineSpace,
    SOURCE_QUAD_DEGREE,
};
use crate::mesh::Patch;
use crate::polyspaces::{project_pi_hm, Poly};
use crate::qoi::{coarse_p1_to_fine, nodal_table, KappaTable, QoiIndex, QoiSystem, QuasiInterpolant};
use crate::solver::{SaddleFactor, SolverOptions};
use crate::sparse::{DenseColumns, SparseOperator, Triplet};

/// Right-hand sides solved together per block solve.
pub const RHS_BATCH: usize = 16;

const NONE: u32 = u32::MAX;

/// Fine dof vector stored densely or by its nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub enum FineVector {
    Dense(Vec<f64>),
    Sparse {
        len: usize,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

impl FineVector {
    /// Keeps the nonzero entries of `v`; stays dense when most are nonzero.
    pub fn compress(v: Vec<f64>) -> Self {
        let nnz = v.iter().filter(|x| **x != 0.0).count();
        if 2 * nnz > v.len() {
            return FineVector::Dense(v);
        }
        let (indices, values) = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, &x)| (i, x)).unzip();
        FineVector::Sparse {
            len: v.len(),
            indices,
            values,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FineVector::Dense(v) => v.len(),
            FineVector::Sparse { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nnz(&self) -> usize {
        match self {
            FineVector::Dense(v) => v.iter().filter(|x| **x != 0.0).count(),
            FineVector::Sparse { values, .. } => values.len(),
        }
    }

    /// `(index, value)` of all stored entries.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            FineVector::Dense(v) => Box::new(v.iter().copied().enumerate()),
            FineVector::Sparse { indices, values, .. } => Box::new(indices.iter().copied().zip(values.iter().copied())),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FineVector::Dense(v) => v.clone(),
            FineVector::Sparse { len, .. } => {
                let mut out = vec![0.0; *len];
                self.add_to(1.0, &mut out);
                out
            }
        }
    }

    /// `out += alpha * self`.
    pub fn add_to(&self, alpha: f64, out: &mut [f64]) {
        for (i, x) in self.entries() {
            out[i] += alpha * x;
        }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.entries().map(|(i, x)| x * other[i]).sum()
    }
}

/// Patch-local solution for one seed element and one target quantity.
#[derive(Clone, Debug)]
pub struct Corrector {
    pub seed: usize,
    pub ell: usize,
    pub velocity: FineVector,
    pub pressure: FineVector,
    /// `(multiplier dof, value)` over `M_{H,T}^ell`.
    pub multipliers: Vec<(usize, f64)>,
}

/// One localized basis function with its pressure companion.
#[derive(Clone, Debug)]
pub struct MultiscaleBasisFunction {
    pub index: QoiIndex,
    pub ell: usize,
    /// Nonzero coarse nodal values of the `P1` part.
    pub theta: Vec<(usize, [f64; 2])>,
    /// Seed elements whose correctors were summed.
    pub seeds: Vec<usize>,
    pub velocity: FineVector,
    pub pressure: FineVector,
}

/// Velocity, pressure and multiplier entries of one patch solve, in global numbering.
type PatchSolution = (Vec<(usize, f64)>, Vec<(usize, f64)>, Vec<(usize, f64)>);

/// Right-hand side of a corrector problem in global numbering.
#[derive(Clone, Debug, Default)]
struct RhsParts {
    momentum: Vec<(usize, f64)>,
    mass: Vec<(usize, f64)>,
    constraint: Vec<(usize, f64)>,
}

fn nonzeros(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, &x)| (i, x)).collect()
}

/// Shared operators for building a multiscale basis on one hierarchy.
pub struct LodContext<'a> {
    pub space: &'a FineSpace,
    pub coeff: &'a CoefficientField,
    pub m: usize,
    pub a: SparseOperator,
    pub b: SparseOperator,
    pub qoi: QoiSystem,
    pub interpolant: QuasiInterpolant,
    pub kappa: KappaTable,
}

/// Saddle system of one patch, factorized.
struct PatchSystem {
    vdofs: Vec<usize>,
    vmap: Vec<u32>,
    pdofs: Vec<usize>,
    pmap: Vec<u32>,
    n_elements: usize,
    mdofs: Vec<usize>,
    mmap: Vec<u32>,
    factor: SaddleFactor,
}

fn index_map(len: usize, items: &[usize]) -> Vec<u32> {
    let mut map = vec![NONE; len];
    for (i, &d) in items.iter().enumerate() {
        map[d] = i as u32;
    }
    map
}

impl PatchSystem {
    fn new(ctx: &LodContext<'_>, patch: &Patch) -> Result<Self> {
        let space = ctx.space;
        let h = space.hierarchy();
        let fine = h.fine();
        let nv = fine.num_vertices();
        let mut in_patch = vec![false; space.num_nodes()];
        let mut on_boundary = vec![false; space.num_nodes()];
        let mut pdofs = Vec::new();
        for &k in &patch.elements {
            for &ft in h.fine_children(k) {
                for n in space.local_nodes(ft) {
                    in_patch[n] = true;
                }
                pdofs.extend((0..3).map(|i| 3 * ft + i));
                for e in fine.triangle_faces(ft) {
                    let face = &fine.faces()[e];
                    let inside = face.interior && face.triangles.iter().all(|&t| patch.contains(h.coarse_parent(t)));
                    if !inside {
                        on_boundary[face.vertices[0]] = true;
                        on_boundary[face.vertices[1]] = true;
                        on_boundary[nv + e] = true;
                    }
                }
            }
        }
        pdofs.sort_unstable();
        let mut vdofs = Vec::new();
        for n in 0..space.num_nodes() {
            if in_patch[n] && !on_boundary[n] {
                vdofs.extend((0..2).filter_map(|c| space.velocity_dof(n, c)));
            }
        }
        vdofs.sort_unstable();
        let vmap = index_map(space.num_velocity_dofs(), &vdofs);
        let pmap = index_map(space.num_pressure_dofs(), &pdofs);
        let mdofs = ctx.qoi.multipliers.patch_dofs(patch);
        let mmap = index_map(ctx.qoi.multipliers.dim(), &mdofs);

        let (nu, np, nr, nl) = (vdofs.len(), pdofs.len(), patch.elements.len(), mdofs.len());
        let (op, or, ol) = (nu, nu + np, nu + np + nr);
        let n = ol + nl;
        let col_map: Vec<Option<usize>> = vmap.iter().map(|&i| (i != NONE).then_some(i as usize)).collect();
        let mut t: Vec<Triplet> = Vec::new();
        t.extend(ctx.a.submatrix(&vdofs, &col_map, nu).iter());
        for (i, j, v) in ctx.b.submatrix(&pdofs, &col_map, nu).iter() {
            t.push((op + i, j, v));
            t.push((j, op + i, v));
        }
        for (r, &k) in patch.elements.iter().enumerate() {
            for &ft in h.fine_children(k) {
                let w = space.geometry(ft).area / 3.0;
                for i in 0..3 {
                    let p = op + pmap[3 * ft + i] as usize;
                    t.push((or + r, p, w));
                    t.push((p, or + r, w));
                }
            }
        }
        for (i, j, v) in ctx.qoi.c.submatrix(&mdofs, &col_map, nu).iter() {
            t.push((ol + i, j, v));
            t.push((j, ol + i, v));
        }
        let k = SparseOperator::from_triplets(n, n, &t).with_symmetry(true);
        let mut signs = vec![1i8; n];
        signs[op..or].iter_mut().for_each(|s| *s = -1);
        signs[ol..].iter_mut().for_each(|s| *s = -1);
        let factor = SaddleFactor::new(&k, &signs, SolverOptions::default())?;
        Ok(PatchSystem {
            vdofs,
            vmap,
            pdofs,
            pmap,
            n_elements: nr,
            mdofs,
            mmap,
            factor,
        })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let nu = self.vdofs.len();
        let np = self.pdofs.len();
        (nu, nu + np, nu + np + self.n_elements)
    }

    /// Solves for every right-hand side; returns `(psi, xi, lambda)` in
    /// global numbering.
    fn solve(&self, rhs: &[RhsParts]) -> Result<Vec<PatchSolution>> {
        let (op, _, ol) = self.offsets();
        let n = self.factor.dim();
        let mut out = Vec::with_capacity(rhs.len());
        for chunk in rhs.chunks(RHS_BATCH) {
            let mut block = DenseColumns::zeros(n, chunk.len());
            for (c, parts) in chunk.iter().enumerate() {
                let col = block.col_mut(c);
                for &(d, v) in &parts.momentum {
                    let i = self.vmap[d];
                    if i != NONE {
                        col[i as usize] += v;
                    }
                }
                for &(d, v) in &parts.mass {
                    let i = self.pmap[d];
                    if i != NONE {
                        col[op + i as usize] += v;
                    }
                }
                for &(d, v) in &parts.constraint {
                    let i = self.mmap[d];
                    if i != NONE {
                        col[ol + i as usize] += v;
                    }
                }
            }
            let (x, _) = self.factor.solve_block(&block)?;
            for c in 0..chunk.len() {
                let col = x.col(c);
                let psi = self.vdofs.iter().zip(&col[..op]).map(|(&d, &v)| (d, v)).collect();
                let xi = self.pdofs.iter().zip(&col[op..op + self.pdofs.len()]).map(|(&d, &v)| (d, v)).collect();
                let lambda = self.mdofs.iter().zip(&col[ol..]).map(|(&d, &v)| (d, v)).collect();
                out.push((psi, xi, lambda));
            }
        }
        Ok(out)
    }
}

/// Coarse solve result and reconstructed fine fields.
#[derive(Clone, Debug)]
pub struct MultiscaleSolution {
    /// Basis coefficients, in multiplier dof order.
    pub coefficients: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Mean-zero piecewise constant, one value per coarse element.
    pub coarse_pressure: Vec<f64>,
    /// Fine `P1dc` field `sum_i u_i xi_i`.
    pub oscillatory_pressure: Vec<f64>,
    /// Per coarse element `p_loc` in the element's local frame.
    pub local_lift: Option<Vec<Poly>>,
    /// Largest Galerkin residual relative to the largest load entry.
    pub galerkin_residual: f64,
}

impl<'a> LodContext<'a> {
    pub fn new(space: &'a FineSpace, coeff: &'a CoefficientField, m: usize) -> Result<Self> {
        let a = assemble_a(space, coeff)?;
        let b = assemble_b(space);
        let qoi = QoiSystem::new(space, m);
        let interpolant = QuasiInterpolant::new(space.hierarchy())?;
        let kappa = KappaTable::symmetric(space.hierarchy());
        Ok(LodContext {
            space,
            coeff,
            m,
            a,
            b,
            qoi,
            interpolant,
            kappa,
        })
    }

    /// All basis targets in multiplier dof order.
    pub fn basis_indices(&self) -> Vec<QoiIndex> {
        (0..self.qoi.multipliers.dim()).map(|d| self.qoi.multipliers.index_of(d)).collect()
    }

    /// Seed elements whose correctors make up the basis function `idx`.
    pub fn seeds(&self, idx: QoiIndex) -> Vec<usize> {
        let coarse = self.space.hierarchy().coarse();
        match idx {
            QoiIndex::Face { face, j: 0 } => {
                let f = &coarse.faces()[face];
                let mut s: Vec<usize> = f.vertices.iter().flat_map(|&v| coarse.vertex_triangles(v).iter().copied()).collect();
                s.sort_unstable();
                s.dedup();
                s
            }
            QoiIndex::Face { face, .. } => coarse.faces()[face].triangles.to_vec(),
            QoiIndex::Element { element, .. } => vec![element],
        }
    }

    fn theta(&self, idx: QoiIndex) -> Vec<(usize, [f64; 2])> {
        match idx {
            QoiIndex::Face { face, j } => self.interpolant.coarse_nodal_lift(face, j),
            QoiIndex::Element { .. } => Vec::new(),
        }
    }

    fn check_index(&self, idx: QoiIndex) -> Result<usize> {
        if let QoiIndex::Element { .. } = idx {
            if self.qoi.multipliers.num_element_qois() == 0 {
                return Err(Error::validation("no element quantities exist for m = 0"));
            }
        }
        let mult = &self.qoi.multipliers;
        let valid = match idx {
            QoiIndex::Face { j, .. } => j < mult.num_face_qois(),
            QoiIndex::Element { element, k } => k < mult.num_element_qois() && element < mult.num_elements(),
        };
        mult.dof_of(idx)
            .filter(|_| valid)
            .ok_or_else(|| Error::validation(format!("{idx:?} is not a quantity of interest")))
    }

    fn corrector_rhs(&self, t: usize, idx: QoiIndex) -> RhsParts {
        let space = self.space;
        let h = space.hierarchy();
        let mult = &self.qoi.multipliers;
        let mut parts = RhsParts::default();
        let theta = self.theta(idx);
        if !theta.is_empty() {
            let nodal = nodal_table(h.coarse().num_vertices(), &theta);
            let children = h.fine_children(t);
            let v = coarse_p1_to_fine(space, &nodal, Some(children));
            let mut av = vec![0.0; space.num_velocity_dofs()];
            apply_a_restricted(space, self.coeff, children, &v, -1.0, &mut av);
            parts.momentum = nonzeros(&av);
            let mut bv = vec![0.0; space.num_pressure_dofs()];
            apply_b_restricted(space, children, &v, -1.0, &mut bv);
            parts.mass = nonzeros(&bv);
            parts.constraint = self
                .qoi
                .apply_c_t(h, &self.kappa, t, &v)
                .into_iter()
                .map(|(d, x)| (d, -x))
                .collect();
        }
        let dof = mult.dof_of(idx).expect("validated index");
        let weight = match idx {
            QoiIndex::Face { face, .. } => self.kappa.weight(h, t, face),
            QoiIndex::Element { element, .. } => f64::from(u8::from(element == t)),
        };
        if weight != 0.0 {
            parts
                .constraint
                .extend(mult.target_row(dof).into_iter().map(|(d, x)| (d, weight * x)));
        }
        parts
    }

    /// Solves the corrector problem on `N^ell(t)` for the target `idx`.
    pub fn solve_corrector(&self, t: usize, ell: usize, idx: QoiIndex) -> Result<Corrector> {
        self.check_index(idx)?;
        let patch = self.space.hierarchy().coarse().patch(t, ell)?;
        let system = PatchSystem::new(self, &patch)?;
        let (psi, xi, lambda) = system.solve(&[self.corrector_rhs(t, idx)])?.pop().expect("one rhs");
        let to_vec = |len: usize, e: Vec<(usize, f64)>| {
            let mut v = vec![0.0; len];
            for (i, x) in e {
                v[i] = x;
            }
            FineVector::compress(v)
        };
        Ok(Corrector {
            seed: t,
            ell,
            velocity: to_vec(self.space.num_velocity_dofs(), psi),
            pressure: to_vec(self.space.num_pressure_dofs(), xi),
            multipliers: lambda,
        })
    }

    /// Localized basis function for the face target `(face, j)`.
    pub fn build_face_basis(&self, face: usize, j: usize, ell: usize) -> Result<MultiscaleBasisFunction> {
        Ok(self.build_basis_for(&[QoiIndex::Face { face, j }], ell)?.remove(0))
    }

    /// Localized basis function for the element target `(t, k)`.
    pub fn build_element_basis(&self, t: usize, k: usize, ell: usize) -> Result<MultiscaleBasisFunction> {
        Ok(self.build_basis_for(&[QoiIndex::Element { element: t, k }], ell)?.remove(0))
    }

    /// The complete localized basis, in multiplier dof order.
    pub fn build_basis(&self, ell: usize) -> Result<Vec<MultiscaleBasisFunction>> {
        self.build_basis_for(&self.basis_indices(), ell)
    }

    /// Builds the basis functions for `targets`. Seeds whose patch covers
    /// the domain share one global system, right-hand sides summed per
    /// target; every other seed factorizes its own patch once.
    pub fn build_basis_for(&self, targets: &[QoiIndex], ell: usize) -> Result<Vec<MultiscaleBasisFunction>> {
        if ell == 0 {
            return Err(Error::validation("patch order must be at least 1"));
        }
        for &idx in targets {
            self.check_index(idx)?;
        }
        let space = self.space;
        let h = space.hierarchy();
        let coarse = h.coarse();
        let nv = space.num_velocity_dofs();
        let np = space.num_pressure_dofs();

        let seeds: Vec<Vec<usize>> = targets.iter().map(|&i| self.seeds(i)).collect();
        let mut per_seed: Vec<Vec<usize>> = vec![Vec::new(); coarse.num_triangles()];
        for (b, s) in seeds.iter().enumerate() {
            for &t in s {
                per_seed[t].push(b);
            }
        }
        let patches: Vec<Option<Patch>> = (0..coarse.num_triangles())
            .map(|t| (!per_seed[t].is_empty()).then(|| coarse.patch(t, ell)).transpose())
            .collect::<Result<_>>()?;
        let mut remaining: Vec<usize> = seeds.iter().map(Vec::len).collect();
        let mut velocity: Vec<Option<Vec<f64>>> = vec![None; targets.len()];
        let mut pressure: Vec<Option<Vec<f64>>> = vec![None; targets.len()];
        let mut done: Vec<Option<(FineVector, FineVector)>> = vec![None; targets.len()];

        let add = |b: usize, psi: &[(usize, f64)], xi: &[(usize, f64)], velocity: &mut Vec<Option<Vec<f64>>>, pressure: &mut Vec<Option<Vec<f64>>>| {
            let v = velocity[b].get_or_insert_with(|| vec![0.0; nv]);
            for &(i, x) in psi {
                v[i] += x;
            }
            let p = pressure[b].get_or_insert_with(|| vec![0.0; np]);
            for &(i, x) in xi {
                p[i] += x;
            }
        };

        // seeds whose patch is the whole domain
        let global: Vec<usize> = (0..coarse.num_triangles())
            .filter(|&t| patches[t].as_ref().is_some_and(|p| p.covers_domain))
            .collect();
        if let Some(&first) = global.first() {
            let system = PatchSystem::new(self, patches[first].as_ref().unwrap())?;
            let mut summed: Vec<Option<RhsParts>> = vec![None; targets.len()];
            for &t in &global {
                for &b in &per_seed[t] {
                    let parts = self.corrector_rhs(t, targets[b]);
                    let acc = summed[b].get_or_insert_with(RhsParts::default);
                    acc.momentum.extend(parts.momentum);
                    acc.mass.extend(parts.mass);
                    acc.constraint.extend(parts.constraint);
                    remaining[b] -= 1;
                }
            }
            let order: Vec<usize> = (0..targets.len()).filter(|&b| summed[b].is_some()).collect();
            for chunk in order.chunks(RHS_BATCH) {
                let rhs: Vec<RhsParts> = chunk.iter().map(|&b| summed[b].take().unwrap()).collect();
                for (&b, (psi, xi, _)) in chunk.iter().zip(system.solve(&rhs)?) {
                    add(b, &psi, &xi, &mut velocity, &mut pressure);
                    if remaining[b] == 0 {
                        done[b] = Some(self.finish(targets[b], velocity[b].take(), pressure[b].take()));
                    }
                }
            }
        }

        let local: Vec<usize> = (0..coarse.num_triangles())
            .filter(|&t| patches[t].as_ref().is_some_and(|p| !p.covers_domain))
            .collect();
        let workers = rayon::current_num_threads().max(1);
        for group in local.chunks(workers) {
            let results: Vec<Result<Vec<_>>> = group
                .par_iter()
                .map(|&t| {
                    let system = PatchSystem::new(self, patches[t].as_ref().unwrap())?;
                    let rhs: Vec<RhsParts> = per_seed[t].iter().map(|&b| self.corrector_rhs(t, targets[b])).collect();
                    system.solve(&rhs)
                })
                .collect();
            for (&t, res) in group.iter().zip(results) {
                for (&b, (psi, xi, _)) in per_seed[t].iter().zip(res?) {
                    add(b, &psi, &xi, &mut velocity, &mut pressure);
                    remaining[b] -= 1;
                    if remaining[b] == 0 {
                        done[b] = Some(self.finish(targets[b], velocity[b].take(), pressure[b].take()));
                    }
                }
            }
        }

        targets
            .iter()
            .zip(done)
            .zip(seeds)
            .map(|((&index, d), seeds)| {
                let (velocity, pressure) = d.ok_or_else(|| Error::Construction(format!("{index:?} has no seeds")))?;
                Ok(MultiscaleBasisFunction {
                    index,
                    ell,
                    theta: self.theta(index),
                    seeds,
                    velocity,
                    pressure,
                })
            })
            .collect()
    }

    /// Adds the coarse `P1` part and compresses.
    fn finish(&self, idx: QoiIndex, velocity: Option<Vec<f64>>, pressure: Option<Vec<f64>>) -> (FineVector, FineVector) {
        let space = self.space;
        let h = space.hierarchy();
        let mut v = velocity.unwrap_or_else(|| vec![0.0; space.num_velocity_dofs()]);
        let theta = self.theta(idx);
        if !theta.is_empty() {
            let nodal = nodal_table(h.coarse().num_vertices(), &theta);
            let tris: Vec<usize> = self.seeds(idx).iter().flat_map(|&t| h.fine_children(t).iter().copied()).collect();
            let lift = coarse_p1_to_fine(space, &nodal, Some(&tris));
            v.iter_mut().zip(&lift).for_each(|(a, b)| *a += b);
        }
        let p = pressure.unwrap_or_else(|| vec![0.0; space.num_pressure_dofs()]);
        (FineVector::compress(v), FineVector::compress(p))
    }

    /// `b(phi_i, 1_K)` for every coarse element `K` (rows) and basis function.
    pub fn coarse_divergence(&self, basis: &[MultiscaleBasisFunction]) -> DMatrix<f64> {
        let h = self.space.hierarchy();
        let nk = h.coarse().num_triangles();
        // row j of `dt` holds b(e_j, 1_K) for all K
        let t: Vec<Triplet> = self.b.iter().map(|(i, j, v)| (j, h.coarse_parent(i / 3), v)).collect();
        let dt = SparseOperator::from_triplets(self.b.ncols(), nk, &t);
        let mut out = DMatrix::zeros(nk, basis.len());
        for (i, phi) in basis.iter().enumerate() {
            for (j, x) in phi.velocity.entries() {
                let (c, v) = dt.row(j);
                for (&k, &y) in c.iter().zip(v) {
                    out[(k, i)] += x * y;
                }
            }
        }
        out
    }

    /// Assembles and solves the coarse saddle system and reconstructs the
    /// fine velocity, coarse pressure and oscillatory pressure.
    pub fn assemble_and_solve_coarse(
        &self,
        basis: &[MultiscaleBasisFunction],
        f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
    ) -> Result<MultiscaleSolution> {
        let space = self.space;
        let n = basis.len();
        let nk = space.hierarchy().coarse().num_triangles();
        let load = load_vector(space, f);
        let a_phi: Vec<Vec<f64>> = basis
            .par_iter()
            .map(|phi| match &phi.velocity {
                FineVector::Dense(v) => self.a.matvec(v),
                sparse => self.a.matvec(&sparse.to_dense()),
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| if j < i { 0.0 } else { basis[j].velocity.dot(&a_phi[i]) }).collect())
            .collect();
        drop(a_phi);
        let mut a_ms = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                // symmetrize the two evaluations of a(phi_i, phi_j)
                a_ms[(i, j)] = rows[i][j];
                a_ms[(j, i)] = rows[i][j];
            }
        }
        let b_ms = self.coarse_divergence(basis);
        let rhs: Vec<f64> = basis.iter().map(|phi| phi.velocity.dot(&load)).collect();
        let areas: Vec<f64> = (0..nk).map(|k| space.hierarchy().coarse().area(k)).collect();

        let dim = n + nk + 1;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        k.view_mut((0, 0), (n, n)).copy_from(&a_ms);
        k.view_mut((n, 0), (nk, n)).copy_from(&b_ms);
        k.view_mut((0, n), (n, nk)).copy_from(&b_ms.transpose());
        for (i, &a) in areas.iter().enumerate() {
            k[(n + i, dim - 1)] = a;
            k[(dim - 1, n + i)] = a;
        }
        let mut r = DVector::<f64>::zeros(dim);
        for i in 0..n {
            r[i] = rhs[i];
        }
        let lu = k.clone().lu();
        let mut x = lu
            .solve(&r)
            .ok_or_else(|| Error::solver("coarse saddle system is singular"))?;
        for _ in 0..2 {
            let res = &r - &k * &x;
            if let Some(dx) = lu.solve(&res) {
                x += dx;
            }
        }
        let u: Vec<f64> = x.rows(0, n).iter().copied().collect();
        let p_h: Vec<f64> = x.rows(n, nk).iter().copied().collect();

        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut residual = 0.0f64;
        for i in 0..n {
            let mut s = -rhs[i];
            for j in 0..n {
                s += a_ms[(i, j)] * u[j];
            }
            for kk in 0..nk {
                s += b_ms[(kk, i)] * p_h[kk];
            }
            residual = residual.max(s.abs());
        }
        let galerkin_residual = if scale > 0.0 { residual / scale } else { residual };

        let mut velocity = vec![0.0; space.num_velocity_dofs()];
        let mut osc = vec![0.0; space.num_pressure_dofs()];
        for (phi, &c) in basis.iter().zip(&u) {
            if c != 0.0 {
                phi.velocity.add_to(c, &mut velocity);
                phi.pressure.add_to(c, &mut osc);
            }
        }
        Ok(MultiscaleSolution {
            coefficients: u,
            velocity,
            coarse_pressure: p_h,
            oscillatory_pressure: osc,
            local_lift: None,
            galerkin_residual,
        })
    }

    /// Adds `p_loc` from the elementwise projection of `f` onto degree `m`.
    pub fn postprocess_pressure(
        &self,
        sol: &mut MultiscaleSolution,
        f: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
    ) -> Result<()> {
        let coarse = self.space.hierarchy().coarse();
        let proj = project_pi_hm::<2>(coarse, self.m, 2 * self.m + SOURCE_QUAD_DEGREE, f)?;
        let lifts = (0..coarse.num_triangles())
            .map(|t| {
                let basis = self.qoi.multipliers.element_basis(t);
                Ok(basis.pressure_lift(&proj.vector(t))?.p_loc)
            })
            .collect::<Result<Vec<_>>>()?;
        sol.local_lift = Some(lifts);
        Ok(())
    }

    /// `p~_H + p~^osc + p_loc` at barycentric point `l` of fine triangle `ft`.
    pub fn postprocessed_pressure_at(&self, sol: &MultiscaleSolution, ft: usize, l: [f64; 3], x: [f64; 2]) -> f64 {
        let k = self.space.hierarchy().coarse_parent(ft);
        let mut p = sol.coarse_pressure[k] + self.space.eval_pressure(&sol.oscillatory_pressure, ft, l);
        if let Some(lift) = &sol.local_lift {
            let frame = &self.qoi.multipliers.element_basis(k).frame;
            p += lift[k].eval(frame.to_local(x));
        }
        p
    }

    /// `||p_h - p~^pp||_{L^2}`.
    pub fn pressure_error(&self, sol: &MultiscaleSolution, p_ref: &[f64]) -> f64 {
        let space = self.space;
        (0..space.num_fine_triangles())
            .into_par_iter()
            .map(|ft| {
                space
                    .geometry(ft)
                    .quadrature(2 * self.m + 4)
                    .map(|(x, l, w)| {
                        let d = space.eval_pressure(p_ref, ft, l) - self.postprocessed_pressure_at(sol, ft, l, x);
                        w * d * d
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `(sum_K |K| (mean_K p_h - p~_H|_K)^2)^{1/2}`.
    pub fn coarse_pressure_error(&self, sol: &MultiscaleSolution, p_ref: &[f64]) -> f64 {
        let h = self.space.hierarchy();
        let means = self.space.coarse_mean_matrix().matvec(p_ref);
        (0..h.coarse().num_triangles())
            .map(|k| {
                let area = h.coarse().area(k);
                let d = means[k] / area - sol.coarse_pressure[k];
                area * d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Writes a basis in the text format described in the README.
pub fn write_basis<W: Write>(basis: &[MultiscaleBasisFunction], nv: usize, np: usize, mut out: W) -> Result<()> {
    writeln!(out, "lod-basis {} {nv} {np}", basis.len())?;
    for phi in basis {
        let (kind, a, b) = match phi.index {
            QoiIndex::Face { face, j } => ("face", face, j),
            QoiIndex::Element { element, k } => ("element", element, k),
        };
        writeln!(out, "{kind} {a} {b} {} {} {}", phi.ell, phi.velocity.nnz(), phi.pressure.nnz())?;
        for v in [&phi.velocity, &phi.pressure] {
            for (i, x) in v.entries().filter(|(_, x)| *x != 0.0) {
                writeln!(out, "{i} {x:.17e}")?;
            }
        }
    }
    Ok(())
}

/// One record of a basis dump.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisRecord {
    pub index: QoiIndex,
    pub ell: usize,
    pub velocity: FineVector,
    pub pressure: FineVector,
}

/// Reads the format produced by [`write_basis`].
pub fn read_basis<R: BufRead>(input: R) -> Result<Vec<BasisRecord>> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of basis dump".into()))?
            .map_err(Error::from)
    };
    let parse = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad integer `{s}`"))) };
    let header = next()?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "lod-basis" {
        return Err(Error::Parse(format!("bad header `{header}`")));
    }
    let (count, nv, np) = (parse(h[1])?, parse(h[2])?, parse(h[3])?);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next()?;
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 6 {
            return Err(Error::Parse(format!("bad record `{line}`")));
        }
        let (a, b) = (parse(w[1])?, parse(w[2])?);
        let index = match w[0] {
            "face" => QoiIndex::Face { face: a, j: b },
            "element" => QoiIndex::Element { element: a, k: b },
            other => return Err(Error::Parse(format!("unknown kind `{other}`"))),
        };
        let ell = parse(w[3])?;
        let mut read_vec = |nnz: usize, len: usize| -> Result<FineVector> {
            let mut indices = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let l = next()?;
                let (i, x) = l
                    .split_once(' ')
                    .ok_or_else(|| Error::Parse(format!("bad entry `{l}`")))?;
                indices.push(parse(i)?);
                values.push(x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{x}`")))?);
            }
            Ok(FineVector::Sparse { len, indices, values })
        };
        let velocity = read_vec(parse(w[4])?, nv)?;
        let pressure = read_vec(parse(w[5])?, np)?;
        out.push(BasisRecord {
            index,
            ell,
            velocity,
            pressure,
        });
    }
    Ok(out)
}
