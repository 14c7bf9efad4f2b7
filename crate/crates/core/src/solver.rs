//! Sparse symmetric indefinite solves for saddle-point systems.
//!
//! The matrix is equilibrated (Ruiz), shifted to be quasi-definite by a small
//! signed diagonal, and factorized once as `L D L^T` with a fill-reducing
//! ordering. Each solve runs iterative refinement against the unshifted
//! matrix, so the shift does not limit the final accuracy.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, simplicial, supernodal, CholeskySymbolicParams, LdltRef, SymbolicCholesky,
    SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::{DenseColumns, SparseOperator};

/// Tuning knobs of [`SaddleFactor`].
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Static shift applied (with the pivot's expected sign) to the
    /// equilibrated diagonal.
    pub shift: f64,
    pub max_refinement_steps: usize,
    /// Target for `|b - A x|_inf / (|A|_inf |x|_inf + |b|_inf)`.
    pub tolerance: f64,
    /// A solve whose backward error ends above this is reported as failed.
    pub acceptable: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            shift: 1e-10,
            max_refinement_steps: 30,
            tolerance: 1e-15,
            acceptable: 1e-11,
        }
    }
}

/// Signs of the `D` factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Reusable factorization of a symmetric saddle-point matrix.
pub struct SaddleFactor {
    n: usize,
    matrix: SparseOperator,
    norm_inf: f64,
    scaling: Vec<f64>,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    inertia: Inertia,
    options: SolverOptions,
}

fn ruiz_scaling(a: &SparseOperator, iterations: usize) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..iterations {
        let mut row_max = vec![0.0f64; n];
        for (i, j, v) in a.iter() {
            row_max[i] = row_max[i].max((d[i] * v * d[j]).abs());
        }
        let mut done = true;
        for i in 0..n {
            if row_max[i] > 0.0 {
                if (1.0 - row_max[i]).abs() > 1e-2 {
                    done = false;
                }
                d[i] /= row_max[i].sqrt();
            }
        }
        if done {
            break;
        }
    }
    d
}

impl SaddleFactor {
    /// Factorizes the full symmetric matrix `a`. `signs[i]` is `+1` for
    /// rows expected to give a positive pivot (velocities, and multipliers
    /// that only couple to other multipliers) and `-1` otherwise.
    pub fn new(a: &SparseOperator, signs: &[i8], options: SolverOptions) -> Result<Self> {
        a.check_square()?;
        let n = a.nrows();
        if signs.len() != n {
            return Err(Error::validation("sign vector length does not match matrix"));
        }
        let scaling = ruiz_scaling(a, 20);

        // upper triangle of the scaled, shifted matrix in CSC = lower part of
        // the symmetric CSR rows
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(a.nnz() / 2 + n);
        let mut vals = Vec::with_capacity(a.nnz() / 2 + n);
        col_ptr.push(0);
        for j in 0..n {
            let (cols, v) = a.row(j);
            let mut has_diag = false;
            for (&i, &x) in cols.iter().zip(v) {
                if i > j {
                    break;
                }
                let mut s = scaling[i] * x * scaling[j];
                if i == j {
                    s += signs[j] as f64 * options.shift;
                    has_diag = true;
                }
                row_idx.push(i);
                vals.push(s);
            }
            if !has_diag {
                row_idx.push(j);
                vals.push(signs[j] as f64 * options.shift);
            }
            col_ptr.push(row_idx.len());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let mat = SparseColMatRef::new(sym, &vals);
        let symbolic = factorize_symbolic_cholesky(sym, Side::Upper, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
            .map_err(|e| Error::solver(format!("symbolic analysis failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = Par::Seq;
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()));
        let stack = MemStack::new(&mut buf);
        let reg = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: options.shift.max(1e-12),
            dynamic_regularization_epsilon: 1e-14,
        };
        symbolic
            .factorize_numeric_ldlt(&mut values, mat, Side::Upper, reg, par, stack, Default::default())
            .map_err(|e| Error::solver(format!("numeric factorization failed: {e:?}")))?;
        let inertia = compute_inertia(&symbolic, &values);
        let norm_inf = (0..n).map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Ok(SaddleFactor {
            n,
            matrix: a.clone(),
            norm_inf,
            scaling,
            symbolic,
            values,
            inertia,
            options,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    fn apply_factor(&self, block: &mut DenseColumns) {
        let k = block.ncols;
        for j in 0..k {
            for (x, d) in block.col_mut(j).iter_mut().zip(&self.scaling) {
                *x *= d;
            }
        }
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(k, par));
        let stack = MemStack::new(&mut buf);
        let ldlt = LdltRef::<'_, usize, f64>::new(&self.symbolic, &self.values);
        let rhs = MatMut::from_column_major_slice_mut(&mut block.data, self.n, k);
        ldlt.solve_in_place_with_conj(Conj::No, rhs, par, stack);
        for j in 0..k {
            for (x, d) in block.col_mut(j).iter_mut().zip(&self.scaling) {
                *x *= d;
            }
        }
    }

    /// Solves `A X = B` column by column with iterative refinement; returns
    /// the worst backward error over the columns.
    pub fn solve_block(&self, rhs: &DenseColumns) -> Result<(DenseColumns, f64)> {
        if rhs.nrows != self.n {
            return Err(Error::validation("right-hand side has wrong length"));
        }
        let k = rhs.ncols;
        let mut x = rhs.clone();
        self.apply_factor(&mut x);
        let mut active: Vec<usize> = (0..k).collect();
        let mut errors = vec![f64::INFINITY; k];
        let mut previous = vec![f64::INFINITY; k];
        for _ in 0..=self.options.max_refinement_steps {
            let mut residual = DenseColumns::zeros(self.n, active.len());
            let mut still = Vec::new();
            for &j in &active {
                let r = self.residual(rhs.col(j), x.col(j));
                let b_norm = rhs.col(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let x_norm = x.col(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let r_norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let denom = self.norm_inf * x_norm + b_norm;
                errors[j] = if denom == 0.0 { 0.0 } else { r_norm / denom };
                // stop when converged or refinement stagnates
                if errors[j] > self.options.tolerance && errors[j] < 0.5 * previous[j] {
                    residual.col_mut(still.len()).copy_from_slice(&r);
                    still.push(j);
                }
                previous[j] = errors[j];
            }
            if still.is_empty() {
                break;
            }
            residual.ncols = still.len();
            residual.data.truncate(self.n * still.len());
            self.apply_factor(&mut residual);
            for (c, &j) in still.iter().enumerate() {
                for (xi, di) in x.col_mut(j).iter_mut().zip(residual.col(c)) {
                    *xi += di;
                }
            }
            active = still;
        }
        // final check for the columns that were updated last
        let mut worst = 0.0f64;
        for j in 0..k {
            let r = self.residual(rhs.col(j), x.col(j));
            let b_norm = rhs.col(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let x_norm = x.col(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let r_norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let denom = self.norm_inf * x_norm + b_norm;
            worst = worst.max(if denom == 0.0 { 0.0 } else { r_norm / denom });
        }
        if worst.is_nan() || worst > self.options.acceptable {
            return Err(Error::Solver {
                message: format!("iterative refinement stalled at backward error {worst:.3e}"),
                positive: self.inertia.positive,
                negative: self.inertia.negative,
                zero: self.inertia.zero,
            });
        }
        Ok((x, worst))
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let block = DenseColumns {
            nrows: self.n,
            ncols: 1,
            data: rhs.to_vec(),
        };
        Ok(self.solve_block(&block)?.0.data)
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = b.to_vec();
        self.matrix.matvec_add(-1.0, x, &mut r);
        r
    }
}

fn compute_inertia(symbolic: &SymbolicCholesky<usize>, values: &[f64]) -> Inertia {
    let mut inertia = Inertia::default();
    let mut count = |d: f64| {
        if d > 0.0 {
            inertia.positive += 1;
        } else if d < 0.0 {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    };
    match symbolic.raw() {
        SymbolicCholeskyRaw::Simplicial(s) => {
            let col_ptr = s.col_ptr();
            let _ = simplicial::SimplicialLdltRef::<'_, usize, f64>::new(s, values);
            for j in 0..s.nrows() {
                count(values[col_ptr[j]]);
            }
        }
        SymbolicCholeskyRaw::Supernodal(s) => {
            let l = supernodal::SupernodalLdltRef::<'_, usize, f64>::new(s, values);
            for sn in 0..s.n_supernodes() {
                let m = l.supernode(sn).val();
                for j in 0..m.ncols() {
                    count(m[(j, j)]);
                }
            }
        }
    }
    inertia
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_saddle_system() {
        // [2 1 1; 1 3 0; 1 0 0] with one constraint row
        let a = SparseOperator::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (0, 2, 1.0), (2, 0, 1.0)],
        );
        let f = SaddleFactor::new(&a, &[1, 1, -1], SolverOptions::default()).unwrap();
        let x = f.solve(&[1.0, 2.0, 3.0]).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-13);
        }
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 2,
                negative: 1,
                zero: 0
            }
        );
    }

    #[test]
    fn many_right_hand_sides() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        // two constraints coupling to the first half / second half
        for i in 0..n {
            let c = if i < n / 2 { n } else { n + 1 };
            t.push((c, i, 1.0));
            t.push((i, c, 1.0));
        }
        let a = SparseOperator::from_triplets(n + 2, n + 2, &t);
        let mut signs = vec![1i8; n];
        signs.extend([-1, -1]);
        let f = SaddleFactor::new(&a, &signs, SolverOptions::default()).unwrap();
        let mut b = DenseColumns::zeros(n + 2, 3);
        for j in 0..3 {
            for i in 0..n + 2 {
                b.col_mut(j)[i] = ((i * (j + 1)) % 7) as f64 - 3.0;
            }
        }
        let (x, err) = f.solve_block(&b).unwrap();
        assert!(err < 1e-14);
        for j in 0..3 {
            let r = a.matvec(x.col(j));
            for (ri, bi) in r.iter().zip(b.col(j)) {
                assert!((ri - bi).abs() < 1e-12);
            }
        }
    }
}
