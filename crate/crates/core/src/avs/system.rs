use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Col, Side};
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::mesh::Mesh;
use crate::spaces::{quadrature, TrialSpace, NOT_FREE};
use crate::{Error, Result};

use super::element::{CellFrame, Formulation, TrialEval};
use super::ProblemDef;

/// Cells processed per parallel batch during assembly.
const BATCH: usize = 4096;

/// Symmetric sparse matrix (full pattern, compressed rows, sorted columns)
/// with its right-hand side, over the free dofs only.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn from_dense(a: &DenseMatrix, rhs: Vec<f64>) -> Self {
        let n = a.rows();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    col_idx.push(j);
                    values.push(a[(i, j)]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values, rhs }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |K_ij − K_ji| / max |K|`
    pub fn relative_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                a.row_mut(i)[j] = v;
            }
        }
        a
    }
}

/// Coefficients of a trial-space field, constrained dofs included.
#[derive(Clone, Debug)]
pub struct SolutionField {
    pub space: TrialSpace,
    pub coeffs: Vec<f64>,
}

impl SolutionField {
    pub fn zeros(space: TrialSpace) -> Self {
        let n = space.num_dofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    pub fn local(&self, c: usize) -> Vec<f64> {
        self.space.cell_dofs(c).iter().map(|&d| self.coeffs[d]).collect()
    }

    /// Values on the free dofs, in free order.
    pub fn free_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.space.num_free()];
        for (d, &v) in self.coeffs.iter().enumerate() {
            let f = self.space.free_index(d);
            if f != NOT_FREE {
                out[f] = v;
            }
        }
        out
    }
}

/// Assembles `K = Σ B G⁻¹ Bᵀ` and `F = Σ B G⁻¹ f` over the free dofs
/// (homogeneous Dirichlet dofs eliminated).
pub fn assemble(form: &Formulation) -> Result<SparseSystem> {
    let mesh = form.mesh;
    let trial = &form.trial;
    let nc = mesh.num_cells();
    let n = trial.num_free();
    let cell_free: Vec<Vec<usize>> = (0..nc)
        .map(|c| trial.cell_dofs(c).iter().map(|&d| trial.free_index(d)).collect())
        .collect();

    // dof → cells incidence
    let mut count = vec![0usize; n + 1];
    for dofs in &cell_free {
        for &f in dofs {
            if f != NOT_FREE {
                count[f + 1] += 1;
            }
        }
    }
    for i in 0..n {
        count[i + 1] += count[i];
    }
    let mut fill = count.clone();
    let mut incident = vec![0usize; count[n]];
    for (c, dofs) in cell_free.iter().enumerate() {
        for &f in dofs {
            if f != NOT_FREE {
                incident[fill[f]] = c;
                fill[f] += 1;
            }
        }
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cols: Vec<usize> = incident[count[i]..count[i + 1]]
                .iter()
                .flat_map(|&c| cell_free[c].iter().copied().filter(|&f| f != NOT_FREE))
                .collect();
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    for r in &rows {
        row_ptr.push(row_ptr.last().unwrap() + r.len());
    }
    let col_idx: Vec<usize> = rows.into_iter().flatten().collect();
    let mut values = vec![0.0; col_idx.len()];
    let mut rhs = vec![0.0; n];

    for start in (0..nc).step_by(BATCH) {
        let end = (start + BATCH).min(nc);
        let locals: Vec<(DenseMatrix, Vec<f64>)> = (start..end)
            .into_par_iter()
            .map(|c| form.element_system(c).map(|s| s.condensed()))
            .collect::<Result<_>>()?;
        for (c, (k, f)) in (start..end).zip(locals) {
            let dofs = &cell_free[c];
            for (a, &i) in dofs.iter().enumerate() {
                if i == NOT_FREE {
                    continue;
                }
                rhs[i] += f[a];
                let lo = row_ptr[i];
                let cols = &col_idx[lo..row_ptr[i + 1]];
                let krow = k.row(a);
                for (b, &j) in dofs.iter().enumerate() {
                    if j == NOT_FREE {
                        continue;
                    }
                    let pos = cols.binary_search(&j).map_err(|_| {
                        Error::DofMap(format!("cell {c}: dof pair ({i}, {j}) missing from the sparsity pattern"))
                    })?;
                    values[lo + pos] += krow[b];
                }
            }
        }
    }
    Ok(SparseSystem { n, row_ptr, col_idx, values, rhs })
}

/// Diagnostics of one linear solve.
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub n: usize,
    pub nnz: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub used_fallback: bool,
}

/// Solves the SPD system by sparse Cholesky with a Jacobi-preconditioned CG
/// fallback. Guarantees `‖Kx − F‖ ≤ 1e-10 ‖F‖` or reports an error.
pub fn solve_spd(sys: &SparseSystem) -> Result<Vec<f64>> {
    solve_spd_with_stats(sys).map(|(x, _)| x)
}

pub fn solve_spd_with_stats(sys: &SparseSystem) -> Result<(Vec<f64>, SolveStats)> {
    let n = sys.n;
    let mut stats = SolveStats { n, nnz: sys.nnz(), ..Default::default() };
    if n == 0 {
        return Ok((Vec::new(), stats));
    }
    let fnorm = norm2(&sys.rhs);
    if fnorm == 0.0 {
        return Ok((vec![0.0; n], stats));
    }
    let x = match cholesky_solve(sys) {
        Ok((x, steps)) => {
            stats.refinement_steps = steps;
            x
        }
        Err(e) => {
            log::warn!("sparse Cholesky failed ({e}); falling back to preconditioned CG");
            stats.used_fallback = true;
            pcg(sys, 1e-13)?
        }
    };
    let r = residual(sys, &x);
    stats.relative_residual = norm2(&r) / fnorm;
    if !(stats.relative_residual <= 1e-10) {
        let diag = sys.diagonal();
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        return Err(Error::Solver(format!(
            "relative residual {:.3e} exceeds 1e-10 (n = {n}, nnz = {}, diagonal range [{dmin:.3e}, {dmax:.3e}])",
            stats.relative_residual,
            sys.nnz()
        )));
    }
    Ok((x, stats))
}

fn cholesky_solve(sys: &SparseSystem) -> Result<(Vec<f64>, usize)> {
    let n = sys.n;
    // Upper part of the symmetric CSR rows is the lower part in column storage.
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut vals = Vec::new();
    col_ptr.push(0);
    for i in 0..n {
        let (cols, v) = sys.row(i);
        let start = cols.partition_point(|&j| j < i);
        row_idx.extend_from_slice(&cols[start..]);
        vals.extend_from_slice(&v[start..]);
        col_ptr.push(row_idx.len());
    }
    let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let a = SparseColMat::new(symbolic, vals);
    let llt = a.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("sparse Cholesky: {e:?}")))?;
    let fnorm = norm2(&sys.rhs);
    let solve = |b: &[f64]| -> Vec<f64> {
        let col = Col::<f64>::from_fn(n, |i| b[i]);
        let x = llt.solve(&col);
        (0..n).map(|i| x[i]).collect()
    };
    let mut x = solve(&sys.rhs);
    let mut steps = 0;
    for _ in 0..3 {
        let r = residual(sys, &x);
        if norm2(&r) <= 1e-13 * fnorm {
            break;
        }
        let dx = solve(&r);
        x.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        steps += 1;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite Cholesky solution".into()));
    }
    Ok((x, steps))
}

fn residual(sys: &SparseSystem, x: &[f64]) -> Vec<f64> {
    let kx = sys.matvec(x);
    sys.rhs.iter().zip(kx).map(|(f, k)| f - k).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(sys: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    let n = sys.n;
    let diag = sys.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Solver(format!("non-positive diagonal entry {} at row {i}", diag[i])));
    }
    let fnorm = norm2(&sys.rhs);
    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..(20 * n).max(100) {
        let ap = sys.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("matrix is not positive definite (pᵀKp = {pap:.3e})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * fnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!("conjugate gradients did not converge (n = {n})")))
}

/// Assembles, solves and expands to a full coefficient vector.
pub fn solve_system(form: &Formulation) -> Result<SolutionField> {
    let sys = assemble(form)?;
    let x = solve_spd(&sys)?;
    Ok(SolutionField { space: form.trial.clone(), coeffs: form.trial.expand(&x) })
}

/// Energy norm of the residual, `sqrt(Σ_m r_mᵀ G_m⁻¹ r_m)` with
/// `r_m = f_m − B_mᵀ u_m` on the local test basis.
pub fn energy_residual_norm(form: &Formulation, solution: &SolutionField) -> Result<f64> {
    let parts: Vec<f64> = (0..form.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let s = form.element_system(c)?;
            let r = s.test_residual(&solution.local(c));
            Ok(s.riesz_norm_squared(&r))
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `(‖u − u^h‖, ‖q − q^h‖)` in `L²(Ω)` against the problem's exact solution.
pub fn l2_errors(mesh: &Mesh, problem: &ProblemDef, field: &SolutionField) -> Result<(f64, f64)> {
    if problem.exact.is_none() {
        return Err(Error::InvalidArgument("problem has no exact solution".into()));
    }
    let order = (2 * field.space.degree() + 10).min(crate::spaces::quadrature::MAX_ORDER);
    let rule = quadrature(mesh.element_type(), order)?;
    let parts: Vec<(f64, f64)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let frame = CellFrame::new(mesh, c, &field.space)?;
            let pts = frame.points(&rule.points);
            let tr = TrialEval::new(&field.space, &frame, &pts);
            let local = field.local(c);
            let (mut eu, mut eq) = (0.0, 0.0);
            for q in 0..pts.len() {
                let w = rule.weights[q] * pts.det[q];
                let (u, _, fl, _) = tr.combine(&local, q);
                let (ue, _, qe) = problem.exact_at(pts.x[q]).expect("checked above");
                eu += w * (u - ue).powi(2);
                eq += w * ((fl[0] - qe[0]).powi(2) + (fl[1] - qe[1]).powi(2));
            }
            Ok((eu, eq))
        })
        .collect::<Result<_>>()?;
    let (eu, eq) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((eu.sqrt(), eq.sqrt()))
}

/// Writes the matrix in MatrixMarket coordinate format.
pub fn write_matrix_market(sys: &SparseSystem, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", sys.n, sys.n, sys.nnz())?;
    for i in 0..sys.n {
        let (cols, vals) = sys.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_system() {
        let mut rhs = vec![0.0; 5];
        rhs[0] = 1.0;
        let sys = SparseSystem::from_dense(&DenseMatrix::identity(5), rhs.clone());
        let x = solve_spd(&sys).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn random_spd_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        let m = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = m.tr_matmul(&m);
        for i in 0..n {
            a.row_mut(i)[i] += 1.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_spd(&SparseSystem::from_dense(&a, b.clone())).unwrap();
        let dense = crate::dense::Cholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&dense) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
        }
        let y = pcg(&SparseSystem::from_dense(&a, b), 1e-14).unwrap();
        for (u, v) in y.iter().zip(&dense) {
            assert!((u - v).abs() < 1e-8 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let mut a = DenseMatrix::identity(3);
        a.row_mut(1)[1] = -1.0;
        let sys = SparseSystem::from_dense(&a, vec![1.0, 1.0, 1.0]);
        assert!(pcg(&sys, 1e-12).is_err());
    }
}
