use crate::dense::{Cholesky, DenseMatrix};
use crate::goal::{qoi_cell_rule, QoIDef, QoIKind};
use crate::mesh::geometry::{det2, inverse2};
use crate::mesh::{BoundaryTag, ElementGeometry, ElementMap, ElementType, Mesh};
use crate::spaces::{edge_quadrature, quadrature, FluxFamily, RtElementBasis, TestSpaceDesc, TrialSpace};
use crate::{Error, Point, Result};

use super::{Direction, Discretization, ProblemDef};

/// Right-hand side tested against the broken test basis.
#[derive(Clone, Debug)]
pub enum Load {
    /// `∫ f v + ∮_{Γ_N} g v`
    Source,
    /// A quantity of interest applied to the test pair `(v, w)`.
    Functional(QoIDef),
}

/// Mapping data and (for Raviart-Thomas trials) the local flux basis of one
/// cell.
pub struct CellFrame {
    pub cell: usize,
    pub map: ElementMap,
    pub geometry: ElementGeometry,
    pub vertices: Vec<Point>,
    rt: Option<RtElementBasis>,
}

impl CellFrame {
    pub fn new(mesh: &Mesh, c: usize, trial: &TrialSpace) -> Result<Self> {
        let vertices = mesh.cell_points(c);
        let rt = match trial.family() {
            FluxFamily::Lagrange => None,
            FluxFamily::RaviartThomas => {
                let v = mesh.cell(c);
                Some(RtElementBasis::new(
                    trial.degree(),
                    [vertices[0], vertices[1], vertices[2]],
                    [v[0], v[1], v[2]],
                )?)
            }
        };
        Ok(Self { cell: c, map: mesh.map(c), geometry: ElementGeometry::new(&vertices), vertices, rt })
    }

    /// Physical points, `|det J|` and `J⁻¹` at reference points.
    pub fn points(&self, xi: &[Point]) -> CellEval {
        let mut x = Vec::with_capacity(xi.len());
        let mut det = Vec::with_capacity(xi.len());
        let mut jinv = Vec::with_capacity(xi.len());
        for &p in xi {
            x.push(self.map.map(p));
            let j = self.map.jacobian(p);
            det.push(det2(&j).abs());
            jinv.push(inverse2(&j));
        }
        CellEval { xi: xi.to_vec(), x, det, jinv }
    }

    /// Points of local edge `k` at edge parameters `s ∈ [0, 1]`.
    pub fn edge_points(&self, element_type: ElementType, k: usize, s: &[f64]) -> CellEval {
        let rv = element_type.reference_vertices();
        let (a, b) = (rv[k], rv[(k + 1) % rv.len()]);
        let xi: Vec<Point> = s.iter().map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect();
        self.points(&xi)
    }
}

/// Evaluation points of one cell.
pub struct CellEval {
    pub xi: Vec<Point>,
    pub x: Vec<Point>,
    pub det: Vec<f64>,
    pub jinv: Vec<[[f64; 2]; 2]>,
}

impl CellEval {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[inline]
fn to_physical(jinv: &[[f64; 2]; 2], g: Point) -> Point {
    // ∇_x = J⁻ᵀ ∇_ξ
    [jinv[0][0] * g[0] + jinv[1][0] * g[1], jinv[0][1] * g[0] + jinv[1][1] * g[1]]
}

/// Trial basis (scalar part and flux part) at a set of points, point-major.
pub struct TrialEval {
    pub ns: usize,
    pub nf: usize,
    pub u: Vec<f64>,
    pub grad_u: Vec<Point>,
    pub flux: Vec<Point>,
    pub div: Vec<f64>,
}

impl TrialEval {
    pub fn new(trial: &TrialSpace, frame: &CellFrame, pts: &CellEval) -> Self {
        let basis = trial.scalar_basis();
        let (ns, nf) = trial.local_counts();
        let np = pts.len();
        let mut u = vec![0.0; np * ns];
        let mut grad_u = vec![[0.0; 2]; np * ns];
        let mut flux = vec![[0.0; 2]; np * nf];
        let mut div = vec![0.0; np * nf];
        for q in 0..np {
            let (vals, grads) = (&mut u[q * ns..(q + 1) * ns], &mut grad_u[q * ns..(q + 1) * ns]);
            basis.eval_into(pts.xi[q], vals, grads);
            for g in grads.iter_mut() {
                *g = to_physical(&pts.jinv[q], *g);
            }
            let fl = &mut flux[q * nf..(q + 1) * nf];
            let dv = &mut div[q * nf..(q + 1) * nf];
            match &frame.rt {
                None => {
                    for i in 0..ns {
                        fl[i] = [vals[i], 0.0];
                        fl[ns + i] = [0.0, vals[i]];
                        dv[i] = grads[i][0];
                        dv[ns + i] = grads[i][1];
                    }
                }
                Some(rt) => rt.eval_into(pts.x[q], fl, dv),
            }
        }
        Self { ns, nf, u, grad_u, flux, div }
    }

    pub fn dim(&self) -> usize {
        self.ns + self.nf
    }

    /// `(u, ∇u, q, ∇·q)` of the local coefficient vector at point `q`.
    pub fn combine(&self, coeffs: &[f64], q: usize) -> (f64, Point, Point, f64) {
        let (ns, nf) = (self.ns, self.nf);
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for i in 0..ns {
            let c = coeffs[i];
            u += c * self.u[q * ns + i];
            g[0] += c * self.grad_u[q * ns + i][0];
            g[1] += c * self.grad_u[q * ns + i][1];
        }
        let mut f = [0.0; 2];
        let mut d = 0.0;
        for k in 0..nf {
            let c = coeffs[ns + k];
            f[0] += c * self.flux[q * nf + k][0];
            f[1] += c * self.flux[q * nf + k][1];
            d += c * self.div[q * nf + k];
        }
        (u, g, f, d)
    }
}

/// Full (unreduced) test Lagrange basis at a set of points.
pub struct TestEval {
    pub nb: usize,
    pub v: Vec<f64>,
    pub grad: Vec<Point>,
}

impl TestEval {
    pub fn new(test: &TestSpaceDesc, pts: &CellEval) -> Self {
        let nb = test.basis().dim();
        let np = pts.len();
        let mut v = vec![0.0; np * nb];
        let mut grad = vec![[0.0; 2]; np * nb];
        for q in 0..np {
            let g = &mut grad[q * nb..(q + 1) * nb];
            test.basis().eval_into(pts.xi[q], &mut v[q * nb..(q + 1) * nb], g);
            for gi in g.iter_mut() {
                *gi = to_physical(&pts.jinv[q], *gi);
            }
        }
        Self { nb, v, grad }
    }
}

/// A discretized problem on one mesh: trial space, broken test space and load.
pub struct Formulation<'a> {
    pub mesh: &'a Mesh,
    pub problem: &'a ProblemDef,
    pub trial: TrialSpace,
    pub test: TestSpaceDesc,
    pub disc: Discretization,
    constrained: Vec<bool>,
    load: Load,
    bilinear_order: usize,
    load_order: usize,
}

impl<'a> Formulation<'a> {
    pub fn new(mesh: &'a Mesh, problem: &'a ProblemDef, disc: Discretization) -> Result<Self> {
        let constrained = problem.constrained_edges(mesh);
        let trial = TrialSpace::new(mesh, disc.family, disc.degree, &constrained)?;
        let test = TestSpaceDesc::new(mesh.element_type(), disc.degree, disc.enrichment)?;
        let pmax = disc.degree.max(test.degree());
        Ok(Self {
            mesh,
            problem,
            trial,
            test,
            disc,
            constrained,
            load: Load::Source,
            bilinear_order: 2 * pmax + 2,
            load_order: (2 * pmax + 10).min(crate::spaces::quadrature::MAX_ORDER),
        })
    }

    pub fn with_load(mut self, load: Load) -> Self {
        self.load = load;
        self
    }

    pub fn load(&self) -> &Load {
        &self.load
    }

    pub fn constrained_edges(&self) -> &[bool] {
        &self.constrained
    }

    pub fn bilinear_order(&self) -> usize {
        self.bilinear_order
    }

    pub fn load_order(&self) -> usize {
        self.load_order
    }

    pub fn frame(&self, c: usize) -> Result<CellFrame> {
        CellFrame::new(self.mesh, c, &self.trial)
    }

    /// Active `v` indices of cell `c`.
    pub fn active_v(&self, c: usize) -> Vec<usize> {
        self.test.active_v(self.mesh, c, &self.constrained)
    }

    /// Local test dimension: active `v`, then `w_x`, then `w_y`.
    pub fn test_dim(&self, c: usize) -> usize {
        self.active_v(c).len() + 2 * self.test.w_dim()
    }

    fn volume_points(&self, frame: &CellFrame, order: usize) -> Result<(CellEval, Vec<f64>)> {
        let rule = quadrature(self.mesh.element_type(), order)?;
        let pts = frame.points(&rule.points);
        let w = rule.weights.iter().zip(&pts.det).map(|(w, d)| w * d).collect();
        Ok((pts, w))
    }

    /// Gram matrix of the broken inner product
    /// `h² ∇v·∇δv + v δv + w·δw` on the local test basis.
    pub fn local_gram(&self, c: usize) -> Result<DenseMatrix> {
        let frame = self.frame(c)?;
        self.gram_with(&frame, &self.active_v(c))
    }

    fn gram_with(&self, frame: &CellFrame, active: &[usize]) -> Result<DenseMatrix> {
        let (pts, wq) = self.volume_points(frame, 2 * self.test.degree() + 2)?;
        let te = TestEval::new(&self.test, &pts);
        let h2 = frame.geometry.diameter.powi(2);
        let nva = active.len();
        let nb = te.nb;
        let n = nva + 2 * nb;
        let mut g = DenseMatrix::zeros(n, n);
        for q in 0..pts.len() {
            let v = &te.v[q * nb..(q + 1) * nb];
            let gr = &te.grad[q * nb..(q + 1) * nb];
            let w = wq[q];
            for (ia, &a) in active.iter().enumerate() {
                let row = g.row_mut(ia);
                for (ib, &b) in active.iter().enumerate() {
                    row[ib] += w * (h2 * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]) + v[a] * v[b]);
                }
            }
            for a in 0..nb {
                for b in 0..nb {
                    let m = w * v[a] * v[b];
                    g.row_mut(nva + a)[nva + b] += m;
                    g.row_mut(nva + nb + a)[nva + nb + b] += m;
                }
            }
        }
        Ok(g)
    }

    /// Local bilinear form: rows are local trial dofs, columns local test
    /// functions.
    pub fn local_bilinear(&self, c: usize) -> Result<DenseMatrix> {
        let frame = self.frame(c)?;
        self.bilinear_with(&frame, &self.active_v(c))
    }

    fn bilinear_with(&self, frame: &CellFrame, active: &[usize]) -> Result<DenseMatrix> {
        let c = frame.cell;
        let dual = self.problem.direction == Direction::Dual;
        let (pts, wq) = self.volume_points(frame, self.bilinear_order)?;
        let tr = TrialEval::new(&self.trial, frame, &pts);
        let te = TestEval::new(&self.test, &pts);
        let (ns, nf, nb) = (tr.ns, tr.nf, te.nb);
        let nva = active.len();
        let ox = nva;
        let oy = nva + nb;
        let mut bl = DenseMatrix::zeros(ns + nf, nva + 2 * nb);
        let sb = if dual { -1.0 } else { 1.0 };
        for q in 0..pts.len() {
            let w = wq[q];
            let b = (self.problem.convection)(pts.x[q]);
            let v = &te.v[q * nb..(q + 1) * nb];
            let gv = &te.grad[q * nb..(q + 1) * nb];
            for i in 0..ns {
                let gu = tr.grad_u[q * ns + i];
                let bgu = w * sb * (b[0] * gu[0] + b[1] * gu[1]);
                let wg = if dual { gu } else { self.problem.apply_diffusion(gu) };
                let row = bl.row_mut(i);
                for (ia, &a) in active.iter().enumerate() {
                    row[ia] += bgu * v[a];
                }
                for j in 0..nb {
                    row[ox + j] += w * wg[0] * v[j];
                    row[oy + j] += w * wg[1] * v[j];
                }
            }
            for k in 0..nf {
                let psi = tr.flux[q * nf + k];
                let dpsi = if dual { self.problem.apply_diffusion(psi) } else { psi };
                let row = bl.row_mut(ns + k);
                for (ia, &a) in active.iter().enumerate() {
                    row[ia] += w * (dpsi[0] * gv[a][0] + dpsi[1] * gv[a][1]);
                }
                for j in 0..nb {
                    row[ox + j] -= w * psi[0] * v[j];
                    row[oy + j] -= w * psi[1] * v[j];
                }
            }
        }
        // −∮ (q·n) v on interior edges only
        let et = self.mesh.element_type();
        let eq = edge_quadrature(self.bilinear_order)?;
        for (k, &e) in self.mesh.cell_edges(c).iter().enumerate() {
            if self.mesh.is_boundary_edge(e) {
                continue;
            }
            let pts = frame.edge_points(et, k, &eq.points);
            let tr = TrialEval::new(&self.trial, frame, &pts);
            let te = TestEval::new(&self.test, &pts);
            let n = frame.geometry.normals[k];
            let len = frame.geometry.edge_lengths[k];
            for q in 0..pts.len() {
                let w = eq.weights[q] * len;
                let v = &te.v[q * nb..(q + 1) * nb];
                for kk in 0..nf {
                    let psi = tr.flux[q * nf + kk];
                    let dpsi = if dual { self.problem.apply_diffusion(psi) } else { psi };
                    let flux = w * (dpsi[0] * n[0] + dpsi[1] * n[1]);
                    let row = bl.row_mut(ns + kk);
                    for (ia, &a) in active.iter().enumerate() {
                        row[ia] -= flux * v[a];
                    }
                }
            }
        }
        Ok(bl)
    }

    /// Load vector against the local test basis.
    pub fn local_load(&self, c: usize) -> Result<Vec<f64>> {
        let frame = self.frame(c)?;
        self.load_with(&frame, &self.active_v(c))
    }

    fn load_with(&self, frame: &CellFrame, active: &[usize]) -> Result<Vec<f64>> {
        let c = frame.cell;
        let nb = self.test.w_dim();
        let nva = active.len();
        let mut f = vec![0.0; nva + 2 * nb];
        match &self.load {
            Load::Source => {
                let (pts, wq) = self.volume_points(frame, self.load_order)?;
                let te = TestEval::new(&self.test, &pts);
                for q in 0..pts.len() {
                    let s = wq[q] * (self.problem.source)(pts.x[q]);
                    for (ia, &a) in active.iter().enumerate() {
                        f[ia] += s * te.v[q * nb + a];
                    }
                }
                if self.problem.direction == Direction::Primal {
                    let eq = edge_quadrature(self.load_order)?;
                    for (k, &e) in self.mesh.cell_edges(c).iter().enumerate() {
                        if self.mesh.boundary_tag(e) != Some(BoundaryTag::Neumann) {
                            continue;
                        }
                        let pts = frame.edge_points(self.mesh.element_type(), k, &eq.points);
                        let te = TestEval::new(&self.test, &pts);
                        let len = frame.geometry.edge_lengths[k];
                        for q in 0..pts.len() {
                            let s = eq.weights[q] * len * (self.problem.neumann)(pts.x[q]);
                            for (ia, &a) in active.iter().enumerate() {
                                f[ia] += s * te.v[q * nb + a];
                            }
                        }
                    }
                }
            }
            Load::Functional(qoi) => {
                if let Some(rule) = qoi_cell_rule(qoi, self.mesh, c, self.load_order)? {
                    let xi: Vec<Point> = rule.points.iter().map(|&x| frame.map.inverse(x)).collect();
                    let pts = frame.points(&xi);
                    let te = TestEval::new(&self.test, &pts);
                    for q in 0..pts.len() {
                        let w = rule.weights[q];
                        match qoi.kind {
                            QoIKind::AvgU => {
                                for (ia, &a) in active.iter().enumerate() {
                                    f[ia] += w * te.v[q * nb + a];
                                }
                            }
                            // ∂u/∂x = (D⁻¹(D∇u − q))_x + (D⁻¹q)_x: the functional is
                            // carried by the w rows, the first part is added back
                            // when pairing (see goal::element_indicators).
                            QoIKind::AvgDuDx => {
                                let d = inverse2(&self.problem.diffusion());
                                for j in 0..nb {
                                    f[nva + j] += w * d[0][0] * te.v[q * nb + j];
                                    f[nva + nb + j] += w * d[1][0] * te.v[q * nb + j];
                                }
                            }
                            QoIKind::AvgQx | QoIKind::LineAvgQx => {
                                for j in 0..nb {
                                    f[nva + j] += w * te.v[q * nb + j];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Gram matrix, bilinear block and load of cell `c`, with the Gram
    /// matrix factorized.
    pub fn element_system(&self, c: usize) -> Result<ElementSystem> {
        let frame = self.frame(c)?;
        let active = self.active_v(c);
        let gram = self.gram_with(&frame, &active)?;
        let bloc = self.bilinear_with(&frame, &active)?;
        let floc = self.load_with(&frame, &active)?;
        let chol = Cholesky::factor(&gram)
            .map_err(|e| Error::GramNotSpd { element: c, row: e.row, pivot: e.pivot })?;
        Ok(ElementSystem { cell: c, gram, bloc, floc, chol })
    }
}

/// Local matrices of one cell.
pub struct ElementSystem {
    pub cell: usize,
    /// Gram matrix `G` of the test inner product.
    pub gram: DenseMatrix,
    /// `B_loc[i][a] = B(trial_i; test_a)`
    pub bloc: DenseMatrix,
    /// Load against the test basis.
    pub floc: Vec<f64>,
    chol: Cholesky,
}

impl ElementSystem {
    /// `T = G⁻¹ B_locᵀ`: column `i` holds the optimal test function of
    /// local trial dof `i`.
    pub fn optimal_test(&self) -> DenseMatrix {
        self.chol.solve_matrix(&self.bloc.transpose())
    }

    /// `(K_loc, F_loc) = (B G⁻¹ Bᵀ, B G⁻¹ f)`, symmetric by construction.
    pub fn condensed(&self) -> (DenseMatrix, Vec<f64>) {
        let c = self.chol.forward_matrix(&self.bloc.transpose());
        let mut g = self.floc.clone();
        self.chol.forward_in_place(&mut g);
        (c.tr_matmul(&c), c.tr_matvec(&g))
    }

    /// Residual `f − Bᵀ u` against the local test basis.
    pub fn test_residual(&self, u_loc: &[f64]) -> Vec<f64> {
        let bu = self.bloc.tr_matvec(u_loc);
        self.floc.iter().zip(bu).map(|(f, b)| f - b).collect()
    }

    /// `rᵀ G⁻¹ r`
    pub fn riesz_norm_squared(&self, r: &[f64]) -> f64 {
        let mut y = r.to_vec();
        self.chol.forward_in_place(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    pub fn min_pivot(&self) -> f64 {
        self.chol.min_pivot()
    }
}
