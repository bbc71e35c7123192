use std::sync::Arc;

use proptest::prelude::*;

use avsfe::adapt::mark;
use avsfe::avs::{
    assemble, energy_residual_norm, solve_spd, solve_system, Discretization, ExactSolution, Formulation, ProblemDef,
    SolutionField,
};
use avsfe::bench::{by_name, Benchmark, LayerFactor, BENCHMARK_NAMES};
use avsfe::dense::symmetric_eigenvalues;
use avsfe::goal::{
    dual_solve, element_indicators, estimate, estimate_with_primal, residual_pairing, Approach, QoIDef,
};
use avsfe::mesh::{ElementType, Mesh, Rect};
use avsfe::spaces::{FluxFamily, LagrangeBasis, MAX_DEGREE, NOT_FREE};

fn disc_of(b: &Benchmark) -> Discretization {
    Discretization::new(b.defaults.family, b.defaults.p_primal)
}

fn suite() -> Vec<(Benchmark, Mesh)> {
    BENCHMARK_NAMES
        .iter()
        .flat_map(|name| {
            let b = by_name(name).unwrap();
            [2, 4].map(|n| (b.clone(), b.mesh(b.defaults.element_type, n).unwrap()))
        })
        .collect()
}

#[test]
fn global_matrix_is_spd_on_suite() {
    for (b, mesh) in suite() {
        let problem = b.problem().unwrap();
        for dir in [problem.clone(), problem.dual()] {
            let form = Formulation::new(&mesh, &dir, disc_of(&b)).unwrap();
            let sys = assemble(&form).unwrap();
            assert!(sys.relative_asymmetry() < 1e-12, "{}: asymmetry {}", b.name, sys.relative_asymmetry());
            let ev = symmetric_eigenvalues(&sys.to_dense());
            let max = ev.iter().cloned().fold(0.0, f64::max);
            let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 1e-12 * max, "{} n={}: min eigenvalue {min:e}, max {max:e}", b.name, mesh.num_cells());
            solve_spd(&sys).unwrap();
        }
    }
}

#[test]
fn element_products_are_psd_and_riesz_identity_holds() {
    for (b, mesh) in suite() {
        let problem = b.problem().unwrap();
        let form = Formulation::new(&mesh, &problem, disc_of(&b)).unwrap();
        for c in 0..mesh.num_cells() {
            let es = form.element_system(c).unwrap();
            let t = es.optimal_test();
            let gt = es.gram.matmul(&t);
            let bt = es.bloc.transpose();
            let scale = bt.max_abs().max(1.0);
            let res = (0..gt.rows())
                .flat_map(|i| (0..gt.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (gt.row(i)[j] - bt.row(i)[j]).abs())
                .fold(0.0, f64::max);
            assert!(res <= 1e-11 * scale, "{} cell {c}: Riesz residual {res:e}", b.name);
            let (k, _) = es.condensed();
            let ev = symmetric_eigenvalues(&k);
            let max = ev.iter().cloned().fold(0.0, f64::max);
            for e in ev {
                assert!(e >= -1e-12 * max.max(1.0), "{} cell {c}: eigenvalue {e:e}", b.name);
            }
        }
    }
}

#[test]
fn galerkin_orthogonality_against_optimal_test_functions() {
    for (b, mesh) in suite() {
        let problem = b.problem().unwrap();
        let form = Formulation::new(&mesh, &problem, disc_of(&b)).unwrap();
        let sol = solve_system(&form).unwrap();
        let nf = form.trial.num_free();
        let mut acc = vec![0.0; nf];
        let mut mag = vec![0.0; nf];
        for c in 0..mesh.num_cells() {
            let es = form.element_system(c).unwrap();
            let t = es.optimal_test();
            let r = es.test_residual(&sol.local(c));
            for (i, &d) in form.trial.cell_dofs(c).iter().enumerate() {
                let f = form.trial.free_index(d);
                if f == NOT_FREE {
                    continue;
                }
                for (a, ra) in r.iter().enumerate() {
                    let term = t.row(a)[i] * ra;
                    acc[f] += term;
                    mag[f] += term.abs();
                }
            }
        }
        let scale = mag.iter().cloned().fold(0.0, f64::max);
        let worst = acc.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-9 * scale, "{}: orthogonality defect {worst:e} vs {scale:e}", b.name);
    }
}

#[test]
fn indicators_add_up_on_every_benchmark() {
    for (b, mesh) in suite() {
        let problem = b.problem().unwrap();
        for (name, qoi) in &b.qois {
            let approaches: &[Approach] = if b.defaults.family == FluxFamily::Lagrange {
                &[Approach::Classical, Approach::Alternative]
            } else {
                &[Approach::Alternative]
            };
            for &a in approaches {
                let est = estimate(&problem, &mesh, qoi, disc_of(&b), b.defaults.p_dual, a, None).unwrap();
                let sum: f64 = est.report.indicators.iter().sum();
                let eta = est.report.estimate;
                assert!((sum - eta).abs() <= 1e-12 * eta.abs(), "{} {name} {a:?}", b.name);
                let pairing = residual_pairing(&problem, &mesh, &est.primal, &est.dual).unwrap();
                assert!((pairing - eta).abs() <= 1e-12 * eta.abs());
            }
        }
    }
}

#[test]
fn classical_estimate_vanishes_at_equal_degree() {
    let b = by_name("laplace-bump").unwrap();
    let problem = b.problem().unwrap();
    let qoi = b.default_qoi();
    for n in [2, 4] {
        let mesh = b.mesh(ElementType::Quadrilateral, n).unwrap();
        let disc = Discretization::new(FluxFamily::Lagrange, 2);
        let primal = solve_system(&Formulation::new(&mesh, &problem, disc).unwrap()).unwrap();
        let same = estimate_with_primal(&problem, &mesh, qoi, primal.clone(), disc, Approach::Classical, None).unwrap();
        let higher =
            estimate_with_primal(&problem, &mesh, qoi, primal, disc.with_degree(3), Approach::Classical, None).unwrap();
        assert!(
            same.report.estimate.abs() <= 1e-9 * higher.report.estimate.abs().max(1e-3),
            "n={n}: equal-degree estimate {:e}",
            same.report.estimate
        );
    }
}

#[test]
fn estimate_is_linear_in_the_qoi() {
    let b = by_name("convdiff-pe100").unwrap();
    let problem = b.problem().unwrap();
    let mesh = b.mesh(ElementType::Quadrilateral, 4).unwrap();
    for (_, q) in &b.qois {
        for alpha in [-2.5, 3.0] {
            let scaled = q.scaled(alpha);
            for a in [Approach::Classical, Approach::Alternative] {
                let e1 = estimate(&problem, &mesh, q, disc_of(&b), 3, a, None).unwrap().report.estimate;
                let e2 = estimate(&problem, &mesh, &scaled, disc_of(&b), 3, a, None).unwrap().report.estimate;
                assert!((e2 - alpha * e1).abs() <= 1e-12 * (alpha * e1).abs().max(1e-300), "{a:?} {alpha}");
            }
        }
    }
}

/// `u = x(1−x)y(1−y)` lies in the biquadratic trial space, and so does `∇u`.
fn representable_problem() -> ProblemDef {
    let f = Arc::new(|p: [f64; 2]| 2.0 * p[1] * (1.0 - p[1]) + 2.0 * p[0] * (1.0 - p[0]));
    ProblemDef::isotropic(1.0, [0.0, 0.0], f).unwrap().with_exact(ExactSolution {
        u: Arc::new(|p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])),
        grad: Arc::new(|p| [(1.0 - 2.0 * p[0]) * p[1] * (1.0 - p[1]), p[0] * (1.0 - p[0]) * (1.0 - 2.0 * p[1])]),
    })
}

#[test]
fn representable_solution_is_reproduced() {
    let problem = representable_problem();
    for n in [1, 3] {
        let mesh = Mesh::build_structured(ElementType::Quadrilateral, n, Rect::UNIT).unwrap();
        let form = Formulation::new(&mesh, &problem, Discretization::new(FluxFamily::Lagrange, 2)).unwrap();
        let sol = solve_system(&form).unwrap();
        assert!(energy_residual_norm(&form, &sol).unwrap() < 1e-10);
        let (eu, eq) = avsfe::avs::l2_errors(&mesh, &problem, &sol).unwrap();
        assert!(eu < 1e-10 && eq < 1e-10, "n={n}: {eu:e} {eq:e}");
        let qoi = QoIDef::avg_u(Rect::new(0.5, 0.5, 1.0, 1.0)).unwrap();
        for a in [Approach::Classical, Approach::Alternative] {
            let dual = dual_solve(a, &problem, &qoi, &mesh, Discretization::new(FluxFamily::Lagrange, 3)).unwrap();
            let eta = residual_pairing(&problem, &mesh, &sol, &dual).unwrap();
            assert!(eta.abs() < 1e-9, "{a:?}: {eta:e}");
        }
    }
}

#[test]
fn zero_dual_gives_zero_indicators() {
    let b = by_name("convdiff-pe100").unwrap();
    let problem = b.problem().unwrap();
    let mesh = b.mesh(ElementType::Quadrilateral, 2).unwrap();
    let primal = solve_system(&Formulation::new(&mesh, &problem, disc_of(&b)).unwrap()).unwrap();
    let mut dual = dual_solve(Approach::Alternative, &problem, b.default_qoi(), &mesh, disc_of(&b).with_degree(3)).unwrap();
    dual.field = SolutionField::zeros(dual.field.space.clone());
    let ind = element_indicators(&problem, &mesh, &primal, &dual).unwrap();
    assert!(ind.iter().all(|&e| e == 0.0));
    let other = b.mesh(ElementType::Quadrilateral, 3).unwrap();
    assert!(element_indicators(&problem, &other, &primal, &dual).is_err());
}

#[test]
fn dual_form_sign_structure() {
    // Flipping b in the dual form changes only the convection block.
    let mesh = Mesh::build_skewed(3, by_name("convdiff-pe200-skew").unwrap().skew.unwrap()).unwrap();
    let zero: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync> = Arc::new(|_| 0.0);
    let make = |b: [f64; 2]| ProblemDef::isotropic(0.05, b, zero.clone()).unwrap().dual();
    let disc = Discretization::new(FluxFamily::Lagrange, 2);
    let c = 4;
    let bl = |p: &ProblemDef| Formulation::new(&mesh, p, disc).unwrap().local_bilinear(c).unwrap();
    let (plus, minus, none) = (bl(&make([0.7, -0.3])), bl(&make([-0.7, 0.3])), bl(&make([0.0, 0.0])));
    let scale = plus.max_abs();
    let (ns, _) = Formulation::new(&mesh, &make([0.0, 0.0]), disc).unwrap().trial.local_counts();
    let nv = Formulation::new(&mesh, &make([0.0, 0.0]), disc).unwrap().active_v(c).len();
    let mut conv_entries = 0;
    for i in 0..plus.rows() {
        for j in 0..plus.cols() {
            let (p, m, z) = (plus.row(i)[j], minus.row(i)[j], none.row(i)[j]);
            assert!(((p - z) + (m - z)).abs() <= 1e-13 * scale, "({i},{j})");
            if i >= ns || j >= nv {
                assert!((p - z).abs() <= 1e-13 * scale, "({i},{j}) outside the scalar/v block");
            } else if (p - z).abs() > 1e-12 * scale {
                conv_entries += 1;
            }
        }
    }
    assert!(conv_entries > 0);
}

#[test]
fn primal_and_dual_forms_agree_for_pure_diffusion() {
    let f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync> = Arc::new(|_| 1.0);
    let primal = ProblemDef::isotropic(1.0, [0.0, 0.0], f).unwrap();
    let dual = primal.dual();
    for et in [ElementType::Quadrilateral, ElementType::Triangle] {
        let mesh = Mesh::build_structured(et, 3, Rect::UNIT).unwrap();
        for family in [FluxFamily::Lagrange, FluxFamily::RaviartThomas] {
            if family == FluxFamily::RaviartThomas && et == ElementType::Quadrilateral {
                continue;
            }
            let disc = Discretization::new(family, 2);
            let a = Formulation::new(&mesh, &primal, disc).unwrap().local_bilinear(5).unwrap();
            let b = Formulation::new(&mesh, &dual, disc).unwrap().local_bilinear(5).unwrap();
            let scale = a.max_abs();
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    assert!((a.row(i)[j] - b.row(i)[j]).abs() <= 1e-13 * scale);
                }
            }
        }
    }
}

#[test]
fn manufactured_sources_solve_the_pde() {
    let grid: Vec<[f64; 2]> =
        (0..=40).flat_map(|i| (0..=40).map(move |j| [i as f64 / 40.0, j as f64 / 40.0])).collect();
    for name in BENCHMARK_NAMES {
        let b = by_name(name).unwrap();
        let r = b.pde_residual(&grid);
        assert!(r <= 1e-8, "{name}: relative PDE residual {r:e}");
    }
}

#[test]
fn layer_factor_is_finite_at_high_peclet() {
    for k in [200.0, -200.0, 2000.0] {
        let g = LayerFactor::new(k);
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            assert!(g.g(t).is_finite() && g.dg(t).is_finite() && g.d2g(t).is_finite(), "k={k} t={t}");
        }
    }
    let b = by_name("convdiff-pe200-skew").unwrap();
    for i in 0..1000 {
        let p = [i as f64 / 999.0, 1.0 - i as f64 / 999.0];
        assert!(b.analytic.u(p).is_finite());
        assert!(b.analytic.grad(p).iter().all(|v| v.is_finite()));
        assert!(b.analytic.hessian(p).iter().all(|v| v.is_finite()));
        assert!(b.source_at(p).is_finite());
    }
}

#[test]
fn dual_layers_sit_at_the_inflow_edges() {
    let b = by_name("convdiff-pe100").unwrap();
    let problem = b.problem().unwrap();
    let mesh = b.mesh(ElementType::Quadrilateral, 16).unwrap();
    let dual = dual_solve(Approach::Alternative, &problem, b.default_qoi(), &mesh, Discretization::new(FluxFamily::Lagrange, 3))
        .unwrap();
    let vals = avsfe::io::vertex_values(&dual.field, &mesh);
    let (mut imax, mut vmax) = (0, 0.0);
    for v in 0..mesh.num_vertices() {
        if vals[v].abs() > vmax {
            vmax = vals[v].abs();
            imax = v;
        }
    }
    // The dual is largest just downstream of its boundary layers at x = 0 and y = 0.
    let p = mesh.vertex(imax);
    assert!(p[0] > 0.3 && p[1] > 0.3, "dual peak at {p:?}");
    let mut max_jump: f64 = 0.0;
    let mut at = [0.0, 0.0];
    for e in 0..mesh.num_edges() {
        let [a, c] = mesh.edge(e);
        let d = (vals[a] - vals[c]).abs();
        if d > max_jump {
            max_jump = d;
            at = mesh.vertex(a);
        }
    }
    assert!(at[0] < 0.1 || at[1] < 0.1, "steepest dual gradient at {at:?}");
}

fn rel_poly(coef: &[f64], p: usize, et: ElementType, x: [f64; 2]) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    for i in 0..=p {
        for j in 0..=p {
            if et == ElementType::Triangle && i + j > p {
                continue;
            }
            s += coef[k % coef.len()] * x[0].powi(i as i32) * x[1].powi(j as i32);
            k += 1;
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mark_is_scale_invariant(ind in prop::collection::vec(-10.0f64..10.0, 1..60), alpha in prop::sample::select(vec![-1e6, -3.0, -1e-6, 1e-9, 0.5, 7.0, 1e8]), delta in 0.01f64..0.99) {
        let scaled: Vec<f64> = ind.iter().map(|e| alpha * e).collect();
        prop_assert_eq!(mark(&ind, delta).unwrap(), mark(&scaled, delta).unwrap());
    }

    #[test]
    fn mark_is_monotone_in_delta(ind in prop::collection::vec(-10.0f64..10.0, 1..60), d1 in 0.01f64..0.99, d2 in 0.01f64..0.99) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let coarse = mark(&ind, lo).unwrap();
        for i in mark(&ind, hi).unwrap() {
            prop_assert!(coarse.contains(&i));
        }
    }

    #[test]
    fn lagrange_interpolation_is_exact(coef in prop::collection::vec(-2.0f64..2.0, 16), pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 20), tri in any::<bool>(), p in 1usize..=MAX_DEGREE) {
        let et = if tri { ElementType::Triangle } else { ElementType::Quadrilateral };
        let basis = LagrangeBasis::new(et, p).unwrap();
        let nodal: Vec<f64> = basis.nodes().iter().map(|&x| rel_poly(&coef, p, et, x)).collect();
        for (a, b) in pts {
            let x = if tri { [a * (1.0 - b), b] } else { [2.0 * a - 1.0, 2.0 * b - 1.0] };
            let (v, _) = basis.eval(x);
            let interp: f64 = v.iter().zip(&nodal).map(|(v, c)| v * c).sum();
            let exact = rel_poly(&coef, p, et, x);
            prop_assert!((interp - exact).abs() < 1e-12 * (1.0 + exact.abs()), "{} vs {}", interp, exact);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bisection_keeps_meshes_conforming(seeds in prop::collection::vec(prop::collection::vec(0usize..10_000, 1..6), 1..7), start in 1usize..4) {
        let mut mesh = Mesh::build_structured(ElementType::Triangle, start, Rect::UNIT).unwrap();
        let area = mesh.total_area();
        for picks in seeds {
            let marked: Vec<usize> = picks.iter().map(|s| s % mesh.num_cells()).collect();
            let next = mesh.bisect_marked(&marked).unwrap();
            next.audit().unwrap();
            prop_assert!(next.num_cells() > mesh.num_cells());
            prop_assert!((next.total_area() - area).abs() < 1e-12);
            mesh = next;
        }
        let fine = mesh.uniform_refine();
        fine.audit().unwrap();
        prop_assert_eq!(fine.num_cells(), 4 * mesh.num_cells());
    }

    #[test]
    fn uniform_refinement_keeps_meshes_conforming(n in 1usize..5, levels in 1usize..3, quad in any::<bool>(), skew in any::<bool>()) {
        let mut mesh = if skew {
            Mesh::build_skewed(n.max(2), by_name("convdiff-pe200-skew").unwrap().skew.unwrap()).unwrap()
        } else {
            let et = if quad { ElementType::Quadrilateral } else { ElementType::Triangle };
            Mesh::build_structured(et, n, Rect::UNIT).unwrap()
        };
        for _ in 0..levels {
            mesh = mesh.uniform_refine();
            mesh.audit().unwrap();
        }
    }
}
