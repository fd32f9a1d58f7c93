use minmix::assembly::{assemble, assemble_load, BoundaryKind, SaddleSystem};
use minmix::convergence::{run_level, StudyConfig};
use minmix::solver::{pin_frame_kernel, solve, KktOperator, Method, Pinning, SolveOptions, DENSE_LIMIT};
use minmix::{Error, IsotropicMaterial, ManufacturedSolution, Problem, TensorGrid};

fn loaded(problem: Problem, n: usize) -> SaddleSystem<f64> {
    let dim = problem.dim();
    let grid = TensorGrid::uniform(dim, n).unwrap();
    let mat = IsotropicMaterial::new(1.0, 0.5, dim).unwrap();
    let exact = ManufacturedSolution::new(problem, mat).unwrap();
    let bc = if problem.is_traction() {
        BoundaryKind::Traction
    } else {
        BoundaryKind::Displacement
    };
    let sys = assemble(&grid, &mat, bc).unwrap();
    let f = assemble_load(&sys.layout, |x| exact.load(x), 1).unwrap();
    sys.with_load(f).unwrap()
}

fn dense() -> SolveOptions {
    SolveOptions {
        method: Method::Dense,
        ..Default::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Stress values at a few points per cell; frame coefficients themselves
/// are only defined up to checkerboards.
fn samples(sol: &minmix::Solution) -> Vec<f64> {
    let grid = sol.stress.layout().grid().clone();
    let pts = [[-0.5, 0.25], [0.0, 0.0], [0.7, -0.9]];
    let mut out = Vec::new();
    for cell in grid.cell_lattice().iter() {
        for p in &pts {
            let x: Vec<f64> = (0..grid.dim()).map(|a| p[a % 2]).collect();
            out.extend_from_slice(sol.stress.evaluate(&cell, &x).unwrap().as_slice());
        }
    }
    out
}

#[test]
fn dense_and_minres_agree() {
    for problem in [Problem::E1, Problem::E2] {
        for n in [1, 2, 4] {
            let sys = loaded(problem, n);
            let d = solve(&sys, &dense()).unwrap();
            assert!(d.report.converged, "{problem} N={n}");
            let m = solve(&sys, &SolveOptions::default()).unwrap();
            assert!(m.report.converged);
            let du = max_diff(d.displacement.values(), m.displacement.values());
            let ds = max_diff(&samples(&d), &samples(&m));
            assert!(du < 1e-8 && ds < 1e-8, "{problem} N={n}: {du:e} {ds:e}");
        }
    }
}

#[test]
fn pinning_choice_does_not_change_the_solution() {
    for (problem, n) in [(Problem::E1, 4), (Problem::Traction, 4), (Problem::E3, 2)] {
        let sys = loaded(problem, n);
        let a = solve(&sys, &SolveOptions::default()).unwrap();
        let b = solve(
            &sys,
            &SolveOptions {
                pinning: Pinning::SlabFar,
                ..Default::default()
            },
        )
        .unwrap();
        let c = solve(
            &sys,
            &SolveOptions {
                pinning: Pinning::Off,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.report.pinned, b.report.pinned);
        for other in [&b, &c] {
            assert!(max_diff(a.displacement.values(), other.displacement.values()) < 1e-8);
            assert!(max_diff(&samples(&a), &samples(other)) < 1e-8);
        }
    }
}

#[test]
fn unpinned_operator_is_singular() {
    let sys = loaded(Problem::E1, 2);
    let k = KktOperator::new(&sys, &[]).to_dense();
    assert!(matches!(k.lu(), Err(Error::Singular(_))));
    let pinned = pin_frame_kernel(&sys, Pinning::SlabOrigin);
    let k = KktOperator::new(&sys, &pinned).to_dense();
    assert!(k.lu().is_ok());
    assert!(k.max_asymmetry() == 0.0);
    let opts = SolveOptions {
        pinning: Pinning::Off,
        ..dense()
    };
    assert!(matches!(solve(&sys, &opts), Err(Error::Singular(_))));
}

#[test]
fn dense_path_refuses_large_systems() {
    let sys = loaded(Problem::E1, 40);
    assert!(sys.size() > DENSE_LIMIT);
    assert!(matches!(solve(&sys, &dense()), Err(Error::DenseTooLarge { .. })));
}

#[test]
fn minres_history_is_monotone() {
    let sys = loaded(Problem::E2, 8);
    let sol = solve(&sys, &SolveOptions::default()).unwrap();
    let h = &sol.report.history;
    assert!(h.len() >= sol.report.iterations);
    assert!(h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
    assert!(sol.report.residual <= 1e-9);
}

#[test]
fn iteration_cap_reports_failure() {
    let sys = loaded(Problem::E1, 8);
    let opts = SolveOptions {
        max_iters: Some(3),
        ..Default::default()
    };
    let sol = solve(&sys, &opts).unwrap();
    assert!(!sol.report.converged);
    assert_eq!(sol.report.iterations, 3);
    assert!(matches!(sol.ensure_converged(), Err(Error::NotConverged { iterations: 3, .. })));
}

#[test]
fn traction_example() {
    let cfg = StudyConfig::new(Problem::Traction, vec![3]);
    let res = run_level::<f64>(&cfg, 3).unwrap();
    let r = &res.record;
    assert!((r.err_u - 0.12546).abs() < 5e-6, "{}", r.err_u);
    // normal faces, edge midpoints, rigid motions
    assert_eq!(res.solution.multipliers.len(), 2 * 8 + (2 * 8 - 1) + 3);
}

#[test]
fn single_precision_smoke() {
    let mut cfg = StudyConfig::new(Problem::E1, vec![3]);
    cfg.solver.tol = 1e-5;
    let r32 = run_level::<f32>(&cfg, 3).unwrap().record;
    cfg.solver.tol = 1e-10;
    let r64 = run_level::<f64>(&cfg, 3).unwrap().record;
    for (a, b) in [(r32.err_u, r64.err_u), (r32.err_sigma, r64.err_sigma), (r32.err_div, r64.err_div)] {
        assert!((a - b).abs() <= 1e-3 * b, "{a} vs {b}");
    }
}
