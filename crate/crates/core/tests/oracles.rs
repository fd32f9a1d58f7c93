//! Assembled operators against direct quadrature, and study values against
//! an independent dense prototype of the same discretization.

use minmix::assembly::{assemble, BoundaryKind};
use minmix::convergence::{run_study, stress_l2_error_with, StudyConfig};
use minmix::reference::gauss_rule;
use minmix::spaces::{DisplacementField, StressField};
use minmix::{IsotropicMaterial, Problem, TensorGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stress(sys: &minmix::SaddleSystem, rng: &mut ChaCha8Rng) -> StressField<f64> {
    let c = (0..sys.stress_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    StressField::from_coeffs(sys.layout.clone(), c).unwrap()
}

#[test]
fn compliance_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (dim, cells) in [(2, vec![3, 2]), (3, vec![2, 1, 2])] {
        let grid = TensorGrid::new(dim, &cells).unwrap();
        let mat = IsotropicMaterial::new(rng.gen_range(0.1..5.0), rng.gen_range(0.1..2.0), dim).unwrap();
        let sys = assemble(&grid, &mat, BoundaryKind::Displacement).unwrap();
        let x = random_stress(&sys, &mut rng);
        let y = random_stress(&sys, &mut rng);
        let my = sys.m.matvec(y.coeffs()).unwrap();
        let assembled: f64 = x.coeffs().iter().zip(&my).map(|(a, b)| a * b).sum();
        let rule = gauss_rule::<f64>(dim, 3).unwrap();
        let jac = grid.cell_volume::<f64>() / 2f64.powi(dim as i32);
        let mut direct = 0.0;
        for cell in grid.cell_lattice().iter() {
            for (xh, w) in rule.iter() {
                let sx = x.evaluate(&cell, xh).unwrap();
                let sy = y.evaluate(&cell, xh).unwrap();
                direct += w * jac * mat.compliance_apply(&sx).ddot(&sy);
            }
        }
        assert!((assembled - direct).abs() < 1e-12 * (1.0 + direct.abs()), "{assembled} {direct}");
    }
}

#[test]
fn divergence_form_matches_cell_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (dim, n) in [(2, 4), (3, 2)] {
        let grid = TensorGrid::uniform(dim, n).unwrap();
        let sys = assemble(&grid, &IsotropicMaterial::standard(dim), BoundaryKind::Displacement).unwrap();
        let s = random_stress(&sys, &mut rng);
        let v = DisplacementField::from_values(
            sys.layout.clone(),
            (0..sys.disp_len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let bs = sys.b.matvec(s.coeffs()).unwrap();
        let assembled: f64 = bs.iter().zip(v.values()).map(|(a, b)| a * b).sum();
        // divergence by central differences of the field inside each cell
        let h = grid.spacing::<f64>(0);
        let mut direct = 0.0;
        for (cl, cell) in grid.cell_lattice().iter().enumerate() {
            let mut div = vec![0.0; dim];
            for b in 0..dim {
                let mut p = vec![0.1; dim];
                let mut m = vec![0.1; dim];
                p[b] += 0.5;
                m[b] -= 0.5;
                let tp = s.evaluate(&cell, &p).unwrap();
                let tm = s.evaluate(&cell, &m).unwrap();
                for c in 0..dim {
                    // reference step of 1 is a physical step of h/2
                    div[c] += (tp.get(c, b) - tm.get(c, b)) / (h / 2.0);
                }
            }
            let uv = v.cell_value(cl);
            direct += grid.cell_volume::<f64>() * div.iter().zip(uv).map(|(a, b)| a * b).sum::<f64>();
        }
        assert!((assembled - direct).abs() < 1e-10 * (1.0 + direct.abs()), "{assembled} {direct}");
    }
}

#[test]
fn error_norm_is_quadrature_converged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dim in [2, 3] {
        let grid = TensorGrid::uniform(dim, 3).unwrap();
        let sys = assemble(&grid, &IsotropicMaterial::standard(dim), BoundaryKind::Displacement).unwrap();
        let a = random_stress(&sys, &mut rng);
        let b = random_stress(&sys, &mut rng);
        let g3 = stress_l2_error_with(&a, &b, 3).unwrap();
        let g4 = stress_l2_error_with(&a, &b, 4).unwrap();
        assert!((g3 - g4).abs() < 1e-9);
    }
}

/// Values from a dense reference implementation written independently
/// (explicit global basis functions, generic linear solve), printed to
/// seven digits.
#[test]
#[allow(clippy::approx_constant)]
fn study_matches_reference_prototype() {
    let expected: [(Problem, &[(usize, f64, f64, f64)]); 4] = [
        (
            Problem::E1,
            &[
                (1, 0.0589256, 0.7288690, 1.4142136),
                (2, 0.0244671, 0.2458543, 0.3535534),
                (3, 0.0071359, 0.0658653, 0.0883883),
                (4, 0.0018972, 0.0170822, 0.0220971),
            ],
        ),
        (
            Problem::E2,
            &[
                (1, 0.0361924, 3.0802102, 12.2014374),
                (2, 0.0984297, 0.5427453, 2.3633845),
                (3, 0.0259370, 0.1516948, 0.6313989),
            ],
        ),
        (
            Problem::Traction,
            &[
                (2, 0.4146964, 1.1960399, 4.1432038),
                (3, 0.1254594, 0.2642565, 1.1058486),
                (4, 0.0327298, 0.0657194, 0.2879949),
            ],
        ),
        (
            Problem::E3,
            &[
                (1, 0.1636634, 3.4846603, 9.1651514),
                (2, 0.0771623, 0.8654854, 1.7184659),
                (3, 0.0233185, 0.2297393, 0.4066254),
            ],
        ),
    ];
    for (problem, rows) in expected {
        let cfg = StudyConfig::new(problem, rows.iter().map(|r| r.0).collect());
        let out = run_study::<f64>(&cfg, |_| {}).unwrap();
        assert!(out.failure.is_none());
        for (rec, row) in out.records.iter().zip(rows) {
            for (ours, theirs) in [(rec.err_u, row.1), (rec.err_sigma, row.2), (rec.err_div, row.3)] {
                assert!((ours - theirs).abs() <= 6e-8, "{problem} level {}: {ours} vs {theirs}", row.0);
            }
        }
    }
}

#[test]
fn single_cell_divergence_error() {
    let cfg = StudyConfig::new(Problem::E1, vec![1]);
    let out = run_study::<f64>(&cfg, |_| {}).unwrap();
    assert!((out.records[0].err_div - 2f64.sqrt()).abs() < 1e-12);
}
