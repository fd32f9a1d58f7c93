//! Numerical certificates for the stability properties of the element.

pub mod certificates;
pub mod macros;
pub mod witness;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use certificates::{ellipticity_constant, infsup_constant, Ellipticity, InfSup};
pub use macros::{macro_checks, macro_stress, MacroReport};
pub use witness::{bb_witness, hdiv_norm_sq};

use crate::assembly::{assemble, BoundaryKind};
use crate::error::Result;
use crate::grid::TensorGrid;
use crate::physics::IsotropicMaterial;
use crate::solver::Pinning;
use crate::spaces::{checkerboard_vector, pair_slabs, DisplacementField, DofLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    /// Human-readable requirement, e.g. `<= 1e-13`.
    pub requirement: String,
    pub passed: bool,
}

impl CheckRow {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("<= {bound:e}"),
            passed: value <= bound,
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!(">= {bound}"),
            passed: value >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessStats {
    pub samples: usize,
    pub max_divergence_error: f64,
    /// Largest `||tau||^2_{H(div_h)} / ||v||^2`.
    pub max_ratio: f64,
}

/// Applies the witness to random piecewise constants.
pub fn witness_sweep(grid: &TensorGrid, samples: usize, seed: u64) -> Result<WitnessStats> {
    let layout = DofLayout::shared(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut err, mut ratio) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let vals: Vec<f64> = (0..layout.disp_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = DisplacementField::from_values(layout.clone(), vals)?;
        let tau = bb_witness(&v)?;
        let d = tau.divergence();
        for (a, b) in d.values().iter().zip(v.values()) {
            err = err.max((a - b).abs());
        }
        let vn = v.l2_norm();
        ratio = ratio.max(hdiv_norm_sq(&tau)? / (vn * vn));
    }
    Ok(WitnessStats {
        samples,
        max_divergence_error: err,
        max_ratio: ratio,
    })
}

/// Verification sweep on one grid; dense checks are skipped when the grid
/// is too large for them.
pub fn run_suite(grid: &TensorGrid, material: &IsotropicMaterial<f64>, seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let w = witness_sweep(grid, 200, seed)?;
    rows.push(CheckRow::at_most("witness_divergence", w.max_divergence_error, 1e-13));
    rows.push(CheckRow::at_most("witness_norm_ratio", w.max_ratio, 2.0));

    let sys = assemble(grid, material, BoundaryKind::Displacement)?;
    let mut kernel = 0.0f64;
    for pair in grid.pairs() {
        for slab in pair_slabs(grid, pair) {
            let v = checkerboard_vector::<f64>(&sys.layout, pair, &slab)?;
            let mv = sys.m.matvec(&v)?;
            let bv = sys.b.matvec(&v)?;
            kernel = mv.iter().chain(&bv).fold(kernel, |m, x| m.max(x.abs()));
        }
    }
    rows.push(CheckRow::at_most("checkerboard_kernel", kernel, 1e-13));

    let layout = DofLayout::new(grid);
    if layout.stress_len() <= certificates::CERT_LIMIT {
        let b = infsup_constant(grid, BoundaryKind::Displacement, Pinning::SlabOrigin)?;
        rows.push(CheckRow::at_least("infsup_displacement", b.beta, 1.0 / 2f64.sqrt() - 1e-12));
        let b_off = infsup_constant(grid, BoundaryKind::Displacement, Pinning::Off)?;
        rows.push(CheckRow::at_most("infsup_pinning_gap", (b.beta - b_off.beta).abs(), 1e-10));
        let e = ellipticity_constant(grid, material)?;
        let (lo, _) = material.compliance_bounds();
        rows.push(CheckRow::at_least("ellipticity", e.min_quotient, lo - 1e-12));
        rows.push(CheckRow::at_most("kernel_divergence", e.max_kernel_divergence, 1e-12));
        if grid.dim() == 2 {
            let t = infsup_constant(grid, BoundaryKind::Traction, Pinning::SlabOrigin)?;
            rows.push(CheckRow::at_least("infsup_traction", t.beta, 1e-8));
        }
    }
    if grid.dim() == 2 && grid.cells_per_axis().iter().all(|n| n % 2 == 0) {
        let m = macro_checks(grid, seed)?;
        rows.push(CheckRow::at_most("macro_divergence", m.max_divergence_error, 1e-12));
        rows.push(CheckRow::at_most("macro_boundary_trace", m.max_boundary_trace, 1e-12));
        rows.push(CheckRow::at_most("rigid_orthogonality", m.max_orthogonality, 1e-12));
        rows.push(CheckRow::at_most("projection_idempotence", m.projection_idempotence, 1e-12));
        rows.push(CheckRow::at_most("projection_residual", m.max_residual_orthogonality, 1e-12));
        rows.push(CheckRow::at_least("macro_rank", m.combined_rank as f64, 8.0));
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("check,value,requirement,passed\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.6e},{},{}", r.name, r.value, r.requirement, r.passed);
    }
    s
}

pub fn rows_to_text(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(5);
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>13.6e}  {:<12}  {}",
            r.name,
            r.value,
            r.requirement,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    s
}
