//! Checks on the 2x2 macro-elements of an even planar grid: the rigid
//! motion basis, its `L2` projection, and the five internal stress modes
//! whose divergences span the complement.
//!
//! Per-cell data on a macro is listed as top-left, top-right, bottom-left,
//! bottom-right.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{EntityKind, TensorGrid};
use crate::spaces::{DofLayout, StressField};

/// Cell offsets inside a macro in the order TL, TR, BL, BR.
pub const MACRO_CELLS: [(usize, usize); 4] = [(0, 1), (1, 1), (0, 0), (1, 0)];

/// Rigid motion basis on a macro: two translations and the rotation about
/// the macro center, as per-cell constant vectors.
pub const RIGID_BASIS: [[(f64, f64); 4]; 3] = [
    [(1.0, 0.0); 4],
    [(0.0, 1.0); 4],
    [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)],
];

/// Divergences of the internal stress modes.
pub const RANGE_BASIS: [[(f64, f64); 4]; 5] = [
    [(0.0, 0.0), (0.0, 0.0), (-1.0, 0.0), (1.0, 0.0)],
    [(1.0, 0.0), (-1.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
    [(0.0, 0.0), (1.0, 0.0), (-1.0, -1.0), (0.0, 1.0)],
    [(0.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (0.0, 0.0)],
    [(0.0, 1.0), (0.0, 0.0), (0.0, -1.0), (0.0, 0.0)],
];

/// Internal DOF values of the stress modes in units of `h`:
/// (`s11` on the lower interior vertical face, `s11` on the upper one,
/// `s12` at the midpoints of the edges through the macro center,
/// `s22` on the left interior horizontal face, `s22` on the right one).
pub const MODE_VALUES: [[f64; 5]; 5] = [
    [-1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [-0.5, -0.5, -0.5, -0.5, 0.5],
    [-0.5, -0.5, -0.5, -0.5, -0.5],
    [0.0, 0.0, 0.0, -1.0, 0.0],
];

fn check_grid(grid: &TensorGrid) -> Result<(usize, usize)> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported("macro-elements are planar".into()));
    }
    let (nx, ny) = (grid.cells_per_axis()[0], grid.cells_per_axis()[1]);
    if nx % 2 != 0 || ny % 2 != 0 {
        return Err(Error::InvalidGrid(format!("macro-elements need even cell counts, got {nx}x{ny}")));
    }
    Ok((nx / 2, ny / 2))
}

/// Stress mode `m` (0-based) on macro `(mi, mj)`.
pub fn macro_stress(layout: &std::sync::Arc<DofLayout>, mi: usize, mj: usize, m: usize) -> Result<StressField<f64>> {
    let grid = layout.grid();
    check_grid(grid)?;
    let h = grid.spacing::<f64>(0);
    let (ci, cj) = (2 * mi + 1, 2 * mj + 1);
    let vals = MODE_VALUES[m];
    let mut s = StressField::zeros(layout.clone());
    let c = s.coeffs_mut();
    c[layout.stress_dof(EntityKind::AxisFace(0), &[ci, cj - 1])?] = h * vals[0];
    c[layout.stress_dof(EntityKind::AxisFace(0), &[ci, cj])?] = h * vals[1];
    // the midpoint value is half the center coefficient
    c[layout.stress_dof(EntityKind::PairPoint(0, 1), &[ci, cj])?] = 2.0 * h * vals[2];
    c[layout.stress_dof(EntityKind::AxisFace(1), &[ci - 1, cj])?] = h * vals[3];
    c[layout.stress_dof(EntityKind::AxisFace(1), &[ci, cj])?] = h * vals[4];
    Ok(s)
}

fn dot8(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.0 * y.0 + x.1 * y.1).sum()
}

fn to_vec(a: &[(f64, f64); 4]) -> [f64; 8] {
    let mut v = [0.0; 8];
    for (k, (x, y)) in a.iter().enumerate() {
        v[2 * k] = *x;
        v[2 * k + 1] = *y;
    }
    v
}

/// `L2` projection onto the rigid motions of one macro, as an 8x8 matrix in
/// the coordinates of [`to_vec`] (cell areas cancel).
pub fn rigid_projection() -> [[f64; 8]; 8] {
    let mut p = [[0.0; 8]; 8];
    for r in &RIGID_BASIS {
        let v = to_vec(r);
        let nn = dot8(r, r);
        for a in 0..8 {
            for b in 0..8 {
                p[a][b] += v[a] * v[b] / nn;
            }
        }
    }
    p
}

fn rank(rows: &[[f64; 8]]) -> usize {
    let mut m: Vec<[f64; 8]> = rows.to_vec();
    let mut rank = 0;
    for col in 0..8 {
        let Some(p) = (rank..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())) else {
            break;
        };
        if m[p][col].abs() < 1e-12 {
            continue;
        }
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank {
                let f = m[r][col] / m[rank][col];
                for c in 0..8 {
                    m[r][c] -= f * m[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroReport {
    pub macros: usize,
    /// Largest `|div sigma_m - phi_m|` over all cells, modes and macros.
    pub max_divergence_error: f64,
    /// Worst macro and mode for the divergence check.
    pub worst: (usize, usize, usize),
    pub max_boundary_trace: f64,
    pub max_orthogonality: f64,
    pub projection_idempotence: f64,
    pub projection_symmetry: f64,
    pub projection_reproduction: f64,
    pub max_residual_orthogonality: f64,
    pub combined_rank: usize,
}

impl MacroReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_divergence_error <= tol
            && self.max_boundary_trace <= tol
            && self.max_orthogonality <= tol
            && self.projection_idempotence <= tol
            && self.projection_symmetry <= tol
            && self.projection_reproduction <= tol
            && self.max_residual_orthogonality <= tol
            && self.combined_rank == 8
    }
}

pub fn macro_checks(grid: &TensorGrid, seed: u64) -> Result<MacroReport> {
    use rand::{Rng, SeedableRng};
    let (mx, my) = check_grid(grid)?;
    let layout = DofLayout::shared(grid);
    let cells = grid.cell_lattice();
    let macros: Vec<(usize, usize)> = (0..mx).flat_map(|i| (0..my).map(move |j| (i, j))).collect();

    let per_macro: Vec<Result<(f64, (usize, usize), f64)>> = macros
        .par_iter()
        .map(|&(mi, mj)| {
            let mut worst = (0.0f64, (mi * my + mj, 0));
            let mut trace = 0.0f64;
            for m in 0..5 {
                let s = macro_stress(&layout, mi, mj, m)?;
                let div = s.divergence();
                for (cl, idx) in cells.iter().enumerate() {
                    let inside = idx[0] / 2 == mi && idx[1] / 2 == mj;
                    let expected = if inside {
                        let k = MACRO_CELLS
                            .iter()
                            .position(|&(a, b)| (2 * mi + a, 2 * mj + b) == (idx[0], idx[1]))
                            .expect("cell inside macro");
                        RANGE_BASIS[m][k]
                    } else {
                        (0.0, 0.0)
                    };
                    let d = div.cell_value(cl);
                    let e = (d[0] - expected.0).abs().max((d[1] - expected.1).abs());
                    if e > worst.0 {
                        worst = (e, (mi * my + mj, m));
                    }
                }
                // normal faces on the macro boundary carry no value
                for axis in 0..2 {
                    let kind = EntityKind::AxisFace(axis);
                    let block = layout.block(kind)?;
                    for (l, idx) in block.lattice.iter().enumerate() {
                        let on_macro_boundary = idx[axis] % 2 == 0;
                        if on_macro_boundary {
                            trace = trace.max(s.coeffs()[block.offset + l].abs());
                        }
                    }
                }
            }
            Ok((worst.0, worst.1, trace))
        })
        .collect();

    let mut max_div = 0.0f64;
    let mut worst = (0, 0, 0);
    let mut max_trace = 0.0f64;
    for (k, r) in per_macro.into_iter().enumerate() {
        let (e, (_, m), t) = r?;
        if e >= max_div {
            max_div = e;
            worst = (macros[k].0, macros[k].1, m + 1);
        }
        max_trace = max_trace.max(t);
    }

    let mut orth = 0.0f64;
    for a in 0..3 {
        for b in a + 1..3 {
            orth = orth.max(dot8(&RIGID_BASIS[a], &RIGID_BASIS[b]).abs());
        }
    }
    let p = rigid_projection();
    let (mut idem, mut sym) = (0.0f64, 0.0f64);
    for a in 0..8 {
        for b in 0..8 {
            let pp: f64 = (0..8).map(|c| p[a][c] * p[c][b]).sum();
            idem = idem.max((pp - p[a][b]).abs());
            sym = sym.max((p[a][b] - p[b][a]).abs());
        }
    }
    let apply = |v: &[f64; 8]| -> [f64; 8] {
        let mut out = [0.0; 8];
        for a in 0..8 {
            out[a] = (0..8).map(|b| p[a][b] * v[b]).sum();
        }
        out
    };
    let mut repro = 0.0f64;
    for r in &RIGID_BASIS {
        let v = to_vec(r);
        let pv = apply(&v);
        repro = repro.max(v.iter().zip(&pv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut resid = 0.0f64;
    for _ in 0..macros.len().max(1) * 4 {
        let v: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let pv = apply(&v);
        let res: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| a - b).collect();
        for r in &RIGID_BASIS {
            let w = to_vec(r);
            resid = resid.max(res.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().abs());
        }
    }
    let mut all: Vec<[f64; 8]> = RIGID_BASIS.iter().map(to_vec).collect();
    all.extend(RANGE_BASIS.iter().map(to_vec));

    Ok(MacroReport {
        macros: macros.len(),
        max_divergence_error: max_div,
        worst,
        max_boundary_trace: max_trace,
        max_orthogonality: orth,
        projection_idempotence: idem,
        projection_symmetry: sym,
        projection_reproduction: repro,
        max_residual_orthogonality: resid,
        combined_rank: rank(&all),
    })
}
