//! Constructive right inverse of the discrete divergence.
//!
//! Given a piecewise constant `v`, each normal component `tau_ii` is built
//! by a cumulative sum along axis `i`: the value on grid plane `a` is
//! `h_i * sum_{m < a} v_i(m)`, so the divergence on cell `m` is exactly
//! `v_i(m)`. Shear components are zero.

use crate::error::Result;
use crate::grid::EntityKind;
use crate::scalar::Real;
use crate::spaces::{DisplacementField, StressField};

pub fn bb_witness<T: Real>(v: &DisplacementField<T>) -> Result<StressField<T>> {
    let layout = v.layout().clone();
    let grid = layout.grid().clone();
    let n = grid.dim();
    let cells = grid.cell_lattice();
    let mut tau = StressField::zeros(layout.clone());
    for axis in 0..n {
        let h = grid.spacing::<T>(axis);
        let block = layout.block(EntityKind::AxisFace(axis))?.clone();
        let vals = tau.block_values_mut(EntityKind::AxisFace(axis))?;
        for (l, idx) in block.lattice.iter().enumerate() {
            if idx[axis] == 0 {
                continue;
            }
            // faces are visited with the axis index increasing, so the
            // previous face along the line is already final
            let mut prev = idx.clone();
            prev[axis] -= 1;
            let cell_lin = cells.linear(&prev);
            vals[l] = vals[block.lattice.linear(&prev)] + h * v.cell_value(cell_lin)[axis];
        }
    }
    Ok(tau)
}

/// `||tau||_0^2 + ||div_h tau||_0^2`
pub fn hdiv_norm_sq<T: Real>(tau: &StressField<T>) -> Result<T> {
    let zero = StressField::zeros(tau.layout().clone());
    let l2 = crate::convergence::stress_l2_error(tau, &zero)?;
    let d = tau.divergence().l2_norm();
    Ok(l2 * l2 + d * d)
}
