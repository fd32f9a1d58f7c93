//! Legacy-VTK export of a discrete solution as cell data on a rectilinear grid.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spaces::{DisplacementField, StressField};

/// Legacy VTK stores x fastest, while the cell lattice has the last axis
/// fastest; this yields the lattice index in VTK order.
fn vtk_order(cells: &[usize]) -> Vec<Vec<usize>> {
    let n = cells.len();
    let total: usize = cells.iter().product();
    (0..total)
        .map(|mut l| {
            let mut idx = vec![0; n];
            for a in 0..n {
                idx[a] = l % cells[a];
                l /= cells[a];
            }
            idx
        })
        .collect()
}

/// Writes `u` and the stress components at cell centers. Grids of
/// dimension above three are rejected.
pub fn write_vtk<T: Real, W: Write>(
    mut w: W,
    title: &str,
    stress: &StressField<T>,
    displacement: &DisplacementField<T>,
) -> Result<()> {
    if stress.layout() != displacement.layout() {
        return Err(Error::LayoutMismatch);
    }
    let layout = stress.layout();
    let grid = layout.grid();
    let n = grid.dim();
    if n > 3 {
        return Err(Error::Unsupported("VTK export supports at most three dimensions".into()));
    }
    let cells = grid.cells_per_axis();
    let mut dims = [1usize; 3];
    for a in 0..n {
        dims[a] = cells[a] + 1;
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or("minmix"))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET RECTILINEAR_GRID")?;
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    for (a, name) in ["X", "Y", "Z"].iter().enumerate() {
        writeln!(w, "{name}_COORDINATES {} double", dims[a])?;
        let coords: Vec<String> = if a < n {
            (0..dims[a]).map(|k| format!("{}", k as f64 / cells[a] as f64)).collect()
        } else {
            vec!["0".into()]
        };
        writeln!(w, "{}", coords.join(" "))?;
    }
    let lattice = grid.cell_lattice();
    let order = vtk_order(cells);
    writeln!(w, "CELL_DATA {}", grid.cell_count())?;
    writeln!(w, "VECTORS u double")?;
    for idx in &order {
        let v = displacement.cell_value(lattice.linear(idx));
        let mut c = [0.0f64; 3];
        for a in 0..n {
            c[a] = v[a].to_f64_lossy();
        }
        writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
    }
    let center = vec![T::zero(); n];
    let tensors: Vec<_> = order
        .iter()
        .map(|idx| stress.evaluate(idx, &center))
        .collect::<Result<_>>()?;
    for i in 0..n {
        for j in i..n {
            writeln!(w, "SCALARS sigma_{i}{j} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for t in &tensors {
                writeln!(w, "{}", t.get(i, j).to_f64_lossy())?;
            }
        }
    }
    let div = stress.divergence();
    writeln!(w, "VECTORS div_sigma double")?;
    for idx in &order {
        let v = div.cell_value(lattice.linear(idx));
        let mut c = [0.0f64; 3];
        for a in 0..n {
            c[a] = v[a].to_f64_lossy();
        }
        writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
    }
    Ok(())
}
