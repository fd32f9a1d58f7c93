//! Global saddle-point system: compliance Gram `M`, divergence coupling `B`,
//! load `F` and, for the traction problem, bordering constraint rows `C`
//! acting on the stacked unknown `[sigma; u]`.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{EntityKind, TensorGrid};
use crate::physics::{rigid_motion, IsotropicMaterial};
use crate::reference::{gauss_rule, local_compliance_gram, local_divergence_coupling};
use crate::scalar::Real;
use crate::spaces::DofLayout;
use crate::sparse::{CooMatrix, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// `u = 0` on the whole boundary, imposed naturally.
    Displacement,
    /// `sigma n = 0` on the whole boundary, displacement orthogonal to rigid motions.
    Traction,
}

#[derive(Debug, Clone)]
pub struct SaddleSystem<T> {
    pub layout: Arc<DofLayout>,
    pub material: IsotropicMaterial<T>,
    pub boundary: BoundaryKind,
    /// Stress x stress.
    pub m: CsrMatrix<T>,
    /// Displacement x stress.
    pub b: CsrMatrix<T>,
    /// Constraint rows over `[sigma; u]`; zero right-hand side.
    pub c: CsrMatrix<T>,
    /// Displacement block of the right-hand side.
    pub f: Vec<T>,
}

impl<T: Real> SaddleSystem<T> {
    pub fn stress_len(&self) -> usize {
        self.layout.stress_len()
    }

    pub fn disp_len(&self) -> usize {
        self.layout.disp_len()
    }

    pub fn constraint_len(&self) -> usize {
        self.c.rows()
    }

    /// Size of the full bordered operator.
    pub fn size(&self) -> usize {
        self.stress_len() + self.disp_len() + self.constraint_len()
    }

    pub fn with_load(mut self, f: Vec<T>) -> Result<Self> {
        if f.len() != self.disp_len() {
            return Err(Error::ShapeMismatch {
                expected: self.disp_len(),
                found: f.len(),
            });
        }
        self.f = f;
        Ok(self)
    }

    /// Full right-hand side `[0; F; 0]`.
    pub fn rhs(&self) -> Vec<T> {
        let mut r = vec![T::zero(); self.size()];
        r[self.stress_len()..self.stress_len() + self.disp_len()].copy_from_slice(&self.f);
        r
    }

    /// Writes `M.mtx`, `B.mtx` and `C.mtx` into `dir`.
    pub fn export_matrix_market(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, mat) in [("M", &self.m), ("B", &self.b), ("C", &self.c)] {
            let path = dir.join(format!("{name}.mtx"));
            let tmp = dir.join(format!(".{name}.mtx.tmp"));
            {
                let w = BufWriter::new(fs::File::create(&tmp)?);
                mat.write_matrix_market(w)?;
            }
            fs::rename(&tmp, &path)?;
        }
        Ok(())
    }
}

/// Assembles `M`, `B` and the constraints; the load is zero until set.
pub fn assemble<T: Real>(
    grid: &TensorGrid,
    material: &IsotropicMaterial<T>,
    boundary: BoundaryKind,
) -> Result<SaddleSystem<T>> {
    if material.dim != grid.dim() {
        return Err(Error::Unsupported(format!(
            "material dimension {} on a {}-dimensional grid",
            material.dim,
            grid.dim()
        )));
    }
    if boundary == BoundaryKind::Traction && grid.dim() != 2 {
        return Err(Error::Unsupported("the traction problem is two-dimensional only".into()));
    }
    let layout = DofLayout::shared(grid);
    let n = grid.dim();
    let ns = layout.stress_len();
    let nu = layout.disp_len();
    // uniform spacing: every cell shares the same element matrices
    let map0 = grid.cell_map::<T>(&vec![0; n])?;
    let gram = local_compliance_gram(&map0, material)?;
    let div = local_divergence_coupling(&map0)?;
    let m_loc = gram.rows();

    let mut m = CooMatrix::new(ns, ns);
    let mut b = CooMatrix::new(nu, ns);
    for (cl, cell) in grid.cell_lattice().iter().enumerate() {
        let dofs = layout.local_stress_dofs(&cell);
        for a in 0..m_loc {
            for c in 0..m_loc {
                let v = gram[(a, c)];
                if v != T::zero() {
                    m.push(dofs[a], dofs[c], v);
                }
            }
            for comp in 0..n {
                let v = div[(comp, a)];
                if v != T::zero() {
                    b.push(layout.disp_dof(cl, comp), dofs[a], v);
                }
            }
        }
    }
    let c = match boundary {
        BoundaryKind::Displacement => CsrMatrix::zeros(0, ns + nu),
        BoundaryKind::Traction => traction_constraints::<T>(&layout)?,
    };
    Ok(SaddleSystem {
        layout,
        material: *material,
        boundary,
        m: m.to_csr(),
        b: b.to_csr(),
        c,
        f: vec![T::zero(); nu],
    })
}

/// Cell integrals `int_K f` by a `g`-point tensor Gauss rule.
pub fn assemble_load<T: Real>(layout: &DofLayout, f: impl Fn(&[T]) -> Vec<T>, g: usize) -> Result<Vec<T>> {
    let grid = layout.grid();
    let n = grid.dim();
    let rule = gauss_rule::<T>(n, g)?;
    let mut out = vec![T::zero(); layout.disp_len()];
    for (cl, cell) in grid.cell_lattice().iter().enumerate() {
        let map = grid.cell_map::<T>(&cell)?;
        let jac = map.volume() / T::lit(2f64.powi(n as i32));
        for (xh, w) in rule.iter() {
            let v = f(&map.to_physical(xh));
            for comp in 0..n {
                out[layout.disp_dof(cl, comp)] += w * jac * v[comp];
            }
        }
    }
    Ok(out)
}

/// Boundary edges of the planar pair-point lattice as endpoint pairs, in the
/// order bottom, top, left, right.
pub fn boundary_edges(grid: &TensorGrid) -> Vec<([usize; 2], [usize; 2])> {
    let (nx, ny) = (grid.cells_per_axis()[0], grid.cells_per_axis()[1]);
    let mut edges = Vec::with_capacity(2 * (nx + ny));
    for a in 0..nx {
        edges.push(([a, 0], [a + 1, 0]));
    }
    for a in 0..nx {
        edges.push(([a, ny], [a + 1, ny]));
    }
    for a in 0..ny {
        edges.push(([0, a], [0, a + 1]));
    }
    for a in 0..ny {
        edges.push(([nx, a], [nx, a + 1]));
    }
    edges
}

/// Traction rows over `[sigma; u]`:
///
/// 1. each boundary face value of a normal component is zero;
/// 2. each boundary edge has zero shear at its midpoint, `p_a + p_b = 0`
///    (the row of the first bottom edge is dropped: around the closed
///    boundary loop the alternating sum of these rows vanishes);
/// 3. `sum_K |K| u_K . w(x_K) = 0` for the three rigid motions.
pub fn traction_constraints<T: Real>(layout: &DofLayout) -> Result<CsrMatrix<T>> {
    let grid = layout.grid();
    if grid.dim() != 2 {
        return Err(Error::Unsupported("traction constraints need a planar grid".into()));
    }
    let ns = layout.stress_len();
    let cols = ns + layout.disp_len();
    let mut rows: Vec<Vec<(usize, T)>> = Vec::new();
    for axis in 0..2 {
        let kind = EntityKind::AxisFace(axis);
        let block = layout.block(kind)?;
        for (l, idx) in block.lattice.iter().enumerate() {
            if grid.is_boundary(kind, &idx) {
                rows.push(vec![(block.offset + l, T::one())]);
            }
        }
    }
    let shear = EntityKind::PairPoint(0, 1);
    for (p, q) in boundary_edges(grid).into_iter().skip(1) {
        rows.push(vec![
            (layout.stress_dof(shear, &p)?, T::one()),
            (layout.stress_dof(shear, &q)?, T::one()),
        ]);
    }
    let vol = grid.cell_volume::<T>();
    for m in 0..3 {
        let mut row = Vec::with_capacity(layout.disp_len());
        for (cl, cell) in grid.cell_lattice().iter().enumerate() {
            let xc = grid.entity_point::<T>(EntityKind::Cell, &cell);
            let w = rigid_motion(m, &xc);
            for comp in 0..2 {
                if w[comp] != T::zero() {
                    row.push((ns + layout.disp_dof(cl, comp), vol * w[comp]));
                }
            }
        }
        rows.push(row);
    }
    let mut coo = CooMatrix::new(rows.len(), cols);
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            coo.push(r, c, v);
        }
    }
    Ok(coo.to_csr())
}

/// Number of traction rows of each kind: (normal faces, midpoint rows, rigid motions).
pub fn traction_row_counts(grid: &TensorGrid) -> (usize, usize, usize) {
    let (nx, ny) = (grid.cells_per_axis()[0], grid.cells_per_axis()[1]);
    (2 * ny + 2 * nx, 2 * (nx + ny) - 1, 3)
}
