//! Global numbering of the discrete stress and displacement spaces, field
//! containers, evaluation and interpolation.
//!
//! Stress unknowns are stored block by block: one block per normal axis
//! (face values), then one block per shear pair (frame coefficients, one per
//! pair point, deliberately redundant). Displacements are cell-major with the
//! component fastest.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{EntityKind, Lattice, TensorGrid};
use crate::physics::SymTensor;
use crate::reference::{gauss_rule, local_shapes, LocalShape};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofBlock {
    pub kind: EntityKind,
    pub lattice: Lattice,
    pub offset: usize,
}

impl DofBlock {
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofLayout {
    grid: TensorGrid,
    blocks: Vec<DofBlock>,
    stress_len: usize,
    shapes: Vec<LocalShape>,
}

impl DofLayout {
    pub fn new(grid: &TensorGrid) -> Self {
        let n = grid.dim();
        let mut kinds: Vec<EntityKind> = (0..n).map(EntityKind::AxisFace).collect();
        kinds.extend(grid.pairs().into_iter().map(|(i, j)| EntityKind::PairPoint(i, j)));
        let mut offset = 0;
        let blocks = kinds
            .into_iter()
            .map(|kind| {
                let lattice = grid.lattice(kind).expect("canonical kinds");
                let b = DofBlock { kind, lattice, offset };
                offset += b.len();
                b
            })
            .collect();
        Self {
            grid: grid.clone(),
            blocks,
            stress_len: offset,
            shapes: local_shapes(n),
        }
    }

    pub fn shared(grid: &TensorGrid) -> Arc<Self> {
        Arc::new(Self::new(grid))
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn blocks(&self) -> &[DofBlock] {
        &self.blocks
    }

    pub fn block(&self, kind: EntityKind) -> Result<&DofBlock> {
        self.blocks.iter().find(|b| b.kind == kind).ok_or(match kind {
            EntityKind::PairPoint(i, j) => Error::NonCanonicalPair(i, j),
            _ => Error::IndexOutOfRange {
                what: "stress block",
                index: vec![],
            },
        })
    }

    pub fn stress_len(&self) -> usize {
        self.stress_len
    }

    pub fn disp_len(&self) -> usize {
        self.grid.cell_count() * self.dim()
    }

    pub fn total_len(&self) -> usize {
        self.stress_len + self.disp_len()
    }

    /// Independent stress functions: the frame blocks lose one dimension per
    /// slab of the axes outside the pair.
    pub fn stress_dimension(&self) -> usize {
        self.stress_len - self.kernel_dimension()
    }

    pub fn kernel_dimension(&self) -> usize {
        let cells = self.grid.cells_per_axis();
        self.grid
            .pairs()
            .iter()
            .map(|&(i, j)| {
                (0..self.dim())
                    .filter(|a| *a != i && *a != j)
                    .map(|a| cells[a])
                    .product::<usize>()
            })
            .sum()
    }

    pub fn shapes(&self) -> &[LocalShape] {
        &self.shapes
    }

    pub fn stress_dof(&self, kind: EntityKind, index: &[usize]) -> Result<usize> {
        let b = self.block(kind)?;
        if !b.lattice.contains(index) {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: index.to_vec(),
            });
        }
        Ok(b.offset + b.lattice.linear(index))
    }

    /// Global stress DOFs of a cell, aligned with [`DofLayout::shapes`].
    pub fn local_stress_dofs(&self, cell: &[usize]) -> Vec<usize> {
        self.shapes
            .iter()
            .map(|s| {
                let b = self.block(s.entity_kind()).expect("layout block");
                b.offset + b.lattice.linear(&s.entity_index(cell))
            })
            .collect()
    }

    pub fn disp_dof(&self, cell_linear: usize, component: usize) -> usize {
        cell_linear * self.dim() + component
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField<T> {
    layout: Arc<DofLayout>,
    coeffs: Vec<T>,
}

impl<T: Real> StressField<T> {
    pub fn zeros(layout: Arc<DofLayout>) -> Self {
        let coeffs = vec![T::zero(); layout.stress_len()];
        Self { layout, coeffs }
    }

    pub fn from_coeffs(layout: Arc<DofLayout>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != layout.stress_len() {
            return Err(Error::ShapeMismatch {
                expected: layout.stress_len(),
                found: coeffs.len(),
            });
        }
        Ok(Self { layout, coeffs })
    }

    pub fn layout(&self) -> &Arc<DofLayout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn block_values(&self, kind: EntityKind) -> Result<&[T]> {
        let r = self.layout.block(kind)?.range();
        Ok(&self.coeffs[r])
    }

    pub fn block_values_mut(&mut self, kind: EntityKind) -> Result<&mut [T]> {
        let r = self.layout.block(kind)?.range();
        Ok(&mut self.coeffs[r])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| *a - *b).collect();
        Ok(Self {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    fn check_cell(&self, cell: &[usize]) -> Result<()> {
        if self.layout.grid().cell_lattice().contains(cell) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell.to_vec(),
            })
        }
    }

    pub fn local_coeffs(&self, cell: &[usize]) -> Result<Vec<T>> {
        self.check_cell(cell)?;
        Ok(self
            .layout
            .local_stress_dofs(cell)
            .into_iter()
            .map(|d| self.coeffs[d])
            .collect())
    }

    /// Stress tensor at reference point `xh` of `cell`.
    pub fn evaluate(&self, cell: &[usize], xh: &[T]) -> Result<SymTensor<T>> {
        let local = self.local_coeffs(cell)?;
        Ok(evaluate_local(self.layout.shapes(), &local, xh))
    }

    /// Cellwise divergence, exact since it is constant on each cell.
    pub fn divergence(&self) -> DisplacementField<T> {
        let grid = self.layout.grid();
        let n = grid.dim();
        let half: Vec<T> = (0..n).map(|a| grid.spacing::<T>(a) / T::lit(2.0)).collect();
        let divs: Vec<Vec<(usize, T)>> = self.layout.shapes().iter().map(|s| s.divergence(&half)).collect();
        let mut values = vec![T::zero(); self.layout.disp_len()];
        for (cl, cell) in grid.cell_lattice().iter().enumerate() {
            for (d, dv) in self.layout.local_stress_dofs(&cell).into_iter().zip(&divs) {
                let c = self.coeffs[d];
                if c == T::zero() {
                    continue;
                }
                for &(comp, v) in dv {
                    values[cl * n + comp] += c * v;
                }
            }
        }
        DisplacementField {
            layout: self.layout.clone(),
            values,
        }
    }

    /// Columnar dump: `block,i0,...,value` per entity.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.layout.dim();
        write!(w, "block")?;
        for a in 0..n {
            write!(w, ",i{a}")?;
        }
        writeln!(w, ",value")?;
        for b in self.layout.blocks() {
            let name = block_name(b.kind);
            for (l, idx) in b.lattice.iter().enumerate() {
                write!(w, "{name}")?;
                for i in idx {
                    write!(w, ",{i}")?;
                }
                writeln!(w, ",{:e}", self.coeffs[b.offset + l].to_f64_lossy())?;
            }
        }
        Ok(())
    }
}

pub fn block_name(kind: EntityKind) -> String {
    match kind {
        EntityKind::Cell => "u".into(),
        EntityKind::AxisFace(i) => format!("s{i}{i}"),
        EntityKind::PairPoint(i, j) => format!("s{i}{j}"),
    }
}

/// Evaluates a stress from local coefficients aligned with `shapes`.
pub fn evaluate_local<T: Real>(shapes: &[LocalShape], local: &[T], xh: &[T]) -> SymTensor<T> {
    let n = xh.len();
    let mut t = SymTensor::zeros(n);
    for (s, &c) in shapes.iter().zip(local) {
        if c == T::zero() {
            continue;
        }
        let (i, j) = s.slot();
        let v = t.get(i, j) + c * s.value(xh);
        t.set(i, j, v);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField<T> {
    layout: Arc<DofLayout>,
    values: Vec<T>,
}

impl<T: Real> DisplacementField<T> {
    pub fn zeros(layout: Arc<DofLayout>) -> Self {
        let values = vec![T::zero(); layout.disp_len()];
        Self { layout, values }
    }

    pub fn from_values(layout: Arc<DofLayout>, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.disp_len() {
            return Err(Error::ShapeMismatch {
                expected: layout.disp_len(),
                found: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Arc<DofLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn cell_value(&self, cell_linear: usize) -> &[T] {
        let n = self.layout.dim();
        &self.values[cell_linear * n..(cell_linear + 1) * n]
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a - *b).collect();
        Ok(Self {
            layout: self.layout.clone(),
            values,
        })
    }

    /// Exact `L2` norm of a piecewise constant field.
    pub fn l2_norm(&self) -> T {
        let vol = self.layout.grid().cell_volume::<T>();
        (crate::scalar::dot(&self.values, &self.values) * vol).sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.layout.dim();
        write!(w, "cell")?;
        for a in 0..n {
            write!(w, ",i{a}")?;
        }
        for a in 0..n {
            write!(w, ",u{a}")?;
        }
        writeln!(w)?;
        for (l, idx) in self.layout.grid().cell_lattice().iter().enumerate() {
            write!(w, "{l}")?;
            for i in idx {
                write!(w, ",{i}")?;
            }
            for v in self.cell_value(l) {
                write!(w, ",{:e}", v.to_f64_lossy())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// How normal components are sampled on faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalInterp {
    /// Face mean by a `g`-point Gauss rule per tangential axis.
    FaceAverage(usize),
    /// Value at the face center.
    FaceCenter,
}

impl Default for NormalInterp {
    fn default() -> Self {
        NormalInterp::FaceAverage(3)
    }
}

/// Face values of a normal stress component.
pub fn interpolate_normal<T: Real>(
    layout: &DofLayout,
    axis: usize,
    f: impl Fn(&[T]) -> T,
    mode: NormalInterp,
) -> Result<Vec<T>> {
    let grid = layout.grid();
    let kind = EntityKind::AxisFace(axis);
    let block = layout.block(kind)?;
    let n = grid.dim();
    let tangential: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
    let rule = match mode {
        NormalInterp::FaceAverage(g) => Some(gauss_rule::<T>(n - 1, g)?),
        NormalInterp::FaceCenter => None,
    };
    let scale = T::lit(0.5f64.powi(n as i32 - 1));
    Ok(block
        .lattice
        .iter()
        .map(|idx| {
            let center = grid.entity_point::<T>(kind, &idx);
            match &rule {
                None => f(&center),
                Some(rule) => {
                    let mut acc = T::zero();
                    let mut x = center.clone();
                    for (p, w) in rule.iter() {
                        for (t, &a) in p.iter().zip(&tangential) {
                            x[a] = center[a] + *t * grid.spacing::<T>(a) / T::lit(2.0);
                        }
                        acc += w * f(&x);
                    }
                    acc * scale
                }
            }
        })
        .collect())
}

/// Frame coefficients of a shear component: values at the pair points.
pub fn interpolate_shear<T: Real>(layout: &DofLayout, pair: (usize, usize), f: impl Fn(&[T]) -> T) -> Result<Vec<T>> {
    let kind = EntityKind::PairPoint(pair.0, pair.1);
    let block = layout.block(kind)?;
    let grid = layout.grid();
    Ok(block
        .lattice
        .iter()
        .map(|idx| f(&grid.entity_point::<T>(kind, &idx)))
        .collect())
}

/// Interpolant of a full stress field.
pub fn interpolate_full<T: Real>(
    layout: &Arc<DofLayout>,
    sigma: impl Fn(&[T]) -> SymTensor<T>,
    mode: NormalInterp,
) -> Result<StressField<T>> {
    let mut field = StressField::zeros(layout.clone());
    for b in layout.blocks() {
        let vals = match b.kind {
            EntityKind::AxisFace(i) => interpolate_normal(layout, i, |x| sigma(x).get(i, i), mode)?,
            EntityKind::PairPoint(i, j) => interpolate_shear(layout, (i, j), |x| sigma(x).get(i, j))?,
            EntityKind::Cell => unreachable!("stress blocks are faces and pair points"),
        };
        field.coeffs[b.range()].copy_from_slice(&vals);
    }
    Ok(field)
}

/// Cell-center values of a displacement.
pub fn nodal_interp_displacement<T: Real>(
    layout: &Arc<DofLayout>,
    u: impl Fn(&[T]) -> Vec<T>,
) -> DisplacementField<T> {
    let grid = layout.grid();
    let mut values = Vec::with_capacity(layout.disp_len());
    for idx in grid.cell_lattice().iter() {
        values.extend(u(&grid.entity_point::<T>(EntityKind::Cell, &idx)));
    }
    DisplacementField {
        layout: layout.clone(),
        values,
    }
}

/// The alternating `+-1` frame vector of one slab of pair `(i, j)`; `slab`
/// lists the cell indices of the remaining axes in increasing axis order.
pub fn checkerboard_vector<T: Real>(layout: &DofLayout, pair: (usize, usize), slab: &[usize]) -> Result<Vec<T>> {
    let (i, j) = pair;
    let block = layout.block(EntityKind::PairPoint(i, j))?;
    let others: Vec<usize> = (0..layout.dim()).filter(|a| *a != i && *a != j).collect();
    if slab.len() != others.len() {
        return Err(Error::ShapeMismatch {
            expected: others.len(),
            found: slab.len(),
        });
    }
    let mut v = vec![T::zero(); layout.stress_len()];
    for (l, idx) in block.lattice.iter().enumerate() {
        if others.iter().zip(slab).all(|(&a, &s)| idx[a] == s) {
            v[block.offset + l] = if (idx[i] + idx[j]) % 2 == 0 { T::one() } else { -T::one() };
        }
    }
    Ok(v)
}

/// All slab index tuples of the axes outside `pair`.
pub fn pair_slabs(grid: &TensorGrid, pair: (usize, usize)) -> Vec<Vec<usize>> {
    let shape: Vec<usize> = (0..grid.dim())
        .filter(|a| *a != pair.0 && *a != pair.1)
        .map(|a| grid.cells_per_axis()[a])
        .collect();
    Lattice::new(shape).iter().collect()
}
