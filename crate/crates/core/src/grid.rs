//! Uniform tensor-product grids of the unit box `[0,1]^n`.
//!
//! Axes are numbered from zero. Every geometric entity that carries degrees
//! of freedom lives on an integer lattice:
//!
//! * [`EntityKind::Cell`]: one index per axis in `0..N_a`.
//! * [`EntityKind::AxisFace`]`(i)`: the faces perpendicular to axis `i`; the
//!   `i`-th index runs over grid planes `0..=N_i`, the others over cells.
//! * [`EntityKind::PairPoint`]`(i, j)`: the points carrying shear frame
//!   coefficients; indices `i` and `j` run over grid lines `0..=N`, the rest
//!   over cells. In 2D these are the grid vertices, in 3D the cube edges
//!   parallel to the remaining axis.
//!
//! All enumerations are lexicographic with the last axis varying fastest.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major (last axis fastest) multi-index space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    shape: Vec<usize>,
}

impl Lattice {
    pub fn new(shape: Vec<usize>) -> Self {
        Self { shape }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.len() == self.shape.len() && index.iter().zip(&self.shape).all(|(i, s)| i < s)
    }

    /// Linear position of `index`; the caller guarantees `contains(index)`.
    pub fn linear(&self, index: &[usize]) -> usize {
        debug_assert!(self.contains(index), "{index:?} outside {:?}", self.shape);
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn multi(&self, mut linear: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (slot, s) in out.iter_mut().zip(&self.shape).rev() {
            *slot = linear % s;
            linear /= s;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |l| self.multi(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Cell,
    AxisFace(usize),
    PairPoint(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    pub index: Vec<usize>,
    pub boundary: bool,
}

/// Affine map `F_K` from the reference box `[-1,1]^n` onto a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMap<T> {
    pub center: Vec<T>,
    pub half: Vec<T>,
}

impl<T: Real> CellMap<T> {
    pub fn to_physical(&self, reference: &[T]) -> Vec<T> {
        reference
            .iter()
            .zip(self.center.iter().zip(&self.half))
            .map(|(r, (c, h))| *c + *h * *r)
            .collect()
    }

    pub fn to_reference(&self, physical: &[T]) -> Vec<T> {
        physical
            .iter()
            .zip(self.center.iter().zip(&self.half))
            .map(|(x, (c, h))| (*x - *c) / *h)
            .collect()
    }

    pub fn volume(&self) -> T {
        self.half.iter().fold(T::one(), |v, h| v * (*h + *h))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorGrid {
    cells_per_axis: Vec<usize>,
}

impl TensorGrid {
    pub fn new(dim: usize, cells_per_axis: &[usize]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if cells_per_axis.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} cell counts given for dimension {dim}",
                cells_per_axis.len()
            )));
        }
        if cells_per_axis.contains(&0) {
            return Err(Error::InvalidGrid("every axis needs at least one cell".into()));
        }
        Ok(Self {
            cells_per_axis: cells_per_axis.to_vec(),
        })
    }

    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![n; dim])
    }

    /// Refinement level `l >= 1` has `2^(l-1)` cells per axis; level one is the box itself.
    pub fn from_level(dim: usize, level: usize) -> Result<Self> {
        if level == 0 || level > 24 {
            return Err(Error::InvalidGrid(format!("level {level} outside 1..=24")));
        }
        Self::uniform(dim, 1 << (level - 1))
    }

    pub fn dim(&self) -> usize {
        self.cells_per_axis.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn spacing<T: Real>(&self, axis: usize) -> T {
        T::one() / T::from_usize_lossy(self.cells_per_axis[axis])
    }

    pub fn cell_volume<T: Real>(&self) -> T {
        (0..self.dim()).fold(T::one(), |v, a| v * self.spacing::<T>(a))
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn vertex_count(&self) -> usize {
        self.cells_per_axis.iter().map(|n| n + 1).product()
    }

    /// Canonical shear pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    }

    fn check_kind(&self, kind: EntityKind) -> Result<()> {
        let n = self.dim();
        match kind {
            EntityKind::Cell => Ok(()),
            EntityKind::AxisFace(i) if i < n => Ok(()),
            EntityKind::AxisFace(i) => Err(Error::IndexOutOfRange {
                what: "axis",
                index: vec![i],
            }),
            EntityKind::PairPoint(i, j) if i < j && j < n => Ok(()),
            EntityKind::PairPoint(i, j) => Err(Error::NonCanonicalPair(i, j)),
        }
    }

    pub fn lattice(&self, kind: EntityKind) -> Result<Lattice> {
        self.check_kind(kind)?;
        let mut shape = self.cells_per_axis.clone();
        match kind {
            EntityKind::Cell => {}
            EntityKind::AxisFace(i) => shape[i] += 1,
            EntityKind::PairPoint(i, j) => {
                shape[i] += 1;
                shape[j] += 1;
            }
        }
        Ok(Lattice::new(shape))
    }

    pub fn cell_lattice(&self) -> Lattice {
        Lattice::new(self.cells_per_axis.clone())
    }

    pub fn entity_count(&self, kind: EntityKind) -> Result<usize> {
        Ok(self.lattice(kind)?.len())
    }

    fn grid_axes(kind: EntityKind) -> Vec<usize> {
        match kind {
            EntityKind::Cell => vec![],
            EntityKind::AxisFace(i) => vec![i],
            EntityKind::PairPoint(i, j) => vec![i, j],
        }
    }

    /// An entity is on the boundary when any of its grid-plane coordinates is 0 or N.
    pub fn is_boundary(&self, kind: EntityKind, index: &[usize]) -> bool {
        Self::grid_axes(kind)
            .into_iter()
            .any(|a| index[a] == 0 || index[a] == self.cells_per_axis[a])
    }

    pub fn enumerate(&self, kind: EntityKind) -> Result<Vec<Entity>> {
        let lattice = self.lattice(kind)?;
        Ok(lattice
            .iter()
            .map(|index| Entity {
                kind,
                boundary: self.is_boundary(kind, &index),
                index,
            })
            .collect())
    }

    /// Cells whose closure contains the entity.
    pub fn incident_cells(&self, kind: EntityKind, index: &[usize]) -> Result<Vec<Vec<usize>>> {
        let lattice = self.lattice(kind)?;
        if !lattice.contains(index) {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: index.to_vec(),
            });
        }
        let axes = Self::grid_axes(kind);
        let mut cells = vec![index.to_vec()];
        for a in axes {
            let mut next = Vec::new();
            for c in &cells {
                for shift in [1usize, 0] {
                    if index[a] >= shift && index[a] - shift < self.cells_per_axis[a] {
                        let mut cc = c.clone();
                        cc[a] = index[a] - shift;
                        next.push(cc);
                    }
                }
            }
            cells = next;
        }
        Ok(cells)
    }

    pub fn cell_map<T: Real>(&self, cell: &[usize]) -> Result<CellMap<T>> {
        if !self.cell_lattice().contains(cell) {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell.to_vec(),
            });
        }
        let half: Vec<T> = (0..self.dim())
            .map(|a| self.spacing::<T>(a) / T::lit(2.0))
            .collect();
        let center = cell
            .iter()
            .enumerate()
            .map(|(a, &c)| (T::from_usize_lossy(2 * c + 1)) * half[a])
            .collect();
        Ok(CellMap { center, half })
    }

    /// Physical coordinates of an entity's representative point: grid-plane
    /// coordinates sit on the plane, the others at the cell midpoint.
    pub fn entity_point<T: Real>(&self, kind: EntityKind, index: &[usize]) -> Vec<T> {
        let grid = Self::grid_axes(kind);
        (0..self.dim())
            .map(|a| {
                let h = self.spacing::<T>(a);
                if grid.contains(&a) {
                    T::from_usize_lossy(index[a]) * h
                } else {
                    (T::from_usize_lossy(index[a]) + T::lit(0.5)) * h
                }
            })
            .collect()
    }
}
