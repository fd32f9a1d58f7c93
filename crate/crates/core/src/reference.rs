//! Reference-box shape functions, Gauss rules and element matrices.
//!
//! On a cell, the stress shape functions are
//!
//! * for each axis `i`, the two hats `psi_k(x_i)` times `e_i (x) e_i`;
//! * for each pair `i < j`, the four frame members `phi_k(x_i, x_j)` times
//!   `e_i (x) e_j + e_j (x) e_i`.
//!
//! [`local_shapes`] fixes their order: normals by axis then `k`, followed by
//! shears by pair then `k`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::{CellMap, EntityKind};
use crate::physics::IsotropicMaterial;
use crate::scalar::Real;

/// `psi_0(t) = (1 - t)/2`, `psi_1(t) = (1 + t)/2`.
pub fn eval_hat<T: Real>(k: usize, t: T) -> T {
    debug_assert!(k < 2);
    debug_assert!(t.abs() <= T::one() + T::lit(1e-6), "hat evaluated outside [-1,1]");
    (T::one() + hat_sign::<T>(k) * t) / T::lit(2.0)
}

fn hat_sign<T: Real>(k: usize) -> T {
    if k == 0 {
        -T::one()
    } else {
        T::one()
    }
}

/// Signs `(s_x, s_y)` with `phi_k = (1 + s_x x + s_y y)/4`.
pub const FRAME_SIGNS: [(i8, i8); 4] = [(-1, -1), (1, -1), (1, 1), (-1, 1)];

/// Lattice offset of frame member `k` relative to the cell's lower corner.
pub const FRAME_CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

pub fn eval_frame<T: Real>(k: usize, x: T, y: T) -> T {
    let (sx, sy) = FRAME_SIGNS[k];
    (T::one() + T::lit(sx as f64) * x + T::lit(sy as f64) * y) / T::lit(4.0)
}

/// Reference gradient of frame member `k`.
pub fn frame_gradient<T: Real>(k: usize) -> (T, T) {
    let (sx, sy) = FRAME_SIGNS[k];
    (T::lit(sx as f64 / 4.0), T::lit(sy as f64 / 4.0))
}

/// Gauss–Legendre rule on `[-1, 1]` with `g` points, `1 <= g <= 5`.
pub fn gauss_1d<T: Real>(g: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (x, w): (Vec<f64>, Vec<f64>) = match g {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = (6.0f64 / 5.0).sqrt();
            let a = (3.0 / 7.0 - 2.0 / 7.0 * r).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * r).sqrt();
            let s = 30f64.sqrt();
            let wa = (18.0 + s) / 36.0;
            let wb = (18.0 - s) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let r = (10.0f64 / 7.0).sqrt();
            let a = (5.0 - 2.0 * r).sqrt() / 3.0;
            let b = (5.0 + 2.0 * r).sqrt() / 3.0;
            let s = 13.0 * 70f64.sqrt();
            let wa = (322.0 + s) / 900.0;
            let wb = (322.0 - s) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => return Err(Error::UnsupportedQuadrature(g)),
    };
    Ok((x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect()))
}

/// Tensor-product Gauss rule on `[-1, 1]^d`; points in lexicographic order
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub dim: usize,
    pub order: usize,
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> {
        self.points.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }
}

pub fn gauss_rule<T: Real>(dim: usize, g: usize) -> Result<QuadratureRule<T>> {
    let (x, w) = gauss_1d::<T>(g)?;
    let total = g.pow(dim as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for l in 0..total {
        let mut rest = l;
        let mut p = vec![T::zero(); dim];
        let mut wt = T::one();
        for a in (0..dim).rev() {
            let q = rest % g;
            rest /= g;
            p[a] = x[q];
            wt *= w[q];
        }
        points.push(p);
        weights.push(wt);
    }
    Ok(QuadratureRule {
        dim,
        order: g,
        points,
        weights,
    })
}

/// One stress shape function on a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalShape {
    Normal { axis: usize, k: usize },
    Shear { i: usize, j: usize, k: usize },
}

impl LocalShape {
    /// Tensor slot `(i, i)` or `(i, j)`.
    pub fn slot(self) -> (usize, usize) {
        match self {
            LocalShape::Normal { axis, .. } => (axis, axis),
            LocalShape::Shear { i, j, .. } => (i, j),
        }
    }

    pub fn entity_kind(self) -> EntityKind {
        match self {
            LocalShape::Normal { axis, .. } => EntityKind::AxisFace(axis),
            LocalShape::Shear { i, j, .. } => EntityKind::PairPoint(i, j),
        }
    }

    /// Entity index of this shape's degree of freedom given the cell index.
    pub fn entity_index(self, cell: &[usize]) -> Vec<usize> {
        let mut idx = cell.to_vec();
        match self {
            LocalShape::Normal { axis, k } => idx[axis] += k,
            LocalShape::Shear { i, j, k } => {
                let (a, b) = FRAME_CORNERS[k];
                idx[i] += a;
                idx[j] += b;
            }
        }
        idx
    }

    /// Scalar shape value at a reference point.
    pub fn value<T: Real>(self, xh: &[T]) -> T {
        match self {
            LocalShape::Normal { axis, k } => eval_hat(k, xh[axis]),
            LocalShape::Shear { i, j, k } => eval_frame(k, xh[i], xh[j]),
        }
    }

    /// Physical divergence of the tensor shape: a constant vector, returned
    /// as `(component, value)` entries.
    pub fn divergence<T: Real>(self, half: &[T]) -> Vec<(usize, T)> {
        match self {
            LocalShape::Normal { axis, k } => {
                vec![(axis, hat_sign::<T>(k) / (T::lit(2.0) * half[axis]))]
            }
            LocalShape::Shear { i, j, k } => {
                let (gx, gy) = frame_gradient::<T>(k);
                // row i picks up d/dx_j, row j picks up d/dx_i
                vec![(i, gy / half[j]), (j, gx / half[i])]
            }
        }
    }
}

pub fn local_shapes(dim: usize) -> Vec<LocalShape> {
    let mut out = Vec::new();
    for axis in 0..dim {
        for k in 0..2 {
            out.push(LocalShape::Normal { axis, k });
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            for k in 0..4 {
                out.push(LocalShape::Shear { i, j, k });
            }
        }
    }
    out
}

fn check_cell<T: Real>(map: &CellMap<T>) -> Result<()> {
    if let Some(h) = map.half.iter().find(|h| !(**h > T::zero())) {
        return Err(Error::DegenerateCell(h.to_f64_lossy()));
    }
    Ok(())
}

/// Element compliance Gram `(A S_a, S_b)_K` over [`local_shapes`], by
/// `g`-point Gauss quadrature (`g = 2` is exact).
pub fn local_compliance_gram_with<T: Real>(
    map: &CellMap<T>,
    material: &IsotropicMaterial<T>,
    g: usize,
) -> Result<DenseMatrix<T>> {
    check_cell(map)?;
    let dim = map.half.len();
    let shapes = local_shapes(dim);
    let rule = gauss_rule::<T>(dim, g)?;
    let jac = map.volume() / T::lit(2f64.powi(dim as i32));
    let m = shapes.len();
    let mut coupling = DenseMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let c = material.slot_coupling(shapes[a].slot(), shapes[b].slot());
            coupling[(a, b)] = c;
            coupling[(b, a)] = c;
        }
    }
    let mut out = DenseMatrix::zeros(m, m);
    for (xh, w) in rule.iter() {
        let vals: Vec<T> = shapes.iter().map(|s| s.value(xh)).collect();
        let wj = w * jac;
        for a in 0..m {
            for b in a..m {
                let c = coupling[(a, b)];
                if c != T::zero() {
                    out[(a, b)] += wj * c * vals[a] * vals[b];
                }
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            out[(a, b)] = out[(b, a)];
        }
    }
    Ok(out)
}

pub fn local_compliance_gram<T: Real>(map: &CellMap<T>, material: &IsotropicMaterial<T>) -> Result<DenseMatrix<T>> {
    local_compliance_gram_with(map, material, 2)
}

/// `dim x shapes` matrix of `|K| (div S_a)_c`.
pub fn local_divergence_coupling<T: Real>(map: &CellMap<T>) -> Result<DenseMatrix<T>> {
    check_cell(map)?;
    let dim = map.half.len();
    let shapes = local_shapes(dim);
    let vol = map.volume();
    let mut out = DenseMatrix::zeros(dim, shapes.len());
    for (a, s) in shapes.iter().enumerate() {
        for (c, v) in s.divergence(&map.half) {
            out[(c, a)] += vol * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_map(dim: usize, h: f64) -> CellMap<f64> {
        CellMap {
            center: vec![h / 2.0; dim],
            half: vec![h / 2.0; dim],
        }
    }

    #[test]
    fn hat_values() {
        assert_eq!(eval_hat(0, -1.0), 1.0);
        assert_eq!(eval_hat(0, 1.0), 0.0);
        assert_eq!(eval_hat(1, -1.0), 0.0);
        assert_eq!(eval_hat(1, 1.0), 1.0);
        assert_eq!(eval_hat(0, 0.0), 0.5);
        assert_eq!(eval_hat(1, 0.5), 0.75);
        assert_eq!(eval_hat(0, 0.3f32) + eval_hat(1, 0.3f32), 1.0);
    }

    #[test]
    fn frame_values() {
        // each member is 3/4 at its own corner, 1/4 at the two neighbours, -1/4 opposite
        assert_eq!(eval_frame(2, 1.0, 1.0), 0.75);
        assert_eq!(eval_frame(0, -1.0, -1.0), 0.75);
        assert_eq!(eval_frame(0, 1.0, 1.0), -0.25);
        assert_eq!(eval_frame(0, 0.0, -1.0), 0.5);
        assert_eq!(eval_frame(1, 0.0, -1.0), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let alt = eval_frame(0, x, y) - eval_frame(1, x, y) + eval_frame(2, x, y) - eval_frame(3, x, y);
            assert!(alt.abs() < 1e-16);
            let sum: f64 = (0..4).map(|k| eval_frame(k, x, y)).sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frame_is_midpoint_interpolant() {
        // the member of a corner takes value 1/2 at the midpoints of both incident edges
        for k in 0..4 {
            let (cx, cy) = FRAME_CORNERS[k];
            let cx = 2.0 * cx as f64 - 1.0;
            let cy = 2.0 * cy as f64 - 1.0;
            assert_eq!(eval_frame(k, 0.0, cy), 0.5);
            assert_eq!(eval_frame(k, cx, 0.0), 0.5);
            assert_eq!(eval_frame(k, 0.0, -cy), 0.0);
        }
    }

    #[test]
    fn gauss_basics() {
        let (x, w) = gauss_1d::<f64>(2).unwrap();
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-16);
        assert_eq!(w, vec![1.0, 1.0]);
        let r = gauss_rule::<f64>(1, 2).unwrap();
        let s: f64 = r.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert_relative_eq!(s, 2.0 / 3.0, epsilon = 1e-15);
        let r = gauss_rule::<f64>(2, 3).unwrap();
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 4.0, epsilon = 1e-14);
        assert!(matches!(gauss_rule::<f64>(2, 0), Err(Error::UnsupportedQuadrature(0))));
        assert!(gauss_rule::<f64>(2, 6).is_err());
    }

    #[test]
    fn gauss_exactness() {
        for g in 1..=5usize {
            let (x, w) = gauss_1d::<f64>(g).unwrap();
            for p in 0..=(2 * g - 1) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((q - exact).abs() < 1e-14, "g={g} p={p}");
            }
        }
    }

    #[test]
    fn gram_1d_closed_form() {
        let m = IsotropicMaterial::<f64>::new(1.0, 0.5, 1).unwrap();
        // A in 1D: (1 - lam/(2mu+lam))/(2mu) = 1/2, so h*A scaling
        let h = 0.5;
        let g = local_compliance_gram(&unit_map(1, h), &m).unwrap();
        let a = 0.5;
        assert_relative_eq!(g[(0, 0)], a * h / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g[(0, 1)], a * h / 6.0, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 1)], a * h / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gram_kernel_2d_is_alternating_frame() {
        let m = IsotropicMaterial::<f64>::standard(2);
        let g = local_compliance_gram(&unit_map(2, 0.25), &m).unwrap();
        assert_eq!(g.max_asymmetry(), 0.0);
        let mut v = vec![0.0; 8];
        v[4..].copy_from_slice(&[1.0, -1.0, 1.0, -1.0]);
        assert!(g.matvec(&v).iter().all(|x| x.abs() < 1e-16));
        let div = local_divergence_coupling(&unit_map(2, 0.25)).unwrap();
        assert!(div.matvec(&v).iter().all(|x| x.abs() < 1e-16));
    }

    #[test]
    fn gram_scaling_and_order_independence() {
        let m = IsotropicMaterial::<f64>::new(2.0, 0.3, 3).unwrap();
        let g1 = local_compliance_gram(&unit_map(3, 0.5), &m).unwrap();
        let g2 = local_compliance_gram(&unit_map(3, 1.0), &m).unwrap();
        let g4 = local_compliance_gram_with(&unit_map(3, 0.5), &m, 4).unwrap();
        for r in 0..g1.rows() {
            for c in 0..g1.cols() {
                assert_relative_eq!(g2[(r, c)], 8.0 * g1[(r, c)], epsilon = 1e-14, max_relative = 1e-14);
                assert!((g4[(r, c)] - g1[(r, c)]).abs() <= 1e-14 * g1[(r, c)].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn divergence_coupling_examples() {
        let d = local_divergence_coupling(&unit_map(1, 0.5)).unwrap();
        assert_relative_eq!(d[(0, 0)], -1.0, epsilon = 1e-15);
        assert_relative_eq!(d[(0, 1)], 1.0, epsilon = 1e-15);
        let h = 0.25;
        let d = local_divergence_coupling(&unit_map(2, h)).unwrap();
        // shapes: 4 normals then frame members; phi_0 is column 4
        assert_relative_eq!(d[(0, 4)], -h / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d[(1, 4)], -h / 2.0, epsilon = 1e-15);
        for c in 0..2 {
            let s: f64 = (4..8).map(|a| d[(c, a)]).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn degenerate_cell_rejected() {
        let m = IsotropicMaterial::<f64>::standard(2);
        let map = CellMap {
            center: vec![0.5, 0.5],
            half: vec![0.5, 0.0],
        };
        assert!(matches!(local_compliance_gram(&map, &m), Err(Error::DegenerateCell(_))));
        assert!(local_divergence_coupling(&map).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let m = IsotropicMaterial::<f32>::standard(2);
        let map = CellMap {
            center: vec![0.5f32, 0.5],
            half: vec![0.5f32, 0.5],
        };
        let g = local_compliance_gram(&map, &m).unwrap();
        assert_eq!(g.rows(), 8);
        assert!(g[(0, 0)] > 0.0);
    }
}
