//! Dense stability constants in `f64`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{assemble, BoundaryKind, SaddleSystem};
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::physics::IsotropicMaterial;
use crate::solver::{pin_frame_kernel, Pinning};
use crate::sparse::CsrMatrix;

/// Largest stress space the dense checks accept.
pub const CERT_LIMIT: usize = 2500;

fn dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.rows(), m.cols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] += v;
    }
    d
}

fn select_columns(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| m[(r, keep[c])])
}

/// Orthonormal basis of the null space of `a` (columns), via `a^T a`.
pub fn null_space(a: &DMatrix<f64>, cols: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-11 * top.max(1e-300);
    let keep: Vec<usize> = (0..cols).filter(|&k| eig.eigenvalues[k] <= tol).collect();
    select_columns(&eig.eigenvectors, &keep)
}

/// Eigenvalues of `a x = mu b x` for symmetric `a` and SPD `b`, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(": Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(": Cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(ev)
}

/// Pseudo-inverse of a symmetric PSD matrix, dropping eigenvalues below
/// `rel * max`.
fn psd_pinv(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let n = a.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam > rel * top {
            let q = eig.eigenvectors.column(k);
            inv += (q * q.transpose()) / lam;
        }
    }
    inv
}

/// Plain `L2` Gram of the stress shapes (identity compliance).
fn stress_gram(grid: &TensorGrid) -> Result<SaddleSystem<f64>> {
    let identity = IsotropicMaterial {
        lambda: 0.0,
        mu: 0.5,
        dim: grid.dim(),
    };
    assemble(grid, &identity, BoundaryKind::Displacement)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSup {
    pub beta: f64,
    pub stress_dim: usize,
    pub disp_dim: usize,
}

/// Discrete inf-sup constant of `(div_h tau, v)` with the broken `H(div)`
/// norm on stresses and the `L2` norm on displacements.
///
/// With pinning the frame kernel is removed by deleting the pinned columns;
/// with [`Pinning::Off`] a pseudo-inverse of the stress Gram is used.
/// For the traction problem both spaces are restricted to the constrained
/// subspaces.
pub fn infsup_constant(grid: &TensorGrid, boundary: BoundaryKind, pinning: Pinning) -> Result<InfSup> {
    let layout = crate::spaces::DofLayout::new(grid);
    if layout.stress_len() > CERT_LIMIT {
        return Err(Error::DenseTooLarge {
            size: layout.stress_len(),
            limit: CERT_LIMIT,
        });
    }
    let sys = stress_gram(grid)?;
    let ns = sys.stress_len();
    let nu = sys.disp_len();
    let vol = grid.cell_volume::<f64>();
    let b = dense(&sys.b);
    let g_l2 = dense(&sys.m);
    let g_hdiv = &g_l2 + b.transpose() * &b / vol;
    let g_v = DMatrix::<f64>::identity(nu, nu) * vol;

    let pinned = pin_frame_kernel(&sys, pinning);
    let keep: Vec<usize> = (0..ns).filter(|k| !pinned.contains(k)).collect();
    let mut zs = select_columns(&DMatrix::identity(ns, ns), &keep);
    let mut zu = DMatrix::<f64>::identity(nu, nu);
    if boundary == BoundaryKind::Traction {
        let c = dense(&crate::assembly::traction_constraints::<f64>(sys.layout.as_ref())?);
        let rm_rows = 3;
        let cs = c.rows(0, c.nrows() - rm_rows).columns(0, ns).into_owned();
        let cu = c.rows(c.nrows() - rm_rows, rm_rows).columns(ns, nu).into_owned();
        let cs_z = &cs * &zs;
        zs = &zs * null_space(&cs_z, zs.ncols());
        zu = null_space(&cu, nu);
    }
    let br = zu.transpose() * &b * &zs;
    let gs = zs.transpose() * &g_hdiv * &zs;
    let gv = zu.transpose() * &g_v * &zu;
    let gs_inv = if pinning == Pinning::Off {
        psd_pinv(&gs, 1e-12)
    } else {
        gs.clone()
            .cholesky()
            .ok_or_else(|| Error::Singular(": pinned stress Gram".into()))?
            .inverse()
    };
    let s = &br * gs_inv * br.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let ev = generalized_eigenvalues(&s, &gv)?;
    Ok(InfSup {
        beta: ev.first().copied().unwrap_or(0.0).max(0.0).sqrt(),
        stress_dim: zs.ncols(),
        disp_dim: zu.ncols(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipticity {
    /// Smallest `(A tau, tau) / (tau, tau)` over the divergence-free subspace.
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub kernel_dim: usize,
    /// Largest cellwise divergence of the computed kernel basis.
    pub max_kernel_divergence: f64,
}

pub fn ellipticity_constant(grid: &TensorGrid, material: &IsotropicMaterial<f64>) -> Result<Ellipticity> {
    let layout = crate::spaces::DofLayout::new(grid);
    if layout.stress_len() > CERT_LIMIT {
        return Err(Error::DenseTooLarge {
            size: layout.stress_len(),
            limit: CERT_LIMIT,
        });
    }
    let sys = assemble(grid, material, BoundaryKind::Displacement)?;
    let ns = sys.stress_len();
    let gram = stress_gram(grid)?;
    let pinned = pin_frame_kernel(&sys, Pinning::SlabOrigin);
    let keep: Vec<usize> = (0..ns).filter(|k| !pinned.contains(k)).collect();
    let zs = select_columns(&DMatrix::identity(ns, ns), &keep);
    let b = dense(&sys.b) * &zs;
    let z = &zs * null_space(&b, zs.ncols());
    let vol = grid.cell_volume::<f64>();
    let divs = dense(&sys.b) * &z / vol;
    let max_div = divs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mz = z.transpose() * dense(&sys.m) * &z;
    let gz = z.transpose() * dense(&gram.m) * &z;
    let ev = generalized_eigenvalues(&mz, &gz)?;
    Ok(Ellipticity {
        min_quotient: ev.first().copied().unwrap_or(f64::NAN),
        max_quotient: ev.last().copied().unwrap_or(f64::NAN),
        kernel_dim: z.ncols(),
        max_kernel_divergence: max_div,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_infsup() {
        let g = TensorGrid::uniform(1, 4).unwrap();
        let r = infsup_constant(&g, BoundaryKind::Displacement, Pinning::SlabOrigin).unwrap();
        assert!(r.beta >= 1.0 / 2f64.sqrt(), "{r:?}");
    }

    #[test]
    fn pinning_choice_does_not_matter() {
        let g = TensorGrid::uniform(2, 2).unwrap();
        let a = infsup_constant(&g, BoundaryKind::Displacement, Pinning::SlabOrigin).unwrap();
        let b = infsup_constant(&g, BoundaryKind::Displacement, Pinning::Off).unwrap();
        let c = infsup_constant(&g, BoundaryKind::Displacement, Pinning::SlabFar).unwrap();
        assert!((a.beta - b.beta).abs() < 1e-10, "{a:?} {b:?}");
        assert!((a.beta - c.beta).abs() < 1e-10);
    }

    #[test]
    fn ellipticity_bounds() {
        let g = TensorGrid::uniform(2, 2).unwrap();
        let m = IsotropicMaterial::standard(2);
        let e = ellipticity_constant(&g, &m).unwrap();
        assert!(e.min_quotient >= 1.0 / 3.0 - 1e-12, "{e:?}");
        assert!(e.max_quotient <= 1.0 + 1e-12);
        assert!(e.max_kernel_divergence < 1e-12);
        assert!(e.kernel_dim > 0);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let z = null_space(&a, 3);
        assert_eq!(z.ncols(), 2);
        assert!((a * z).norm() < 1e-14);
    }
}
