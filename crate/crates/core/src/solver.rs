//! Solution of the bordered saddle system
//!
//! ```text
//! [ M  B^T  C_s^T ] [sigma ]   [0]
//! [ B  0    C_u^T ] [u     ] = [F]
//! [ C_s C_u 0     ] [lambda]   [0]
//! ```
//!
//! The frame parameterization of the shear components is redundant, so the
//! stress block has a checkerboard kernel. By default one coefficient per
//! kernel vector is pinned to zero by masking its row and column, leaving a
//! unit diagonal.

use std::time::{Duration, Instant};

use crate::assembly::SaddleSystem;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::EntityKind;
use crate::scalar::{axpy, dot, norm2, Real};
use crate::spaces::{pair_slabs, DisplacementField, StressField};
use crate::sparse::CsrMatrix;

/// Largest system the dense path will factor.
pub const DENSE_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preconditioner {
    None,
    /// Block diagonal: `diag(M)`, then diagonals of the approximate Schur
    /// complements of the displacement and constraint blocks.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pinning {
    /// Pin the frame coefficient at the lattice origin of every slab.
    SlabOrigin,
    /// Pin the coefficient at the far corner `(N_i, N_j)` of every slab.
    SlabFar,
    /// Keep the kernel; only valid with MINRES.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Minres,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Defaults to twenty times the number of unknowns.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
    pub pinning: Pinning,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: None,
            preconditioner: Preconditioner::Diagonal,
            pinning: Pinning::SlabOrigin,
            method: Method::Minres,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Unsupported(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        if self.method == Method::Dense && self.pinning == Pinning::Off {
            return Err(Error::Singular(
                " without kernel pinning; use the iterative solver to keep the kernel".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// True relative residual `|b - K x| / |b|` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    pub pinned: Vec<usize>,
    /// Preconditioned relative residual estimate per iteration.
    pub history: Vec<f64>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub stress: StressField<T>,
    pub displacement: DisplacementField<T>,
    pub multipliers: Vec<T>,
    pub report: SolveReport,
}

impl<T> Solution<T> {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.report.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.report.iterations,
                residual: self.report.residual,
            })
        }
    }
}

/// Stress DOFs removed by the pinning rule, one per pair and slab.
pub fn pin_frame_kernel<T: Real>(system: &SaddleSystem<T>, rule: Pinning) -> Vec<usize> {
    let layout = &system.layout;
    let grid = layout.grid();
    let mut out = Vec::new();
    if rule == Pinning::Off {
        return out;
    }
    for (i, j) in grid.pairs() {
        let others: Vec<usize> = (0..grid.dim()).filter(|a| *a != i && *a != j).collect();
        for slab in pair_slabs(grid, (i, j)) {
            let mut idx = vec![0; grid.dim()];
            for (a, s) in others.iter().zip(&slab) {
                idx[*a] = *s;
            }
            if rule == Pinning::SlabFar {
                idx[i] = grid.cells_per_axis()[i];
                idx[j] = grid.cells_per_axis()[j];
            }
            out.push(
                layout
                    .stress_dof(EntityKind::PairPoint(i, j), &idx)
                    .expect("slab corner inside the lattice"),
            );
        }
    }
    out
}

/// Bordered operator with optional symmetric masking of pinned unknowns.
pub struct KktOperator<'a, T> {
    system: &'a SaddleSystem<T>,
    bt: CsrMatrix<T>,
    ct: CsrMatrix<T>,
    mask: Vec<bool>,
}

impl<'a, T: Real> KktOperator<'a, T> {
    pub fn new(system: &'a SaddleSystem<T>, pinned: &[usize]) -> Self {
        let mut mask = vec![false; system.size()];
        for &p in pinned {
            mask[p] = true;
        }
        Self {
            system,
            bt: system.b.transpose(),
            ct: system.c.transpose(),
            mask,
        }
    }

    pub fn size(&self) -> usize {
        self.system.size()
    }

    fn apply_raw(&self, x: &[T], y: &mut [T]) -> Result<()> {
        let s = self.system;
        let (ns, nu, nc) = (s.stress_len(), s.disp_len(), s.constraint_len());
        let (xs, rest) = x.split_at(ns);
        let (xu, xl) = rest.split_at(nu);
        let (ys, rest) = y.split_at_mut(ns);
        let (yu, yl) = rest.split_at_mut(nu);
        s.m.matvec_into(xs, ys)?;
        let mut tmp = vec![T::zero(); ns];
        self.bt.matvec_into(xu, &mut tmp)?;
        axpy(T::one(), &tmp, ys);
        s.b.matvec_into(xs, yu)?;
        if nc > 0 {
            let mut ctl = vec![T::zero(); ns + nu];
            self.ct.matvec_into(xl, &mut ctl)?;
            axpy(T::one(), &ctl[..ns], ys);
            axpy(T::one(), &ctl[ns..], yu);
            s.c.matvec_into(&x[..ns + nu], yl)?;
        }
        Ok(())
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.size() {
            return Err(Error::ShapeMismatch {
                expected: self.size(),
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); x.len()];
        if self.mask.iter().any(|m| *m) {
            let mut xm = x.to_vec();
            for (v, m) in xm.iter_mut().zip(&self.mask) {
                if *m {
                    *v = T::zero();
                }
            }
            self.apply_raw(&xm, &mut y)?;
            for ((yv, xv), m) in y.iter_mut().zip(x).zip(&self.mask) {
                if *m {
                    *yv = *xv;
                }
            }
        } else {
            self.apply_raw(x, &mut y)?;
        }
        Ok(y)
    }

    /// Block diagonal SPD preconditioner, returned as the inverse diagonal.
    pub fn inverse_diagonal(&self) -> Vec<T> {
        let s = self.system;
        let (ns, nu) = (s.stress_len(), s.disp_len());
        let safe = |v: T| if v > T::zero() && v.is_finite() { v } else { T::one() };
        let mut d = vec![T::one(); self.size()];
        for (r, v) in s.m.diagonal().into_iter().enumerate() {
            d[r] = safe(v);
        }
        for r in 0..ns {
            if self.mask[r] {
                d[r] = T::one();
            }
        }
        for r in 0..nu {
            let (idx, val) = s.b.row(r);
            let mut acc = T::zero();
            for (c, v) in idx.iter().zip(val) {
                if !self.mask[*c] {
                    acc += *v * *v / d[*c];
                }
            }
            d[ns + r] = safe(acc);
        }
        for r in 0..s.constraint_len() {
            let (idx, val) = s.c.row(r);
            let mut acc = T::zero();
            for (c, v) in idx.iter().zip(val) {
                if !self.mask[*c] {
                    acc += *v * *v / d[*c];
                }
            }
            d[ns + nu + r] = safe(acc);
        }
        d.into_iter().map(|v| T::one() / v).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.size();
        let mut k = DenseMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for c in 0..n {
            e[c] = T::one();
            let col = self.apply(&e).expect("sized");
            for r in 0..n {
                k[(r, c)] = col[r];
            }
            e[c] = T::zero();
        }
        k
    }
}

/// Unmasked bordered operator applied to `x`.
pub fn apply_kkt<T: Real>(system: &SaddleSystem<T>, x: &[T]) -> Result<Vec<T>> {
    KktOperator::new(system, &[]).apply(x)
}

pub struct MinresOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Preconditioned MINRES (Paige–Saunders) from a zero initial guess.
///
/// `apply` is the symmetric operator, `minv` the diagonal of an SPD
/// preconditioner inverse. The iteration stops once the true relative
/// residual is at most `tol`; the cheap recurrence estimate only decides
/// when to check.
pub fn minres<T: Real>(
    apply: impl Fn(&[T]) -> Result<Vec<T>>,
    b: &[T],
    minv: Option<&[T]>,
    tol: f64,
    max_iters: usize,
) -> Result<MinresOutcome<T>> {
    let n = b.len();
    let precond = |r: &[T]| -> Vec<T> {
        match minv {
            Some(d) => r.iter().zip(d).map(|(a, b)| *a * *b).collect(),
            None => r.to_vec(),
        }
    };
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(MinresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
            history: vec![],
        });
    }
    let true_residual = |x: &[T]| -> Result<f64> {
        let kx = apply(x)?;
        let r: Vec<T> = b.iter().zip(&kx).map(|(a, c)| *a - *c).collect();
        Ok((norm2(&r) / bnorm).to_f64_lossy())
    };

    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < T::zero() {
        return Err(Error::Unsupported("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (T::zero(), beta1);
    let (mut dbar, mut epsln, mut phibar) = (T::zero(), T::zero(), beta1);
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let mut history = Vec::new();
    let mut target = tol;
    let mut best = (f64::INFINITY, x.clone());
    let mut residual = 1.0;

    for itn in 1..=max_iters {
        let s = T::one() / beta;
        let v: Vec<T> = y.iter().map(|a| *a * s).collect();
        y = apply(&v)?;
        if itn >= 2 {
            axpy(-(beta / oldb), &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-(alfa / beta), &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2);
        oldb = beta;
        let b2 = dot(&r2, &y);
        if b2 < T::zero() {
            return Err(Error::Unsupported("preconditioner is not positive definite".into()));
        }
        beta = b2.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(T::epsilon());
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;

        let denom = T::one() / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(w1.iter().zip(&w2))
            .map(|(vi, (a, c))| (*vi - oldeps * *a - delta * *c) * denom)
            .collect();
        axpy(phi, &w, &mut x);

        let est = (phibar / beta1).to_f64_lossy();
        history.push(est);
        let breakdown = beta <= T::epsilon() * beta1;
        if est <= target || breakdown || itn == max_iters {
            residual = true_residual(&x)?;
            if residual < best.0 {
                best = (residual, x.clone());
            }
            if residual <= tol {
                return Ok(MinresOutcome {
                    x,
                    iterations: itn,
                    residual,
                    converged: true,
                    history,
                });
            }
            if breakdown {
                break;
            }
            // the estimate is in the preconditioned norm; tighten it by the observed gap
            target = (est * tol / residual).min(target * 0.5);
        }
    }
    Ok(MinresOutcome {
        x: best.1,
        iterations: history.len(),
        residual: best.0.min(residual),
        converged: false,
        history,
    })
}

/// Solves the system; a non-converged iteration is returned with
/// `report.converged == false` and its best iterate.
pub fn solve<T: Real>(system: &SaddleSystem<T>, options: &SolveOptions) -> Result<Solution<T>> {
    options.validate()?;
    let start = Instant::now();
    let pinned = pin_frame_kernel(system, options.pinning);
    let op = KktOperator::new(system, &pinned);
    let rhs = system.rhs();
    let n = system.size();
    let (x, iterations, residual, converged, history) = match options.method {
        Method::Dense => {
            if n > DENSE_LIMIT {
                return Err(Error::DenseTooLarge {
                    size: n,
                    limit: DENSE_LIMIT,
                });
            }
            let x = op.to_dense().lu()?.solve(&rhs);
            let kx = op.apply(&x)?;
            let bn = norm2(&rhs);
            let r: Vec<T> = rhs.iter().zip(&kx).map(|(a, b)| *a - *b).collect();
            let res = if bn == T::zero() {
                0.0
            } else {
                (norm2(&r) / bn).to_f64_lossy()
            };
            (x, 1, res, res <= options.tol.max(1e3 * T::epsilon().to_f64_lossy()), vec![])
        }
        Method::Minres => {
            let minv = match options.preconditioner {
                Preconditioner::Diagonal => Some(op.inverse_diagonal()),
                Preconditioner::None => None,
            };
            let max_iters = options.max_iters.unwrap_or(20 * n);
            let out = minres(|v| op.apply(v), &rhs, minv.as_deref(), options.tol, max_iters)?;
            (out.x, out.iterations, out.residual, out.converged, out.history)
        }
    };
    let (ns, nu) = (system.stress_len(), system.disp_len());
    let stress = StressField::from_coeffs(system.layout.clone(), x[..ns].to_vec())?;
    let displacement = DisplacementField::from_values(system.layout.clone(), x[ns..ns + nu].to_vec())?;
    Ok(Solution {
        stress,
        displacement,
        multipliers: x[ns + nu..].to_vec(),
        report: SolveReport {
            method: options.method,
            iterations,
            residual,
            converged,
            pinned,
            history,
            wall_time: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, BoundaryKind};
    use crate::grid::TensorGrid;
    use crate::physics::IsotropicMaterial;

    fn system(dim: usize, n: usize, bc: BoundaryKind) -> SaddleSystem<f64> {
        let g = TensorGrid::uniform(dim, n).unwrap();
        assemble(&g, &IsotropicMaterial::standard(dim), bc).unwrap()
    }

    #[test]
    fn pin_counts() {
        let s = system(2, 2, BoundaryKind::Displacement);
        assert_eq!(pin_frame_kernel(&s, Pinning::SlabOrigin).len(), 1);
        let s3 = system(3, 2, BoundaryKind::Displacement);
        assert_eq!(pin_frame_kernel(&s3, Pinning::SlabOrigin).len(), 6);
        assert!(pin_frame_kernel(&s3, Pinning::Off).is_empty());
    }

    #[test]
    fn homogeneous_system() {
        let s = system(2, 2, BoundaryKind::Displacement);
        let sol = solve(&s, &SolveOptions::default()).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.iterations, 0);
        assert!(sol.stress.coeffs().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn options_validation() {
        let mut o = SolveOptions {
            tol: 0.0,
            ..Default::default()
        };
        assert!(o.validate().is_err());
        o.tol = 1e-8;
        o.method = Method::Dense;
        o.pinning = Pinning::Off;
        assert!(matches!(o.validate(), Err(Error::Singular(_))));
    }

    #[test]
    fn minres_on_small_indefinite() {
        // diag(3, -2, 1) plus a symmetric coupling
        let a = DenseMatrix::from_rows(3, 3, vec![3.0f64, 1.0, 0.0, 1.0, -2.0, 0.5, 0.0, 0.5, 1.0]).unwrap();
        let b = [1.0, 2.0, 3.0];
        let out = minres(|v| Ok(a.matvec(v)), &b, None, 1e-12, 50).unwrap();
        assert!(out.converged);
        let direct = a.lu().unwrap().solve(&b);
        for (u, v) in out.x.iter().zip(&direct) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_guard() {
        let s = system(2, 40, BoundaryKind::Displacement);
        let o = SolveOptions {
            method: Method::Dense,
            ..Default::default()
        };
        assert!(matches!(solve(&s, &o), Err(Error::DenseTooLarge { .. })));
    }
}
