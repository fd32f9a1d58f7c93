//! Discrete error norms, level sweeps and table output.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{assemble, assemble_load, BoundaryKind};
use crate::error::{Error, Result};
use crate::grid::{EntityKind, TensorGrid};
use crate::physics::{IsotropicMaterial, ManufacturedSolution, Problem, SymTensor};
use crate::reference::{frame_gradient, gauss_rule, FRAME_CORNERS};
use crate::scalar::Real;
use crate::solver::{solve, SolveOptions};
use crate::spaces::{
    interpolate_full, interpolate_shear, nodal_interp_displacement, DisplacementField, DofLayout, NormalInterp,
    StressField,
};

/// `L2` norm of a stress difference by `g`-point Gauss quadrature; the
/// Frobenius product counts each off-diagonal component twice.
pub fn stress_l2_error_with<T: Real>(a: &StressField<T>, b: &StressField<T>, g: usize) -> Result<T> {
    let d = a.sub(b)?;
    let layout = d.layout();
    let grid = layout.grid();
    let rule = gauss_rule::<T>(grid.dim(), g)?;
    let jac = grid.cell_volume::<T>() / T::lit(2f64.powi(grid.dim() as i32));
    let mut acc = T::zero();
    for cell in grid.cell_lattice().iter() {
        let local = d.local_coeffs(&cell)?;
        for (xh, w) in rule.iter() {
            let t = crate::spaces::evaluate_local(layout.shapes(), &local, xh);
            acc += w * jac * t.ddot(&t);
        }
    }
    Ok(acc.sqrt())
}

pub fn stress_l2_error<T: Real>(a: &StressField<T>, b: &StressField<T>) -> Result<T> {
    stress_l2_error_with(a, b, 3)
}

/// Exact `L2` norm of a difference of piecewise constants.
pub fn displacement_l2_error<T: Real>(a: &DisplacementField<T>, b: &DisplacementField<T>) -> Result<T> {
    Ok(a.sub(b)?.l2_norm())
}

/// `|| div_h (a - b) ||_0`, exact since both divergences are cell constants.
pub fn div_l2_error<T: Real>(a: &StressField<T>, b: &StressField<T>) -> Result<T> {
    Ok(a.sub(b)?.divergence().l2_norm())
}

/// `|| u - u_h ||_0` against the exact displacement by quadrature.
pub fn true_displacement_error<T: Real>(u_h: &DisplacementField<T>, u: impl Fn(&[T]) -> Vec<T>, g: usize) -> Result<T> {
    let layout = u_h.layout();
    let grid = layout.grid();
    let rule = gauss_rule::<T>(grid.dim(), g)?;
    let jac = grid.cell_volume::<T>() / T::lit(2f64.powi(grid.dim() as i32));
    let mut acc = T::zero();
    for (cl, cell) in grid.cell_lattice().iter().enumerate() {
        let map = grid.cell_map::<T>(&cell)?;
        let uh = u_h.cell_value(cl);
        for (xh, w) in rule.iter() {
            let ux = u(&map.to_physical(xh));
            let e: T = ux.iter().zip(uh).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            acc += w * jac * e;
        }
    }
    Ok(acc.sqrt())
}

/// `|| sigma - sigma_h ||_0` against a continuous stress.
pub fn continuous_stress_error<T: Real>(
    field: &StressField<T>,
    sigma: impl Fn(&[T]) -> SymTensor<T>,
    g: usize,
) -> Result<T> {
    let layout = field.layout();
    let grid = layout.grid();
    let rule = gauss_rule::<T>(grid.dim(), g)?;
    let jac = grid.cell_volume::<T>() / T::lit(2f64.powi(grid.dim() as i32));
    let mut acc = T::zero();
    for cell in grid.cell_lattice().iter() {
        let map = grid.cell_map::<T>(&cell)?;
        let local = field.local_coeffs(&cell)?;
        for (xh, w) in rule.iter() {
            let t = crate::spaces::evaluate_local(layout.shapes(), &local, xh);
            let s = sigma(&map.to_physical(xh));
            let d: Vec<T> = s.as_slice().iter().zip(t.as_slice()).map(|(a, b)| *a - *b).collect();
            acc += w * jac * crate::scalar::dot(&d, &d);
        }
    }
    Ok(acc.sqrt())
}

/// `|| f - div_h sigma_h ||_0`, where `f` is the exact divergence.
pub fn continuous_div_error<T: Real>(field: &StressField<T>, f: impl Fn(&[T]) -> Vec<T>, g: usize) -> Result<T> {
    let div = field.divergence();
    true_displacement_error(&div, f, g)
}

/// Broken `L2` and `H1`-seminorm errors of the frame interpolant of a
/// scalar `v` on pair `(0, 1)` of a planar grid.
pub fn shear_interpolation_errors<T: Real>(
    layout: &DofLayout,
    v: impl Fn(&[T]) -> T,
    grad: impl Fn(&[T]) -> [T; 2],
    g: usize,
) -> Result<(T, T)> {
    let grid = layout.grid();
    if grid.dim() != 2 {
        return Err(Error::Unsupported("shear interpolation errors are planar".into()));
    }
    let coeffs = interpolate_shear(layout, (0, 1), &v)?;
    let block = layout.block(EntityKind::PairPoint(0, 1))?;
    let rule = gauss_rule::<T>(2, g)?;
    let (mut l2, mut h1) = (T::zero(), T::zero());
    for cell in grid.cell_lattice().iter() {
        let map = grid.cell_map::<T>(&cell)?;
        let jac = map.volume() / T::lit(4.0);
        let p: Vec<T> = FRAME_CORNERS
            .iter()
            .map(|&(a, b)| coeffs[block.lattice.linear(&[cell[0] + a, cell[1] + b])])
            .collect();
        let (mut gx, mut gy) = (T::zero(), T::zero());
        for (k, pk) in p.iter().enumerate() {
            let (sx, sy) = frame_gradient::<T>(k);
            gx += *pk * sx / map.half[0];
            gy += *pk * sy / map.half[1];
        }
        for (xh, w) in rule.iter() {
            let x = map.to_physical(xh);
            let ih: T = p
                .iter()
                .enumerate()
                .map(|(k, pk)| *pk * crate::reference::eval_frame(k, xh[0], xh[1]))
                .sum();
            let e = v(&x) - ih;
            let dv = grad(&x);
            l2 += w * jac * e * e;
            h1 += w * jac * ((dv[0] - gx) * (dv[0] - gx) + (dv[1] - gy) * (dv[1] - gy));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// `log2(prev / cur)`
pub fn observed_order(prev: f64, cur: f64) -> f64 {
    (prev / cur).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub cells_per_axis: usize,
    pub err_u: f64,
    pub err_sigma: f64,
    pub err_div: f64,
    pub ord_u: Option<f64>,
    pub ord_sigma: Option<f64>,
    pub ord_div: Option<f64>,
    /// `|| u - u_h ||_0`, not part of the tables.
    pub true_err_u: f64,
    pub iterations: usize,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: Problem,
    pub levels: Vec<usize>,
    pub lambda: f64,
    pub mu: f64,
    pub solver: SolveOptions,
    /// Gauss points per axis for the load integrals.
    pub load_quad: usize,
    /// Gauss points per axis for the stress norm.
    pub norm_quad: usize,
    pub normal_interp: NormalInterp,
}

impl StudyConfig {
    /// The settings that reproduce the reference tables: one-point load
    /// rule, face-center sampling of normal stresses, `g = 3` norms.
    pub fn new(problem: Problem, levels: Vec<usize>) -> Self {
        Self {
            problem,
            levels,
            lambda: 1.0,
            mu: 0.5,
            solver: SolveOptions::default(),
            load_quad: 1,
            norm_quad: 3,
            normal_interp: NormalInterp::FaceCenter,
        }
    }

    /// Levels used by the reference table of each problem.
    pub fn reference_levels(problem: Problem) -> Vec<usize> {
        match problem {
            Problem::E1 => (1..=7).collect(),
            Problem::E2 => (1..=6).collect(),
            Problem::E3 => (1..=5).collect(),
            Problem::Traction => (2..=7).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Unsupported("no levels requested".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Unsupported("levels must be strictly ascending".into()));
        }
        self.solver.validate()
    }
}

/// One level: the discrete solution and its interpolant comparisons.
pub struct LevelResult<T> {
    pub record: ErrorRecord,
    pub solution: crate::solver::Solution<T>,
    pub interpolant: StressField<T>,
}

pub fn run_level<T: Real>(cfg: &StudyConfig, level: usize) -> Result<LevelResult<T>> {
    let dim = cfg.problem.dim();
    let grid = TensorGrid::from_level(dim, level)?;
    let material = IsotropicMaterial::new(T::lit(cfg.lambda), T::lit(cfg.mu), dim)?;
    let exact = ManufacturedSolution::new(cfg.problem, material)?;
    let bc = if cfg.problem.is_traction() {
        BoundaryKind::Traction
    } else {
        BoundaryKind::Displacement
    };
    let start = Instant::now();
    let system = assemble(&grid, &material, bc)?;
    let load = assemble_load(&system.layout, |x| exact.load(x), cfg.load_quad)?;
    let system = system.with_load(load)?;
    let solution = solve(&system, &cfg.solver)?;
    solution.ensure_converged()?;
    let layout: &Arc<DofLayout> = &system.layout;
    let interpolant = interpolate_full(layout, |x| exact.stress(x), cfg.normal_interp)?;
    let iu = nodal_interp_displacement(layout, |x| exact.displacement(x));
    let record = ErrorRecord {
        level,
        cells_per_axis: grid.cells_per_axis()[0],
        err_u: displacement_l2_error(&iu, &solution.displacement)?.to_f64_lossy(),
        err_sigma: stress_l2_error_with(&interpolant, &solution.stress, cfg.norm_quad)?.to_f64_lossy(),
        err_div: div_l2_error(&interpolant, &solution.stress)?.to_f64_lossy(),
        ord_u: None,
        ord_sigma: None,
        ord_div: None,
        true_err_u: true_displacement_error(&solution.displacement, |x| exact.displacement(x), 3)?.to_f64_lossy(),
        iterations: solution.report.iterations,
        residual: solution.report.residual,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(LevelResult {
        record,
        solution,
        interpolant,
    })
}

#[derive(Debug)]
pub struct StudyOutcome {
    pub records: Vec<ErrorRecord>,
    /// Set when a level failed; `records` then holds the completed levels.
    pub failure: Option<(usize, Error)>,
}

/// Runs the levels in order, filling in observed orders between consecutive
/// levels. Stops at the first failing level.
pub fn run_study<T: Real>(cfg: &StudyConfig, mut progress: impl FnMut(&ErrorRecord)) -> Result<StudyOutcome> {
    cfg.validate()?;
    let mut records: Vec<ErrorRecord> = Vec::new();
    for &level in &cfg.levels {
        match run_level::<T>(cfg, level) {
            Ok(res) => {
                let mut r = res.record;
                if let Some(prev) = records.last() {
                    if prev.level + 1 == r.level {
                        r.ord_u = Some(observed_order(prev.err_u, r.err_u));
                        r.ord_sigma = Some(observed_order(prev.err_sigma, r.err_sigma));
                        r.ord_div = Some(observed_order(prev.err_div, r.err_div));
                    }
                }
                progress(&r);
                records.push(r);
            }
            Err(e) => {
                return Ok(StudyOutcome {
                    records,
                    failure: Some((level, e)),
                })
            }
        }
    }
    Ok(StudyOutcome { records, failure: None })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_default()
}

pub const CSV_HEADER: &str = "level,err_u,ord_u,err_sigma,ord_sigma,err_div,ord_div";

pub fn to_csv(records: &[ErrorRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{:.10e},{},{:.10e},{},{:.10e},{}",
            r.level,
            r.err_u,
            opt(r.ord_u, 4),
            r.err_sigma,
            opt(r.ord_sigma, 4),
            r.err_div,
            opt(r.ord_div, 4)
        );
    }
    s
}

/// Markdown table in the layout of the reference tables.
pub fn to_markdown(records: &[ErrorRecord]) -> String {
    let mut s = String::new();
    s.push_str("| level | ‖I_h u − u_h‖₀ | h^n | ‖I_h σ − σ_h‖₀ | h^n | ‖div(I_h σ − σ_h)‖₀ | h^n |\n");
    s.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in records {
        let _ = writeln!(
            s,
            "| {} | {:.5} | {} | {:.5} | {} | {:.8} | {} |",
            r.level,
            r.err_u,
            opt(r.ord_u, 1),
            r.err_sigma,
            opt(r.ord_sigma, 1),
            r.err_div,
            opt(r.ord_div, 1)
        );
    }
    s
}
