//! Command execution and output writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use minmix::assembly::{assemble, assemble_load, BoundaryKind, SaddleSystem};
use minmix::convergence::{
    displacement_l2_error, div_l2_error, run_study, stress_l2_error_with, to_csv, to_markdown, true_displacement_error,
};
use minmix::spaces::{interpolate_full, nodal_interp_displacement};
use minmix::verify::{rows_to_csv, rows_to_text, run_suite};
use minmix::{solver, Error, IsotropicMaterial, ManufacturedSolution, TensorGrid};

use crate::config::{Command, Format, RunConfig};

pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(_) => EXIT_SOLVER,
            RunError::Verify(_) => EXIT_VERIFY,
            RunError::Io(_) => EXIT_IO,
            RunError::Input(_) => 1,
        }
    }
}

fn classify(e: Error) -> RunError {
    match e {
        Error::NotConverged { .. } | Error::Singular(_) | Error::DenseTooLarge { .. } => RunError::Solver(e),
        Error::Io(io) => RunError::Io(io.to_string()),
        other => RunError::Input(other),
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn execute(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), RunError> {
    match cfg.command {
        Command::Study => study(cfg, out),
        Command::Verify => verify(cfg, out),
        Command::Export | Command::Solve => single(cfg, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), RunError> {
    out.write_all(text.as_bytes()).map_err(|e| RunError::Io(e.to_string()))
}

fn study(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), RunError> {
    let sc = cfg.study_config();
    let mut lines = Vec::new();
    let outcome = run_study::<f64>(&sc, |r| {
        lines.push(format!(
            "level {} (N={}): err_u {:.5e} err_sigma {:.5e} err_div {:.5e} [{} its, {:.2}s]\n",
            r.level, r.cells_per_axis, r.err_u, r.err_sigma, r.err_div, r.iterations, r.seconds
        ));
    })
    .map_err(classify)?;
    for l in &lines {
        say(out, l)?;
    }
    let tag = cfg.problem.tag();
    if cfg.formats.contains(&Format::Csv) {
        write_atomic(&cfg.out.join(format!("table_{tag}.csv")), to_csv(&outcome.records).as_bytes())?;
    }
    if cfg.formats.contains(&Format::Md) {
        let md = to_markdown(&outcome.records);
        write_atomic(&cfg.out.join(format!("table_{tag}.md")), md.as_bytes())?;
        say(out, &md)?;
    }
    match outcome.failure {
        Some((level, e)) => {
            let _ = writeln!(out, "level {level} failed");
            Err(classify(e))
        }
        None => Ok(()),
    }
}

fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), RunError> {
    let grid = TensorGrid::new(cfg.dim, &cfg.cells()).map_err(RunError::Input)?;
    let material = IsotropicMaterial::new(cfg.lambda, cfg.mu, cfg.dim).map_err(RunError::Input)?;
    let rows = run_suite(&grid, &material, cfg.seed).map_err(classify)?;
    if cfg.formats.contains(&Format::Csv) {
        write_atomic(&cfg.out.join("verify.csv"), rows_to_csv(&rows).as_bytes())?;
    }
    if cfg.formats.contains(&Format::Text) {
        say(out, &rows_to_text(&rows))?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Verify(failed.join(", ")))
    }
}

fn single(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), RunError> {
    let cells = cfg.cells();
    let grid = TensorGrid::new(cfg.dim, &cells).map_err(RunError::Input)?;
    let material = IsotropicMaterial::new(cfg.lambda, cfg.mu, cfg.dim).map_err(RunError::Input)?;
    let exact = ManufacturedSolution::new(cfg.problem, material).map_err(RunError::Input)?;
    let bc = if cfg.problem.is_traction() {
        BoundaryKind::Traction
    } else {
        BoundaryKind::Displacement
    };
    let system: SaddleSystem<f64> = assemble(&grid, &material, bc).map_err(classify)?;
    let load = assemble_load(&system.layout, |x| exact.load(x), cfg.load_quad).map_err(classify)?;
    let system = system.with_load(load).map_err(classify)?;
    let stem = format!(
        "{}_{}",
        cfg.problem.tag(),
        cells.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    );
    if cfg.command == Command::Export && cfg.formats.contains(&Format::Mtx) {
        system.export_matrix_market(&cfg.out).map_err(classify)?;
    }
    let needs_solution = cfg.command == Command::Solve || cfg.formats.iter().any(|f| matches!(f, Format::Vtk | Format::Csv));
    if !needs_solution {
        return Ok(());
    }
    let sol = solver::solve(&system, &cfg.solve_options()).map_err(classify)?;
    let report = &sol.report;
    let _ = writeln!(
        out,
        "{} cells {:?}: {} unknowns, {} iterations, residual {:.3e}, {:.3}s",
        cfg.problem,
        cells,
        system.size(),
        report.iterations,
        report.residual,
        report.wall_time.as_secs_f64()
    );
    if cfg.command == Command::Solve {
        let ip = interpolate_full(&system.layout, |x| exact.stress(x), cfg.normal_mode()).map_err(classify)?;
        let iu = nodal_interp_displacement(&system.layout, |x| exact.displacement(x));
        let eu = displacement_l2_error(&iu, &sol.displacement).map_err(classify)?;
        let es = stress_l2_error_with(&ip, &sol.stress, cfg.quad).map_err(classify)?;
        let ed = div_l2_error(&ip, &sol.stress).map_err(classify)?;
        let eut = true_displacement_error(&sol.displacement, |x| exact.displacement(x), 3).map_err(classify)?;
        let _ = writeln!(out, "err_u {eu:.6e}\nerr_sigma {es:.6e}\nerr_div {ed:.6e}\nerr_u_exact {eut:.6e}");
    }
    let render = |f: &dyn Fn(&mut Vec<u8>) -> minmix::Result<()>| -> Result<Vec<u8>, RunError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(classify)?;
        Ok(buf)
    };
    if cfg.formats.contains(&Format::Csv) {
        let s = render(&|b| sol.stress.write_csv(b))?;
        write_atomic(&cfg.out.join(format!("stress_{stem}.csv")), &s)?;
        let u = render(&|b| sol.displacement.write_csv(b))?;
        write_atomic(&cfg.out.join(format!("displacement_{stem}.csv")), &u)?;
    }
    if cfg.formats.contains(&Format::Vtk) {
        let v = render(&|b| minmix::vtk::write_vtk(b, &stem, &sol.stress, &sol.displacement))?;
        write_atomic(&cfg.out.join(format!("solution_{stem}.vtk")), &v)?;
    }
    sol.ensure_converged().map_err(RunError::Solver)
}
