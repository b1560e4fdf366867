//! The `run` command: step a scenario and write its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use swe_core::assembly::Discretisation;
use swe_core::diagnostics::Diagnostics;
use swe_core::output::vtk_snapshot;
use swe_core::scenarios::Scenario;
use swe_core::swe::operators::jump_seminorm;
use swe_core::time::Integrator;
use swe_core::Error;

use crate::config::RunConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_POSITIVITY: i32 = 4;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Io(std::io::Error),
    Core(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Core(Error::Config(_) | Error::UnsupportedQuadrature(_)) => EXIT_CONFIG,
            RunError::Core(Error::Positivity { .. }) => EXIT_POSITIVITY,
            RunError::Core(_) | RunError::Io(_) => EXIT_SOLVER,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

/// Aggregate results written to `summary.txt`.
#[derive(Debug, Clone, Default)]
struct Summary {
    steps_completed: usize,
    time: f64,
    max_abs_rel_energy_err: f64,
    max_abs_rel_mass_err: f64,
    final_rel_enstrophy_err: f64,
    jump_seminorm_d: f64,
    picard_updates: usize,
    max_final_residual: Option<f64>,
    unconverged_steps: usize,
}

fn write_summary(dir: &Path, s: &Summary, status: &str) -> std::io::Result<()> {
    let mut t = format!("status = {status}\n");
    t += &format!("steps_completed = {}\n", s.steps_completed);
    t += &format!("time = {:?}\n", s.time);
    t += &format!("max_abs_rel_energy_err = {:e}\n", s.max_abs_rel_energy_err);
    t += &format!("max_abs_rel_mass_err = {:e}\n", s.max_abs_rel_mass_err);
    t += &format!("final_rel_enstrophy_err = {:e}\n", s.final_rel_enstrophy_err);
    t += &format!("jump_seminorm_D = {:e}\n", s.jump_seminorm_d);
    t += &format!("picard_updates = {}\n", s.picard_updates);
    if let Some(r) = s.max_final_residual {
        t += &format!("max_final_residual = {r:e}\nunconverged_steps = {}\n", s.unconverged_steps);
    }
    fs::write(dir.join("summary.txt"), t)
}

fn snapshot(dir: &Path, sc: &Scenario, it: &Integrator, cfg: &RunConfig) -> Result<(), RunError> {
    let title = format!("swe {} {} step {} time {:?}", cfg.spec.kind, cfg.variant, it.step_index, it.time);
    let vtk = vtk_snapshot(&sc.model, &it.state, &title)?;
    fs::write(dir.join(format!("snapshot_{:06}.vtk", it.step_index)), vtk)?;
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<(), RunError> {
    let dir = cfg.out.as_path();
    fs::create_dir_all(dir).map_err(|e| RunError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    fs::write(dir.join("manifest.txt"), cfg.manifest(created))
        .map_err(|e| RunError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;

    let mesh = cfg.spec.mesh()?;
    if cfg.dump_mesh {
        fs::write(dir.join("mesh.txt"), mesh.dump())?;
    }
    let disc = match cfg.quadrature_degree {
        Some(q) => Discretisation::with_degrees(mesh, q, q)?,
        None => Discretisation::new(mesh)?,
    };
    let sc = Scenario::with_discretisation(cfg.spec.clone(), Arc::new(disc))?;
    info!("{} cells, W1 dim {}, W2 dim {}", sc.disc().mesh.n_cells(), sc.disc().w1.dim, sc.disc().w2.dim);

    let mut diag = match sc.exact_solution() {
        Some((u, d)) => Diagnostics::with_exact(u, d),
        None => Diagnostics::new(),
    };
    let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
    writeln!(csv, "{}", diag.csv_header())?;
    let mut it = Integrator::new(&sc.model, cfg.variant, cfg.step_config(), sc.initial.clone())?;
    let mass0 = swe_core::swe::mass(&sc.model.disc, &it.state.d);
    let mut summary = Summary { max_final_residual: cfg.picard_tolerance.map(|_| 0.0), ..Summary::default() };

    let r = diag.record(&sc.model, 0, 0.0, &it.state)?;
    writeln!(csv, "{}", r.csv_row())?;
    snapshot(dir, &sc, &it, cfg)?;

    let steps = cfg.spec.steps;
    let mut outcome = Ok(());
    let mut failed_at = 0;
    for n in 1..=steps {
        failed_at = n;
        match it.step() {
            Ok(report) => {
                summary.picard_updates += report.iterations;
                if let (Some(m), Some(ok)) = (summary.max_final_residual.as_mut(), report.converged) {
                    *m = m.max(report.final_residual());
                    summary.unconverged_steps += usize::from(!ok);
                }
            }
            Err(e) => {
                outcome = Err(RunError::Core(e));
                break;
            }
        }
        summary.steps_completed = n;
        summary.time = it.time;
        let m = swe_core::swe::mass(&sc.model.disc, &it.state.d);
        summary.max_abs_rel_mass_err = summary.max_abs_rel_mass_err.max(((m - mass0) / mass0).abs());
        if n % cfg.diagnostics_every == 0 || n == steps {
            let r = diag.record(&sc.model, n, it.time, &it.state)?;
            writeln!(csv, "{}", r.csv_row())?;
            if !r.is_finite() {
                outcome = Err(RunError::Core(Error::Solver { reason: format!("non-finite diagnostics at step {n}"), residual: f64::NAN }));
                break;
            }
        }
        if (cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0) || n == steps {
            snapshot(dir, &sc, &it, cfg)?;
        }
    }
    csv.flush()?;
    for r in &diag.records {
        summary.max_abs_rel_energy_err = summary.max_abs_rel_energy_err.max(r.rel_energy_err.abs());
        summary.final_rel_enstrophy_err = r.rel_enstrophy_err;
    }
    summary.jump_seminorm_d = jump_seminorm(sc.disc(), &it.state.d);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed at step {failed_at}: {e}"),
    };
    write_summary(dir, &summary, &status)?;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config("x".into()).exit_code(), 2);
        assert_eq!(RunError::Core(Error::Config("x".into())).exit_code(), 2);
        assert_eq!(RunError::Core(Error::UnsupportedQuadrature(30)).exit_code(), 2);
        assert_eq!(RunError::Core(Error::Positivity { cell: 0, value: -1.0 }).exit_code(), 4);
        assert_eq!(RunError::Core(Error::Solver { reason: "x".into(), residual: 1.0 }).exit_code(), 3);
        assert_eq!(RunError::Io(std::io::Error::other("x")).exit_code(), 3);
    }
}
