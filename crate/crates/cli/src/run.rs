//! Subcommand orchestration and artifact output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tdns_core::assembly::{write_a_lin_csv, write_a_tri_csv};
use tdns_core::basis::{load_coefficients, save_coefficients, MovingBasis};
use tdns_core::diagnostics::{
    galerkin_cauchy, strong_rate, uniform_bound_mc, verify_assembly, verify_basis, verify_geometry, DiagnosticReport,
    Setup, VerifyOptions,
};
use tdns_core::geometry::MapKind;
use tdns_core::quadrature::QuadratureRule;
use tdns_core::solver::{
    energy_series, grad_energy_series, reconstruct, sample_brownian, solve, GalerkinSystem, SolverOptions,
};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Verify,
    Convergence,
    Montecarlo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
            Command::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] tdns_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("diagnostic failure: {}", .0.join(", "))]
    Diagnostic(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(tdns_core::Error::InvalidInput(_)) => 1,
            RunError::Numerical(_) | RunError::Io(_) => 2,
            RunError::Diagnostic(_) => 3,
        }
    }
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<String>,
    pub reports: Vec<DiagnosticReport>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> std::io::Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn basis_for(cfg: &RunConfig, setup: &Setup) -> Result<Arc<MovingBasis>, RunError> {
    let Some(path) = &cfg.cache else {
        return Ok(setup.basis()?);
    };
    if path.exists() {
        let quad = Arc::new(QuadratureRule::new(setup.quad_order)?);
        let b = load_coefficients(path, Arc::clone(&setup.map), setup.family, setup.m, setup.grid()?, quad)?;
        log::info!("loaded basis coefficients from {}", path.display());
        return Ok(Arc::new(b));
    }
    let b = setup.basis()?;
    save_coefficients(path, &b)?;
    log::info!("saved basis coefficients to {}", path.display());
    Ok(b)
}

fn simulate(cfg: &RunConfig, dir: &Path, out: &mut RunOutcome) -> Result<(), RunError> {
    let setup = cfg.setup()?;
    let basis = basis_for(cfg, &setup)?;
    let system = GalerkinSystem::assemble(basis, &setup.force, &setup.noise, setup.convection)?;
    let path = sample_brownian(cfg.seed, &system.grid);
    let traj = solve(
        &system,
        &setup.ic,
        &path,
        &SolverOptions {
            blowup_factor: cfg.blowup_factor,
        },
    )?;
    if traj.remainder_norm > 0.0 {
        log::warn!("initial condition truncated: discarded component has norm {:.3e}", traj.remainder_norm);
    }

    let energy = energy_series(&traj);
    let grad = grad_energy_series(&system, &traj);
    let w = path.cumulative();
    let mut f = create(dir, "energy.csv", &mut out.files)?;
    writeln!(f, "t,energy,grad_energy,W")?;
    for n in 0..traj.g.len() {
        writeln!(f, "{:.16e},{:.16e},{:.16e},{:.16e}", traj.grid.t(n), energy[n], grad[n], w[n])?;
    }
    f.flush()?;

    let mut f = create(dir, "coeffs.csv", &mut out.files)?;
    let header: Vec<String> = (1..=traj.m).map(|j| format!("g{j}")).collect();
    writeln!(f, "t,{}", header.join(","))?;
    for (n, g) in traj.g.iter().enumerate() {
        write!(f, "{:.16e}", traj.grid.t(n))?;
        for v in g.iter() {
            write!(f, ",{v:.16e}")?;
        }
        writeln!(f)?;
    }
    f.flush()?;

    let last = traj.grid.n;
    let mut indices: Vec<usize> = if cfg.field_stride == 0 {
        vec![0, last]
    } else {
        (0..=last).step_by(cfg.field_stride).collect()
    };
    if indices.last() != Some(&last) {
        indices.push(last);
    }
    indices.dedup();
    for n in indices {
        let field = reconstruct(&system, &traj, n, cfg.field_resolution)?;
        let mut f = create(dir, &format!("field_t{n}.csv"), &mut out.files)?;
        writeln!(f, "x1,x2,u1,u2,inside")?;
        for (x, v) in field.points.iter().zip(&field.values) {
            let (u, inside) = match v {
                Some(u) => (*u, 1),
                None => (Default::default(), 0),
            };
            writeln!(f, "{:.16e},{:.16e},{:.16e},{:.16e},{inside}", x[0], x[1], u[0], u[1])?;
        }
        f.flush()?;
    }

    if cfg.dump_tensors {
        let mut f = create(dir, "a_lin.csv", &mut out.files)?;
        write_a_lin_csv(&mut f, &system.tensors)?;
        f.flush()?;
        let mut f = create(dir, "a_tri.csv", &mut out.files)?;
        write_a_tri_csv(&mut f, &system.tensors)?;
        f.flush()?;
    }
    Ok(())
}

fn seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| base.wrapping_add(k)).collect()
}

fn diagnostics(cmd: Command, cfg: &RunConfig) -> Result<Vec<DiagnosticReport>, RunError> {
    let setup = cfg.setup()?;
    let mut reports = Vec::new();
    match cmd {
        Command::Verify => {
            let opts = VerifyOptions {
                n_samples: cfg.verify_samples,
                seed: cfg.seed,
                relaxed: cfg.is_user_map(),
                ..Default::default()
            };
            let mut maps = Vec::new();
            if cfg.verify_all_maps {
                maps.extend(MapKind::builtins().into_iter().map(|k| k.build(cfg.t_end)));
            }
            if cfg.is_user_map() || !cfg.verify_all_maps {
                maps.push(Arc::clone(&setup.map));
            }
            for map in &maps {
                reports.push(verify_geometry(map, &opts)?);
            }
            reports.push(verify_basis(&setup, &opts)?);
            reports.push(verify_assembly(&setup, &opts)?);
        }
        Command::Convergence => {
            let (levels, n_ref) = cfg.convergence_levels()?;
            reports.push(strong_rate(&setup, &levels, n_ref, &seeds(cfg.seed, cfg.conv_seeds))?);
            reports.push(galerkin_cauchy(&setup, &cfg.cauchy_m_list, &seeds(cfg.seed, cfg.cauchy_seeds))?);
        }
        Command::Montecarlo => {
            reports.push(uniform_bound_mc(&setup, &cfg.mc_m_list, &seeds(cfg.seed, cfg.mc_paths), cfg.mc_factor)?);
        }
        Command::Simulate => unreachable!("simulate writes no reports"),
    }
    Ok(reports)
}

fn write_manifest(dir: &Path, cmd: Command, cfg: &RunConfig, out: &RunOutcome) -> std::io::Result<()> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = BufWriter::new(File::create(dir.join("manifest.txt"))?);
    writeln!(f, "timestamp = {stamp}")?;
    writeln!(f, "command = {}", cmd.name())?;
    writeln!(f, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(f, "[config]")?;
    write!(f, "{}", cfg.echo())?;
    writeln!(f, "[files]")?;
    for name in &out.files {
        writeln!(f, "{name}")?;
    }
    for r in &out.reports {
        writeln!(f, "[report {}] {}", r.name, if r.pass() { "pass" } else { "fail" })?;
    }
    f.flush()
}

/// Runs `cmd`, writes its artifacts and the manifest into `cfg.out_dir`.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let dir: PathBuf = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut out = RunOutcome::default();
    match cmd {
        Command::Simulate => simulate(cfg, &dir, &mut out)?,
        _ => {
            for r in diagnostics(cmd, cfg)? {
                print!("{}", r.render_text());
                r.save(&dir)?;
                out.files.push(format!("report_{}.csv", r.name));
                out.reports.push(r);
            }
        }
    }
    write_manifest(&dir, cmd, cfg, &out)?;
    let failed: Vec<String> = out
        .reports
        .iter()
        .flat_map(|r| r.failures().into_iter().map(move |m| format!("{}:{}", r.name, m.name)))
        .collect();
    if !failed.is_empty() {
        return Err(RunError::Diagnostic(failed));
    }
    Ok(out)
}
