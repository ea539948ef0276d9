//! Experiment harness: configured runs, spectra dumps and table
//! reproduction, with JSON/CSV output.

mod config;
mod spectrum;
pub mod tables;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{parse_config, ConfigOverrides, ExperimentConfig, DEFAULT_C};
pub use config::parse_config_with_overrides;
pub use spectrum::{dump_spectrum, local_spectrum, write_spectrum_csv, SpectrumRow, SpectrumSelector};
pub use tables::{reproduce_table, TableCell, TableOptions, TableReport};

use crate::assembly::{assemble_global, GlobalSystem};
use crate::error::{Error, Result};
use crate::linalg::pcg;
use crate::linalg::sparse::mul;
use crate::mesh::{build_mesh, generate_coefficients, CoefficientField, StructuredMesh};
use crate::partition::{build_partition, DofPartition};
use crate::precond::{build_preconditioner, verify_spectrum, BoundReport, Preconditioner};

pub const REPORT_SCHEMA: &str = "nosas-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assembly_s: f64,
    pub setup_s: f64,
    pub solve_s: f64,
    pub verify_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub free_dofs: usize,
    pub interface_dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub cond_estimate: f64,
    pub lambda_min_estimate: f64,
    pub lambda_max_estimate: f64,
    pub verify: Option<VerifyResult>,
    pub n_e: usize,
    pub ranks: Vec<usize>,
    pub spectra: Option<Vec<Vec<f64>>>,
    pub bound: BoundReport,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

/// Mesh, field, dofs and global system of a configuration.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: StructuredMesh,
    pub coeffs: CoefficientField,
    pub partition: Arc<DofPartition>,
    pub system: GlobalSystem,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let mesh = build_mesh(cfg.subdomains_per_side, cfg.cells_per_subdomain_side)?;
    let coeffs = generate_coefficients(&mesh, &cfg.pattern)?;
    Problem::new(mesh, coeffs)
}

impl Problem {
    pub fn new(mesh: StructuredMesh, coeffs: CoefficientField) -> Result<Problem> {
        let partition = Arc::new(build_partition(&mesh));
        let system = assemble_global(&mesh, &coeffs, &partition)?;
        Ok(Problem { mesh, coeffs, partition, system })
    }
}

/// Outcome of one preconditioned solve.
pub struct Solve {
    pub x: Vec<f64>,
    pub report: crate::linalg::PcgReport,
}

pub fn solve(problem: &Problem, precond: &Preconditioner, rtol: f64, max_iter: usize) -> Result<Solve> {
    let a = &problem.system.a;
    let (x, report) = pcg(|v| Ok(mul(a, v)), |r| precond.apply(r), &problem.system.b, rtol, max_iter)?;
    Ok(Solve { x, report })
}

/// Runs the whole pipeline; writes the report when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let t0 = Instant::now();
    let problem = build_problem(config)?;
    let assembly_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let pc = build_preconditioner(&problem.mesh, &problem.coeffs, problem.partition.clone(), config.kind)?;
    let setup_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let sol = solve(&problem, &pc, config.rtol, config.max_iter)?;
    let solve_s = t2.elapsed().as_secs_f64();

    let (verify, verify_s) = if config.verify {
        let t3 = Instant::now();
        let ev = verify_spectrum(&problem.system.a, &pc)?;
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        (Some(VerifyResult { lambda_min: lo, lambda_max: hi, cond: hi / lo }), Some(t3.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    let rep = &sol.report;
    let measured = verify.as_ref().map(|v| v.cond).unwrap_or(rep.cond_estimate);
    let report = ExperimentReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        free_dofs: problem.partition.free_dofs(),
        interface_dofs: problem.partition.gamma_len(),
        iterations: rep.iterations,
        converged: rep.converged,
        final_residual: *rep.residuals.last().unwrap_or(&0.0),
        cond_estimate: rep.cond_estimate,
        lambda_min_estimate: rep.lambda_min,
        lambda_max_estimate: rep.lambda_max,
        verify,
        n_e: pc.n_e(),
        ranks: pc.coarse().ranks().to_vec(),
        spectra: config.include_spectra.then(|| pc.bases().iter().map(|b| b.eigenvalues.clone()).collect()),
        bound: pc.bound_report(Some(measured)),
        warnings: pc.warnings().to_vec(),
        timings: Timings { assembly_s, setup_s, solve_s, verify_s },
    };
    if let Some(path) = &config.output {
        write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(report)
}

/// Writes to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
