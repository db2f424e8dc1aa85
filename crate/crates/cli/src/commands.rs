use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dtn_helmholtz::oracle::{fdm_richardson, label_modes, FdmShape};
use dtn_helmholtz::reconstruct::{export_grid, sample_field};
use dtn_helmholtz::solver::iterate_mode_traced;
use dtn_helmholtz::{Assembler, Error, ExportFormat, Method, ModeEstimate, Parity};
use serde::Serialize;

use crate::config::{mode_label, seed, RunConfig, SEEDS};
use crate::CliError;

pub const DTN_NTD_TOLERANCE: f64 = 1e-4;
pub const ORACLE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub assembly_s: f64,
    pub iteration_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: Method,
    pub parity: Parity,
    pub mode: Option<String>,
    pub kappa0: f64,
    pub n_max: usize,
    pub m_max: usize,
    pub basis_size: usize,
    pub kappas: Vec<f64>,
    pub iterations: Vec<f64>,
    pub converged: bool,
    pub converged_k: Option<f64>,
    pub f_value: Option<f64>,
    pub error: Option<String>,
    pub timings: Timings,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    fs::write(path, text + "\n").map_err(|e| CliError::Core(e.into()))
}

fn output_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Core(e.into()))?;
    Ok(dir)
}

/// Converges one mode; returns the report and, on success, the estimate.
fn solve_one(
    config: &RunConfig,
    assembler: &Assembler,
    method: Method,
    kappa0: f64,
    mode: Option<String>,
    assembly_s: f64,
) -> (SolveReport, Result<ModeEstimate, Error>) {
    let start = Instant::now();
    let (result, trace) = iterate_mode_traced(assembler, method, kappa0, &config.iteration());
    let spec = &assembler.spec;
    let report = SolveReport {
        method,
        parity: spec.parity,
        mode,
        kappa0,
        n_max: spec.n_max,
        m_max: spec.m_max,
        basis_size: spec.size(),
        kappas: trace.kappas,
        iterations: trace.estimates,
        converged: trace.converged,
        converged_k: result.as_ref().ok().map(|e| e.k_estimate),
        f_value: result.as_ref().ok().map(|e| e.f_value),
        error: result.as_ref().err().map(|e| e.to_string()),
        timings: Timings {
            assembly_s,
            iteration_s: start.elapsed().as_secs_f64(),
        },
    };
    (report, result)
}

fn build_assembler(
    config: &RunConfig,
    parity: Parity,
    n_max: usize,
    m_max: usize,
) -> (Assembler, f64) {
    let start = Instant::now();
    let spec = config.basis_with(parity, n_max, m_max);
    let assembler = Assembler::new(
        &spec,
        &config.geometry,
        config.quadrature_for(&spec),
        config.steklov_truncation,
    );
    (assembler, start.elapsed().as_secs_f64())
}

fn resolve_mode(
    config: &RunConfig,
    mode: Option<(Parity, usize)>,
) -> Result<(Parity, Option<usize>, f64), CliError> {
    match mode {
        Some((parity, order)) => {
            let kappa0 = config
                .kappa0
                .or_else(|| seed(parity, order))
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "no default kappa0 for mode {}; set kappa0",
                        mode_label(parity, order)
                    ))
                })?;
            Ok((parity, Some(order), kappa0))
        }
        None => {
            let parity = config.basis.parity;
            let kappa0 = config
                .kappa0
                .unwrap_or_else(|| seed(parity, 1).expect("first mode seeded"));
            Ok((parity, None, kappa0))
        }
    }
}

pub fn cmd_solve(
    config: &RunConfig,
    mode: Option<(Parity, usize)>,
) -> Result<SolveReport, CliError> {
    let (parity, order, kappa0) = resolve_mode(config, mode)?;
    let dir = output_dir(config)?;
    let (assembler, assembly_s) =
        build_assembler(config, parity, config.basis.n_max, config.basis.m_max);
    let label = order.map(|o| mode_label(parity, o));
    let (report, result) = solve_one(config, &assembler, config.method, kappa0, label, assembly_s);
    write_json(&dir.join("solve.json"), &report)?;
    result?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_max: usize,
    pub m_max: usize,
    pub method: Method,
    pub mode_label: String,
    pub converged_k: Option<f64>,
    pub note: String,
}

/// Converges the four reference modes with both methods at every size.
/// Failed cells are kept as rows without a value.
pub fn cmd_sweep_basis(config: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let dir = output_dir(config)?;
    let mut rows = Vec::new();
    for &(n_max, m_max) in &config.sizes {
        for parity in [Parity::Even, Parity::Odd] {
            let (assembler, _) = build_assembler(config, parity, n_max, m_max);
            for &(p, order, kappa0) in SEEDS.iter().filter(|s| s.0 == parity) {
                for method in [Method::Dtn, Method::Ntd] {
                    let result = dtn_helmholtz::solver::iterate_mode(
                        &assembler,
                        method,
                        kappa0,
                        &config.iteration(),
                    );
                    let (converged_k, note) = match result {
                        Ok((est, _)) => (Some(est.k_estimate), String::new()),
                        Err(e) => (None, e.to_string()),
                    };
                    rows.push(SweepRow {
                        n_max,
                        m_max,
                        method,
                        mode_label: mode_label(p, order),
                        converged_k,
                        note,
                    });
                }
            }
        }
    }
    let mut csv = String::from("n_max,m_max,method,mode_label,converged_k,note\n");
    for r in &rows {
        let k = r
            .converged_k
            .map_or_else(|| "NA".to_string(), |k| format!("{k:.6}"));
        csv.push_str(&format!(
            "{},{},{},\"{}\",{},\"{}\"\n",
            r.n_max,
            r.m_max,
            r.method,
            r.mode_label,
            k,
            r.note.replace('"', "'")
        ));
    }
    fs::write(dir.join("sweep.csv"), csv).map_err(|e| CliError::Core(e.into()))?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldReport {
    pub mode: String,
    pub method: Method,
    pub k: f64,
    pub nx: usize,
    pub ny: usize,
    /// Node of the largest density.
    pub max_at: (f64, f64),
    pub csv: PathBuf,
    pub pgm: PathBuf,
}

/// Converges the mode and writes its normalised `|Ψ|²` grid as CSV and PGM,
/// with `κ` set to the converged `k`.
pub fn cmd_field(config: &RunConfig, mode: (Parity, usize)) -> Result<FieldReport, CliError> {
    let (parity, order, kappa0) = resolve_mode(config, Some(mode))?;
    let order = order.expect("mode given");
    let dir = output_dir(config)?;
    let (assembler, _) = build_assembler(config, parity, config.basis.n_max, config.basis.m_max);
    let (_, result) = solve_one(config, &assembler, config.method, kappa0, None, 0.0);
    let estimate = result?.normalized(&assembler)?;
    let grid = sample_field(&estimate, &assembler.spec, &config.geometry, config.grid)?;

    let stem = format!("field_{parity}{order}_{}", config.method);
    let csv = dir.join(format!("{stem}.csv"));
    let pgm = dir.join(format!("{stem}.pgm"));
    export_grid(&grid, ExportFormat::Csv, &csv)?;
    export_grid(&grid, ExportFormat::Pgm, &pgm)?;

    let (mut best, mut at) = (f64::NEG_INFINITY, (0.0, 0.0));
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.value(i, j) > best {
                best = grid.value(i, j);
                at = (grid.x(i), grid.y(j));
            }
        }
    }
    let report = FieldReport {
        mode: mode_label(parity, order),
        method: config.method,
        k: estimate.k_estimate,
        nx: grid.nx,
        ny: grid.ny,
        max_at: at,
        csv,
        pgm,
    };
    write_json(&dir.join(format!("{stem}.json")), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelledMode {
    pub mode: String,
    pub k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub shape: FdmShape,
    pub h: f64,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub extrapolated: Vec<f64>,
    /// Composite domain only: modes classified by symmetry.
    pub labelled: Vec<LabelledMode>,
}

fn run_oracle(config: &RunConfig) -> Result<OracleReport, CliError> {
    let shape = config
        .oracle
        .shape
        .unwrap_or(FdmShape::composite(&config.geometry));
    let (result, problem, modes) = fdm_richardson(shape, config.oracle.h, config.oracle.num_modes)?;
    let labelled = match shape {
        FdmShape::Composite { .. } => label_modes(&result, &problem, &modes)
            .into_iter()
            .map(|(p, o, k)| LabelledMode {
                mode: mode_label(p, o),
                k,
            })
            .collect(),
        FdmShape::Rectangle { .. } => Vec::new(),
    };
    Ok(OracleReport {
        shape,
        h: result.h,
        coarse: result.coarse,
        fine: result.fine,
        extrapolated: result.extrapolated,
        labelled,
    })
}

pub fn cmd_oracle(config: &RunConfig) -> Result<OracleReport, CliError> {
    let dir = output_dir(config)?;
    let report = run_oracle(config)?;
    write_json(&dir.join("oracle.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeComparison {
    pub mode: String,
    pub dtn: f64,
    pub ntd: f64,
    pub oracle: Option<f64>,
    pub dtn_ntd_delta: f64,
    pub oracle_delta: Option<f64>,
    pub dtn_ntd_pass: bool,
    pub oracle_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub n_max: usize,
    pub m_max: usize,
    pub modes: Vec<ModeComparison>,
    pub all_pass: bool,
}

/// Both methods for the four reference modes, then the oracle on the
/// composite domain.
pub fn cmd_compare(config: &RunConfig) -> Result<CompareReport, CliError> {
    let dir = output_dir(config)?;
    let mut solved = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let (assembler, _) =
            build_assembler(config, parity, config.basis.n_max, config.basis.m_max);
        for &(p, order, kappa0) in SEEDS.iter().filter(|s| s.0 == parity) {
            let mut ks = [0.0; 2];
            for (slot, method) in [Method::Dtn, Method::Ntd].into_iter().enumerate() {
                let (est, _) = dtn_helmholtz::solver::iterate_mode(
                    &assembler,
                    method,
                    kappa0,
                    &config.iteration(),
                )?;
                ks[slot] = est.k_estimate;
            }
            solved.push((mode_label(p, order), ks));
        }
    }
    let oracle_config = RunConfig {
        oracle: crate::config::OracleConfig {
            shape: Some(FdmShape::composite(&config.geometry)),
            ..config.oracle.clone()
        },
        ..config.clone()
    };
    let oracle = run_oracle(&oracle_config)?;
    let modes: Vec<ModeComparison> = solved
        .into_iter()
        .map(|(mode, [dtn, ntd])| {
            let reference = oracle.labelled.iter().find(|m| m.mode == mode).map(|m| m.k);
            let oracle_delta = reference.map(|k| (dtn - k).abs());
            ModeComparison {
                dtn_ntd_delta: (dtn - ntd).abs(),
                dtn_ntd_pass: (dtn - ntd).abs() < DTN_NTD_TOLERANCE,
                oracle_pass: oracle_delta.is_some_and(|d| d < ORACLE_TOLERANCE),
                mode,
                dtn,
                ntd,
                oracle: reference,
                oracle_delta,
            }
        })
        .collect();
    let all_pass = modes.iter().all(|m| m.dtn_ntd_pass && m.oracle_pass);
    let report = CompareReport {
        n_max: config.basis.n_max,
        m_max: config.basis.m_max,
        modes,
        all_pass,
    };
    write_json(&dir.join("compare.json"), &report)?;
    if !all_pass {
        return Err(CliError::Tolerance(format!(
            "see {}",
            dir.join("compare.json").display()
        )));
    }
    Ok(report)
}
