//! Generalized symmetric-definite eigensolver and the `κ` fixed-point
//! iteration `κ_{i+1} = √F̃(κ_i)` with per-mode tracking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, MatrixPair, Method};
use crate::error::{Error, Result};
use crate::reconstruct::{gamma2_coefficients_with, ModeEstimate};

pub const DEFAULT_TOLERANCE: f64 = 5e-5;
pub const DEFAULT_MAX_ITER: usize = 20;

/// Metric eigenvalues below this fraction of the largest are treated as
/// numerically dependent directions of the basis.
pub const METRIC_RANK_CUTOFF: f64 = 1e-13;

/// Largest residual / orthonormality defect accepted from the Cholesky
/// route before falling back to the truncated metric.
const ACCEPT_DEFECT: f64 = 1e-8;

/// Eigenvalues `F̃_γ` (ascending) and metric-orthonormal eigenvectors
/// (columns). When the metric is rank deficient the number of columns is
/// the numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// `max_γ ‖Λã_γ − F̃_γΔã_γ‖ / ‖Λ‖` in the max norm.
    pub residual: f64,
    /// `max |ãᵀΔã − I|`
    pub orthonormality_defect: f64,
    /// Number of metric directions discarded (0 when Cholesky succeeded).
    pub dropped: usize,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, gamma: usize) -> Vec<f64> {
        self.vectors.column(gamma).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracking {
    /// Eigenvalue closest to the current `κ²`.
    #[default]
    Nearest,
    /// Largest metric overlap with the previous eigenvector.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub tracking: Tracking,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            tracking: Tracking::Nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `κ` used for the assembly of each iteration.
    pub kappas: Vec<f64>,
    /// `k = √F̃` of the tracked mode after each iteration.
    pub estimates: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Solve `Λ a = F Δ a`.
///
/// Cholesky reduction when `Δ` factors cleanly; otherwise the metric is
/// diagonalised and directions below [`METRIC_RANK_CUTOFF`] are dropped.
pub fn solve_generalized(pair: &MatrixPair) -> Result<EigenSolution> {
    solve_pencil(&pair.lambda, &pair.delta)
}

pub fn solve_pencil(lambda: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<EigenSolution> {
    if let Some(t) = reduction_by_cholesky(delta) {
        let solution = solve_reduced(lambda, delta, t, 0);
        if solution.residual <= ACCEPT_DEFECT && solution.orthonormality_defect <= ACCEPT_DEFECT {
            return Ok(solution);
        }
    }
    solve_pencil_truncated(lambda, delta, METRIC_RANK_CUTOFF)
}

/// Solve on the span of metric eigenvectors with eigenvalue above
/// `cutoff · max`.
pub fn solve_pencil_truncated(
    lambda: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    cutoff: f64,
) -> Result<EigenSolution> {
    let (transform, dropped) = reduction_by_metric_eigen(delta, cutoff)?;
    Ok(solve_reduced(lambda, delta, transform, dropped))
}

fn solve_reduced(
    lambda: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    transform: DMatrix<f64>,
    dropped: usize,
) -> EigenSolution {
    let m = lambda.nrows();
    let reduced = transform.transpose() * lambda * &transform;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(m, order.len());
    for (col, &i) in order.iter().enumerate() {
        let mut v = &transform * eig.eigenvectors.column(i);
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }

    let scale = lambda.amax().max(f64::MIN_POSITIVE);
    let residual = (lambda * &vectors
        - delta * &vectors * DMatrix::from_diagonal(&DVector::from_vec(values.clone())))
    .amax()
        / scale;
    let gram = vectors.transpose() * delta * &vectors;
    let orthonormality_defect = (gram - DMatrix::<f64>::identity(order.len(), order.len())).amax();

    EigenSolution {
        values,
        vectors,
        residual,
        orthonormality_defect,
        dropped,
    }
}

/// `L⁻ᵀ` for `Δ = L Lᵀ`, or `None` if the factorisation is not trustworthy.
fn reduction_by_cholesky(delta: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = delta.clone().cholesky()?;
    let l = chol.l();
    let inv = l.solve_lower_triangular(&DMatrix::identity(delta.nrows(), delta.nrows()))?;
    Some(inv.transpose())
}

fn reduction_by_metric_eigen(delta: &DMatrix<f64>, cutoff: f64) -> Result<(DMatrix<f64>, usize)> {
    let eig = SymmetricEigen::new(delta.clone());
    let d_max = eig.eigenvalues.max();
    let d_min = eig.eigenvalues.min();
    if d_max <= 0.0 {
        return Err(Error::MetricNotPositiveDefinite {
            min_eigenvalue: d_min,
        });
    }
    if d_min < -1e-8 * d_max {
        return Err(Error::MetricNotPositiveDefinite {
            min_eigenvalue: d_min,
        });
    }
    let mut keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > cutoff * d_max)
        .collect();
    keep.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut transform = DMatrix::<f64>::zeros(delta.nrows(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        transform.set_column(
            col,
            &(eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt()),
        );
    }
    Ok((transform, delta.nrows() - keep.len()))
}

/// Index of the eigenvalue closest to `previous_k_squared`; ties go to the
/// smaller index.
pub fn select_mode(previous_k_squared: f64, solution: &EigenSolution) -> Result<usize> {
    if solution.values.iter().all(|&v| v <= 0.0) {
        return Err(Error::NoPositiveEigenvalue);
    }
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (gamma, &value) in solution.values.iter().enumerate() {
        if value <= 0.0 {
            continue;
        }
        let distance = (value - previous_k_squared).abs();
        if distance < best_distance {
            best = gamma;
            best_distance = distance;
        }
    }
    Ok(best)
}

/// Index of the eigenvector with the largest `|a_oldᵀ Δ a_γ|`.
pub fn select_by_overlap(
    previous: &[f64],
    delta: &DMatrix<f64>,
    solution: &EigenSolution,
) -> Result<usize> {
    let weighted = delta * DVector::from_column_slice(previous);
    let mut best = None;
    let mut best_overlap = -1.0;
    for gamma in 0..solution.len() {
        if solution.values[gamma] <= 0.0 {
            continue;
        }
        let overlap = solution.vectors.column(gamma).dot(&weighted).abs();
        if overlap > best_overlap {
            best = Some(gamma);
            best_overlap = overlap;
        }
    }
    best.ok_or(Error::NoPositiveEigenvalue)
}

/// Fixed-point iteration for one mode starting from `kappa0`.
///
/// On `NotConverged` the partial trace is lost; use [`iterate_mode_traced`]
/// to keep it.
pub fn iterate_mode(
    assembler: &Assembler,
    method: Method,
    kappa0: f64,
    config: &IterationConfig,
) -> Result<(ModeEstimate, IterationTrace)> {
    let (result, trace) = iterate_mode_traced(assembler, method, kappa0, config);
    result.map(|estimate| (estimate, trace))
}

pub fn iterate_mode_traced(
    assembler: &Assembler,
    method: Method,
    kappa0: f64,
    config: &IterationConfig,
) -> (Result<ModeEstimate>, IterationTrace) {
    let mut trace = IterationTrace::default();
    let result = run_iteration(assembler, method, kappa0, config, &mut trace);
    (result, trace)
}

fn run_iteration(
    assembler: &Assembler,
    method: Method,
    kappa0: f64,
    config: &IterationConfig,
    trace: &mut IterationTrace,
) -> Result<ModeEstimate> {
    if !(kappa0 > 0.0 && kappa0.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "kappa0 must be positive, got {kappa0}"
        )));
    }
    let mut kappa = kappa0;
    let mut previous_vector: Option<Vec<f64>> = None;
    for _ in 0..config.max_iter {
        let pair = assembler.assemble(method, kappa)?;
        let solution = solve_generalized(&pair)?;
        let gamma = match (config.tracking, &previous_vector) {
            (Tracking::Overlap, Some(prev)) => select_by_overlap(prev, &pair.delta, &solution)?,
            _ => select_mode(kappa * kappa, &solution)?,
        };
        let value = solution.values[gamma];
        let k = value.sqrt();
        let vector = solution.vector(gamma);
        trace.kappas.push(kappa);
        trace.estimates.push(k);
        trace.iterations += 1;

        if (k - kappa).abs() < config.tolerance {
            trace.converged = true;
            let gamma2 = gamma2_coefficients_with(assembler, method, &vector, k)?;
            return Ok(ModeEstimate {
                k_estimate: k,
                f_value: value,
                kappa: k,
                method,
                parity: assembler.spec.parity,
                gamma1_coeffs: vector,
                gamma2_coeffs: gamma2,
            });
        }
        previous_vector = Some(vector);
        kappa = k;
    }
    Err(Error::NotConverged {
        iterations: trace.iterations,
    })
}
