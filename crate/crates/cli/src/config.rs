//! JSON run configuration. Every field has a default, so `{}` is a valid
//! configuration that reproduces the reference setup.

use std::path::{Path, PathBuf};

use dtn_helmholtz::oracle::FdmShape;
use dtn_helmholtz::{
    BasisSpec, CompositeDomain, GridSpec, IterationConfig, Method, Parity, QuadConfig, Tracking,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Starting `κ` per tracked mode: exact eigenvalues of the 2 × 2.5 rectangle.
pub const SEEDS: [(Parity, usize, f64); 4] = [
    (Parity::Even, 1, 2.0116),
    (Parity::Even, 2, 2.9638),
    (Parity::Odd, 1, 3.3836),
    (Parity::Odd, 2, 4.0232),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Defaults to the composite domain given by `geometry`.
    pub shape: Option<FdmShape>,
    pub h: f64,
    pub num_modes: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            shape: None,
            h: 1.0 / 128.0,
            num_modes: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: CompositeDomain,
    pub basis: BasisSpec,
    pub method: Method,
    pub steklov_truncation: usize,
    /// Derived from the basis and truncation when absent.
    pub quadrature: Option<QuadConfig>,
    /// Defaults to the seed of the first mode of `basis.parity`.
    pub kappa0: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub tracking: Tracking,
    pub sizes: Vec<(usize, usize)>,
    pub grid: GridSpec,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let iteration = IterationConfig::default();
        Self {
            geometry: CompositeDomain::default(),
            basis: BasisSpec::default(),
            method: Method::Dtn,
            steklov_truncation: dtn_helmholtz::DEFAULT_TRUNCATION,
            quadrature: None,
            kappa0: None,
            tol: iteration.tolerance,
            max_iter: iteration.max_iter,
            tracking: iteration.tracking,
            sizes: vec![(3, 3), (5, 5), (15, 15), (25, 25), (30, 30)],
            grid: GridSpec::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let positive = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        };
        positive("geometry.a", self.geometry.a, &mut problems);
        positive("geometry.b", self.geometry.b, &mut problems);
        positive("basis.alpha", self.basis.alpha, &mut problems);
        positive("basis.beta", self.basis.beta, &mut problems);
        positive("tol", self.tol, &mut problems);
        positive("oracle.h", self.oracle.h, &mut problems);
        if let Some(k) = self.kappa0 {
            positive("kappa0", k, &mut problems);
        }
        for (name, v) in [
            ("basis.n_max", self.basis.n_max),
            ("basis.m_max", self.basis.m_max),
            ("steklov_truncation", self.steklov_truncation),
            ("max_iter", self.max_iter),
            ("oracle.num_modes", self.oracle.num_modes),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if let Some(q) = self.quadrature {
            if q.n_r == 0 || q.n_phi == 0 || q.n_s == 0 {
                problems.push("quadrature orders must be positive".into());
            }
        }
        if self.sizes.iter().any(|&(n, m)| n == 0 || m == 0) {
            problems.push("sizes must be positive".into());
        }
        if self.grid.nx < 2 || self.grid.ny < 2 {
            problems.push("grid needs at least 2×2 nodes".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems.join("; ")))
        }
    }

    pub fn iteration(&self) -> IterationConfig {
        IterationConfig {
            tolerance: self.tol,
            max_iter: self.max_iter,
            tracking: self.tracking,
        }
    }

    pub fn quadrature_for(&self, spec: &BasisSpec) -> QuadConfig {
        self.quadrature
            .unwrap_or_else(|| QuadConfig::resolving(spec, &self.geometry, self.steklov_truncation))
    }

    /// Basis of the configured size with the given parity.
    pub fn basis_with(&self, parity: Parity, n_max: usize, m_max: usize) -> BasisSpec {
        BasisSpec {
            parity,
            n_max,
            m_max,
            ..self.basis
        }
    }
}

/// Parses a mode label such as `even,1` or `odd,2`.
pub fn parse_mode(label: &str) -> Result<(Parity, usize), String> {
    let (parity, order) = label
        .split_once(',')
        .ok_or_else(|| format!("mode must look like \"even,1\", got {label:?}"))?;
    let parity = match parity.trim() {
        "even" => Parity::Even,
        "odd" => Parity::Odd,
        other => return Err(format!("unknown parity {other:?}")),
    };
    let order: usize = order
        .trim()
        .parse()
        .map_err(|_| format!("mode order must be a positive integer, got {order:?}"))?;
    if order == 0 {
        return Err("mode order starts at 1".into());
    }
    Ok((parity, order))
}

pub fn mode_label(parity: Parity, order: usize) -> String {
    format!("{parity},{order}")
}

/// Seed `κ` for a tracked mode, if it is one of the four reference modes.
pub fn seed(parity: Parity, order: usize) -> Option<f64> {
    SEEDS
        .iter()
        .find(|s| s.0 == parity && s.1 == order)
        .map(|s| s.2)
}
