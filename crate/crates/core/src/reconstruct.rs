//! Composite eigenfunction from a converged solution: semicircle part from
//! the basis coefficients, rectangle part as a Steklov expansion, sampling
//! of `|Ψ|²` on a grid and export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, Method, QuadConfig};
use crate::basis::{BasisSpec, Parity};
use crate::error::{Error, Result};
use crate::geometry::{cartesian_to_polar, classify_point, CompositeDomain, Region};
use crate::steklov::{depth_profile, steklov_trace, transverse_eigenvalue, SteklovSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    /// `k = √F̃`
    pub k_estimate: f64,
    /// Converged generalized eigenvalue `F̃`.
    pub f_value: f64,
    /// `κ` at which the rectangle expansion is evaluated.
    pub kappa: f64,
    pub method: Method,
    pub parity: Parity,
    pub gamma1_coeffs: Vec<f64>,
    pub gamma2_coeffs: Vec<f64>,
}

impl ModeEstimate {
    /// `∫_Γ |Ψ|²`, with the rectangle part from the closed-form mode norms.
    pub fn norm_squared(&self, assembler: &Assembler) -> Result<f64> {
        let a = DVector::from_column_slice(&self.gamma1_coeffs);
        let semicircle = a.dot(&(&assembler.gram * &a));
        let spectrum =
            SteklovSpectrum::new(self.kappa, self.gamma2_coeffs.len(), &assembler.domain)?;
        let rectangle: f64 = self
            .gamma2_coeffs
            .iter()
            .zip(&spectrum.modes)
            .map(|(c, m)| c * c * m.volume_norm(self.kappa, &assembler.domain))
            .sum();
        Ok(semicircle + rectangle)
    }

    /// Copy scaled so that `∫_Γ |Ψ|² = 1`.
    pub fn normalized(&self, assembler: &Assembler) -> Result<Self> {
        let norm = self.norm_squared(assembler)?;
        if norm <= 0.0 {
            return Err(Error::ZeroTrial);
        }
        let s = 1.0 / norm.sqrt();
        let mut out = self.clone();
        out.gamma1_coeffs.iter_mut().for_each(|v| *v *= s);
        out.gamma2_coeffs.iter_mut().for_each(|v| *v *= s);
        Ok(out)
    }

    /// Interface continuity defects `(‖Ψ_I − Ψ_II‖, ‖∇⊥Ψ_I − ∇⊥Ψ_II‖)` on `S`,
    /// measured in the truncated Steklov basis.
    pub fn interface_mismatch(&self, assembler: &Assembler) -> Result<(f64, f64)> {
        let n = self.gamma2_coeffs.len();
        let spectrum = SteklovSpectrum::new(self.kappa, n, &assembler.domain)?;
        let t = assembler.trace_coefficients(&self.gamma1_coeffs);
        let g = assembler.normal_coefficients(&self.gamma1_coeffs);
        let slope = spectrum.apply_dtn(&self.gamma2_coeffs);
        let value: f64 = t
            .iter()
            .zip(&self.gamma2_coeffs)
            .map(|(p, q)| (p - q).powi(2))
            .sum();
        let normal: f64 = g.iter().zip(&slope).map(|(p, q)| (p - q).powi(2)).sum();
        Ok((value.sqrt(), normal.sqrt()))
    }
}

/// Rectangle Steklov coefficients for semicircle coefficients `gamma1`.
///
/// DtN: `c_n = (ψ_n | Ψ_I)`; NtD: `c_n = (ψ_n | ∇⊥Ψ_I) / b_n`.
pub fn gamma2_coefficients(
    method: Method,
    gamma1: &[f64],
    kappa: f64,
    spec: &BasisSpec,
    domain: &CompositeDomain,
    truncation: usize,
) -> Result<Vec<f64>> {
    let quad = QuadConfig::resolving(spec, domain, truncation);
    let assembler = Assembler::new(spec, domain, quad, truncation);
    gamma2_coefficients_with(&assembler, method, gamma1, kappa)
}

pub fn gamma2_coefficients_with(
    assembler: &Assembler,
    method: Method,
    gamma1: &[f64],
    kappa: f64,
) -> Result<Vec<f64>> {
    match method {
        Method::Dtn => Ok(assembler.trace_coefficients(gamma1)),
        Method::Ntd => {
            let spectrum = assembler.spectrum(kappa)?;
            spectrum.apply_ntd(&assembler.normal_coefficients(gamma1))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 401, ny: 701 }
    }
}

/// `|Ψ|²` on a node grid over `[−a, a] × [−b, a]`, row-major with `y`
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn x(&self, i: usize) -> f64 {
        node(self.x_range, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        node(self.y_range, self.ny, j)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    fn cell_area(&self) -> f64 {
        spacing(self.x_range, self.nx) * spacing(self.y_range, self.ny)
    }
}

fn node(range: (f64, f64), n: usize, i: usize) -> f64 {
    if n <= 1 {
        0.5 * (range.0 + range.1)
    } else {
        range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
    }
}

fn spacing(range: (f64, f64), n: usize) -> f64 {
    if n <= 1 {
        range.1 - range.0
    } else {
        (range.1 - range.0) / (n - 1) as f64
    }
}

/// Sample `|Ψ|²` and normalise so that the cell-weighted sum is one.
pub fn sample_field(
    estimate: &ModeEstimate,
    spec: &BasisSpec,
    domain: &CompositeDomain,
    grid: GridSpec,
) -> Result<FieldGrid> {
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::InvalidConfig(
            "field grid needs at least 2×2 nodes".into(),
        ));
    }
    if spec.size() != estimate.gamma1_coeffs.len() {
        return Err(Error::InvalidConfig(format!(
            "basis has {} functions, estimate has {} coefficients",
            spec.size(),
            estimate.gamma1_coeffs.len()
        )));
    }
    let x_range = (-domain.a, domain.a);
    let y_range = (-domain.b, domain.a);
    let xs: Vec<f64> = (0..grid.nx).map(|i| node(x_range, grid.nx, i)).collect();
    let ys: Vec<f64> = (0..grid.ny).map(|j| node(y_range, grid.ny, j)).collect();

    let c = &estimate.gamma2_coeffs;
    let lambdas: Vec<f64> = (1..=c.len())
        .map(|n| transverse_eigenvalue(n, domain))
        .collect();
    let traces: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| (1..=c.len()).map(|n| steklov_trace(n, domain, x)).collect())
        .collect();

    let rows: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|&y| {
            let depth: Vec<f64> = lambdas
                .iter()
                .map(|&l| depth_profile(estimate.kappa, l, domain.b, y))
                .collect();
            let mut buf = vec![0.0; spec.size()];
            xs.iter()
                .zip(&traces)
                .map(|(&x, trace)| {
                    let psi = match classify_point(domain, x, y) {
                        Region::Semicircle | Region::Interface => {
                            let (r, phi) =
                                cartesian_to_polar(domain, x, y.max(0.0)).expect("inside closure");
                            spec.values_polar(domain, r, phi, &mut buf);
                            buf.iter()
                                .zip(&estimate.gamma1_coeffs)
                                .map(|(f, a)| f * a)
                                .sum()
                        }
                        Region::Rectangle => trace
                            .iter()
                            .zip(&depth)
                            .zip(c)
                            .map(|((t, d), c)| c * t * d)
                            .sum(),
                        Region::Outside => 0.0,
                    };
                    psi * psi
                })
                .collect()
        })
        .collect();

    let mut field = FieldGrid {
        nx: grid.nx,
        ny: grid.ny,
        x_range,
        y_range,
        values: rows.into_iter().flatten().collect(),
    };
    let total: f64 = field.values.iter().sum::<f64>() * field.cell_area();
    if total > 0.0 {
        field.values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Pgm,
}

pub fn export_grid(grid: &FieldGrid, format: ExportFormat, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ExportFormat::Csv => {
            writeln!(out, "x,y,value")?;
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    writeln!(
                        out,
                        "{:.8e},{:.8e},{:.8e}",
                        grid.x(i),
                        grid.y(j),
                        grid.value(i, j)
                    )?;
                }
            }
        }
        ExportFormat::Pgm => {
            let max = grid.max();
            writeln!(out, "P2")?;
            writeln!(out, "{} {}", grid.nx, grid.ny)?;
            writeln!(out, "65535")?;
            // Image rows run top to bottom, so emit the largest y first.
            for j in (0..grid.ny).rev() {
                let row: Vec<String> = (0..grid.nx)
                    .map(|i| {
                        let level = if max > 0.0 {
                            (grid.value(i, j) / max * 65535.0).round() as u32
                        } else {
                            0
                        };
                        level.to_string()
                    })
                    .collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
