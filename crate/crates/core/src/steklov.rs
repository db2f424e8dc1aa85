//! Steklov spectral data of the rectangle at a fixed energy parameter `κ`.
//!
//! The Steklov problem on the rectangle `-a < x < a, -b < y < 0` with
//! Dirichlet walls has modes
//!
//! ```text
//! ψ_n(x, y) = A_n sin(nπ(x + a)/2a) · Y_n(y)
//! ```
//!
//! with `Y_n = sin(μ(y + b))`, `μ² = κ² - λ_n` (oscillatory) or
//! `Y_n = sinh(s(y + b))`, `s² = λ_n - κ²` (evanescent), `λ_n = (nπ/2a)²`.
//! The amplitudes make the interface traces orthonormal, so every trace is
//! `sin(nπ(x + a)/2a) / √a` independently of `κ`. The DtN operator is
//! diagonal in this trace basis with eigenvalues
//! `b_n = -μ cot(μb)` (resp. `-s coth(sb)`), the NtD operator with `1/b_n`.
//!
//! Close to `κ² = λ_n` both branches are evaluated from their common power
//! series in `t = (κ² - λ_n) b²`, which removes the `0/0` of the closed forms.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{CompositeDomain, QuadratureRule1D};

/// `|sin(μb)|` below this is treated as a Dirichlet resonance of the rectangle.
pub const DIRICHLET_POLE_GUARD: f64 = 1e-8;
/// `|b_n|` below this makes the NtD operator undefined.
pub const NEUMANN_POLE_GUARD: f64 = 1e-12;
/// Below this `|t|` the power series are used instead of the closed forms.
const SERIES_BAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `κ² ≥ λ_n`
    Oscillatory,
    /// `κ² < λ_n`
    Evanescent,
}

/// One Steklov eigenpair of the rectangle at fixed `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteklovMode {
    pub n: usize,
    pub lambda_n: f64,
    pub regime: Regime,
    pub b_n: f64,
    pub db_n_dkappa: f64,
    /// Normalisation `A_n` of the mode field.
    pub amplitude: f64,
}

/// Transverse eigenvalue `λ_n = (nπ/2a)²`.
#[inline]
pub fn transverse_eigenvalue(n: usize, domain: &CompositeDomain) -> f64 {
    let k = n as f64 * PI / (2.0 * domain.a);
    k * k
}

// x cot x = Σ c_k t^k with t = x²; for x coth x substitute t → -t.
const XCOTX: [f64; 6] = [
    1.0,
    -1.0 / 3.0,
    -1.0 / 45.0,
    -2.0 / 945.0,
    -1.0 / 4725.0,
    -2.0 / 93555.0,
];

fn series(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// `-(d/dx)(x cot x) / x` as a series in `t = x²`.
fn dxcot_series(t: f64) -> f64 {
    // derivative of Σ c_k x^{2k} is Σ 2k c_k x^{2k-1}
    let coeffs: Vec<f64> = XCOTX
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| -2.0 * k as f64 * c)
        .collect();
    series(&coeffs, t)
}

impl SteklovMode {
    pub fn new(kappa: f64, n: usize, domain: &CompositeDomain) -> Result<Self> {
        let lambda_n = transverse_eigenvalue(n, domain);
        let b = domain.b;
        let diff = kappa * kappa - lambda_n;
        let t = diff * b * b;
        let regime = if diff >= 0.0 {
            Regime::Oscillatory
        } else {
            Regime::Evanescent
        };
        let sqrt_a = domain.a.sqrt();

        if t.abs() < SERIES_BAND {
            let b_n = -series(&XCOTX, t) / b;
            let db_n_dkappa = kappa * b * dxcot_series(t);
            let x = t.abs().sqrt();
            let y_at_interface = if diff >= 0.0 { x.sin() } else { x.sinh() };
            let amplitude = 1.0 / (sqrt_a * y_at_interface);
            return Ok(Self {
                n,
                lambda_n,
                regime,
                b_n,
                db_n_dkappa,
                amplitude,
            });
        }

        match regime {
            Regime::Oscillatory => {
                let mu = diff.sqrt();
                let x = mu * b;
                let sin = x.sin();
                if sin.abs() < DIRICHLET_POLE_GUARD {
                    return Err(Error::NearDirichletResonance { kappa, n });
                }
                let cot = x.cos() / sin;
                let b_n = -mu * cot;
                let db_n_dkappa = (kappa / mu) * (-cot + x / (sin * sin));
                Ok(Self {
                    n,
                    lambda_n,
                    regime,
                    b_n,
                    db_n_dkappa,
                    amplitude: 1.0 / (sqrt_a * sin),
                })
            }
            Regime::Evanescent => {
                let s = (-diff).sqrt();
                let x = s * b;
                // coth and x/sinh² written to stay finite for large x
                let e = (-2.0 * x).exp();
                let coth = (1.0 + e) / (1.0 - e);
                let x_over_sinh2 = 4.0 * x * e / ((1.0 - e) * (1.0 - e));
                let b_n = -s * coth;
                let db_n_dkappa = (-kappa / s) * (-coth + x_over_sinh2);
                let amplitude = if x < 700.0 {
                    1.0 / (sqrt_a * x.sinh())
                } else {
                    0.0
                };
                Ok(Self {
                    n,
                    lambda_n,
                    regime,
                    b_n,
                    db_n_dkappa,
                    amplitude,
                })
            }
        }
    }

    /// `∫_{Γ_II} ψ_n²` from the closed-form `y` integral.
    pub fn volume_norm(&self, kappa: f64, domain: &CompositeDomain) -> f64 {
        let b = domain.b;
        let t = (kappa * kappa - self.lambda_n) * b * b;
        // ∫_0^b Y(z)² dz / Y(b)² with Y = sin(μz) or sinh(sz)
        if t.abs() < SERIES_BAND {
            // closed form loses digits here; the series of the derivative does not
            return self.db_n_dkappa / (2.0 * kappa);
        }
        match self.regime {
            Regime::Oscillatory => {
                let mu = (kappa * kappa - self.lambda_n).sqrt();
                let x = mu * b;
                (b / 2.0 - (2.0 * x).sin() / (4.0 * mu)) / x.sin().powi(2)
            }
            Regime::Evanescent => {
                let s = (self.lambda_n - kappa * kappa).sqrt();
                let x = s * b;
                let e = (-2.0 * x).exp();
                // (sinh(2x)/(4s) - b/2) / sinh²x, rearranged with e = exp(-2x)
                let sinh2x_over_sinh2 = 2.0 * (1.0 + e) / (1.0 - e);
                let inv_sinh2 = 4.0 * e / ((1.0 - e) * (1.0 - e));
                sinh2x_over_sinh2 / (4.0 * s) - b / 2.0 * inv_sinh2
            }
        }
    }

    /// `∂(1/b_n)/∂κ = -(∂b_n/∂κ)/b_n²`.
    pub fn dinv_b_dkappa(&self) -> f64 {
        -self.db_n_dkappa / (self.b_n * self.b_n)
    }
}

pub fn steklov_eigenvalue(kappa: f64, n: usize, domain: &CompositeDomain) -> Result<f64> {
    SteklovMode::new(kappa, n, domain).map(|m| m.b_n)
}

pub fn steklov_eigenvalue_derivative(
    kappa: f64,
    n: usize,
    domain: &CompositeDomain,
) -> Result<f64> {
    SteklovMode::new(kappa, n, domain).map(|m| m.db_n_dkappa)
}

/// Interface trace `ψ_n(x, 0) = sin(nπ(x + a)/2a)/√a`.
#[inline]
pub fn steklov_trace(n: usize, domain: &CompositeDomain, x: f64) -> f64 {
    let a = domain.a;
    (n as f64 * PI * (x + a) / (2.0 * a)).sin() / a.sqrt()
}

/// Ratio `Y_n(y)/Y_n(0)`, which is what multiplies the trace inside `Γ_II`.
pub(crate) fn depth_profile(kappa: f64, lambda_n: f64, b: f64, y: f64) -> f64 {
    let z = y + b;
    let diff = kappa * kappa - lambda_n;
    if diff >= 0.0 {
        let mu = diff.sqrt();
        if mu * b < 1e-6 {
            z / b
        } else {
            (mu * z).sin() / (mu * b).sin()
        }
    } else {
        let s = (-diff).sqrt();
        if s * b < 1e-6 {
            z / b
        } else {
            // sinh(sz)/sinh(sb) without overflow
            (-s * (b - z)).exp() * (1.0 - (-2.0 * s * z).exp()) / (1.0 - (-2.0 * s * b).exp())
        }
    }
}

/// Value of the Steklov mode `ψ_n(κ; x, y)` inside the rectangle.
pub fn steklov_mode_field(
    kappa: f64,
    n: usize,
    domain: &CompositeDomain,
    x: f64,
    y: f64,
) -> Result<f64> {
    let tol = 1e-12;
    if x.abs() > domain.a + tol || y > tol || y < -domain.b - tol {
        return Err(Error::OutsideSubdomain { x, y });
    }
    let mode = SteklovMode::new(kappa, n, domain)?;
    Ok(steklov_trace(n, domain, x) * depth_profile(kappa, mode.lambda_n, domain.b, y))
}

/// Steklov coefficients `c_n = (ψ_n | f)` for `n = 1..=truncation` of a
/// function sampled at the nodes of `rule`.
pub fn project_surface(
    samples: &[f64],
    truncation: usize,
    domain: &CompositeDomain,
    rule: &QuadratureRule1D,
) -> Vec<f64> {
    assert_eq!(samples.len(), rule.len(), "one sample per quadrature node");
    (1..=truncation)
        .map(|n| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .zip(samples)
                .map(|((&x, &w), &f)| w * steklov_trace(n, domain, x) * f)
                .sum()
        })
        .collect()
}

/// Steklov data of the first `N` modes at one `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteklovSpectrum {
    pub kappa: f64,
    pub modes: Vec<SteklovMode>,
}

impl SteklovSpectrum {
    pub fn new(kappa: f64, truncation: usize, domain: &CompositeDomain) -> Result<Self> {
        let modes = (1..=truncation)
            .map(|n| SteklovMode::new(kappa, n, domain))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kappa, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn check_ntd(&self) -> Result<()> {
        match self.modes.iter().find(|m| m.b_n.abs() < NEUMANN_POLE_GUARD) {
            Some(m) => Err(Error::NearNeumannResonance {
                kappa: self.kappa,
                n: m.n,
            }),
            None => Ok(()),
        }
    }

    fn scale(&self, c: &[f64], f: impl Fn(&SteklovMode) -> f64) -> Vec<f64> {
        assert!(
            c.len() <= self.modes.len(),
            "coefficients beyond truncation"
        );
        c.iter().zip(&self.modes).map(|(&c, m)| f(m) * c).collect()
    }

    pub fn apply_dtn(&self, c: &[f64]) -> Vec<f64> {
        self.scale(c, |m| m.b_n)
    }

    pub fn apply_dtn_derivative(&self, c: &[f64]) -> Vec<f64> {
        self.scale(c, |m| m.db_n_dkappa)
    }

    pub fn apply_ntd(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_ntd()?;
        Ok(self.scale(c, |m| 1.0 / m.b_n))
    }

    pub fn apply_ntd_derivative(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_ntd()?;
        Ok(self.scale(c, SteklovMode::dinv_b_dkappa))
    }
}

pub fn apply_dtn(c: &[f64], kappa: f64, domain: &CompositeDomain) -> Result<Vec<f64>> {
    Ok(SteklovSpectrum::new(kappa, c.len(), domain)?.apply_dtn(c))
}

pub fn apply_ntd(c: &[f64], kappa: f64, domain: &CompositeDomain) -> Result<Vec<f64>> {
    SteklovSpectrum::new(kappa, c.len(), domain)?.apply_ntd(c)
}

pub fn apply_dtn_derivative(c: &[f64], kappa: f64, domain: &CompositeDomain) -> Result<Vec<f64>> {
    Ok(SteklovSpectrum::new(kappa, c.len(), domain)?.apply_dtn_derivative(c))
}

pub fn apply_ntd_derivative(c: &[f64], kappa: f64, domain: &CompositeDomain) -> Result<Vec<f64>> {
    SteklovSpectrum::new(kappa, c.len(), domain)?.apply_ntd_derivative(c)
}
