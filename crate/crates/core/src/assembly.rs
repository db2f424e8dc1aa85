//! Matrix assembly for the DtN and NtD variational methods and evaluation of
//! the general discontinuous functional.
//!
//! All `κ`-independent ingredients (semicircle Gram and Laplacian matrices,
//! the interface matrix `(φ_μ | ∇⊥φ_ν)`, and the Steklov projections of the
//! traces and normal-derivative traces) are computed once by [`Assembler::new`].
//! The operator terms are applied spectrally:
//! `(φ_μ | B̂ φ_ν) = Σ_n b_n (ψ_n|φ_μ)(ψ_n|φ_ν)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::geometry::{interface_rule, semicircle_rule, CompositeDomain, QuadratureRule1D};
use crate::steklov::{steklov_trace, SteklovSpectrum};

/// Default Steklov truncation.
pub const DEFAULT_TRUNCATION: usize = 200;

/// Quadrature points handled per parallel work item in volume assembly.
const VOLUME_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dtn,
    Ntd,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dtn => "dtn",
            Method::Ntd => "ntd",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Quadrature orders: `n_r × n_phi` polar nodes on the semicircle and `n_s`
/// Gauss-Legendre nodes on each half of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub n_r: usize,
    pub n_phi: usize,
    pub n_s: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            n_r: 64,
            n_phi: 64,
            n_s: 128,
        }
    }
}

impl QuadConfig {
    /// Orders large enough to resolve every product of trial functions and
    /// every Steklov trace up to `truncation`; never below the defaults.
    pub fn resolving(spec: &BasisSpec, domain: &CompositeDomain, truncation: usize) -> Self {
        let radial_phase = spec.n_max as f64 * spec.alpha * domain.a;
        let angular_phase = spec.m_max as f64 * spec.beta * std::f64::consts::PI;
        let base = Self::default();
        Self {
            n_r: base.n_r.max((2.0 * radial_phase).ceil() as usize + 32),
            n_phi: base.n_phi.max(angular_phase.ceil() as usize + 32),
            n_s: base
                .n_s
                .max(truncation + (2.0 * radial_phase).ceil() as usize + 64),
        }
    }

    /// Every order scaled by `factor`, rounded up.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |n: usize| (n as f64 * factor).ceil() as usize;
        Self {
            n_r: s(self.n_r),
            n_phi: s(self.n_phi),
            n_s: s(self.n_s),
        }
    }
}

/// Assembled `(Λ, Δ)` pair of one method at one `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub lambda: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub kappa: f64,
    pub method: Method,
    /// Relative asymmetry `max|Λ - Λᵀ| / max|Λ|` before symmetrisation.
    pub asymmetry: f64,
}

/// A trial pair: semicircle coefficients over the basis and Steklov
/// coefficients of the rectangle function at `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPair {
    pub gamma1_coeffs: Vec<f64>,
    pub gamma2_coeffs: Vec<f64>,
    pub kappa: f64,
}

/// Precomputed, `κ`-independent ingredients for one basis.
#[derive(Debug, Clone)]
pub struct Assembler {
    pub domain: CompositeDomain,
    pub spec: BasisSpec,
    pub quad: QuadConfig,
    pub truncation: usize,
    pub interface: QuadratureRule1D,
    /// `⟨φ_μ|φ_ν⟩_I`
    pub gram: DMatrix<f64>,
    /// `⟨φ_μ|Δφ_ν⟩_I`
    pub laplacian: DMatrix<f64>,
    /// `(φ_μ|∇⊥φ_ν)`
    pub surface: DMatrix<f64>,
    /// `(ψ_n|φ_μ)`, `N × M`
    pub trace_proj: DMatrix<f64>,
    /// `(ψ_n|∇⊥φ_μ)`, `N × M`
    pub normal_proj: DMatrix<f64>,
}

impl Assembler {
    pub fn new(
        spec: &BasisSpec,
        domain: &CompositeDomain,
        quad: QuadConfig,
        truncation: usize,
    ) -> Self {
        let m = spec.size();
        let (gram, laplacian) = volume_matrices(spec, domain, quad);

        let interface = interface_rule(domain, quad.n_s);
        let nq = interface.len();
        // Columns are quadrature nodes; weights folded into the left factors.
        let mut traces = DMatrix::<f64>::zeros(m, nq);
        let mut normals = DMatrix::<f64>::zeros(m, nq);
        let mut buf = vec![0.0; m];
        for (q, &x) in interface.nodes.iter().enumerate() {
            spec.traces(domain, x, &mut buf);
            traces.column_mut(q).copy_from_slice(&buf);
            spec.normal_derivative_traces(domain, x, &mut buf);
            normals.column_mut(q).copy_from_slice(&buf);
        }
        let weights = DVector::from_column_slice(&interface.weights);
        let mut weighted_traces = traces.clone();
        for (q, mut col) in weighted_traces.column_iter_mut().enumerate() {
            col *= weights[q];
        }
        let surface = &weighted_traces * normals.transpose();

        let mut psi = DMatrix::<f64>::zeros(truncation, nq);
        for (q, &x) in interface.nodes.iter().enumerate() {
            for n in 0..truncation {
                psi[(n, q)] = steklov_trace(n + 1, domain, x) * weights[q];
            }
        }
        let trace_proj = &psi * traces.transpose();
        let normal_proj = &psi * normals.transpose();

        Self {
            domain: *domain,
            spec: *spec,
            quad,
            truncation,
            interface,
            gram,
            laplacian,
            surface,
            trace_proj,
            normal_proj,
        }
    }

    pub fn size(&self) -> usize {
        self.spec.size()
    }

    pub fn spectrum(&self, kappa: f64) -> Result<SteklovSpectrum> {
        SteklovSpectrum::new(kappa, self.truncation, &self.domain)
    }

    /// `Pᵀ diag(d) P` for a projection matrix `P` (`N × M`).
    fn spectral_form(proj: &DMatrix<f64>, diag: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let mut scaled = proj.clone();
        for (n, mut row) in scaled.row_iter_mut().enumerate() {
            row *= diag(n);
        }
        proj.transpose() * scaled
    }

    pub fn assemble(&self, method: Method, kappa: f64) -> Result<MatrixPair> {
        match method {
            Method::Dtn => self.assemble_dtn(kappa),
            Method::Ntd => self.assemble_ntd(kappa),
        }
    }

    pub fn assemble_dtn(&self, kappa: f64) -> Result<MatrixPair> {
        check_kappa(kappa)?;
        let spectrum = self.spectrum(kappa)?;
        let modes = &spectrum.modes;
        let b_form = Self::spectral_form(&self.trace_proj, |n| modes[n].b_n);
        let db_form = Self::spectral_form(&self.trace_proj, |n| modes[n].db_n_dkappa);

        let lambda = -&self.laplacian + &self.surface - b_form + &db_form * (kappa / 2.0);
        let delta = &self.gram + db_form * (1.0 / (2.0 * kappa));
        Ok(finish(lambda, delta, kappa, Method::Dtn))
    }

    pub fn assemble_ntd(&self, kappa: f64) -> Result<MatrixPair> {
        check_kappa(kappa)?;
        let spectrum = self.spectrum(kappa)?;
        spectrum.check_ntd()?;
        let modes = &spectrum.modes;
        let r_form = Self::spectral_form(&self.normal_proj, |n| 1.0 / modes[n].b_n);
        let dr_form = Self::spectral_form(&self.normal_proj, |n| modes[n].dinv_b_dkappa());

        let lambda =
            -&self.laplacian + r_form - self.surface.transpose() - &dr_form * (kappa / 2.0);
        let delta = &self.gram - dr_form * (1.0 / (2.0 * kappa));
        Ok(finish(lambda, delta, kappa, Method::Ntd))
    }

    /// Steklov coefficients of the semicircle trace, `(ψ_n | Σ a_μ φ_μ)`.
    pub fn trace_coefficients(&self, gamma1: &[f64]) -> Vec<f64> {
        (&self.trace_proj * DVector::from_column_slice(gamma1))
            .as_slice()
            .to_vec()
    }

    /// Steklov coefficients of the semicircle normal derivative.
    pub fn normal_coefficients(&self, gamma1: &[f64]) -> Vec<f64> {
        (&self.normal_proj * DVector::from_column_slice(gamma1))
            .as_slice()
            .to_vec()
    }

    /// General discontinuous functional with mixing constant `a` and
    /// `b = 1 - a*`.
    ///
    /// Rectangle volume terms are analytic per Steklov mode. Interface terms
    /// are evaluated in the truncated Steklov trace basis, where every surface
    /// function is represented by its (quadrature) projections.
    pub fn evaluate_functional(&self, trial: &TrialPair, mixing: Complex64) -> Result<Complex64> {
        let a = DVector::from_column_slice(&trial.gamma1_coeffs);
        let c = &trial.gamma2_coeffs;
        assert_eq!(a.len(), self.size(), "gamma1 length must match basis size");
        assert!(c.len() <= self.truncation, "gamma2 longer than truncation");
        if a.iter().all(|&v| v == 0.0) && c.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroTrial);
        }
        let kappa = trial.kappa;
        check_kappa(kappa)?;
        let spectrum = self.spectrum(kappa)?;

        let norm1 = a.dot(&(&self.gram * &a));
        let lap1 = a.dot(&(&self.laplacian * &a));
        let norm2: f64 = c
            .iter()
            .zip(&spectrum.modes)
            .map(|(c, m)| c * c * m.db_n_dkappa / (2.0 * kappa))
            .sum();
        let lap2 = -kappa * kappa * norm2;

        let n = self.truncation;
        let pad = |v: &[f64]| {
            let mut out = vec![0.0; n];
            out[..v.len()].copy_from_slice(v);
            out
        };
        let t = self.trace_coefficients(a.as_slice());
        let g = self.normal_coefficients(a.as_slice());
        let u = pad(c);
        let v = pad(&spectrum.apply_dtn(c));
        let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
        let value_jump: Vec<f64> = t.iter().zip(&u).map(|(p, q)| p - q).collect();
        let slope_jump: Vec<f64> = g.iter().zip(&v).map(|(p, q)| p - q).collect();

        let one = Complex64::new(1.0, 0.0);
        // (a ∇Ψ_I + (1 - a)∇Ψ_II | Ψ_I - Ψ_II)
        let mismatch_value =
            mixing.conj() * dot(&g, &value_jump) + (one - mixing).conj() * dot(&v, &value_jump);
        // ((1 - a*)Ψ_I + a* Ψ_II | ∇Ψ_I - ∇Ψ_II)
        let mismatch_slope = (one - mixing) * dot(&t, &slope_jump) + mixing * dot(&u, &slope_jump);

        let denominator = norm1 + norm2;
        if denominator <= 0.0 {
            return Err(Error::ZeroTrial);
        }
        let numerator = Complex64::new(-(lap1 + lap2), 0.0) - mismatch_value + mismatch_slope;
        Ok(numerator / denominator)
    }
}

pub fn evaluate_discontinuous_functional(
    assembler: &Assembler,
    trial: &TrialPair,
    mixing: Complex64,
) -> Result<Complex64> {
    assembler.evaluate_functional(trial, mixing)
}

pub fn assemble_dtn(
    kappa: f64,
    spec: &BasisSpec,
    domain: &CompositeDomain,
    quad: QuadConfig,
    truncation: usize,
) -> Result<MatrixPair> {
    Assembler::new(spec, domain, quad, truncation).assemble_dtn(kappa)
}

pub fn assemble_ntd(
    kappa: f64,
    spec: &BasisSpec,
    domain: &CompositeDomain,
    quad: QuadConfig,
    truncation: usize,
) -> Result<MatrixPair> {
    Assembler::new(spec, domain, quad, truncation).assemble_ntd(kappa)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "kappa must be positive, got {kappa}"
        )))
    }
}

fn finish(lambda: DMatrix<f64>, delta: DMatrix<f64>, kappa: f64, method: Method) -> MatrixPair {
    let scale = lambda.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (&lambda - lambda.transpose()).amax() / scale;
    let lambda = (&lambda + lambda.transpose()) * 0.5;
    let delta = (&delta + delta.transpose()) * 0.5;
    MatrixPair {
        lambda,
        delta,
        kappa,
        method,
        asymmetry,
    }
}

/// Semicircle Gram and Laplacian matrices.
///
/// Quadrature points are split into fixed chunks; partial sums are reduced
/// in chunk order so the result does not depend on the thread schedule.
fn volume_matrices(
    spec: &BasisSpec,
    domain: &CompositeDomain,
    quad: QuadConfig,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let rule = semicircle_rule(domain, quad.n_r, quad.n_phi);
    let m = spec.size();
    let chunks: Vec<(usize, usize)> = (0..rule.len())
        .step_by(VOLUME_CHUNK)
        .map(|start| (start, (start + VOLUME_CHUNK).min(rule.len())))
        .collect();
    let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let len = end - start;
            let mut values = DMatrix::<f64>::zeros(m, len);
            let mut weighted = DMatrix::<f64>::zeros(m, len);
            let mut laps = DMatrix::<f64>::zeros(m, len);
            let mut v = vec![0.0; m];
            let mut l = vec![0.0; m];
            for (k, q) in (start..end).enumerate() {
                let (r, phi) = rule.polar[q];
                let w = rule.weights[q];
                spec.values_polar(domain, r, phi, &mut v);
                spec.laplacians_polar(domain, r, phi, &mut l);
                values.column_mut(k).copy_from_slice(&v);
                laps.column_mut(k).copy_from_slice(&l);
                for (dst, &src) in weighted.column_mut(k).iter_mut().zip(&v) {
                    *dst = w * src;
                }
            }
            let gram = &weighted * values.transpose();
            let lap = &weighted * laps.transpose();
            (gram, lap)
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut lap = DMatrix::<f64>::zeros(m, m);
    for (g, l) in partials {
        gram += g;
        lap += l;
    }
    (gram, lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Parity;
    use crate::geometry::{gauss_legendre, make_domain};
    use std::f64::consts::PI;

    fn dom() -> CompositeDomain {
        make_domain(1.0, 1.5).unwrap()
    }

    #[test]
    fn linear_function_gram_entry() {
        // ∫_0^1 (r - 1)² r dr · π = π/12
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 2, 2);
        let asm = Assembler::new(&spec, &d, QuadConfig::default(), 50);
        assert!((asm.gram[(0, 0)] - PI / 12.0).abs() < 1e-14);
    }

    #[test]
    fn delta_11_matches_low_order_oracle() {
        // Independent evaluation: (φ_1|∂B/∂κ φ_1) with φ_1 trace |x| - 1,
        // projections by a separate plain Gauss rule on each half.
        let d = dom();
        let kappa = 2.0116;
        let spec = BasisSpec::new(Parity::Even, 2, 2);
        let n = 200;
        let asm = Assembler::new(&spec, &d, QuadConfig::resolving(&spec, &d, n), n);
        let pair = asm.assemble_dtn(kappa).unwrap();

        let left = gauss_legendre(300, -1.0, 0.0).unwrap();
        let right = gauss_legendre(300, 0.0, 1.0).unwrap();
        let mut surface = 0.0;
        for k in 1..=n {
            let f = |x: f64| (x.abs() - 1.0) * (k as f64 * PI * (x + 1.0) / 2.0).sin();
            let c = left.integrate(f) + right.integrate(f);
            let db = crate::steklov::steklov_eigenvalue_derivative(kappa, k, &d).unwrap();
            surface += db * c * c;
        }
        let expect = PI / 12.0 + surface / (2.0 * kappa);
        assert!(
            (pair.delta[(0, 0)] - expect).abs() < 1e-12,
            "{} {}",
            pair.delta[(0, 0)],
            expect
        );
        assert!(pair.delta[(0, 0)] > PI / 12.0);
    }

    #[test]
    fn symmetric_before_forcing_and_metric_positive() {
        let d = dom();
        for parity in [Parity::Even, Parity::Odd] {
            let spec = BasisSpec::new(parity, 5, 5);
            let asm = Assembler::new(&spec, &d, QuadConfig::resolving(&spec, &d, 200), 200);
            for method in [Method::Dtn, Method::Ntd] {
                let pair = asm.assemble(method, 2.5).unwrap();
                assert!(
                    pair.asymmetry < 1e-10,
                    "{parity:?} {method}: {}",
                    pair.asymmetry
                );
                let eig = pair.delta.clone().symmetric_eigen();
                assert!(eig.eigenvalues.min() > 0.0);
            }
        }
    }

    #[test]
    fn kappa_must_be_positive() {
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 2, 2);
        let asm = Assembler::new(&spec, &d, QuadConfig::default(), 20);
        assert!(asm.assemble_dtn(0.0).is_err());
        assert!(asm.assemble_ntd(-1.0).is_err());
    }

    #[test]
    fn resonances_propagate() {
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 2, 2);
        let asm = Assembler::new(&spec, &d, QuadConfig::default(), 20);
        let dirichlet = (PI * PI / 4.0 + (PI / 1.5).powi(2)).sqrt();
        assert!(matches!(
            asm.assemble_dtn(dirichlet),
            Err(Error::NearDirichletResonance { n: 1, .. })
        ));
        let neumann = (PI * PI / 4.0 + (PI / 3.0).powi(2)).sqrt();
        assert!(matches!(
            asm.assemble_ntd(neumann),
            Err(Error::NearNeumannResonance { n: 1, .. })
        ));
    }

    #[test]
    fn zero_trial_rejected() {
        let d = dom();
        let spec = BasisSpec::new(Parity::Odd, 2, 2);
        let asm = Assembler::new(&spec, &d, QuadConfig::default(), 20);
        let trial = TrialPair {
            gamma1_coeffs: vec![0.0; 4],
            gamma2_coeffs: vec![0.0; 20],
            kappa: 2.0,
        };
        assert!(matches!(
            asm.evaluate_functional(&trial, Complex64::new(0.3, 0.1)),
            Err(Error::ZeroTrial)
        ));
    }

    fn random_trial(asm: &Assembler, kappa: f64, seed: u64) -> TrialPair {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        TrialPair {
            gamma1_coeffs: (0..asm.size()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gamma2_coeffs: (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            kappa,
        }
    }

    fn small_assembler(parity: Parity) -> Assembler {
        let d = dom();
        let spec = BasisSpec::new(parity, 4, 4);
        Assembler::new(&spec, &d, QuadConfig::resolving(&spec, &d, 120), 120)
    }

    #[test]
    fn functional_is_real_for_conjugate_mixing() {
        use rand::{Rng, SeedableRng};
        let asm = small_assembler(Parity::Even);
        let trial = random_trial(&asm, 2.3, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mixing = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let f = asm.evaluate_functional(&trial, mixing).unwrap();
            assert!(f.im.abs() < 1e-12, "{mixing}: {f}");
        }
    }

    // Reference forms built directly from Steklov coefficients.
    fn reference_parts(
        asm: &Assembler,
        trial: &TrialPair,
    ) -> (f64, f64, Vec<f64>, Vec<f64>, SteklovSpectrum) {
        let a = DVector::from_column_slice(&trial.gamma1_coeffs);
        let spectrum = asm.spectrum(trial.kappa).unwrap();
        let norm2: f64 = trial
            .gamma2_coeffs
            .iter()
            .zip(&spectrum.modes)
            .map(|(c, m)| c * c * m.db_n_dkappa / (2.0 * trial.kappa))
            .sum();
        let volume = -a.dot(&(&asm.laplacian * &a)) + trial.kappa * trial.kappa * norm2;
        let denominator = a.dot(&(&asm.gram * &a)) + norm2;
        (
            volume,
            denominator,
            asm.trace_coefficients(a.as_slice()),
            asm.normal_coefficients(a.as_slice()),
            spectrum,
        )
    }

    #[test]
    fn value_matched_trial_reduces_to_dirichlet_form() {
        for parity in [Parity::Even, Parity::Odd] {
            let asm = small_assembler(parity);
            let mut trial = random_trial(&asm, 2.3, 3);
            trial.gamma2_coeffs = asm.trace_coefficients(&trial.gamma1_coeffs);
            let (volume, den, t, g, spectrum) = reference_parts(&asm, &trial);
            let bt = spectrum.apply_dtn(&t);
            let surface: f64 = (0..t.len()).map(|n| t[n] * (g[n] - bt[n])).sum();
            let expect = (volume + surface) / den;
            for mixing in [
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.3, -2.0),
                Complex64::new(-4.0, 0.7),
            ] {
                let f = asm.evaluate_functional(&trial, mixing).unwrap();
                assert!(
                    (f.re - expect).abs() < 1e-10 * expect.abs().max(1.0),
                    "{f} {expect}"
                );
            }
        }
    }

    #[test]
    fn slope_matched_trial_reduces_to_neumann_form() {
        for parity in [Parity::Even, Parity::Odd] {
            let asm = small_assembler(parity);
            let mut trial = random_trial(&asm, 2.3, 4);
            let g = asm.normal_coefficients(&trial.gamma1_coeffs);
            trial.gamma2_coeffs = asm.spectrum(2.3).unwrap().apply_ntd(&g).unwrap();
            let (volume, den, t, g, _) = reference_parts(&asm, &trial);
            let c = &trial.gamma2_coeffs;
            let surface: f64 = -(0..t.len()).map(|n| g[n] * (t[n] - c[n])).sum::<f64>();
            let expect = (volume + surface) / den;
            for mixing in [
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.3, -2.0),
                Complex64::new(-4.0, 0.7),
            ] {
                let f = asm.evaluate_functional(&trial, mixing).unwrap();
                assert!(
                    (f.re - expect).abs() < 1e-10 * expect.abs().max(1.0),
                    "{f} {expect}"
                );
            }
        }
    }

    #[test]
    fn mismatched_trial_depends_on_mixing() {
        let asm = small_assembler(Parity::Even);
        let trial = random_trial(&asm, 2.3, 5);
        let f0 = asm
            .evaluate_functional(&trial, Complex64::new(0.0, 0.0))
            .unwrap();
        let f1 = asm
            .evaluate_functional(&trial, Complex64::new(1.0, 0.0))
            .unwrap();
        assert!((f0 - f1).norm() > 1e-3);
    }

    fn log_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    fn converged(method: Method) -> (Assembler, crate::reconstruct::ModeEstimate) {
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 15, 15);
        let asm = Assembler::new(
            &spec,
            &d,
            QuadConfig::resolving(&spec, &d, DEFAULT_TRUNCATION),
            DEFAULT_TRUNCATION,
        );
        let config = crate::solver::IterationConfig {
            tolerance: 1e-12,
            ..Default::default()
        };
        let (est, _) = crate::solver::iterate_mode(&asm, method, 2.0116, &config).unwrap();
        (asm, est)
    }

    #[test]
    fn functional_at_converged_solution_matches_estimate_and_is_stationary() {
        use rand::{Rng, SeedableRng};
        for method in [Method::Dtn, Method::Ntd] {
            let (asm, est) = converged(method);
            let base = TrialPair {
                gamma1_coeffs: est.gamma1_coeffs.clone(),
                gamma2_coeffs: est.gamma2_coeffs.clone(),
                kappa: est.kappa,
            };
            let mixing = Complex64::new(0.4, 0.9);
            let f0 = asm.evaluate_functional(&base, mixing).unwrap().re;
            assert!(
                (f0 - est.f_value).abs() < 1e-6,
                "{method}: {f0} vs {}",
                est.f_value
            );

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
            let da: Vec<f64> = base
                .gamma1_coeffs
                .iter()
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let dc: Vec<f64> = base
                .gamma2_coeffs
                .iter()
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let points: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&eps| {
                    let mut t = base.clone();
                    t.gamma1_coeffs
                        .iter_mut()
                        .zip(&da)
                        .for_each(|(x, d)| *x += eps * d);
                    t.gamma2_coeffs
                        .iter_mut()
                        .zip(&dc)
                        .for_each(|(x, d)| *x += eps * d);
                    let df = asm.evaluate_functional(&t, mixing).unwrap().re - f0;
                    (eps.ln(), df.abs().ln())
                })
                .collect();
            let order = log_slope(&points);
            assert!(order >= 1.9, "{method}: observed order {order}");
        }
    }

    fn max_rel(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        (x - y).amax() / y.amax()
    }

    #[test]
    fn entries_stable_under_quadrature_refinement() {
        let d = dom();
        let spec = BasisSpec::new(Parity::Odd, 5, 5);
        let quad = QuadConfig::resolving(&spec, &d, DEFAULT_TRUNCATION);
        let base = Assembler::new(&spec, &d, quad, DEFAULT_TRUNCATION);
        let fine = Assembler::new(&spec, &d, quad.scaled(1.5), DEFAULT_TRUNCATION);
        for method in [Method::Dtn, Method::Ntd] {
            let p = base.assemble(method, 2.0611).unwrap();
            let q = fine.assemble(method, 2.0611).unwrap();
            assert!(max_rel(&q.lambda, &p.lambda) < 1e-10);
            assert!(max_rel(&q.delta, &p.delta) < 1e-10);
        }
    }

    #[test]
    fn truncation_tail_decays_algebraically() {
        // Doubling N leaves Δ fixed to 1e-10 but Λ only converges like
        // N^-2 (DtN) and N^-4 (NtD).
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 5, 5);
        let quad = QuadConfig::resolving(&spec, &d, 400);
        let pairs = |method: Method| -> Vec<MatrixPair> {
            [100, 200, 400]
                .iter()
                .map(|&n| {
                    Assembler::new(&spec, &d, quad, n)
                        .assemble(method, 2.0611)
                        .unwrap()
                })
                .collect()
        };
        for (method, rate) in [(Method::Dtn, 4.0), (Method::Ntd, 16.0)] {
            let m = pairs(method);
            assert!(max_rel(&m[2].delta, &m[1].delta) < 1e-10);
            let coarse = (&m[1].lambda - &m[0].lambda).amax();
            let fine = (&m[2].lambda - &m[1].lambda).amax();
            let ratio = coarse / fine;
            assert!((ratio / rate - 1.0).abs() < 0.1, "{method}: {ratio}");
        }
    }

    #[test]
    fn parallel_assembly_matches_single_thread() {
        let d = dom();
        let spec = BasisSpec::new(Parity::Even, 4, 4);
        let quad = QuadConfig::resolving(&spec, &d, 100);
        let parallel = Assembler::new(&spec, &d, quad, 100);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool.install(|| Assembler::new(&spec, &d, quad, 100));
        assert_eq!(parallel.gram, serial.gram);
        assert_eq!(parallel.laplacian, serial.laplacian);
        assert_eq!(parallel.surface, serial.surface);
    }
}
