//! Trial functions on the semicircle.
//!
//! Even family: `φ_1 = r - a` followed by `r sin(nα(r - a)) cos(mβφ)`.
//! Odd family: `r sin(nα(r - a)) sin(mβφ)`.
//! Both run over `1 ≤ n ≤ n_max`, `1 ≤ m ≤ m_max`; the index `μ` (1-based)
//! enumerates `(n, m)` row-major in `n` then `m`, after the linear function
//! for the even family. All members vanish on the arc `r = a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cartesian_to_polar, CompositeDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSpec {
    pub parity: Parity,
    pub alpha: f64,
    pub beta: f64,
    pub n_max: usize,
    pub m_max: usize,
}

/// Which closed form a basis index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFunction {
    /// `r - a`, even family only.
    Linear,
    /// Product term with radial index `n` and angular index `m`.
    Product { n: usize, m: usize },
}

impl Default for BasisSpec {
    /// Even family, `α = β = 1`, 15 × 15.
    fn default() -> Self {
        Self::new(Parity::Even, 15, 15)
    }
}

impl BasisSpec {
    pub fn new(parity: Parity, n_max: usize, m_max: usize) -> Self {
        Self {
            parity,
            alpha: 1.0,
            beta: 1.0,
            n_max,
            m_max,
        }
    }

    pub fn size(&self) -> usize {
        let products = self.n_max * self.m_max;
        match self.parity {
            Parity::Even => products + 1,
            Parity::Odd => products,
        }
    }

    /// Maps the 1-based index `μ` to its closed form.
    pub fn function(&self, mu: usize) -> Result<BasisFunction> {
        let size = self.size();
        if mu == 0 || mu > size {
            return Err(Error::IndexOutOfRange { index: mu, size });
        }
        let k = match self.parity {
            Parity::Even if mu == 1 => return Ok(BasisFunction::Linear),
            Parity::Even => mu - 2,
            Parity::Odd => mu - 1,
        };
        Ok(BasisFunction::Product {
            n: k / self.m_max + 1,
            m: k % self.m_max + 1,
        })
    }

    /// Inverse of [`BasisSpec::function`].
    pub fn index_of(&self, f: BasisFunction) -> Option<usize> {
        match (self.parity, f) {
            (Parity::Even, BasisFunction::Linear) => Some(1),
            (Parity::Odd, BasisFunction::Linear) => None,
            (_, BasisFunction::Product { n, m }) => {
                if n == 0 || m == 0 || n > self.n_max || m > self.m_max {
                    return None;
                }
                let k = (n - 1) * self.m_max + (m - 1);
                Some(match self.parity {
                    Parity::Even => k + 2,
                    Parity::Odd => k + 1,
                })
            }
        }
    }

    fn offset(&self) -> usize {
        match self.parity {
            Parity::Even => 1,
            Parity::Odd => 0,
        }
    }

    fn angular(&self, m: usize, phi: f64) -> (f64, f64) {
        // (A, dA/dφ)
        let w = m as f64 * self.beta;
        match self.parity {
            Parity::Even => ((w * phi).cos(), -w * (w * phi).sin()),
            Parity::Odd => ((w * phi).sin(), w * (w * phi).cos()),
        }
    }

    /// Values of all basis functions at polar point `(r, φ)`, in index order.
    pub fn values_polar(&self, domain: &CompositeDomain, r: f64, phi: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size());
        let radial = self.radial_table(domain, r);
        let angular: Vec<f64> = (1..=self.m_max).map(|m| self.angular(m, phi).0).collect();
        let off = self.offset();
        if off == 1 {
            out[0] = r - domain.a;
        }
        for (i, (s, _)) in radial.iter().enumerate() {
            let rs = r * s;
            let row = &mut out[off + i * self.m_max..off + (i + 1) * self.m_max];
            for (o, a) in row.iter_mut().zip(&angular) {
                *o = rs * a;
            }
        }
    }

    /// Polar Laplacians of all basis functions at `(r, φ)`, `r > 0`.
    pub fn laplacians_polar(&self, domain: &CompositeDomain, r: f64, phi: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size());
        let radial = self.radial_table(domain, r);
        let off = self.offset();
        if off == 1 {
            out[0] = 1.0 / r;
        }
        for (i, &(s, c)) in radial.iter().enumerate() {
            let k = (i + 1) as f64 * self.alpha;
            // Δ(r S A) = A (3S' + r S'') + (S/r)(A + A'')
            let radial_part = 3.0 * k * c - r * k * k * s;
            for m in 1..=self.m_max {
                let w = m as f64 * self.beta;
                let (a, _) = self.angular(m, phi);
                out[off + i * self.m_max + m - 1] = a * (radial_part + s / r * (1.0 - w * w));
            }
        }
    }

    /// Traces on the interface `y = 0` of all basis functions.
    pub fn traces(&self, domain: &CompositeDomain, x: f64, out: &mut [f64]) {
        let r = x.abs();
        let phi = if x < 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        self.values_polar(domain, r, phi, out);
    }

    /// Normal-derivative traces `-∂φ_μ/∂y` at `(x, 0)`.
    ///
    /// On the interface `∂r/∂y = 0` and `∂φ/∂y = 1/x`, so the result is
    /// `-sign(x) r S(r) A'(φ_0) / r`, which stays finite at `x = 0`. For the
    /// odd family the one-sided limits differ in sign and `x = 0` returns
    /// their mean, zero.
    pub fn normal_derivative_traces(&self, domain: &CompositeDomain, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size());
        let r = x.abs();
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        let radial = self.radial_table(domain, r);
        let off = self.offset();
        if off == 1 {
            out[0] = 0.0;
        }
        for (i, &(s, _)) in radial.iter().enumerate() {
            for m in 1..=self.m_max {
                let w = m as f64 * self.beta;
                let value = match self.parity {
                    // A'(φ0) = -w sin(w φ0) = sign · w sin(wπ/2)
                    Parity::Even => -s * w * (w * std::f64::consts::FRAC_PI_2).sin(),
                    Parity::Odd => -sign * s * w * (w * std::f64::consts::FRAC_PI_2).cos(),
                };
                out[off + i * self.m_max + m - 1] = value;
            }
        }
    }

    /// `(sin(nα(r - a)), cos(nα(r - a)))` for `n = 1..=n_max`.
    fn radial_table(&self, domain: &CompositeDomain, r: f64) -> Vec<(f64, f64)> {
        (1..=self.n_max)
            .map(|n| (n as f64 * self.alpha * (r - domain.a)).sin_cos())
            .collect()
    }

    fn single<F>(&self, mu: usize, f: F) -> Result<f64>
    where
        F: FnOnce(&mut [f64]),
    {
        self.function(mu)?;
        let mut buf = vec![0.0; self.size()];
        f(&mut buf);
        Ok(buf[mu - 1])
    }
}

pub fn eval_basis(
    spec: &BasisSpec,
    mu: usize,
    domain: &CompositeDomain,
    x: f64,
    y: f64,
) -> Result<f64> {
    spec.function(mu)?;
    let (r, phi) = cartesian_to_polar(domain, x, y)?;
    spec.single(mu, |buf| spec.values_polar(domain, r, phi, buf))
}

pub fn eval_basis_laplacian(
    spec: &BasisSpec,
    mu: usize,
    domain: &CompositeDomain,
    x: f64,
    y: f64,
) -> Result<f64> {
    spec.function(mu)?;
    let (r, phi) = cartesian_to_polar(domain, x, y)?;
    if r < 1e-14 {
        return Err(Error::SingularOrigin);
    }
    spec.single(mu, |buf| spec.laplacians_polar(domain, r, phi, buf))
}

pub fn basis_trace(spec: &BasisSpec, mu: usize, domain: &CompositeDomain, x: f64) -> Result<f64> {
    if x.abs() > domain.a {
        return Err(Error::OutsideSubdomain { x, y: 0.0 });
    }
    spec.single(mu, |buf| spec.traces(domain, x, buf))
}

pub fn basis_normal_derivative_trace(
    spec: &BasisSpec,
    mu: usize,
    domain: &CompositeDomain,
    x: f64,
) -> Result<f64> {
    if x.abs() > domain.a {
        return Err(Error::OutsideSubdomain { x, y: 0.0 });
    }
    spec.single(mu, |buf| spec.normal_derivative_traces(domain, x, buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{interface_rule, make_domain, semicircle_rule};
    use std::f64::consts::PI;

    fn dom() -> CompositeDomain {
        make_domain(1.0, 1.5).unwrap()
    }

    #[test]
    fn sizes_and_index_map() {
        let even = BasisSpec::new(Parity::Even, 3, 4);
        let odd = BasisSpec::new(Parity::Odd, 3, 4);
        assert_eq!(even.size(), 13);
        assert_eq!(odd.size(), 12);
        assert_eq!(even.function(1).unwrap(), BasisFunction::Linear);
        assert_eq!(
            even.function(2).unwrap(),
            BasisFunction::Product { n: 1, m: 1 }
        );
        assert_eq!(
            even.function(6).unwrap(),
            BasisFunction::Product { n: 2, m: 1 }
        );
        assert_eq!(
            odd.function(1).unwrap(),
            BasisFunction::Product { n: 1, m: 1 }
        );
        assert_eq!(
            odd.function(12).unwrap(),
            BasisFunction::Product { n: 3, m: 4 }
        );
        for spec in [even, odd] {
            for mu in 1..=spec.size() {
                assert_eq!(spec.index_of(spec.function(mu).unwrap()), Some(mu));
            }
            assert!(matches!(
                spec.function(spec.size() + 1),
                Err(Error::IndexOutOfRange { .. })
            ));
            assert!(spec.function(0).is_err());
        }
    }

    #[test]
    fn closed_form_values() {
        let d = dom();
        let even = BasisSpec::new(Parity::Even, 2, 2);
        assert!((eval_basis(&even, 1, &d, 0.0, 0.5).unwrap() + 0.5).abs() < 1e-15);
        assert!((eval_basis(&even, 1, &d, 0.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
        for mu in 2..=even.size() {
            assert!(eval_basis(&even, mu, &d, 0.0, 1e-9).unwrap().abs() < 1e-8);
        }
        let odd = BasisSpec::new(Parity::Odd, 1, 1);
        // r = √0.5, φ = π/4
        let r = 0.5f64.sqrt();
        let expect = r * (r - 1.0).sin() * (PI / 4.0).sin();
        let v = eval_basis(&odd, 1, &d, -0.5, 0.5).unwrap();
        assert!((v - expect).abs() < 1e-15);
        assert!((v + 0.144_361_7).abs() < 1e-6, "{v}");
        assert!(eval_basis(&odd, 1, &d, 0.0, -0.5).is_err());
    }

    #[test]
    fn vanish_on_arc() {
        let d = dom();
        for spec in [
            BasisSpec::new(Parity::Even, 6, 6),
            BasisSpec::new(Parity::Odd, 6, 6),
        ] {
            let mut buf = vec![0.0; spec.size()];
            for i in 0..1000 {
                let phi = -PI / 2.0 + PI * i as f64 / 999.0;
                spec.values_polar(&d, 1.0, phi, &mut buf);
                assert!(buf.iter().all(|v| v.abs() <= 1e-13));
            }
        }
    }

    #[test]
    fn laplacian_examples() {
        let d = dom();
        let even = BasisSpec::new(Parity::Even, 2, 2);
        assert!((eval_basis_laplacian(&even, 1, &d, 0.0, 0.5).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(
            eval_basis_laplacian(&even, 1, &d, 0.0, 0.0),
            Err(Error::SingularOrigin)
        ));
        // Symbolic: for f = r sin(r-1) sin φ,
        // Δf = sin φ (3 cos(r-1) - r sin(r-1)) + 0
        let odd = BasisSpec::new(Parity::Odd, 1, 1);
        let r = 0.5f64.sqrt();
        let phi = PI / 4.0;
        let expect = phi.sin() * (3.0 * (r - 1.0).cos() - r * (r - 1.0).sin());
        let got = eval_basis_laplacian(&odd, 1, &d, -0.5, 0.5).unwrap();
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let d = dom();
        let h = 1e-4;
        for spec in [
            BasisSpec::new(Parity::Even, 3, 3),
            BasisSpec::new(Parity::Odd, 3, 3),
        ] {
            for &(x, y) in &[(-0.3, 0.4), (0.2, 0.7), (0.55, 0.25)] {
                for mu in 1..=spec.size() {
                    let f = |x, y| eval_basis(&spec, mu, &d, x, y).unwrap();
                    let fd = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h)
                        - 4.0 * f(x, y))
                        / (h * h);
                    let an = eval_basis_laplacian(&spec, mu, &d, x, y).unwrap();
                    assert!(
                        (an - fd).abs() <= 1e-6 * an.abs().max(1.0),
                        "{:?} μ={mu}: {an} vs {fd}",
                        spec.parity
                    );
                }
            }
        }
    }

    #[test]
    fn trace_examples() {
        let d = dom();
        let even = BasisSpec::new(Parity::Even, 2, 3);
        for &x in &[-0.8, -0.1, 0.3, 0.9] {
            assert!((basis_trace(&even, 1, &d, x).unwrap() - (x.abs() - 1.0)).abs() < 1e-15);
            // m odd with β = 1
            for n in 1..=2 {
                for m in [1, 3] {
                    let mu = even.index_of(BasisFunction::Product { n, m }).unwrap();
                    assert!(basis_trace(&even, mu, &d, x).unwrap().abs() < 1e-15);
                }
            }
        }
        let odd = BasisSpec::new(Parity::Odd, 1, 1);
        let v = basis_trace(&odd, 1, &d, 0.5).unwrap();
        assert!((v - 0.5 * 0.5f64.sin()).abs() < 1e-15);
        assert!((v - 0.2397).abs() < 1e-4);
    }

    #[test]
    fn normal_derivative_examples() {
        let d = dom();
        let even = BasisSpec::new(Parity::Even, 3, 3);
        let odd = BasisSpec::new(Parity::Odd, 3, 3);
        assert_eq!(
            basis_normal_derivative_trace(&even, 1, &d, 0.4).unwrap(),
            0.0
        );
        let mut pos = vec![0.0; 10];
        let mut neg = vec![0.0; 10];
        even.normal_derivative_traces(&d, 0.37, &mut pos);
        even.normal_derivative_traces(&d, -0.37, &mut neg);
        assert!(pos.iter().zip(&neg).all(|(a, b)| (a - b).abs() < 1e-15));
        let mut pos = vec![0.0; 9];
        let mut neg = vec![0.0; 9];
        odd.normal_derivative_traces(&d, 0.37, &mut pos);
        odd.normal_derivative_traces(&d, -0.37, &mut neg);
        assert!(pos.iter().zip(&neg).all(|(a, b)| (a + b).abs() < 1e-15));
    }

    #[test]
    fn normal_derivative_matches_one_sided_difference() {
        let d = dom();
        for spec in [
            BasisSpec::new(Parity::Even, 3, 3),
            BasisSpec::new(Parity::Odd, 3, 3),
        ] {
            for &x in &[-0.7, -0.2, 0.15, 0.6] {
                for mu in 1..=spec.size() {
                    let f = |y| eval_basis(&spec, mu, &d, x, y).unwrap();
                    // second-order one-sided difference into the semicircle
                    let h = 1e-5;
                    let dy = (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
                    let fd = -dy;
                    let an = basis_normal_derivative_trace(&spec, mu, &d, x).unwrap();
                    assert!(
                        (an - fd).abs() <= 1e-5 * an.abs().max(1.0),
                        "{:?} μ={mu} x={x}: {an} vs {fd}",
                        spec.parity
                    );
                }
            }
        }
    }

    #[test]
    fn green_identity_on_semicircle() {
        // ⟨φ_μ|Δφ_ν⟩ - ⟨Δφ_μ|φ_ν⟩ = (φ_μ|∇⊥φ_ν) - (∇⊥φ_μ|φ_ν) with the outward
        // normal of the semicircle on the interface being n = (0, -1)
        let d = dom();
        let vol = semicircle_rule(&d, 64, 64);
        let surf = interface_rule(&d, 256);
        for spec in [
            BasisSpec::new(Parity::Even, 4, 4),
            BasisSpec::new(Parity::Odd, 4, 4),
        ] {
            let m = spec.size();
            let mut v = vec![0.0; m];
            let mut l = vec![0.0; m];
            let mut lap = vec![vec![0.0; m]; m];
            for (&(r, phi), &w) in vol.polar.iter().zip(&vol.weights) {
                spec.values_polar(&d, r, phi, &mut v);
                spec.laplacians_polar(&d, r, phi, &mut l);
                for i in 0..m {
                    for j in 0..m {
                        lap[i][j] += w * v[i] * l[j];
                    }
                }
            }
            let mut t = vec![0.0; m];
            let mut g = vec![0.0; m];
            let mut s = vec![vec![0.0; m]; m];
            for (&x, &w) in surf.nodes.iter().zip(&surf.weights) {
                spec.traces(&d, x, &mut t);
                spec.normal_derivative_traces(&d, x, &mut g);
                for i in 0..m {
                    for j in 0..m {
                        s[i][j] += w * t[i] * g[j];
                    }
                }
            }
            for i in 0..m {
                for j in 0..m {
                    let lhs = lap[i][j] - lap[j][i];
                    let rhs = s[i][j] - s[j][i];
                    assert!(
                        (lhs - rhs).abs() < 1e-8,
                        "{:?} ({i},{j}) {lhs} {rhs}",
                        spec.parity
                    );
                }
            }
        }
    }
}
