//! Composite domain (semicircle on top of a rectangle), coordinate
//! conventions and the quadrature rules used for volume and interface
//! integrals.
//!
//! Coordinates: the semicircle `Γ_I` is `x² + y² < a², y > 0`, the rectangle
//! `Γ_II` is `-a < x < a, -b < y < 0` and the interface `S` is the segment
//! `y = 0, |x| < a`. The interface normal points from `Γ_I` into `Γ_II`,
//! i.e. `n = (0, -1)`.
//!
//! Polar angle `φ` is measured from the positive y-axis, positive for
//! `x < 0`: `x = -r sin φ`, `y = r cos φ`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when deciding whether a point sits on the interface.
pub const INTERFACE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeDomain {
    /// Semicircle radius; the rectangle has width `2a`.
    pub a: f64,
    /// Rectangle depth.
    pub b: f64,
}

/// Region label returned by [`classify_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Semicircle,
    Rectangle,
    Interface,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Tensor Gauss-Legendre rule in polar coordinates over the semicircle.
///
/// Weights already contain the Jacobian `r`. The polar coordinates of each
/// point are kept alongside the Cartesian ones since the trial functions are
/// naturally evaluated in `(r, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule2D {
    pub points: Vec<(f64, f64)>,
    pub polar: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl QuadratureRule2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(x, y), &w)| w * f(x, y))
            .sum()
    }
}

pub fn make_domain(a: f64, b: f64) -> Result<CompositeDomain> {
    CompositeDomain::new(a, b)
}

impl CompositeDomain {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        // NaN fails the comparison as well
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::NonPositiveGeometry { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn interface_length(&self) -> f64 {
        2.0 * self.a
    }

    pub fn semicircle_area(&self) -> f64 {
        FRAC_PI_2 * self.a * self.a
    }

    pub fn rectangle_area(&self) -> f64 {
        2.0 * self.a * self.b
    }

    pub fn area(&self) -> f64 {
        self.semicircle_area() + self.rectangle_area()
    }

    /// Bounding box `[x_lo, x_hi] × [y_lo, y_hi]` of the whole domain.
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        ((-self.a, self.a), (-self.b, self.a))
    }
}

impl Default for CompositeDomain {
    fn default() -> Self {
        Self { a: 1.0, b: 1.5 }
    }
}

/// Gauss-Legendre nodes and weights on `(lo, hi)`, exact for polynomials of
/// degree `2·order - 1`.
pub fn gauss_legendre(order: usize, lo: f64, hi: f64) -> Result<QuadratureRule1D> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let order = order.max(1);
    let (ref_nodes, ref_weights) = legendre_nodes(order);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(QuadratureRule1D {
        nodes: ref_nodes.iter().map(|t| mid + half * t).collect(),
        weights: ref_weights.iter().map(|w| half * w).collect(),
        interval: (lo, hi),
    })
}

/// Reference nodes (ascending) and weights on `(-1, 1)` by Newton iteration
/// on the three-term recurrence.
fn legendre_nodes(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule over consecutive panels `breaks[i]..breaks[i+1]`.
pub fn composite_gauss_legendre(per_panel: usize, breaks: &[f64]) -> Result<QuadratureRule1D> {
    let mut nodes = Vec::with_capacity(per_panel * breaks.len());
    let mut weights = Vec::with_capacity(per_panel * breaks.len());
    for w in breaks.windows(2) {
        let panel = gauss_legendre(per_panel, w[0], w[1])?;
        nodes.extend(panel.nodes);
        weights.extend(panel.weights);
    }
    let (lo, hi) = match (breaks.first(), breaks.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
        _ => {
            return Err(Error::InvalidInterval {
                lo: breaks.first().copied().unwrap_or(f64::NAN),
                hi: breaks.last().copied().unwrap_or(f64::NAN),
            })
        }
    };
    Ok(QuadratureRule1D {
        nodes,
        weights,
        interval: (lo, hi),
    })
}

/// Tensor rule over the semicircle, `n_r` radial by `n_phi` angular nodes.
pub fn semicircle_rule(domain: &CompositeDomain, n_r: usize, n_phi: usize) -> QuadratureRule2D {
    let radial = gauss_legendre(n_r, 0.0, domain.a).expect("a > 0");
    let angular = gauss_legendre(n_phi, -FRAC_PI_2, FRAC_PI_2).expect("non-empty interval");
    let size = radial.len() * angular.len();
    let mut points = Vec::with_capacity(size);
    let mut polar = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        for (&phi, &wp) in angular.nodes.iter().zip(&angular.weights) {
            points.push((-r * phi.sin(), r * phi.cos()));
            polar.push((r, phi));
            weights.push(wr * wp * r);
        }
    }
    QuadratureRule2D {
        points,
        polar,
        weights,
    }
}

/// Gauss-Legendre rule on the interface `-a < x < a`.
///
/// The rule is composite with a single break at `x = 0` and `n_s` nodes on
/// each half: traces of the semicircle trial functions contain `|x|` and
/// are only piecewise smooth.
pub fn interface_rule(domain: &CompositeDomain, n_s: usize) -> QuadratureRule1D {
    composite_gauss_legendre(n_s.max(1), &[-domain.a, 0.0, domain.a]).expect("a > 0")
}

pub fn classify_point(domain: &CompositeDomain, x: f64, y: f64) -> Region {
    let a = domain.a;
    if y.abs() <= INTERFACE_TOLERANCE && x.abs() < a {
        Region::Interface
    } else if y > 0.0 && x * x + y * y < a * a {
        Region::Semicircle
    } else if y < 0.0 && y > -domain.b && x.abs() < a {
        Region::Rectangle
    } else {
        Region::Outside
    }
}

/// Polar coordinates `(r, φ)` of a point in the closure of the semicircle.
pub fn cartesian_to_polar(domain: &CompositeDomain, x: f64, y: f64) -> Result<(f64, f64)> {
    let r = x.hypot(y);
    if y < -INTERFACE_TOLERANCE || r > domain.a * (1.0 + 1e-12) + INTERFACE_TOLERANCE {
        return Err(Error::OutsideSubdomain { x, y });
    }
    Ok((r, polar_angle(x, y.max(0.0))))
}

/// Angle from the positive y-axis, positive for `x < 0`.
#[inline]
pub(crate) fn polar_angle(x: f64, y: f64) -> f64 {
    (-x).atan2(y)
}
