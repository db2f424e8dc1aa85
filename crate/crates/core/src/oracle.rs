//! Finite-difference reference eigensolver on a masked uniform grid.
//!
//! Five-point Laplacian, Dirichlet data by stair-step masking, lowest
//! eigenpairs by block inverse iteration with Rayleigh-Ritz. Linear solves
//! use SSOR-preconditioned conjugate gradients.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::Parity;
use crate::error::{Error, Result};
use crate::geometry::{classify_point, CompositeDomain, Region};
use crate::solver::solve_pencil;

const NONE: u32 = u32::MAX;
/// Relative residual for the inner linear solves.
pub const CG_TOLERANCE: f64 = 1e-10;
/// Relative eigen-residual `‖Au − θu‖/θ` at which a pair is accepted.
pub const EIGEN_TOLERANCE: f64 = 1e-6;
const MAX_OUTER: usize = 400;
const GUARD_VECTORS: usize = 4;
const MIN_POINTS_ACROSS: f64 = 10.0;
/// Relative max-norm defect for classifying a field as even or odd.
pub const PARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FdmShape {
    Composite {
        a: f64,
        b: f64,
    },
    /// `[0, width] × [0, height]`
    Rectangle {
        width: f64,
        height: f64,
    },
}

impl FdmShape {
    pub fn composite(domain: &CompositeDomain) -> Self {
        FdmShape::Composite {
            a: domain.a,
            b: domain.b,
        }
    }

    fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        match *self {
            FdmShape::Composite { a, b } => ((-a, a), (-b, a)),
            FdmShape::Rectangle { width, height } => ((0.0, width), (0.0, height)),
        }
    }

    fn min_extent(&self) -> f64 {
        match *self {
            FdmShape::Composite { a, b } => a.min(b),
            FdmShape::Rectangle { width, height } => width.min(height),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            FdmShape::Composite { a, b } => {
                let domain = CompositeDomain { a, b };
                !matches!(classify_point(&domain, x, y), Region::Outside)
            }
            FdmShape::Rectangle { width, height } => x > 0.0 && x < width && y > 0.0 && y < height,
        }
    }
}

/// Masked grid: nodes `(x0 + i h, y0 + j h)`, unknowns numbered row by row.
#[derive(Debug, Clone)]
pub struct FdmProblem {
    pub shape: FdmShape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    /// Unknown index per grid node, `None` outside.
    pub index: Vec<Option<usize>>,
    /// Grid node `(i, j)` of each unknown.
    pub nodes: Vec<(usize, usize)>,
    /// `[left, right, down, up]` neighbour unknowns.
    neighbours: Vec<[u32; 4]>,
}

impl FdmProblem {
    pub fn new(shape: FdmShape, h: f64) -> Result<Self> {
        if h.is_nan() || h <= 0.0 || shape.min_extent() / h < MIN_POINTS_ACROSS {
            return Err(Error::GridTooCoarse { h });
        }
        let ((x0, x1), (y0, y1)) = shape.bounding_box();
        let cells = |len: f64| -> Result<usize> {
            let n = len / h;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "grid spacing {h} does not divide extent {len}"
                )));
            }
            Ok(n.round() as usize)
        };
        let nx = cells(x1 - x0)? + 1;
        let ny = cells(y1 - y0)? + 1;

        let mut index = vec![None; nx * ny];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (x0 + i as f64 * h, y0 + j as f64 * h);
                if shape.contains(x, y) {
                    index[j * nx + i] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        let lookup = |i: isize, j: isize| -> u32 {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                return NONE;
            }
            index[j as usize * nx + i as usize].map_or(NONE, |k| k as u32)
        };
        let neighbours = nodes
            .iter()
            .map(|&(i, j)| {
                let (i, j) = (i as isize, j as isize);
                [
                    lookup(i - 1, j),
                    lookup(i + 1, j),
                    lookup(i, j - 1),
                    lookup(i, j + 1),
                ]
            })
            .collect();
        Ok(Self {
            shape,
            h,
            nx,
            ny,
            origin: (x0, y0),
            index,
            nodes,
            neighbours,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.h
    }

    /// `out = h² (−Δ_h) u`
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (k, nb) in self.neighbours.iter().enumerate() {
            let mut acc = 4.0 * u[k];
            for &n in nb {
                if n != NONE {
                    acc -= u[n as usize];
                }
            }
            out[k] = acc;
        }
    }

    /// `z = M⁻¹ r` for the SSOR splitting of `h² (−Δ_h)`.
    fn precondition(&self, omega: f64, r: &[f64], z: &mut [f64]) {
        let d = 4.0 / omega;
        // forward sweep: (D/ω + L) y = r
        for k in 0..z.len() {
            let nb = &self.neighbours[k];
            let mut acc = r[k];
            for &n in &nb[..] {
                if n != NONE && (n as usize) < k {
                    acc += z[n as usize];
                }
            }
            z[k] = acc / d;
        }
        let scale = 4.0 * (2.0 - omega) / omega;
        for v in z.iter_mut() {
            *v *= scale;
        }
        // backward sweep: (D/ω + U) z = (D/ω) y (2 − ω)/ω
        for k in (0..z.len()).rev() {
            let nb = &self.neighbours[k];
            let mut acc = z[k];
            for &n in &nb[..] {
                if n != NONE && (n as usize) > k {
                    acc += z[n as usize];
                }
            }
            z[k] = acc / d;
        }
    }

    fn omega(&self) -> f64 {
        let n = self.nx.max(self.ny) as f64;
        2.0 / (1.0 + (std::f64::consts::PI / n).sin())
    }

    /// Solve `h²(−Δ_h) u = f` starting from `u`. Returns the iteration count.
    fn solve(&self, f: &[f64], u: &mut [f64]) -> Result<usize> {
        let n = f.len();
        let omega = self.omega();
        let f_norm = norm(f);
        if f_norm == 0.0 {
            u.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let mut r = vec![0.0; n];
        self.apply(u, &mut r);
        for k in 0..n {
            r[k] = f[k] - r[k];
        }
        let mut z = vec![0.0; n];
        self.precondition(omega, &r, &mut z);
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let max_iter = 20 * n.max(100);
        for it in 0..max_iter {
            if norm(&r) <= CG_TOLERANCE * f_norm {
                return Ok(it);
            }
            self.apply(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for k in 0..n {
                u[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            self.precondition(omega, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::IterationStalled {
            iterations: max_iter,
        })
    }

    /// Scatter unknowns onto the full `nx × ny` grid, zero outside.
    pub fn to_grid(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for (k, &(i, j)) in self.nodes.iter().enumerate() {
            out[j * self.nx + i] = u[k];
        }
        out
    }

    /// Bilinear interpolation of a field on the grid with spacing `2h`.
    fn prolong(&self, coarse: &FdmProblem, u: &[f64]) -> Vec<f64> {
        let value = |i: usize, j: usize| -> f64 {
            if i >= coarse.nx || j >= coarse.ny {
                return 0.0;
            }
            coarse.index[j * coarse.nx + i].map_or(0.0, |k| u[k])
        };
        self.nodes
            .iter()
            .map(|&(i, j)| {
                let (ci, cj) = (i / 2, j / 2);
                match (i % 2, j % 2) {
                    (0, 0) => value(ci, cj),
                    (1, 0) => 0.5 * (value(ci, cj) + value(ci + 1, cj)),
                    (0, 1) => 0.5 * (value(ci, cj) + value(ci, cj + 1)),
                    _ => {
                        0.25 * (value(ci, cj)
                            + value(ci + 1, cj)
                            + value(ci, cj + 1)
                            + value(ci + 1, cj + 1))
                    }
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdmMode {
    pub k: f64,
    /// Unknown values, unit Euclidean norm.
    pub field: Vec<f64>,
}

/// Lowest `num_modes` eigenpairs of `−Δ_h`.
pub fn fdm_eigen(problem: &FdmProblem, num_modes: usize) -> Result<Vec<FdmMode>> {
    let block = num_modes + GUARD_VECTORS;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            (0..problem.unknowns())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let mut modes = block_inverse_iteration(problem, start, num_modes)?;
    modes.truncate(num_modes);
    Ok(modes)
}

fn block_inverse_iteration(
    problem: &FdmProblem,
    start: Vec<Vec<f64>>,
    num_modes: usize,
) -> Result<Vec<FdmMode>> {
    let n = problem.unknowns();
    let p = start.len();
    if num_modes == 0 || p > n {
        return Err(Error::InvalidConfig(format!(
            "cannot extract {num_modes} modes from {n} unknowns"
        )));
    }
    let mut x = start;
    let mut scratch = vec![0.0; n];
    let mut theta: Vec<Option<f64>> = x
        .iter()
        .map(|xi| {
            problem.apply(xi, &mut scratch);
            let q = dot(xi, &scratch) / dot(xi, xi);
            (q > 0.0 && q.is_finite()).then_some(q)
        })
        .collect();
    for _ in 0..MAX_OUTER {
        // y_i = A⁻¹ x_i, warm-started at x_i / θ_i
        let mut y = Vec::with_capacity(p);
        for (xi, ti) in x.iter().zip(&theta) {
            let mut yi: Vec<f64> = match ti {
                Some(t) => xi.iter().map(|v| v / t).collect(),
                None => vec![0.0; n],
            };
            problem.solve(xi, &mut yi)?;
            y.push(yi);
        }
        // Rayleigh-Ritz on span(y)
        let mut ay = Vec::with_capacity(p);
        for yi in &y {
            problem.apply(yi, &mut scratch);
            ay.push(scratch.clone());
        }
        let gram = DMatrix::from_fn(p, p, |i, j| dot(&y[i], &y[j]));
        let stiff = DMatrix::from_fn(p, p, |i, j| dot(&y[i], &ay[j]));
        let stiff = (&stiff + stiff.transpose()) * 0.5;
        let ritz = solve_pencil(&stiff, &gram)?;
        if ritz.len() < num_modes {
            return Err(Error::IterationStalled { iterations: 0 });
        }
        let cols = ritz.len();
        let mut new_x = vec![vec![0.0; n]; cols];
        let mut new_ax = vec![vec![0.0; n]; cols];
        for c in 0..cols {
            for (i, (yi, ayi)) in y.iter().zip(&ay).enumerate() {
                let w = ritz.vectors[(i, c)];
                if w != 0.0 {
                    for k in 0..n {
                        new_x[c][k] += w * yi[k];
                        new_ax[c][k] += w * ayi[k];
                    }
                }
            }
        }
        let converged = (0..num_modes).all(|c| {
            let t = ritz.values[c];
            let res: f64 = new_ax[c]
                .iter()
                .zip(&new_x[c])
                .map(|(a, v)| (a - t * v).powi(2))
                .sum::<f64>()
                .sqrt();
            res <= EIGEN_TOLERANCE * t * norm(&new_x[c])
        });
        theta = ritz.values.iter().map(|&t| Some(t)).collect();
        x = new_x;
        if converged {
            let scale = 1.0 / (problem.h * problem.h);
            // guard vectors are returned too; they seed the next level
            return Ok((0..cols)
                .map(|c| {
                    let nrm = norm(&x[c]);
                    FdmMode {
                        k: (ritz.values[c] * scale).sqrt(),
                        field: x[c].iter().map(|v| v / nrm).collect(),
                    }
                })
                .collect());
        }
    }
    Err(Error::IterationStalled {
        iterations: MAX_OUTER,
    })
}

/// Oracle result for one shape: eigenvalues at `h` and `h/2` and their
/// Richardson combination `(4 k_{h/2} − k_h)/3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub h: f64,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub extrapolated: Vec<f64>,
}

/// Solve at `h` and `h/2`, then combine.
///
/// The grid at `h` is reached through a cascade of halvings from the
/// coarsest admissible spacing; each level starts from the prolonged
/// eigenvectors of the previous one. Also returns the `h/2` problem and
/// its modes.
pub fn fdm_richardson(
    shape: FdmShape,
    h: f64,
    num_modes: usize,
) -> Result<(OracleResult, FdmProblem, Vec<FdmMode>)> {
    let block = num_modes + GUARD_VECTORS;
    let mut levels = vec![h];
    while shape.min_extent() / (2.0 * levels[levels.len() - 1]) >= 2.0 * MIN_POINTS_ACROSS {
        let next = 2.0 * levels[levels.len() - 1];
        levels.push(next);
    }
    levels.reverse();

    let mut problem = FdmProblem::new(shape, levels[0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = (0..block)
        .map(|_| {
            (0..problem.unknowns())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let mut modes = block_inverse_iteration(&problem, start, num_modes)?;
    let mut coarse_k = Vec::new();
    for &spacing in levels[1..].iter().chain(std::iter::once(&(h / 2.0))) {
        if spacing == h / 2.0 {
            coarse_k = modes[..num_modes].iter().map(|m| m.k).collect();
        }
        let next = FdmProblem::new(shape, spacing)?;
        let start = modes
            .iter()
            .map(|m| next.prolong(&problem, &m.field))
            .collect();
        modes = block_inverse_iteration(&next, start, num_modes)?;
        problem = next;
    }
    if coarse_k.is_empty() {
        coarse_k = modes[..num_modes].iter().map(|m| m.k).collect();
    }
    modes.truncate(num_modes);
    let fine_k: Vec<f64> = modes.iter().map(|m| m.k).collect();
    let extrapolated = coarse_k
        .iter()
        .zip(&fine_k)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect();
    Ok((
        OracleResult {
            h,
            coarse: coarse_k,
            fine: fine_k,
            extrapolated,
        },
        problem,
        modes,
    ))
}

/// Parity of a composite-domain field under `x → −x`: `Some(true)` even,
/// `Some(false)` odd, `None` if neither within `tol` (relative max norm).
pub fn field_parity(problem: &FdmProblem, field: &[f64], tol: f64) -> Option<bool> {
    let grid = problem.to_grid(field);
    let max = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut even = 0.0f64;
    let mut odd = 0.0f64;
    for j in 0..problem.ny {
        for i in 0..problem.nx {
            let v = grid[j * problem.nx + i];
            let w = grid[j * problem.nx + (problem.nx - 1 - i)];
            even = even.max((v - w).abs());
            odd = odd.max((v + w).abs());
        }
    }
    if even <= tol * max {
        Some(true)
    } else if odd <= tol * max {
        Some(false)
    } else {
        None
    }
}

/// Oracle modes of the composite domain labelled by parity and order
/// within their class: `(parity, order, k_extrapolated)`. Modes whose
/// symmetry cannot be classified are skipped.
pub fn label_modes(
    result: &OracleResult,
    problem: &FdmProblem,
    modes: &[FdmMode],
) -> Vec<(Parity, usize, f64)> {
    let mut counts = [0usize; 2];
    let mut out = Vec::new();
    for (mode, &k) in modes.iter().zip(&result.extrapolated) {
        let parity = match field_parity(problem, &mode.field, PARITY_TOLERANCE) {
            Some(true) => Parity::Even,
            Some(false) => Parity::Odd,
            None => continue,
        };
        let slot = &mut counts[(parity == Parity::Odd) as usize];
        *slot += 1;
        out.push((parity, *slot, k));
    }
    out
}
