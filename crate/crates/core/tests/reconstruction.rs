use dtn_helmholtz::basis::eval_basis;
use dtn_helmholtz::geometry::{gauss_legendre, interface_rule};
use dtn_helmholtz::reconstruct::sample_field;
use dtn_helmholtz::solver::iterate_mode;
use dtn_helmholtz::steklov::{project_surface, steklov_mode_field, steklov_trace};
use dtn_helmholtz::{
    make_domain, Assembler, BasisSpec, CompositeDomain, GridSpec, IterationConfig, Method,
    ModeEstimate, Parity, QuadConfig, DEFAULT_TRUNCATION,
};

fn domain() -> CompositeDomain {
    make_domain(1.0, 1.5).unwrap()
}

fn converge(parity: Parity, size: usize, method: Method, kappa0: f64) -> (Assembler, ModeEstimate) {
    let d = domain();
    let spec = BasisSpec::new(parity, size, size);
    let asm = Assembler::new(
        &spec,
        &d,
        QuadConfig::resolving(&spec, &d, DEFAULT_TRUNCATION),
        DEFAULT_TRUNCATION,
    );
    let (est, _) = iterate_mode(&asm, method, kappa0, &IterationConfig::default()).unwrap();
    (asm, est)
}

#[test]
fn projecting_a_steklov_trace_gives_a_unit_vector() {
    let d = domain();
    let rule = interface_rule(&d, 128);
    let samples: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&x| steklov_trace(1, &d, x))
        .collect();
    let c = project_surface(&samples, 40, &d, &rule);
    assert!((c[0] - 1.0).abs() < 1e-12);
    assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn normalised_mode_has_unit_norm_by_direct_quadrature() {
    let d = domain();
    let (asm, est) = converge(Parity::Even, 5, Method::Dtn, 2.0116);
    let est = est.normalized(&asm).unwrap();

    let radial = gauss_legendre(60, 0.0, d.a).unwrap();
    let angular = gauss_legendre(
        60,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
    )
    .unwrap();
    let mut semicircle = 0.0;
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        for (&phi, &wp) in angular.nodes.iter().zip(&angular.weights) {
            let (x, y) = (-r * phi.sin(), r * phi.cos());
            let psi: f64 = est
                .gamma1_coeffs
                .iter()
                .enumerate()
                .map(|(mu, a)| a * eval_basis(&asm.spec, mu + 1, &d, x, y).unwrap())
                .sum();
            semicircle += wr * wp * r * psi * psi;
        }
    }

    // Few modes carry the weight; the tail of c_n is below 1e-6 in norm.
    let modes = 40;
    let xs = gauss_legendre(120, -d.a, d.a).unwrap();
    let ys = gauss_legendre(120, -d.b, 0.0).unwrap();
    let mut rectangle = 0.0;
    for (&x, &wx) in xs.nodes.iter().zip(&xs.weights) {
        for (&y, &wy) in ys.nodes.iter().zip(&ys.weights) {
            let psi: f64 = est.gamma2_coeffs[..modes]
                .iter()
                .enumerate()
                .map(|(n, c)| c * steklov_mode_field(est.kappa, n + 1, &d, x, y).unwrap())
                .sum();
            rectangle += wx * wy * psi * psi;
        }
    }
    let total = semicircle + rectangle;
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn interface_mismatch_shrinks_with_basis() {
    let defects: Vec<(f64, f64)> = [5, 15]
        .iter()
        .map(|&size| {
            let (asm, est) = converge(Parity::Even, size, Method::Ntd, 2.0116);
            let est = est.normalized(&asm).unwrap();
            est.interface_mismatch(&asm).unwrap()
        })
        .collect();
    // NtD matches normal derivatives; values carry the error.
    assert!(defects[0].1 < 1e-10 && defects[1].1 < 1e-10);
    assert!(defects[1].0 < defects[0].0, "{defects:?}");

    let (asm, est) = converge(Parity::Even, 5, Method::Dtn, 2.0116);
    let (value, normal) = est
        .normalized(&asm)
        .unwrap()
        .interface_mismatch(&asm)
        .unwrap();
    assert!(value < 1e-12);
    assert!(normal > 0.0);
}

#[test]
fn density_vanishes_towards_the_outer_boundary() {
    let d = domain();
    let (asm, est) = converge(Parity::Even, 5, Method::Dtn, 2.0116);
    // Largest density on the row next to the bottom edge y = -b.
    let near_edge: Vec<f64> = [(21, 36), (41, 71), (81, 141)]
        .iter()
        .map(|&(nx, ny)| {
            let grid = sample_field(&est, &asm.spec, &d, GridSpec { nx, ny }).unwrap();
            (0..nx).map(|i| grid.value(i, 1)).fold(0.0, f64::max)
        })
        .collect();
    assert!(
        near_edge[1] < 0.3 * near_edge[0] && near_edge[2] < 0.3 * near_edge[1],
        "{near_edge:?}"
    );
}

#[test]
fn field_symmetry_follows_parity() {
    let d = domain();
    let grid = GridSpec { nx: 41, ny: 71 };
    for (parity, kappa0) in [(Parity::Even, 2.0116), (Parity::Odd, 3.3836)] {
        let (asm, est) = converge(parity, 5, Method::Dtn, kappa0);
        let field = sample_field(&est, &asm.spec, &d, grid).unwrap();
        let max = field.max();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let mirrored = field.value(grid.nx - 1 - i, j);
                assert!((field.value(i, j) - mirrored).abs() <= 1e-10 * max);
                assert!(field.value(i, j) >= 0.0);
            }
            if parity == Parity::Odd {
                assert!(field.value(grid.nx / 2, j) <= 1e-10 * max);
            }
        }
    }
}
