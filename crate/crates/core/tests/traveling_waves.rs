//! Exact traveling waves of the cubic model as solver oracles.
//!
//! With `u' = K (u - a)(u - b)` the profile is a tanh front, and substituting
//! into the integrated traveling-wave equation
//! `-s (u - a) + u^3 - a^3 = eps u' + alpha eps^2 u''`
//! fixes `K = 1 / (eps sqrt(2 alpha))` and `a + b = sqrt(2 / alpha) / 3`.
//! Without capillarity the viscous front from 1 to 0 solves
//! `eps u' = u^3 - u`, so `u = 1 / sqrt(1 + exp(2 xi / eps))`.

use kinetic_core::{
    integrate, shock_speed_rh, Boundary, ButcherTableau, CubicModel, CubicScheme, Flux, Grid1D,
    Order, RunConfig,
};

fn viscous_front(xi: f64, eps: f64) -> f64 {
    1.0 / (1.0 + (2.0 * xi / eps).exp()).sqrt()
}

fn kinetic_front(xi: f64, a: f64, alpha: f64, eps: f64) -> f64 {
    let b = -a + (2.0 / alpha).sqrt() / 3.0;
    let k = 1.0 / (eps * (2.0 * alpha).sqrt());
    let (m, d) = (0.5 * (a + b), 0.5 * (a - b));
    m - d * (k * d * xi).tanh()
}

/// Max nodal error after advecting `exact` with speed `s` to time `t`.
fn run_error(
    n: usize,
    q: Order,
    eps: f64,
    alpha: f64,
    s: f64,
    t: f64,
    exact: &dyn Fn(f64) -> f64,
) -> f64 {
    let grid = Grid1D::new(-3.0, 3.0, n).unwrap();
    let scheme = CubicScheme::new(
        CubicModel::new(eps, alpha).unwrap(),
        q,
        grid,
        Boundary::ConstantExtrapolation,
    );
    let x0 = -1.0;
    let u0: Vec<f64> = grid.nodes().iter().map(|&x| exact(x - x0)).collect();
    let run = RunConfig {
        cfl: 0.5,
        t_end: t,
        dt_override: None,
        output_times: Vec::new(),
    };
    let traj = integrate(&scheme, &u0, &ButcherTableau::rk4(), &run).unwrap();
    let last = traj.last();
    grid.nodes()
        .iter()
        .zip(&last.state)
        .map(|(&x, &u)| (u - exact(x - x0 - s * last.t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn viscous_front_converges_at_design_order() {
    let eps = 0.1;
    let s = shock_speed_rh(1.0, 0.0, Flux::Cubic).unwrap();
    assert_eq!(s, 1.0);
    let exact = |xi: f64| viscous_front(xi, eps);
    for (q, min_rate) in [(Order::Q4, 3.5), (Order::Q6, 5.2)] {
        let coarse = run_error(241, q, eps, 0.0, s, 1.0, &exact);
        let fine = run_error(481, q, eps, 0.0, s, 1.0, &exact);
        let rate = (coarse / fine).log2();
        assert!(
            rate >= min_rate,
            "q = {q}: errors {coarse:.3e} -> {fine:.3e}, rate {rate:.2}"
        );
    }
}

#[test]
fn kinetic_front_travels_undistorted() {
    let (a, alpha, eps): (f64, f64, f64) = (1.0, 1.0, 0.1);
    let b = -a + (2.0 / alpha).sqrt() / 3.0;
    let s = shock_speed_rh(a, b, Flux::Cubic).unwrap();
    let exact = |xi: f64| kinetic_front(xi, a, alpha, eps);
    let coarse = run_error(481, Order::Q6, eps, alpha, s, 0.5, &exact);
    let fine = run_error(961, Order::Q6, eps, alpha, s, 0.5, &exact);
    assert!(fine < 1e-5, "error {fine:.3e}");
    // The seven-point third-derivative stencil is only fourth-order accurate,
    // so the capillary term caps the rate at 4 even for q = 6.
    assert!(
        (coarse / fine).log2() > 3.7,
        "errors {coarse:.3e} -> {fine:.3e}"
    );
}
