//! Central finite-difference stencils of orders 4 through 10 on uniform grids.
//!
//! Every stencil is stored exactly as rationals and normalised so that
//!
//! ```text
//! u^(d)(x_i) ≈ (1 / h^d) · Σ_k c_k u_{i+k},   k = -w ..= w
//! ```
//!
//! The tabulated second- and third-derivative formulas of order six and above
//! are customarily printed for `h²/2 · u_xx` and `h³/6 · u_xxx`; those factors
//! are folded into the stored coefficients at construction.

use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest supported half-width (tenth order).
pub const MAX_HALF_WIDTH: usize = 5;

/// Uniform 1-D mesh with `n` nodes on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::config(format!(
                "grid extent [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        if n < 2 * MAX_HALF_WIDTH + 1 {
            return Err(Error::config(format!(
                "grid needs at least {} nodes, got {n}",
                2 * MAX_HALF_WIDTH + 1
            )));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Ok(Self { x_min, x_max, n, h })
    }

    /// Grid with `n` nodes starting at `x_min` and spacing `h`.
    pub fn with_spacing(x_min: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) || n < 2 {
            return Err(Error::config(format!(
                "invalid spacing {h} or node count {n}"
            )));
        }
        Self::new(x_min, x_min + h * (n - 1) as f64, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }
}

/// Formal spatial order of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Order {
    Q4,
    Q6,
    Q8,
    Q10,
}

impl Order {
    pub const ALL: [Order; 4] = [Order::Q4, Order::Q6, Order::Q8, Order::Q10];

    pub fn value(self) -> u32 {
        match self {
            Order::Q4 => 4,
            Order::Q6 => 6,
            Order::Q8 => 8,
            Order::Q10 => 10,
        }
    }

    /// Half-width shared by all three derivative stencils of this order.
    pub fn half_width(self) -> usize {
        match self {
            Order::Q4 => 2,
            Order::Q6 => 3,
            Order::Q8 => 4,
            Order::Q10 => 5,
        }
    }
}

impl TryFrom<u32> for Order {
    type Error = Error;

    fn try_from(q: u32) -> Result<Self> {
        match q {
            4 => Ok(Order::Q4),
            6 => Ok(Order::Q6),
            8 => Ok(Order::Q8),
            10 => Ok(Order::Q10),
            other => Err(Error::config(format!(
                "unsupported scheme order {other}; expected 4, 6, 8 or 10"
            ))),
        }
    }
}

impl From<Order> for u32 {
    fn from(q: Order) -> u32 {
        q.value()
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Ghost-node policy at the two ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Ghost nodes copy the nearest interior value.
    ConstantExtrapolation,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Right half (offsets 1..=w) of an antisymmetric stencil, or the centre and
/// right half of a symmetric one, exactly as tabulated.
fn tabulated(q: Order, d: u32) -> (Vec<Rational64>, Rational64) {
    match (q, d) {
        (Order::Q4, 1) => (vec![r(2, 3), r(-1, 12)], Rational64::zero()),
        (Order::Q4, 2) => (vec![r(4, 3), r(-1, 12)], r(-5, 2)),
        (Order::Q4, 3) => (vec![r(-1, 1), r(1, 2)], Rational64::zero()),
        (Order::Q6, 1) => (vec![r(3, 4), r(-3, 20), r(1, 60)], Rational64::zero()),
        (Order::Q6, 2) => (vec![r(3, 4), r(-3, 40), r(1, 180)], r(-49, 36)),
        (Order::Q6, 3) => (vec![r(-13, 48), r(1, 6), r(-1, 48)], Rational64::zero()),
        (Order::Q8, 1) => (
            vec![r(4, 5), r(-1, 5), r(4, 105), r(-1, 280)],
            Rational64::zero(),
        ),
        (Order::Q8, 2) => (
            vec![r(4, 5), r(-1, 10), r(4, 315), r(-1, 1120)],
            r(-205, 144),
        ),
        (Order::Q8, 3) => (
            vec![r(-61, 180), r(169, 720), r(-1, 20), r(7, 1440)],
            Rational64::zero(),
        ),
        (Order::Q10, 1) => (
            vec![r(5, 6), r(-5, 21), r(5, 84), r(-5, 504), r(1, 1260)],
            Rational64::zero(),
        ),
        (Order::Q10, 2) => (
            vec![r(5, 6), r(-5, 42), r(5, 252), r(-5, 2016), r(1, 6300)],
            r(-5269, 3600),
        ),
        (Order::Q10, 3) => (
            vec![
                r(-1669, 4320),
                r(4369, 15120),
                r(-541, 6720),
                r(1261, 90720),
                r(-41, 36288),
            ],
            Rational64::zero(),
        ),
        _ => unreachable!("derivative checked by caller"),
    }
}

/// Exact coefficients of one central difference formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    order: Order,
    derivative: u32,
    coeffs: Vec<Rational64>,
    weights: Vec<f64>,
}

impl Stencil {
    pub fn new(q: Order, d: u32) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::config(format!(
                "no order-{q} stencil for derivative {d}; expected 1, 2 or 3"
            )));
        }
        let (right, centre) = tabulated(q, d);
        // Orders >= 6 print h²/2 u_xx and h³/6 u_xxx.
        let scale = match (q, d) {
            (Order::Q4, _) | (_, 1) => Rational64::from_integer(1),
            (_, 2) => Rational64::from_integer(2),
            _ => Rational64::from_integer(6),
        };
        let w = right.len();
        let sign = if d % 2 == 1 { -1 } else { 1 };
        let mut coeffs = vec![Rational64::zero(); 2 * w + 1];
        coeffs[w] = centre * scale;
        for (k, c) in right.iter().enumerate() {
            coeffs[w + k + 1] = *c * scale;
            coeffs[w - k - 1] = *c * scale * Rational64::from_integer(sign);
        }
        let weights = coeffs
            .iter()
            .map(|c| c.to_f64().expect("rational fits in f64"))
            .collect();
        Ok(Self {
            order: q,
            derivative: d,
            coeffs,
            weights,
        })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn derivative(&self) -> u32 {
        self.derivative
    }

    pub fn half_width(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    /// Coefficients for offsets `-w..=w`.
    pub fn coeffs(&self) -> &[Rational64] {
        &self.coeffs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest monomial degree the stencil differentiates exactly.
    pub fn exact_degree(&self) -> usize {
        let w = self.half_width();
        if self.derivative % 2 == 0 {
            2 * w + 1
        } else {
            2 * w
        }
    }

    /// `(1/h^d) Σ c_k u_{i+k}` at every node.
    pub fn apply(&self, field: &[f64], grid: &Grid1D, boundary: Boundary) -> Result<Vec<f64>> {
        let mut out = vec![0.0; field.len()];
        let mut scratch = Vec::new();
        self.apply_into(field, grid, boundary, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`Stencil::apply`]; `scratch` is resized as needed.
    pub fn apply_into(
        &self,
        field: &[f64],
        grid: &Grid1D,
        boundary: Boundary,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<()> {
        let n = grid.len();
        if field.len() != n || out.len() != n {
            return Err(Error::config(format!(
                "field length {} does not match grid of {n} nodes",
                field.len()
            )));
        }
        if let Some(i) = field.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                node: i,
                time: None,
                stage: None,
            });
        }
        let w = self.half_width();
        pad(field, w, boundary, scratch);
        let scale = grid.h().powi(self.derivative as i32).recip();
        let wts = &self.weights;
        for (i, o) in out.iter_mut().enumerate() {
            let window = &scratch[i..i + 2 * w + 1];
            let mut acc = 0.0;
            for (c, u) in wts.iter().zip(window) {
                acc += c * u;
            }
            *o = acc * scale;
        }
        Ok(())
    }
}

/// Copies `field` into `buf` with `w` ghost nodes on each side.
pub(crate) fn pad(field: &[f64], w: usize, boundary: Boundary, buf: &mut Vec<f64>) {
    let n = field.len();
    buf.clear();
    buf.reserve(n + 2 * w);
    match boundary {
        Boundary::Periodic => {
            buf.extend_from_slice(&field[n - w..]);
            buf.extend_from_slice(field);
            buf.extend_from_slice(&field[..w]);
        }
        Boundary::ConstantExtrapolation => {
            buf.extend(std::iter::repeat(field[0]).take(w));
            buf.extend_from_slice(field);
            buf.extend(std::iter::repeat(field[n - 1]).take(w));
        }
    }
}

/// Shorthand for [`Stencil::new`].
pub fn make_stencil(q: Order, d: u32) -> Result<Stencil> {
    Stencil::new(q, d)
}

/// Shorthand for [`Stencil::apply`].
pub fn apply_stencil(
    field: &[f64],
    stencil: &Stencil,
    grid: &Grid1D,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    stencil.apply(field, grid, boundary)
}

/// The three derivative stencils of one order.
#[derive(Debug, Clone)]
pub struct StencilSet {
    pub d1: Stencil,
    pub d2: Stencil,
    pub d3: Stencil,
}

impl StencilSet {
    pub fn new(q: Order) -> Self {
        Self {
            d1: Stencil::new(q, 1).expect("d = 1 supported"),
            d2: Stencil::new(q, 2).expect("d = 2 supported"),
            d3: Stencil::new(q, 3).expect("d = 3 supported"),
        }
    }
}

/// Worst polynomial-exactness error of one stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessEntry {
    pub order: Order,
    pub derivative: u32,
    pub max_degree: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub entries: Vec<ExactnessEntry>,
    pub tolerance: f64,
}

impl ExactnessReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExactnessEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

impl fmt::Display for ExactnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stencil exactness (tolerance {:e})", self.tolerance)?;
        for e in &self.entries {
            writeln!(
                f,
                "  q={:>2} d={} degree<={:>2} max_rel_err={:.3e} {}",
                e.order,
                e.derivative,
                e.max_degree,
                e.max_rel_error,
                if e.passed { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Largest relative error of `stencil` applied to `x^m`, `m = 0..=max_degree`,
/// over interior nodes of a small grid away from the origin.
pub fn monomial_error(stencil: &Stencil, max_degree: usize) -> f64 {
    monomial_error_on(
        stencil,
        max_degree,
        &Grid1D::new(0.5, 1.5, 41).expect("valid grid"),
    )
}

/// [`monomial_error`] on a caller-supplied grid.
pub fn monomial_error_on(stencil: &Stencil, max_degree: usize, grid: &Grid1D) -> f64 {
    let grid = grid.clone();
    let w = stencil.half_width();
    let d = stencil.derivative() as i32;
    let xs = grid.nodes();
    let mut worst: f64 = 0.0;
    for m in 0..=max_degree as i32 {
        let field: Vec<f64> = xs.iter().map(|x| x.powi(m)).collect();
        let approx = stencil
            .apply(&field, &grid, Boundary::ConstantExtrapolation)
            .expect("finite field");
        for i in w..grid.len() - w {
            let x = xs[i];
            let exact = if m < d {
                0.0
            } else {
                let falling: f64 = (0..d).map(|j| (m - j) as f64).product();
                falling * x.powi(m - d)
            };
            let err = (approx[i] - exact).abs() / exact.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// Checks polynomial exactness of all twelve `(q, d)` stencils.
pub fn validate_stencils() -> ExactnessReport {
    const TOL: f64 = 1e-9;
    let mut entries = Vec::with_capacity(12);
    for q in Order::ALL {
        for d in 1..=3 {
            let s = Stencil::new(q, d).expect("supported pair");
            let max_degree = s.exact_degree();
            let err = monomial_error(&s, max_degree);
            entries.push(ExactnessEntry {
                order: q,
                derivative: d,
                max_degree,
                max_rel_error: err,
                passed: err <= TOL,
            });
        }
    }
    ExactnessReport {
        entries,
        tolerance: TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(v: &[(i64, i64)]) -> Vec<Rational64> {
        v.iter().map(|&(n, d)| r(n, d)).collect()
    }

    #[test]
    fn fourth_order_first_derivative() {
        let s = make_stencil(Order::Q4, 1).unwrap();
        assert_eq!(
            s.coeffs(),
            rs(&[(1, 12), (-2, 3), (0, 1), (2, 3), (-1, 12)]).as_slice()
        );
    }

    #[test]
    fn fourth_order_third_derivative() {
        let s = make_stencil(Order::Q4, 3).unwrap();
        assert_eq!(
            s.coeffs(),
            rs(&[(-1, 2), (1, 1), (0, 1), (-1, 1), (1, 2)]).as_slice()
        );
    }

    #[test]
    fn sixth_order_third_derivative_is_rescaled() {
        let s = make_stencil(Order::Q6, 3).unwrap();
        let expected: Vec<Rational64> = rs(&[
            (1, 48),
            (-1, 6),
            (13, 48),
            (0, 1),
            (-13, 48),
            (1, 6),
            (-1, 48),
        ])
        .into_iter()
        .map(|c| c * Rational64::from_integer(6))
        .collect();
        assert_eq!(s.coeffs(), expected.as_slice());
        // x³ at x = 0 for any h: Σ c_k (k h)³ / h³ = Σ c_k k³.
        let exact: Rational64 = s
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = j as i64 - 3;
                *c * Rational64::from_integer(k * k * k)
            })
            .sum();
        assert_eq!(exact, Rational64::from_integer(6));
    }

    #[test]
    fn coefficient_sums_and_parity() {
        for q in Order::ALL {
            for d in 1..=3 {
                let s = make_stencil(q, d).unwrap();
                let c = s.coeffs();
                let sum: Rational64 = c.iter().copied().sum();
                assert!(sum.is_zero(), "q={q} d={d}");
                let w = s.half_width();
                assert_eq!(w, q.half_width());
                for k in 1..=w {
                    if d % 2 == 1 {
                        assert_eq!(c[w - k], -c[w + k]);
                    } else {
                        assert_eq!(c[w - k], c[w + k]);
                    }
                }
            }
        }
    }

    #[test]
    fn unsupported_derivative() {
        assert!(matches!(make_stencil(Order::Q6, 4), Err(Error::Config(_))));
        assert!(Order::try_from(5).is_err());
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let g = Grid1D::new(0.0, 1.0, 31).unwrap();
        let u = vec![2.5; 31];
        for q in Order::ALL {
            for d in 1..=3 {
                for b in [Boundary::Periodic, Boundary::ConstantExtrapolation] {
                    let out = apply_stencil(&u, &make_stencil(q, d).unwrap(), &g, b).unwrap();
                    assert!(out.iter().all(|v| v.abs() < 1e-9), "q={q} d={d}");
                }
            }
        }
    }

    #[test]
    fn linear_field_interior() {
        let g = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let u = g.nodes();
        let out = apply_stencil(
            &u,
            &make_stencil(Order::Q4, 1).unwrap(),
            &g,
            Boundary::ConstantExtrapolation,
        )
        .unwrap();
        for v in &out[2..19] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_field_second_derivative() {
        let g = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let out = apply_stencil(
            &u,
            &make_stencil(Order::Q6, 2).unwrap(),
            &g,
            Boundary::ConstantExtrapolation,
        )
        .unwrap();
        for v in &out[3..18] {
            assert!(((v - 2.0) / 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn tenth_order_third_derivative_on_cubic() {
        let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|x| x.powi(3)).collect();
        let out = apply_stencil(
            &u,
            &make_stencil(Order::Q10, 3).unwrap(),
            &g,
            Boundary::ConstantExtrapolation,
        )
        .unwrap();
        for v in &out[5..36] {
            assert!(((v - 6.0) / 6.0).abs() <= 1e-9, "{v}");
        }
    }

    #[test]
    fn all_stencils_exact() {
        let report = validate_stencils();
        assert_eq!(report.entries.len(), 12);
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn one_past_exact_degree_is_not_exact() {
        for q in Order::ALL {
            for d in 1..=3 {
                let s = make_stencil(q, d).unwrap();
                let coarse = Grid1D::new(0.5, 20.5, 21).unwrap();
                assert!(
                    monomial_error_on(&s, s.exact_degree() + 2, &coarse) > 1e-6,
                    "q={q} d={d}"
                );
            }
        }
    }

    #[test]
    fn periodic_first_derivative_telescopes() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let u: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        for q in Order::ALL {
            let out =
                apply_stencil(&u, &make_stencil(q, 1).unwrap(), &g, Boundary::Periodic).unwrap();
            let s: f64 = out.iter().sum();
            assert!(s.abs() < 1e-10, "q={q}: {s}");
        }
    }

    #[test]
    fn non_finite_input_reports_node() {
        let g = Grid1D::new(0.0, 1.0, 20).unwrap();
        let mut u = vec![0.0; 20];
        u[7] = f64::NAN;
        let err = apply_stencil(
            &u,
            &make_stencil(Order::Q4, 1).unwrap(),
            &g,
            Boundary::Periodic,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Blowup { node: 7, .. }));
    }

    #[test]
    fn narrow_grid_rejected() {
        assert!(Grid1D::new(0.0, 1.0, 10).is_err());
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.h(), 0.1);
    }
}
