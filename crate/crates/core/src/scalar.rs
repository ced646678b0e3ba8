//! Semi-discrete right-hand sides for the scalar models: cubic flux with
//! linear viscosity and capillarity, the thin liquid film, and the
//! generalised Camassa-Holm equation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::HelmholtzSolver;
use crate::integrate::SemiDiscrete;
use crate::stencil::{pad, Boundary, Grid1D, Order, StencilSet};

/// Scalar flux functions with a single inflection point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flux {
    /// `f(u) = u³`, concave-convex.
    Cubic,
    /// `f(u) = u² - u³`, convex-concave.
    ThinFilm,
}

impl Flux {
    #[inline]
    pub fn f(self, u: f64) -> f64 {
        match self {
            Flux::Cubic => u * u * u,
            Flux::ThinFilm => u * u - u * u * u,
        }
    }

    #[inline]
    pub fn df(self, u: f64) -> f64 {
        match self {
            Flux::Cubic => 3.0 * u * u,
            Flux::ThinFilm => 2.0 * u - 3.0 * u * u,
        }
    }

    #[inline]
    pub fn d2f(self, u: f64) -> f64 {
        match self {
            Flux::Cubic => 6.0 * u,
            Flux::ThinFilm => 2.0 - 6.0 * u,
        }
    }

    pub fn inflection(self) -> f64 {
        match self {
            Flux::Cubic => 0.0,
            Flux::ThinFilm => 1.0 / 3.0,
        }
    }

    /// The root of `f'(v) = speed` closest to `near`, if any.
    pub fn characteristic_state(self, speed: f64, near: f64) -> Option<f64> {
        // f'(v) = a v² + b v
        let (a, b) = match self {
            Flux::Cubic => (3.0, 0.0),
            Flux::ThinFilm => (-3.0, 2.0),
        };
        let disc = b * b + 4.0 * a * speed;
        if disc < 0.0 {
            return None;
        }
        let r = disc.sqrt();
        let (v1, v2) = ((-b + r) / (2.0 * a), (-b - r) / (2.0 * a));
        Some(if (v1 - near).abs() <= (v2 - near).abs() {
            v1
        } else {
            v2
        })
    }

    /// The state on the other side of the inflection point whose chord to `u`
    /// is tangent to the flux there. Both fluxes are cubic, so this is the
    /// reflection `(3c - u) / 2` about the inflection point `c`.
    pub fn tangent(self, u: f64) -> f64 {
        0.5 * (3.0 * self.inflection() - u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicModel {
    pub eps: f64,
    pub alpha: f64,
}

impl CubicModel {
    pub fn new(eps: f64, alpha: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        if !alpha.is_finite() {
            return Err(Error::config(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { eps, alpha })
    }
}

/// Thin film in conservative form with `ε = δ` and `α ε² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinFilmModel {
    pub delta: f64,
    pub u_floor: f64,
}

impl ThinFilmModel {
    pub const DEFAULT_FLOOR: f64 = 1e-6;

    pub fn new(delta: f64) -> Result<Self> {
        Self::with_floor(delta, Self::DEFAULT_FLOOR)
    }

    pub fn with_floor(delta: f64, u_floor: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(u_floor > 0.0 && u_floor < 1e-2) {
            return Err(Error::config(format!(
                "positivity floor {u_floor} outside (0, 0.01)"
            )));
        }
        Ok(Self { delta, u_floor })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CamassaHolmModel {
    pub eps: f64,
    pub alpha: f64,
}

impl CamassaHolmModel {
    pub fn new(eps: f64, alpha: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be non-negative, got {alpha}"
            )));
        }
        Ok(Self { eps, alpha })
    }
}

fn check_finite(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::Blowup {
            node,
            time: None,
            stage: None,
        }),
        None => Ok(()),
    }
}

fn check_len(u: &[f64], grid: &Grid1D) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::config(format!(
            "state has {} values for a grid of {} nodes",
            u.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `u_t = -D₁[u³] + ε D₂[u] + α ε² D₃[u]`.
#[derive(Debug, Clone)]
pub struct CubicScheme {
    pub model: CubicModel,
    pub order: Order,
    pub grid: Grid1D,
    pub boundary: Boundary,
    st: StencilSet,
}

impl CubicScheme {
    pub fn new(model: CubicModel, order: Order, grid: Grid1D, boundary: Boundary) -> Self {
        Self {
            model,
            order,
            grid,
            boundary,
            st: StencilSet::new(order),
        }
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(u, &self.grid)?;
        check_finite(u)?;
        let w = self.order.half_width();
        let mut up = Vec::with_capacity(u.len() + 2 * w);
        pad(u, w, self.boundary, &mut up);
        let fp: Vec<f64> = up.iter().map(|&v| Flux::Cubic.f(v)).collect();
        let h = self.grid.h();
        let c1 = -1.0 / h;
        let c2 = self.model.eps / (h * h);
        let c3 = self.model.alpha * self.model.eps * self.model.eps / (h * h * h);
        let (w1, w2, w3) = (
            self.st.d1.weights(),
            self.st.d2.weights(),
            self.st.d3.weights(),
        );
        for (i, o) in out.iter_mut().enumerate() {
            let uw = &up[i..i + 2 * w + 1];
            let fw = &fp[i..i + 2 * w + 1];
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..2 * w + 1 {
                a += w1[k] * fw[k];
                b += w2[k] * uw[k];
                c += w3[k] * uw[k];
            }
            *o = c1 * a + c2 * b + c3 * c;
        }
        check_finite(out)
    }

    pub fn max_wave_speed(&self, u: &[f64]) -> f64 {
        u.iter()
            .map(|&v| Flux::Cubic.df(v).abs())
            .fold(0.0, f64::max)
    }
}

impl SemiDiscrete for CubicScheme {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(state, out)
    }

    fn stable_dt(&self, state: &[f64], cfl: f64) -> f64 {
        compute_dt_bounds(
            self.grid.h(),
            self.max_wave_speed(state),
            self.model.eps,
            self.model.alpha * self.model.eps * self.model.eps,
            0.0,
        ) * cfl
    }
}

/// Conservative thin-film flux `g = u² - u³ - u³ (δ u_x - u_xxx)` differenced
/// once more with the same order.
#[derive(Debug, Clone)]
pub struct ThinFilmScheme {
    pub model: ThinFilmModel,
    pub order: Order,
    pub grid: Grid1D,
    pub boundary: Boundary,
    st: StencilSet,
}

impl ThinFilmScheme {
    pub fn new(
        model: ThinFilmModel,
        order: Order,
        grid: Grid1D,
        boundary: Boundary,
    ) -> Result<Self> {
        if order == Order::Q4 {
            return Err(Error::config(
                "thin-film flux needs a scheme of at least fifth order; use q >= 6",
            ));
        }
        Ok(Self {
            model,
            order,
            grid,
            boundary,
            st: StencilSet::new(order),
        })
    }

    pub fn flux_nodal(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(u, &self.grid)?;
        check_finite(u)?;
        if let Some(node) = u.iter().position(|&v| v <= self.model.u_floor) {
            return Err(Error::Positivity {
                node,
                value: u[node],
                floor: self.model.u_floor,
            });
        }
        let w = self.order.half_width();
        let mut up = Vec::with_capacity(u.len() + 2 * w);
        pad(u, w, self.boundary, &mut up);
        let h = self.grid.h();
        let (w1, w3) = (self.st.d1.weights(), self.st.d3.weights());
        let delta = self.model.delta;
        let g = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                let uw = &up[i..i + 2 * w + 1];
                let (mut ux, mut uxxx) = (0.0, 0.0);
                for k in 0..2 * w + 1 {
                    ux += w1[k] * uw[k];
                    uxxx += w3[k] * uw[k];
                }
                ux /= h;
                uxxx /= h * h * h;
                let u3 = ui * ui * ui;
                ui * ui - u3 - u3 * (delta * ux - uxxx)
            })
            .collect();
        Ok(g)
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.flux_nodal(u)?;
        let mut scratch = Vec::new();
        self.st
            .d1
            .apply_into(&g, &self.grid, self.boundary, &mut scratch, out)?;
        for o in out.iter_mut() {
            *o = -*o;
        }
        check_finite(out)
    }
}

impl SemiDiscrete for ThinFilmScheme {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(state, out)
    }

    fn stable_dt(&self, state: &[f64], cfl: f64) -> f64 {
        let speed = state
            .iter()
            .map(|&v| Flux::ThinFilm.df(v).abs())
            .fold(0.0, f64::max);
        let umax = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mobility = umax.powi(3);
        compute_dt_bounds(
            self.grid.h(),
            speed,
            self.model.delta * mobility,
            0.0,
            mobility,
        ) * cfl
    }
}

/// Camassa-Holm right-hand side with the `u_xxt` term moved to the left and
/// inverted through a Helmholtz solve.
#[derive(Debug, Clone)]
pub struct CamassaHolmScheme {
    pub model: CamassaHolmModel,
    pub order: Order,
    pub grid: Grid1D,
    pub boundary: Boundary,
    solver: Arc<HelmholtzSolver>,
    cubic: CubicScheme,
    st: StencilSet,
}

impl CamassaHolmScheme {
    pub fn new(
        model: CamassaHolmModel,
        order: Order,
        grid: Grid1D,
        boundary: Boundary,
        solver: Arc<HelmholtzSolver>,
    ) -> Self {
        let cubic = CubicScheme::new(
            CubicModel {
                eps: model.eps,
                alpha: 0.0,
            },
            order,
            grid,
            boundary,
        );
        Self {
            model,
            order,
            grid,
            boundary,
            solver,
            cubic,
            st: StencilSet::new(order),
        }
    }

    fn beta(&self) -> f64 {
        self.model.alpha * self.model.eps * self.model.eps
    }

    /// Explicit part `-D₁f + εD₂u + αε²(2 D₁u D₂u + u D₃u)` before inversion.
    pub fn explicit_part(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.cubic.eval(u, &mut out)?;
        let beta = self.beta();
        if beta == 0.0 {
            return Ok(out);
        }
        let w = self.order.half_width();
        let mut up = Vec::with_capacity(u.len() + 2 * w);
        pad(u, w, self.boundary, &mut up);
        let h = self.grid.h();
        let (w1, w2, w3) = (
            self.st.d1.weights(),
            self.st.d2.weights(),
            self.st.d3.weights(),
        );
        for (i, o) in out.iter_mut().enumerate() {
            let uw = &up[i..i + 2 * w + 1];
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..2 * w + 1 {
                a += w1[k] * uw[k];
                b += w2[k] * uw[k];
                c += w3[k] * uw[k];
            }
            let ux = a / h;
            let uxx = b / (h * h);
            let uxxx = c / (h * h * h);
            *o += beta * (2.0 * ux * uxx + u[i] * uxxx);
        }
        check_finite(&out)?;
        Ok(out)
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if self.model.alpha == 0.0 {
            return self.cubic.eval(u, out);
        }
        let rhs = self.explicit_part(u)?;
        let w = self
            .solver
            .solve(&self.grid, self.order, self.beta(), self.boundary, &rhs)?;
        out.copy_from_slice(&w);
        Ok(())
    }
}

impl SemiDiscrete for CamassaHolmScheme {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(state, out)
    }

    fn stable_dt(&self, state: &[f64], cfl: f64) -> f64 {
        // The Helmholtz inverse only damps the dispersive and convective
        // symbols, so the explicit cubic bound stays conservative.
        let umax = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let beta = self.beta() * (1.0 + umax);
        compute_dt_bounds(
            self.grid.h(),
            self.cubic.max_wave_speed(state),
            self.model.eps,
            beta,
            0.0,
        ) * cfl
    }
}

/// Explicit-stability bound before the CFL factor:
/// `min(h/|f'|, h²/(2ε), h³/(6 β), h⁴/(8 κ))`, where `β` multiplies the third
/// derivative and `κ` the fourth.
pub fn compute_dt_bounds(h: f64, max_speed: f64, eps: f64, beta: f64, kappa: f64) -> f64 {
    let mut dt = h / max_speed.max(if eps > 0.0 || beta > 0.0 || kappa > 0.0 {
        1e-300
    } else {
        1.0
    });
    if eps > 0.0 {
        dt = dt.min(h * h / (2.0 * eps));
    }
    if beta > 0.0 {
        dt = dt.min(h * h * h / (6.0 * beta));
    }
    if kappa > 0.0 {
        dt = dt.min(h.powi(4) / (8.0 * kappa));
    }
    dt
}

/// `-D₁[u³] + ε D₂[u] + α ε² D₃[u]` on one field.
pub fn rhs_cubic(
    u: &[f64],
    model: &CubicModel,
    q: Order,
    grid: &Grid1D,
    b: Boundary,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    CubicScheme::new(*model, q, *grid, b).eval(u, &mut out)?;
    Ok(out)
}

pub fn rhs_thin_film(
    u: &[f64],
    model: &ThinFilmModel,
    q: Order,
    grid: &Grid1D,
    b: Boundary,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    ThinFilmScheme::new(*model, q, *grid, b)?.eval(u, &mut out)?;
    Ok(out)
}

pub fn rhs_camassa_holm(
    u: &[f64],
    model: &CamassaHolmModel,
    q: Order,
    grid: &Grid1D,
    b: Boundary,
    solver: Arc<HelmholtzSolver>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    CamassaHolmScheme::new(*model, q, *grid, b, solver).eval(u, &mut out)?;
    Ok(out)
}
