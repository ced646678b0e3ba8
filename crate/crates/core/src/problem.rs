//! Riemann problems: model selection, smoothed step initial data and
//! scheme construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::HelmholtzSolver;
use crate::integrate::SemiDiscrete;
use crate::psystem::{PSystemModel, PSystemScheme, PressureLaw};
use crate::scalar::{
    CamassaHolmModel, CamassaHolmScheme, CubicModel, CubicScheme, Flux, ThinFilmModel,
    ThinFilmScheme,
};
use crate::stencil::{Boundary, Grid1D, Order};

fn default_floor() -> f64 {
    ThinFilmModel::DEFAULT_FLOOR
}

/// Model identity plus regularization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Cubic {
        eps: f64,
        alpha: f64,
    },
    ThinFilm {
        delta: f64,
        #[serde(default = "default_floor")]
        u_floor: f64,
    },
    CamassaHolm {
        eps: f64,
        alpha: f64,
    },
    #[serde(rename = "psystem")]
    PSystem {
        pressure: PressureLaw,
        eps: f64,
        alpha: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Cubic { .. } => "cubic",
            ModelSpec::ThinFilm { .. } => "thin_film",
            ModelSpec::CamassaHolm { .. } => "camassa_holm",
            ModelSpec::PSystem { .. } => "psystem",
        }
    }

    /// Scalar flux, or `None` for the p-system.
    pub fn flux(&self) -> Option<Flux> {
        match self {
            ModelSpec::Cubic { .. } | ModelSpec::CamassaHolm { .. } => Some(Flux::Cubic),
            ModelSpec::ThinFilm { .. } => Some(Flux::ThinFilm),
            ModelSpec::PSystem { .. } => None,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            ModelSpec::PSystem { .. } => 2,
            _ => 1,
        }
    }

    /// Viscosity scale (`δ` for the thin film).
    pub fn eps(&self) -> f64 {
        match *self {
            ModelSpec::Cubic { eps, .. }
            | ModelSpec::CamassaHolm { eps, .. }
            | ModelSpec::PSystem { eps, .. } => eps,
            ModelSpec::ThinFilm { delta, .. } => delta,
        }
    }

    /// Capillarity ratio (`1/δ²` for the thin film, where `α ε² = 1`).
    pub fn alpha(&self) -> f64 {
        match *self {
            ModelSpec::Cubic { alpha, .. }
            | ModelSpec::CamassaHolm { alpha, .. }
            | ModelSpec::PSystem { alpha, .. } => alpha,
            ModelSpec::ThinFilm { delta, .. } => 1.0 / (delta * delta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Cubic { eps, alpha } => CubicModel::new(eps, alpha).map(|_| ()),
            ModelSpec::ThinFilm { delta, u_floor } => {
                ThinFilmModel::with_floor(delta, u_floor).map(|_| ())
            }
            ModelSpec::CamassaHolm { eps, alpha } => CamassaHolmModel::new(eps, alpha).map(|_| ()),
            ModelSpec::PSystem {
                pressure,
                eps,
                alpha,
            } => PSystemModel::new(pressure, eps, alpha).map(|_| ()),
        }
    }
}

/// One side of a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiemannState {
    Scalar(f64),
    Pair { tau: f64, u: f64 },
}

impl RiemannState {
    fn values(&self) -> Vec<f64> {
        match *self {
            RiemannState::Scalar(v) => vec![v],
            RiemannState::Pair { tau, u } => vec![tau, u],
        }
    }
}

/// Smoothed step profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `v = v_R + (v_L - v_R)(tanh(-(x - x₀)/w) + 1)/2`.
    TanhSingle,
    /// Two tanh fronts centred at `x1 < x2` through an intermediate value,
    /// switching formulas at `split`.
    TanhDouble {
        x1: f64,
        x2: f64,
        split: f64,
        middle: f64,
    },
}

impl Profile {
    /// The two-front profile with fronts at 80 and 130 through 0.35.
    pub fn ini2() -> Self {
        Profile::TanhDouble {
            x1: 80.0,
            x2: 130.0,
            split: 105.0,
            middle: 0.35,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Profile::TanhSingle => "ini1",
            Profile::TanhDouble { .. } => "ini2",
        }
    }

    fn eval(&self, x: f64, x0: f64, width: f64, left: f64, right: f64) -> f64 {
        match *self {
            Profile::TanhSingle => {
                right + (left - right) * ((-(x - x0) / width).tanh() + 1.0) / 2.0
            }
            Profile::TanhDouble {
                x1,
                x2,
                split,
                middle,
            } => {
                if x <= split {
                    (middle - left) * ((x - x1) / width).tanh() / 2.0 + (middle + left) / 2.0
                } else {
                    (right - middle) * ((x - x2) / width).tanh() / 2.0 + (right + middle) / 2.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannProblem {
    pub model: ModelSpec,
    pub left: RiemannState,
    pub right: RiemannState,
    pub profile: Profile,
    pub x0: f64,
    pub width: f64,
    pub grid: Grid1D,
    pub boundary: Boundary,
}

impl RiemannProblem {
    /// Single-tanh problem on the grid, centred at `x0` with unit width and
    /// constant-extrapolation boundaries.
    pub fn new(
        model: ModelSpec,
        left: RiemannState,
        right: RiemannState,
        grid: Grid1D,
        x0: f64,
    ) -> Self {
        Self {
            model,
            left,
            right,
            profile: Profile::TanhSingle,
            x0,
            width: 1.0,
            grid,
            boundary: Boundary::ConstantExtrapolation,
        }
    }

    pub fn scalar(model: ModelSpec, u_left: f64, u_right: f64, grid: Grid1D, x0: f64) -> Self {
        Self::new(
            model,
            RiemannState::Scalar(u_left),
            RiemannState::Scalar(u_right),
            grid,
            x0,
        )
    }

    pub fn psystem(
        model: ModelSpec,
        left: (f64, f64),
        right: (f64, f64),
        grid: Grid1D,
        x0: f64,
    ) -> Self {
        Self::new(
            model,
            RiemannState::Pair {
                tau: left.0,
                u: left.1,
            },
            RiemannState::Pair {
                tau: right.0,
                u: right.1,
            },
            grid,
            x0,
        )
    }

    /// Left and right values of each component.
    pub fn component_states(&self) -> Vec<(f64, f64)> {
        self.left
            .values()
            .into_iter()
            .zip(self.right.values())
            .collect()
    }

    /// Left and right values of the analysed component (`τ` for the p-system).
    pub fn primary_states(&self) -> (f64, f64) {
        self.component_states()[0]
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let (l, r) = (self.left.values(), self.right.values());
        if l.len() != self.model.components() || r.len() != self.model.components() {
            return Err(Error::config(format!(
                "{} model needs {} component(s) per state",
                self.model.name(),
                self.model.components()
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::config(format!(
                "profile width must be positive, got {}",
                self.width
            )));
        }
        for ((a, b), name) in l.iter().zip(&r).zip(["first", "second"]) {
            let tol = 1e-10 * (a - b).abs().max(1.0);
            let (x_lo, x_hi) = (self.grid.x_min(), self.grid.x_max());
            let lo = self.profile.eval(x_lo, self.x0, self.width, *a, *b);
            let hi = self.profile.eval(x_hi, self.x0, self.width, *a, *b);
            if (lo - a).abs() > tol || (hi - b).abs() > tol {
                return Err(Error::config(format!(
                    "domain [{x_lo}, {x_hi}] too narrow for the {} profile: {name} component reaches \
                     {lo:e} / {hi:e} at the ends instead of {a} / {b}",
                    self.profile.id()
                )));
            }
        }
        Ok(())
    }

    /// Flat nodal state; the p-system stores `[τ..., u...]`.
    pub fn initial_data(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let xs = self.grid.nodes();
        let mut out = Vec::with_capacity(xs.len() * self.model.components());
        for (a, b) in self.component_states() {
            out.extend(
                xs.iter()
                    .map(|&x| self.profile.eval(x, self.x0, self.width, a, b)),
            );
        }
        Ok(out)
    }

    /// Bounds on left- and right-going signal speeds over the range of the data
    /// widened by the data amplitude (middle states can overshoot the data).
    pub fn speed_bounds(&self) -> (f64, f64) {
        let samples = 200;
        let (a, b) = self.primary_states();
        let (lo, hi) = (a.min(b), a.max(b));
        let span = hi - lo;
        match self.model {
            ModelSpec::PSystem { pressure, .. } => {
                let (lo, hi) = (lo.max(1.0 / 3.0 + 1e-3).min(hi), hi);
                let c = (0..=samples)
                    .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
                    .map(|t| pressure.dp(t).abs().sqrt())
                    .fold(0.0, f64::max);
                (c, c)
            }
            _ => {
                let flux = self.model.flux().expect("scalar model");
                let (lo, hi) = match flux {
                    Flux::Cubic => (lo.min(-hi.abs()), hi.max(lo.abs())),
                    Flux::ThinFilm => ((lo - span).max(0.0), hi + span),
                };
                let (mut left, mut right) = (0.0f64, 0.0f64);
                for k in 0..=samples {
                    let s = flux.df(lo + (hi - lo) * k as f64 / samples as f64);
                    left = left.max(-s);
                    right = right.max(s);
                }
                (left, right)
            }
        }
    }

    /// End time at which no signal has reached a boundary: 90% of the
    /// shortest boundary arrival time under [`Self::speed_bounds`].
    pub fn auto_t_end(&self) -> f64 {
        let (sl, sr) = self.speed_bounds();
        let dl = self.x0 - self.grid.x_min();
        let dr = self.grid.x_max() - self.x0;
        let tl = if sl > 0.0 { dl / sl } else { f64::INFINITY };
        let tr = if sr > 0.0 { dr / sr } else { f64::INFINITY };
        let t = 0.9 * tl.min(tr);
        if t.is_finite() {
            t
        } else {
            self.grid.length()
        }
    }

    /// Semi-discrete system for this problem at order `q`.
    pub fn scheme(
        &self,
        q: Order,
        solver: Arc<HelmholtzSolver>,
    ) -> Result<Box<dyn SemiDiscrete + Send>> {
        self.model.validate()?;
        let (g, b) = (self.grid, self.boundary);
        Ok(match self.model {
            ModelSpec::Cubic { eps, alpha } => {
                Box::new(CubicScheme::new(CubicModel::new(eps, alpha)?, q, g, b))
            }
            ModelSpec::ThinFilm { delta, u_floor } => Box::new(ThinFilmScheme::new(
                ThinFilmModel::with_floor(delta, u_floor)?,
                q,
                g,
                b,
            )?),
            ModelSpec::CamassaHolm { eps, alpha } => Box::new(CamassaHolmScheme::new(
                CamassaHolmModel::new(eps, alpha)?,
                q,
                g,
                b,
                solver,
            )),
            ModelSpec::PSystem {
                pressure,
                eps,
                alpha,
            } => Box::new(PSystemScheme::new(
                PSystemModel::new(pressure, eps, alpha)?,
                q,
                g,
                b,
            )),
        })
    }
}

/// Nodal sampling of the problem's profile.
pub fn build_initial_data(p: &RiemannProblem) -> Result<Vec<f64>> {
    p.initial_data()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ModelSpec {
        ModelSpec::Cubic {
            eps: 0.01,
            alpha: 1.0,
        }
    }

    #[test]
    fn tanh_limits_and_centre() {
        let g = Grid1D::new(0.0, 999.0, 1000).unwrap();
        let p = RiemannProblem::scalar(
            ModelSpec::ThinFilm {
                delta: 0.1,
                u_floor: 1e-6,
            },
            0.6,
            0.1,
            g,
            100.0,
        );
        let u = p.initial_data().unwrap();
        assert!((u[0] - 0.6).abs() < 1e-12);
        assert!((u[999] - 0.1).abs() < 1e-12);
        assert!((u[100] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn ini2_profile() {
        let g = Grid1D::new(0.0, 999.0, 1000).unwrap();
        let mut p = RiemannProblem::scalar(
            ModelSpec::ThinFilm {
                delta: 0.1,
                u_floor: 1e-6,
            },
            0.05,
            0.7,
            g,
            100.0,
        );
        p.profile = Profile::ini2();
        let u = p.initial_data().unwrap();
        assert!((u[0] - 0.05).abs() < 1e-12);
        assert!((u[80] - 0.2).abs() < 1e-15);
        assert!((u[105] - 0.35).abs() < 1e-9);
        assert!((u[130] - 0.525).abs() < 1e-15);
        assert!((u[999] - 0.7).abs() < 1e-12);
        assert_eq!(p.profile.id(), "ini2");
    }

    #[test]
    fn narrow_domain_rejected() {
        let g = Grid1D::new(0.0, 10.0, 101).unwrap();
        let p = RiemannProblem::scalar(cubic(), 1.0, -1.0, g, 2.0);
        assert!(matches!(p.initial_data(), Err(Error::Config(_))));
    }

    #[test]
    fn psystem_components() {
        let g = Grid1D::new(0.0, 1.0, 2001).unwrap();
        let m = ModelSpec::PSystem {
            pressure: PressureLaw::PiecewiseLinear,
            eps: 1e-3,
            alpha: 0.0,
        };
        let mut p = RiemannProblem::psystem(m, (0.9, 1.5), (4.0, 1.0), g, 0.5);
        p.width = 0.01;
        let s = p.initial_data().unwrap();
        assert_eq!(s.len(), 4002);
        assert!((s[0] - 0.9).abs() < 1e-12 && (s[2000] - 4.0).abs() < 1e-12);
        assert!((s[2001] - 1.5).abs() < 1e-12 && (s[4001] - 1.0).abs() < 1e-12);
        let wrong = RiemannProblem::scalar(m, 1.0, 2.0, g, 0.5);
        assert!(wrong.validate().is_err());
    }

    #[test]
    fn auto_end_time_keeps_waves_inside() {
        let g = Grid1D::new(0.0, 10.0, 2001).unwrap();
        let mut p = RiemannProblem::scalar(cubic(), 2.0, -1.0, g, 2.5);
        p.width = 0.05;
        let (_, sr) = p.speed_bounds();
        assert!(sr >= 12.0);
        let t = p.auto_t_end();
        assert!(t > 0.0 && 2.5 + sr * t < 10.0);
    }

    #[test]
    fn model_spec_json() {
        let m: ModelSpec = serde_json::from_str(r#"{"model":"thin_film","delta":0.1}"#).unwrap();
        assert_eq!(
            m,
            ModelSpec::ThinFilm {
                delta: 0.1,
                u_floor: 1e-6
            }
        );
        let p: ModelSpec = serde_json::from_str(
            r#"{"model":"psystem","pressure":{"kind":"piecewise_linear"},"eps":0.001,"alpha":0}"#,
        )
        .unwrap();
        assert_eq!(p.components(), 2);
        let s: RiemannState = serde_json::from_str(r#"{"tau":0.9,"u":1.5}"#).unwrap();
        assert_eq!(s, RiemannState::Pair { tau: 0.9, u: 1.5 });
    }
}
