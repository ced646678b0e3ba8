//! The p-system `τ_t - u_x = 0`, `u_t + p(τ)_x = ε u_xx - α ε² τ_xxx` with
//! van der Waals type and piecewise-linear pressure laws.
//!
//! States are stored flat as `[τ_0 .. τ_{n-1}, u_0 .. u_{n-1}]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::SemiDiscrete;
use crate::stencil::{pad, Boundary, Grid1D, Order, StencilSet};

const VDW_TAU_MIN: f64 = 1.0 / 3.0;

/// Breakpoints and pieces `(slope, intercept)` of the four-piece linear law.
const PL_BREAKS: [f64; 3] = [1.0, 2.0, 4.0];
const PL_PIECES: [(f64, f64); 4] = [(-7.0, 10.0), (4.0, -1.0), (-2.5, 12.0), (-0.2, 2.8)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PressureLaw {
    /// `RT/(τ - 1/3) - 3/τ²`.
    VdwRt { r: f64, t: f64 },
    /// `(3τ - 1)^-(1 + 1/ζ) - 3/τ²`.
    VdwZeta { zeta: f64 },
    /// Continuous four-piece law with kinks at τ = 1, 2, 4.
    PiecewiseLinear,
}

impl PressureLaw {
    /// The law with `R = 8/3`, `T = 1.005`.
    pub fn vdw_default() -> Self {
        PressureLaw::VdwRt {
            r: 8.0 / 3.0,
            t: 1.005,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PressureLaw::VdwRt { r, t } if !(r > 0.0 && t > 0.0) => Err(Error::config(format!(
                "van der Waals law needs R, T > 0 (got {r}, {t})"
            ))),
            PressureLaw::VdwZeta { zeta } if !(zeta > 0.0) => {
                Err(Error::config(format!("zeta must be positive, got {zeta}")))
            }
            PressureLaw::PiecewiseLinear => {
                for (k, &b) in PL_BREAKS.iter().enumerate() {
                    let (a0, c0) = PL_PIECES[k];
                    let (a1, c1) = PL_PIECES[k + 1];
                    let (l, r) = (a0 * b + c0, a1 * b + c1);
                    if (l - r).abs() > 1e-12 {
                        return Err(Error::config(format!(
                            "piecewise-linear law discontinuous at tau = {b}: {l} vs {r}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn in_domain(&self, tau: f64) -> bool {
        match self {
            PressureLaw::VdwRt { .. } | PressureLaw::VdwZeta { .. } => {
                tau > VDW_TAU_MIN && tau.is_finite()
            }
            PressureLaw::PiecewiseLinear => tau.is_finite(),
        }
    }

    fn piece(tau: f64) -> (f64, f64) {
        // Breakpoints belong to the piece on their left.
        let k = PL_BREAKS.iter().take_while(|&&b| tau > b).count();
        PL_PIECES[k]
    }

    /// `p(τ)`; no domain check.
    #[inline]
    pub fn p_unchecked(&self, tau: f64) -> f64 {
        match *self {
            PressureLaw::VdwRt { r, t } => r * t / (tau - VDW_TAU_MIN) - 3.0 / (tau * tau),
            PressureLaw::VdwZeta { zeta } => {
                (3.0 * tau - 1.0).powf(-(1.0 + 1.0 / zeta)) - 3.0 / (tau * tau)
            }
            PressureLaw::PiecewiseLinear => {
                let (a, c) = Self::piece(tau);
                a * tau + c
            }
        }
    }

    pub fn pressure(&self, tau: f64) -> Result<f64> {
        if !self.in_domain(tau) {
            return Err(Error::Domain { node: 0, tau });
        }
        Ok(self.p_unchecked(tau))
    }

    /// `p'(τ)`; the piecewise law takes the slope from the left at kinks.
    pub fn dp(&self, tau: f64) -> f64 {
        match *self {
            PressureLaw::VdwRt { r, t } => -r * t / (tau - VDW_TAU_MIN).powi(2) + 6.0 / tau.powi(3),
            PressureLaw::VdwZeta { zeta } => {
                let e = 1.0 + 1.0 / zeta;
                -3.0 * e * (3.0 * tau - 1.0).powf(-e - 1.0) + 6.0 / tau.powi(3)
            }
            PressureLaw::PiecewiseLinear => Self::piece(tau).0,
        }
    }

    /// `p''(τ)` in closed form for the smooth laws, zero for the piecewise law.
    pub fn d2p(&self, tau: f64) -> f64 {
        match *self {
            PressureLaw::VdwRt { r, t } => {
                2.0 * r * t / (tau - VDW_TAU_MIN).powi(3) - 18.0 / tau.powi(4)
            }
            PressureLaw::VdwZeta { zeta } => {
                let e = 1.0 + 1.0 / zeta;
                9.0 * e * (e + 1.0) * (3.0 * tau - 1.0).powf(-e - 2.0) - 18.0 / tau.powi(4)
            }
            PressureLaw::PiecewiseLinear => 0.0,
        }
    }

    /// Characteristic speed `sqrt(-p')` where the system is hyperbolic.
    pub fn sound_speed(&self, tau: f64) -> f64 {
        (-self.dp(tau)).max(0.0).sqrt()
    }
}

/// Pressure value, failing outside the law's domain.
pub fn pressure_eval(law: &PressureLaw, tau: f64) -> Result<f64> {
    law.pressure(tau)
}

/// Sign changes of `p''` on `[0.4, 10]`, refined by bisection to 1e-8.
///
/// `p''` is sampled by central differences of `p`, so the search never relies
/// on the closed-form second derivative. For the piecewise-linear law the
/// breakpoints where the slope increases (convex kinks) or decreases (concave
/// kinks) alternate; the points where that pattern flips are returned.
pub fn find_inflection_points(law: &PressureLaw) -> Vec<f64> {
    const LO: f64 = 0.4;
    const HI: f64 = 10.0;
    if let PressureLaw::PiecewiseLinear = law {
        let kinks: Vec<(f64, f64)> = PL_BREAKS
            .iter()
            .enumerate()
            .map(|(k, &b)| (b, PL_PIECES[k + 1].0 - PL_PIECES[k].0))
            .collect();
        return kinks
            .windows(2)
            .filter(|w| w[0].1.signum() != w[1].1.signum())
            .map(|w| w[1].0)
            .collect();
    }
    let d2 = |tau: f64| {
        let e = 1e-4 * tau;
        (law.p_unchecked(tau + e) - 2.0 * law.p_unchecked(tau) + law.p_unchecked(tau - e)) / (e * e)
    };
    let samples = 20_000;
    let step = (HI - LO) / samples as f64;
    let mut roots = Vec::new();
    let mut a = LO;
    let mut fa = d2(a);
    for k in 1..=samples {
        let b = LO + k as f64 * step;
        let fb = d2(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > 1e-8 {
                let mid = 0.5 * (lo + hi);
                let fm = d2(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Roots of `p'` on `[0.4, 10]` by the same scan; the edges of the elliptic region.
pub fn find_spinodal_points(law: &PressureLaw) -> Vec<f64> {
    let samples = 20_000;
    let (lo0, hi0) = (0.4, 10.0);
    let step = (hi0 - lo0) / samples as f64;
    let mut roots = Vec::new();
    for k in 0..samples {
        let (a, b) = (lo0 + k as f64 * step, lo0 + (k + 1) as f64 * step);
        let (fa, fb) = (law.dp(a), law.dp(b));
        if fa.signum() != fb.signum() {
            let (mut lo, mut hi) = (a, b);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if law.dp(mid).signum() == fa.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSystemModel {
    pub pressure: PressureLaw,
    pub eps: f64,
    pub alpha: f64,
}

impl PSystemModel {
    pub fn new(pressure: PressureLaw, eps: f64, alpha: f64) -> Result<Self> {
        pressure.validate()?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be non-negative, got {alpha}"
            )));
        }
        Ok(Self {
            pressure,
            eps,
            alpha,
        })
    }
}

/// Velocity and specific volume on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PSystemState {
    pub tau: Vec<f64>,
    pub u: Vec<f64>,
}

impl PSystemState {
    pub fn new(tau: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if tau.len() != u.len() {
            return Err(Error::config("tau and u must have equal lengths"));
        }
        Ok(Self { tau, u })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.tau.clone();
        v.extend_from_slice(&self.u);
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            tau: v[..n].to_vec(),
            u: v[n..].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PSystemScheme {
    pub model: PSystemModel,
    pub order: Order,
    pub grid: Grid1D,
    pub boundary: Boundary,
    st: StencilSet,
}

impl PSystemScheme {
    pub fn new(model: PSystemModel, order: Order, grid: Grid1D, boundary: Boundary) -> Self {
        Self {
            model,
            order,
            grid,
            boundary,
            st: StencilSet::new(order),
        }
    }

    /// `τ_t = D₁u`, `u_t = -D₁p(τ) + ε D₂u - α ε² D₃τ` on a flat state.
    pub fn eval(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.grid.len();
        if state.len() != 2 * n || out.len() != 2 * n {
            return Err(Error::config("p-system state must hold 2n values"));
        }
        let (tau, u) = state.split_at(n);
        if let Some(node) = state.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                node: node % n,
                time: None,
                stage: None,
            });
        }
        if let Some(node) = tau.iter().position(|&t| !self.model.pressure.in_domain(t)) {
            return Err(Error::Domain {
                node,
                tau: tau[node],
            });
        }
        let w = self.order.half_width();
        let mut tp = Vec::with_capacity(n + 2 * w);
        let mut up = Vec::with_capacity(n + 2 * w);
        pad(tau, w, self.boundary, &mut tp);
        pad(u, w, self.boundary, &mut up);
        let pp: Vec<f64> = tp
            .iter()
            .map(|&t| self.model.pressure.p_unchecked(t))
            .collect();
        let h = self.grid.h();
        let c1 = 1.0 / h;
        let c2 = self.model.eps / (h * h);
        let c3 = self.model.alpha * self.model.eps * self.model.eps / (h * h * h);
        let (w1, w2, w3) = (
            self.st.d1.weights(),
            self.st.d2.weights(),
            self.st.d3.weights(),
        );
        let (out_tau, out_u) = out.split_at_mut(n);
        for i in 0..n {
            let (uw, pw, tw) = (
                &up[i..i + 2 * w + 1],
                &pp[i..i + 2 * w + 1],
                &tp[i..i + 2 * w + 1],
            );
            let (mut du, mut dp, mut d2u, mut d3t) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..2 * w + 1 {
                du += w1[k] * uw[k];
                dp += w1[k] * pw[k];
                d2u += w2[k] * uw[k];
                d3t += w3[k] * tw[k];
            }
            out_tau[i] = c1 * du;
            out_u[i] = -c1 * dp + c2 * d2u - c3 * d3t;
        }
        if let Some(node) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                node: node % n,
                time: None,
                stage: None,
            });
        }
        Ok(())
    }

    pub fn max_wave_speed(&self, state: &[f64]) -> f64 {
        let n = self.grid.len();
        state[..n]
            .iter()
            .map(|&t| self.model.pressure.dp(t).abs().sqrt())
            .fold(0.0, f64::max)
    }
}

impl SemiDiscrete for PSystemScheme {
    fn len(&self) -> usize {
        2 * self.grid.len()
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(state, out)
    }

    fn stable_dt(&self, state: &[f64], cfl: f64) -> f64 {
        let beta = self.model.alpha * self.model.eps * self.model.eps;
        crate::scalar::compute_dt_bounds(
            self.grid.h(),
            self.max_wave_speed(state),
            self.model.eps,
            beta,
            0.0,
        ) * cfl
    }
}

/// Increment `(τ_t, u_t)` for one state.
pub fn rhs_psystem(
    s: &PSystemState,
    m: &PSystemModel,
    q: Order,
    g: &Grid1D,
    b: Boundary,
) -> Result<PSystemState> {
    let flat = s.flatten();
    let mut out = vec![0.0; flat.len()];
    PSystemScheme::new(*m, q, *g, b).eval(&flat, &mut out)?;
    Ok(PSystemState::from_flat(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn piecewise_values() {
        let pl = PressureLaw::PiecewiseLinear;
        pl.validate().unwrap();
        assert_eq!(pressure_eval(&pl, 1.0).unwrap(), 3.0);
        assert_eq!(pressure_eval(&pl, 2.0).unwrap(), 7.0);
        assert_eq!(pressure_eval(&pl, 4.0).unwrap(), 2.0);
        assert_eq!(pressure_eval(&pl, 0.5).unwrap(), 6.5);
        assert_eq!(pl.dp(1.0), -7.0);
        assert_eq!(pl.dp(1.0 + 1e-12), 4.0);
    }

    #[test]
    fn vdw_domain() {
        let law = PressureLaw::vdw_default();
        assert!(matches!(
            pressure_eval(&law, 1.0 / 3.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            pressure_eval(&law, 0.2),
            Err(Error::Domain { .. })
        ));
        assert!(pressure_eval(&law, 0.34).unwrap().is_finite());
    }

    #[test]
    fn vdw_inflection_points() {
        let pts = find_inflection_points(&PressureLaw::vdw_default());
        assert_eq!(pts.len(), 2, "{pts:?}");
        assert!((pts[0] - 1.00996).abs() < 1e-3, "{pts:?}");
        assert!((pts[1] - 1.8515).abs() < 1e-3, "{pts:?}");
        // Finite-difference scan agrees with the closed form.
        for p in pts {
            assert!(PressureLaw::vdw_default().d2p(p).abs() < 1e-4);
        }
    }

    #[test]
    fn hot_vdw_law_is_convex_on_window() {
        let pts = find_inflection_points(&PressureLaw::VdwRt {
            r: 8.0 / 3.0,
            t: 50.0,
        });
        assert!(pts.is_empty(), "{pts:?}");
    }

    #[test]
    fn zeta_law_scan_is_finite() {
        let pts = find_inflection_points(&PressureLaw::VdwZeta { zeta: 1.0 });
        assert!(pts.iter().all(|p| p.is_finite() && *p >= 0.4 && *p <= 10.0));
        for p in &pts {
            assert!(PressureLaw::VdwZeta { zeta: 1.0 }.d2p(*p).abs() < 1e-3);
        }
    }

    fn assert_decreasing(law: &PressureLaw, from: f64, to: f64) {
        let mut prev = law.p_unchecked(from);
        let mut tau = from + 1e-3;
        while tau < to {
            let p = law.p_unchecked(tau);
            assert!(p < prev, "p not decreasing at {tau}");
            prev = p;
            tau += 1e-3;
        }
    }

    #[test]
    fn vdw_monotone_outside_spinodal() {
        // T = 1.005 is above the critical temperature: no spinodal, p' < 0 throughout.
        let law = PressureLaw::vdw_default();
        assert!(find_spinodal_points(&law).is_empty());
        assert_decreasing(&law, 0.34, 10.0);

        let cold = PressureLaw::VdwRt {
            r: 8.0 / 3.0,
            t: 0.9,
        };
        let sp = find_spinodal_points(&cold);
        assert_eq!(sp.len(), 2, "{sp:?}");
        assert!(sp[0] < 1.0 && sp[1] > 1.0);
        assert_decreasing(&cold, 0.34, sp[0]);
        assert_decreasing(&cold, sp[1], 10.0);
        assert!(cold.dp(0.5 * (sp[0] + sp[1])) > 0.0);
    }

    #[test]
    fn piecewise_kinks() {
        let pts = find_inflection_points(&PressureLaw::PiecewiseLinear);
        assert_eq!(pts, vec![2.0, 4.0]);
    }

    #[test]
    fn constant_state_increment_vanishes() {
        let g = Grid1D::new(0.0, 1.0, 40).unwrap();
        let m = PSystemModel::new(PressureLaw::vdw_default(), 1e-3, 1.0).unwrap();
        let s = PSystemState::new(vec![0.8; 40], vec![0.3; 40]).unwrap();
        for q in Order::ALL {
            let d = rhs_psystem(&s, &m, q, &g, Boundary::Periodic).unwrap();
            assert!(d.tau.iter().chain(&d.u).all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn smooth_state_matches_derivatives() {
        // τ = 2.5 + 0.1 sin x stays on the (2, 4] piece where p = -2.5 τ + 12.
        let (eps, alpha) = (0.01, 0.5);
        let m = PSystemModel::new(PressureLaw::PiecewiseLinear, eps, alpha).unwrap();
        for q in Order::ALL {
            let errs: Vec<f64> = [32usize, 64]
                .iter()
                .map(|&n| {
                    let g = Grid1D::with_spacing(0.0, 2.0 * PI / n as f64, n).unwrap();
                    let xs = g.nodes();
                    let s = PSystemState::new(
                        xs.iter().map(|x| 2.5 + 0.1 * x.sin()).collect(),
                        xs.iter().map(|x| 0.1 * x.cos()).collect(),
                    )
                    .unwrap();
                    let d = rhs_psystem(&s, &m, q, &g, Boundary::Periodic).unwrap();
                    xs.iter()
                        .enumerate()
                        .map(|(i, x)| {
                            let tau_t = -0.1 * x.sin();
                            let u_t = 2.5 * 0.1 * x.cos() - eps * 0.1 * x.cos()
                                + alpha * eps * eps * 0.1 * x.cos();
                            (d.tau[i] - tau_t).abs().max((d.u[i] - u_t).abs())
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            let rate = (errs[0] / errs[1]).log2();
            assert!(rate > q.value() as f64 - 2.5, "q={q} rate={rate} {errs:?}");
        }
    }

    #[test]
    fn without_capillarity_reduces_to_viscous_system() {
        let g = Grid1D::new(0.0, 1.0, 60).unwrap();
        let xs = g.nodes();
        let s = PSystemState::new(
            xs.iter().map(|x| 1.2 + 0.4 * (6.0 * x).sin()).collect(),
            xs.iter().map(|x| (4.0 * x).cos()).collect(),
        )
        .unwrap();
        let law = PressureLaw::vdw_default();
        let m = PSystemModel::new(law, 0.02, 0.0).unwrap();
        let d = rhs_psystem(&s, &m, Order::Q6, &g, Boundary::Periodic).unwrap();
        let st = StencilSet::new(Order::Q6);
        let p: Vec<f64> = s.tau.iter().map(|&t| law.p_unchecked(t)).collect();
        let ux = st.d1.apply(&s.u, &g, Boundary::Periodic).unwrap();
        let px = st.d1.apply(&p, &g, Boundary::Periodic).unwrap();
        let uxx = st.d2.apply(&s.u, &g, Boundary::Periodic).unwrap();
        for i in 0..60 {
            assert!((d.tau[i] - ux[i]).abs() < 1e-9);
            assert!((d.u[i] - (-px[i] + 0.02 * uxx[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_conservation() {
        let g = Grid1D::with_spacing(0.0, 1.0 / 50.0, 50).unwrap();
        let xs = g.nodes();
        let s = PSystemState::new(
            xs.iter()
                .map(|x| 1.5 + 0.3 * (2.0 * PI * x).sin())
                .collect(),
            xs.iter().map(|x| (4.0 * PI * x).cos()).collect(),
        )
        .unwrap();
        let m = PSystemModel::new(PressureLaw::vdw_default(), 0.01, 1.0).unwrap();
        let d = rhs_psystem(&s, &m, Order::Q8, &g, Boundary::Periodic).unwrap();
        assert!(d.tau.iter().sum::<f64>().abs() < 1e-9);
        assert!(d.u.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn domain_violation_reports_node() {
        let g = Grid1D::new(0.0, 1.0, 40).unwrap();
        let m = PSystemModel::new(PressureLaw::vdw_default(), 1e-3, 0.0).unwrap();
        let mut tau = vec![1.0; 40];
        tau[22] = 0.3;
        let s = PSystemState::new(tau, vec![0.0; 40]).unwrap();
        let err = rhs_psystem(&s, &m, Order::Q4, &g, Boundary::Periodic).unwrap_err();
        assert!(matches!(err, Error::Domain { node: 22, .. }));
    }
}
