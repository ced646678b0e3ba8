//! Explicit Runge-Kutta integration of semi-discrete systems `dU/dt = R(U)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A method-of-lines right-hand side over a flat state vector.
pub trait SemiDiscrete: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()>;

    /// Explicit-stability step estimate for `state` scaled by `cfl`.
    fn stable_dt(&self, state: &[f64], cfl: f64) -> f64;
}

/// Explicit Butcher tableau with strictly lower-triangular `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButcherTableau {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub declared_order: u32,
}

impl ButcherTableau {
    pub fn new(name: &str, a: Vec<Vec<f64>>, b: Vec<f64>, declared_order: u32) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s {
            return Err(Error::config(format!(
                "tableau {name}: a must have {s} rows"
            )));
        }
        for (k, row) in a.iter().enumerate() {
            if row.len() > k {
                if row[k..].iter().any(|&v| v != 0.0) {
                    return Err(Error::config(format!(
                        "tableau {name}: row {k} is not explicit"
                    )));
                }
            }
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::config(format!(
                "tableau {name}: weights sum to {sum}"
            )));
        }
        let a = a
            .into_iter()
            .enumerate()
            .map(|(k, mut row)| {
                row.resize(k, 0.0);
                row
            })
            .collect();
        Ok(Self {
            name: name.to_string(),
            a,
            b,
            declared_order,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Abscissae `c_k = Σ_j a_{k,j}`.
    pub fn nodes(&self) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn forward_euler() -> Self {
        Self::new("euler", vec![vec![]], vec![1.0], 1).expect("valid tableau")
    }

    pub fn rk4() -> Self {
        Self::new(
            "rk4",
            vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            4,
        )
        .expect("valid tableau")
    }

    /// Butcher's seven-stage sixth-order method.
    pub fn rk6() -> Self {
        Self::new(
            "rk6",
            vec![
                vec![],
                vec![1.0 / 3.0],
                vec![0.0, 2.0 / 3.0],
                vec![1.0 / 12.0, 1.0 / 3.0, -1.0 / 12.0],
                vec![-1.0 / 16.0, 9.0 / 8.0, -3.0 / 16.0, -3.0 / 8.0],
                vec![0.0, 9.0 / 8.0, -3.0 / 8.0, -3.0 / 4.0, 1.0 / 2.0],
                vec![
                    9.0 / 44.0,
                    -9.0 / 11.0,
                    63.0 / 44.0,
                    18.0 / 11.0,
                    0.0,
                    -16.0 / 11.0,
                ],
            ],
            vec![
                11.0 / 120.0,
                0.0,
                27.0 / 40.0,
                27.0 / 40.0,
                -4.0 / 15.0,
                -4.0 / 15.0,
                11.0 / 120.0,
            ],
            6,
        )
        .expect("valid tableau")
    }

    /// Cooper and Verner's eleven-stage eighth-order method.
    pub fn rk8() -> Self {
        let s = 21f64.sqrt();
        Self::new(
            "rk8",
            vec![
                vec![],
                vec![0.5],
                vec![0.25, 0.25],
                vec![1.0 / 7.0, (-7.0 - 3.0 * s) / 98.0, (21.0 + 5.0 * s) / 49.0],
                vec![
                    (11.0 + s) / 84.0,
                    0.0,
                    (18.0 + 4.0 * s) / 63.0,
                    (21.0 - s) / 252.0,
                ],
                vec![
                    (5.0 + s) / 48.0,
                    0.0,
                    (9.0 + s) / 36.0,
                    (-231.0 + 14.0 * s) / 360.0,
                    (63.0 - 7.0 * s) / 80.0,
                ],
                vec![
                    (10.0 - s) / 42.0,
                    0.0,
                    (-432.0 + 92.0 * s) / 315.0,
                    (633.0 - 145.0 * s) / 90.0,
                    (-504.0 + 115.0 * s) / 70.0,
                    (63.0 - 13.0 * s) / 35.0,
                ],
                vec![
                    1.0 / 14.0,
                    0.0,
                    0.0,
                    0.0,
                    (14.0 - 3.0 * s) / 126.0,
                    (13.0 - 3.0 * s) / 63.0,
                    1.0 / 9.0,
                ],
                vec![
                    1.0 / 32.0,
                    0.0,
                    0.0,
                    0.0,
                    (91.0 - 21.0 * s) / 576.0,
                    11.0 / 72.0,
                    (-385.0 - 75.0 * s) / 1152.0,
                    (63.0 + 13.0 * s) / 128.0,
                ],
                vec![
                    1.0 / 14.0,
                    0.0,
                    0.0,
                    0.0,
                    1.0 / 9.0,
                    (-733.0 - 147.0 * s) / 2205.0,
                    (515.0 + 111.0 * s) / 504.0,
                    (-51.0 - 11.0 * s) / 56.0,
                    (132.0 + 28.0 * s) / 245.0,
                ],
                vec![
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    (-42.0 + 7.0 * s) / 18.0,
                    (-18.0 + 28.0 * s) / 45.0,
                    (-273.0 - 53.0 * s) / 72.0,
                    (301.0 + 53.0 * s) / 72.0,
                    (28.0 - 28.0 * s) / 45.0,
                    (49.0 - 7.0 * s) / 18.0,
                ],
            ],
            vec![
                1.0 / 20.0,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                49.0 / 180.0,
                16.0 / 45.0,
                49.0 / 180.0,
                1.0 / 20.0,
            ],
            8,
        )
        .expect("valid tableau")
    }
}

/// `rk4`, `rk6` or `rk8`.
pub fn builtin_tableau(name: &str) -> Result<ButcherTableau> {
    match name {
        "rk4" => Ok(ButcherTableau::rk4()),
        "rk6" => Ok(ButcherTableau::rk6()),
        "rk8" => Ok(ButcherTableau::rk8()),
        "euler" => Ok(ButcherTableau::forward_euler()),
        other => Err(Error::config(format!(
            "unknown tableau '{other}' (rk4, rk6, rk8)"
        ))),
    }
}

/// Reusable stage storage for [`rk_step`].
#[derive(Debug, Default)]
pub struct StepBuffers {
    stages: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

/// One explicit step; `state` is updated in place.
pub fn rk_step(
    sys: &dyn SemiDiscrete,
    state: &mut [f64],
    dt: f64,
    tab: &ButcherTableau,
    t: f64,
    buf: &mut StepBuffers,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = state.len();
    let s = tab.stages();
    buf.stages.resize_with(s, Vec::new);
    for g in &mut buf.stages {
        g.resize(n, 0.0);
    }
    buf.tmp.resize(n, 0.0);
    for k in 0..s {
        buf.tmp.copy_from_slice(state);
        for (j, &a) in tab.a[k].iter().enumerate() {
            if a != 0.0 {
                let c = dt * a;
                for (x, g) in buf.tmp.iter_mut().zip(&buf.stages[j]) {
                    *x += c * g;
                }
            }
        }
        let (done, rest) = buf.stages.split_at_mut(k);
        let _ = done;
        sys.rhs(&buf.tmp, &mut rest[0])
            .map_err(|e| stage_context(e, t, k))?;
    }
    for (k, &b) in tab.b.iter().enumerate() {
        if b != 0.0 {
            let c = dt * b;
            for (x, g) in state.iter_mut().zip(&buf.stages[k]) {
                *x += c * g;
            }
        }
    }
    if let Some(node) = state.iter().position(|v| !v.is_finite()) {
        return Err(Error::Blowup {
            node,
            time: Some(t + dt),
            stage: None,
        });
    }
    Ok(())
}

fn stage_context(e: Error, t: f64, k: usize) -> Error {
    match e {
        Error::Blowup { node, .. } => Error::Blowup {
            node,
            time: Some(t),
            stage: Some(k),
        },
        other => other,
    }
}

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cfl: f64,
    pub t_end: f64,
    /// Fixed step; bypasses the automatic estimate.
    pub dt_override: Option<f64>,
    pub output_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 1.0,
            dt_override: None,
            output_times: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.dt_override {
            if !(dt > 0.0) {
                return Err(Error::config(format!(
                    "dt_override must be positive, got {dt}"
                )));
            }
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("output_times must be strictly increasing"));
        }
        if self.output_times.iter().any(|&t| t < 0.0 || t > self.t_end) {
            return Err(Error::config("output_times must lie in [0, t_end]"));
        }
        Ok(())
    }
}

/// Time step for `state`: the override when set, otherwise the model's
/// explicit-stability estimate times `cfl`.
pub fn compute_dt(sys: &dyn SemiDiscrete, state: &[f64], cfg: &RunConfig) -> f64 {
    cfg.dt_override
        .unwrap_or_else(|| sys.stable_dt(state, cfg.cfl))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory holds at least one snapshot")
    }
}

/// Fixed-step integration to `t_end`, recording the initial state, every
/// output time, and `t_end`. The step is shortened to land on output times.
/// With no override the step is estimated once from the initial data.
pub fn integrate(
    sys: &dyn SemiDiscrete,
    initial: &[f64],
    tab: &ButcherTableau,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if initial.len() != sys.len() {
        return Err(Error::config(format!(
            "initial state has {} values, system expects {}",
            initial.len(),
            sys.len()
        )));
    }
    let mut state = initial.to_vec();
    let dt = compute_dt(sys, &state, cfg);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("invalid time step {dt}")));
    }
    let mut targets: Vec<f64> = cfg
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .collect();
    if targets.last().map_or(true, |&t| t < cfg.t_end) && cfg.t_end > 0.0 {
        targets.push(cfg.t_end);
    }
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        state: state.clone(),
    }];
    let mut buf = StepBuffers::default();
    let mut t = 0.0;
    let mut steps = 0;
    for &target in &targets {
        loop {
            let remaining = target - t;
            if remaining <= 1e-12 * target.max(1.0) {
                break;
            }
            let h = if remaining < dt * (1.0 + 1e-9) {
                remaining
            } else {
                dt
            };
            if let Err(e) = rk_step(sys, &mut state, h, tab, t, &mut buf) {
                return Err(Error::Aborted {
                    time: t,
                    snapshots: snapshots.len(),
                    source: Box::new(e),
                });
            }
            t = if h == remaining { target } else { t + h };
            steps += 1;
        }
        snapshots.push(Snapshot {
            t: target,
            state: state.clone(),
        });
    }
    Ok(Trajectory { snapshots, steps })
}

struct Decay;

impl SemiDiscrete for Decay {
    fn len(&self) -> usize {
        1
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = -state[0];
        Ok(())
    }

    fn stable_dt(&self, _: &[f64], cfl: f64) -> f64 {
        cfl
    }
}

/// Observed convergence order on `u' = -u`, `u(0) = 1`, `t ∈ [0, 2]`:
/// least-squares slope of `log(error)` against `log(dt)` over step halvings,
/// keeping only errors well above round-off.
pub fn verify_order(tab: &ButcherTableau) -> f64 {
    let t_end = 2.0;
    let exact = (-t_end as f64).exp();
    let mut pts = Vec::new();
    let mut buf = StepBuffers::default();
    for k in 0..12 {
        let n = 2usize << k;
        let dt = t_end / n as f64;
        let mut u = [1.0];
        let mut t = 0.0;
        for _ in 0..n {
            rk_step(&Decay, &mut u, dt, tab, t, &mut buf).expect("finite decay");
            t += dt;
        }
        let err = (u[0] - exact).abs();
        if err < 1e-13 {
            break;
        }
        if dt <= 0.5 {
            pts.push((dt.ln(), err.ln()));
        }
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero(usize);

    impl SemiDiscrete for Zero {
        fn len(&self) -> usize {
            self.0
        }
        fn rhs(&self, _: &[f64], out: &mut [f64]) -> Result<()> {
            out.fill(0.0);
            Ok(())
        }
        fn stable_dt(&self, _: &[f64], cfl: f64) -> f64 {
            cfl
        }
    }

    struct Square;

    impl SemiDiscrete for Square {
        fn len(&self) -> usize {
            1
        }
        fn rhs(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = s[0] * s[0];
            Ok(())
        }
        fn stable_dt(&self, _: &[f64], cfl: f64) -> f64 {
            cfl
        }
    }

    /// R(U) = M U with a fixed 2x2 matrix.
    struct Linear([[f64; 2]; 2]);

    impl SemiDiscrete for Linear {
        fn len(&self) -> usize {
            2
        }
        fn rhs(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.0[0][0] * s[0] + self.0[0][1] * s[1];
            out[1] = self.0[1][0] * s[0] + self.0[1][1] * s[1];
            Ok(())
        }
        fn stable_dt(&self, _: &[f64], cfl: f64) -> f64 {
            cfl
        }
    }

    #[test]
    fn rk4_coefficients() {
        let t = builtin_tableau("rk4").unwrap();
        assert_eq!(t.b, vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        assert_eq!(t.nodes(), vec![0.0, 0.5, 0.5, 1.0]);
        assert!(builtin_tableau("rk10").is_err());
    }

    #[test]
    fn tableaux_are_consistent() {
        for name in ["rk4", "rk6", "rk8"] {
            let t = builtin_tableau(name).unwrap();
            assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for (k, row) in t.a.iter().enumerate() {
                assert_eq!(row.len(), k);
            }
        }
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let mut u = vec![1.0, -2.0, 3.5];
        let mut buf = StepBuffers::default();
        rk_step(&Zero(3), &mut u, 0.3, &ButcherTableau::rk8(), 0.0, &mut buf).unwrap();
        assert_eq!(u, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn rk4_stability_polynomial() {
        let mut u = [1.0];
        let mut buf = StepBuffers::default();
        rk_step(&Decay, &mut u, 0.1, &ButcherTableau::rk4(), 0.0, &mut buf).unwrap();
        let z: f64 = -0.1;
        let amp: f64 = (0..=4)
            .map(|m| z.powi(m) / (1..=m).product::<i32>().max(1) as f64)
            .sum();
        assert!((u[0] - amp).abs() < 1e-15);
    }

    #[test]
    fn rk4_stages_on_riccati() {
        // u' = u², u0 = 1, dt = 0.01: stages by hand.
        let dt = 0.01;
        let k1 = 1.0f64;
        let k2 = (1.0 + 0.5 * dt * k1).powi(2);
        let k3 = (1.0 + 0.5 * dt * k2).powi(2);
        let k4 = (1.0 + dt * k3).powi(2);
        let expect = 1.0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let mut u = [1.0];
        rk_step(
            &Square,
            &mut u,
            dt,
            &ButcherTableau::rk4(),
            0.0,
            &mut StepBuffers::default(),
        )
        .unwrap();
        assert!((u[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn linear_step_is_matrix_polynomial() {
        let m = [[-1.0, 0.5], [0.2, -0.3]];
        let dt = 0.2;
        let u0 = [0.7, -1.1];
        let mut u = u0;
        rk_step(
            &Linear(m),
            &mut u,
            dt,
            &ButcherTableau::rk4(),
            0.0,
            &mut StepBuffers::default(),
        )
        .unwrap();
        // Σ_{k≤4} (dt M)^k / k! applied to u0.
        let mut term = u0;
        let mut acc = u0;
        for k in 1..=4 {
            let next = [
                dt * (m[0][0] * term[0] + m[0][1] * term[1]) / k as f64,
                dt * (m[1][0] * term[0] + m[1][1] * term[1]) / k as f64,
            ];
            term = next;
            acc[0] += term[0];
            acc[1] += term[1];
        }
        assert!((u[0] - acc[0]).abs() < 1e-15 && (u[1] - acc[1]).abs() < 1e-15);
    }

    #[test]
    fn measured_orders() {
        let e = verify_order(&ButcherTableau::forward_euler());
        assert!((e - 1.0).abs() <= 0.1, "{e}");
        let o4 = verify_order(&ButcherTableau::rk4());
        assert!((o4 - 4.0).abs() <= 0.1, "{o4}");
        let o6 = verify_order(&ButcherTableau::rk6());
        assert!((5.8..=6.2).contains(&o6), "{o6}");
        let o8 = verify_order(&ButcherTableau::rk8());
        assert!(o8 >= 7.5, "{o8}");
    }

    #[test]
    fn high_order_on_nonlinear_problem() {
        // u' = u², u(0) = 1 has u(t) = 1/(1 - t); integrate to t = 0.5.
        for (tab, p) in [(ButcherTableau::rk6(), 6.0), (ButcherTableau::rk8(), 8.0)] {
            let err = |n: usize| {
                let dt = 0.5 / n as f64;
                let mut u = [1.0];
                let mut buf = StepBuffers::default();
                for i in 0..n {
                    rk_step(&Square, &mut u, dt, &tab, i as f64 * dt, &mut buf).unwrap();
                }
                (u[0] - 2.0).abs()
            };
            let rate = (err(4) / err(8)).log2();
            assert!(rate > p - 1.0, "{} rate {rate}", tab.name);
        }
    }

    #[test]
    fn integrate_zero_time() {
        let cfg = RunConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let tr = integrate(&Decay, &[1.0], &ButcherTableau::rk4(), &cfg).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0].state, vec![1.0]);
    }

    #[test]
    fn integrate_hits_output_times() {
        let cfg = RunConfig {
            t_end: 1.0,
            dt_override: Some(0.03),
            output_times: vec![0.25, 0.5],
            ..Default::default()
        };
        let tr = integrate(&Decay, &[1.0], &ButcherTableau::rk4(), &cfg).unwrap();
        let ts: Vec<f64> = tr.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.5, 1.0]);
        assert!((tr.last().state[0] - (-1.0f64).exp()).abs() < 1e-7);
        let again = integrate(&Decay, &[1.0], &ButcherTableau::rk4(), &cfg).unwrap();
        assert_eq!(tr, again);
    }

    #[test]
    fn dt_override_passes_through() {
        let cfg = RunConfig {
            dt_override: Some(0.6481),
            ..Default::default()
        };
        assert_eq!(compute_dt(&Decay, &[1.0], &cfg), 0.6481);
    }

    #[test]
    fn invalid_config() {
        let cfg = RunConfig {
            cfl: 1.5,
            ..Default::default()
        };
        assert!(integrate(&Decay, &[1.0], &ButcherTableau::rk4(), &cfg).is_err());
        let cfg = RunConfig {
            output_times: vec![0.5, 0.2],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn blowup_is_reported_with_partial_trajectory() {
        let cfg = RunConfig {
            t_end: 10.0,
            dt_override: Some(0.5),
            output_times: vec![0.5],
            ..Default::default()
        };
        let err = integrate(&Square, &[1.0], &ButcherTableau::rk4(), &cfg).unwrap_err();
        match err {
            Error::Aborted {
                snapshots, source, ..
            } => {
                assert_eq!(snapshots, 2);
                assert!(matches!(*source, Error::Blowup { .. }));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
