//! Experiment configuration, single runs, parameter sweeps and their
//! tabular and plotting outputs.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    classify_structure, entropy_dissipation, exact_kinetic_cubic, mark_saturated, shock_speed_rh,
    AnalysisConfig, WaveReport, WaveStructure,
};
use crate::error::{Error, Result};
use crate::helmholtz::HelmholtzSolver;
use crate::integrate::{builtin_tableau, integrate, RunConfig, Snapshot};
use crate::problem::{ModelSpec, Profile, RiemannProblem, RiemannState};
use crate::psystem::PressureLaw;
use crate::scalar::ThinFilmModel;
use crate::stencil::{Boundary, Grid1D, Order};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cubic,
    ThinFilm,
    CamassaHolm,
    #[serde(rename = "psystem")]
    PSystem,
}

/// Initial profile, either by name (`ini1`, `ini2`) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Full(Profile),
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named("ini1".into())
    }
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Full(p) => Ok(*p),
            ProfileSpec::Named(s) if s == "ini1" || s == "tanh_single" => Ok(Profile::TanhSingle),
            ProfileSpec::Named(s) if s == "ini2" || s == "tanh_double" => Ok(Profile::ini2()),
            ProfileSpec::Named(s) => Err(Error::config(format!("unknown profile '{s}'"))),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_h() -> f64 {
    1.0
}
fn default_n() -> usize {
    1000
}
fn default_q() -> u32 {
    6
}
fn default_cfl() -> f64 {
    0.5
}
fn default_tableau() -> String {
    "rk4".into()
}
fn default_early() -> f64 {
    0.6
}
fn default_tau_l() -> f64 {
    0.9
}
fn default_tau_r() -> f64 {
    4.0
}
fn default_pressure() -> PressureLaw {
    PressureLaw::PiecewiseLinear
}

/// One experiment. Keys follow the usual symbols: `c = eps/h` and
/// `eta = delta/h` may replace `eps` and `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_pressure")]
    pub pressure: PressureLaw,
    #[serde(rename = "u_L", alias = "u_minus")]
    pub u_l: f64,
    #[serde(rename = "u_R", alias = "u_plus")]
    pub u_r: f64,
    #[serde(rename = "tau_L", default = "default_tau_l")]
    pub tau_l: f64,
    #[serde(rename = "tau_R", default = "default_tau_r")]
    pub tau_r: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub x_min: f64,
    /// Defaults to 30% of the domain from the left end.
    #[serde(default)]
    pub x0: Option<f64>,
    /// Defaults to `h`.
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub boundary: Option<Boundary>,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default = "default_tableau")]
    pub tableau: String,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Time of the earlier tracking snapshot as a fraction of `t_end`.
    #[serde(default = "default_early")]
    pub early_fraction: f64,
    #[serde(default)]
    pub tol_plateau: Option<f64>,
    #[serde(default)]
    pub min_width: Option<usize>,
    #[serde(default)]
    pub tol_speed: Option<f64>,
    #[serde(default)]
    pub lax_tol: Option<f64>,
}

impl ExperimentConfig {
    /// Minimal configuration for a model; everything else takes defaults.
    pub fn new(model: ModelKind, u_l: f64, u_r: f64) -> Self {
        let v = serde_json::json!({ "model": model, "u_L": u_l, "u_R": u_r });
        serde_json::from_value(v).expect("minimal configuration")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        serde_json::from_value(v)
            .map_err(|e| Error::config(format!("invalid experiment config: {e}")))
    }

    pub fn order(&self) -> Result<Order> {
        Order::try_from(self.q)
    }

    pub fn analysis(&self) -> AnalysisConfig {
        let d = AnalysisConfig::default();
        AnalysisConfig {
            tol_plateau: self.tol_plateau,
            min_width: self.min_width.unwrap_or(d.min_width),
            tol_speed: self.tol_speed.unwrap_or(d.tol_speed),
            lax_tol: self.lax_tol.unwrap_or(d.lax_tol),
        }
    }

    /// Regularization strength `eps` (or `delta` for the thin film).
    pub fn eps_value(&self) -> Result<f64> {
        let scaled = match self.model {
            ModelKind::ThinFilm => self.delta.or(self.eta.map(|e| e * self.h)),
            _ => self.eps.or(self.c.map(|c| c * self.h)),
        };
        let direct = match self.model {
            ModelKind::ThinFilm => self.eps,
            _ => None,
        };
        scaled.or(direct).ok_or_else(|| {
            Error::config("set eps (or c = eps/h; delta or eta = delta/h for the thin film)")
        })
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let eps = self.eps_value()?;
        let spec = match self.model {
            ModelKind::Cubic => ModelSpec::Cubic {
                eps,
                alpha: self.alpha,
            },
            ModelKind::CamassaHolm => ModelSpec::CamassaHolm {
                eps,
                alpha: self.alpha,
            },
            ModelKind::ThinFilm => ModelSpec::ThinFilm {
                delta: eps,
                u_floor: ThinFilmModel::DEFAULT_FLOOR,
            },
            ModelKind::PSystem => ModelSpec::PSystem {
                pressure: self.pressure,
                eps,
                alpha: self.alpha,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn problem(&self) -> Result<RiemannProblem> {
        let grid = Grid1D::with_spacing(self.x_min, self.h, self.n)?;
        let model = self.model_spec()?;
        let x0 = self.x0.unwrap_or(self.x_min + 0.3 * grid.length());
        let mut p = match self.model {
            ModelKind::PSystem => RiemannProblem::psystem(
                model,
                (self.tau_l, self.u_l),
                (self.tau_r, self.u_r),
                grid,
                x0,
            ),
            _ => RiemannProblem::scalar(model, self.u_l, self.u_r, grid, x0),
        };
        p.width = self.width.unwrap_or(self.h);
        p.profile = self.profile.resolve()?;
        if let Some(b) = self.boundary {
            p.boundary = b;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.order()?;
        builtin_tableau(&self.tableau)?;
        if !(self.early_fraction > 0.0 && self.early_fraction < 1.0) {
            return Err(Error::config(format!(
                "early_fraction must lie in (0, 1), got {}",
                self.early_fraction
            )));
        }
        self.problem().map(|_| ())
    }
}

/// Applies `key=value` overrides to a JSON config. Values are parsed as JSON
/// and fall back to plain strings; dotted keys address nested objects.
pub fn apply_overrides(config: &mut Value, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        let mut node = &mut *config;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::config(format!(
                    "cannot set '{key}': '{part}' is not inside an object"
                ))
            })?;
            if k + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Splits `--key=value` arguments into pairs.
pub fn parse_override_args<S: AsRef<str>>(args: &[S]) -> Result<Vec<(String, String)>> {
    args.iter()
        .map(|a| {
            let a = a.as_ref();
            let body = a.strip_prefix("--").unwrap_or(a);
            body.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| {
                    Error::config(format!("override '{a}' is not of the form --key=value"))
                })
        })
        .collect()
}

/// One row of a kinetic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticSample {
    pub model: String,
    pub profile_id: String,
    pub q: u32,
    pub alpha: f64,
    pub eps: f64,
    pub h: f64,
    pub c: f64,
    pub u_minus: Option<f64>,
    pub u_plus: Option<f64>,
    pub speed: Option<f64>,
    pub dissipation: Option<f64>,
    pub exact_u_plus: Option<f64>,
    pub abs_error: Option<f64>,
    pub structure: WaveStructure,
    pub t_end: f64,
    pub status: String,
}

pub const CSV_HEADER: [&str; 16] = [
    "model",
    "profile_id",
    "q",
    "alpha",
    "eps",
    "h",
    "c",
    "u_minus",
    "u_plus",
    "speed",
    "dissipation",
    "exact_u_plus",
    "abs_error",
    "structure",
    "t_end",
    "status",
];

impl KineticSample {
    fn from_report(
        problem: &RiemannProblem,
        q: Order,
        report: &WaveReport,
        t_end: f64,
        status: String,
    ) -> Self {
        let (eps, alpha) = (problem.model.eps(), problem.model.alpha());
        let h = problem.grid.h();
        let pair = report.kinetic_pair;
        let flux = problem.model.flux();
        let speed = match (pair, flux) {
            (Some((a, b)), Some(f)) => shock_speed_rh(a, b, f).ok(),
            (Some(_), None) => report.front_speed(),
            _ => None,
        };
        let dissipation = match (pair, flux) {
            (Some((a, b)), Some(f)) => Some(entropy_dissipation(a, b, f)),
            _ => None,
        };
        let exact_u_plus = match (problem.model, pair) {
            (ModelSpec::Cubic { alpha, .. }, Some((a, _))) if alpha > 0.0 => {
                exact_kinetic_cubic(a, alpha).ok()
            }
            _ => None,
        };
        let abs_error = match (exact_u_plus, pair) {
            (Some(e), Some((_, b))) => Some((b - e).abs()),
            _ => None,
        };
        Self {
            model: problem.model.name().into(),
            profile_id: problem.profile.id().into(),
            q: q.value(),
            alpha,
            eps,
            h,
            c: eps / h,
            u_minus: pair.map(|p| p.0),
            u_plus: pair.map(|p| p.1),
            speed,
            dissipation,
            exact_u_plus,
            abs_error,
            structure: report.structure,
            t_end,
            status,
        }
    }
}

/// Everything produced by one run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: WaveReport,
    pub sample: KineticSample,
    pub final_snapshot: Option<Snapshot>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub error: Option<Error>,
}

/// Integrates a problem and analyses its last two snapshots. Numerical
/// failures are folded into an unresolved report; configuration errors are
/// returned.
pub fn run_problem(
    problem: &RiemannProblem,
    q: Order,
    tableau: &str,
    run: &RunConfig,
    early_fraction: f64,
    analysis: &AnalysisConfig,
) -> Result<RunOutcome> {
    problem.validate()?;
    let tab = builtin_tableau(tableau)?;
    let scheme = problem.scheme(q, Arc::new(HelmholtzSolver::new()))?;
    let (working, shift) = velocity_frame(problem);
    let initial = working.initial_data()?;
    let mut cfg = run.clone();
    cfg.output_times = vec![early_fraction * run.t_end];
    cfg.validate()?;
    match integrate(scheme.as_ref(), &initial, &tab, &cfg) {
        Ok(mut traj) => {
            if shift != 0.0 {
                let n = problem.grid.len();
                for snap in &mut traj.snapshots {
                    snap.state[n..].iter_mut().for_each(|u| *u += shift);
                }
            }
            let report = classify_structure(&traj.snapshots, problem, analysis)?;
            let status = if report.structure == WaveStructure::Unresolved {
                format!("unresolved: {}", report.diagnostics.join("; "))
            } else {
                "ok".to_string()
            };
            let sample = KineticSample::from_report(problem, q, &report, run.t_end, status);
            Ok(RunOutcome {
                report,
                sample,
                final_snapshot: traj.snapshots.last().cloned(),
                steps: traj.steps,
                snapshots: traj.snapshots,
                error: None,
            })
        }
        Err(e) if e.exit_code() == 2 => {
            let report = WaveReport::failed(e.to_string());
            let sample =
                KineticSample::from_report(problem, q, &report, run.t_end, format!("failed: {e}"));
            Ok(RunOutcome {
                report,
                sample,
                final_snapshot: None,
                snapshots: Vec::new(),
                steps: 0,
                error: Some(e),
            })
        }
        Err(e) => Err(e),
    }
}

/// The p-system sees `u` only through differences, so it is integrated in the
/// frame of the right velocity. Data shifted by a constant then go through the
/// same arithmetic on `τ` whenever `u_L - u_R` rounds to the same value.
fn velocity_frame(problem: &RiemannProblem) -> (RiemannProblem, f64) {
    match (problem.left, problem.right) {
        (RiemannState::Pair { tau: tl, u: ul }, RiemannState::Pair { tau: tr, u: ur }) => {
            let mut p = problem.clone();
            p.left = RiemannState::Pair {
                tau: tl,
                u: ul - ur,
            };
            p.right = RiemannState::Pair { tau: tr, u: 0.0 };
            (p, ur)
        }
        _ => (problem.clone(), 0.0),
    }
}

/// Runs one configured experiment.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let run = RunConfig {
        cfl: cfg.cfl,
        t_end: cfg.t_end.unwrap_or_else(|| problem.auto_t_end()),
        dt_override: cfg.dt,
        output_times: Vec::new(),
    };
    run_problem(
        &problem,
        cfg.order()?,
        &cfg.tableau,
        &run,
        cfg.early_fraction,
        &cfg.analysis(),
    )
}

/// Values of the swept parameter, listed or as an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValues {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl SweepValues {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            SweepValues::List(ref v) => v.clone(),
            SweepValues::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Config key that is varied, e.g. `u_L`, `alpha`, `c` or `eta`.
    pub param: String,
    pub values: SweepValues,
    /// Orders to run; defaults to the base config's `q`.
    #[serde(default)]
    pub q_list: Vec<u32>,
    pub base: Value,
    #[serde(default)]
    pub output: Option<String>,
    /// Run rows on the rayon thread pool.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid sweep config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values.values();
        if v.is_empty() {
            return Err(Error::config("sweep has no values"));
        }
        let up = v.windows(2).all(|w| w[1] > w[0]);
        let down = v.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(
                "sweep values must be finite and strictly monotone",
            ));
        }
        for &q in &self.q_list {
            Order::try_from(q)?;
        }
        for (x, _) in self.points() {
            self.config_for(x, None)?.validate()?;
        }
        Ok(())
    }

    fn points(&self) -> Vec<(f64, Option<u32>)> {
        let qs: Vec<Option<u32>> = if self.q_list.is_empty() {
            vec![None]
        } else {
            self.q_list.iter().copied().map(Some).collect()
        };
        let mut vals = self.values.values();
        vals.sort_by(f64::total_cmp);
        vals.into_iter()
            .flat_map(|x| qs.iter().map(move |&q| (x, q)))
            .collect()
    }

    pub fn config_for(&self, x: f64, q: Option<u32>) -> Result<ExperimentConfig> {
        let mut v = self.base.clone();
        let obj = v
            .as_object_mut()
            .ok_or_else(|| Error::config("sweep base must be a JSON object"))?;
        obj.insert(self.param.clone(), Value::from(x));
        if let Some(q) = q {
            obj.insert("q".into(), Value::from(q));
        }
        ExperimentConfig::from_value(v)
    }
}

/// Sweep rows in swept-value order, plus the swept values themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: String,
    pub values: Vec<f64>,
    pub table: Vec<KineticSample>,
}

impl SweepResult {
    /// Monotonicity of `u_plus` (or `u_minus` when `u_plus` is the swept
    /// datum) over successfully resolved rows, per order.
    pub fn monotonicity(&self) -> Vec<Monotonicity> {
        let mut qs: Vec<u32> = self.table.iter().map(|r| r.q).collect();
        qs.sort_unstable();
        qs.dedup();
        qs.into_iter()
            .map(|q| {
                let ys: Vec<f64> = self
                    .table
                    .iter()
                    .zip(&self.values)
                    .filter(|(r, _)| r.q == q && r.structure.has_nonclassical())
                    .filter_map(|(r, _)| kinetic_ordinate(r))
                    .collect();
                Monotonicity::of(q, &ys)
            })
            .collect()
    }
}

/// The kinetic value a row contributes: `u_plus` from a left datum, or
/// `u_minus` for the thin film, whose right datum is `u_plus`.
pub fn kinetic_ordinate(r: &KineticSample) -> Option<f64> {
    if r.model == "thin_film" {
        r.u_minus
    } else {
        r.u_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    StrictlyIncreasing,
    StrictlyDecreasing,
    NonMonotone,
    TooFewPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub q: u32,
    pub points: usize,
    pub trend: Trend,
}

impl Monotonicity {
    pub fn of(q: u32, ys: &[f64]) -> Self {
        let trend = if ys.len() < 2 {
            Trend::TooFewPoints
        } else if ys.windows(2).all(|w| w[1] > w[0]) {
            Trend::StrictlyIncreasing
        } else if ys.windows(2).all(|w| w[1] < w[0]) {
            Trend::StrictlyDecreasing
        } else {
            Trend::NonMonotone
        };
        Self {
            q,
            points: ys.len(),
            trend,
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q = {}: {:?} over {} resolved point(s)",
            self.q, self.trend, self.points
        )
    }
}

/// Runs every (value, q) point; failures become rows, never abort the sweep.
pub fn sweep_kinetic(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.points();
    let run_one = |&(x, q): &(f64, Option<u32>)| -> Result<KineticSample> {
        let exp = cfg.config_for(x, q)?;
        Ok(run_single(&exp)?.sample)
    };
    let rows: Vec<Result<KineticSample>> = if cfg.parallel {
        points.par_iter().map(run_one).collect()
    } else {
        points.iter().map(run_one).collect()
    };
    let table = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        param: cfg.param.clone(),
        values: points.iter().map(|p| p.0).collect(),
        table,
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn write_table<W: Write>(out: W, table: &[KineticSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in table {
        w.write_record([
            r.model.clone(),
            r.profile_id.clone(),
            r.q.to_string(),
            fmt_num(r.alpha),
            fmt_num(r.eps),
            fmt_num(r.h),
            fmt_num(r.c),
            fmt_opt(r.u_minus),
            fmt_opt(r.u_plus),
            fmt_opt(r.speed),
            fmt_opt(r.dissipation),
            fmt_opt(r.exact_u_plus),
            fmt_opt(r.abs_error),
            r.structure.to_string(),
            fmt_num(r.t_end),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn table_to_string(table: &[KineticSample]) -> Result<String> {
    let mut buf = Vec::new();
    write_table(&mut buf, table)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_table<R: Read>(input: R) -> Result<Vec<KineticSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::config(format!(
            "unexpected kinetic table header: {}",
            header.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_table_file(path: &Path, table: &[KineticSample]) -> Result<()> {
    write_table(std::fs::File::create(path)?, table)
}

pub fn read_table_file(path: &Path) -> Result<Vec<KineticSample>> {
    read_table(std::fs::File::open(path)?)
}

/// Per-order error statistics against the exact cubic kinetic function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderErrors {
    pub q: u32,
    pub rows: usize,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactComparison {
    pub per_q: Vec<OrderErrors>,
    /// Whether the maximum error is non-increasing as `q` grows.
    pub verdict: Verdict,
}

impl fmt::Display for ExactComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.per_q {
            writeln!(
                f,
                "q = {:2}: {} row(s), max |error| = {:.6e}, mean |error| = {:.6e}",
                e.q, e.rows, e.max_abs_error, e.mean_abs_error
            )?;
        }
        write!(f, "monotone in q: {:?}", self.verdict)
    }
}

/// Compares a cubic-model table with the exact kinetic function at `alpha`.
/// Rows whose stored `alpha` differs are ignored.
pub fn compare_exact(table: &[KineticSample], alpha: f64) -> ExactComparison {
    let rows: Vec<&KineticSample> = table
        .iter()
        .filter(|r| r.model == "cubic" && r.alpha == alpha && r.structure.has_nonclassical())
        .collect();
    if rows.is_empty() || alpha <= 0.0 {
        return ExactComparison {
            per_q: Vec::new(),
            verdict: Verdict::NotApplicable,
        };
    }
    let mut qs: Vec<u32> = rows.iter().map(|r| r.q).collect();
    qs.sort_unstable();
    qs.dedup();
    let per_q: Vec<OrderErrors> = qs
        .into_iter()
        .map(|q| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.q == q)
                .filter_map(|r| {
                    let (um, up) = (r.u_minus?, r.u_plus?);
                    Some((up - exact_kinetic_cubic(um, alpha).ok()?).abs())
                })
                .collect();
            OrderErrors {
                q,
                rows: errs.len(),
                max_abs_error: errs.iter().copied().fold(0.0, f64::max),
                mean_abs_error: errs.iter().sum::<f64>() / errs.len().max(1) as f64,
            }
        })
        .collect();
    let verdict = if per_q
        .windows(2)
        .all(|w| w[1].max_abs_error <= w[0].max_abs_error)
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ExactComparison { per_q, verdict }
}

/// Value of the swept parameter minimising `abs_error`, per order.
pub fn argmin_error(result: &SweepResult) -> Vec<(u32, f64, f64)> {
    let mut best: Vec<(u32, f64, f64)> = Vec::new();
    for (r, &x) in result.table.iter().zip(&result.values) {
        let Some(e) = r.abs_error else { continue };
        match best.iter_mut().find(|b| b.0 == r.q) {
            Some(b) if e < b.2 => *b = (r.q, x, e),
            Some(_) => {}
            None => best.push((r.q, x, e)),
        }
    }
    best.sort_by_key(|b| b.0);
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Kinetic,
    DissipationVsSpeed,
    WaveStructure,
}

impl std::str::FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinetic" => Ok(FigureKind::Kinetic),
            "dissipation_vs_speed" | "dissipation" => Ok(FigureKind::DissipationVsSpeed),
            "wave_structure" => Ok(FigureKind::WaveStructure),
            _ => Err(Error::config(format!("unknown figure kind '{s}'"))),
        }
    }
}

fn column(name: &str) -> usize {
    CSV_HEADER
        .iter()
        .position(|c| *c == name)
        .expect("known column")
        + 1
}

/// Gnuplot script for a table (or, for `wave_structure`, a field dump) at
/// `data_path`, relative to where the script is run.
pub fn emit_gnuplot(data_path: &str, table: &[KineticSample], kind: FigureKind) -> Result<String> {
    if kind != FigureKind::WaveStructure && table.is_empty() {
        return Err(Error::config("cannot plot an empty table"));
    }
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key top right\nset grid\n");
    let (um, up, ex) = (column("u_minus"), column("u_plus"), column("exact_u_plus"));
    let (sp, di) = (column("speed"), column("dissipation"));
    match kind {
        FigureKind::Kinetic => {
            let thin = table.iter().all(|r| r.model == "thin_film");
            let (x, y, xl, yl) = if thin {
                (up, um, "u_+", "u_-")
            } else {
                (um, up, "u_-", "u_+")
            };
            s.push_str(&format!("set xlabel '{xl}'\nset ylabel '{yl}'\n"));
            s.push_str(&format!(
                "plot '{data_path}' every ::1 using {x}:{y} with linespoints title 'numerical'"
            ));
            if table.iter().any(|r| r.exact_u_plus.is_some()) {
                s.push_str(&format!(
                    ", \\\n     '{data_path}' every ::1 using {um}:{ex} with lines title 'exact'"
                ));
            }
            s.push('\n');
        }
        FigureKind::DissipationVsSpeed => {
            s.push_str("set xlabel 's'\nset ylabel 'phi(s)/s^2'\n");
            s.push_str(&format!(
                "plot '{data_path}' every ::1 using {sp}:(${di}/(${sp}**2)) with linespoints title 'scaled dissipation'\n"
            ));
        }
        FigureKind::WaveStructure => {
            s = String::from("set key top right\nset grid\nset xlabel 'x'\nset ylabel 'u'\n");
            s.push_str(&format!(
                "plot '{data_path}' using 1:2 with lines title 'solution'\n"
            ));
        }
    }
    Ok(s)
}

/// Whitespace-separated columns `x v1 [v2]` for every node.
pub fn write_field_dump<W: Write>(mut out: W, grid: &Grid1D, state: &[f64]) -> Result<()> {
    let n = grid.len();
    let comps = state.len() / n.max(1);
    if comps == 0 || comps * n != state.len() {
        return Err(Error::config(
            "state length is not a multiple of the grid size",
        ));
    }
    for i in 0..n {
        write!(out, "{}", fmt_num(grid.x(i)))?;
        for c in 0..comps {
            write!(out, " {}", fmt_num(state[c * n + i]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One point of a p-system regime scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePoint {
    pub u_l: f64,
    pub report: WaveReport,
}

/// Runs the base p-system config for each `u_L` (in decreasing order) and
/// marks points whose kinetic pair has stopped changing as saturated.
pub fn regime_scan(
    base: &ExperimentConfig,
    u_ls: &[f64],
    parallel: bool,
) -> Result<Vec<RegimePoint>> {
    if base.model != ModelKind::PSystem {
        return Err(Error::config("regime scans need the psystem model"));
    }
    let mut u_ls = u_ls.to_vec();
    u_ls.sort_by(|a, b| b.total_cmp(a));
    u_ls.dedup();
    let run_one = |&u_l: &f64| -> Result<WaveReport> {
        let mut cfg = base.clone();
        cfg.u_l = u_l;
        Ok(run_single(&cfg)?.report)
    };
    let reports: Vec<Result<WaveReport>> = if parallel {
        u_ls.par_iter().map(run_one).collect()
    } else {
        u_ls.iter().map(run_one).collect()
    };
    let mut reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let tol = base.analysis().plateau_tol(base.tau_l, base.tau_r);
    mark_saturated(&mut reports, tol);
    Ok(u_ls
        .into_iter()
        .zip(reports)
        .map(|(u_l, report)| RegimePoint { u_l, report })
        .collect())
}

pub const REGIME_HEADER: [&str; 5] = ["u_L", "tau_minus", "tau_plus", "speed", "structure"];

pub fn write_regimes<W: Write>(out: W, points: &[RegimePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGIME_HEADER)?;
    for p in points {
        let (a, b) = p.report.kinetic_pair.unzip();
        w.write_record([
            fmt_num(p.u_l),
            fmt_opt(a),
            fmt_opt(b),
            fmt_opt(p.report.front_speed()),
            p.report.structure.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(q: u32, um: f64, up: f64) -> KineticSample {
        let exact = exact_kinetic_cubic(um, 6.0).unwrap();
        KineticSample {
            model: "cubic".into(),
            profile_id: "ini1".into(),
            q,
            alpha: 6.0,
            eps: 0.05,
            h: 0.005,
            c: 10.0,
            u_minus: Some(um),
            u_plus: Some(up),
            speed: Some(shock_speed_rh(um, up, crate::scalar::Flux::Cubic).unwrap()),
            dissipation: Some(crate::analysis::entropy_dissipation_cubic(um, up)),
            exact_u_plus: Some(exact),
            abs_error: Some((up - exact).abs()),
            structure: WaveStructure::DoubleShock,
            t_end: 0.5,
            status: "ok, with a comma".into(),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = vec![
            sample(4, 2.0, -1.8074123456789012),
            sample(6, 2.0, 0.1 + 0.2),
        ];
        t.push(KineticSample {
            u_minus: None,
            u_plus: None,
            speed: None,
            dissipation: None,
            exact_u_plus: None,
            abs_error: None,
            structure: WaveStructure::Unresolved,
            status: "failed: blow-up".into(),
            ..sample(8, 1.0, 0.5)
        });
        let text = table_to_string(&t).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let back = read_table(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(table_to_string(&back).unwrap(), text);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_table("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn compare_exact_cases() {
        let exact = exact_kinetic_cubic(2.0, 6.0).unwrap();
        let t = vec![sample(4, 2.0, exact), sample(6, 2.0, exact)];
        let c = compare_exact(&t, 6.0);
        assert!(c.per_q.iter().all(|e| e.max_abs_error == 0.0));
        assert_eq!(c.verdict, Verdict::Pass);

        let t = vec![
            sample(4, 2.0, exact + 0.1),
            sample(6, 2.0, exact + 0.05),
            sample(8, 2.0, exact + 0.01),
        ];
        assert_eq!(compare_exact(&t, 6.0).verdict, Verdict::Pass);
        let t = vec![sample(4, 2.0, exact + 0.01), sample(6, 2.0, exact + 0.05)];
        assert_eq!(compare_exact(&t, 6.0).verdict, Verdict::Fail);

        let mut thin = sample(6, 0.5, 0.1);
        thin.model = "thin_film".into();
        assert_eq!(compare_exact(&[thin], 6.0).verdict, Verdict::NotApplicable);
    }

    #[test]
    fn gnuplot_scripts() {
        let t = vec![sample(4, 2.0, -1.8), sample(4, 3.0, -2.8)];
        let k = emit_gnuplot("table.csv", &t, FigureKind::Kinetic).unwrap();
        assert!(k.contains("using 8:9") && k.contains("using 8:12"));
        let d = emit_gnuplot("table.csv", &t, FigureKind::DissipationVsSpeed).unwrap();
        assert!(d.contains("using 10:($11/($10**2))"));
        let w = emit_gnuplot("field.dat", &[], FigureKind::WaveStructure).unwrap();
        assert!(w.contains("'field.dat' using 1:2"));
        assert!(emit_gnuplot("t.csv", &[], FigureKind::Kinetic).is_err());
    }

    #[test]
    fn overrides_set_nested_and_typed_values() {
        let mut v = serde_json::json!({"model": "cubic", "u_L": 2.0});
        let o = parse_override_args(&["--alpha=6", "--profile=ini2", "--values.count=3"]).unwrap();
        apply_overrides(&mut v, &o).unwrap();
        assert_eq!(v["alpha"], 6);
        assert_eq!(v["profile"], "ini2");
        assert_eq!(v["values"]["count"], 3);
        assert!(parse_override_args(&["--alpha"]).is_err());
    }

    #[test]
    fn config_parsing_and_scaling() {
        let c = ExperimentConfig::from_json(
            r#"{"model":"cubic","u_minus":2,"u_plus":-1,"c":10,"h":0.005,"alpha":6}"#,
        )
        .unwrap();
        assert_eq!((c.u_l, c.u_r), (2.0, -1.0));
        assert!((c.eps_value().unwrap() - 0.05).abs() < 1e-15);
        let t = ExperimentConfig::from_json(
            r#"{"model":"thin_film","u_L":0.5,"u_R":0.1,"eta":0.1,"x0":100}"#,
        )
        .unwrap();
        assert!((t.eps_value().unwrap() - 0.1).abs() < 1e-15);
        t.validate().unwrap();
        assert!(
            ExperimentConfig::from_json(r#"{"model":"cubic","u_L":1,"u_R":0,"bogus":1}"#).is_err()
        );
        let no_eps = ExperimentConfig::new(ModelKind::Cubic, 1.0, 0.0);
        assert!(matches!(no_eps.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_validation() {
        let base =
            serde_json::json!({"model":"cubic","u_L":2,"u_R":-1,"c":10,"h":0.01,"n":200,"x0":0.6});
        let ok = SweepConfig {
            param: "u_L".into(),
            values: SweepValues::Range {
                start: 1.0,
                stop: 2.0,
                count: 3,
            },
            q_list: vec![4, 6],
            base: base.clone(),
            output: None,
            parallel: false,
        };
        ok.validate().unwrap();
        assert_eq!(ok.points().len(), 6);
        let bad = SweepConfig {
            values: SweepValues::List(vec![1.0, 1.0]),
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let empty = SweepConfig {
            values: SweepValues::List(vec![]),
            ..ok.clone()
        };
        assert!(empty.validate().is_err());
        let badq = SweepConfig {
            q_list: vec![5],
            ..ok
        };
        assert!(badq.validate().is_err());
    }

    #[test]
    fn monotonicity_summary() {
        assert_eq!(
            Monotonicity::of(4, &[3.0, 2.0, 1.0]).trend,
            Trend::StrictlyDecreasing
        );
        assert_eq!(
            Monotonicity::of(4, &[1.0, 2.0]).trend,
            Trend::StrictlyIncreasing
        );
        assert_eq!(
            Monotonicity::of(4, &[1.0, 2.0, 2.0]).trend,
            Trend::NonMonotone
        );
        assert_eq!(Monotonicity::of(4, &[1.0]).trend, Trend::TooFewPoints);
    }

    #[test]
    fn field_dump_columns() {
        let g = Grid1D::with_spacing(0.0, 0.5, 12).unwrap();
        let state: Vec<f64> = (1..=24).map(f64::from).collect();
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &g, &state).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0], vec![0.0, 1.0, 13.0]);
        assert_eq!(rows[11], vec![5.5, 12.0, 24.0]);
        assert!(write_field_dump(Vec::new(), &g, &[1.0, 2.0]).is_err());
    }
}
