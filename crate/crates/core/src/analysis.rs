//! Wave-structure analysis of Riemann-problem snapshots: plateaus, front
//! tracking, shock admissibility and reference kinetic functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Snapshot;
use crate::problem::{ModelSpec, RiemannProblem};
use crate::scalar::Flux;

pub const DEFAULT_MIN_WIDTH: usize = 10;

/// A maximal run of nearly constant nodal values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub i_start: usize,
    /// Inclusive.
    pub i_end: usize,
    pub value: f64,
    pub width: usize,
}

/// Maximal runs of at least `min_width` nodes whose spread `max - min` stays
/// within `tol`, scanned greedily left to right.
pub fn detect_plateaus(field: &[f64], tol: f64, min_width: usize) -> Vec<Plateau> {
    let n = field.len();
    let min_width = min_width.max(1);
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let (mut lo, mut hi) = (field[i], field[i]);
        let mut j = i + 1;
        while j < n {
            let v = field[j];
            if hi.max(v) - lo.min(v) > tol {
                break;
            }
            lo = lo.min(v);
            hi = hi.max(v);
            j += 1;
        }
        let width = j - i;
        if width >= min_width {
            let value = field[i..j].iter().sum::<f64>() / width as f64;
            out.push(Plateau {
                i_start: i,
                i_end: j - 1,
                value,
                width,
            });
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveStructure {
    ClassicalOnly,
    RarefactionPlusNonclassical,
    DoubleShock,
    StationaryShock,
    MovingNonclassical,
    SaturatedNonclassical,
    Unresolved,
}

impl WaveStructure {
    pub const ALL: [WaveStructure; 7] = [
        WaveStructure::ClassicalOnly,
        WaveStructure::RarefactionPlusNonclassical,
        WaveStructure::DoubleShock,
        WaveStructure::StationaryShock,
        WaveStructure::MovingNonclassical,
        WaveStructure::SaturatedNonclassical,
        WaveStructure::Unresolved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WaveStructure::ClassicalOnly => "classical_only",
            WaveStructure::RarefactionPlusNonclassical => "rarefaction_plus_nonclassical",
            WaveStructure::DoubleShock => "double_shock",
            WaveStructure::StationaryShock => "stationary_shock",
            WaveStructure::MovingNonclassical => "moving_nonclassical",
            WaveStructure::SaturatedNonclassical => "saturated_nonclassical",
            WaveStructure::Unresolved => "unresolved",
        }
    }

    pub fn has_nonclassical(self) -> bool {
        !matches!(
            self,
            WaveStructure::ClassicalOnly | WaveStructure::Unresolved
        )
    }
}

impl fmt::Display for WaveStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveStructure::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown wave structure '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockType {
    /// Satisfies the Lax inequalities.
    Classical,
    /// Shock speed on the same side of both characteristic speeds.
    Undercompressive,
    /// Characteristics diverge from the front.
    NonEntropic,
}

/// Rankine-Hugoniot speed `[f]/[u]`.
pub fn shock_speed_rh(u_minus: f64, u_plus: f64, flux: Flux) -> Result<f64> {
    if u_minus == u_plus {
        return Err(Error::DegenerateShock(u_minus));
    }
    let (a, b) = (u_minus, u_plus);
    Ok(match flux {
        Flux::Cubic => a * a + a * b + b * b,
        Flux::ThinFilm => a + b - (a * a + a * b + b * b),
    })
}

pub fn lax_check(u_minus: f64, u_plus: f64, flux: Flux) -> ShockType {
    lax_check_tol(u_minus, u_plus, flux, 0.0)
}

/// Lax classification with the inequalities relaxed by `rel_tol` times the
/// largest of the three speeds involved.
pub fn lax_check_tol(u_minus: f64, u_plus: f64, flux: Flux, rel_tol: f64) -> ShockType {
    let Ok(s) = shock_speed_rh(u_minus, u_plus, flux) else {
        return ShockType::Classical;
    };
    let (a, b) = (flux.df(u_minus), flux.df(u_plus));
    let tol = rel_tol * a.abs().max(b.abs()).max(s.abs());
    if a + tol >= s && s >= b - tol {
        ShockType::Classical
    } else if s < a.min(b) || s > a.max(b) {
        ShockType::Undercompressive
    } else {
        ShockType::NonEntropic
    }
}

/// `(u₊ - u₋)²(u₊² - u₋²)` for the cubic flux.
pub fn entropy_dissipation_cubic(u_minus: f64, u_plus: f64) -> f64 {
    let d = u_plus - u_minus;
    d * d * (u_plus * u_plus - u_minus * u_minus)
}

/// Sign of the quartic term in the thin-film dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarticSign {
    /// `-(3/4)Δu⁴`, which vanishes on `u₊ = 2/3 - u₋`.
    #[default]
    Corrected,
    /// `+(3/4)Δu⁴`.
    Printed,
}

pub fn entropy_dissipation_thin_film(u_minus: f64, u_plus: f64) -> f64 {
    entropy_dissipation_thin_film_with(u_minus, u_plus, QuarticSign::Corrected)
}

pub fn entropy_dissipation_thin_film_with(u_minus: f64, u_plus: f64, sign: QuarticSign) -> f64 {
    let Ok(lambda) = shock_speed_rh(u_minus, u_plus, Flux::ThinFilm) else {
        return 0.0;
    };
    let (a, b) = (u_minus, u_plus);
    let quartic = 0.75 * (b.powi(4) - a.powi(4));
    let quartic = match sign {
        QuarticSign::Corrected => -quartic,
        QuarticSign::Printed => quartic,
    };
    -0.5 * lambda * (b * b - a * a) + 2.0 / 3.0 * (b.powi(3) - a.powi(3)) + quartic
}

/// Entropy dissipation of a scalar jump for the model's flux.
pub fn entropy_dissipation(u_minus: f64, u_plus: f64, flux: Flux) -> f64 {
    match flux {
        Flux::Cubic => entropy_dissipation_cubic(u_minus, u_plus),
        Flux::ThinFilm => entropy_dissipation_thin_film(u_minus, u_plus),
    }
}

/// Interval with optional closed ends; `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed {
            v >= self.lo
        } else {
            v > self.lo
        };
        let below = if self.hi_closed {
            v <= self.hi
        } else {
            v < self.hi
        };
        above && below
    }
}

/// Admissible right states of a shock from a fixed left state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSet {
    pub interval: Interval,
    pub isolated: Option<f64>,
}

impl ShockSet {
    pub fn contains(&self, v: f64) -> bool {
        self.interval.contains(v) || self.isolated == Some(v)
    }
}

/// Kinetic function of the cubic flux with linear viscosity and capillarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactKineticCubic {
    pub alpha: f64,
    pub abar: f64,
}

impl ExactKineticCubic {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!(
                "exact kinetic function needs alpha > 0, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            abar: (8.0 / (3.0 * alpha)).sqrt(),
        })
    }

    pub fn phi(&self, u_minus: f64) -> f64 {
        let a = self.abar;
        if u_minus >= a {
            -u_minus + a / 2.0
        } else if u_minus <= -a {
            -u_minus - a / 2.0
        } else {
            -u_minus / 2.0
        }
    }

    pub fn shock_set(&self, u_minus: f64) -> ShockSet {
        let a = self.abar;
        if u_minus >= a {
            ShockSet {
                interval: Interval {
                    lo: -a / 2.0,
                    hi: u_minus,
                    lo_closed: true,
                    hi_closed: false,
                },
                isolated: Some(-u_minus + a / 2.0),
            }
        } else if u_minus <= -a {
            ShockSet {
                interval: Interval {
                    lo: u_minus,
                    hi: a / 2.0,
                    lo_closed: false,
                    hi_closed: true,
                },
                isolated: Some(-u_minus - a / 2.0),
            }
        } else if u_minus >= 0.0 {
            ShockSet {
                interval: Interval {
                    lo: -u_minus / 2.0,
                    hi: u_minus,
                    lo_closed: true,
                    hi_closed: false,
                },
                isolated: None,
            }
        } else {
            ShockSet {
                interval: Interval {
                    lo: u_minus,
                    hi: -u_minus / 2.0,
                    lo_closed: false,
                    hi_closed: true,
                },
                isolated: None,
            }
        }
    }
}

pub fn exact_kinetic_cubic(u_minus: f64, alpha: f64) -> Result<f64> {
    Ok(ExactKineticCubic::new(alpha)?.phi(u_minus))
}

pub fn shock_set_cubic(u_minus: f64, alpha: f64) -> Result<ShockSet> {
    Ok(ExactKineticCubic::new(alpha)?.shock_set(u_minus))
}

/// Tangent point `(1 - u)/2` of the thin-film flux, for `u ∈ (0, 1)`.
pub fn thin_film_tangent(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutOfRange {
            name: "thin_film_tangent",
            value: u,
            range: "(0, 1)",
        });
    }
    Ok((1.0 - u) / 2.0)
}

/// Zero-dissipation point `2/3 - u` of the thin-film flux, for `u ∈ (0, 2/3)`.
pub fn thin_film_zero_dissipation(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 2.0 / 3.0) {
        return Err(Error::OutOfRange {
            name: "thin_film_zero_dissipation",
            value: u,
            range: "(0, 2/3)",
        });
    }
    Ok(2.0 / 3.0 - u)
}

/// Thresholds used when reading wave structures off a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Plateau spread; `None` means `1e-3 (|u_L| + |u_R|)`.
    pub tol_plateau: Option<f64>,
    pub min_width: usize,
    /// Fronts slower than this are stationary.
    pub tol_speed: f64,
    /// Relative slack in the Lax inequalities.
    pub lax_tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tol_plateau: None,
            min_width: DEFAULT_MIN_WIDTH,
            tol_speed: 0.05,
            lax_tol: 0.01,
        }
    }
}

impl AnalysisConfig {
    pub fn plateau_tol(&self, left: f64, right: f64) -> f64 {
        self.tol_plateau
            .unwrap_or(1e-3 * (left.abs() + right.abs()))
            .max(1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "shock", rename_all = "snake_case")]
pub enum WaveKind {
    Fan,
    Shock(ShockType),
}

/// One wave between two states, located at the final snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub i_start: usize,
    pub i_end: usize,
    pub left: f64,
    pub right: f64,
    pub kind: WaveKind,
    /// Measured speed of the mid-value crossing.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub structure: WaveStructure,
    pub plateaus: Vec<Plateau>,
    pub waves: Vec<Wave>,
    /// Index into `waves` of the front carrying the kinetic pair.
    pub kinetic_wave: Option<usize>,
    pub kinetic_pair: Option<(f64, f64)>,
    pub speeds: Vec<f64>,
    pub dissipation: Option<f64>,
    /// Largest excursion outside the range of the plateau values.
    pub oscillation: f64,
    pub diagnostics: Vec<String>,
}

impl WaveReport {
    fn unresolved(plateaus: Vec<Plateau>, oscillation: f64, why: String) -> Self {
        Self {
            structure: WaveStructure::Unresolved,
            plateaus,
            waves: Vec::new(),
            kinetic_wave: None,
            kinetic_pair: None,
            speeds: Vec::new(),
            dissipation: None,
            oscillation,
            diagnostics: vec![why],
        }
    }

    /// Report for a run that failed before producing a usable snapshot.
    pub fn failed(why: impl Into<String>) -> Self {
        Self::unresolved(Vec::new(), f64::NAN, why.into())
    }

    /// Speed of the kinetic front, if any.
    pub fn front_speed(&self) -> Option<f64> {
        self.kinetic_wave.map(|k| self.waves[k].speed)
    }

    /// State selected behind the leading jump: the right state of the
    /// kinetic pair when there is one, otherwise the right state of the
    /// leftmost shock (the tangent state of a classical composite wave).
    pub fn selected_state(&self) -> Option<f64> {
        if let Some((_, r)) = self.kinetic_pair {
            return Some(r);
        }
        self.waves
            .iter()
            .find(|w| matches!(w.kind, WaveKind::Shock(_)))
            .map(|w| w.right)
    }
}

/// First plateau to the right of the main front of `field`, taken as the
/// rightmost crossing of the level halfway between the two end values.
///
/// A fallback for runs whose far field is polluted by dispersive wave trains,
/// where the full classification cannot recover the outer states but the
/// state trailing the main front is still flat.
pub fn plateau_after_front(field: &[f64], tol: f64, min_width: usize) -> Option<Plateau> {
    let n = field.len();
    if n < 2 {
        return None;
    }
    let mid = 0.5 * (field[0] + field[n - 1]);
    let k = (0..n - 1)
        .rev()
        .find(|&i| (field[i] - mid) * (field[i + 1] - mid) <= 0.0)?;
    detect_plateaus(field, tol, min_width)
        .into_iter()
        .find(|p| p.i_start > k)
}

impl fmt::Display for WaveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "structure: {}", self.structure)?;
        for p in &self.plateaus {
            writeln!(
                f,
                "  plateau [{}, {}] width {} value {:.10}",
                p.i_start, p.i_end, p.width, p.value
            )?;
        }
        for (k, w) in self.waves.iter().enumerate() {
            let kind = match w.kind {
                WaveKind::Fan => "fan".to_string(),
                WaveKind::Shock(t) => format!("{t:?} shock").to_lowercase(),
            };
            let mark = if self.kinetic_wave == Some(k) {
                " *"
            } else {
                ""
            };
            writeln!(
                f,
                "  wave [{}, {}] {kind}: {:.10} -> {:.10}, speed {:.6}{mark}",
                w.i_start, w.i_end, w.left, w.right, w.speed
            )?;
        }
        if let Some((a, b)) = self.kinetic_pair {
            writeln!(f, "  kinetic pair: u- = {a:.10}, u+ = {b:.10}")?;
        }
        if let Some(d) = self.dissipation {
            writeln!(f, "  entropy dissipation: {d:.6e}")?;
        }
        writeln!(f, "  oscillation amplitude: {:.3e}", self.oscillation)?;
        for d in &self.diagnostics {
            writeln!(f, "  note: {d}")?;
        }
        Ok(())
    }
}

fn steepest(field: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi.min(field.len() - 1))
        .max_by(|&i, &j| {
            let a = (field[i + 1] - field[i]).abs();
            let b = (field[j + 1] - field[j]).abs();
            a.total_cmp(&b)
        })
        .unwrap_or(lo)
}

/// Position where the field crosses `level`, searching outward from the
/// steepest segment in `[lo, hi]` and interpolating linearly.
fn crossing(
    field: &[f64],
    x: impl Fn(usize) -> f64,
    lo: usize,
    hi: usize,
    level: f64,
) -> Option<f64> {
    let hi = hi.min(field.len() - 1);
    if hi <= lo {
        return None;
    }
    let k = steepest(field, lo, hi);
    for r in 0..(hi - lo) {
        for j in [k.checked_sub(r), Some(k + r)].into_iter().flatten() {
            if j < lo || j + 1 > hi {
                continue;
            }
            let (a, b) = (field[j] - level, field[j + 1] - level);
            if a * b <= 0.0 && a != b {
                let theta = a / (a - b);
                return Some(x(j) + theta * (x(j + 1) - x(j)));
            }
        }
    }
    None
}

/// Nodes between the 10% and 90% levels of a transition `l -> r`, walking
/// outward from the mid-level crossing nearest the steepest segment.
fn transition_width(field: &[f64], lo: usize, hi: usize, l: f64, r: f64) -> Option<usize> {
    let hi = hi.min(field.len() - 1);
    if hi <= lo {
        return None;
    }
    let norm = |i: usize| (field[i] - l) / (r - l);
    let k = steepest(field, lo, hi);
    let m = (0..=(hi - lo)).find_map(|d| {
        [k.checked_sub(d), Some(k + d)]
            .into_iter()
            .flatten()
            .find(|&j| j >= lo && j < hi && (norm(j) - 0.5) * (norm(j + 1) - 0.5) <= 0.0)
    })?;
    let mut a = m;
    while a > lo && norm(a) > 0.1 {
        a -= 1;
    }
    let mut b = m + 1;
    while b < hi && norm(b) < 0.9 {
        b += 1;
    }
    (norm(a) <= 0.1 && norm(b) >= 0.9).then_some(b - a)
}

fn total_variation(field: &[f64], lo: usize, hi: usize) -> f64 {
    field[lo..=hi].windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Extent of the steep front around node `k`: neighbours are included while
/// their increments exceed 5% of the steepest one.
fn front_edges(field: &[f64], k: usize, lo: usize, hi: usize) -> (usize, usize) {
    let thr = 0.05 * (field[k + 1] - field[k]).abs();
    let mut a = k;
    while a > lo && (field[a] - field[a - 1]).abs() > thr {
        a -= 1;
    }
    let mut b = k + 1;
    while b < hi && (field[b + 1] - field[b]).abs() > thr {
        b += 1;
    }
    (a, b)
}

fn oscillation_amplitude(field: &[f64], plateaus: &[Plateau], left: f64, right: f64) -> f64 {
    let (lo, hi) = plateaus
        .iter()
        .map(|p| p.value)
        .chain([left, right])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    field
        .iter()
        .map(|&v| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Frame for measuring speeds from two snapshots of one component.
struct Tracker<'a> {
    early: &'a [f64],
    late: &'a [f64],
    t1: f64,
    t2: f64,
    x_min: f64,
    h: f64,
    x0: f64,
}

impl Tracker<'_> {
    fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    /// Window at the early time corresponding to `[a, b]` at the late time
    /// under self-similar scaling about `x0`.
    fn early_window(&self, a: usize, b: usize) -> (usize, usize) {
        let n = self.early.len();
        let ratio = self.t1 / self.t2;
        let map = |i: usize| (self.x0 + (self.x(i) - self.x0) * ratio - self.x_min) / self.h;
        let (ma, mb) = (map(a), map(b));
        let pad = 20.0
            + 0.5 * (b - a) as f64
            + (1.0 - ratio) * (self.x(a) - self.x0).abs().max((self.x(b) - self.x0).abs()) / self.h
                * 0.25;
        let lo = (ma.min(mb) - pad).floor().max(0.0) as usize;
        let hi = ((ma.max(mb) + pad).ceil() as usize).min(n - 1);
        (lo, hi)
    }

    fn speed(&self, a: usize, b: usize, l: f64, r: f64) -> Option<f64> {
        self.level_speed(a, b, 0.5 * (l + r))
    }

    /// Speed of the crossing of `level` located in `[a, b]` at the late time.
    fn level_speed(&self, a: usize, b: usize, level: f64) -> Option<f64> {
        let x2 = crossing(self.late, |i| self.x(i), a, b, level)?;
        let (lo, hi) = self.early_window(a, b);
        let x1 = crossing(self.early, |i| self.x(i), lo, hi, level)?;
        Some((x2 - x1) / (self.t2 - self.t1))
    }

    /// Whether the 10-90% width of the transition grows between snapshots
    /// at a rate compatible with self-similar spreading.
    fn grows(&self, a: usize, b: usize, l: f64, r: f64) -> bool {
        let Some(w2) = transition_width(self.late, a, b, l, r) else {
            return false;
        };
        let (lo, hi) = self.early_window(a, b);
        let Some(w1) = transition_width(self.early, lo, hi, l, r) else {
            return false;
        };
        let growth = 1.0 + 0.5 * (self.t2 / self.t1 - 1.0);
        w2 >= 3 && w2 as f64 >= growth * w1.max(1) as f64
    }

    /// Splits a transition `l -> r` made of a jump with an attached fan.
    ///
    /// Every level between `l` and `r` is tracked between the snapshots:
    /// levels inside the jump travel with the jump speed, levels inside the
    /// fan with their own characteristic speed. The intermediate state is the
    /// last level, found by bisection, that still moves with the jump.
    /// Returns `(state, node, speed_tolerance, jump_is_left)`, or `None` when the whole
    /// transition moves as one front.
    fn split_composite(
        &self,
        a: usize,
        b: usize,
        l: f64,
        r: f64,
    ) -> Option<(f64, usize, f64, bool)> {
        let f = self.late;
        let k = steepest(f, a, b);
        let v_k = 0.5 * (f[k] + f[k + 1]);
        let s = self.level_speed(a, b, v_k)?;
        let delta = 0.005 * s.abs() + self.h / (self.t2 - self.t1);
        let level = |th: f64| l + th * (r - l);
        let off = |th: f64| {
            self.level_speed(a, b, level(th))
                .map_or(f64::INFINITY, |c| (c - s).abs())
        };
        let (edge_l, edge_r) = (0.03, 0.97);
        let (dl, dr) = (off(edge_l), off(edge_r));
        if dl <= delta && dr <= delta {
            return None;
        }
        let jump_left = dr > dl;
        let mut inside = ((v_k - l) / (r - l)).clamp(0.0, 1.0);
        let mut outside = if jump_left { edge_r } else { edge_l };
        for _ in 0..40 {
            let mid = 0.5 * (inside + outside);
            if off(mid) <= delta {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        let mid = level(inside);
        let x = crossing(f, |i| self.x(i), a, b, mid)?;
        let node = (((x - self.x_min) / self.h).round() as usize).clamp(a, b);
        Some((mid, node, delta, jump_left))
    }

    fn is_fan(&self, a: usize, b: usize, l: f64, r: f64, tol: f64) -> bool {
        let monotone = total_variation(self.late, a, b) <= 1.25 * (r - l).abs() + 2.0 * tol;
        monotone && self.grows(a, b, l, r)
    }
}

fn snap(v: f64, plateau: f64, tol: f64) -> f64 {
    if (v - plateau).abs() <= 5.0 * tol {
        plateau
    } else {
        v
    }
}

fn check_snapshots<'a>(
    snapshots: &'a [Snapshot],
    len: usize,
) -> Result<(&'a Snapshot, &'a Snapshot)> {
    if snapshots.len() < 2 {
        return Err(Error::config(
            "wave classification needs at least two snapshots",
        ));
    }
    let late = &snapshots[snapshots.len() - 1];
    let early = &snapshots[snapshots.len() - 2];
    if !(late.t > early.t && early.t > 0.0) {
        return Err(Error::config(format!(
            "snapshots at t = {} and t = {} cannot be used for front tracking",
            early.t, late.t
        )));
    }
    if late.state.len() != len || early.state.len() != len {
        return Err(Error::config(
            "snapshot length does not match the problem grid",
        ));
    }
    Ok((early, late))
}

/// Reads the wave structure off the last two snapshots of a run.
pub fn classify_structure(
    snapshots: &[Snapshot],
    problem: &RiemannProblem,
    cfg: &AnalysisConfig,
) -> Result<WaveReport> {
    let n = problem.grid.len();
    let (early, late) = check_snapshots(snapshots, n * problem.model.components())?;
    if let Some(node) = late.state.iter().position(|v| !v.is_finite()) {
        return Ok(WaveReport::failed(format!(
            "non-finite value at node {node}"
        )));
    }
    let tracker = Tracker {
        early: &early.state[..n],
        late: &late.state[..n],
        t1: early.t,
        t2: late.t,
        x_min: problem.grid.x_min(),
        h: problem.grid.h(),
        x0: problem.x0,
    };
    match problem.model {
        ModelSpec::PSystem { .. } => Ok(classify_psystem(&tracker, problem, cfg)),
        _ => {
            let flux = problem.model.flux().expect("scalar model");
            Ok(classify_scalar(&tracker, problem, flux, cfg))
        }
    }
}

/// Plateaus from the first one at the left datum to the last one at the
/// right datum; anything outside is treated as far-field noise.
fn outer_plateaus(
    field: &[f64],
    left: f64,
    right: f64,
    tol: f64,
    min_width: usize,
) -> std::result::Result<Vec<Plateau>, WaveReport> {
    let plateaus = detect_plateaus(field, tol, min_width);
    let osc = oscillation_amplitude(field, &plateaus, left, right);
    let near = |p: &Plateau, v: f64| (p.value - v).abs() <= 10.0 * tol;
    let first = plateaus.iter().position(|p| near(p, left));
    let last = plateaus.iter().rposition(|p| near(p, right));
    match (first, last) {
        (Some(a), Some(b)) if a < b || (a == b && (left - right).abs() <= 10.0 * tol) => {
            Ok(plateaus[a..=b].to_vec())
        }
        _ => {
            let why = format!(
                "far-field states not recovered to {tol:.3e}; oscillation amplitude {osc:.3e} over {} plateau(s)",
                plateaus.len()
            );
            Err(WaveReport::unresolved(plateaus, osc, why))
        }
    }
}

fn classify_scalar(
    tr: &Tracker,
    problem: &RiemannProblem,
    flux: Flux,
    cfg: &AnalysisConfig,
) -> WaveReport {
    let (ul, ur) = problem.primary_states();
    let tol = cfg.plateau_tol(ul, ur);
    let field = tr.late;
    let plateaus = match outer_plateaus(field, ul, ur, tol, cfg.min_width) {
        Ok(p) => p,
        Err(report) => return report,
    };
    let oscillation = oscillation_amplitude(field, &plateaus, ul, ur);
    let mut diagnostics = Vec::new();
    let mut waves = Vec::new();

    for pair in plateaus.windows(2) {
        let (pl, pr) = (pair[0], pair[1]);
        let (l, r) = (pl.value, pr.value);
        if (r - l).abs() <= 3.0 * tol {
            continue;
        }
        let (a, b) = (pl.i_end, pr.i_start);
        let c = flux.inflection();
        let straddles = (l - c) * (r - c) < 0.0 && (l - c).abs() > tol && (r - c).abs() > tol;
        let shock = |i_start: usize, i_end: usize, left: f64, right: f64| Wave {
            i_start,
            i_end,
            left,
            right,
            kind: WaveKind::Shock(lax_check_tol(left, right, flux, cfg.lax_tol)),
            speed: tr.speed(i_start, i_end, left, right).unwrap_or(f64::NAN),
        };
        let fan = |i_start: usize, i_end: usize, left: f64, right: f64| Wave {
            i_start,
            i_end,
            left,
            right,
            kind: WaveKind::Fan,
            speed: tr.speed(i_start, i_end, left, right).unwrap_or(f64::NAN),
        };
        if straddles && tr.grows(a, b, l, r) {
            // A fan cannot cross the inflection point: split off the attached jump.
            // A jump whose far state sits on the tangent point, up to the
            // bias of the level tracking, is a sonic classical contact. Fan
            // levels next to it move at nearly the jump speed, so the junction
            // is located through the characteristic speed instead.
            let sonic = |w: &mut Wave, plateau: f64, delta: f64| -> f64 {
                let t = flux.tangent(plateau);
                let band = 2.0 * delta / flux.d2f(t).abs().max(1e-12) + tol;
                let jump_left = w.left == plateau;
                let other = if jump_left { w.right } else { w.left };
                if (other - t).abs() > band {
                    return other;
                }
                w.kind = WaveKind::Shock(ShockType::Classical);
                let junction = flux.characteristic_state(w.speed, other).unwrap_or(other);
                if jump_left {
                    w.right = junction;
                } else {
                    w.left = junction;
                }
                junction
            };
            match tr.split_composite(a, b, l, r) {
                Some((mid, i_mid, delta, true)) => {
                    let mut w = shock(a, i_mid, l, mid);
                    let mid = sonic(&mut w, l, delta);
                    waves.push(w);
                    waves.push(fan(i_mid, b, mid, r));
                    diagnostics.push(format!(
                        "composite wave {l:.6} -> {r:.6}: jump then fan through {mid:.6}"
                    ));
                }
                Some((mid, i_mid, delta, false)) => {
                    let mut w = shock(i_mid, b, mid, r);
                    let mid = sonic(&mut w, r, delta);
                    waves.push(fan(a, i_mid, l, mid));
                    waves.push(w);
                    diagnostics.push(format!(
                        "composite wave {l:.6} -> {r:.6}: fan then jump through {mid:.6}"
                    ));
                }
                None => waves.push(shock(a, b, l, r)),
            }
        } else if tr.is_fan(a, b, l, r, tol) {
            waves.push(fan(a, b, l, r));
        } else {
            waves.push(shock(a, b, l, r));
        }
    }

    let nonclassical: Vec<usize> = (0..waves.len())
        .filter(|&k| waves[k].kind == WaveKind::Shock(ShockType::Undercompressive))
        .collect();
    if waves
        .iter()
        .any(|w| w.kind == WaveKind::Shock(ShockType::NonEntropic))
    {
        diagnostics
            .push("a front violates both Lax inequalities in the expansive direction".into());
    }
    let has_fan = waves.iter().any(|w| w.kind == WaveKind::Fan);
    let n_shocks = waves
        .iter()
        .filter(|w| matches!(w.kind, WaveKind::Shock(_)))
        .count();
    let speeds = waves.iter().map(|w| w.speed).collect();

    let (structure, kinetic_wave) = match nonclassical.as_slice() {
        [] => (WaveStructure::ClassicalOnly, None),
        [k] if has_fan => (WaveStructure::RarefactionPlusNonclassical, Some(*k)),
        [k] if n_shocks >= 2 => (WaveStructure::DoubleShock, Some(*k)),
        [_] => {
            diagnostics.push("isolated nonclassical front without a companion wave".into());
            (WaveStructure::Unresolved, None)
        }
        _ => {
            diagnostics.push(format!("{} nonclassical fronts", nonclassical.len()));
            (WaveStructure::Unresolved, None)
        }
    };
    let kinetic_pair = kinetic_wave.map(|k| (waves[k].left, waves[k].right));
    WaveReport {
        structure,
        plateaus,
        waves,
        kinetic_wave,
        kinetic_pair,
        speeds,
        dissipation: kinetic_pair.map(|(a, b)| entropy_dissipation(a, b, flux)),
        oscillation,
        diagnostics,
    }
}

fn classify_psystem(tr: &Tracker, problem: &RiemannProblem, cfg: &AnalysisConfig) -> WaveReport {
    let (tl, tr_) = problem.primary_states();
    let tol = cfg.plateau_tol(tl, tr_);
    let field = tr.late;
    let plateaus = match outer_plateaus(field, tl, tr_, tol, cfg.min_width) {
        Ok(p) => p,
        Err(report) => return report,
    };
    let oscillation = oscillation_amplitude(field, &plateaus, tl, tr_);
    let k = steepest(field, 0, field.len() - 1);
    let mut waves = Vec::new();
    let mut kinetic_wave = None;
    for pair in plateaus.windows(2) {
        let (pl, pr) = (pair[0], pair[1]);
        let (l, r) = (pl.value, pr.value);
        let (a, b) = (pl.i_end, pr.i_start);
        if (a..b).contains(&k) {
            // Over- and undershoots within a few nodes of the jump belong to
            // its internal profile; the jump then connects the plateaus.
            let (mut ia, mut ib) = front_edges(field, k, a, b);
            let ripple = |i: usize, j: usize| {
                j < i + cfg.min_width
                    || total_variation(field, i, j) > 1.5 * (field[j] - field[i]).abs() + 2.0 * tol
            };
            if ripple(a, ia) {
                ia = a;
            }
            if ripple(ib, b) {
                ib = b;
            }
            let sl = if ia == a { l } else { snap(field[ia], l, tol) };
            let sr = if ib == b { r } else { snap(field[ib], r, tol) };
            if ia > a + 1 {
                waves.push(Wave {
                    i_start: a,
                    i_end: ia,
                    left: l,
                    right: sl,
                    kind: WaveKind::Fan,
                    speed: tr.speed(a, ia, l, sl).unwrap_or(f64::NAN),
                });
            }
            kinetic_wave = Some(waves.len());
            waves.push(Wave {
                i_start: ia,
                i_end: ib,
                left: sl,
                right: sr,
                kind: WaveKind::Shock(ShockType::Undercompressive),
                speed: tr.speed(ia, ib, sl, sr).unwrap_or(f64::NAN),
            });
            if ib + 1 < b {
                waves.push(Wave {
                    i_start: ib,
                    i_end: b,
                    left: sr,
                    right: r,
                    kind: WaveKind::Fan,
                    speed: tr.speed(ib, b, sr, r).unwrap_or(f64::NAN),
                });
            }
        } else if (r - l).abs() > 3.0 * tol {
            let kind = if tr.is_fan(a, b, l, r, tol) {
                WaveKind::Fan
            } else {
                WaveKind::Shock(ShockType::Classical)
            };
            waves.push(Wave {
                i_start: a,
                i_end: b,
                left: l,
                right: r,
                kind,
                speed: tr.speed(a, b, l, r).unwrap_or(f64::NAN),
            });
        }
    }
    let speeds = waves.iter().map(|w| w.speed).collect();
    let Some(kw) = kinetic_wave else {
        return WaveReport {
            structure: WaveStructure::Unresolved,
            plateaus,
            waves,
            kinetic_wave: None,
            kinetic_pair: None,
            speeds,
            dissipation: None,
            oscillation,
            diagnostics: vec!["steepest front lies inside a plateau".into()],
        };
    };
    let s = waves[kw].speed;
    let structure = if !s.is_finite() {
        WaveStructure::Unresolved
    } else if s.abs() <= cfg.tol_speed {
        WaveStructure::StationaryShock
    } else {
        WaveStructure::MovingNonclassical
    };
    let kinetic_pair = structure
        .has_nonclassical()
        .then(|| (waves[kw].left, waves[kw].right));
    WaveReport {
        structure,
        plateaus,
        waves,
        kinetic_wave: structure.has_nonclassical().then_some(kw),
        kinetic_pair,
        speeds,
        dissipation: None,
        oscillation,
        diagnostics: Vec::new(),
    }
}

/// Marks moving fronts whose kinetic pair matches that of the previous point
/// to within `tol` as saturated. `points` must be ordered by decreasing `u_L`.
pub fn mark_saturated(points: &mut [WaveReport], tol: f64) {
    for i in 1..points.len() {
        let (prev, cur) = (&points[i - 1], &points[i]);
        let moving = |r: &WaveReport| {
            matches!(
                r.structure,
                WaveStructure::MovingNonclassical | WaveStructure::SaturatedNonclassical
            )
        };
        if !(moving(prev) && moving(cur)) {
            continue;
        }
        if let (Some((a0, b0)), Some((a1, b1))) = (prev.kinetic_pair, cur.kinetic_pair) {
            if (a0 - a1).abs() <= tol && (b0 - b1).abs() <= tol {
                points[i].structure = WaveStructure::SaturatedNonclassical;
            }
        }
    }
}
