//! High-order finite-difference solvers for diffusive-dispersive
//! regularizations of nonconvex conservation laws, with tools for
//! extracting kinetic functions from Riemann-problem solutions.

pub mod analysis;
pub mod error;
pub mod helmholtz;
pub mod integrate;
pub mod problem;
pub mod psystem;
pub mod scalar;
pub mod stencil;
pub mod sweep;

pub use analysis::{
    classify_structure, detect_plateaus, entropy_dissipation_cubic, entropy_dissipation_thin_film,
    exact_kinetic_cubic, lax_check, plateau_after_front, shock_set_cubic, shock_speed_rh,
    thin_film_tangent, thin_film_zero_dissipation, AnalysisConfig, ExactKineticCubic, Plateau,
    ShockType, WaveReport, WaveStructure,
};
pub use error::{Error, Result};
pub use helmholtz::HelmholtzSolver;
pub use integrate::{
    builtin_tableau, integrate, rk_step, ButcherTableau, RunConfig, SemiDiscrete, Snapshot,
    Trajectory,
};
pub use problem::{ModelSpec, Profile, RiemannProblem, RiemannState};
pub use psystem::{PSystemModel, PSystemScheme, PSystemState, PressureLaw};
pub use scalar::{
    CamassaHolmModel, CamassaHolmScheme, CubicModel, CubicScheme, Flux, ThinFilmModel,
    ThinFilmScheme,
};
pub use stencil::{Boundary, Grid1D, Order, Stencil};
pub use sweep::{
    compare_exact, emit_gnuplot, regime_scan, run_problem, run_single, sweep_kinetic,
    ExperimentConfig, FigureKind, KineticSample, ModelKind, RunOutcome, SweepConfig, SweepResult,
};
