//! `kinetic`: runs Riemann experiments and kinetic-function sweeps.
//!
//! Every subcommand that reads a JSON config also accepts `--key=value`
//! flags for keys the subcommand does not itself define; these override (or
//! add) config entries, with dotted keys reaching into nested objects.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use kinetic_core::analysis::{
    entropy_dissipation_cubic, entropy_dissipation_thin_film, thin_film_zero_dissipation,
};
use kinetic_core::integrate::verify_order;
use kinetic_core::stencil::validate_stencils;
use kinetic_core::sweep::{
    apply_overrides, argmin_error, parse_override_args, read_table_file, table_to_string,
    write_field_dump, write_regimes,
};
use kinetic_core::{
    builtin_tableau, compare_exact, emit_gnuplot, regime_scan, run_single, sweep_kinetic, Error,
    ExperimentConfig, FigureKind, Result, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "kinetic",
    version,
    about = "High-order diffusive-dispersive Riemann solvers and kinetic functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its wave report and CSV row.
    Run(RunArgs),
    /// Run a parameter sweep and write the kinetic table.
    Sweep(SweepArgs),
    /// Check stencils, Runge-Kutta orders and the entropy identities.
    Validate,
    /// Emit a gnuplot script for a kinetic table or field dump.
    Plot(PlotArgs),
    /// Compare a cubic kinetic table with the exact kinetic function.
    Compare(CompareArgs),
    /// Scan left velocities of a p-system problem and classify each run.
    Regimes(RegimeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; omit to build one from overrides alone.
    config: Option<PathBuf>,
    /// Write the CSV row here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the final field as `x value...` columns.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Exit with status 3 when no kinetic pair is extracted.
    #[arg(long)]
    require_pair: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep config.
    config: PathBuf,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Kinetic table (CSV) or, for `wave_structure`, a field dump.
    data: PathBuf,
    /// kinetic, dissipation_vs_speed or wave_structure.
    #[arg(long, default_value = "kinetic")]
    kind: String,
    /// Script destination; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    table: PathBuf,
    #[arg(long)]
    alpha: f64,
}

#[derive(Args)]
struct RegimeArgs {
    /// JSON p-system config; defaults to the piecewise-linear scan setup.
    config: Option<PathBuf>,
    /// Comma-separated left velocities.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Options a subcommand defines itself; any other `--key=value` is a
/// config override.
fn own_flags(subcommand: &str) -> &'static [&'static str] {
    match subcommand {
        "run" => &["csv", "dump", "require-pair"],
        "sweep" => &["out"],
        "plot" => &["kind", "out"],
        "compare" => &["alpha"],
        "regimes" => &["values", "out"],
        _ => &[],
    }
}

fn split_args(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let sub = args
        .iter()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .cloned()
        .unwrap_or_default();
    let own_flags = own_flags(&sub);
    let mut own = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|b| b.split_once('=')) {
            Some((k, _)) if !own_flags.contains(&k) => overrides.push(a),
            _ => own.push(a),
        }
    }
    (own, overrides)
}

fn main() -> ExitCode {
    let (own, overrides) = split_args(std::env::args().collect());
    let cli = Cli::parse_from(own);
    match dispatch(cli.command, &overrides) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command, overrides: &[String]) -> Result<u8> {
    let overrides = parse_override_args(overrides)?;
    match cmd {
        Command::Run(a) => run(a, &overrides),
        Command::Sweep(a) => sweep(a, &overrides),
        Command::Validate => Ok(validate()),
        Command::Plot(a) => plot(a),
        Command::Compare(a) => compare(a),
        Command::Regimes(a) => regimes(a, &overrides),
    }
}

fn load_json(
    path: Option<&Path>,
    fallback: Value,
    overrides: &[(String, String)],
) -> Result<Value> {
    let mut v = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
        None => fallback,
    };
    apply_overrides(&mut v, overrides)?;
    Ok(v)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(a: RunArgs, overrides: &[(String, String)]) -> Result<u8> {
    let cfg = ExperimentConfig::from_value(load_json(a.config.as_deref(), json!({}), overrides)?)?;
    let out = run_single(&cfg)?;
    eprint!("{}", out.report);
    emit(
        a.csv.as_deref(),
        &table_to_string(std::slice::from_ref(&out.sample))?,
    )?;
    if let (Some(path), Some(snap)) = (a.dump.as_deref(), out.final_snapshot.as_ref()) {
        write_field_dump(fs::File::create(path)?, &cfg.problem()?.grid, &snap.state)?;
    }
    if let Some(e) = out.error {
        eprintln!("error: {e}");
        return Ok(e.exit_code() as u8);
    }
    if a.require_pair && out.report.kinetic_pair.is_none() {
        eprintln!(
            "error: no kinetic pair in a {} solution",
            out.report.structure
        );
        return Ok(3);
    }
    Ok(0)
}

fn sweep(a: SweepArgs, overrides: &[(String, String)]) -> Result<u8> {
    let v = load_json(Some(&a.config), Value::Null, overrides)?;
    let cfg: SweepConfig = serde_json::from_value(v)
        .map_err(|e| Error::config(format!("invalid sweep config: {e}")))?;
    let result = sweep_kinetic(&cfg)?;
    let out = a.out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    emit(out.as_deref(), &table_to_string(&result.table)?)?;
    for m in result.monotonicity() {
        eprintln!("{m}");
    }
    let failed = result.table.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} row(s) unresolved or failed",
            result.table.len()
        );
    }
    if let Some(alpha) = result
        .table
        .first()
        .filter(|r| r.model == "cubic")
        .map(|r| r.alpha)
    {
        if result.table.iter().all(|r| r.alpha == alpha) {
            eprintln!("{}", compare_exact(&result.table, alpha));
        }
    }
    for (q, x, e) in argmin_error(&result) {
        eprintln!(
            "q = {q}: smallest |error| {e:.6e} at {} = {x}",
            result.param
        );
    }
    Ok(0)
}

fn validate() -> u8 {
    let mut ok = true;
    let stencils = validate_stencils();
    ok &= stencils.all_passed();
    print!("{stencils}");

    println!("runge-kutta orders");
    for (name, lo, hi) in [
        ("rk4", 3.8, 4.2),
        ("rk6", 5.8, 6.2),
        ("rk8", 7.5, f64::INFINITY),
    ] {
        let tab = builtin_tableau(name).expect("builtin tableau");
        let p = verify_order(&tab);
        let pass = p >= lo && p <= hi;
        ok &= pass;
        println!("  {name}: measured order {p:.3} {}", verdict(pass));
    }

    // Lattice of pairs rather than random draws keeps the report reproducible.
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        for j in 0..100 {
            let a = -3.0 + 6.0 * (i as f64 + 0.37) / 100.0;
            let b = -3.0 + 6.0 * (j as f64 + 0.61) / 100.0;
            let s = a * a + a * b + b * b;
            let reference = 4.0 * (-s * 0.5 * (b * b - a * a) + 0.75 * (b.powi(4) - a.powi(4)));
            let scale = a.abs().max(b.abs()).max(1.0).powi(4);
            worst = worst.max((entropy_dissipation_cubic(a, b) - reference).abs() / scale);
        }
    }
    let pass = worst <= 1e-12;
    ok &= pass;
    println!(
        "cubic dissipation identity: worst scaled difference {worst:.2e} {}",
        verdict(pass)
    );

    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let u = (2.0 / 3.0) * k as f64 / 101.0;
        match thin_film_zero_dissipation(u) {
            Ok(p) => worst = worst.max(entropy_dissipation_thin_film(u, p).abs()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    let pass = worst <= 1e-12;
    ok &= pass;
    println!(
        "thin-film zero dissipation: max |D| {worst:.2e} {}",
        verdict(pass)
    );

    if ok {
        0
    } else {
        2
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn plot(a: PlotArgs) -> Result<u8> {
    let kind: FigureKind = a.kind.parse()?;
    let table = match kind {
        FigureKind::WaveStructure => Vec::new(),
        _ => read_table_file(&a.data)?,
    };
    let script = emit_gnuplot(&a.data.to_string_lossy(), &table, kind)?;
    emit(a.out.as_deref(), &script)?;
    Ok(0)
}

fn compare(a: CompareArgs) -> Result<u8> {
    let table = read_table_file(&a.table)?;
    println!("{}", compare_exact(&table, a.alpha));
    Ok(0)
}

fn regimes(a: RegimeArgs, overrides: &[(String, String)]) -> Result<u8> {
    let fallback = json!({
        "model": "psystem", "pressure": {"kind": "piecewise_linear"}, "alpha": 0.0,
        "tau_L": 0.9, "tau_R": 4.0, "u_R": 1.0, "u_L": 1.0,
        "eps": 1e-3, "h": 5e-4, "n": 2000, "x0": 0.5, "width": 0.02, "q": 4, "t_end": 0.12
    });
    let cfg = ExperimentConfig::from_value(load_json(a.config.as_deref(), fallback, overrides)?)?;
    let values = a
        .values
        .unwrap_or_else(|| vec![1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.2, -1.5, -2.0]);
    let points = regime_scan(&cfg, &values, true)?;
    let mut buf = Vec::new();
    write_regimes(&mut buf, &points)?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))?;
    Ok(0)
}
