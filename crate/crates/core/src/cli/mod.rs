//! Command-line front end: `simulate`, `optimize`, `channel` and `defect`.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::channels::{
    apply_channel, build_kraus, ladder_defect, ladder_defect_closed_form, KrausKind,
};
use crate::dynamics::{integrate, steady_state, DeviceKind, Scenario};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SpaceLayout};
use crate::observables::{
    atom_populations, husimi_q, quadrature_stats, trace_out_atom, uhlmann_fidelity, QGrid,
    QuadratureStats,
};
use crate::optimizer::{grid_search, steady_cavity_state, target_state, FidelitySurface};
use crate::states::build_cavity_state_with_tolerance;
use config::{QState, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_GRID_FAILURES: i32 = 4;

/// Largest allowed gap between the numeric and closed-form ladder defect.
pub const DEFECT_AGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "spasim",
    version,
    about = "Single-photon adder/subtractor simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the master equation and write time series, summary and Q grids.
    Simulate(RunArgs),
    /// Grid search over pulse strength and duration.
    Optimize(RunArgs),
    /// Apply an ideal Kraus channel to an initial state (no dynamics).
    Channel(RunArgs),
    /// Photon-number gain of a† on a coherent state, numeric and closed form.
    Defect(DefectArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct DefectArgs {
    /// Complex amplitude such as `1`, `0.5+0.3i` or `-2i`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long, default_value_t = 60)]
    pub cutoff: usize,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::InvariantViolation(_) | Error::TruncationLeak { .. } => EXIT_INVARIANT,
        Error::TooManyFailures { .. } => EXIT_GRID_FAILURES,
        _ => EXIT_CONFIG,
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse complex number {s:?}"));
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok(C64::new(num(&t)?, 0.0));
    };
    // split at the last sign that is not leading and not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| match x {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => num(x),
    };
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = e.to_string();
            eprintln!(
                "error: {}",
                msg.split_whitespace().collect::<Vec<_>>().join(" ")
            );
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => {
            with_threads(a.threads, || cmd_simulate(&a.config, a.out.as_deref()))
        }
        Command::Optimize(a) => {
            with_threads(a.threads, || cmd_optimize(&a.config, a.out.as_deref()))
        }
        Command::Channel(a) => with_threads(a.threads, || cmd_channel(&a.config, a.out.as_deref())),
        Command::Defect(a) => cmd_defect(&a.alpha, a.cutoff).map(|report| print!("{report}")),
    }
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn stats_json(s: &QuadratureStats) -> Value {
    json!({
        "mean_n": s.mean_n,
        "std_n": s.std_n,
        "std_x1": s.std_x1,
        "std_x2": s.std_x2,
    })
}

fn q_csv(q: &QGrid) -> String {
    let mut out = String::from("re,im,q\n");
    let res = q.spec.resolution;
    for j in 0..res {
        for i in 0..res {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(q.spec.re(i)),
                fmt_f64(q.spec.im(j)),
                fmt_f64(q.at(i, j))
            );
        }
    }
    out
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Files are staged in memory and only written once everything succeeded.
struct Outputs {
    dir: PathBuf,
    files: Vec<(&'static str, String)>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    fn write(self) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        for (name, contents) in self.files {
            fs::write(self.dir.join(name), contents)?;
        }
        Ok(())
    }
}

fn ideal_outputs(scenario: &Scenario) -> Result<(DensityMatrix, DensityMatrix)> {
    let cav = build_cavity_state_with_tolerance(
        &scenario.initial,
        &scenario.layout,
        scenario.max_leakage,
    )?;
    let rho = cav.state.projector();
    let incoh = match scenario.device {
        DeviceKind::Adder => KrausKind::SpaIncoherent,
        DeviceKind::Subtractor => KrausKind::SpsIncoherent,
    };
    let incoherent = apply_channel(&build_kraus(incoh, &scenario.layout), &rho)?.state;
    Ok((incoherent, target_state(scenario)?))
}

pub fn cmd_simulate(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.scenario()?;
    let qspec = cfg.outputs.qgrid();
    qspec.validate()?;
    if !cfg.outputs.timeseries && !cfg.outputs.summary && cfg.outputs.q_states.is_empty() {
        return Err(Error::Config("no outputs enabled".into()));
    }
    let mut files = Outputs::new(cfg.output_dir(out));

    let traj = integrate(&sc)?;
    let (steady, t_ss) = steady_state(&traj, sc.steady_tol)?;
    let steady_c = trace_out_atom(&steady, &sc.layout)?;
    let steady_stats = quadrature_stats(&steady_c)?;

    if cfg.outputs.timeseries {
        let mut csv = String::from("t,mean_n,std_n,std_x1,std_x2,pop_g,pop_s,pop_e\n");
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let s = quadrature_stats(&trace_out_atom(rho, &sc.layout)?)?;
            let p = atom_populations(rho, &sc.layout)?;
            let row = [*t, s.mean_n, s.std_n, s.std_x1, s.std_x2, p[0], p[1], p[2]];
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        files.add("timeseries.csv", csv);
    }

    let (incoherent, coherent) = ideal_outputs(&sc)?;
    if cfg.outputs.summary {
        let pops = atom_populations(&steady, &sc.layout)?;
        let root = uhlmann_fidelity(&steady_c, &coherent)?;
        let summary = json!({
            "device": sc.device,
            "cutoff": sc.layout.cavity_cutoff(),
            "initial": sc.initial,
            "pulse": sc.active_pulse(),
            "dt": traj.dt,
            "t_end": traj.times.last().copied().unwrap_or(0.0),
            "converged_at": t_ss,
            "renormalization": traj.renormalization,
            "cumulative_correction": traj.cumulative_correction,
            "steady": {
                "mean_n": steady_stats.mean_n,
                "std_n": steady_stats.std_n,
                "std_x1": steady_stats.std_x1,
                "std_x2": steady_stats.std_x2,
                "pop_g": pops[0],
                "pop_s": pops[1],
                "pop_e": pops[2],
                "purity": steady_c.purity(),
            },
            "fidelity_to_ideal_coherent": {
                "root": root,
                "squared": root * root,
            },
            "comparison": {
                "simulated": stats_json(&steady_stats),
                "ideal_incoherent": stats_json(&quadrature_stats(&incoherent)?),
                "ideal_coherent": stats_json(&quadrature_stats(&coherent)?),
            },
        });
        files.add("summary.json", json_text(&summary));
    }

    for q in &cfg.outputs.q_states {
        let rho = match q {
            QState::Initial => trace_out_atom(&traj.states[0], &sc.layout)?,
            QState::Steady => steady_c.clone(),
            QState::IdealTarget => coherent.clone(),
        };
        files.add(q.file_name(), q_csv(&husimi_q(&rho, &qspec)?));
    }
    files.write()
}

fn surface_csv(s: &FidelitySurface) -> String {
    let mut out = String::from("omega,tau,fidelity\n");
    for i in 0..s.grid.n_omega {
        for j in 0..s.grid.n_tau {
            let f = s.at(i, j).map_or_else(|| "nan".to_string(), fmt_f64);
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(s.grid.omega(i)),
                fmt_f64(s.grid.tau(j)),
                f
            );
        }
    }
    out
}

pub fn cmd_optimize(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.scenario()?;
    let (grid, convention) = cfg.grid()?;
    let mut files = Outputs::new(cfg.output_dir(out));

    let surface = grid_search(&sc, &grid, convention)?;
    let target = target_state(&sc)?;
    let unpulsed = uhlmann_fidelity(&steady_cavity_state(&sc, None)?, &target)?;
    let a = surface.argmax;
    let optimum = json!({
        "omega": a.omega,
        "tau": a.tau,
        "fidelity": a.fidelity,
        "convention": convention,
        "no_pulse_fidelity": convention.apply(unpulsed),
        "missing_points": surface.missing,
        "grid": grid,
    });
    files.add("fidelity_surface.csv", surface_csv(&surface));
    files.add("optimum.json", json_text(&optimum));
    files.write()
}

pub fn cmd_channel(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ch = cfg
        .channel
        .ok_or_else(|| Error::Config("the [channel] section is required".into()))?;
    let layout = cfg.layout()?;
    let spec = cfg.scenario.initial.to_spec()?;
    let qspec = cfg.outputs.qgrid();
    qspec.validate()?;
    let mut files = Outputs::new(cfg.output_dir(out));

    let cav = build_cavity_state_with_tolerance(&spec, &layout, cfg.scenario.max_leakage)?;
    let rho = cav.state.projector();
    let result = apply_channel(&build_kraus(ch.kind, &layout), &rho)?;
    let report = json!({
        "kind": ch.kind,
        "cutoff": layout.cavity_cutoff(),
        "initial": spec,
        "initial_leakage": cav.leakage,
        "raw_trace": result.raw_trace,
        "input": stats_json(&quadrature_stats(&rho)?),
        "output": stats_json(&quadrature_stats(&result.state)?),
        "output_purity": result.state.purity(),
    });
    files.add("channel.json", json_text(&report));
    if ch.qfunction {
        files.add("q_input.csv", q_csv(&husimi_q(&rho, &qspec)?));
        files.add("q_output.csv", q_csv(&husimi_q(&result.state, &qspec)?));
    }
    files.write()
}

/// Returns the printed report; fails if the two values disagree.
pub fn cmd_defect(alpha: &str, cutoff: usize) -> Result<String> {
    let alpha = parse_complex(alpha)?;
    let layout = SpaceLayout::new(cutoff)?;
    let numeric = ladder_defect(alpha, &layout)?;
    let closed = ladder_defect_closed_form(alpha);
    let gap = (numeric - closed).abs();
    if gap > DEFECT_AGREEMENT_TOL {
        return Err(Error::InvariantViolation(format!(
            "numeric defect {numeric} differs from closed form {closed} by {gap:.3e}"
        )));
    }
    Ok(format!(
        "alpha = {}{:+}i\nnumeric = {}\nclosed_form = {}\ndifference = {:.3e}\n",
        alpha.re,
        alpha.im,
        fmt_f64(numeric),
        fmt_f64(closed),
        gap
    ))
}
