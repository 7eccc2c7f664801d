//! `modvar` command-line front end.
//!
//! Every subcommand renders its result to a string so the binary, the
//! golden tests and other front ends share one code path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::criterion::{
    evaluate_criterion, robustness_threshold, CriterionAxis, GridOptions, RobustnessReport,
};
use crate::dynamics::{
    far_field_momentum_density, free_propagate, propagate_in_steps, protocol_visibility,
    PropagationParams, ProtocolSpec,
};
use crate::error::Error;
use crate::grid::{GridSpec, GridState};
use crate::modular::{squeezing_s1, squeezing_s2};
use crate::sampling::{estimate_criterion, sample_measurements, MeasurementKind, SampleSet};
use crate::spectral::{brute_force_c, perturbative_c, solve_c, EigenSolveReport, DEFAULT_TOLERANCE};
use crate::states::{
    discretize_single, single_grid_spec, BuiltState, Envelope, EnvelopeSpec, MixtureState,
    StateDescriptor, StateKind, SuperposedState,
};
use crate::units::{parse_quantity, Dimension};

/// Failure surfaced to the user as `error: <kind>: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into() }
    }

    /// One line, safe for machine parsing.
    pub fn line(&self) -> String {
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error: {}: {}", self.kind, msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn length(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Length).map_err(|e| e.to_string())
}

fn time(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Time).map_err(|e| e.to_string())
}

fn mass(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Mass).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "modvar",
    version,
    about = "Modular-variable entanglement toolkit",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points per particle axis (meaning varies slightly per command).
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Modular periods in the brute-force box.
    #[arg(long, global = true)]
    periods: Option<usize>,
    /// Plain-text key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Kummer,
    Brute,
    Perturbative,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Space {
    Position,
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    MomentumInteger,
    PositionInteger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Multislit,
    Smp,
    Mpe,
    Classical,
    Admixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleKind {
    Both,
    Position,
    Momentum,
}

/// State selection: a JSON descriptor file or individual parameters.
#[derive(Debug, Args)]
struct StateArgs {
    /// JSON state descriptor.
    #[arg(long, conflicts_with = "kind")]
    state: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Number of superposed components.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, value_parser = length, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long = "N0", allow_hyphen_values = true)]
    n0: Option<i64>,
    /// Modular scale λ (slit spacing L for multislit states).
    #[arg(long, value_parser = length)]
    lambda: Option<f64>,
    /// Gaussian envelope width (default 5λ, or L/10 for multislit).
    #[arg(long, value_parser = length)]
    sigma: Option<f64>,
    /// Sinc envelope width d instead of a Gaussian.
    #[arg(long, value_parser = length, conflicts_with = "sigma")]
    sinc_d: Option<f64>,
    #[arg(long, value_parser = length, allow_hyphen_values = true)]
    phase_ref: Option<f64>,
    /// Classical weight of an admixture state.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Squeezing functions S1, S2 for N = 1, 2, 3, 4, 10, 100.
    Table1,
    /// The criterion constant c.
    Constant {
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Density profile of a state.
    Fringes {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value = "position")]
        space: Space,
        /// Half-range of the profile (position-like or momentum-like units).
        #[arg(long)]
        range: Option<f64>,
    },
    /// Evaluate the separability criterion on a two-particle state.
    Criterion {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value = "momentum-integer")]
        axis: AxisArg,
    },
    /// Admixture threshold that still violates the criterion.
    Robustness {
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
        /// Sweep N from 2 up to this value.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_parser = length, default_value = "1")]
        lambda: f64,
        #[arg(long, value_parser = length)]
        sigma: Option<f64>,
    },
    /// Simulate measurements and estimate the criterion from them.
    Sample {
        #[command(flatten)]
        state: StateArgs,
        /// Records per measurement kind.
        #[arg(long = "n", default_value_t = 100_000)]
        count: usize,
        #[arg(long, value_enum, default_value = "both")]
        measure: SampleKind,
        /// Also write `<prefix>.{position,momentum}.{csv,json}`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Free propagation of a single-particle state.
    Propagate {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_parser = mass, default_value = "1")]
        mass: f64,
        #[arg(long, value_parser = time, default_value = "12")]
        time: f64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Map the propagated density to momenta with p = m(x − ⟨x⟩)/t.
        #[arg(long)]
        far_field: bool,
    },
    /// Visibility of the staggered-emission protocol.
    Protocol {
        /// JSON protocol description (N, emission_times, lambda, envelope, mass).
        #[arg(long, requires = "meeting_time")]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = time)]
        meeting_time: Option<f64>,
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
        #[arg(long, value_parser = length, default_value = "1")]
        lambda: f64,
        #[arg(long, value_parser = length)]
        sigma: Option<f64>,
        #[arg(long, value_parser = mass, default_value = "1")]
        mass: f64,
        /// Single emission stagger; otherwise a sweep from 0 to --stagger-max.
        #[arg(long, value_parser = time)]
        stagger: Option<f64>,
        #[arg(long, value_parser = time, default_value = "100")]
        stagger_max: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Time from the last emission to the meeting.
        #[arg(long, value_parser = time, default_value = "10")]
        meeting_delay: f64,
    },
}

impl Command {
    fn default_format(&self) -> Format {
        match self {
            Command::Table1 | Command::Fringes { .. } | Command::Protocol { .. } => Format::Csv,
            Command::Propagate { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Reads `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new("config", format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::new("config", format!("line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::new("config", format!("line {}: empty key or value", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Long names of options that consume a value, keyed by name.
fn options_of(cmd: &clap::Command) -> BTreeMap<String, bool> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .collect()
}

/// Splices config entries in front of the command-line flags so that the
/// latter win, rejecting keys the chosen subcommand does not know.
fn merge_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let root = Cli::command();
    let globals = options_of(&root);
    // locate --config and the subcommand
    let mut config = None;
    let mut sub_at = None;
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if let Some(rest) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(rest));
        } else if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if let Some(name) = a.strip_prefix("--") {
            if sub_at.is_none() && !name.contains('=') && globals.get(name) == Some(&true) {
                i += 1;
            }
        } else if sub_at.is_none() && !a.starts_with('-') {
            sub_at = Some(i);
        }
        i += 1;
    }
    let Some(path) = config else { return Ok(args) };
    let entries = read_config(&path)?;
    let sub = sub_at.and_then(|k| root.find_subcommand(&args[k]).cloned());
    let local = sub.as_ref().map(options_of).unwrap_or_default();
    let (mut head, mut tail) = (Vec::new(), Vec::new());
    for (k, v) in entries {
        let (takes_value, target) = match (globals.get(&k), local.get(&k)) {
            _ if matches!(k.as_str(), "config" | "help" | "version") => {
                return Err(CliError::new("config", format!("key '{k}' is not allowed in a config file")))
            }
            (Some(t), _) => (*t, &mut head),
            (None, Some(t)) => (*t, &mut tail),
            (None, None) => return Err(CliError::new("config", format!("unknown key '{k}'"))),
        };
        if takes_value {
            target.push(format!("--{k}={v}"));
        } else {
            match v.as_str() {
                "true" => target.push(format!("--{k}")),
                "false" => {}
                _ => return Err(CliError::new("config", format!("flag '{k}' needs true or false"))),
            }
        }
    }
    let mut merged = vec![args[0].clone()];
    merged.extend(head);
    match sub_at {
        Some(k) => {
            merged.extend(args[1..=k].iter().cloned());
            merged.extend(tail);
            merged.extend(args[k + 1..].iter().cloned());
        }
        None => merged.extend(args[1..].iter().cloned()),
    }
    Ok(merged)
}

/// Outcome of a run that did not fail.
pub enum Outcome {
    /// Rendered result, already written to `--output` if one was given.
    Text(String),
    /// Help or version text requested by the user.
    Info(String),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<String>) -> CliResult<Outcome> {
    let args = merge_config(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Ok(Outcome::Info(e.to_string()));
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::new("usage", first.trim_start_matches("error: ")));
        }
    };
    let format = cli.format.unwrap_or_else(|| cli.command.default_format());
    let ctx = Context { format, seed: cli.seed, grid_points: cli.grid_points, periods: cli.periods };
    let text = ctx.execute(&cli.command)?;
    if let Some(path) = &cli.output {
        std::fs::write(path, &text)
            .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(Outcome::Text(text))
}

struct Context {
    format: Format,
    seed: Option<u64>,
    grid_points: Option<usize>,
    periods: Option<usize>,
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// `field,value` rows for a flat JSON object.
fn key_value_csv<T: Serialize>(value: &T) -> String {
    let mut out = String::from("field,value\n");
    if let serde_json::Value::Object(map) = serde_json::to_value(value).expect("reports serialize") {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k},{v}");
        }
    }
    out
}

impl StateArgs {
    fn descriptor(&self, default_kind: StateKind) -> CliResult<StateDescriptor> {
        if let Some(path) = &self.state {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
            return Ok(StateDescriptor::from_json(&text)?);
        }
        let kind = match self.kind {
            None => default_kind,
            Some(KindArg::Multislit) => StateKind::Multislit,
            Some(KindArg::Smp) => StateKind::Smp,
            Some(KindArg::Mpe) => StateKind::Mpe,
            Some(KindArg::Classical) => StateKind::Classical,
            Some(KindArg::Admixture) => StateKind::Admixture,
        };
        let lambda = self.lambda.unwrap_or(1.0);
        let envelope = match (self.sigma, self.sinc_d) {
            (_, Some(d)) => EnvelopeSpec::Sinc { d },
            (Some(sigma), None) => EnvelopeSpec::Gaussian { sigma },
            (None, None) if kind == StateKind::Multislit => EnvelopeSpec::Gaussian { sigma: 0.1 * lambda },
            (None, None) => EnvelopeSpec::Gaussian { sigma: 5.0 * lambda },
        };
        Ok(StateDescriptor {
            kind,
            n: self.n.unwrap_or(2),
            x0: self.x0.unwrap_or(0.0),
            n0: self.n0.unwrap_or(0),
            lambda,
            envelope,
            phase_ref: self.phase_ref,
            epsilon: self.epsilon,
        })
    }
}

fn warn(descriptor: &StateDescriptor) -> CliResult<()> {
    if let Some(w) = descriptor.warning()? {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn pair_state(built: BuiltState) -> CliResult<MixtureState> {
    match built {
        BuiltState::Pair(m) => Ok(m),
        BuiltState::Single(_) => Err(CliError::new("arity", "this command needs a two-particle state")),
    }
}

fn single_state(built: BuiltState) -> CliResult<SuperposedState> {
    match built {
        BuiltState::Single(s) => Ok(s),
        BuiltState::Pair(_) => Err(CliError::new("arity", "this command needs a single-particle state")),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| lo + k as f64 * step)
}

#[derive(Serialize)]
struct Table1Row {
    #[serde(rename = "N")]
    n: usize,
    s1: f64,
    s2: f64,
}

fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest round-trip form, switching to exponent notation far from unity.
fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e7).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Serialize)]
struct FarFieldRow {
    p: f64,
    density: f64,
    reference: f64,
}

#[derive(Serialize)]
struct PropagationSummary {
    time: f64,
    mass: f64,
    points: usize,
    norm: f64,
    mean_x: f64,
    rms_width_x: f64,
}

#[derive(Serialize)]
struct VisibilityPoint {
    stagger: f64,
    visibility: f64,
}

impl Context {
    fn execute(&self, command: &Command) -> CliResult<String> {
        match command {
            Command::Table1 => self.table1(),
            Command::Constant { method, tolerance } => self.constant(*method, *tolerance),
            Command::Fringes { state, space, range } => self.fringes(state, *space, *range),
            Command::Criterion { state, axis } => self.criterion(state, *axis),
            Command::Robustness { n, n_max, lambda, sigma } => self.robustness(*n, *n_max, *lambda, *sigma),
            Command::Sample { state, count, measure, records } => {
                self.sample(state, *count, *measure, records.as_deref())
            }
            Command::Propagate { state, mass, time, steps, far_field } => {
                self.propagate(state, *mass, *time, *steps, *far_field)
            }
            Command::Protocol { spec, meeting_time, n, lambda, sigma, mass, stagger, stagger_max, steps, meeting_delay } => {
                self.protocol(spec.as_deref(), *meeting_time, *n, *lambda, *sigma, *mass, *stagger, *stagger_max, *steps, *meeting_delay)
            }
        }
    }

    fn table1(&self) -> CliResult<String> {
        let rows = [1usize, 2, 3, 4, 10, 100]
            .iter()
            .map(|&n| Ok(Table1Row { n, s1: round2(squeezing_s1(n)?), s2: round2(squeezing_s2(n)?) }))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(match self.format {
            Format::Json => json(&rows),
            Format::Csv => {
                let mut out = String::from("N,S1,S2\n");
                for r in &rows {
                    let _ = writeln!(out, "{},{:.2},{:.2}", r.n, r.s1, r.s2);
                }
                out
            }
        })
    }

    fn constant(&self, method: MethodArg, tolerance: Option<f64>) -> CliResult<String> {
        let tol = tolerance.unwrap_or(DEFAULT_TOLERANCE);
        let periods = self.periods.unwrap_or(64);
        let points = self.grid_points.unwrap_or(periods * 256);
        if periods == 0 || !points.is_multiple_of(periods) {
            return Err(CliError::new("invalid_parameter", "grid points must be a multiple of the periods"));
        }
        let perturbative = || EigenSolveReport {
            c: perturbative_c(),
            mu_spectrum_head: vec![perturbative_c()],
            method: crate::spectral::Method::Perturbative,
            residual: 0.0,
        };
        let mut reports = Vec::new();
        if matches!(method, MethodArg::Kummer | MethodArg::All) {
            reports.push(solve_c(tol)?);
        }
        if matches!(method, MethodArg::Brute | MethodArg::All) {
            reports.push(brute_force_c(periods, points / periods)?);
        }
        if matches!(method, MethodArg::Perturbative | MethodArg::All) {
            reports.push(perturbative());
        }
        Ok(match self.format {
            Format::Json if reports.len() == 1 => json(&reports[0]),
            Format::Json => json(&reports),
            Format::Csv => {
                let mut out = String::from("method,c,residual\n");
                for r in &reports {
                    let m = serde_json::to_value(r.method).expect("method serializes");
                    let _ = writeln!(out, "{},{:.12},{:e}", m.as_str().unwrap_or_default(), r.c, r.residual);
                }
                out
            }
        })
    }

    fn fringes(&self, args: &StateArgs, space: Space, range: Option<f64>) -> CliResult<String> {
        let d = args.descriptor(StateKind::Mpe)?;
        warn(&d)?;
        let points = self.grid_points.unwrap_or(1001);
        let env: Envelope = d.envelope.clone().try_into()?;
        let mut out = String::new();
        match (d.build()?, space) {
            (BuiltState::Single(s), Space::Position) => {
                let xs: Vec<f64> = s.terms().iter().map(|(_, p)| p.x0).collect();
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let half = range.unwrap_or(0.5 * (hi - lo) + 4.0 * env.width());
                let c = 0.5 * (lo + hi);
                out.push_str("x[length],density[1/length]\n");
                for x in linspace(c - half, c + half, points) {
                    let _ = writeln!(out, "{},{}", num(x), num(s.position_density(x)));
                }
            }
            (BuiltState::Single(s), Space::Momentum) => {
                let pmax = s.terms().iter().map(|(_, p)| p.p0.abs()).fold(0.0, f64::max);
                let half = range.unwrap_or(pmax + env.bandwidth());
                out.push_str("p[1/length],density[length]\n");
                for p in linspace(-half, half, points) {
                    let _ = writeln!(out, "{},{}", num(p), num(s.momentum_density(p)));
                }
            }
            (BuiltState::Pair(m), Space::Position) => {
                let half = range.unwrap_or(3.0 * env.width());
                out.push_str("x_rel[length],density[1/length^2]\n");
                for s in linspace(-half, half, points) {
                    let (x1, x2) = (d.x0 + 0.5 * s, -d.x0 - 0.5 * s);
                    let _ = writeln!(out, "{},{}", num(x1 - x2), num(m.joint_position_density(x1, x2)));
                }
            }
            (BuiltState::Pair(m), Space::Momentum) => {
                let kmax = (d.n0.unsigned_abs() as f64 + d.n as f64) * crate::PLANCK / d.lambda;
                let half = range.unwrap_or(kmax + env.bandwidth());
                out.push_str("p1[1/length],density[length^2]\n");
                for p in linspace(-half, half, points) {
                    let _ = writeln!(out, "{},{}", num(p), num(m.joint_momentum_density(p, -p)));
                }
            }
        }
        Ok(out)
    }

    fn criterion(&self, args: &StateArgs, axis: AxisArg) -> CliResult<String> {
        let d = args.descriptor(StateKind::Mpe)?;
        warn(&d)?;
        let state = pair_state(d.build()?)?;
        let axis = match axis {
            AxisArg::MomentumInteger => CriterionAxis::MomentumInteger,
            AxisArg::PositionInteger => CriterionAxis::PositionInteger,
        };
        let grid = GridOptions::with_points(self.grid_points.unwrap_or(1 << 16));
        let report = evaluate_criterion(&state, d.scale()?, axis, grid)?;
        Ok(match self.format {
            Format::Json => json(&report),
            Format::Csv => key_value_csv(&report),
        })
    }

    fn robustness(&self, n: usize, n_max: Option<usize>, lambda: f64, sigma: Option<f64>) -> CliResult<String> {
        let env = Envelope::gaussian(sigma.unwrap_or(5.0 * lambda))?;
        let grid = GridOptions::with_points(self.grid_points.unwrap_or(1 << 14));
        let range: Vec<usize> = match n_max {
            Some(m) => (n.min(2)..=m).filter(|&k| k >= 2).collect(),
            None => vec![n],
        };
        let reports = range
            .iter()
            .map(|&k| {
                let p = crate::states::ModularStateParams::new(k, 0.0, 0, lambda, env.clone());
                Ok(robustness_threshold(&p, grid)?)
            })
            .collect::<CliResult<Vec<RobustnessReport>>>()?;
        Ok(match self.format {
            Format::Json if n_max.is_none() => json(&reports[0]),
            Format::Json => json(&reports),
            Format::Csv => {
                let mut out = String::from(
                    "N,epsilon_closed_form,epsilon_bisection,discrepancy,flagged,visibility_at_threshold\n",
                );
                for r in &reports {
                    let _ = writeln!(
                        out,
                        "{},{:.9},{:.9},{:.3e},{},{:.9}",
                        r.n, r.epsilon_closed_form, r.epsilon_bisection, r.discrepancy, r.flagged, r.visibility_at_threshold
                    );
                }
                out
            }
        })
    }

    fn sample(&self, args: &StateArgs, count: usize, measure: SampleKind, records: Option<&Path>) -> CliResult<String> {
        let d = args.descriptor(StateKind::Mpe)?;
        warn(&d)?;
        let scale = d.scale()?;
        let state = pair_state(d.build()?)?;
        let grid = GridOptions::with_points(self.grid_points.unwrap_or(1 << 16)).discretize(&state, scale)?;
        let seed = self.seed.unwrap_or(0);
        let kinds: &[MeasurementKind] = match measure {
            SampleKind::Both => &[MeasurementKind::Position, MeasurementKind::Momentum],
            SampleKind::Position => &[MeasurementKind::Position],
            SampleKind::Momentum => &[MeasurementKind::Momentum],
        };
        let sets = kinds
            .iter()
            .map(|&k| Ok(sample_measurements(&grid, k, count, seed)?))
            .collect::<CliResult<Vec<SampleSet>>>()?;
        if let Some(prefix) = records {
            for s in &sets {
                let name = match s.kind {
                    MeasurementKind::Position => "position",
                    MeasurementKind::Momentum => "momentum",
                };
                let base = prefix.display();
                let mut csv = Vec::new();
                s.write_csv(&mut csv)?;
                std::fs::write(format!("{base}.{name}.csv"), csv)?;
                std::fs::write(format!("{base}.{name}.json"), json(&s.sidecar(Some(d.hash()))))?;
            }
        }
        if let [single] = sets.as_slice() {
            let mut csv = Vec::new();
            single.write_csv(&mut csv)?;
            return Ok(String::from_utf8(csv).expect("CSV is UTF-8"));
        }
        let report = estimate_criterion(&sets[0], &sets[1], scale)?;
        Ok(match self.format {
            Format::Json => json(&report),
            Format::Csv => key_value_csv(&report),
        })
    }

    fn propagate(&self, args: &StateArgs, mass: f64, time: f64, steps: usize, far_field: bool) -> CliResult<String> {
        let d = args.descriptor(StateKind::Multislit)?;
        warn(&d)?;
        let state = single_state(d.build()?)?;
        let params = PropagationParams::new(mass, time)?;
        let env: Envelope = d.envelope.clone().try_into()?;
        let points = self.grid_points.unwrap_or(1 << 17);
        let pmax = state.terms().iter().map(|(_, p)| p.p0.abs()).fold(0.0, f64::max) + env.bandwidth();
        let base = single_grid_spec(&state, points, crate::states::DEFAULT_HALFWIDTH_SIGMAS, None)?;
        let half = 0.5 * base.box_len() + 1.5 * pmax * time / mass;
        let center = 0.5 * (base.min() + base.max());
        let spec = GridSpec::new(points, center - half, center + half)?;
        let wave = discretize_single(&state, spec, None)?;
        if far_field {
            let profile = far_field_momentum_density(&wave, params)?;
            let rows: Vec<FarFieldRow> = profile
                .iter()
                .step_by((points / 4096).max(1))
                .map(|&(p, density)| FarFieldRow { p, density, reference: state.momentum_density(p) })
                .collect();
            if self.format == Format::Json {
                return Ok(json(&rows));
            }
            let mut out = String::from("p[1/length],density[length],reference[length]\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{}", num(r.p), num(r.density), num(r.reference));
            }
            return Ok(out);
        }
        let out_wave = if steps > 1 {
            propagate_in_steps(&wave, params, steps, |_, _| {})?
        } else {
            match free_propagate(&GridState::Single(wave.clone()), params)? {
                GridState::Single(w) => w,
                _ => unreachable!("single states propagate to single states"),
            }
        };
        match self.format {
            Format::Json => {
                let dens = out_wave.position_density();
                let z: f64 = dens.iter().sum();
                let mean = out_wave.mean_position();
                let var = spec.xs().zip(&dens).map(|(x, p)| (x - mean).powi(2) * p).sum::<f64>() / z;
                Ok(json(&PropagationSummary {
                    time,
                    mass,
                    points,
                    norm: out_wave.norm2(),
                    mean_x: mean,
                    rms_width_x: var.sqrt(),
                }))
            }
            Format::Csv => {
                let mut out = String::from("x[length],density[1/length]\n");
                for (x, rho) in spec.xs().zip(out_wave.position_density()).step_by((points / 4096).max(1)) {
                    let _ = writeln!(out, "{},{}", num(x), num(rho));
                }
                Ok(out)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn protocol(
        &self,
        spec_path: Option<&Path>,
        meeting_time: Option<f64>,
        n: usize,
        lambda: f64,
        sigma: Option<f64>,
        mass: f64,
        stagger: Option<f64>,
        stagger_max: f64,
        steps: usize,
        meeting_delay: f64,
    ) -> CliResult<String> {
        let mut points = Vec::new();
        if let Some(path) = spec_path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
            let spec: ProtocolSpec = serde_json::from_str(&text).map_err(Error::from)?;
            let t = meeting_time.expect("clap enforces --meeting-time with --spec");
            let stagger = spec.emission_times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            points.push(VisibilityPoint { stagger, visibility: protocol_visibility(&spec, t)? });
        } else {
            let env = Envelope::gaussian(sigma.unwrap_or(5.0 * lambda))?;
            let staggers: Vec<f64> = match stagger {
                Some(s) => vec![s],
                None if steps < 2 => vec![stagger_max],
                None => linspace(0.0, stagger_max, steps).collect(),
            };
            for s in staggers {
                let spec = ProtocolSpec::uniform(n, s, lambda, env.clone(), mass);
                let t = (n.saturating_sub(1)) as f64 * s + meeting_delay;
                points.push(VisibilityPoint { stagger: s, visibility: protocol_visibility(&spec, t)? });
            }
        }
        Ok(match self.format {
            Format::Json if points.len() == 1 => json(&points[0]),
            Format::Json => json(&points),
            Format::Csv => {
                let mut out = String::from("stagger[time],visibility\n");
                for p in &points {
                    let _ = writeln!(out, "{},{:.9}", p.stagger, p.visibility);
                }
                out
            }
        })
    }
}
