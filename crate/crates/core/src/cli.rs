//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 validation error, 4 numeric
//! failure during integration, 5 evaluators disagree beyond the threshold.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::compiler::{compile_step, CompileError, CompiledStep};
use crate::graph::{deserialize, NetworkGraph};
use crate::models::{DecayParams, MdsParams, ModelError, RhsModel};
use crate::oracle::{
    compare_trajectories, fmt_real, integrate_graph, integrate_oracle, IntegrationError, Trajectory,
};
use crate::subnets::PassthroughMode;
use crate::tableau::{builtin, parse_tableau, ButcherTableau, TableauError, BUILTIN_NAMES};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Mismatch(_) => 5,
        }
    }
}

impl From<IntegrationError> for CliError {
    fn from(e: IntegrationError) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CompileError> for CliError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Tableau(_) | CompileError::Graph(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "rknet",
    version,
    about = "Compile explicit Runge-Kutta schemes into fixed-weight networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile one timestep into a network document and print its size.
    Compile {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write the network document here; metadata goes to `<stem>.meta.json`.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Override the metadata sidecar path.
        #[arg(long, requires = "emit")]
        meta: Option<PathBuf>,
    },
    /// Integrate and write the trajectory as CSV.
    Integrate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Evaluator::Network)]
        evaluator: Evaluator,
        /// Use this step network instead of compiling one.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two evaluators on the same problem and report their differences.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Evaluator::Network)]
        evaluator: Evaluator,
        #[arg(long, value_enum, default_value_t = Evaluator::Oracle)]
        reference: Evaluator,
        /// Use this step network for the network evaluator.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Largest acceptable componentwise relative difference.
        #[arg(long, default_value_t = 1e-12)]
        threshold: f64,
    },
    /// Estimate the convergence order against the analytic solution.
    Order {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u0: Option<Vec<f64>>,
        /// Final time.
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Explicit list of timesteps; overrides --dt/--levels.
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
        /// Number of timesteps, halving from --dt.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Evaluator::Network)]
        evaluator: Evaluator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Evaluator {
    Network,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Mds,
    Decay,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Passthrough {
    Linear,
    ReluPair,
}

impl From<Passthrough> for PassthroughMode {
    fn from(p: Passthrough) -> Self {
        match p {
            Passthrough::Linear => PassthroughMode::Linear,
            Passthrough::ReluPair => PassthroughMode::ReluPair,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Builtin tableau name or path to a tableau document.
    #[arg(long, default_value = "rk4")]
    pub tableau: String,
    #[arg(long, value_enum, default_value_t = ModelKind::Mds)]
    pub model: ModelKind,
    /// Mass.
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Damping.
    #[arg(long, default_value_t = 0.0)]
    pub d: f64,
    /// Stiffness.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Decay rate.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    /// State dimension of the zero model.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = Passthrough::Linear)]
    pub passthrough: Passthrough,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u0: Option<Vec<f64>>,
}

/// Resolves `--tableau` as a builtin name, then as a file path.
pub fn load_tableau(spec: &str) -> Result<ButcherTableau, CliError> {
    if BUILTIN_NAMES.contains(&spec) {
        return builtin(spec).map_err(|e| CliError::Config(e.to_string()));
    }
    let path = Path::new(spec);
    if !path.is_file() {
        let e = TableauError::UnknownName {
            name: spec.to_string(),
        };
        return Err(CliError::Config(format!(
            "{e} (or a path to a tableau document)"
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_tableau(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn build_model(p: &ProblemArgs) -> Result<RhsModel, CliError> {
    Ok(match p.model {
        ModelKind::Mds => RhsModel::Mds(MdsParams::new(p.m, p.d, p.c)?),
        ModelKind::Decay => RhsModel::Decay(DecayParams::new(p.lambda)?),
        ModelKind::Zero => {
            if p.dim == 0 {
                return Err(ModelError::ZeroDim.into());
            }
            RhsModel::Zero { dim: p.dim }
        }
    })
}

fn check_dt(dt: f64) -> Result<(), CliError> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "--dt must be positive and finite, got {dt}"
        )))
    }
}

fn initial_state(model: &RhsModel, u0: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let n = model.state_dim();
    let u = match u0 {
        Some(u) => u.clone(),
        None => match model {
            RhsModel::Mds(_) => vec![1.0, 0.0],
            _ => vec![1.0; n],
        },
    };
    if u.len() != n {
        return Err(CliError::Config(format!(
            "initial state has {} components but the model has {n}",
            u.len()
        )));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config("initial state must be finite".into()));
    }
    Ok(u)
}

fn compile(
    problem: &ProblemArgs,
    tab: &ButcherTableau,
    model: &RhsModel,
    dt: f64,
) -> Result<CompiledStep, CliError> {
    Ok(compile_step(
        tab,
        &model.net()?,
        dt,
        problem.passthrough.into(),
    )?)
}

fn load_network(path: &Path, state_dim: usize) -> Result<NetworkGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let net =
        deserialize(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if net.input_dim() != state_dim + 1 || net.output_dim() != state_dim {
        return Err(CliError::Config(format!(
            "{}: network maps {} inputs to {} outputs but the model state has {state_dim} components",
            path.display(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(net)
}

struct Problem {
    tableau: ButcherTableau,
    model: RhsModel,
    dt: f64,
    t0: f64,
    u0: Vec<f64>,
}

impl Problem {
    fn trajectory(
        &self,
        evaluator: Evaluator,
        network: Option<&NetworkGraph>,
        passthrough: Passthrough,
        steps: usize,
    ) -> Result<Trajectory, CliError> {
        let n = self.model.state_dim();
        match evaluator {
            Evaluator::Oracle => {
                let m = self.model;
                Ok(integrate_oracle(
                    &self.tableau,
                    |u, t| m.eval(u, t),
                    self.t0,
                    &self.u0,
                    self.dt,
                    steps,
                )?)
            }
            Evaluator::Network => {
                let compiled;
                let net = match network {
                    Some(net) => net,
                    None => {
                        compiled = compile_step(
                            &self.tableau,
                            &self.model.net()?,
                            self.dt,
                            passthrough.into(),
                        )?;
                        &compiled.net
                    }
                };
                Ok(integrate_graph(net, n, self.dt, self.t0, &self.u0, steps)?)
            }
        }
    }
}

fn setup(problem: &ProblemArgs, run: &RunArgs) -> Result<Problem, CliError> {
    let tableau = load_tableau(&problem.tableau)?;
    let model = build_model(problem)?;
    check_dt(problem.dt)?;
    if run.steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    if !run.t0.is_finite() {
        return Err(CliError::Config("--t0 must be finite".into()));
    }
    let u0 = initial_state(&model, &run.u0)?;
    Ok(Problem {
        tableau,
        model,
        dt: problem.dt,
        t0: run.t0,
        u0,
    })
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}"))),
    }
}

/// `net.json` -> `net.meta.json`.
pub fn sidecar_path(emit: &Path) -> PathBuf {
    let stem = emit
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    emit.with_file_name(format!("{stem}.meta.json"))
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compile {
            problem,
            emit,
            meta,
        } => {
            let tableau = load_tableau(&problem.tableau)?;
            let model = build_model(&problem)?;
            check_dt(problem.dt)?;
            let step = compile(&problem, &tableau, &model, problem.dt)?;
            if let Some(path) = emit {
                write_output(Some(&path), &step.net.to_json(), stdout)?;
                let meta = meta.unwrap_or_else(|| sidecar_path(&path));
                write_output(Some(&meta), &step.metadata_json(), stdout)?;
            }
            writeln!(stdout, "{}", step.stats())
                .map_err(|e| CliError::Config(format!("stdout: {e}")))
        }
        Command::Integrate {
            problem,
            run,
            evaluator,
            network,
            out,
        } => {
            let p = setup(&problem, &run)?;
            let net = network
                .as_deref()
                .map(|path| load_network(path, p.model.state_dim()))
                .transpose()?;
            let traj = p.trajectory(evaluator, net.as_ref(), problem.passthrough, run.steps)?;
            write_output(out.as_deref(), &traj.to_csv(), stdout)
        }
        Command::Compare {
            problem,
            run,
            evaluator,
            reference,
            network,
            threshold,
        } => {
            if threshold.is_nan() || threshold < 0.0 {
                return Err(CliError::Config(format!(
                    "--threshold must be nonnegative, got {threshold}"
                )));
            }
            let p = setup(&problem, &run)?;
            let net = network
                .as_deref()
                .map(|path| load_network(path, p.model.state_dim()))
                .transpose()?;
            let a = p.trajectory(evaluator, net.as_ref(), problem.passthrough, run.steps)?;
            let b = p.trajectory(reference, net.as_ref(), problem.passthrough, run.steps)?;
            let diffs = compare_trajectories(&a, &b)?;
            let mut report = String::new();
            let name = |e: Evaluator| match e {
                Evaluator::Network => "network",
                Evaluator::Oracle => "oracle",
            };
            let _ = writeln!(report, "evaluator: {}", name(evaluator));
            let _ = writeln!(report, "reference: {}", name(reference));
            let _ = writeln!(report, "steps: {}", run.steps);
            for (k, d) in diffs.iter().enumerate() {
                let _ = writeln!(
                    report,
                    "u{}: max_abs={} max_rel={}",
                    k + 1,
                    fmt_real(d.max_abs),
                    fmt_real(d.max_rel)
                );
            }
            let worst = diffs.iter().map(|d| d.max_rel).fold(0.0, f64::max);
            let _ = writeln!(report, "max_rel: {}", fmt_real(worst));
            let _ = writeln!(report, "threshold: {}", fmt_real(threshold));
            write_output(None, &report, stdout)?;
            if worst <= threshold {
                Ok(())
            } else {
                Err(CliError::Mismatch(format!(
                    "evaluators differ: max relative difference {} exceeds {}",
                    fmt_real(worst),
                    fmt_real(threshold)
                )))
            }
        }
        Command::Order {
            problem,
            t0,
            u0,
            t_end,
            dts,
            levels,
            evaluator,
            out,
        } => {
            let dts = match dts {
                Some(list) => list,
                None => (0..levels)
                    .map(|k| problem.dt / f64::from(1u32 << k.min(31)))
                    .collect(),
            };
            if dts.len() < 2 {
                return Err(CliError::Config(
                    "an order estimate needs at least two timesteps".into(),
                ));
            }
            let span = t_end - t0;
            if !(span.is_finite() && span > 0.0) {
                return Err(CliError::Config(
                    "--t-end must be finite and after --t0".into(),
                ));
            }
            let mut table = csv::Writer::from_writer(Vec::new());
            table
                .write_record(["dt", "endpoint_error", "observed_order"])
                .expect("in-memory csv");
            let mut prev: Option<(f64, f64)> = None;
            for &dt in &dts {
                check_dt(dt)?;
                let steps = (span / dt).round();
                if steps < 1.0 || (steps * dt - span).abs() > 1e-9 * span {
                    return Err(CliError::Config(format!(
                        "dt {dt} does not divide the interval {span}"
                    )));
                }
                let run = RunArgs {
                    steps: steps as usize,
                    t0,
                    u0: u0.clone(),
                };
                let mut p = setup(&problem, &run)?;
                p.dt = dt;
                let traj = p.trajectory(evaluator, None, problem.passthrough, run.steps)?;
                let exact = p
                    .model
                    .exact(&p.u0, t0, *traj.times.last().expect("nonempty"))?;
                let err = traj
                    .last()
                    .expect("nonempty")
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let order = prev.map(|(pdt, perr)| (perr / err).ln() / (pdt / dt).ln());
                table
                    .write_record([
                        fmt_real(dt),
                        fmt_real(err),
                        order.map(fmt_real).unwrap_or_default(),
                    ])
                    .expect("in-memory csv");
                prev = Some((dt, err));
            }
            let text =
                String::from_utf8(table.into_inner().expect("in-memory csv")).expect("ascii csv");
            write_output(out.as_deref(), &text, stdout)
        }
    }
}
