//! Reference explicit Runge-Kutta integrator working on plain functions.
//!
//! Sums are accumulated from `0.0` in the order `u` first, then stages in
//! ascending index, with the products `dt * a_ij`, `c_i * dt` and `dt * b_i`
//! rounded once each. Compiled networks use the same order, so the two
//! evaluators agree bit for bit.

use thiserror::Error;

use crate::compiler::CompiledStep;
use crate::graph::{GraphError, NetworkGraph};
use crate::tableau::{ButcherTableau, TableauReport};

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("invalid tableau: {0}")]
    Tableau(TableauReport),
    #[error("timestep must be finite and nonzero, got {0}")]
    Dt(f64),
    #[error("state has {actual} components, expected {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("right-hand side returned a non-finite value at stage {stage}")]
    NonFiniteStage { stage: usize },
    #[error("non-finite state after step {step}")]
    NonFiniteState { step: usize },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<IntegrationError>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl IntegrationError {
    /// 1-based step at which integration failed, if known.
    pub fn step(&self) -> Option<usize> {
        match self {
            IntegrationError::Step { step, .. } | IntegrationError::NonFiniteState { step } => {
                Some(*step)
            }
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        match self {
            IntegrationError::NonFiniteStage { .. } | IntegrationError::NonFiniteState { .. } => {
                true
            }
            IntegrationError::Step { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

/// One step of the explicit method; `rhs(state, time)`. Stages are
/// reported 1-based in errors.
pub fn rk_step<F>(
    tab: &ButcherTableau,
    rhs: F,
    time: f64,
    u: &[f64],
    dt: f64,
) -> Result<Vec<f64>, IntegrationError>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    let report = tab.validate();
    if !report.is_valid() {
        return Err(IntegrationError::Tableau(report));
    }
    if !dt.is_finite() || dt == 0.0 {
        return Err(IntegrationError::Dt(dt));
    }
    let n = u.len();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(tab.stages());
    for i in 0..tab.stages() {
        let arg: Vec<f64> = (0..n)
            .map(|k| {
                let mut acc = 0.0 + u[k];
                for (j, r) in stages.iter().enumerate() {
                    acc += (dt * tab.a[i][j]) * r[k];
                }
                acc
            })
            .collect();
        let stage_time = (0.0 + time) + tab.c[i] * dt;
        let r = rhs(&arg, stage_time);
        if r.len() != n {
            return Err(IntegrationError::Dimension {
                expected: n,
                actual: r.len(),
            });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(IntegrationError::NonFiniteStage { stage: i + 1 });
        }
        stages.push(r);
    }
    Ok((0..n)
        .map(|k| {
            let mut acc = 0.0 + u[k];
            for (i, r) in stages.iter().enumerate() {
                acc += (dt * tab.b[i]) * r[k];
            }
            acc
        })
        .collect())
}

/// States on the uniform grid `t0 + k dt`, one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// CSV with header `t,u1,...,un`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.state_dim()).map(|k| format!("u{k}")));
        w.write_record(&header).expect("in-memory csv");
        for (t, u) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt_real(*t)];
            row.extend(u.iter().map(|&x| fmt_real(x)));
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("ascii csv")
    }
}

/// Shortest decimal that parses back to the same binary64 value.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

fn grid_time(t0: f64, k: usize, dt: f64) -> f64 {
    t0 + k as f64 * dt
}

pub fn integrate_oracle<F>(
    tab: &ButcherTableau,
    rhs: F,
    t0: f64,
    u0: &[f64],
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory, IntegrationError>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.to_vec()],
    };
    let mut u = u0.to_vec();
    for k in 0..n_steps {
        let step = k + 1;
        u = rk_step(tab, &rhs, grid_time(t0, k, dt), &u, dt).map_err(|e| {
            IntegrationError::Step {
                step,
                source: Box::new(e),
            }
        })?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(IntegrationError::NonFiniteState { step });
        }
        traj.times.push(grid_time(t0, step, dt));
        traj.states.push(u.clone());
    }
    Ok(traj)
}

/// Repeatedly applies a step network `(u, t) -> u_next` of state size
/// `state_dim` on the grid `t0 + k dt`.
pub fn integrate_graph(
    net: &NetworkGraph,
    state_dim: usize,
    dt: f64,
    t0: f64,
    u0: &[f64],
    n_steps: usize,
) -> Result<Trajectory, IntegrationError> {
    if net.input_dim() != state_dim + 1 || net.output_dim() != state_dim {
        return Err(IntegrationError::Dimension {
            expected: state_dim,
            actual: net.output_dim(),
        });
    }
    if u0.len() != state_dim {
        return Err(IntegrationError::Dimension {
            expected: state_dim,
            actual: u0.len(),
        });
    }
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.to_vec()],
    };
    let mut input = u0.to_vec();
    input.push(t0);
    for k in 0..n_steps {
        let step = k + 1;
        *input.last_mut().expect("time lane") = grid_time(t0, k, dt);
        let u = net.eval(&input)?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(IntegrationError::NonFiniteState { step });
        }
        input[..state_dim].copy_from_slice(&u);
        traj.times.push(grid_time(t0, step, dt));
        traj.states.push(u);
    }
    Ok(traj)
}

pub fn integrate_network(
    step: &CompiledStep,
    t0: f64,
    u0: &[f64],
    n_steps: usize,
) -> Result<Trajectory, IntegrationError> {
    integrate_graph(&step.net, step.state_dim(), step.dt, t0, u0, n_steps)
}

/// `|a - b| / max(|a|, |b|)`, zero when the values are equal.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let diff = (a - b).abs();
    if diff.is_nan() {
        return f64::INFINITY;
    }
    diff / a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComponentDifference {
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Per-component maxima over all rows. Trajectories must have the same
/// shape.
pub fn compare_trajectories(
    a: &Trajectory,
    b: &Trajectory,
) -> Result<Vec<ComponentDifference>, IntegrationError> {
    if a.len() != b.len() || a.state_dim() != b.state_dim() {
        return Err(IntegrationError::Dimension {
            expected: a.state_dim(),
            actual: b.state_dim(),
        });
    }
    let mut out = vec![ComponentDifference::default(); a.state_dim()];
    for (ua, ub) in a.states.iter().zip(&b.states) {
        for ((d, &x), &y) in out.iter_mut().zip(ua).zip(ub) {
            let abs = if x == y { 0.0 } else { (x - y).abs() };
            let abs = if abs.is_nan() { f64::INFINITY } else { abs };
            d.max_abs = d.max_abs.max(abs);
            d.max_rel = d.max_rel.max(relative_difference(x, y));
        }
    }
    Ok(out)
}
