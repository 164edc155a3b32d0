//! Unrolls an explicit Runge-Kutta step around a right-hand-side network.
//!
//! The compiled network takes `(u^n, t^n)` and returns `u^{n+1}`. Each stage
//! contributes one argument layer, which forms the stage input
//! `(u^n + dt * sum_j a_ij r^j, t^n + c_i dt)`, followed by the right-hand-side
//! layers. Values needed later (`u^n`, `t^n` and finished stages) travel
//! beside the active lanes as pass-through lanes. A final linear layer forms
//! `u^n + sum_i (dt b_i) r^i`.
//!
//! Neuron order inside every hidden layer is
//! `[u | t | r^1 | ... | r^(i-1) | active]`, so each accumulation visits
//! `u^n` first and then the stages in ascending order, matching
//! [`crate::oracle::rk_step`] term for term.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Activation, DepthStats, GraphError, Layer, NetworkGraph};
use crate::subnets::PassthroughMode;
use crate::tableau::{ButcherTableau, TableauReport};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("right-hand-side network maps {input} inputs to {output} outputs; expected state_dim + 1 -> state_dim")]
    RhsShape { input: usize, output: usize },
    #[error("invalid tableau: {0}")]
    Tableau(TableauReport),
    #[error("timestep must be finite and nonzero, got {0}")]
    Dt(f64),
    #[error("number of steps must be at least 1")]
    ZeroSteps,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Neuron index ranges of one layer. Pass-through ranges hold two neurons
/// per value in `ReluPair` mode. In the output layer `u` holds `u^{n+1}`
/// and `t` (possibly empty) holds `t^n + dt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneRanges {
    pub u: Range<usize>,
    pub t: Range<usize>,
    pub stages: Vec<Range<usize>>,
    pub active: Range<usize>,
}

impl LaneRanges {
    pub fn width(&self) -> usize {
        self.active.end
    }

    /// Ranges are contiguous, in canonical order, and start at 0.
    pub fn is_canonical(&self) -> bool {
        let mut end = 0;
        let all = std::iter::once(&self.u)
            .chain(std::iter::once(&self.t))
            .chain(&self.stages)
            .chain(std::iter::once(&self.active));
        for r in all {
            if r.start != end || r.end < r.start {
                return false;
            }
            end = r.end;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneLayout {
    pub state_dim: usize,
    pub mode: PassthroughMode,
    pub layers: Vec<LaneRanges>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledStep {
    pub net: NetworkGraph,
    pub layout: LaneLayout,
    pub tableau_name: String,
    pub dt: f64,
    pub rhs_depth: usize,
    pub mode: PassthroughMode,
}

/// Sidecar written next to an emitted step network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetadata {
    pub tableau_name: String,
    pub dt: f64,
    pub state_dim: usize,
    pub rhs_depth: usize,
    pub passthrough_mode: PassthroughMode,
    pub lane_layout: Vec<LaneRanges>,
}

impl CompiledStep {
    pub fn state_dim(&self) -> usize {
        self.layout.state_dim
    }

    pub fn stats(&self) -> DepthStats {
        self.net.stats()
    }

    pub fn metadata(&self) -> StepMetadata {
        StepMetadata {
            tableau_name: self.tableau_name.clone(),
            dt: self.dt,
            state_dim: self.state_dim(),
            rhs_depth: self.rhs_depth,
            passthrough_mode: self.mode,
            lane_layout: self.layout.layers.clone(),
        }
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata()).expect("metadata serializes")
    }
}

pub fn depth_stats(step: &CompiledStep) -> DepthStats {
    step.stats()
}

/// `s * (d_r + 1) + 1`.
pub fn expected_depth(stages: usize, rhs_depth: usize) -> usize {
    stages * (rhs_depth + 1) + 1
}

/// Where a carried value lives in the previous layer.
#[derive(Debug, Clone, Copy)]
enum Source {
    Plain(usize),
    /// `ReLU(x)` at the index, `ReLU(-x)` right after it.
    Pair(usize),
}

struct LayerBuilder {
    input_width: usize,
    rows: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activations: Vec<Activation>,
}

impl LayerBuilder {
    fn new(input_width: usize) -> Self {
        LayerBuilder {
            input_width,
            rows: Vec::new(),
            bias: Vec::new(),
            activations: Vec::new(),
        }
    }

    fn row(&self) -> Vec<f64> {
        vec![0.0; self.input_width]
    }

    fn push(&mut self, row: Vec<f64>, bias: f64, act: Activation) -> usize {
        self.rows.push(row);
        self.bias.push(bias);
        self.activations.push(act);
        self.rows.len() - 1
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// Emits neurons carrying `src` unchanged.
    fn carry(&mut self, src: Source, mode: PassthroughMode) -> Source {
        match mode {
            PassthroughMode::Linear => {
                let mut row = self.row();
                read(&mut row, src, 1.0);
                Source::Plain(self.push(row, 0.0, Activation::Linear))
            }
            PassthroughMode::ReluPair => {
                let mut pos = self.row();
                read(&mut pos, src, 1.0);
                let mut neg = self.row();
                read(&mut neg, src, -1.0);
                let at = self.push(pos, 0.0, Activation::Relu);
                self.push(neg, 0.0, Activation::Relu);
                Source::Pair(at)
            }
        }
    }

    fn finish(self) -> Layer {
        Layer::new(self.rows, self.bias, self.activations)
    }
}

/// Adds `w * value(src)` to a row. Zero weights are left out.
fn read(row: &mut [f64], src: Source, w: f64) {
    if w == 0.0 {
        return;
    }
    match src {
        Source::Plain(i) => row[i] = w,
        Source::Pair(i) => {
            row[i] = w;
            row[i + 1] = -w;
        }
    }
}

struct Lanes {
    u: Vec<Source>,
    t: Source,
    stages: Vec<Vec<Source>>,
}

impl Lanes {
    /// Carries every pass-through value into `lb`, returning the new
    /// locations and the ranges they occupy.
    fn carry(
        &self,
        lb: &mut LayerBuilder,
        mode: PassthroughMode,
    ) -> (Lanes, Range<usize>, Range<usize>, Vec<Range<usize>>) {
        let start = lb.len();
        let u: Vec<Source> = self.u.iter().map(|&s| lb.carry(s, mode)).collect();
        let u_range = start..lb.len();
        let t_start = lb.len();
        let t = lb.carry(self.t, mode);
        let t_range = t_start..lb.len();
        let mut stage_ranges = Vec::with_capacity(self.stages.len());
        let stages = self
            .stages
            .iter()
            .map(|r| {
                let s = lb.len();
                let moved = r.iter().map(|&src| lb.carry(src, mode)).collect();
                stage_ranges.push(s..lb.len());
                moved
            })
            .collect();
        (Lanes { u, t, stages }, u_range, t_range, stage_ranges)
    }
}

fn check_inputs(t: &ButcherTableau, rhs: &NetworkGraph, dt: f64) -> Result<usize, CompileError> {
    let n = rhs.output_dim();
    if n == 0 || rhs.input_dim() != n + 1 {
        return Err(CompileError::RhsShape {
            input: rhs.input_dim(),
            output: n,
        });
    }
    let report = t.validate();
    if !report.is_valid() {
        return Err(CompileError::Tableau(report));
    }
    if !dt.is_finite() || dt == 0.0 {
        return Err(CompileError::Dt(dt));
    }
    Ok(n)
}

fn build(
    tab: &ButcherTableau,
    rhs: &NetworkGraph,
    dt: f64,
    mode: PassthroughMode,
    emit_time: bool,
) -> Result<(NetworkGraph, LaneLayout), CompileError> {
    let n = check_inputs(tab, rhs, dt)?;
    let mut layers = Vec::new();
    let mut ranges = Vec::new();
    let mut lanes = Lanes {
        u: (0..n).map(Source::Plain).collect(),
        t: Source::Plain(n),
        stages: Vec::new(),
    };
    let mut active: Vec<Source> = Vec::new();
    let mut width = n + 1;

    for i in 0..tab.stages() {
        // stage argument layer; the previous stage's output joins the
        // pass-through lanes here
        if i > 0 {
            lanes.stages.push(std::mem::take(&mut active));
        }
        let mut lb = LayerBuilder::new(width);
        let (carried, u_range, t_range, stage_ranges) = lanes.carry(&mut lb, mode);
        let act_start = lb.len();
        for k in 0..n {
            let mut row = lb.row();
            read(&mut row, lanes.u[k], 1.0);
            for j in 0..i {
                read(&mut row, lanes.stages[j][k], dt * tab.a[i][j]);
            }
            active.push(Source::Plain(lb.push(row, 0.0, Activation::Linear)));
        }
        let mut row = lb.row();
        read(&mut row, lanes.t, 1.0);
        active.push(Source::Plain(lb.push(
            row,
            tab.c[i] * dt,
            Activation::Linear,
        )));
        ranges.push(LaneRanges {
            u: u_range,
            t: t_range,
            stages: stage_ranges,
            active: act_start..lb.len(),
        });
        width = lb.len();
        layers.push(lb.finish());
        lanes = carried;

        for rhs_layer in rhs.layers() {
            let mut lb = LayerBuilder::new(width);
            let (carried, u_range, t_range, stage_ranges) = lanes.carry(&mut lb, mode);
            let act_start = lb.len();
            let mut next = Vec::with_capacity(rhs_layer.width());
            for ((weights, &bias), &act) in rhs_layer
                .weights
                .iter()
                .zip(&rhs_layer.bias)
                .zip(&rhs_layer.activations)
            {
                let mut row = lb.row();
                for (&w, &src) in weights.iter().zip(&active) {
                    read(&mut row, src, w);
                }
                next.push(Source::Plain(lb.push(row, bias, act)));
            }
            ranges.push(LaneRanges {
                u: u_range,
                t: t_range,
                stages: stage_ranges,
                active: act_start..lb.len(),
            });
            width = lb.len();
            layers.push(lb.finish());
            lanes = carried;
            active = next;
        }
    }
    lanes.stages.push(active);

    let mut lb = LayerBuilder::new(width);
    for k in 0..n {
        let mut row = lb.row();
        read(&mut row, lanes.u[k], 1.0);
        for (i, stage) in lanes.stages.iter().enumerate() {
            read(&mut row, stage[k], dt * tab.b[i]);
        }
        lb.push(row, 0.0, Activation::Linear);
    }
    if emit_time {
        let mut row = lb.row();
        read(&mut row, lanes.t, 1.0);
        lb.push(row, dt, Activation::Linear);
    }
    let out = lb.len();
    ranges.push(LaneRanges {
        u: 0..n,
        t: n..out,
        stages: Vec::new(),
        active: out..out,
    });
    layers.push(lb.finish());

    let net = NetworkGraph::new(n + 1, layers)?;
    debug_assert_eq!(net.depth(), expected_depth(tab.stages(), rhs.depth()));
    let layout = LaneLayout {
        state_dim: n,
        mode,
        layers: ranges,
    };
    Ok((net, layout))
}

/// Compiles one timestep of size `dt` into a network `(u, t) -> u_next`.
pub fn compile_step(
    t: &ButcherTableau,
    rhs: &NetworkGraph,
    dt: f64,
    mode: PassthroughMode,
) -> Result<CompiledStep, CompileError> {
    let (net, layout) = build(t, rhs, dt, mode, false)?;
    Ok(CompiledStep {
        net,
        layout,
        tableau_name: t.name.clone(),
        dt,
        rhs_depth: rhs.depth(),
        mode,
    })
}

/// Like [`compile_step`] but the output is `(u_next, t + dt)`, ready to be
/// chained.
pub fn compile_step_with_time(
    t: &ButcherTableau,
    rhs: &NetworkGraph,
    dt: f64,
    mode: PassthroughMode,
) -> Result<CompiledStep, CompileError> {
    let (net, layout) = build(t, rhs, dt, mode, true)?;
    Ok(CompiledStep {
        net,
        layout,
        tableau_name: t.name.clone(),
        dt,
        rhs_depth: rhs.depth(),
        mode,
    })
}

/// `n_steps` chained timesteps in one network `(u, t) -> u_after`. Time
/// advances inside the network as `t + dt` per step.
pub fn compile_multi(
    t: &ButcherTableau,
    rhs: &NetworkGraph,
    dt: f64,
    n_steps: usize,
    mode: PassthroughMode,
) -> Result<NetworkGraph, CompileError> {
    if n_steps == 0 {
        return Err(CompileError::ZeroSteps);
    }
    let (last, _) = build(t, rhs, dt, mode, false)?;
    let input_dim = last.input_dim();
    let mut layers = Vec::with_capacity(n_steps * last.depth());
    if n_steps > 1 {
        let (timed, _) = build(t, rhs, dt, mode, true)?;
        for _ in 1..n_steps {
            layers.extend_from_slice(timed.layers());
        }
    }
    layers.extend(last.into_layers());
    Ok(NetworkGraph::new(input_dim, layers)?)
}
