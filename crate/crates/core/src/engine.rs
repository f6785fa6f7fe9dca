//! Projected decentralized SGD: every node mixes its neighbours' iterates,
//! then takes a projected stochastic gradient step evaluated at its own
//! pre-mixing iterate.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{self, LossError, LossModel};
use crate::mixing::MixingMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("non-finite iterate at step {step}")]
    NonFinite { step: usize },
    #[error("average iterate needs at least two steps, got T={0}")]
    TooFewSteps(usize),
}

/// Step-size rule `α_t`, indexed from `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant {
        alpha: f64,
    },
    /// `c / (t + 1)`.
    InverseT {
        c: f64,
    },
    /// `1 / (ν (t + 1))`.
    InverseNuT {
        nu: f64,
    },
    /// `1 / (2ν (t + 1))`.
    InverseTwoNuT {
        nu: f64,
    },
}

impl StepSchedule {
    pub fn alpha(&self, t: usize) -> f64 {
        let k = (t + 1) as f64;
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::InverseT { c } => c / k,
            StepSchedule::InverseNuT { nu } => 1.0 / (nu * k),
            StepSchedule::InverseTwoNuT { nu } => 1.0 / (2.0 * nu * k),
        }
    }

    /// Scale parameter (`α`, `c` or `ν`).
    pub fn parameter(&self) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::InverseT { c } => c,
            StepSchedule::InverseNuT { nu } | StepSchedule::InverseTwoNuT { nu } => nu,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant { .. } => "constant",
            StepSchedule::InverseT { .. } => "inverse-t",
            StepSchedule::InverseNuT { .. } => "inverse-nu-t",
            StepSchedule::InverseTwoNuT { .. } => "inverse-two-nu-t",
        }
    }

    /// Constant schedules may be zero (a no-op run); decaying ones must be positive.
    pub fn validate(&self) -> Result<(), EngineError> {
        let p = self.parameter();
        let ok = match self {
            StepSchedule::Constant { .. } => p.is_finite() && p >= 0.0,
            _ => p.is_finite() && p > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(EngineError::Config(format!(
                "bad {} step parameter {p}",
                self.name()
            )))
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.parameter())
    }
}

/// Everything about a run except the model and the mixing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schedule: StepSchedule,
    pub steps: usize,
    pub seed: u64,
    /// Keep per-node iterates at recorded steps.
    #[serde(default)]
    pub track_nodes: bool,
    /// Keep the full sampled-index log.
    #[serde(default)]
    pub log_indices: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Common starting point; zero when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Evaluate `f(x̄^t)` at recorded steps.
    #[serde(default = "default_true")]
    pub record_loss: bool,
}

fn default_record_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(schedule: StepSchedule, steps: usize, seed: u64) -> Self {
        RunConfig {
            schedule,
            steps,
            seed,
            track_nodes: false,
            log_indices: false,
            record_every: 1,
            x0: None,
            record_loss: true,
        }
    }

    pub fn is_recorded(&self, t: usize) -> bool {
        t > 0 && (t.is_multiple_of(self.record_every) || t == self.steps)
    }

    pub fn validate(&self, model: &LossModel, mixing: &MixingMatrix) -> Result<(), EngineError> {
        if self.steps == 0 {
            return Err(EngineError::Config("steps must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(EngineError::Config(
                "record_every must be at least 1".into(),
            ));
        }
        self.schedule.validate()?;
        model.shard_size(mixing.m())?;
        if let Some(x0) = &self.x0 {
            if x0.len() != model.dim() {
                return Err(EngineError::Config(format!(
                    "x0 has length {}, model dimension is {}",
                    x0.len(),
                    model.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Uniform draw from `0..n` that depends only on `(seed, step, node)`.
///
/// Each node owns a ChaCha stream; step `t` starts at block `t` of that
/// stream, so draws never depend on parameter values or evaluation order.
pub fn sample_index(seed: u64, step: usize, node: usize, n: usize) -> usize {
    IndexSampler::new(seed, node + 1, n).draw(step, node)
}

#[derive(Debug, Clone)]
pub struct IndexSampler {
    rngs: Vec<ChaCha8Rng>,
    n: usize,
}

impl IndexSampler {
    pub fn new(seed: u64, m: usize, n: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let rngs = (0..m)
            .map(|i| {
                let mut r = base.clone();
                r.set_stream(i as u64);
                r
            })
            .collect();
        IndexSampler { rngs, n }
    }

    /// Local index in `0..n` for `node` at `step`.
    pub fn draw(&mut self, step: usize, node: usize) -> usize {
        let r = &mut self.rngs[node];
        r.set_word_pos(step as u128 * 16);
        r.random_range(0..self.n)
    }
}

/// Row-major `m × d` block of node iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStates {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl NodeStates {
    pub fn uniform(m: usize, x0: &[f64]) -> Self {
        let mut data = Vec::with_capacity(m * x0.len());
        for _ in 0..m {
            data.extend_from_slice(x0);
        }
        NodeStates {
            m,
            d: x0.len(),
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == d), "ragged node states");
        NodeStates {
            m: rows.len(),
            d,
            data: rows.concat(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.node(i).to_vec()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.m {
            for (o, v) in out.iter_mut().zip(self.node(i)) {
                *o += v;
            }
        }
        let m = self.m as f64;
        out.iter_mut().for_each(|o| *o /= m);
        out
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `[Σ_i ‖x(i) − x̄‖²]^{1/2}`.
pub fn consensus_deviation(state: &NodeStates) -> f64 {
    let mean = state.mean();
    (0..state.m())
        .map(|i| {
            state
                .node(i)
                .iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    next: NodeStates,
    grad: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(m: usize, d: usize) -> Self {
        StepWorkspace {
            next: NodeStates {
                m,
                d,
                data: vec![0.0; m * d],
            },
            grad: vec![0.0; d],
        }
    }
}

/// One synchronous round. `indices[i]` is the global sample index used by
/// node `i`. Returns the number of nodes whose step left the ball.
pub fn dsgd_step(
    state: &mut NodeStates,
    mixing: &MixingMatrix,
    model: &LossModel,
    alpha: f64,
    indices: &[usize],
    ws: &mut StepWorkspace,
) -> usize {
    let d = state.d;
    let r = model.radius();
    let mut projected = 0;
    for (i, &index) in indices.iter().enumerate().take(state.m) {
        let out = &mut ws.next.data[i * d..(i + 1) * d];
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(l, w) in mixing.row(i) {
            for (o, x) in out.iter_mut().zip(&state.data[l * d..(l + 1) * d]) {
                *o += w * x;
            }
        }
        model.gradient_into(state.node(i), index, &mut ws.grad);
        for (o, g) in out.iter_mut().zip(&ws.grad) {
            *o -= alpha * g;
        }
        if losses::project_ball_in_place(out, r) {
            projected += 1;
        }
    }
    std::mem::swap(&mut state.data, &mut ws.next.data);
    projected
}

/// The projected gradient map `Proj(x − α∇f(x; ξ_index))` of a single node.
pub fn projected_update(model: &LossModel, x: &[f64], index: usize, alpha: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    model.gradient_into(x, index, &mut g);
    let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
    losses::project_ball(&y, model.radius())
}

/// `Σ α_t x^t / Σ α_t`, accumulated one iterate at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningAverage {
    weighted: Vec<f64>,
    total: f64,
}

impl RunningAverage {
    pub fn new(d: usize) -> Self {
        RunningAverage {
            weighted: vec![0.0; d],
            total: 0.0,
        }
    }

    pub fn push(&mut self, weight: f64, x: &[f64]) {
        for (w, v) in self.weighted.iter_mut().zip(x) {
            *w += weight * v;
        }
        self.total += weight;
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// `None` until a positive weight has been pushed.
    pub fn value(&self) -> Option<Vec<f64>> {
        (self.total > 0.0).then(|| self.weighted.iter().map(|w| w / self.total).collect())
    }
}

/// `ave(x^T)` from the averaged iterates `x̄^1..x̄^{T-1}` with weights `α_1..α_{T-1}`.
/// `iterates[k]` holds `x̄^{k+1}`.
pub fn average_iterate(
    iterates: &[Vec<f64>],
    schedule: &StepSchedule,
) -> Result<Vec<f64>, EngineError> {
    let t_total = iterates.len() + 1;
    if t_total < 2 || iterates.is_empty() {
        return Err(EngineError::TooFewSteps(t_total));
    }
    let mut avg = RunningAverage::new(iterates[0].len());
    for (k, x) in iterates.iter().enumerate() {
        avg.push(schedule.alpha(k + 1), x);
    }
    avg.value().ok_or(EngineError::TooFewSteps(t_total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Recorded step indices `t` (iterate `x^t` after `t` rounds).
    pub steps: Vec<usize>,
    /// `x̄^t` at recorded steps.
    pub averages: Vec<Vec<f64>>,
    /// `ave(x^t)` at recorded steps, absent for `t < 2`.
    pub ave_iterates: Vec<Option<Vec<f64>>>,
    /// `f(x̄^t)` over the full dataset; empty when loss recording is off.
    pub losses: Vec<f64>,
    /// Consensus deviation at every step `0..=T`.
    pub consensus: Vec<f64>,
    /// Cumulative projection events at recorded steps.
    pub projection_counts: Vec<usize>,
    /// Per-node iterates at recorded steps when tracked.
    pub node_states: Option<Vec<Vec<Vec<f64>>>>,
    /// `indices[t][i]`: global sample index used by node `i` in round `t`.
    pub indices: Option<Vec<Vec<usize>>>,
    pub final_state: Vec<Vec<f64>>,
    pub projection_events: usize,
}

impl Trajectory {
    pub fn final_average(&self) -> &[f64] {
        self.averages.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Consensus deviation at each recorded step.
    pub fn recorded_consensus(&self) -> Vec<f64> {
        self.steps.iter().map(|&t| self.consensus[t]).collect()
    }

    /// CSV with header `step,loss,consensus_dev,avg_iterate_norm,projection_events`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,consensus_dev,avg_iterate_norm,projection_events\n");
        for (k, &t) in self.steps.iter().enumerate() {
            let loss = self
                .losses
                .get(k)
                .map(|v| v.to_string())
                .unwrap_or_default();
            let ave = self.ave_iterates[k]
                .as_ref()
                .map(|a| losses::norm(a).to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{t},{loss},{},{ave},{}\n",
                self.consensus[t], self.projection_counts[k]
            ));
        }
        out
    }
}

/// Runs `config.steps` rounds from a common start on every node.
pub fn run(
    model: &LossModel,
    mixing: &MixingMatrix,
    config: &RunConfig,
) -> Result<Trajectory, EngineError> {
    config.validate(model, mixing)?;
    let m = mixing.m();
    let d = model.dim();
    let n = model.shard_size(m)?;
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut state = NodeStates::uniform(m, &x0);
    let mut ws = StepWorkspace::new(m, d);
    let mut sampler = IndexSampler::new(config.seed, m, n);
    let mut indices = vec![0usize; m];
    let mut avg = RunningAverage::new(d);

    let mut traj = Trajectory {
        steps: Vec::new(),
        averages: Vec::new(),
        ave_iterates: Vec::new(),
        losses: Vec::new(),
        consensus: Vec::with_capacity(config.steps + 1),
        projection_counts: Vec::new(),
        node_states: config.track_nodes.then(Vec::new),
        indices: config.log_indices.then(|| Vec::with_capacity(config.steps)),
        final_state: Vec::new(),
        projection_events: 0,
    };
    traj.consensus.push(consensus_deviation(&state));

    for t in 0..config.steps {
        for (i, idx) in indices.iter_mut().enumerate() {
            *idx = i * n + sampler.draw(t, i);
        }
        if let Some(log) = traj.indices.as_mut() {
            log.push(indices.clone());
        }
        let alpha = config.schedule.alpha(t);
        traj.projection_events += dsgd_step(&mut state, mixing, model, alpha, &indices, &mut ws);
        if !state.all_finite() {
            return Err(EngineError::NonFinite { step: t + 1 });
        }
        let step = t + 1;
        traj.consensus.push(consensus_deviation(&state));
        let needs_mean = config.is_recorded(step) || step < config.steps;
        if !needs_mean {
            continue;
        }
        let mean = state.mean();
        if config.is_recorded(step) {
            traj.steps.push(step);
            traj.ave_iterates.push(avg.value());
            if config.record_loss {
                traj.losses.push(model.objective(&mean));
            }
            traj.projection_counts.push(traj.projection_events);
            if let Some(nodes) = traj.node_states.as_mut() {
                nodes.push(state.rows());
            }
            traj.averages.push(mean.clone());
        }
        // ave(x^{step+1}) includes x̄^step weighted by α_step
        avg.push(config.schedule.alpha(step), &mean);
    }
    traj.final_state = state.rows();
    Ok(traj)
}
