//! Empirical uniform stability: coupled D-SGD runs on datasets that differ
//! in one sample (or a few, in loose mode), compared step by step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundInputs, BoundReport, Variant};
use crate::data::Sample;
use crate::engine::{self, EngineError, RunConfig, StepSchedule, Trajectory};
use crate::losses::{self, Constants, LossError, LossKind, LossModel};
use crate::mixing::{build_mixing, MixingError, MixingMatrix, MixingScheme};
use crate::topology::{build_graph, TopologyError, TopologyKind, TopologyParams};

/// Default number of perturbed positions.
pub const DEFAULT_POSITIONS: usize = 5;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error("datasets must differ in at most one sample, found {0} differences")]
    NotNeighbours(usize),
    #[error("paired datasets have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("evaluation set is empty")]
    EmptyEval,
    #[error("no perturbed positions given")]
    NoPositions,
    #[error("need at least one trial")]
    NoTrials,
    #[error("replacement pool is empty")]
    EmptyPool,
    #[error("sweep has no values")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PairMode {
    /// Neighbouring datasets: exactly one replaced sample per pair.
    Strict,
    /// Two equal-size subsets differing in `count` samples spread over all nodes.
    Loose { count: usize },
}

impl PairMode {
    pub fn label(&self) -> String {
        match self {
            PairMode::Strict => "strict".into(),
            PairMode::Loose { count } => format!("loose-{count}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveMeta {
    pub topology: String,
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub perturbed: Vec<usize>,
    pub mode: PairMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurve {
    pub steps: Vec<usize>,
    /// `|Φ(x̄^k) − Φ(ŷ^k)|` with `Φ` the mean loss over the evaluation set.
    pub abs_loss_diff: Vec<f64>,
    /// Same for the weighted average iterates; zero before step 2.
    pub abs_avg_loss_diff: Vec<f64>,
    /// Mean over evaluation samples of `|f(x̄^k; ξ) − f(ŷ^k; ξ)|`.
    pub pointwise_loss_diff: Vec<f64>,
    /// `‖x̄^k − ŷ^k‖`.
    pub param_dist: Vec<f64>,
    pub meta: CurveMeta,
}

impl StabilityCurve {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Positions at which the two datasets differ.
pub fn differing_positions(a: &[Sample], b: &[Sample]) -> Result<Vec<usize>, StabilityError> {
    if a.len() != b.len() {
        return Err(StabilityError::SizeMismatch(a.len(), b.len()));
    }
    Ok((0..a.len()).filter(|&i| a[i] != b[i]).collect())
}

/// Runs D-SGD on both datasets with the same seed, hence the same index log,
/// and compares the averaged iterates on a fixed evaluation set.
pub fn paired_run(
    model_s: &LossModel,
    model_s2: &LossModel,
    mixing: &MixingMatrix,
    config: &RunConfig,
    eval: &[Sample],
    mode: PairMode,
) -> Result<StabilityCurve, StabilityError> {
    if eval.is_empty() {
        return Err(StabilityError::EmptyEval);
    }
    let perturbed = differing_positions(model_s.samples(), model_s2.samples())?;
    if mode == PairMode::Strict && perturbed.len() > 1 {
        return Err(StabilityError::NotNeighbours(perturbed.len()));
    }
    let mut cfg = config.clone();
    cfg.record_loss = false;
    let a = engine::run(model_s, mixing, &cfg)?;
    let b = engine::run(model_s2, mixing, &cfg)?;
    Ok(compare(
        model_s, &a, &b, eval, perturbed, mixing, &cfg, mode,
    ))
}

#[allow(clippy::too_many_arguments)]
fn compare(
    model: &LossModel,
    a: &Trajectory,
    b: &Trajectory,
    eval: &[Sample],
    perturbed: Vec<usize>,
    mixing: &MixingMatrix,
    cfg: &RunConfig,
    mode: PairMode,
) -> StabilityCurve {
    let k = a.steps.len();
    let mut curve = StabilityCurve {
        steps: a.steps.clone(),
        abs_loss_diff: Vec::with_capacity(k),
        abs_avg_loss_diff: Vec::with_capacity(k),
        pointwise_loss_diff: Vec::with_capacity(k),
        param_dist: Vec::with_capacity(k),
        meta: CurveMeta {
            topology: mixing.graph().kind().to_string(),
            lambda: mixing.lambda(),
            schedule: cfg.schedule,
            seed: cfg.seed,
            perturbed,
            mode,
        },
    };
    let ne = eval.len() as f64;
    for idx in 0..k {
        let (x, y) = (&a.averages[idx], &b.averages[idx]);
        let mut sum_x = 0.0;
        let mut sum_y = 0.0;
        let mut pointwise = 0.0;
        for s in eval {
            let fx = model.value_on(x, s);
            let fy = model.value_on(y, s);
            sum_x += fx;
            sum_y += fy;
            pointwise += (fx - fy).abs();
        }
        curve.abs_loss_diff.push((sum_x / ne - sum_y / ne).abs());
        curve.pointwise_loss_diff.push(pointwise / ne);
        curve.param_dist.push(losses::dist(x, y));
        let avg = match (&a.ave_iterates[idx], &b.ave_iterates[idx]) {
            (Some(u), Some(v)) => {
                (losses::mean_loss(model, u, eval) - losses::mean_loss(model, v, eval)).abs()
            }
            _ => 0.0,
        };
        curve.abs_avg_loss_diff.push(avg);
    }
    curve
}

/// Everything needed to estimate stability for one configuration.
#[derive(Debug, Clone)]
pub struct StabilityJob {
    /// Training set `S` with its loss.
    pub model: LossModel,
    pub mixing: MixingMatrix,
    pub run: RunConfig,
    pub trials: usize,
    /// Positions in `S` to perturb (strict mode).
    pub positions: Vec<usize>,
    /// Samples used as replacements, cycled over positions.
    pub replacements: Vec<Sample>,
    /// Evaluation samples `ξ` for `f(·; ξ)`.
    pub eval: Vec<Sample>,
    /// Where `eval` came from, recorded in reports.
    pub eval_source: String,
    pub mode: PairMode,
    /// Used to rebuild graphs when sweeping over topologies.
    pub topology_params: TopologyParams,
    pub graph_seed: u64,
}

impl StabilityJob {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials as u64)
            .map(|k| self.run.seed.wrapping_add(k))
            .collect()
    }

    /// Perturbed dataset for position slot `k`.
    fn neighbour(&self, k: usize) -> Result<(Vec<usize>, Vec<Sample>), StabilityError> {
        let base = self.model.samples();
        match self.mode {
            PairMode::Strict => {
                let pos = self.positions[k];
                let repl = self.replacements[k % self.replacements.len()].clone();
                let (_, s2) = losses::make_paired_datasets(base, pos, repl)?;
                Ok((vec![pos], s2))
            }
            PairMode::Loose { count } => {
                let n = base.len();
                let count = count.min(n);
                let mut s2 = base.to_vec();
                let mut pos = Vec::with_capacity(count);
                for j in 0..count {
                    let p = j * n / count.max(1);
                    let repl = &self.replacements[(k * count + j) % self.replacements.len()];
                    s2[p] = repl.clone();
                    pos.push(p);
                }
                Ok((pos, s2))
            }
        }
    }

    fn slots(&self) -> usize {
        match self.mode {
            PairMode::Strict => self.positions.len(),
            PairMode::Loose { .. } => 1,
        }
    }
}

/// Evenly spread positions inside node 0's shard.
pub fn default_positions(shard: usize, count: usize) -> Vec<usize> {
    let count = count.min(shard).max(1);
    (0..count).map(|k| k * shard / count).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialCurve {
    pub position: usize,
    pub trial: usize,
    pub curve: StabilityCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub label: String,
    pub topology: String,
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub mode: PairMode,
    pub loss: LossKind,
    pub m: usize,
    pub n: usize,
    pub steps: Vec<usize>,
    pub seeds: Vec<u64>,
    pub positions: Vec<usize>,
    pub eval_source: String,
    /// Constants over the union of both datasets and the evaluation set.
    pub constants: Constants,
    pub curves: Vec<TrialCurve>,
    /// Means over all trials and positions, per recorded step.
    pub mean_abs_loss_diff: Vec<f64>,
    pub mean_abs_avg_loss_diff: Vec<f64>,
    pub mean_param_dist: Vec<f64>,
    /// Per position: mean over trials of the final pointwise loss difference.
    pub position_epsilon: Vec<f64>,
    /// Max over positions; an underestimate of the supremum.
    pub epsilon: f64,
    /// Per position: mean over trials of the final parameter distance.
    pub position_param_dist: Vec<f64>,
    /// Matched stability bound at each recorded step (`None` where undefined).
    pub bound_curve: Vec<Option<f64>>,
    pub bound_name: Option<String>,
    pub bounds: Option<BoundReport>,
}

impl StabilityReport {
    /// Recomputes the aggregate series from the stored curves.
    pub fn recompute_means(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        aggregate(&self.curves, self.steps.len())
    }

    /// Long-format rows `position,trial,step,abs_loss_diff,param_dist`.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("position,trial,step,abs_loss_diff,param_dist\n");
        for tc in &self.curves {
            let c = &tc.curve;
            for k in 0..c.len() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    tc.position, tc.trial, c.steps[k], c.abs_loss_diff[k], c.param_dist[k]
                ));
            }
        }
        out
    }

    /// Aggregate curve with the matched bound column.
    pub fn curve_csv(&self) -> String {
        let mut out =
            String::from("step,mean_abs_loss_diff,mean_abs_avg_loss_diff,mean_param_dist,bound\n");
        for k in 0..self.steps.len() {
            let bound = self.bound_curve[k]
                .map(|b| b.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.steps[k],
                self.mean_abs_loss_diff[k],
                self.mean_abs_avg_loss_diff[k],
                self.mean_param_dist[k],
                bound
            ));
        }
        out
    }

    /// JSON summary without the per-trial curves.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "topology": self.topology,
            "lambda": self.lambda,
            "schedule": self.schedule,
            "mode": self.mode,
            "loss": self.loss,
            "m": self.m,
            "n": self.n,
            "steps": self.steps.last(),
            "seeds": self.seeds,
            "positions": self.positions,
            "eval_source": self.eval_source,
            "constants": self.constants,
            "epsilon": self.epsilon,
            "position_epsilon": self.position_epsilon,
            "position_param_dist": self.position_param_dist,
            "final_mean_abs_loss_diff": self.mean_abs_loss_diff.last(),
            "final_mean_param_dist": self.mean_param_dist.last(),
            "bound_name": self.bound_name,
            "final_bound": self.bound_curve.last().copied().flatten(),
            "bounds": self.bounds,
        })
    }
}

fn aggregate(curves: &[TrialCurve], k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k];
    let mut c = vec![0.0; k];
    for tc in curves {
        for i in 0..k {
            a[i] += tc.curve.abs_loss_diff[i];
            b[i] += tc.curve.abs_avg_loss_diff[i];
            c[i] += tc.curve.param_dist[i];
        }
    }
    let n = curves.len().max(1) as f64;
    for v in [&mut a, &mut b, &mut c] {
        v.iter_mut().for_each(|x| *x /= n);
    }
    (a, b, c)
}

/// Bound inputs for a stability job, with constants over `samples`.
pub fn bound_inputs(job: &StabilityJob, constants: &Constants, steps: usize) -> BoundInputs {
    let m = job.mixing.m();
    let n = job.model.len() / m;
    let mut inp = BoundInputs::new(
        constants.b,
        constants.l,
        constants.nu,
        job.mixing.lambda(),
        m,
        n,
        steps,
        job.model.radius(),
        job.run.schedule,
    );
    inp.convex = job.model.kind().is_convex();
    inp.certified = constants.certified;
    inp
}

/// The stability bound that matches the loss and schedule, with its name.
pub fn matched_bound(kind: LossKind, inp: &BoundInputs) -> (&'static str, Option<f64>) {
    if inp.steps < 2 {
        return ("", None);
    }
    let variant = Variant::for_schedule(&inp.schedule);
    let strong = kind.is_strongly_convex()
        && matches!(variant, Variant::ConstantAlpha | Variant::InverseNuT);
    if strong {
        ("thm2_stability", bounds::thm2_stability(inp, variant).value)
    } else if kind.is_convex() {
        ("thm1_stability", bounds::thm1_stability(inp).value)
    } else {
        ("thm3_stability", bounds::thm3_stability(inp).value)
    }
}

/// Runs every `(position, trial)` pair in parallel and aggregates in
/// `(position, trial)` order.
pub fn empirical_stability(job: &StabilityJob) -> Result<StabilityReport, StabilityError> {
    if job.trials == 0 {
        return Err(StabilityError::NoTrials);
    }
    if job.eval.is_empty() {
        return Err(StabilityError::EmptyEval);
    }
    if job.replacements.is_empty() {
        return Err(StabilityError::EmptyPool);
    }
    if job.mode == PairMode::Strict && job.positions.is_empty() {
        return Err(StabilityError::NoPositions);
    }
    let m = job.mixing.m();
    let n = job.model.shard_size(m)?;
    job.run.validate(&job.model, &job.mixing)?;

    let slots = job.slots();
    let mut datasets = Vec::with_capacity(slots);
    let mut union = job.model.samples().to_vec();
    for k in 0..slots {
        let (pos, s2) = job.neighbour(k)?;
        for &p in &pos {
            union.push(s2[p].clone());
        }
        datasets.push((pos, job.model.with_samples(s2)?));
    }
    union.extend(job.eval.iter().cloned());
    let constants = job.model.with_samples(union)?.constants();

    let seeds = job.seeds();
    let tasks: Vec<(usize, usize)> = (0..slots)
        .flat_map(|k| (0..job.trials).map(move |t| (k, t)))
        .collect();
    let results: Vec<Result<TrialCurve, StabilityError>> = tasks
        .par_iter()
        .map(|&(k, t)| {
            let mut cfg = job.run.clone();
            cfg.seed = seeds[t];
            let curve = paired_run(
                &job.model,
                &datasets[k].1,
                &job.mixing,
                &cfg,
                &job.eval,
                job.mode,
            )?;
            Ok(TrialCurve {
                position: datasets[k].0.first().copied().unwrap_or(0),
                trial: t,
                curve,
            })
        })
        .collect();
    let curves = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let steps = curves[0].curve.steps.clone();
    let (mean_abs, mean_avg, mean_dist) = aggregate(&curves, steps.len());
    let mut position_epsilon = vec![0.0; slots];
    let mut position_param_dist = vec![0.0; slots];
    for (tc, &(k, _)) in curves.iter().zip(&tasks) {
        position_epsilon[k] += tc.curve.pointwise_loss_diff.last().copied().unwrap_or(0.0);
        position_param_dist[k] += tc.curve.param_dist.last().copied().unwrap_or(0.0);
    }
    let trials = job.trials as f64;
    position_epsilon.iter_mut().for_each(|v| *v /= trials);
    position_param_dist.iter_mut().for_each(|v| *v /= trials);
    let epsilon = position_epsilon.iter().copied().fold(0.0, f64::max);

    let kind = job.model.kind();
    let mut bound_name = None;
    let bound_curve = steps
        .iter()
        .map(|&t| {
            let (name, value) = matched_bound(kind, &bound_inputs(job, &constants, t));
            if !name.is_empty() {
                bound_name = Some(name.to_string());
            }
            value
        })
        .collect();
    let final_steps = job.run.steps;
    let bounds = (final_steps >= 2)
        .then(|| bounds::bound_report(&bound_inputs(job, &constants, final_steps)).ok())
        .flatten();

    Ok(StabilityReport {
        label: String::new(),
        topology: job.mixing.graph().kind().to_string(),
        lambda: job.mixing.lambda(),
        schedule: job.run.schedule,
        mode: job.mode,
        loss: kind,
        m,
        n,
        steps,
        seeds,
        positions: datasets.iter().flat_map(|d| d.0.iter().copied()).collect(),
        eval_source: job.eval_source.clone(),
        constants,
        curves,
        mean_abs_loss_diff: mean_abs,
        mean_abs_avg_loss_diff: mean_avg,
        mean_param_dist: mean_dist,
        position_epsilon,
        epsilon,
        position_param_dist,
        bound_curve,
        bound_name,
        bounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "value", rename_all = "kebab-case")]
pub enum SweepValue {
    /// Constant step size.
    LearningRate(f64),
    Topology(TopologyKind),
    Schedule(StepSchedule),
}

impl SweepValue {
    pub fn label(&self) -> String {
        match self {
            SweepValue::LearningRate(a) => format!("lr={a}"),
            SweepValue::Topology(k) => format!("topology={k}"),
            SweepValue::Schedule(s) => format!("schedule={s}"),
        }
    }
}

/// Applies one sweep value to a copy of the base job.
pub fn apply_sweep_value(
    base: &StabilityJob,
    value: &SweepValue,
) -> Result<StabilityJob, StabilityError> {
    let mut job = base.clone();
    match *value {
        SweepValue::LearningRate(alpha) => job.run.schedule = StepSchedule::Constant { alpha },
        SweepValue::Schedule(s) => job.run.schedule = s,
        SweepValue::Topology(kind) => {
            let g = build_graph(
                kind,
                base.mixing.m(),
                &base.topology_params,
                base.graph_seed,
            )?;
            let scheme = match base.mixing.scheme() {
                MixingScheme::Custom => MixingScheme::MetropolisHastings,
                s => s,
            };
            job.mixing = build_mixing(&g, scheme)?;
        }
    }
    Ok(job)
}

/// One report per value; every value reuses the base seeds.
pub fn stability_sweep(
    values: &[SweepValue],
    base: &StabilityJob,
) -> Result<Vec<StabilityReport>, StabilityError> {
    if values.is_empty() {
        return Err(StabilityError::EmptySweep);
    }
    values
        .iter()
        .map(|v| {
            let job = apply_sweep_value(base, v)?;
            let mut rep = empirical_stability(&job)?;
            rep.label = v.label();
            Ok(rep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SyntheticSpec, SyntheticTask};

    fn job(kind: LossKind, task: SyntheticTask, alpha: f64, steps: usize) -> StabilityJob {
        let data = SyntheticSpec::new(60, 3, task, 11).generate().unwrap();
        let model = LossModel::new(data[..50].to_vec(), kind, 10.0).unwrap();
        let g = build_graph(TopologyKind::Cycle, 5, &TopologyParams::default(), 0).unwrap();
        let mixing = build_mixing(&g, MixingScheme::MetropolisHastings).unwrap();
        let mut run = RunConfig::new(StepSchedule::Constant { alpha }, steps, 3);
        run.record_every = 5;
        StabilityJob {
            model,
            mixing,
            run,
            trials: 3,
            positions: default_positions(10, 3),
            replacements: data[50..].to_vec(),
            eval: data[50..].to_vec(),
            eval_source: "held-out".into(),
            mode: PairMode::Strict,
            topology_params: TopologyParams::default(),
            graph_seed: 0,
        }
    }

    #[test]
    fn identical_datasets_give_zero() {
        let j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.05, 40);
        let c = paired_run(
            &j.model,
            &j.model,
            &j.mixing,
            &j.run,
            &j.eval,
            PairMode::Strict,
        )
        .unwrap();
        assert!(c.abs_loss_diff.iter().all(|&v| v == 0.0));
        assert!(c.param_dist.iter().all(|&v| v == 0.0));
        assert!(c.meta.perturbed.is_empty());
    }

    #[test]
    fn zero_rate_gives_zero() {
        let j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.0, 20);
        let rep = empirical_stability(&j).unwrap();
        assert_eq!(rep.epsilon, 0.0);
        assert!(rep.mean_param_dist.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_replacement_gives_zero() {
        let mut j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.05, 20);
        j.positions = vec![4];
        j.replacements = vec![j.model.samples()[4].clone()];
        assert_eq!(empirical_stability(&j).unwrap().epsilon, 0.0);
    }

    #[test]
    fn strict_mode_rejects_two_differences() {
        let j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.05, 20);
        let mut s2 = j.model.samples().to_vec();
        s2[0] = j.eval[0].clone();
        s2[1] = j.eval[1].clone();
        let m2 = j.model.with_samples(s2).unwrap();
        assert!(matches!(
            paired_run(&j.model, &m2, &j.mixing, &j.run, &j.eval, PairMode::Strict),
            Err(StabilityError::NotNeighbours(2))
        ));
        assert!(paired_run(
            &j.model,
            &m2,
            &j.mixing,
            &j.run,
            &j.eval,
            PairMode::Loose { count: 2 }
        )
        .is_ok());
    }

    #[test]
    fn lipschitz_relation_holds() {
        for (kind, task) in [
            (LossKind::LeastSquares, SyntheticTask::Linear),
            (LossKind::LogisticL2 { reg: 1e-3 }, SyntheticTask::Logistic),
        ] {
            let j = job(kind, task, 0.05, 60);
            let rep = empirical_stability(&j).unwrap();
            let b = rep.constants.b;
            for tc in &rep.curves {
                for k in 0..tc.curve.len() {
                    assert!(tc.curve.abs_loss_diff[k] <= b * tc.curve.param_dist[k] + 1e-9);
                }
            }
            let mean_dist = rep.position_param_dist.iter().copied().fold(0.0, f64::max);
            assert!(rep.epsilon >= 0.0 && rep.epsilon <= b * mean_dist + 1e-9);
            assert_eq!(rep.recompute_means().0, rep.mean_abs_loss_diff);
        }
    }

    #[test]
    fn loose_mode_and_csv_shapes() {
        let mut j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.05, 20);
        j.mode = PairMode::Loose { count: 4 };
        let rep = empirical_stability(&j).unwrap();
        assert_eq!(rep.positions.len(), 4);
        assert_eq!(rep.curves.len(), 3);
        assert_eq!(rep.long_csv().lines().count(), 1 + 3 * 4);
        assert_eq!(rep.curve_csv().lines().count(), 1 + 4);
    }

    #[test]
    fn singleton_sweep_matches_direct_call() {
        let j = job(LossKind::LeastSquares, SyntheticTask::Linear, 0.01, 20);
        let direct = empirical_stability(&j).unwrap();
        let swept = stability_sweep(&[SweepValue::LearningRate(0.01)], &j).unwrap();
        assert_eq!(swept[0].curves, direct.curves);
        assert_eq!(swept[0].epsilon, direct.epsilon);
        assert!(stability_sweep(&[], &j).is_err());
        let topo = stability_sweep(&[SweepValue::Topology(TopologyKind::Complete)], &j).unwrap();
        assert_eq!(topo[0].lambda, 0.0);
    }

    #[test]
    fn bound_column_matches_direct_call() {
        let j = job(
            LossKind::LogisticL2 { reg: 1e-2 },
            SyntheticTask::Logistic,
            0.05,
            20,
        );
        let rep = empirical_stability(&j).unwrap();
        assert_eq!(rep.bound_name.as_deref(), Some("thm2_stability"));
        for (k, &t) in rep.steps.iter().enumerate() {
            let inp = bound_inputs(&j, &rep.constants, t);
            assert_eq!(
                rep.bound_curve[k],
                bounds::thm2_stability(&inp, Variant::ConstantAlpha).value
            );
        }
    }
}
