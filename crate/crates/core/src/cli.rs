//! Command-line experiment runner.
//!
//! Configs are TOML. Every command validates the whole config first, writes
//! the fully defaulted config back as `resolved_config.toml`, and only then
//! computes. Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
//! failure, 1 anything else (I/O).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundInputs};
use crate::data::{self, Sample, SyntheticSpec, SyntheticTask};
use crate::engine::{self, EngineError, RunConfig, StepSchedule};
use crate::losses::{LossKind, LossModel};
use crate::mixing::{self, MixingMatrix, MixingScheme};
use crate::stability::{self, PairMode, StabilityError, StabilityJob, StabilityReport, SweepValue};
use crate::topology::{build_graph, Graph, TopologyKind, TopologyParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::Engine(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "dsgd",
    version,
    about = "Decentralized SGD stability experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the recording cadence.
    #[arg(long, global = true)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run D-SGD once and write the trajectory.
    Run,
    /// Estimate stability (and sweep if the config has a [sweep] table).
    Stability,
    /// Stability sweep; requires a [sweep] table.
    Sweep,
    /// Evaluate the closed-form bounds from a JSON or TOML parameter file.
    Bounds {
        #[arg(long)]
        params: PathBuf,
        /// Evaluate at lambda = 0, 0.1, ..., 0.9.
        #[arg(long)]
        grid: bool,
    },
    /// Check a mixing matrix built from the config or read from CSV.
    ValidateMixing {
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Matrix powers to test in the decay check.
        #[arg(long, default_value_t = mixing::DEFAULT_DECAY_POWERS)]
        powers: usize,
    },
    /// Write the configured dataset as CSV.
    GenData {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub record_every: Option<usize>,
    pub threads: Option<usize>,
    /// Common starting point for every node.
    pub x0: Option<Vec<f64>>,
    pub schedule: Option<StepSchedule>,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default)]
    pub mixing: MixingSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub stability: StabilitySection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: Option<TopologyKind>,
    pub m: Option<usize>,
    pub p: Option<f64>,
    pub k: Option<usize>,
    pub partition: Option<[usize; 2]>,
    pub edge_list: Option<PathBuf>,
    /// Seed for random graphs; defaults to the experiment seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    pub scheme: Option<MixingScheme>,
    /// Custom matrix CSV; overrides `scheme`.
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    LeastSquares,
    LogisticL2,
    SmallMlp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelTag>,
    pub reg: Option<f64>,
    pub hidden: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Csv,
    Libsvm,
    Synthetic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub format: Option<DataFormat>,
    pub path: Option<PathBuf>,
    /// Feature dimension (libsvm width, synthetic dimension).
    pub dim: Option<usize>,
    pub standardize: Option<bool>,
    /// Synthetic sample count.
    pub n: Option<usize>,
    pub task: Option<SyntheticTask>,
    pub noise: Option<f64>,
    pub signal: Option<f64>,
    pub seed: Option<u64>,
    /// Leading samples used for training; the rest are held out.
    pub train: Option<usize>,
    /// Shuffle (seeded) before splitting.
    pub shuffle: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalChoice {
    HeldOut,
    Training,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub trials: Option<usize>,
    pub positions: Option<Vec<usize>>,
    pub num_positions: Option<usize>,
    pub mode: Option<PairMode>,
    pub eval: Option<EvalChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    LearningRate,
    Topology,
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub learning_rates: Option<Vec<f64>>,
    pub topologies: Option<Vec<TopologyKind>>,
    pub schedules: Option<Vec<StepSchedule>>,
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<SweepValue>, CliError> {
        let missing = |name: &str| CliError::Config(format!("sweep axis needs `{name}`"));
        let values: Vec<SweepValue> = match self.axis {
            SweepAxis::LearningRate => self
                .learning_rates
                .as_ref()
                .ok_or_else(|| missing("learning_rates"))?
                .iter()
                .map(|&a| SweepValue::LearningRate(a))
                .collect(),
            SweepAxis::Topology => self
                .topologies
                .as_ref()
                .ok_or_else(|| missing("topologies"))?
                .iter()
                .map(|&k| SweepValue::Topology(k))
                .collect(),
            SweepAxis::Schedule => self
                .schedules
                .as_ref()
                .ok_or_else(|| missing("schedules"))?
                .iter()
                .map(|&s| SweepValue::Schedule(s))
                .collect(),
        };
        if values.is_empty() {
            return Err(CliError::Config("sweep has no values".into()));
        }
        Ok(values)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, g: &GlobalArgs) -> Self {
        if let Some(s) = g.seed {
            self.seed = Some(s);
        }
        if let Some(r) = g.record_every {
            self.record_every = Some(r);
        }
        if let Some(t) = g.threads {
            self.threads = Some(t);
        }
        self
    }

    /// Fills every defaulted field. Idempotent.
    pub fn resolve(&self) -> Result<Self, CliError> {
        let mut c = self.clone();
        let seed = *c.seed.get_or_insert(0);
        c.steps.get_or_insert(1000);
        c.record_every.get_or_insert(10);
        c.threads.get_or_insert(0);
        c.schedule
            .get_or_insert(StepSchedule::Constant { alpha: 0.001 });

        let t = &mut c.topology;
        if t.edge_list.is_some() {
            t.kind = Some(TopologyKind::Custom);
        }
        let kind = *t.kind.get_or_insert(TopologyKind::Cycle);
        let m = *t.m.get_or_insert(10);
        let rp = TopologyParams {
            p: t.p,
            k: t.k,
            partition: t.partition.map(|[a, b]| (a, b)),
        }
        .resolve(m);
        match kind {
            TopologyKind::Random => {
                t.p.get_or_insert(rp.p);
            }
            TopologyKind::KNng => {
                t.k.get_or_insert(rp.k);
            }
            TopologyKind::Bipartite => {
                t.partition.get_or_insert([rp.partition.0, rp.partition.1]);
            }
            _ => {}
        }
        t.seed.get_or_insert(seed);
        if c.mixing.csv.is_none() {
            c.mixing
                .scheme
                .get_or_insert(MixingScheme::MetropolisHastings);
        }

        let model = *c.model.kind.get_or_insert(ModelTag::LeastSquares);
        match model {
            ModelTag::LogisticL2 => {
                c.model.reg.get_or_insert(1e-4);
            }
            ModelTag::SmallMlp => {
                c.model.hidden.get_or_insert(8);
            }
            ModelTag::LeastSquares => {}
        }
        let x0_norm =
            c.x0.as_ref()
                .map_or(0.0, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt());
        c.model.radius.get_or_insert(10.0 * x0_norm + 10.0);

        let d = &mut c.data;
        let format = *d.format.get_or_insert(if d.path.is_some() {
            DataFormat::Csv
        } else {
            DataFormat::Synthetic
        });
        d.standardize.get_or_insert(false);
        d.shuffle.get_or_insert(false);
        d.seed.get_or_insert(seed);
        if format == DataFormat::Synthetic {
            d.n.get_or_insert(200);
            d.dim.get_or_insert(14);
            d.task.get_or_insert(match model {
                ModelTag::LogisticL2 => SyntheticTask::Logistic,
                _ => SyntheticTask::Linear,
            });
            d.noise.get_or_insert(0.1);
            d.signal.get_or_insert(3.0);
        } else if d.path.is_none() {
            return Err(CliError::Config(
                "data.path is required for file formats".into(),
            ));
        }

        let s = &mut c.stability;
        s.trials.get_or_insert(10);
        s.num_positions.get_or_insert(stability::DEFAULT_POSITIONS);
        s.mode.get_or_insert(PairMode::Strict);
        s.eval.get_or_insert(EvalChoice::HeldOut);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.steps == Some(0) {
            return bad("steps must be at least 1".into());
        }
        if self.record_every == Some(0) {
            return bad("record_every must be at least 1".into());
        }
        if let Some(s) = &self.schedule {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(r) = self.model.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("model.radius must be positive, got {r}"));
            }
        }
        if self.model.reg.is_some_and(|r| r < 0.0) {
            return bad("model.reg must be nonnegative".into());
        }
        if self.model.hidden == Some(0) {
            return bad("model.hidden must be positive".into());
        }
        if self.stability.trials == Some(0) {
            return bad("stability.trials must be at least 1".into());
        }
        if let Some(sw) = &self.sweep {
            sw.values()?;
        }
        Ok(())
    }

    fn loss_kind(&self) -> LossKind {
        match self.model.kind.unwrap_or(ModelTag::LeastSquares) {
            ModelTag::LeastSquares => LossKind::LeastSquares,
            ModelTag::LogisticL2 => LossKind::LogisticL2 {
                reg: self.model.reg.unwrap_or(1e-4),
            },
            ModelTag::SmallMlp => LossKind::SmallMlp {
                hidden: self.model.hidden.unwrap_or(8),
            },
        }
    }

    fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig::new(
            self.schedule.expect("resolved"),
            self.steps.expect("resolved"),
            self.seed.expect("resolved"),
        );
        rc.record_every = self.record_every.expect("resolved");
        rc.x0 = self.x0.clone();
        rc
    }

    fn topology_params(&self) -> TopologyParams {
        TopologyParams {
            p: self.topology.p,
            k: self.topology.k,
            partition: self.topology.partition.map(|[a, b]| (a, b)),
        }
    }
}

/// Loaded training data, held-out data and provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub held_out: Vec<Sample>,
    pub standardization: Option<data::Standardization>,
    pub synthetic: bool,
}

/// Reads or generates the configured samples, then standardizes, shuffles
/// and splits as configured. Expects a resolved config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let d = &cfg.data;
    let data_err = |e: data::DataError| CliError::Data(e.to_string());
    let format = d.format.expect("resolved");
    let mut samples = match format {
        DataFormat::Synthetic => SyntheticSpec {
            n: d.n.expect("resolved"),
            dim: d.dim.expect("resolved"),
            task: d.task.expect("resolved"),
            noise: d.noise.expect("resolved"),
            signal: d.signal.expect("resolved"),
            seed: d.seed.expect("resolved"),
        }
        .generate()
        .map_err(data_err)?,
        DataFormat::Csv => data::load_csv(d.path.as_ref().expect("resolved")).map_err(data_err)?,
        DataFormat::Libsvm => {
            data::load_libsvm(d.path.as_ref().expect("resolved"), d.dim).map_err(data_err)?
        }
    };
    let standardization = d
        .standardize
        .unwrap_or(false)
        .then(|| data::standardize(&mut samples));
    if d.shuffle.unwrap_or(false) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(d.seed.expect("resolved"));
        samples.shuffle(&mut rng);
    }
    let train_len = d.train.unwrap_or(samples.len());
    if train_len == 0 || train_len > samples.len() {
        return Err(CliError::Data(format!(
            "data.train = {train_len} out of range for {} samples",
            samples.len()
        )));
    }
    let held_out = samples.split_off(train_len);
    Ok(Dataset {
        train: samples,
        held_out,
        standardization,
        synthetic: format == DataFormat::Synthetic,
    })
}

fn build_network(cfg: &ExperimentConfig) -> Result<(Graph, MixingMatrix), CliError> {
    let t = &cfg.topology;
    let graph = match &t.edge_list {
        Some(path) => Graph::load_edge_list(path).map_err(|e| CliError::Data(e.to_string()))?,
        None => build_graph(
            t.kind.expect("resolved"),
            t.m.expect("resolved"),
            &cfg.topology_params(),
            t.seed.expect("resolved"),
        )
        .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let mm = match &cfg.mixing.csv {
        Some(path) => {
            let g = t.edge_list.as_ref().map(|_| &graph);
            MixingMatrix::load_csv(path, g).map_err(|e| CliError::Data(e.to_string()))?
        }
        None => mixing::build_mixing(&graph, cfg.mixing.scheme.expect("resolved"))
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let graph = mm.graph().clone();
    Ok((graph, mm))
}

fn build_model(cfg: &ExperimentConfig, samples: Vec<Sample>) -> Result<LossModel, CliError> {
    LossModel::new(
        samples,
        cfg.loss_kind(),
        cfg.model.radius.expect("resolved"),
    )
    .map_err(|e| CliError::Data(e.to_string()))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

fn prepare_out_dir(g: &GlobalArgs) -> Result<PathBuf, CliError> {
    let dir = g
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("dsgd-out"));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn load_config(g: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let base = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(g).resolve()
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_run(g: &GlobalArgs) -> Result<PathBuf, CliError> {
    let cfg = load_config(g)?;
    let dataset = load_dataset(&cfg)?;
    let (_, mm) = build_network(&cfg)?;
    let model = build_model(&cfg, dataset.train)?;
    let rc = cfg.run_config();
    rc.validate(&model, &mm)?;
    let out = prepare_out_dir(g)?;
    write(&out.join("resolved_config.toml"), &cfg.to_toml()?)?;
    let traj = engine::run(&model, &mm, &rc)?;
    write(&out.join("trajectory.csv"), &traj.to_csv())?;
    let constants = model.constants();
    let meta = serde_json::json!({
        "topology": mm.graph().kind(),
        "scheme": mm.scheme(),
        "m": mm.m(),
        "n": model.len() / mm.m(),
        "lambda": mm.lambda(),
        "constants": constants,
        "schedule": rc.schedule,
        "steps": rc.steps,
        "seed": rc.seed,
        "radius": model.radius(),
        "projection_events": traj.projection_events,
        "final_loss": traj.losses.last(),
        "standardization": dataset.standardization,
    });
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(out)
}

/// Builds the stability job described by a resolved config.
pub fn stability_job(cfg: &ExperimentConfig) -> Result<StabilityJob, CliError> {
    let dataset = load_dataset(cfg)?;
    let (_, mm) = build_network(cfg)?;
    let model = build_model(cfg, dataset.train.clone())?;
    let n = model
        .shard_size(mm.m())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let st = &cfg.stability;
    let positions = match &st.positions {
        Some(p) => {
            if let Some(&bad) = p.iter().find(|&&i| i >= model.len()) {
                return Err(CliError::Config(format!(
                    "stability position {bad} out of range"
                )));
            }
            p.clone()
        }
        None => stability::default_positions(n, st.num_positions.expect("resolved")),
    };
    let (eval, eval_source) = match st.eval.expect("resolved") {
        EvalChoice::HeldOut if !dataset.held_out.is_empty() => {
            (dataset.held_out.clone(), "held-out")
        }
        _ => (dataset.train.clone(), "training"),
    };
    let replacements = if !dataset.held_out.is_empty() {
        dataset.held_out.clone()
    } else if dataset.synthetic {
        // fresh draws continue the generator stream past the configured samples
        let d = &cfg.data;
        let total = d.n.expect("resolved");
        let spec = SyntheticSpec {
            n: total + positions.len().max(8),
            dim: d.dim.expect("resolved"),
            task: d.task.expect("resolved"),
            noise: d.noise.expect("resolved"),
            signal: d.signal.expect("resolved"),
            seed: d.seed.expect("resolved"),
        };
        let mut pool = spec
            .generate()
            .map_err(|e| CliError::Data(e.to_string()))?
            .split_off(total);
        if let Some(st) = &dataset.standardization {
            for s in &mut pool {
                for ((v, mu), sd) in s.features.iter_mut().zip(&st.means).zip(&st.stds) {
                    *v = if *sd > 0.0 { (*v - mu) / sd } else { *v - mu };
                }
            }
        }
        pool
    } else {
        dataset.train.iter().rev().cloned().collect()
    };
    Ok(StabilityJob {
        model,
        mixing: mm,
        run: cfg.run_config(),
        trials: st.trials.expect("resolved"),
        positions,
        replacements,
        eval,
        eval_source: eval_source.into(),
        mode: st.mode.expect("resolved"),
        topology_params: cfg.topology_params(),
        graph_seed: cfg.topology.seed.expect("resolved"),
    })
}

fn write_stability(out: &Path, reports: &[StabilityReport]) -> Result<(), CliError> {
    for (k, rep) in reports.iter().enumerate() {
        write(
            &out.join(format!("stability_long_{k}.csv")),
            &rep.long_csv(),
        )?;
        write(
            &out.join(format!("stability_curve_{k}.csv")),
            &rep.curve_csv(),
        )?;
    }
    let summary: Vec<_> = reports.iter().map(StabilityReport::summary_json).collect();
    write_json(&out.join("stability_summary.json"), &summary)
}

pub fn cmd_stability(g: &GlobalArgs, require_sweep: bool) -> Result<PathBuf, CliError> {
    let cfg = load_config(g)?;
    if require_sweep && cfg.sweep.is_none() {
        return Err(CliError::Config("sweep needs a [sweep] table".into()));
    }
    let job = stability_job(&cfg)?;
    job.run.validate(&job.model, &job.mixing)?;
    let out = prepare_out_dir(g)?;
    write(&out.join("resolved_config.toml"), &cfg.to_toml()?)?;
    let pool = thread_pool(cfg.threads.expect("resolved"))?;
    let reports = pool.install(|| match &cfg.sweep {
        Some(sw) => stability::stability_sweep(&sw.values()?, &job).map_err(CliError::from),
        None => {
            let mut rep = stability::empirical_stability(&job)?;
            rep.label = "base".into();
            Ok(vec![rep])
        }
    })?;
    write_stability(&out, &reports)?;
    Ok(out)
}

pub fn cmd_bounds(g: &GlobalArgs, params: &Path, grid: bool) -> Result<String, CliError> {
    let text = fs::read_to_string(params).map_err(|e| io_err(params, e))?;
    let inputs: BoundInputs = if params.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
    };
    let cfg_err = |e: bounds::BoundError| CliError::Config(e.to_string());
    let json = if grid {
        let reports = bounds::lambda_grid(&inputs).map_err(cfg_err)?;
        serde_json::to_string_pretty(&reports)
    } else {
        let report = bounds::bound_report(&inputs).map_err(cfg_err)?;
        serde_json::to_string_pretty(&report)
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    if g.out_dir.is_some() {
        let out = prepare_out_dir(g)?;
        let name = if grid {
            "bounds_grid.json"
        } else {
            "bounds.json"
        };
        write(&out.join(name), &format!("{json}\n"))?;
    }
    Ok(json)
}

pub fn cmd_validate_mixing(
    g: &GlobalArgs,
    matrix: Option<&Path>,
    powers: usize,
) -> Result<(bool, String), CliError> {
    let mm = match matrix {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let w = mixing::parse_matrix_csv(&text).map_err(|e| CliError::Data(e.to_string()))?;
            // parses but cannot be a mixing matrix: a failed validation
            MixingMatrix::from_dense_unchecked(w, None)
                .map_err(|e| CliError::Numeric(e.to_string()))?
        }
        None => build_network(&load_config(g)?)?.1,
    };
    let report = mixing::validate_mixing_with(&mm, powers);
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    if g.out_dir.is_some() {
        let out = prepare_out_dir(g)?;
        write(&out.join("mixing_report.json"), &format!("{json}\n"))?;
    }
    Ok((report.all_passed(), json))
}

pub fn cmd_gen_data(g: &GlobalArgs, output: Option<&Path>) -> Result<PathBuf, CliError> {
    let cfg = load_config(g)?;
    let ds = load_dataset(&cfg)?;
    let mut all = ds.train;
    all.extend(ds.held_out);
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => prepare_out_dir(g)?.join("data.csv"),
    };
    write(&path, &data::to_csv(&all))?;
    Ok(path)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run => cmd_run(g).map(|out| format!("wrote {}", out.display())),
        Command::Stability => cmd_stability(g, false).map(|out| format!("wrote {}", out.display())),
        Command::Sweep => cmd_stability(g, true).map(|out| format!("wrote {}", out.display())),
        Command::Bounds { params, grid } => cmd_bounds(g, params, *grid),
        Command::ValidateMixing { matrix, powers } => {
            match cmd_validate_mixing(g, matrix.as_deref(), *powers) {
                Ok((true, json)) => Ok(json),
                Ok((false, json)) => {
                    println!("{json}");
                    eprintln!("mixing matrix failed validation");
                    return 4;
                }
                Err(e) => Err(e),
            }
        }
        Command::GenData { output } => {
            cmd_gen_data(g, output.as_deref()).map(|p| format!("wrote {}", p.display()))
        }
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_is_idempotent_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            "steps = 50\n[model]\nkind = \"logistic-l2\"\n[topology]\nkind = \"random\"\n",
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.resolve().unwrap(), r);
        let text = r.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), r);
        assert_eq!(r.model.reg, Some(1e-4));
        assert_eq!(r.model.radius, Some(10.0));
        assert_eq!(r.topology.p, Some(0.3));
        assert_eq!(r.data.task, Some(SyntheticTask::Logistic));
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let cfg = ExperimentConfig::from_toml("steps = 0").unwrap();
        assert_eq!(cfg.resolve().unwrap_err().exit_code(), 2);
        let file = ExperimentConfig::from_toml("[data]\nformat = \"csv\"\n").unwrap();
        assert!(file.resolve().is_err());
        let sweep = ExperimentConfig::from_toml("[sweep]\naxis = \"topology\"\n").unwrap();
        assert!(sweep.resolve().is_err());
    }

    #[test]
    fn schedule_and_sweep_parse() {
        let cfg = ExperimentConfig::from_toml(
            "[schedule]\nkind = \"inverse-nu-t\"\nnu = 0.5\n[sweep]\naxis = \"learning-rate\"\nlearning_rates = [0.001, 0.004]\n",
        )
        .unwrap();
        assert_eq!(cfg.schedule, Some(StepSchedule::InverseNuT { nu: 0.5 }));
        assert_eq!(cfg.sweep.unwrap().values().unwrap().len(), 2);
    }

    #[test]
    fn dataset_split() {
        let cfg = ExperimentConfig::from_toml("[data]\nn = 252\ndim = 14\ntrain = 200\n")
            .unwrap()
            .resolve()
            .unwrap();
        let ds = load_dataset(&cfg).unwrap();
        assert_eq!((ds.train.len(), ds.held_out.len()), (200, 52));
        assert_eq!(ds.train[0].dim(), 14);
    }
}
