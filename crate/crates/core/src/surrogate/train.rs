use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{generate_dataset, stratified_split, DatasetSpec, Split, SyntheticDataset};
use super::model::{model_loss, SurrogateModel, Window};
use crate::curriculum::{
    BaseScales, BaselineScheduler, CurriculumWeights, EarlyStopping, LevelSet, LossBreakdown, PromotionRule, Scheduler,
    SchedulerMode, SelfPacedScheduler, StagedScheduler, StopDecision, WeightBounds,
};
use crate::ddpg::{AgentHyperparams, DdpgAgent, DdpgScheduler, PoseAgentInput};
use crate::error::{Error, Result};
use crate::metrics::{ate, auc};
use crate::parallel::Execution;
use crate::trajectory::Trajectory;

pub const N_LEVELS: u8 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub mode: SchedulerMode,
    /// Self-paced sharpness.
    pub lambda: f64,
    pub w0: f64,
    pub w_final: f64,
    /// Base scale on the flow term.
    pub s_f: f64,
    /// Base scale on the pose term.
    pub s_p: f64,
    /// Validations inspected by the staged promotion rule.
    pub patience: usize,
    pub min_relative_improvement: f64,
    /// Step budget of each non-final stage; defaults to a third of the run each.
    pub stage_budgets: Option<Vec<u64>>,
    pub pose_input: PoseAgentInput,
    /// Steps that map to DDPG progress 1; defaults to the run length.
    pub progress_budget: Option<u64>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            mode: SchedulerMode::Baseline,
            lambda: 0.1,
            w0: 0.1,
            w_final: 1.0,
            s_f: 0.1,
            s_p: 10.0,
            patience: 3,
            min_relative_improvement: 0.01,
            stage_budgets: None,
            pose_input: PoseAgentInput::Subtotal,
            progress_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: u64,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub validation_every: u64,
    pub validation_fraction: f64,
    /// Upper end of the AUC error window, meters.
    pub auc_max_error: f64,
    /// Validations without improvement in either metric before stopping; 0 disables.
    pub early_stopping_patience: usize,
    pub scheduler: SchedulerConfig,
    pub agent: AgentHyperparams,
    pub dataset: DatasetSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 6000,
            learning_rate: 1e-4,
            hidden: vec![64, 64],
            validation_every: 500,
            validation_fraction: 0.2,
            auc_max_error: 1.0,
            early_stopping_patience: 3,
            scheduler: SchedulerConfig::default(),
            agent: AgentHyperparams::default(),
            dataset: DatasetSpec::default(),
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps == 0 {
            out.push("steps must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            out.push(format!("hidden layer widths must be positive, got {:?}", self.hidden));
        }
        if self.validation_every == 0 {
            out.push("validation_every must be positive".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            out.push(format!("validation_fraction must be in (0, 1), got {}", self.validation_fraction));
        }
        if !(self.auc_max_error > 0.0 && self.auc_max_error.is_finite()) {
            out.push(format!("auc_max_error must be positive, got {}", self.auc_max_error));
        }
        let s = &self.scheduler;
        if let Err(e) = WeightBounds::new(s.w0, s.w_final) {
            out.push(e.to_string());
        } else if s.w0 < 0.0 {
            out.push(format!("w0 must be >= 0, got {}", s.w0));
        }
        if !(s.lambda >= 0.0 && s.lambda.is_finite()) {
            out.push(format!("lambda must be >= 0, got {}", s.lambda));
        }
        for (name, v) in [("s_f", s.s_f), ("s_p", s.s_p)] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(b) = &s.stage_budgets {
            if b.len() != N_LEVELS as usize - 1 {
                out.push(format!("stage_budgets needs {} entries, got {}", N_LEVELS - 1, b.len()));
            }
        }
        if s.progress_budget == Some(0) {
            out.push("progress_budget must be positive".into());
        }
        out.extend(self.agent.problems().into_iter().map(|p| format!("agent: {p}")));
        out.extend(self.dataset.problems().into_iter().map(|p| format!("dataset: {p}")));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(p.join("; ")))
        }
    }

    pub fn base_scales(&self) -> BaseScales {
        BaseScales {
            flow: self.scheduler.s_f,
            pose: self.scheduler.s_p,
        }
    }

    pub fn promotion_rule(&self) -> PromotionRule {
        let third = (self.steps / 3).max(1);
        PromotionRule {
            patience: self.scheduler.patience,
            min_relative_improvement: self.scheduler.min_relative_improvement,
            stage_budgets: self.scheduler.stage_budgets.clone().unwrap_or_else(|| vec![third, third]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub ate: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub step: u64,
    pub loss: LossBreakdown,
    /// Weights the step's loss was computed with.
    pub weights: CurriculumWeights,
    pub active_levels: LevelSet,
    pub validation: Option<ValidationPoint>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub point: ValidationPoint,
    /// Aligned ATE per validation sequence, in sequence order.
    pub errors: Vec<f64>,
    pub predictions: Vec<Trajectory>,
    pub ground_truth: Vec<Trajectory>,
}

/// Mean aligned ATE and AUC over the validation sequences.
pub fn validate(
    model: &SurrogateModel,
    data: &SyntheticDataset,
    val: &[usize],
    auc_max_error: f64,
    exec: Execution,
) -> Result<ValidationReport> {
    let results: Vec<Result<(f64, Trajectory)>> = exec.map(val, |i| {
        let seq = &data.sequences[*i];
        let pred = model.predict_trajectory(seq)?;
        let e = ate(&pred, &seq.trajectory, true)?;
        Ok((e, pred))
    });
    let mut errors = Vec::with_capacity(val.len());
    let mut predictions = Vec::with_capacity(val.len());
    for r in results {
        let (e, p) = r?;
        errors.push(e);
        predictions.push(p);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(ValidationReport {
        point: ValidationPoint {
            ate: mean,
            auc: auc(&errors, auc_max_error)?,
        },
        errors,
        predictions,
        ground_truth: val.iter().map(|i| data.sequences[*i].trajectory.clone()).collect(),
    })
}

/// Walks whole sequences window by window; sequence order is reshuffled every epoch.
#[derive(Debug, Clone)]
pub struct StreamLoader {
    pool: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    current: Option<(usize, usize)>,
    windows: usize,
    rng: ChaCha8Rng,
}

impl StreamLoader {
    pub fn new(pool: Vec<usize>, windows: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        Self {
            order: Vec::new(),
            pos: 0,
            pool,
            current: None,
            windows,
            rng,
        }
    }

    /// Next `(sequence, window)`; a new sequence is only started if `eligible` accepts it.
    pub fn next(&mut self, eligible: impl Fn(usize) -> bool) -> Result<(usize, usize)> {
        if let Some((s, w)) = self.current {
            if w < self.windows {
                self.current = Some((s, w + 1));
                return Ok((s, w));
            }
        }
        if !self.pool.iter().any(|s| eligible(*s)) {
            return Err(Error::EmptyInput("no eligible training sequence".into()));
        }
        loop {
            if self.pos == self.order.len() {
                self.order = self.pool.clone();
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let s = self.order[self.pos];
            self.pos += 1;
            if eligible(s) {
                self.current = Some((s, 1));
                return Ok((s, 0));
            }
        }
    }
}

enum ActiveScheduler {
    Baseline(BaselineScheduler),
    Staged(StagedScheduler),
    SelfPaced(SelfPacedScheduler),
    Ddpg(Box<DdpgScheduler>),
}

impl ActiveScheduler {
    fn build(cfg: &TrainConfig, exec: Execution) -> Result<Self> {
        let s = &cfg.scheduler;
        let bounds = WeightBounds::new(s.w0, s.w_final)?;
        Ok(match s.mode {
            SchedulerMode::Baseline => Self::Baseline(BaselineScheduler),
            SchedulerMode::Staged => Self::Staged(StagedScheduler::new(cfg.promotion_rule(), N_LEVELS)),
            SchedulerMode::SelfPaced => Self::SelfPaced(SelfPacedScheduler::new(s.lambda, bounds)?),
            SchedulerMode::Ddpg => Self::Ddpg(Box::new(
                DdpgScheduler::new(
                    cfg.agent.clone(),
                    bounds,
                    s.progress_budget.unwrap_or(cfg.steps),
                    s.pose_input,
                    cfg.seed.wrapping_add(0x5eed),
                )?
                .with_execution(exec),
            )),
        })
    }

    fn get(&mut self) -> &mut dyn Scheduler {
        match self {
            Self::Baseline(s) => s,
            Self::Staged(s) => s,
            Self::SelfPaced(s) => s,
            Self::Ddpg(s) => s.as_mut(),
        }
    }
}

pub struct TrainingOutcome {
    pub records: Vec<TrainingRecord>,
    pub model: SurrogateModel,
    pub agents: Option<[DdpgAgent; 3]>,
    pub final_validation: ValidationReport,
    /// Step at which early stopping fired.
    pub stopped_early: Option<u64>,
    pub dataset: SyntheticDataset,
    pub split: Split,
}

impl TrainingOutcome {
    pub fn validations(&self) -> Vec<(u64, ValidationPoint)> {
        self.records
            .iter()
            .filter_map(|r| r.validation.map(|v| (r.step, v)))
            .collect()
    }
}

/// Dataset, split and initial model for a config; shared by every mode with the same seed.
pub struct TrainingSetup {
    pub dataset: SyntheticDataset,
    pub split: Split,
    pub model: SurrogateModel,
    pub loader: StreamLoader,
}

pub fn prepare(cfg: &TrainConfig, exec: Execution) -> Result<TrainingSetup> {
    cfg.validate()?;
    let dataset = generate_dataset(&cfg.dataset, cfg.seed, exec)?;
    let split = stratified_split(&dataset.manifest, cfg.validation_fraction, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let model = SurrogateModel::new(&cfg.hidden, &cfg.dataset, &mut rng);
    let loader = StreamLoader::new(split.train.clone(), cfg.dataset.windows_per_sequence, cfg.seed);
    Ok(TrainingSetup {
        dataset,
        split,
        model,
        loader,
    })
}

pub fn sgd_step(model: &mut SurrogateModel, grad: &[f64], lr: f64) {
    for (p, g) in model.net.params_mut().iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

/// Trains until the step budget or early stopping, handing each record to `sink` as it is produced.
pub fn run_training_with(
    cfg: &TrainConfig,
    exec: Execution,
    sink: &mut dyn FnMut(&TrainingRecord) -> Result<()>,
) -> Result<TrainingOutcome> {
    let TrainingSetup {
        dataset,
        split,
        mut model,
        mut loader,
    } = prepare(cfg, exec)?;
    let mut scheduler = ActiveScheduler::build(cfg, exec)?;
    let camera = cfg.dataset.camera.clone();
    let scales = cfg.base_scales();
    let levels: Vec<u8> = dataset.manifest.entries.iter().map(|e| e.level).collect();
    let all_levels = LevelSet::up_to(N_LEVELS);
    let mut early = (cfg.early_stopping_patience > 0).then(|| EarlyStopping::new(cfg.early_stopping_patience));
    let mut records = Vec::with_capacity(cfg.steps as usize);
    let mut stopped_early = None;
    let mut last_report = None;
    let mut stage_best: Option<(f64, SurrogateModel)> = None;

    for step in 0..cfg.steps {
        let sched = scheduler.get();
        let weights = sched.weights();
        let active = sched.active_levels().unwrap_or(all_levels);
        let (s, w) = loader.next(|i| active.contains(levels[i]))?;
        let window = Window::from_sequence(&dataset.sequences[s], w, &camera);
        let out = match model_loss(&model, &window, &weights, &scales, &camera) {
            Err(Error::NonFiniteLoss { .. }) => return Err(Error::NonFiniteLoss { step }),
            r => r?,
        };
        sgd_step(&mut model, &out.grad, cfg.learning_rate);
        sched.observe_step(step, &out.breakdown)?;

        let mut record = TrainingRecord {
            step,
            loss: out.breakdown,
            weights,
            active_levels: active,
            validation: None,
        };
        let last = step + 1 == cfg.steps;
        if (step + 1) % cfg.validation_every == 0 || last {
            let report = validate(&model, &dataset, &split.val, cfg.auc_max_error, exec)?;
            let p = report.point;
            record.validation = Some(p);
            if active != all_levels && stage_best.as_ref().is_none_or(|(b, _)| p.ate < *b) {
                stage_best = Some((p.ate, model.clone()));
            }
            sched.observe_validation(step, p.ate, p.auc);
            last_report = Some(report);
            let full = sched.active_levels().is_none_or(|a| a == all_levels) && active == all_levels;
            if let (Some(es), true) = (early.as_mut(), full) {
                if es.update(p.auc, p.ate) == StopDecision::Stop && !last {
                    stopped_early = Some(step);
                }
            }
        }
        // A promoted stage starts from the best checkpoint of the stage before it.
        if !last && sched.active_levels().is_some_and(|a| a != active) {
            if let Some((_, best)) = stage_best.take() {
                model = best;
            }
        }
        sink(&record)?;
        records.push(record);
        if stopped_early.is_some() {
            break;
        }
    }

    let agents = match scheduler {
        ActiveScheduler::Ddpg(s) => Some(s.into_agents()),
        _ => None,
    };
    Ok(TrainingOutcome {
        records,
        model,
        agents,
        final_validation: last_report.expect("the final step always validates"),
        stopped_early,
        dataset,
        split,
    })
}

pub fn run_training(cfg: &TrainConfig, exec: Execution) -> Result<TrainingOutcome> {
    run_training_with(cfg, exec, &mut |_| Ok(()))
}

pub const METRICS_HEADER: [&str; 11] = [
    "step",
    "loss_flow",
    "loss_trans",
    "loss_rot",
    "loss_total",
    "w_f",
    "w_p",
    "w_r",
    "active_levels",
    "val_ate",
    "val_auc",
];

/// Streams training records as CSV rows.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(METRICS_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &TrainingRecord) -> Result<()> {
        let (ate, auc) = r
            .validation
            .map_or((String::new(), String::new()), |v| (v.ate.to_string(), v.auc.to_string()));
        self.inner.write_record([
            r.step.to_string(),
            r.loss.flow.to_string(),
            r.loss.translation.to_string(),
            r.loss.rotation.to_string(),
            r.loss.total.to_string(),
            r.weights.flow.to_string(),
            r.weights.pose.to_string(),
            r.weights.rotation.to_string(),
            r.active_levels.to_string(),
            ate,
            auc,
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn write_metrics_csv<W: Write>(records: &[TrainingRecord], out: W) -> Result<W> {
    let mut w = MetricsWriter::new(out)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Parses a metrics CSV back into records.
pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<TrainingRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let missing: Vec<String> = METRICS_HEADER
        .iter()
        .filter(|h| !headers.iter().any(|x| x == **h))
        .map(|h| h.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let idx: Vec<usize> = METRICS_HEADER.iter().map(|h| col(h)).collect();
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let num = |k: usize| -> Result<f64> {
            rec[idx[k]].parse::<f64>().map_err(|_| Error::MalformedLine {
                line,
                reason: format!("bad {} value '{}'", METRICS_HEADER[k], &rec[idx[k]]),
            })
        };
        let step = rec[idx[0]].parse::<u64>().map_err(|_| Error::MalformedLine {
            line,
            reason: format!("bad step '{}'", &rec[idx[0]]),
        })?;
        let validation = if rec[idx[9]].is_empty() {
            None
        } else {
            Some(ValidationPoint {
                ate: num(9)?,
                auc: num(10)?,
            })
        };
        out.push(TrainingRecord {
            step,
            loss: LossBreakdown {
                flow: num(1)?,
                translation: num(2)?,
                rotation: num(3)?,
                total: num(4)?,
            },
            weights: CurriculumWeights {
                flow: num(5)?,
                pose: num(6)?,
                rotation: num(7)?,
            },
            active_levels: rec[idx[8]].parse().map_err(|_| Error::MalformedLine {
                line,
                reason: format!("bad level set '{}'", &rec[idx[8]]),
            })?,
            validation,
        });
    }
    Ok(out)
}
