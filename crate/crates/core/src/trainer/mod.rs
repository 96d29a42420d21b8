//! Training loop, plateau learning-rate schedule, multi-seed evaluation and
//! the fold protocols built on top of them.

mod deviation;
mod schedule;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use deviation::{cmd, imd};
pub use schedule::{LrSchedule, ScheduleEvent};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Label, Task};
use crate::model::{Model, ModelConfig};
use crate::nn::{adam_step, cross_entropy, l1, AdamState, Mode, Tensor};
use crate::rng::{derive_indexed, derive_seed, stream};
use crate::stats::mean;
use crate::walker::WalkStrategy;
use crate::walkfeat::Encodings;

/// Optimization and evaluation settings around a [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    /// Hard cap on epochs; `None` runs until the schedule stops.
    pub max_epochs: Option<usize>,
    /// Walk seeds per test evaluation.
    pub eval_seeds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 10,
            lr: 1e-3,
            lr_factor: 0.5,
            patience: 10,
            min_lr: 1e-6,
            max_epochs: None,
            eval_seeds: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.eval_seeds == 0 || self.patience == 0 {
            return Err(Error::invalid("batch_size, eval_seeds and patience must be positive"));
        }
        if !(self.lr > 0.0 && self.lr_factor > 0.0 && self.lr_factor < 1.0 && self.min_lr >= 0.0) {
            return Err(Error::invalid("need lr > 0, 0 < lr_factor < 1 and min_lr >= 0"));
        }
        Ok(())
    }
}

/// Graph indices used for training, model selection and testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Rotation `run` of the k-fold protocol: test fold `run`, validation
    /// fold `run + 1`, the remaining folds train.
    pub fn rotation(ds: &Dataset, run: usize) -> Result<Self> {
        let k = ds.num_folds();
        if k < 3 {
            return Err(Error::invalid(format!("fold rotation needs at least 3 folds, dataset has {k}")));
        }
        let test = run % k;
        let val = (run + 1) % k;
        let train_folds: Vec<usize> = (0..k).filter(|&f| f != test && f != val).collect();
        Ok(Self {
            train: ds.members_of(&train_folds),
            val: ds.fold_members(val),
            test: ds.fold_members(test),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_score: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Schedule,
    EpochCap,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation score.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub seconds: f64,
}

/// Whether larger scores are better for this task (accuracy vs. MAE).
pub fn higher_is_better(task: Task) -> bool {
    matches!(task, Task::Classification { .. })
}

fn targets_of(graphs: &[&Graph], task: Task) -> Result<Targets> {
    let missing = || Error::invalid("every graph used for training or evaluation needs a label");
    match task {
        Task::Classification { .. } => graphs
            .iter()
            .map(|g| match g.label() {
                Some(Label::Class(c)) => Ok(c),
                _ => Err(missing()),
            })
            .collect::<Result<Vec<_>>>()
            .map(Targets::Classes),
        Task::Regression => graphs
            .iter()
            .map(|g| match g.label() {
                Some(Label::Real(y)) => Ok(y),
                _ => Err(missing()),
            })
            .collect::<Result<Vec<_>>>()
            .map(Targets::Values),
    }
}

enum Targets {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    /// Loss and output gradient.
    fn loss(&self, out: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            Targets::Classes(c) => cross_entropy(out, c),
            Targets::Values(v) => {
                let (loss, g) = l1(out.data(), v)?;
                Ok((loss, Tensor::from_vec(out.shape(), g)?))
            }
        }
    }

    /// Number of correct predictions, or summed absolute error.
    fn score_sum(&self, out: &Tensor) -> f64 {
        match self {
            Targets::Classes(c) => {
                let k = out.channels();
                out.data()
                    .chunks_exact(k)
                    .zip(c)
                    .filter(|(row, &t)| argmax(row) == t)
                    .count() as f64
            }
            Targets::Values(v) => out.data().iter().zip(v).map(|(p, y)| (p - y).abs()).sum(),
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn check_model_fits(cfg: &ModelConfig, ds: &Dataset) -> Result<()> {
    let want = match ds.task() {
        Task::Classification { num_classes } => num_classes,
        Task::Regression => 1,
    };
    if cfg.outputs != want {
        return Err(Error::invalid(format!(
            "model has {} outputs but the task needs {want}",
            cfg.outputs
        )));
    }
    Ok(())
}

const EVAL_CHUNK: usize = 1;

/// Mean score and mean loss of `model` on `indices` for one walk seed.
fn score_once(model: &Model, ds: &Dataset, indices: &[usize], walk_root: u64, ell: usize) -> Result<(f64, f64)> {
    let mut score = 0.0;
    let mut loss = 0.0;
    for chunk in indices.chunks(EVAL_CHUNK) {
        let graphs: Vec<&Graph> = chunk.iter().map(|&i| &ds.graphs()[i]).collect();
        let seeds: Vec<u64> = chunk.iter().map(|&i| derive_indexed(walk_root, &[i as u64])).collect();
        let batch = model.batch(&graphs, ell, &seeds)?;
        let out = model.predict(&batch)?;
        let targets = targets_of(&graphs, ds.task())?;
        score += targets.score_sum(&out);
        loss += targets.loss(&out)?.0 * chunk.len() as f64;
    }
    Ok((score / indices.len() as f64, loss / indices.len() as f64))
}

/// Scores a frozen model on `indices` once per walk seed, with the model's
/// evaluation walk length. Classification scores are accuracies, regression
/// scores are mean absolute errors.
pub fn evaluate(model: &Model, ds: &Dataset, indices: &[usize], eval_seeds: &[u64]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty index set"));
    }
    eval_seeds
        .iter()
        .map(|&s| Ok(score_once(model, ds, indices, s, model.config().eval_ell)?.0))
        .collect()
}

/// Walk seeds for `count` test evaluations under a run seed.
pub fn eval_seed_list(seed: u64, count: usize) -> Vec<u64> {
    let root = derive_seed(seed, "test-walks");
    (0..count as u64).map(|j| derive_indexed(root, &[j])).collect()
}

/// Trains a model on `split.train`, selecting the epoch with the best
/// validation score (ties broken by lower validation loss). Walks are
/// resampled for every training batch; validation uses one fixed walk seed.
pub fn train(ds: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(ds, split, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    ds: &Dataset,
    split: &Split,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_model_fits(&cfg.model, ds)?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::invalid("training needs non-empty train and validation sets"));
    }
    let started = Instant::now();
    let mut model = Model::new(cfg.model.clone(), cfg.seed)?;
    let mut adam = AdamState::new(model.params());
    let higher = higher_is_better(ds.task());
    let mut schedule = LrSchedule::new(cfg.lr, cfg.lr_factor, cfg.patience, cfg.min_lr, higher);
    let train_root = derive_seed(cfg.seed, "train-walks");
    let val_root = derive_seed(cfg.seed, "val-walks");
    let mut order = split.train.clone();
    let mut history = Vec::new();
    let mut best: Option<(f64, f64, usize, Model)> = None;
    let mut epoch = 0;
    let stop = loop {
        if cfg.max_epochs.is_some_and(|cap| epoch >= cap) {
            break StopReason::EpochCap;
        }
        let lr = schedule.lr();
        order.shuffle(&mut stream(derive_indexed(cfg.seed, &[epoch as u64]), 1));
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let graphs: Vec<&Graph> = chunk.iter().map(|&i| &ds.graphs()[i]).collect();
            let seeds: Vec<u64> = chunk
                .iter()
                .map(|&i| derive_indexed(train_root, &[epoch as u64, i as u64]))
                .collect();
            let batch = model.batch(&graphs, cfg.model.train_ell, &seeds)?;
            let targets = targets_of(&graphs, ds.task())?;
            let dropout_seed = derive_indexed(cfg.seed, &[epoch as u64, step as u64, 0xd0]);
            let (out, tape) = model.forward(&batch, Mode::Train, dropout_seed).map_err(|e| diverged(epoch, step, e))?;
            let (loss, grad) = targets.loss(&out)?;
            if !loss.is_finite() {
                return Err(Error::Numerical {
                    op: "train",
                    message: format!("loss became {loss} in epoch {epoch}, step {step} (lr {lr:e})"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            model.params_mut().zero_grad();
            model.backward(&batch, &tape, &grad);
            model.commit(&tape);
            adam_step(model.params_mut(), &mut adam, lr);
        }
        let (val_score, val_loss) = score_once(&model, ds, &split.val, val_root, cfg.model.eval_ell)?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / order.len() as f64,
            val_score,
            val_loss,
        };
        on_epoch(&record);
        history.push(record);
        let better = match &best {
            None => true,
            Some((s, l, _, _)) => {
                let strictly = if higher { val_score > *s } else { val_score < *s };
                strictly || (val_score == *s && val_loss < *l)
            }
        };
        if better {
            best = Some((val_score, val_loss, epoch, model.clone()));
        }
        epoch += 1;
        if schedule.observe(val_score) == ScheduleEvent::Stop {
            break StopReason::Schedule;
        }
    };
    let (_, _, best_epoch, model) = best.ok_or_else(|| Error::invalid("training ran zero epochs"))?;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        stop,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn diverged(epoch: usize, step: usize, e: Error) -> Error {
    match e {
        Error::Numerical { op, message } => Error::Numerical {
            op,
            message: format!("{message} (epoch {epoch}, step {step})"),
        },
        other => other,
    }
}

/// Result of one trained model of a fold protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub run: usize,
    pub best_epoch: usize,
    pub epochs: usize,
    pub stop: StopReason,
    pub seconds: f64,
    /// Test score for every evaluation seed.
    pub test_scores: Vec<f64>,
    pub history: Vec<EpochRecord>,
}

/// Aggregate of a fold protocol: the `p_{i,j}` grid (model `i`, walk seed
/// `j`) with its deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    pub num_parameters: usize,
    pub runs: Vec<FoldResult>,
    pub grid: Vec<Vec<f64>>,
    pub mean: f64,
    pub imd: Option<f64>,
    pub cmd: Option<f64>,
    pub seconds: f64,
}

impl RunMetrics {
    fn from_runs(label: String, num_parameters: usize, runs: Vec<FoldResult>, seconds: f64) -> Self {
        let grid: Vec<Vec<f64>> = runs.iter().map(|r| r.test_scores.clone()).collect();
        let mean = mean(&grid.iter().flatten().copied().collect::<Vec<_>>());
        Self {
            label,
            num_parameters,
            imd: imd(&grid).ok(),
            cmd: cmd(&grid).ok(),
            runs,
            grid,
            mean,
            seconds,
        }
    }

    /// Writes one CSV row per epoch of every run.
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::from("run,epoch,lr,train_loss,val_score\n");
        for r in &self.runs {
            for e in &r.history {
                text.push_str(&format!("{},{},{:e},{},{}\n", r.run, e.epoch, e.lr, e.train_loss, e.val_score));
            }
        }
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Trains and tests one model per fold rotation (`runs` rotations, at most
/// the number of folds). Run `i` uses seed `derive_indexed(cfg.seed, [i])`.
pub fn kfold_run(ds: &Dataset, cfg: &TrainConfig, runs: usize) -> Result<RunMetrics> {
    kfold_run_with_progress(ds, cfg, runs, |_, _| {})
}

/// [`kfold_run`] with a per-epoch callback receiving the run index. Runs
/// train in parallel; each has its own seed so results do not depend on
/// scheduling.
pub fn kfold_run_with_progress(
    ds: &Dataset,
    cfg: &TrainConfig,
    runs: usize,
    on_epoch: impl Fn(usize, &EpochRecord) + Sync,
) -> Result<RunMetrics> {
    kfold_run_with_hooks(ds, cfg, runs, on_epoch, |_, _| Ok(()))
}

/// [`kfold_run_with_progress`] that also hands every selected model to
/// `on_model` (e.g. to write a checkpoint) before it is dropped.
pub fn kfold_run_with_hooks(
    ds: &Dataset,
    cfg: &TrainConfig,
    runs: usize,
    on_epoch: impl Fn(usize, &EpochRecord) + Sync,
    on_model: impl Fn(usize, &Model) -> Result<()> + Sync,
) -> Result<RunMetrics> {
    cfg.validate()?;
    if runs == 0 || runs > ds.num_folds() {
        return Err(Error::invalid(format!(
            "runs must lie in 1..={} for this dataset",
            ds.num_folds()
        )));
    }
    let started = Instant::now();
    let outcomes: Vec<(usize, FoldResult)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let split = Split::rotation(ds, run)?;
            let run_cfg = TrainConfig {
                seed: derive_indexed(cfg.seed, &[run as u64]),
                ..cfg.clone()
            };
            let outcome = train_with_progress(ds, &split, &run_cfg, |e| on_epoch(run, e))?;
            let test_scores = evaluate(&outcome.model, ds, &split.test, &eval_seed_list(run_cfg.seed, cfg.eval_seeds))?;
            on_model(run, &outcome.model)?;
            Ok((
                outcome.model.num_parameters(),
                FoldResult {
                    run,
                    best_epoch: outcome.best_epoch,
                    epochs: outcome.history.len(),
                    stop: outcome.stop,
                    seconds: outcome.seconds,
                    test_scores,
                    history: outcome.history,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let num_parameters = outcomes.first().map_or(0, |o| o.0);
    let results = outcomes.into_iter().map(|o| o.1).collect();
    Ok(RunMetrics::from_runs(
        format!("{}+{}", cfg.model.encodings.label(), cfg.model.strategy),
        num_parameters,
        results,
        started.elapsed().as_secs_f64(),
    ))
}

/// One cell of the encoding × strategy ablation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationCell {
    pub encodings: Encodings,
    pub strategy: WalkStrategy,
    pub metrics: RunMetrics,
}

impl AblationCell {
    pub fn mean(&self) -> f64 {
        self.metrics.mean
    }

    /// Standard deviation across models of the per-model mean.
    pub fn std(&self) -> f64 {
        self.metrics.cmd.unwrap_or(0.0)
    }
}

/// Runs the fold protocol for every combination of structural encodings
/// {none, identity, adjacency, both} and walk strategy {uniform, nb}.
pub fn ablation_matrix(ds: &Dataset, base: &TrainConfig, runs: usize) -> Result<Vec<AblationCell>> {
    let mut cells = Vec::with_capacity(8);
    for encodings in Encodings::ALL {
        for strategy in [WalkStrategy::Uniform, WalkStrategy::NonBacktracking] {
            let cfg = TrainConfig {
                model: ModelConfig {
                    encodings,
                    strategy,
                    ..base.model.clone()
                },
                ..base.clone()
            };
            cells.push(AblationCell {
                encodings,
                strategy,
                metrics: kfold_run(ds, &cfg, runs)?,
            });
        }
    }
    Ok(cells)
}

/// Renders the ablation grid as a Markdown table of `mean ± std`.
pub fn ablation_table(cells: &[AblationCell]) -> String {
    let mut out = String::from("| encodings | uniform | nb |\n|---|---|---|\n");
    for encodings in Encodings::ALL {
        let cell = |s: WalkStrategy| {
            cells
                .iter()
                .find(|c| c.encodings == encodings && c.strategy == s)
                .map_or("-".to_string(), |c| format!("{:.4} ± {:.4}", c.mean(), c.std()))
        };
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            encodings.label(),
            cell(WalkStrategy::Uniform),
            cell(WalkStrategy::NonBacktracking)
        ));
    }
    out
}
