//! Adam with projection, and the epoch loop with validation snapshots.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::backward::{backward, loss, Gradients};
use super::checkpoint::save_checkpoint;
use super::forward::{forward, InitStates};
use super::params::SlogModel;
use crate::datagen::{synthesize, Dataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::rng::{child_rng, child_seed, stream};
use crate::spectral::{FilterSpec, SpectralGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub val_every_batches: usize,
    pub seed: u64,
    /// Repartition the training columns into new batches, and reassign the
    /// stored filters to them, at the start of every epoch. When off, the
    /// stored batches are kept and only their order is shuffled.
    pub resplit_each_epoch: bool,
    /// Where the best model and the log are written, if anywhere.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Extra provenance stored in the checkpoint metadata under `context`.
    #[serde(skip)]
    pub context: serde_json::Value,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            val_every_batches: 20,
            seed: 0,
            resplit_each_epoch: true,
            checkpoint_dir: None,
            context: serde_json::Value::Null,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParams("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidParams("Adam betas must lie in [0, 1) and eps be positive".into()));
        }
        if self.val_every_batches == 0 {
            return Err(Error::InvalidParams("val_every_batches must be at least 1".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates over the flattened parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update followed by clamping `rho1, rho2, tau` at zero.
pub fn adam_step(model: &mut SlogModel, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let g = grads.to_flat();
    let mut theta = model.to_flat();
    if g.len() != theta.len() || state.m.len() != theta.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            theta.len(),
            g.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..theta.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    model.set_flat(&theta)?;
    for layer in &mut model.layers {
        layer.project();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub validations: Vec<ValidationRecord>,
    pub best_step: usize,
    pub best_validation_loss: f64,
    /// Wall-clock training time. Kept out of `train_log.json` so that the log
    /// is reproducible; written to `train_timing.json` instead.
    #[serde(skip)]
    pub seconds: f64,
}

/// Per-batch inputs to the network: observations and the sources to match.
struct Batch {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

/// Column and filter assignment of one epoch.
struct EpochPlan {
    columns: Vec<usize>,
    filters: Vec<usize>,
}

impl EpochPlan {
    fn new(ds: &Dataset, cfg: &TrainConfig, epoch: usize) -> Self {
        let mut columns: Vec<usize> = (0..ds.x.ncols()).collect();
        columns.shuffle(&mut child_rng(cfg.seed, stream::SHUFFLE, epoch as u64));
        let mut filters: Vec<usize> = (0..ds.n_batches()).collect();
        filters.shuffle(&mut child_rng(cfg.seed, stream::FILTER_ASSIGN, epoch as u64));
        Self { columns, filters }
    }

    /// Batch `b` of the epoch, synthesized from the stored sources and filters.
    fn batch(&self, sg: &SpectralGraph, ds: &Dataset, cfg: &TrainConfig, epoch: usize, b: usize) -> Result<Batch> {
        let p = ds.batch_size();
        let x = ds.x.select_columns(&self.columns[b * p..(b + 1) * p]);
        let h = FilterSpec::from_coeffs(ds.filter(self.filters[b]));
        let noise_seed = child_seed(cfg.seed, stream::NOISE, (epoch * ds.n_batches() + b) as u64);
        let y = synthesize(sg, &h, &x, ds.manifest.eta, noise_seed)?.y;
        Ok(Batch { x, y })
    }
}

/// Mean loss over every batch of `val`, with initial states fixed by `seed`.
pub fn validation_loss(model: &SlogModel, v: &DMatrix<f64>, val: &Dataset, seed: u64) -> Result<f64> {
    let q_count = val.n_batches();
    let mut total = 0.0;
    for q in 0..q_count {
        let (x, y) = val.batch(q);
        let init = InitStates::Random {
            seed: child_seed(seed, stream::VALIDATION, q as u64),
        };
        let (x_hat, _, _) = forward(model, v, &y, &init)?;
        total += loss(&x_hat, &x)?;
    }
    Ok(total / q_count as f64)
}

fn persist(dir: &Option<PathBuf>, model: Option<&SlogModel>, log: &TrainLog, cfg: &TrainConfig) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    if let Some(model) = model {
        let meta = serde_json::json!({ "train": cfg, "context": cfg.context });
        save_checkpoint(model, dir, &meta)?;
    }
    let path = dir.join("train_log.json");
    let json = serde_json::to_vec_pretty(log).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, &json)?;
    let path = dir.join("train_timing.json");
    let json = serde_json::to_vec_pretty(&serde_json::json!({ "seconds": log.seconds })).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, &json)
}

/// Train for `epochs x Q` Adam steps and return the snapshot with the lowest
/// validation loss. Validation runs every `val_every_batches` steps and once
/// more after the final step if that step was not already a validation point.
pub fn train(
    model: &SlogModel,
    sg: &SpectralGraph,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(SlogModel, TrainLog)> {
    cfg.validate()?;
    if train_set.manifest.n != model.n_nodes() || val_set.manifest.n != model.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} nodes, data has {} (train) and {} (validation)",
            model.n_nodes(),
            train_set.manifest.n,
            val_set.manifest.n
        )));
    }
    if sg.n_nodes() != model.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} nodes, graph has {}",
            model.n_nodes(),
            sg.n_nodes()
        )));
    }
    let v = sg.eigvecs();
    let start = Instant::now();
    let q_count = train_set.n_batches();
    let mut current = model.clone();
    let mut adam = AdamState::new(current.n_params());
    let mut log = TrainLog {
        best_validation_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best = current.clone();
    let mut order: Vec<usize> = (0..q_count).collect();
    let mut step = 0;
    let total_steps = cfg.epochs * q_count;

    for epoch in 0..cfg.epochs {
        let plan = cfg.resplit_each_epoch.then(|| EpochPlan::new(train_set, cfg, epoch));
        if plan.is_none() {
            order.sort_unstable();
            order.shuffle(&mut child_rng(cfg.seed, stream::SHUFFLE, epoch as u64));
        }
        for &q in &order {
            let batch = match &plan {
                Some(plan) => plan.batch(sg, train_set, cfg, epoch, q)?,
                None => {
                    let (x, y) = train_set.batch(q);
                    Batch { x, y }
                }
            };
            let init = InitStates::Random {
                seed: child_seed(cfg.seed, stream::INIT_STATES, q as u64),
            };
            let (_, _, trace) = forward(&current, v, &batch.y, &init)?;
            let (value, grads) = backward(&current, &trace, &batch.x)?;
            let finite = value.is_finite() && grads.to_flat().iter().all(|g| g.is_finite());
            log.steps.push(StepRecord {
                step,
                epoch,
                batch: q,
                loss: value,
            });
            if !finite {
                log.seconds = start.elapsed().as_secs_f64();
                persist(&cfg.checkpoint_dir, None, &log, cfg)?;
                return Err(Error::Diverged { step, loss: value });
            }
            adam_step(&mut current, &grads, &mut adam, cfg)?;
            step += 1;

            if step % cfg.val_every_batches == 0 || step == total_steps {
                let val = validation_loss(&current, v, val_set, cfg.seed)?;
                log.validations.push(ValidationRecord { step, loss: val });
                log::debug!("step {step}: train {value:.4e}, validation {val:.4e}");
                if val < log.best_validation_loss {
                    log.best_validation_loss = val;
                    log.best_step = step;
                    best = current.clone();
                    persist(&cfg.checkpoint_dir, Some(&best), &log, cfg)?;
                }
            }
        }
        log::info!(
            "epoch {}/{}: last validation {:.4e}, best {:.4e}",
            epoch + 1,
            cfg.epochs,
            log.validations.last().map_or(f64::NAN, |r| r.loss),
            log.best_validation_loss
        );
    }
    log.seconds = start.elapsed().as_secs_f64();
    persist(&cfg.checkpoint_dir, None, &log, cfg)?;
    Ok((best, log))
}

/// One forward pass with seeded initial states; the clock covers the forward only.
pub fn infer(
    model: &SlogModel,
    v: &DMatrix<f64>,
    y: &DMatrix<f64>,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let init = InitStates::Random { seed };
    let start = Instant::now();
    let (x_hat, g, _) = forward(model, v, y, &init)?;
    Ok((x_hat, g, start.elapsed().as_secs_f64()))
}
