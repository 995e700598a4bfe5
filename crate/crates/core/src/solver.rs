//! ADAM-driven (stochastic) gradient descent on the reduced objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_minibatches, Dataset, MinibatchPlan};
use crate::error::{Error, Result};
use crate::objective::{evaluate, ObjectiveSpec};
use crate::threshold::threshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Zeros,
    /// Independent uniform draws from `[-1, 1]`.
    Uniform,
}

/// Training loop configuration; serializes to the JSON config document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub adam: AdamConfig,
    /// 1 means full batch.
    pub n_minibatch: usize,
    pub seed: u64,
    /// `None` projects exactly for the exact-quantile rules.
    pub project_unit_ball: Option<bool>,
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            adam: AdamConfig::default(),
            n_minibatch: 1,
            seed: 0,
            project_unit_ball: None,
            init: Init::Zeros,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.n_minibatch == 0 {
            return Err(Error::invalid("n_minibatch must be positive"));
        }
        if !(a.step_size >= 0.0 && a.step_size.is_finite()) {
            return Err(Error::invalid("step_size must be non-negative"));
        }
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0) {
            return Err(Error::invalid("ADAM betas must lie in (0, 1)"));
        }
        if !(a.epsilon > 0.0) {
            return Err(Error::invalid("ADAM epsilon must be positive"));
        }
        Ok(())
    }

    pub fn projects(&self, spec: &ObjectiveSpec) -> bool {
        self.project_unit_ball
            .unwrap_or_else(|| spec.rule.is_exact_quantile())
    }

    pub fn initial_weights(&self, m: usize) -> Vec<f64> {
        match self.init {
            Init::Zeros => vec![0.0; m],
            Init::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX);
                (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()
            }
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update; returns the weight delta.
pub fn adam_step(state: &mut AdamState, grad: &[f64], cfg: &AdamConfig) -> Result<Vec<f64>> {
    if grad.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: state.m.len(),
            found: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powf(state.step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(state.step as f64);
    let delta = grad
        .iter()
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        .map(|(&g, (m, v))| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            -cfg.step_size * m_hat / (v_hat.sqrt() + cfg.epsilon)
        })
        .collect();
    Ok(delta)
}

pub fn project_l2_ball(w: &[f64]) -> Vec<f64> {
    let norm = l2_norm(w);
    if norm <= 1.0 {
        w.to_vec()
    } else {
        w.iter().map(|v| v / norm).collect()
    }
}

pub fn l2_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Objective on the iteration's minibatch, before the update.
    pub objective: f64,
    /// Norm of the weights after the update.
    pub w_norm: f64,
}

/// A trained linear classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub w: Vec<f64>,
    pub spec: ObjectiveSpec,
    /// Threshold of `spec.rule` at `w` on the full training data.
    pub t_final: f64,
    pub config: TrainConfig,
    #[serde(default)]
    pub history: Vec<HistoryEntry>,
}

/// Iteration state of a training run; [`train`] drives it to completion.
pub struct Trainer<'a> {
    spec: ObjectiveSpec,
    data: &'a Dataset,
    cfg: TrainConfig,
    project: bool,
    w: Vec<f64>,
    adam: AdamState,
    plan: Option<MinibatchPlan>,
    batches: Vec<Dataset>,
    iteration: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(spec: ObjectiveSpec, data: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        data.check_trainable()?;
        spec.rule.validate()?;
        let plan = if cfg.n_minibatch > 1 {
            Some(make_minibatches(data, cfg.n_minibatch, cfg.seed)?)
        } else {
            None
        };
        let mut w = cfg.initial_weights(data.n_features());
        let project = cfg.projects(&spec);
        if project {
            w = project_l2_ball(&w);
        }
        Ok(Trainer {
            spec,
            data,
            cfg,
            project,
            adam: AdamState::new(w.len()),
            w,
            plan,
            batches: Vec::new(),
            iteration: 0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn batch(&mut self) -> &Dataset {
        let Some(plan) = self.plan.as_mut() else {
            return self.data;
        };
        let chunks = plan.n_chunks();
        let pos = self.iteration % chunks;
        if pos == 0 {
            plan.reshuffle((self.iteration / chunks) as u64);
            self.batches = plan.schedule.iter().map(|idx| self.data.subset(idx)).collect();
        }
        &self.batches[pos]
    }

    /// Runs one iteration and returns its history entry.
    pub fn step(&mut self) -> Result<HistoryEntry> {
        let spec = self.spec;
        let w = self.w.clone();
        let eval = evaluate(&spec, &w, self.batch())?;
        if !eval.value.is_finite() {
            return Err(Error::Diverged {
                iteration: self.iteration,
                w_norm: l2_norm(&self.w),
            });
        }
        let delta = adam_step(&mut self.adam, &eval.gradient, &self.cfg.adam).map_err(|_| Error::Diverged {
            iteration: self.iteration,
            w_norm: l2_norm(&self.w),
        })?;
        for (wi, di) in self.w.iter_mut().zip(&delta) {
            *wi += di;
        }
        if self.project {
            self.w = project_l2_ball(&self.w);
        }
        self.iteration += 1;
        Ok(HistoryEntry {
            objective: eval.value,
            w_norm: l2_norm(&self.w),
        })
    }

    pub fn finish(self, history: Vec<HistoryEntry>) -> Result<Model> {
        let t_final = threshold(&self.spec.rule, &self.w, self.data, self.spec.loss)?.t;
        Ok(Model {
            w: self.w,
            spec: self.spec,
            t_final,
            config: self.cfg,
            history,
        })
    }
}

/// Runs exactly `cfg.iterations` ADAM steps; deterministic under `cfg.seed`.
pub fn train(spec: &ObjectiveSpec, d_train: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    let mut trainer = Trainer::new(*spec, d_train, *cfg)?;
    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        history.push(trainer.step()?);
    }
    trainer.finish(history)
}
