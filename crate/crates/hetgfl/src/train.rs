//! Full-batch training: Adam updates, patience-based early stopping on
//! validation micro-F1, and per-epoch history.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::metrics::MetricsReport;
use crate::model::{self, LossMode, ModelConfig, Predictions};
use crate::params::{GraphMeta, ModelParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    /// Epochs without a validation micro-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// When set, per-epoch records are appended here as JSON lines.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 200,
            patience: 30,
            seed: 1,
            log_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 {
            return Err(Error::Config("learning rate must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("patience and max_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// First/second moment buffers, aligned with [`ModelParams::tensors`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let m = params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        let v = params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        Self { m, v, step: 0 }
    }
}

/// One bias-corrected Adam update over every trainable tensor.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.adam_beta1.powi(t);
    let bc2 = 1.0 - config.adam_beta2.powi(t);
    for (idx, tensor) in params.tensors_mut().into_iter().enumerate() {
        if !tensor.trainable {
            continue;
        }
        let g = &grads[idx];
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            let _ = bad;
            return Err(Error::NonFiniteParam {
                what: "gradient",
                name: tensor.name.clone(),
            });
        }
        let (m, v) = (&mut state.m[idx], &mut state.v[idx]);
        for j in 0..g.len() {
            m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * g[j];
            v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            tensor.values[j] -= config.lr * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the best validation micro-F1 (first on ties).
    pub best_epoch: usize,
}

/// Micro/macro F1 (plus partition metrics where defined) of the hard
/// predictions restricted to `mask`.
pub fn report_on_mask(
    probs: &[f64],
    graph: &HeteroGraph,
    mask: &[bool],
    mode: LossMode,
) -> Result<MetricsReport> {
    let n = graph.n_nodes();
    let c = graph.n_classes();
    let idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(Error::Metric("mask selects no nodes".into()));
    }
    match model::predict(probs, n, c, mode) {
        Predictions::SingleLabel(pred) => {
            let truth: Vec<usize> = idx.iter().map(|&i| graph.labels()[i][0]).collect();
            let pred: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
            MetricsReport::classification(&truth, &pred)
        }
        Predictions::MultiLabel(pred) => {
            let mut truth = Vec::with_capacity(idx.len() * c);
            let mut p = Vec::with_capacity(idx.len() * c);
            let y = graph.label_matrix();
            for &i in &idx {
                truth.extend(y[i * c..(i + 1) * c].iter().map(|&v| v != 0.0));
                p.extend_from_slice(&pred[i * c..(i + 1) * c]);
            }
            MetricsReport::multilabel(&truth, &p, c)
        }
    }
}

/// Trains on the graph's train mask, early-stopping on validation micro-F1,
/// and returns the parameters from the best validation epoch.
pub fn train(
    graph: &HeteroGraph,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    model_config.validate()?;
    train_config.validate()?;
    let masks = graph.masks();
    if !masks.train.iter().any(|&b| b) {
        return Err(Error::Config("training mask is empty".into()));
    }
    if !masks.val.iter().any(|&b| b) {
        return Err(Error::Config(
            "validation mask is empty; early stopping needs validation nodes".into(),
        ));
    }
    if model_config.loss == LossMode::SoftmaxCe && !graph.is_single_label() {
        return Err(Error::Config(
            "softmax-ce requires single-label nodes; use sigmoid-bce".into(),
        ));
    }

    let meta = GraphMeta::of(graph);
    let mut params = ModelParams::init(&meta, model_config)?;
    let mut state = AdamState::new(&params);
    let mut history = TrainHistory::default();
    let mut best_params = params.clone();
    let mut best_micro = f64::NEG_INFINITY;
    let mut since_best = 0usize;

    let mut log_file = match &train_config.log_path {
        Some(p) => Some(std::fs::File::create(p)?),
        None => None,
    };

    for epoch in 1..=train_config.max_epochs {
        let started = Instant::now();
        let mut tape = Tape::new();
        let pass = model::forward(&mut tape, graph, &params, model_config)?;
        let train_loss = model::loss(
            &mut tape,
            &pass,
            graph,
            &masks.train,
            &params,
            model_config,
            true,
        )?;
        let train_loss_v = tape.scalar(train_loss)?;
        if !train_loss_v.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_loss = model::loss(
            &mut tape,
            &pass,
            graph,
            &masks.val,
            &params,
            model_config,
            false,
        )?;
        let val_loss_v = tape.scalar(val_loss)?;
        let val_report = report_on_mask(
            tape.values(pass.probs),
            graph,
            &masks.val,
            model_config.loss,
        )?;

        let record = EpochRecord {
            epoch,
            train_loss: train_loss_v,
            val_loss: val_loss_v,
            val_micro_f1: val_report.micro_f1,
            val_macro_f1: val_report.macro_f1,
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", serde_json::to_string(&record)?)?;
        }
        history.epochs.push(record);

        if val_report.micro_f1 > best_micro {
            best_micro = val_report.micro_f1;
            best_params = params.clone();
            history.best_epoch = history.epochs.len() - 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_config.patience {
                break;
            }
        }

        tape.backward(train_loss)?;
        let grads: Vec<Vec<f64>> = pass
            .bound
            .flat_ids()
            .iter()
            .map(|&id| tape.grad(id).to_vec())
            .collect();
        adam_step(&mut params, &grads, &mut state, train_config)?;
    }

    Ok((best_params, history))
}
