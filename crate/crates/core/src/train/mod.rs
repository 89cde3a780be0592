//! Training loop, accuracy reports, ablation runner and finite-difference
//! gradient checks.

mod ablation;
mod eval;
mod experiment;
mod gradcheck;

pub use ablation::{ablation_markdown, run_ablation, AblationRow, Variant};
pub use eval::{evaluate, EvalReport};
pub use experiment::{fit, fit_qa_v_s, init_model, prepare, run_experiment, Embeddings, Experiment, ExperimentResult, Prepared};
pub use gradcheck::{check_gradients, grad_check, grad_check_fixture, GradCheckReport, GroupError, GRAD_TOLERANCE};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Gradients, ParamStore, Tensor};
use crate::baselines::{Heuristic, QaVsModel};
use crate::features::{EncodedSplit, StreamBatch};
use crate::model::Mlcm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop once training accuracy (%) reaches this value.
    pub target_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-5,
            batch_size: 4,
            epochs: 20,
            seed: 0,
            target_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("train: lr must be finite and non-negative".into()));
        }
        if self.weight_decay < 0.0 || self.batch_size == 0 {
            return Err(Error::Config("train: weight_decay must be >= 0 and batch_size >= 1".into()));
        }
        Ok(())
    }
}

/// A model that can be fitted by [`train`].
pub trait Trainable: Predictor {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// Loss, gradients and scores for one item; dropout only with `rng`.
    fn loss_and_grad(&self, batch: StreamBatch, target: usize, rng: Option<&mut ChaCha8Rng>) -> (f64, Gradients, Vec<f64>);
    /// Deterministic loss (no dropout).
    fn loss(&self, batch: StreamBatch, target: usize) -> f64;
}

/// Anything that picks one candidate per item.
pub trait Predictor {
    fn predict(&self, batch: StreamBatch) -> usize;
}

impl Predictor for Mlcm {
    fn predict(&self, batch: StreamBatch) -> usize {
        Mlcm::predict(self, batch)
    }
}

impl Trainable for Mlcm {
    fn params(&self) -> &ParamStore {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
    fn loss_and_grad(&self, batch: StreamBatch, target: usize, rng: Option<&mut ChaCha8Rng>) -> (f64, Gradients, Vec<f64>) {
        Mlcm::loss_and_grad(self, batch, target, rng)
    }
    fn loss(&self, batch: StreamBatch, target: usize) -> f64 {
        Mlcm::loss(self, batch, target)
    }
}

impl Predictor for QaVsModel {
    fn predict(&self, batch: StreamBatch) -> usize {
        QaVsModel::predict(self, batch)
    }
}

impl Trainable for QaVsModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
    fn loss_and_grad(&self, batch: StreamBatch, target: usize, rng: Option<&mut ChaCha8Rng>) -> (f64, Gradients, Vec<f64>) {
        QaVsModel::loss_and_grad(self, batch, target, rng)
    }
    fn loss(&self, batch: StreamBatch, target: usize) -> f64 {
        QaVsModel::loss(self, batch, target)
    }
}

impl Predictor for Heuristic {
    fn predict(&self, batch: StreamBatch) -> usize {
        self.predict_encoded(batch.qa)
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.rows, t.cols)).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// One update. Parameters without a gradient are left alone.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Option<Tensor>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for id in 0..params.len() {
            let w = params.value_mut(id);
            let Some(g) = grads.get(id).and_then(Option::as_ref) else {
                continue;
            };
            let (m, v) = (&mut self.m[id].data, &mut self.v[id].data);
            for k in 0..w.data.len() {
                let gk = g.data[k] + self.weight_decay * w.data[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let update = self.lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + self.eps);
                w.data[k] -= update;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (1-based; 0 = initial parameters).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_acc.map_or(String::new(), |v| format!("{v:.4}"));
            out.push_str(&format!("{},{:.6},{:.4},{}\n", e.epoch, e.loss, e.train_acc, val));
        }
        out
    }

    pub fn final_train_acc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_acc)
    }
}

/// Percentage of items predicted correctly.
pub fn accuracy<P: Predictor + ?Sized>(model: &P, split: &EncodedSplit) -> f64 {
    if split.is_empty() {
        return 0.0;
    }
    let hits = (0..split.len())
        .filter(|&i| model.predict(split.batch(i)) == split.items[i].correct_idx)
        .count();
    100.0 * hits as f64 / split.len() as f64
}

/// Mini-batch Adam on the summed cross-entropy, averaged per batch.
///
/// After every epoch the model is scored on `val` (or on `train` when no
/// validation split is given); the best-scoring parameters are restored at
/// the end, with ties going to the lower mean training loss.
pub fn train<M: Trainable>(model: &mut M, train: &EncodedSplit, val: Option<&EncodedSplit>, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("train: training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(model.params(), cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, 0, model.params().clone());
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut acc: Vec<Option<Tensor>> = vec![None; model.params().len()];
            for &i in chunk {
                let (loss, grads, _) = model.loss_and_grad(train.batch(i), train.items[i].correct_idx, Some(&mut rng));
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, loss });
                }
                total += loss;
                for (slot, g) in acc.iter_mut().zip(grads.grads) {
                    match (slot.as_mut(), g) {
                        (Some(s), Some(g)) => s.add_assign(&g),
                        (None, Some(g)) => *slot = Some(g),
                        _ => {}
                    }
                }
            }
            for g in acc.iter_mut().flatten() {
                g.scale(1.0 / chunk.len() as f64);
            }
            opt.step(model.params_mut(), &acc);
        }
        let loss = total / train.len() as f64;
        let train_acc = accuracy(model, train);
        let val_acc = val.filter(|v| !v.is_empty()).map(|v| accuracy(model, v));
        log.epochs.push(EpochLog {
            epoch,
            loss,
            train_acc,
            val_acc,
        });
        let key = val_acc.unwrap_or(train_acc);
        if key > best.0 || (key == best.0 && loss < best.1) {
            best = (key, loss, epoch, model.params().clone());
        }
        if cfg.target_train_acc.is_some_and(|t| train_acc >= t) {
            log.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    if log.epochs.is_empty() {
        return Ok(log);
    }
    log.best_epoch = best.2;
    *model.params_mut() = best.3;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::fixture;
    use crate::model::ModelConfig;

    #[test]
    fn zero_lr_keeps_parameters() {
        let (mut m, enc) = fixture(ModelConfig::tiny());
        let before = m.params.clone();
        let cfg = TrainConfig {
            lr: 0.0,
            weight_decay: 0.0,
            epochs: 1,
            ..Default::default()
        };
        train(&mut m, &enc, None, &cfg).unwrap();
        assert_eq!(m.params, before);
    }

    #[test]
    fn single_item_is_memorized() {
        let (mut m, mut enc) = fixture(ModelConfig::tiny());
        enc.items.truncate(1);
        let cfg = TrainConfig {
            lr: 1e-2,
            weight_decay: 0.0,
            batch_size: 1,
            epochs: 200,
            ..Default::default()
        };
        let log = train(&mut m, &enc, None, &cfg).unwrap();
        let last = log.epochs.last().unwrap();
        let loss = m.loss(enc.batch(0), enc.items[0].correct_idx);
        assert!(loss <= 0.01, "loss {loss} (last logged {})", last.loss);
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = TrainConfig {
            lr: 1e-3,
            epochs: 2,
            ..Default::default()
        };
        let (mut a, enc) = fixture(ModelConfig::tiny());
        let (mut b, _) = fixture(ModelConfig::tiny());
        let la = train(&mut a, &enc, None, &cfg).unwrap();
        let lb = train(&mut b, &enc, None, &cfg).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn divergence_is_reported() {
        let (mut m, enc) = fixture(ModelConfig::tiny());
        let id = m.params.id("embed").unwrap();
        m.params.value_mut(id).data.iter_mut().for_each(|x| *x = f64::NAN);
        let err = train(&mut m, &enc, None, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1, .. }));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = ParamStore::default();
        p.add("w", Tensor::from_vec(1, 2, vec![1.0, -1.0]));
        let mut opt = Adam::new(&p, 0.1, 0.0);
        opt.step(&mut p, &[Some(Tensor::from_vec(1, 2, vec![3.0, -0.5]))]);
        // bias-corrected first step is lr * sign(g)
        let w = &p.value(0).data;
        assert!((w[0] - 0.9).abs() < 1e-6 && (w[1] + 0.9).abs() < 1e-6);
    }
}
