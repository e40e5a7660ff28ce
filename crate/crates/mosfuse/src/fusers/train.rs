//! Shared training machinery for the gradient-trained fusers: loss choice,
//! validation-split handling, input standardization, and the full-batch
//! gradient-descent loop with patience-based early stopping.

use super::FuserError;
use crate::data::ScoreMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    L1,
    L2,
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::L1 => "l1",
            Loss::L2 => "l2",
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(Loss::L1),
            "l2" => Ok(Loss::L2),
            other => Err(format!("unknown loss {other:?} (expected l1 or l2)")),
        }
    }
}

/// Explicit validation data for early stopping.
#[derive(Debug, Clone)]
pub struct HoldoutSet {
    pub scores: ScoreMatrix,
    pub truth: Vec<f64>,
    /// Required when the model being trained consumes an auxiliary column.
    pub aux: Option<Vec<f64>>,
}

/// How the validation set for early stopping is obtained.
#[derive(Debug, Clone)]
pub enum Validation {
    /// Carve the last `fraction` of rows out of the provided data; the model
    /// trains on the remaining head. A fraction yielding zero rows falls
    /// back to monitoring the training loss itself.
    LastFraction(f64),
    /// Train on all provided rows, monitor loss on this set.
    Holdout(HoldoutSet),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub loss: Loss,
    pub learning_rate: f64,
    /// Gradient epochs (or PGD iterations). Zero means "return the
    /// documented initialization untouched".
    pub max_epochs: usize,
    /// Early stop after this many epochs without a new best validation loss.
    pub patience: usize,
    pub seed: u64,
    pub validation: Validation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: Loss::L1,
            learning_rate: 1e-3,
            max_epochs: 10_000,
            patience: 20,
            seed: 0,
            validation: Validation::LastFraction(0.2),
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<(), FuserError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(FuserError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(FuserError::InvalidConfig("patience must be >= 1".into()));
        }
        if self.max_epochs > 0 && self.patience > self.max_epochs {
            return Err(FuserError::InvalidConfig(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if let Validation::LastFraction(f) = self.validation {
            if !(0.0..1.0).contains(&f) {
                return Err(FuserError::InvalidConfig(format!(
                    "validation fraction must be in [0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Fitting provenance carried by every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub loss: Loss,
    pub epochs_run: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub seed: u64,
    /// False when the epoch budget ran out before early stopping triggered.
    pub converged: bool,
}

impl TrainMeta {
    pub(crate) fn closed_form(loss: Loss, train_loss: f64) -> Self {
        TrainMeta {
            loss,
            epochs_run: 0,
            final_train_loss: Some(train_loss),
            final_val_loss: None,
            seed: 0,
            converged: true,
        }
    }
}

/// Train/validation row split in dense row-major form.
pub(crate) struct SplitSets {
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub train_aux: Option<Vec<f64>>,
    pub train_w: Option<Vec<f64>>,
    pub n_train: usize,
    pub val_x: Vec<f64>,
    pub val_y: Vec<f64>,
    pub val_aux: Option<Vec<f64>>,
    pub n_val: usize,
}

pub(crate) fn split_validation(
    cfg: &TrainConfig,
    scores: &ScoreMatrix,
    truth: &[f64],
    aux: Option<&[f64]>,
    weights: Option<&[f64]>,
) -> Result<SplitSets, FuserError> {
    let n = scores.n_rows();
    let k = scores.n_cols();
    match &cfg.validation {
        Validation::LastFraction(f) => {
            let n_val = (n as f64 * f).floor() as usize;
            if n_val >= n {
                return Err(FuserError::InsufficientData { need: n_val + 1, got: n });
            }
            let n_train = n - n_val;
            let train_x = scores.values()[..n_train * k].to_vec();
            let train_y = truth[..n_train].to_vec();
            let train_aux = aux.map(|a| a[..n_train].to_vec());
            let train_w = weights.map(|w| w[..n_train].to_vec());
            let (val_x, val_y, val_aux, n_val) = if n_val == 0 {
                (train_x.clone(), train_y.clone(), train_aux.clone(), n_train)
            } else {
                (
                    scores.values()[n_train * k..].to_vec(),
                    truth[n_train..].to_vec(),
                    aux.map(|a| a[n_train..].to_vec()),
                    n_val,
                )
            };
            Ok(SplitSets {
                train_x,
                train_y,
                train_aux,
                train_w,
                n_train,
                val_x,
                val_y,
                val_aux,
                n_val,
            })
        }
        Validation::Holdout(h) => {
            if h.scores.subsystem_names() != scores.subsystem_names() {
                return Err(FuserError::ColumnMismatch {
                    expected: scores.subsystem_names().to_vec(),
                    got: h.scores.subsystem_names().to_vec(),
                });
            }
            if h.truth.len() != h.scores.n_rows() {
                return Err(FuserError::LengthMismatch {
                    expected: h.scores.n_rows(),
                    got: h.truth.len(),
                });
            }
            if aux.is_some() != h.aux.is_some() {
                return Err(FuserError::InvalidConfig(
                    "holdout validation set must carry aux values iff the fit does".into(),
                ));
            }
            Ok(SplitSets {
                train_x: scores.values().to_vec(),
                train_y: truth.to_vec(),
                train_aux: aux.map(|a| a.to_vec()),
                train_w: weights.map(|w| w.to_vec()),
                n_train: n,
                val_x: h.scores.values().to_vec(),
                val_y: h.truth.clone(),
                val_aux: h.aux.clone(),
                n_val: h.scores.n_rows(),
            })
        }
    }
}

/// Per-column affine rescaling to zero mean, unit scale. Used purely as a
/// preconditioner for gradient descent; fitted parameters are mapped back to
/// raw coordinates afterwards, so the stored model is coordinate-free.
pub(crate) struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[f64], n: usize, k: usize) -> Self {
        let mut means = vec![0.0; k];
        let mut scales = vec![1.0; k];
        if n == 0 {
            return Standardizer { means, scales };
        }
        for row in 0..n {
            for j in 0..k {
                means[j] += x[row * k + j];
            }
        }
        for m in means.iter_mut() {
            *m /= n as f64;
        }
        for row in 0..n {
            for j in 0..k {
                let d = x[row * k + j] - means[j];
                scales[j] += d * d; // reuse as accumulator
            }
        }
        for s in scales.iter_mut() {
            let var = (*s - 1.0) / n as f64;
            *s = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, x: &[f64], n: usize) -> Vec<f64> {
        let k = self.means.len();
        let mut out = vec![0.0; n * k];
        for row in 0..n {
            for j in 0..k {
                out[row * k + j] = (x[row * k + j] - self.means[j]) / self.scales[j];
            }
        }
        out
    }
}

pub(crate) struct GdOutcome {
    pub params: Vec<f64>,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub train_loss_at_best: f64,
    pub converged: bool,
}

/// Full-batch gradient descent with early stopping: after each epoch the
/// validation loss is evaluated; the parameters with the lowest validation
/// loss seen so far are the result, and training stops once `patience`
/// epochs pass without improvement.
pub(crate) fn run_gd<F, V>(
    init: Vec<f64>,
    mut loss_grad: F,
    mut val_loss: V,
    cfg: &TrainConfig,
) -> Result<GdOutcome, FuserError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    V: FnMut(&[f64]) -> f64,
{
    let dim = init.len();
    let mut theta = init;
    let mut grad = vec![0.0; dim];
    let mut best = theta.clone();
    let mut best_val = val_loss(&theta);
    let mut since_best = 0usize;
    let mut epochs_run = 0usize;
    let mut converged = false;
    for _ in 0..cfg.max_epochs {
        let train = loss_grad(&theta, &mut grad);
        if !train.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(FuserError::NonFiniteGradient);
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
        }
        epochs_run += 1;
        let v = val_loss(&theta);
        if !v.is_finite() {
            return Err(FuserError::NonFiniteGradient);
        }
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&theta);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                converged = true;
                break;
            }
        }
    }
    let train_at_best = loss_grad(&best, &mut grad);
    Ok(GdOutcome {
        params: best,
        epochs_run,
        best_val_loss: best_val,
        train_loss_at_best: train_at_best,
        converged,
    })
}

/// Mean loss over rows given raw per-row predictions; weighted when weights
/// are supplied (normalized by the weight sum).
pub(crate) fn mean_loss(pred: &[f64], y: &[f64], weights: Option<&[f64]>, loss: Loss) -> f64 {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for i in 0..y.len() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        let r = pred[i] - y[i];
        acc += w * match loss {
            Loss::L1 => r.abs(),
            Loss::L2 => r * r,
        };
        wsum += w;
    }
    acc / wsum
}
