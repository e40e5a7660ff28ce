//! Semi-supervised out-of-domain pipeline, operating at the fusion level.
//!
//! Sub-system fine-tuning is modeled as a per-subsystem affine calibration
//! (the sub-systems themselves are external black boxes here). The pipeline
//! runs four steps: fit the main-track fuser, calibrate + fit on labeled
//! OOD data, pseudo-label the unlabeled rows, then recalibrate and refit
//! from scratch on the union of labeled and pseudo-labeled rows.

use crate::data::{DataError, MosDataset, ScoreMatrix};
use crate::fusers::{
    fit_on_scores, FuserError, FuserMethod, FuserModel, GbdtSettings, PredictInput,
    TrainConfig,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("subsystem names differ between {0} and the main-track table")]
    SubsystemMismatch(&'static str),
    #[error("column count mismatch: calibration has {expected}, matrix has {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("need at least {need} labeled OOD rows, got {got}")]
    InsufficientLabeledData { need: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid sample weight")]
    InvalidWeight,
    #[error(transparent)]
    Fuser(#[from] FuserError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One affine correction `x -> alpha * x + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePair {
    pub alpha: f64,
    pub beta: f64,
}

/// Per-subsystem affine corrections standing in for fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub subsystem_names: Vec<String>,
    pub pairs: Vec<AffinePair>,
}

impl CalibrationSet {
    pub fn identity(subsystem_names: Vec<String>) -> Self {
        let pairs = vec![AffinePair { alpha: 1.0, beta: 0.0 }; subsystem_names.len()];
        CalibrationSet { subsystem_names, pairs }
    }
}

/// Weighted least-squares fit of `truth` on each score column. A column with
/// zero variance degenerates to `alpha = 0, beta = mean(truth)`.
pub fn fit_calibration(
    scores: &ScoreMatrix,
    truth: &[f64],
    sample_weights: Option<&[f64]>,
) -> Result<CalibrationSet, PipelineError> {
    let n = scores.n_rows();
    if truth.len() != n {
        return Err(PipelineError::LengthMismatch { expected: n, got: truth.len() });
    }
    if let Some(w) = sample_weights {
        if w.len() != n {
            return Err(PipelineError::LengthMismatch { expected: n, got: w.len() });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(PipelineError::InvalidWeight);
        }
    }
    if n < 2 {
        return Err(PipelineError::InsufficientLabeledData { need: 2, got: n });
    }
    let k = scores.n_cols();
    let wsum: f64 = sample_weights.map_or(n as f64, |w| w.iter().sum());
    let y_mean = truth
        .iter()
        .enumerate()
        .map(|(i, t)| sample_weights.map_or(1.0, |w| w[i]) * t)
        .sum::<f64>()
        / wsum;
    let x = scores.values();
    let mut pairs = Vec::with_capacity(k);
    for j in 0..k {
        let mut x_mean = 0.0;
        for row in 0..n {
            let w = sample_weights.map_or(1.0, |ws| ws[row]);
            x_mean += w * x[row * k + j];
        }
        x_mean /= wsum;
        let mut cov = 0.0;
        let mut var = 0.0;
        for row in 0..n {
            let w = sample_weights.map_or(1.0, |ws| ws[row]);
            let dx = x[row * k + j] - x_mean;
            cov += w * dx * (truth[row] - y_mean);
            var += w * dx * dx;
        }
        if var / wsum < 1e-18 {
            pairs.push(AffinePair { alpha: 0.0, beta: y_mean });
        } else {
            let alpha = cov / var;
            pairs.push(AffinePair { alpha, beta: y_mean - alpha * x_mean });
        }
    }
    Ok(CalibrationSet { subsystem_names: scores.subsystem_names().to_vec(), pairs })
}

/// Column `j` mapped through its affine pair.
pub fn apply_calibration(
    cal: &CalibrationSet,
    scores: &ScoreMatrix,
) -> Result<ScoreMatrix, PipelineError> {
    let k = scores.n_cols();
    if cal.pairs.len() != k {
        return Err(PipelineError::ColumnMismatch { expected: cal.pairs.len(), got: k });
    }
    let mut values = scores.values().to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        let p = &cal.pairs[i % k];
        *v = p.alpha * *v + p.beta;
    }
    Ok(scores.with_values(values)?)
}

/// Pseudo-labels for every unlabeled utterance: calibrate, then predict.
pub fn pseudo_label(
    model: &FuserModel,
    cal: &CalibrationSet,
    unlabeled_scores: &ScoreMatrix,
) -> Result<Vec<(String, f64)>, PipelineError> {
    if unlabeled_scores.n_rows() == 0 {
        return Ok(Vec::new());
    }
    let calibrated = apply_calibration(cal, unlabeled_scores)?;
    let preds = model.predict(PredictInput::Scores(&calibrated), None)?;
    Ok(unlabeled_scores
        .utterance_ids()
        .iter()
        .cloned()
        .zip(preds)
        .collect())
}

/// Everything the pipeline produces.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub system_a: FuserModel,
    pub calibration_b: CalibrationSet,
    pub system_b: FuserModel,
    pub pseudo_labels: Vec<(String, f64)>,
    pub calibration_c: CalibrationSet,
    pub system_c: FuserModel,
}

/// Tuning knobs beyond the shared fit configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub method: FuserMethod,
    pub train: TrainConfig,
    pub gbdt: GbdtSettings,
    /// Relative weight of pseudo-labeled rows in step 4 (1.0 = equal).
    pub pseudo_weight: f64,
    /// Clamp every fitted system's predictions (and hence pseudo-labels)
    /// into the MOS range.
    pub clamp: bool,
}

impl PipelineConfig {
    pub fn new(method: FuserMethod, train: TrainConfig) -> Self {
        PipelineConfig {
            method,
            train,
            gbdt: GbdtSettings::default(),
            pseudo_weight: 1.0,
            clamp: false,
        }
    }
}

pub fn run_ood_pipeline(
    main_train: (&MosDataset, &ScoreMatrix),
    ood_labeled: (&MosDataset, &ScoreMatrix),
    ood_unlabeled: &ScoreMatrix,
    cfg: &PipelineConfig,
) -> Result<PipelineArtifacts, PipelineError> {
    let (main_ds, main_scores) = main_train;
    let (ood_ds, ood_scores) = ood_labeled;
    if ood_scores.subsystem_names() != main_scores.subsystem_names() {
        return Err(PipelineError::SubsystemMismatch("the labeled OOD table"));
    }
    if ood_unlabeled.subsystem_names() != main_scores.subsystem_names() {
        return Err(PipelineError::SubsystemMismatch("the unlabeled OOD table"));
    }
    if ood_ds.len() < 2 {
        return Err(PipelineError::InsufficientLabeledData { need: 2, got: ood_ds.len() });
    }
    if !(cfg.pseudo_weight.is_finite() && cfg.pseudo_weight >= 0.0) {
        return Err(PipelineError::InvalidWeight);
    }

    // step 1: main-track system
    let main_truth = main_ds.truths()?;
    let system_a = fit_on_scores(
        cfg.method,
        main_scores,
        &main_truth,
        &cfg.train,
        &cfg.gbdt,
        None,
    )?
    .with_clamp(cfg.clamp);

    // step 2: calibrate on labeled OOD data, refit the fuser on calibrated scores
    let ood_truth = ood_ds.truths()?;
    let calibration_b = fit_calibration(ood_scores, &ood_truth, None)?;
    let calibrated_labeled = apply_calibration(&calibration_b, ood_scores)?;
    let system_b = fit_on_scores(
        cfg.method,
        &calibrated_labeled,
        &ood_truth,
        &cfg.train,
        &cfg.gbdt,
        None,
    )?
    .with_clamp(cfg.clamp);

    // step 3: pseudo-label the unlabeled rows with system b
    let pseudo_labels = pseudo_label(&system_b, &calibration_b, ood_unlabeled)?;

    // step 4: refit calibration and fuser from scratch on the union
    let (union_scores, union_truth, union_weights) = if pseudo_labels.is_empty() {
        (ood_scores.clone(), ood_truth.clone(), None)
    } else {
        let union_scores = ood_scores.stack(ood_unlabeled)?;
        let mut union_truth = ood_truth.clone();
        union_truth.extend(pseudo_labels.iter().map(|(_, v)| *v));
        let weights = if (cfg.pseudo_weight - 1.0).abs() < 1e-15 {
            None
        } else {
            let mut w = vec![1.0; ood_truth.len()];
            w.extend(std::iter::repeat(cfg.pseudo_weight).take(pseudo_labels.len()));
            Some(w)
        };
        (union_scores, union_truth, weights)
    };
    let calibration_c = fit_calibration(&union_scores, &union_truth, union_weights.as_deref())?;
    let calibrated_union = apply_calibration(&calibration_c, &union_scores)?;
    let system_c = fit_on_scores(
        cfg.method,
        &calibrated_union,
        &union_truth,
        &cfg.train,
        &cfg.gbdt,
        union_weights.as_deref(),
    )?
    .with_clamp(cfg.clamp);

    Ok(PipelineArtifacts {
        system_a,
        calibration_b,
        system_b,
        pseudo_labels,
        calibration_c,
        system_c,
    })
}

/// Predicts MOS for an uncalibrated OOD score table with a pipeline system.
pub fn predict_with_calibration(
    model: &FuserModel,
    cal: &CalibrationSet,
    scores: &ScoreMatrix,
) -> Result<Vec<f64>, PipelineError> {
    let calibrated = apply_calibration(cal, scores)?;
    Ok(model.predict(PredictInput::Scores(&calibrated), None)?)
}

/// Plain-text manifest recording what a pipeline run did: per-step losses,
/// seeds, and the artifact file names, enough for audit and exact rerun.
pub fn manifest_text(
    artifacts: &PipelineArtifacts,
    cfg: &PipelineConfig,
    files: &[(&str, &str)],
) -> String {
    let mut out = String::new();
    out.push_str("manifest_version: 1\n");
    out.push_str(&format!("method: {}\n", cfg.method));
    out.push_str(&format!("loss: {}\n", cfg.train.loss.name()));
    out.push_str(&format!("seed: {}\n", cfg.train.seed));
    out.push_str(&format!("pseudo_weight: {}\n", cfg.pseudo_weight));
    out.push_str(&format!("pseudo_label_count: {}\n", artifacts.pseudo_labels.len()));
    let loss_line = |tag: &str, model: &FuserModel| {
        let fmt_opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.12}"));
        format!(
            "{tag}_train_loss: {}\n{tag}_val_loss: {}\n{tag}_epochs: {}\n",
            fmt_opt(model.train_meta.final_train_loss),
            fmt_opt(model.train_meta.final_val_loss),
            model.train_meta.epochs_run,
        )
    };
    out.push_str(&loss_line("step1_system_a", &artifacts.system_a));
    out.push_str(&loss_line("step2_system_b", &artifacts.system_b));
    out.push_str(&loss_line("step4_system_c", &artifacts.system_c));
    for (key, name) in files {
        out.push_str(&format!("file_{key}: {name}\n"));
    }
    out
}
