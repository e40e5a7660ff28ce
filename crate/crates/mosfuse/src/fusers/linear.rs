//! The linear end of the fuser zoo: plain voting, simplex-constrained
//! weighted voting, ordinary least squares, and ridge regression over
//! concatenated feature vectors.

use super::train::{mean_loss, Loss, TrainConfig, TrainMeta};
use super::{FuserError, FuserMethod, FuserModel, FuserParams};
use crate::data::{FeatureMatrix, ScoreMatrix};
use crate::solve::{solve_spd, solve_spd_with_ridge_fallback};

pub(crate) const OLS_RIDGE_FALLBACK: f64 = 1e-8;

fn check_labels(scores: &ScoreMatrix, truth: &[f64]) -> Result<(), FuserError> {
    if truth.len() != scores.n_rows() {
        return Err(FuserError::LengthMismatch {
            expected: scores.n_rows(),
            got: truth.len(),
        });
    }
    if truth.iter().any(|t| !t.is_finite()) {
        return Err(FuserError::NonFiniteInput);
    }
    Ok(())
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<(), FuserError> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(FuserError::LengthMismatch { expected: n, got: w.len() });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(FuserError::NonFiniteInput);
        }
    }
    Ok(())
}

/// Parameterless row-mean fuser.
pub fn fit_voting(scores: &ScoreMatrix) -> Result<FuserModel, FuserError> {
    if scores.n_rows() == 0 {
        return Err(FuserError::EmptyMatrix);
    }
    Ok(FuserModel {
        method: FuserMethod::Voting,
        params: FuserParams::Voting,
        subsystem_names: scores.subsystem_names().to_vec(),
        clamp: false,
        train_meta: TrainMeta {
            loss: Loss::L2,
            epochs_run: 0,
            final_train_loss: None,
            final_val_loss: None,
            seed: 0,
            converged: true,
        },
    })
}

/// Euclidean projection onto the probability simplex (Duchi et al. 2008).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // all mass on the largest coordinate (degenerate input)
        let arg = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let mut out = vec![0.0; v.len()];
        out[arg] = 1.0;
        return out;
    }
    v.iter().map(|&u| (u - theta).max(0.0)).collect()
}

fn on_simplex(w: &[f64]) -> bool {
    w.iter().all(|&x| x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// Simplex-constrained weights minimizing squared loss, by projected
/// gradient descent from the uniform initialization. Steps that do not
/// strictly decrease the loss are rejected and retried with half the step,
/// so the fitted loss can never exceed plain voting's.
pub fn fit_weighted_voting(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
) -> Result<FuserModel, FuserError> {
    fit_weighted_voting_weighted(scores, truth, cfg, None)
}

pub(crate) fn fit_weighted_voting_weighted(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    cfg.validate()?;
    check_labels(scores, truth)?;
    check_weights(sample_weights, truth.len())?;
    if scores.n_rows() == 0 {
        return Err(FuserError::EmptyMatrix);
    }
    let n = scores.n_rows();
    let k = scores.n_cols();
    let x = scores.values();
    let predict = |w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for row in 0..n {
            let mut s = 0.0;
            for j in 0..k {
                s += w[j] * x[row * k + j];
            }
            out.push(s);
        }
    };
    let objective = |w: &[f64], scratch: &mut Vec<f64>| {
        predict(w, scratch);
        mean_loss(scratch, truth, sample_weights, Loss::L2)
    };

    let mut w = vec![1.0 / k as f64; k];
    let mut scratch = Vec::with_capacity(n);
    let mut loss = objective(&w, &mut scratch);
    let mut step = cfg.learning_rate.max(1e-12);
    let mut converged = cfg.max_epochs == 0;
    let mut epochs_run = 0usize;
    let wsum: f64 = sample_weights.map_or(n as f64, |ws| ws.iter().sum());

    let mut grad = vec![0.0; k];
    for _ in 0..cfg.max_epochs {
        epochs_run += 1;
        predict(&w, &mut scratch);
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for row in 0..n {
            let sw = sample_weights.map_or(1.0, |ws| ws[row]);
            let r = 2.0 * sw * (scratch[row] - truth[row]) / wsum;
            for j in 0..k {
                grad[j] += r * x[row * k + j];
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(FuserError::NonFiniteGradient);
        }
        let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
        let projected = project_to_simplex(&trial);
        debug_assert!(on_simplex(&projected));
        let trial_loss = objective(&projected, &mut scratch);
        if trial_loss < loss {
            w = projected;
            loss = trial_loss;
            step *= 2.0;
        } else {
            step *= 0.5;
            if step < 1e-14 {
                converged = true;
                break;
            }
        }
    }
    debug_assert!(on_simplex(&w));

    Ok(FuserModel {
        method: FuserMethod::WeightedVoting,
        params: FuserParams::WeightedVoting { weights: w },
        subsystem_names: scores.subsystem_names().to_vec(),
        clamp: false,
        train_meta: TrainMeta {
            loss: Loss::L2,
            epochs_run,
            final_train_loss: Some(loss),
            final_val_loss: None,
            seed: cfg.seed,
            converged,
        },
    })
}

/// Ordinary least squares over subsystem scores via normal equations, with
/// a lambda = 1e-8 ridge retry when the Gram matrix is singular.
pub fn fit_linear_regression(
    scores: &ScoreMatrix,
    truth: &[f64],
) -> Result<FuserModel, FuserError> {
    fit_linear_regression_weighted(scores, truth, None)
}

pub(crate) fn fit_linear_regression_weighted(
    scores: &ScoreMatrix,
    truth: &[f64],
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    check_labels(scores, truth)?;
    check_weights(sample_weights, truth.len())?;
    let n = scores.n_rows();
    let k = scores.n_cols();
    if n < k + 1 {
        return Err(FuserError::InsufficientData { need: k + 1, got: n });
    }
    let x = scores.values();
    // augmented design [x | 1]: Gram is (k+1) x (k+1), intercept last
    let d = k + 1;
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut row_buf = vec![0.0; d];
    for row in 0..n {
        let w = sample_weights.map_or(1.0, |ws| ws[row]);
        row_buf[..k].copy_from_slice(&x[row * k..(row + 1) * k]);
        row_buf[k] = 1.0;
        for i in 0..d {
            let wi = w * row_buf[i];
            for j in 0..=i {
                gram[i * d + j] += wi * row_buf[j];
            }
            rhs[i] += wi * truth[row];
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            gram[i * d + j] = gram[j * d + i];
        }
    }
    let solution = solve_spd_with_ridge_fallback(&gram, &rhs, d, OLS_RIDGE_FALLBACK)
        .ok_or(FuserError::SingularSystem)?;
    let (coefficients, intercept) = (solution[..k].to_vec(), solution[k]);

    let mut pred = vec![0.0; n];
    for row in 0..n {
        let mut s = intercept;
        for j in 0..k {
            s += coefficients[j] * x[row * k + j];
        }
        pred[row] = s;
    }
    let train_loss = mean_loss(&pred, truth, sample_weights, Loss::L2);

    Ok(FuserModel {
        method: FuserMethod::LinearRegression,
        params: FuserParams::LinearRegression { coefficients, intercept },
        subsystem_names: scores.subsystem_names().to_vec(),
        clamp: false,
        train_meta: TrainMeta::closed_form(Loss::L2, train_loss),
    })
}

/// Ridge regression over concatenated features, fit on centered data:
/// `(F'F + lambda I) beta = F'(y - ybar)`, intercept recovered from the
/// column means.
pub fn fit_feature_regression(
    features: &FeatureMatrix,
    truth: &[f64],
    lambda: f64,
) -> Result<FuserModel, FuserError> {
    if truth.len() != features.n_rows() {
        return Err(FuserError::LengthMismatch {
            expected: features.n_rows(),
            got: truth.len(),
        });
    }
    if truth.iter().any(|t| !t.is_finite()) {
        return Err(FuserError::NonFiniteInput);
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FuserError::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = features.n_rows();
    let d = features.dim();
    if n == 0 {
        return Err(FuserError::EmptyMatrix);
    }
    if lambda == 0.0 && d >= n {
        return Err(FuserError::InvalidConfig(
            "lambda must be > 0 when dim >= n_rows".into(),
        ));
    }
    let x = features.values();
    let mut col_means = vec![0.0; d];
    for row in 0..n {
        for j in 0..d {
            col_means[j] += x[row * d + j];
        }
    }
    for m in col_means.iter_mut() {
        *m /= n as f64;
    }
    let y_mean = truth.iter().sum::<f64>() / n as f64;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for row in 0..n {
        for j in 0..d {
            centered[j] = x[row * d + j] - col_means[j];
        }
        let yc = truth[row] - y_mean;
        for i in 0..d {
            for j in 0..=i {
                gram[i * d + j] += centered[i] * centered[j];
            }
            rhs[i] += centered[i] * yc;
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            gram[i * d + j] = gram[j * d + i];
        }
        gram[i * d + i] += lambda;
    }
    let coefficients = solve_spd(&gram, &rhs, d).ok_or(FuserError::SingularSystem)?;
    let intercept =
        y_mean - coefficients.iter().zip(&col_means).map(|(b, m)| b * m).sum::<f64>();

    let mut pred = vec![0.0; n];
    for row in 0..n {
        let mut s = intercept;
        for j in 0..d {
            s += coefficients[j] * x[row * d + j];
        }
        pred[row] = s;
    }
    let train_loss = mean_loss(&pred, truth, None, Loss::L2);

    Ok(FuserModel {
        method: FuserMethod::FeatureRegression,
        params: FuserParams::FeatureRegression { coefficients, intercept, lambda },
        subsystem_names: features.column_names().to_vec(),
        clamp: false,
        train_meta: TrainMeta::closed_form(Loss::L2, train_loss),
    })
}
