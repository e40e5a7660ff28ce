//! Gradient-trained fusers: the two-layer score fuser (bias-free weight
//! layer followed by an affine map), a small sigmoid MLP, and the two-head
//! fuser that mixes subsystem scores with an auxiliary signal such as a
//! character error rate.
//!
//! The `*_loss` / `*_loss_grad` functions are public so gradient-correctness
//! checks can drive them directly with finite differences. They operate on
//! whatever coordinates they are given; training internally standardizes
//! inputs for conditioning and maps the fitted parameters back to raw
//! coordinates, so stored models are coordinate-free.

use super::train::{
    mean_loss, run_gd, split_validation, Loss, Standardizer, TrainConfig, TrainMeta,
};
use super::{FuserError, FuserMethod, FuserModel, FuserParams};
use crate::data::ScoreMatrix;
use crate::rng::Rng;

pub const MLP_HIDDEN: usize = 16;

fn check_fit_inputs(scores: &ScoreMatrix, truth: &[f64]) -> Result<(), FuserError> {
    if truth.len() != scores.n_rows() {
        return Err(FuserError::LengthMismatch {
            expected: scores.n_rows(),
            got: truth.len(),
        });
    }
    if truth.iter().any(|t| !t.is_finite()) {
        return Err(FuserError::NonFiniteInput);
    }
    if scores.n_rows() == 0 {
        return Err(FuserError::EmptyMatrix);
    }
    Ok(())
}

fn residual_grad(pred: f64, target: f64, weight: f64, wsum: f64, loss: Loss) -> f64 {
    let r = pred - target;
    match loss {
        Loss::L1 => {
            if r > 0.0 {
                weight / wsum
            } else if r < 0.0 {
                -weight / wsum
            } else {
                0.0
            }
        }
        Loss::L2 => 2.0 * weight * r / wsum,
    }
}

// ---------------------------------------------------------------------------
// proposed fuser: yhat = a * (w . x) + b, params = [w_0..w_{k-1}, a, b]
// ---------------------------------------------------------------------------

pub fn proposed_forward(params: &[f64], x: &[f64], n: usize, k: usize, out: &mut Vec<f64>) {
    debug_assert_eq!(params.len(), k + 2);
    let (w, rest) = params.split_at(k);
    let (a, b) = (rest[0], rest[1]);
    out.clear();
    for row in 0..n {
        let mut s = 0.0;
        for j in 0..k {
            s += w[j] * x[row * k + j];
        }
        out.push(a * s + b);
    }
}

pub fn proposed_loss(
    params: &[f64],
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    loss: Loss,
) -> f64 {
    let n = y.len();
    let k = params.len() - 2;
    let mut pred = Vec::with_capacity(n);
    proposed_forward(params, x, n, k, &mut pred);
    mean_loss(&pred, y, weights, loss)
}

pub fn proposed_loss_grad(
    params: &[f64],
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    loss: Loss,
    grad: &mut [f64],
) -> f64 {
    let n = y.len();
    let k = params.len() - 2;
    let (w, rest) = params.split_at(k);
    let (a, b) = (rest[0], rest[1]);
    let wsum: f64 = weights.map_or(n as f64, |ws| ws.iter().sum());
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let mut total = 0.0;
    for row in 0..n {
        let mut dot = 0.0;
        for j in 0..k {
            dot += w[j] * x[row * k + j];
        }
        let pred = a * dot + b;
        let sw = weights.map_or(1.0, |ws| ws[row]);
        let r = pred - y[row];
        total += sw
            * match loss {
                Loss::L1 => r.abs(),
                Loss::L2 => r * r,
            };
        let g = residual_grad(pred, y[row], sw, wsum, loss);
        for j in 0..k {
            grad[j] += g * a * x[row * k + j];
        }
        grad[k] += g * dot;
        grad[k + 1] += g;
    }
    total / wsum
}

/// Two-layer fuser of the fusion framework: a bias-free weighting of the
/// subsystem scores followed by `a * (.) + b` for the residual information.
pub fn fit_proposed_fuser(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
) -> Result<FuserModel, FuserError> {
    fit_proposed_fuser_weighted(scores, truth, cfg, None)
}

pub(crate) fn fit_proposed_fuser_weighted(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    cfg.validate()?;
    check_fit_inputs(scores, truth)?;
    let k = scores.n_cols();
    let names = scores.subsystem_names().to_vec();
    let make_model = |weights: Vec<f64>, scale: f64, offset: f64, meta: TrainMeta| FuserModel {
        method: FuserMethod::ProposedFuser,
        params: FuserParams::ProposedFuser { weights, scale, offset },
        subsystem_names: names.clone(),
        clamp: false,
        train_meta: meta,
    };

    // documented initialization: uniform weights, identity affine map, which
    // makes the untrained fuser coincide with voting
    if cfg.max_epochs == 0 {
        let init = vec![1.0 / k as f64; k];
        let mut pred = Vec::new();
        let mut params = init.clone();
        params.extend([1.0, 0.0]);
        proposed_forward(&params, scores.values(), scores.n_rows(), k, &mut pred);
        let train_loss = mean_loss(&pred, truth, sample_weights, cfg.loss);
        return Ok(make_model(
            init,
            1.0,
            0.0,
            TrainMeta {
                loss: cfg.loss,
                epochs_run: 0,
                final_train_loss: Some(train_loss),
                final_val_loss: None,
                seed: cfg.seed,
                converged: true,
            },
        ));
    }

    let split = split_validation(cfg, scores, truth, None, sample_weights)?;
    let std = Standardizer::fit(&split.train_x, split.n_train, k);
    let train_x = std.transform(&split.train_x, split.n_train);
    let val_x = std.transform(&split.val_x, split.n_val);

    // initialization mapped into standardized coordinates so the starting
    // function is still the plain column mean
    let mut init = vec![0.0; k + 2];
    for j in 0..k {
        init[j] = std.scales[j] / k as f64;
    }
    init[k] = 1.0;
    init[k + 1] = std.means.iter().sum::<f64>() / k as f64;

    let train_w = split.train_w.as_deref();
    let outcome = run_gd(
        init,
        |theta, grad| {
            proposed_loss_grad(theta, &train_x, &split.train_y, train_w, cfg.loss, grad)
        },
        |theta| proposed_loss(theta, &val_x, &split.val_y, None, cfg.loss),
        cfg,
    )?;

    // map back to raw coordinates: w_raw = w~ / s, b_raw folds in the means
    let theta = &outcome.params;
    let a = theta[k];
    let mut weights = vec![0.0; k];
    let mut mean_shift = 0.0;
    for j in 0..k {
        weights[j] = theta[j] / std.scales[j];
        mean_shift += theta[j] * std.means[j] / std.scales[j];
    }
    let offset = theta[k + 1] - a * mean_shift;

    Ok(make_model(
        weights,
        a,
        offset,
        TrainMeta {
            loss: cfg.loss,
            epochs_run: outcome.epochs_run,
            final_train_loss: Some(outcome.train_loss_at_best),
            final_val_loss: Some(outcome.best_val_loss),
            seed: cfg.seed,
            converged: outcome.converged,
        },
    ))
}

// ---------------------------------------------------------------------------
// MLP: one sigmoid hidden layer, linear output
// params = [w1 (h x k, row-major), b1 (h), w2 (h), b2]
// ---------------------------------------------------------------------------

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn mlp_param_len(k: usize, hidden: usize) -> usize {
    hidden * k + hidden + hidden + 1
}

pub fn mlp_forward(
    params: &[f64],
    x: &[f64],
    n: usize,
    k: usize,
    hidden: usize,
    out: &mut Vec<f64>,
) {
    debug_assert_eq!(params.len(), mlp_param_len(k, hidden));
    let (w1, rest) = params.split_at(hidden * k);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let b2 = b2[0];
    out.clear();
    for row in 0..n {
        let mut y = b2;
        for h in 0..hidden {
            let mut z = b1[h];
            for j in 0..k {
                z += w1[h * k + j] * x[row * k + j];
            }
            y += w2[h] * sigmoid(z);
        }
        out.push(y);
    }
}

pub fn mlp_loss(
    params: &[f64],
    x: &[f64],
    y: &[f64],
    k: usize,
    hidden: usize,
    weights: Option<&[f64]>,
    loss: Loss,
) -> f64 {
    let mut pred = Vec::with_capacity(y.len());
    mlp_forward(params, x, y.len(), k, hidden, &mut pred);
    mean_loss(&pred, y, weights, loss)
}

pub fn mlp_loss_grad(
    params: &[f64],
    x: &[f64],
    y: &[f64],
    k: usize,
    hidden: usize,
    weights: Option<&[f64]>,
    loss: Loss,
    grad: &mut [f64],
) -> f64 {
    let n = y.len();
    let (w1, rest) = params.split_at(hidden * k);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let b2 = b2[0];
    let wsum: f64 = weights.map_or(n as f64, |ws| ws.iter().sum());
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let (gw1, grest) = grad.split_at_mut(hidden * k);
    let (gb1, grest) = grest.split_at_mut(hidden);
    let (gw2, gb2) = grest.split_at_mut(hidden);
    let mut hcache = vec![0.0; hidden];
    let mut total = 0.0;
    for row in 0..n {
        let mut pred = b2;
        for h in 0..hidden {
            let mut z = b1[h];
            for j in 0..k {
                z += w1[h * k + j] * x[row * k + j];
            }
            let s = sigmoid(z);
            hcache[h] = s;
            pred += w2[h] * s;
        }
        let sw = weights.map_or(1.0, |ws| ws[row]);
        let r = pred - y[row];
        total += sw
            * match loss {
                Loss::L1 => r.abs(),
                Loss::L2 => r * r,
            };
        let g = residual_grad(pred, y[row], sw, wsum, loss);
        gb2[0] += g;
        for h in 0..hidden {
            let s = hcache[h];
            gw2[h] += g * s;
            let dz = g * w2[h] * s * (1.0 - s);
            gb1[h] += dz;
            for j in 0..k {
                gw1[h * k + j] += dz * x[row * k + j];
            }
        }
    }
    total / wsum
}

/// Seeded initialization: hidden weights uniform(-0.5, 0.5)/sqrt(k) drawn
/// row-major, hidden and output biases zero, output weights zero (so the
/// untrained network predicts a constant 0).
pub fn mlp_init(k: usize, hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut params = vec![0.0; mlp_param_len(k, hidden)];
    let scale = 1.0 / (k as f64).sqrt();
    for p in params.iter_mut().take(hidden * k) {
        *p = rng.range(-0.5, 0.5) * scale;
    }
    params
}

pub fn fit_mlp(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
) -> Result<FuserModel, FuserError> {
    fit_mlp_weighted(scores, truth, cfg, None)
}

pub(crate) fn fit_mlp_weighted(
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    cfg.validate()?;
    check_fit_inputs(scores, truth)?;
    let k = scores.n_cols();
    let hidden = MLP_HIDDEN;
    let names = scores.subsystem_names().to_vec();
    let pack = |theta: &[f64], meta: TrainMeta| {
        let (w1, rest) = theta.split_at(hidden * k);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(hidden);
        FuserModel {
            method: FuserMethod::Mlp,
            params: FuserParams::Mlp {
                hidden,
                input_weights: w1.to_vec(),
                input_biases: b1.to_vec(),
                output_weights: w2.to_vec(),
                output_bias: b2[0],
            },
            subsystem_names: names.clone(),
            clamp: false,
            train_meta: meta,
        }
    };

    if cfg.max_epochs == 0 {
        let init = mlp_init(k, hidden, cfg.seed);
        let train_loss = mlp_loss(
            &init,
            scores.values(),
            truth,
            k,
            hidden,
            sample_weights,
            cfg.loss,
        );
        return Ok(pack(
            &init,
            TrainMeta {
                loss: cfg.loss,
                epochs_run: 0,
                final_train_loss: Some(train_loss),
                final_val_loss: None,
                seed: cfg.seed,
                converged: true,
            },
        ));
    }

    let split = split_validation(cfg, scores, truth, None, sample_weights)?;
    let std = Standardizer::fit(&split.train_x, split.n_train, k);
    let train_x = std.transform(&split.train_x, split.n_train);
    let val_x = std.transform(&split.val_x, split.n_val);
    let init = mlp_init(k, hidden, cfg.seed);
    let train_w = split.train_w.as_deref();
    let outcome = run_gd(
        init,
        |theta, grad| {
            mlp_loss_grad(theta, &train_x, &split.train_y, k, hidden, train_w, cfg.loss, grad)
        },
        |theta| mlp_loss(theta, &val_x, &split.val_y, k, hidden, None, cfg.loss),
        cfg,
    )?;

    // fold the standardization back into the first layer
    let mut theta = outcome.params;
    for h in 0..hidden {
        let mut shift = 0.0;
        for j in 0..k {
            let idx = h * k + j;
            shift += theta[idx] * std.means[j] / std.scales[j];
            theta[idx] /= std.scales[j];
        }
        theta[hidden * k + h] -= shift;
    }

    Ok(pack(
        &theta,
        TrainMeta {
            loss: cfg.loss,
            epochs_run: outcome.epochs_run,
            final_train_loss: Some(outcome.train_loss_at_best),
            final_val_loss: Some(outcome.best_val_loss),
            seed: cfg.seed,
            converged: outcome.converged,
        },
    ))
}

// ---------------------------------------------------------------------------
// aux fuser: two linear heads, one over scores and one over the auxiliary
// signal, combined by a final linear layer.
// params = [u1 (k), d1, u2, d2, v1, v2, c]
// ---------------------------------------------------------------------------

pub fn aux_param_len(k: usize) -> usize {
    k + 6
}

pub fn aux_forward(
    params: &[f64],
    x: &[f64],
    aux: &[f64],
    n: usize,
    k: usize,
    out: &mut Vec<f64>,
) {
    debug_assert_eq!(params.len(), aux_param_len(k));
    let (u1, rest) = params.split_at(k);
    let (d1, u2, d2, v1, v2, c) = (rest[0], rest[1], rest[2], rest[3], rest[4], rest[5]);
    out.clear();
    for row in 0..n {
        let mut h1 = d1;
        for j in 0..k {
            h1 += u1[j] * x[row * k + j];
        }
        let h2 = u2 * aux[row] + d2;
        out.push(v1 * h1 + v2 * h2 + c);
    }
}

pub fn aux_loss(
    params: &[f64],
    x: &[f64],
    aux: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    loss: Loss,
) -> f64 {
    let k = params.len() - 6;
    let mut pred = Vec::with_capacity(y.len());
    aux_forward(params, x, aux, y.len(), k, &mut pred);
    mean_loss(&pred, y, weights, loss)
}

pub fn aux_loss_grad(
    params: &[f64],
    x: &[f64],
    aux: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    loss: Loss,
    grad: &mut [f64],
) -> f64 {
    let n = y.len();
    let k = params.len() - 6;
    let (u1, rest) = params.split_at(k);
    let (d1, u2, d2, v1, v2, c) = (rest[0], rest[1], rest[2], rest[3], rest[4], rest[5]);
    let wsum: f64 = weights.map_or(n as f64, |ws| ws.iter().sum());
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let mut total = 0.0;
    for row in 0..n {
        let mut h1 = d1;
        for j in 0..k {
            h1 += u1[j] * x[row * k + j];
        }
        let h2 = u2 * aux[row] + d2;
        let pred = v1 * h1 + v2 * h2 + c;
        let sw = weights.map_or(1.0, |ws| ws[row]);
        let r = pred - y[row];
        total += sw
            * match loss {
                Loss::L1 => r.abs(),
                Loss::L2 => r * r,
            };
        let g = residual_grad(pred, y[row], sw, wsum, loss);
        for j in 0..k {
            grad[j] += g * v1 * x[row * k + j];
        }
        grad[k] += g * v1; // d1
        grad[k + 1] += g * v2 * aux[row]; // u2
        grad[k + 2] += g * v2; // d2
        grad[k + 3] += g * h1; // v1
        grad[k + 4] += g * h2; // v2
        grad[k + 5] += g; // c
    }
    total / wsum
}

/// Score head plus auxiliary head, concatenated through a final linear
/// layer. When `aux_log1p` is set the auxiliary column is mapped through
/// `ln(1 + aux)` at fit time and again inside `predict`.
pub fn fit_aux_fuser(
    scores: &ScoreMatrix,
    aux: &[f64],
    truth: &[f64],
    cfg: &TrainConfig,
    aux_log1p: bool,
) -> Result<FuserModel, FuserError> {
    cfg.validate()?;
    check_fit_inputs(scores, truth)?;
    if aux.len() != scores.n_rows() {
        return Err(FuserError::LengthMismatch {
            expected: scores.n_rows(),
            got: aux.len(),
        });
    }
    if aux.iter().any(|a| !a.is_finite()) {
        return Err(FuserError::NonFiniteInput);
    }
    let aux_values: Vec<f64> = if aux_log1p {
        aux.iter().map(|a| a.ln_1p()).collect()
    } else {
        aux.to_vec()
    };
    let k = scores.n_cols();
    let names = scores.subsystem_names().to_vec();
    let pack = |theta: &[f64], meta: TrainMeta| FuserModel {
        method: FuserMethod::AuxFuser,
        params: FuserParams::AuxFuser {
            score_weights: theta[..k].to_vec(),
            score_bias: theta[k],
            aux_weight: theta[k + 1],
            aux_bias: theta[k + 2],
            score_head_weight: theta[k + 3],
            aux_head_weight: theta[k + 4],
            output_bias: theta[k + 5],
            aux_log1p,
        },
        subsystem_names: names.clone(),
        clamp: false,
        train_meta: meta,
    };

    // initialization: score head starts at the column mean, aux head present
    // but gated off by v2 = 0
    let mut raw_init = vec![0.0; aux_param_len(k)];
    for slot in raw_init.iter_mut().take(k) {
        *slot = 1.0 / k as f64;
    }
    raw_init[k + 1] = 1.0; // u2
    raw_init[k + 3] = 1.0; // v1

    if cfg.max_epochs == 0 {
        let train_loss =
            aux_loss(&raw_init, scores.values(), &aux_values, truth, None, cfg.loss);
        return Ok(pack(
            &raw_init,
            TrainMeta {
                loss: cfg.loss,
                epochs_run: 0,
                final_train_loss: Some(train_loss),
                final_val_loss: None,
                seed: cfg.seed,
                converged: true,
            },
        ));
    }

    let split = split_validation(cfg, scores, truth, Some(&aux_values), None)?;
    let std = Standardizer::fit(&split.train_x, split.n_train, k);
    let train_x = std.transform(&split.train_x, split.n_train);
    let val_x = std.transform(&split.val_x, split.n_val);
    let train_aux_raw = split.train_aux.as_ref().unwrap();
    let val_aux_raw = match (&cfg.validation, &split.val_aux) {
        (super::train::Validation::Holdout(_), Some(v)) if aux_log1p => {
            v.iter().map(|a| a.ln_1p()).collect()
        }
        (_, Some(v)) => v.clone(),
        (_, None) => return Err(FuserError::MissingAux),
    };
    let aux_std = Standardizer::fit(train_aux_raw, split.n_train, 1);
    let train_aux = aux_std.transform(train_aux_raw, split.n_train);
    let val_aux = aux_std.transform(&val_aux_raw, split.n_val);

    // map the raw init into standardized coordinates (same function)
    let mut init = vec![0.0; aux_param_len(k)];
    let mut shift = 0.0;
    for j in 0..k {
        init[j] = std.scales[j] / k as f64;
        shift += std.means[j] / k as f64;
    }
    init[k] = shift; // d1
    init[k + 1] = aux_std.scales[0]; // u2
    init[k + 2] = aux_std.means[0]; // d2
    init[k + 3] = 1.0; // v1

    let outcome = run_gd(
        init,
        |theta, grad| {
            aux_loss_grad(theta, &train_x, &train_aux, &split.train_y, None, cfg.loss, grad)
        },
        |theta| aux_loss(theta, &val_x, &val_aux, &split.val_y, None, cfg.loss),
        cfg,
    )?;

    // back to raw coordinates
    let mut theta = outcome.params;
    let mut shift = 0.0;
    for j in 0..k {
        shift += theta[j] * std.means[j] / std.scales[j];
        theta[j] /= std.scales[j];
    }
    theta[k] -= shift; // d1
    let u2 = theta[k + 1];
    theta[k + 1] = u2 / aux_std.scales[0];
    theta[k + 2] -= u2 * aux_std.means[0] / aux_std.scales[0];

    Ok(pack(
        &theta,
        TrainMeta {
            loss: cfg.loss,
            epochs_run: outcome.epochs_run,
            final_train_loss: Some(outcome.train_loss_at_best),
            final_val_loss: Some(outcome.best_val_loss),
            seed: cfg.seed,
            converged: outcome.converged,
        },
    ))
}
