//! The fusion model zoo: every method behind one fitted-model type with a
//! common predict surface. Fitting is deterministic given the seed; fitted
//! models are immutable and prediction is pure.

mod gbdt;
mod linear;
mod neural;
mod train;

pub use gbdt::{
    fit_gbdt, fit_gbdt_on_features, GbdtParams, GbdtSettings, RegressionTree, TreeNode,
};
pub use linear::{
    fit_feature_regression, fit_linear_regression, fit_voting, fit_weighted_voting,
    project_to_simplex,
};
pub use neural::{
    aux_forward, aux_loss, aux_loss_grad, aux_param_len, fit_aux_fuser, fit_mlp,
    fit_proposed_fuser, mlp_forward, mlp_init, mlp_loss, mlp_loss_grad, mlp_param_len,
    proposed_forward, proposed_loss, proposed_loss_grad, MLP_HIDDEN,
};
pub use train::{HoldoutSet, Loss, TrainConfig, TrainMeta, Validation};

use crate::data::{DataError, FeatureMatrix, ScoreMatrix, MOS_MAX, MOS_MIN};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuserError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite gradient or loss during training")]
    NonFiniteGradient,
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("not enough rows: need {need}, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("singular system: normal equations unsolvable even with ridge fallback")]
    SingularSystem,
    #[error("column mismatch: model expects {expected:?}, got {got:?}")]
    ColumnMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("this model requires an auxiliary input vector")]
    MissingAux,
    #[error("auxiliary input supplied to a model that does not use one")]
    UnexpectedAux,
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("non-finite validation loss among candidates")]
    NonFiniteLoss,
    #[error("method {method} cannot be fit from {context}")]
    UnsupportedMethod { method: &'static str, context: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuserMethod {
    Voting,
    WeightedVoting,
    LinearRegression,
    ProposedFuser,
    Mlp,
    Gbdt,
    FeatureRegression,
    AuxFuser,
}

impl FuserMethod {
    pub const ALL: [FuserMethod; 8] = [
        FuserMethod::Voting,
        FuserMethod::WeightedVoting,
        FuserMethod::LinearRegression,
        FuserMethod::ProposedFuser,
        FuserMethod::Mlp,
        FuserMethod::Gbdt,
        FuserMethod::FeatureRegression,
        FuserMethod::AuxFuser,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FuserMethod::Voting => "voting",
            FuserMethod::WeightedVoting => "weighted_voting",
            FuserMethod::LinearRegression => "linear_regression",
            FuserMethod::ProposedFuser => "proposed_fuser",
            FuserMethod::Mlp => "mlp",
            FuserMethod::Gbdt => "gbdt",
            FuserMethod::FeatureRegression => "feature_regression",
            FuserMethod::AuxFuser => "aux_fuser",
        }
    }
}

impl std::fmt::Display for FuserMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FuserMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voting" => Ok(FuserMethod::Voting),
            "weighted_voting" => Ok(FuserMethod::WeightedVoting),
            // "ols" is the everyday name for the normal-equation fit
            "linear_regression" | "ols" => Ok(FuserMethod::LinearRegression),
            "proposed_fuser" => Ok(FuserMethod::ProposedFuser),
            "mlp" => Ok(FuserMethod::Mlp),
            "gbdt" => Ok(FuserMethod::Gbdt),
            "feature_regression" => Ok(FuserMethod::FeatureRegression),
            "aux_fuser" => Ok(FuserMethod::AuxFuser),
            other => Err(format!("unknown fuser method {other:?}")),
        }
    }
}

/// Method-specific parameter block of a fitted fuser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FuserParams {
    Voting,
    WeightedVoting {
        weights: Vec<f64>,
    },
    LinearRegression {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    /// `yhat = scale * (weights . x) + offset`
    ProposedFuser {
        weights: Vec<f64>,
        scale: f64,
        offset: f64,
    },
    Mlp {
        hidden: usize,
        input_weights: Vec<f64>,
        input_biases: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    },
    Gbdt(GbdtParams),
    FeatureRegression {
        coefficients: Vec<f64>,
        intercept: f64,
        lambda: f64,
    },
    /// Two heads combined linearly:
    /// `yhat = v1 (u1 . x + d1) + v2 (u2 aux + d2) + c`
    AuxFuser {
        score_weights: Vec<f64>,
        score_bias: f64,
        aux_weight: f64,
        aux_bias: f64,
        score_head_weight: f64,
        aux_head_weight: f64,
        output_bias: f64,
        aux_log1p: bool,
    },
}

/// Either kind of input table a fuser can consume.
#[derive(Debug, Clone, Copy)]
pub enum PredictInput<'a> {
    Scores(&'a ScoreMatrix),
    Features(&'a FeatureMatrix),
}

impl<'a> PredictInput<'a> {
    fn dims(&self) -> (usize, usize) {
        match self {
            PredictInput::Scores(m) => (m.n_rows(), m.n_cols()),
            PredictInput::Features(m) => (m.n_rows(), m.dim()),
        }
    }

    fn values(&self) -> &'a [f64] {
        match self {
            PredictInput::Scores(m) => m.values(),
            PredictInput::Features(m) => m.values(),
        }
    }

    fn column_names(&self) -> &'a [String] {
        match self {
            PredictInput::Scores(m) => m.subsystem_names(),
            PredictInput::Features(m) => m.column_names(),
        }
    }
}

/// A fitted fusion model.
#[derive(Debug, Clone, PartialEq)]
pub struct FuserModel {
    pub method: FuserMethod,
    pub params: FuserParams,
    /// Input column names fixed at fit time; predict rejects anything else.
    pub subsystem_names: Vec<String>,
    /// Clamp predictions into the MOS range `[1, 5]`.
    pub clamp: bool,
    pub train_meta: TrainMeta,
}

impl FuserModel {
    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    /// One prediction per input row, clamped to `[1, 5]` iff `self.clamp`.
    pub fn predict(
        &self,
        input: PredictInput<'_>,
        aux: Option<&[f64]>,
    ) -> Result<Vec<f64>, FuserError> {
        let (n, k) = input.dims();
        if input.column_names() != self.subsystem_names {
            return Err(FuserError::ColumnMismatch {
                expected: self.subsystem_names.clone(),
                got: input.column_names().to_vec(),
            });
        }
        let needs_aux = matches!(self.method, FuserMethod::AuxFuser);
        let aux = match (needs_aux, aux) {
            (true, Some(a)) => {
                if a.len() != n {
                    return Err(FuserError::LengthMismatch { expected: n, got: a.len() });
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(FuserError::NonFiniteInput);
                }
                Some(a)
            }
            (true, None) => return Err(FuserError::MissingAux),
            (false, Some(_)) => return Err(FuserError::UnexpectedAux),
            (false, None) => None,
        };

        let x = input.values();
        let mut out = Vec::with_capacity(n);
        match &self.params {
            FuserParams::Voting => {
                for row in 0..n {
                    let mut s = 0.0;
                    for j in 0..k {
                        s += x[row * k + j];
                    }
                    out.push(s / k as f64);
                }
            }
            FuserParams::WeightedVoting { weights } => {
                for row in 0..n {
                    let mut s = 0.0;
                    for j in 0..k {
                        s += weights[j] * x[row * k + j];
                    }
                    out.push(s);
                }
            }
            FuserParams::LinearRegression { coefficients, intercept }
            | FuserParams::FeatureRegression { coefficients, intercept, .. } => {
                for row in 0..n {
                    let mut s = *intercept;
                    for j in 0..k {
                        s += coefficients[j] * x[row * k + j];
                    }
                    out.push(s);
                }
            }
            FuserParams::ProposedFuser { weights, scale, offset } => {
                let mut params = weights.clone();
                params.extend([*scale, *offset]);
                neural::proposed_forward(&params, x, n, k, &mut out);
            }
            FuserParams::Mlp {
                hidden,
                input_weights,
                input_biases,
                output_weights,
                output_bias,
            } => {
                let mut params =
                    Vec::with_capacity(neural::mlp_param_len(k, *hidden));
                params.extend_from_slice(input_weights);
                params.extend_from_slice(input_biases);
                params.extend_from_slice(output_weights);
                params.push(*output_bias);
                neural::mlp_forward(&params, x, n, k, *hidden, &mut out);
            }
            FuserParams::Gbdt(p) => {
                for row in 0..n {
                    out.push(p.predict_row(&x[row * k..(row + 1) * k]));
                }
            }
            FuserParams::AuxFuser {
                score_weights,
                score_bias,
                aux_weight,
                aux_bias,
                score_head_weight,
                aux_head_weight,
                output_bias,
                aux_log1p,
            } => {
                let aux = aux.unwrap();
                let aux_values: Vec<f64> = if *aux_log1p {
                    aux.iter().map(|a| a.ln_1p()).collect()
                } else {
                    aux.to_vec()
                };
                let mut params = score_weights.clone();
                params.extend([
                    *score_bias,
                    *aux_weight,
                    *aux_bias,
                    *score_head_weight,
                    *aux_head_weight,
                    *output_bias,
                ]);
                neural::aux_forward(&params, x, &aux_values, n, k, &mut out);
            }
        }
        if self.clamp {
            for v in out.iter_mut() {
                *v = v.clamp(MOS_MIN, MOS_MAX);
            }
        }
        Ok(out)
    }
}

/// Candidate with the lowest validation loss; ties go to the earliest.
pub fn select_best(
    candidates: Vec<(FuserModel, f64)>,
) -> Result<FuserModel, FuserError> {
    if candidates.is_empty() {
        return Err(FuserError::EmptyCandidates);
    }
    if candidates.iter().any(|(_, l)| !l.is_finite()) {
        return Err(FuserError::NonFiniteLoss);
    }
    let mut best_idx = 0;
    for (i, (_, loss)) in candidates.iter().enumerate().skip(1) {
        if *loss < candidates[best_idx].1 {
            best_idx = i;
        }
    }
    Ok(candidates.into_iter().nth(best_idx).unwrap().0)
}

/// Method-generic fit over aligned subsystem scores; used by the pipeline
/// and the CLI. Feature- and aux-based methods need their extra inputs and
/// are rejected here.
pub fn fit_on_scores(
    method: FuserMethod,
    scores: &ScoreMatrix,
    truth: &[f64],
    cfg: &TrainConfig,
    gbdt: &GbdtSettings,
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    match method {
        FuserMethod::Voting => fit_voting(scores),
        FuserMethod::WeightedVoting => {
            linear::fit_weighted_voting_weighted(scores, truth, cfg, sample_weights)
        }
        FuserMethod::LinearRegression => {
            linear::fit_linear_regression_weighted(scores, truth, sample_weights)
        }
        FuserMethod::ProposedFuser => {
            neural::fit_proposed_fuser_weighted(scores, truth, cfg, sample_weights)
        }
        FuserMethod::Mlp => neural::fit_mlp_weighted(scores, truth, cfg, sample_weights),
        FuserMethod::Gbdt => gbdt::fit_gbdt_dense(
            scores.values(),
            scores.n_rows(),
            scores.n_cols(),
            scores.subsystem_names(),
            truth,
            gbdt,
            sample_weights,
        ),
        FuserMethod::FeatureRegression => Err(FuserError::UnsupportedMethod {
            method: "feature_regression",
            context: "subsystem scores (needs a feature matrix)",
        }),
        FuserMethod::AuxFuser => Err(FuserError::UnsupportedMethod {
            method: "aux_fuser",
            context: "subsystem scores alone (needs an aux vector)",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_matrix() -> ScoreMatrix {
        ScoreMatrix::new(
            vec!["u0".into(), "u1".into()],
            vec!["a".into(), "b".into()],
            vec![1.0, 5.0, 4.0, 4.5],
        )
        .unwrap()
    }

    #[test]
    fn voting_predicts_row_mean() {
        let m = demo_matrix();
        let model = fit_voting(&m).unwrap();
        let pred = model.predict(PredictInput::Scores(&m), None).unwrap();
        assert_eq!(pred, vec![3.0, 4.25]);
    }

    #[test]
    fn clamp_bounds_predictions() {
        let m = demo_matrix();
        // linear model with huge intercept pushes raw output past 5
        let model = FuserModel {
            method: FuserMethod::LinearRegression,
            params: FuserParams::LinearRegression {
                coefficients: vec![1.0, 0.0],
                intercept: 4.7,
            },
            subsystem_names: m.subsystem_names().to_vec(),
            clamp: true,
            train_meta: TrainMeta::closed_form(Loss::L2, 0.0),
        };
        let pred = model.predict(PredictInput::Scores(&m), None).unwrap();
        assert_eq!(pred, vec![5.0, 5.0]);
        let unclamped = model.clone().with_clamp(false);
        let raw = unclamped.predict(PredictInput::Scores(&m), None).unwrap();
        assert!(raw[0] > 5.0);
    }

    #[test]
    fn predict_rejects_column_mismatch() {
        let m = demo_matrix();
        let model = fit_voting(&m).unwrap();
        let other = ScoreMatrix::new(
            vec!["u0".into()],
            vec!["a".into(), "c".into()],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            model.predict(PredictInput::Scores(&other), None).unwrap_err(),
            FuserError::ColumnMismatch { .. }
        ));
    }

    #[test]
    fn aux_requirements_enforced() {
        let m = demo_matrix();
        let voting = fit_voting(&m).unwrap();
        assert!(matches!(
            voting.predict(PredictInput::Scores(&m), Some(&[0.1, 0.2])).unwrap_err(),
            FuserError::UnexpectedAux
        ));
        let cfg = TrainConfig { max_epochs: 0, ..TrainConfig::default() };
        let aux_model = fit_aux_fuser(&m, &[0.1, 0.2], &[3.0, 4.0], &cfg, false).unwrap();
        assert!(matches!(
            aux_model.predict(PredictInput::Scores(&m), None).unwrap_err(),
            FuserError::MissingAux
        ));
        assert!(aux_model.predict(PredictInput::Scores(&m), Some(&[0.1, 0.2])).is_ok());
    }

    #[test]
    fn select_best_picks_argmin_with_first_tie_win() {
        let m = demo_matrix();
        let mk = |tag: f64| {
            let mut model = fit_voting(&m).unwrap();
            model.train_meta.seed = tag as u64;
            model
        };
        let best =
            select_best(vec![(mk(0.0), 0.3), (mk(1.0), 0.1), (mk(2.0), 0.2)]).unwrap();
        assert_eq!(best.train_meta.seed, 1);
        let best = select_best(vec![(mk(0.0), 0.1), (mk(1.0), 0.1)]).unwrap();
        assert_eq!(best.train_meta.seed, 0);
        let single = select_best(vec![(mk(7.0), 0.5)]).unwrap();
        assert_eq!(single.train_meta.seed, 7);
        assert!(matches!(select_best(vec![]).unwrap_err(), FuserError::EmptyCandidates));
    }

    #[test]
    fn method_names_round_trip() {
        for m in FuserMethod::ALL {
            assert_eq!(m.name().parse::<FuserMethod>().unwrap(), m);
        }
        assert_eq!("ols".parse::<FuserMethod>().unwrap(), FuserMethod::LinearRegression);
        assert!("bogus".parse::<FuserMethod>().is_err());
    }
}
