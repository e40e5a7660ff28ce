//! Gradient-boosted regression trees with exact greedy splits, used as the
//! stand-in for the boosted-tree fusion method. Trees are grown level-wise
//! to a depth cap; each round fits the squared-loss residuals of the
//! running prediction and is added with a shrinkage factor.

use super::train::{mean_loss, Loss, TrainMeta};
use super::{FuserError, FuserMethod, FuserModel, FuserParams};
use crate::data::{FeatureMatrix, ScoreMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as an index arena, root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn max_depth(&self) -> usize {
        fn depth(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth(nodes, *left).max(depth(nodes, *right))
                }
            }
        }
        depth(&self.nodes, 0)
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for GbdtSettings {
    fn default() -> Self {
        GbdtSettings { n_trees: 200, max_depth: 3, shrinkage: 0.1, min_leaf: 5 }
    }
}

impl GbdtSettings {
    fn validate(&self, n_rows: usize) -> Result<(), FuserError> {
        if self.max_depth == 0 {
            return Err(FuserError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.shrinkage.is_finite() && self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(FuserError::InvalidConfig(format!(
                "shrinkage must be in (0, 1], got {}",
                self.shrinkage
            )));
        }
        if self.min_leaf == 0 || self.min_leaf > n_rows {
            return Err(FuserError::InvalidConfig(format!(
                "min_leaf {} outside [1, {n_rows}]",
                self.min_leaf
            )));
        }
        Ok(())
    }
}

/// Fitted boosted ensemble: `F(x) = base + shrinkage * sum(tree_m(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
    pub base_prediction: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbdtParams {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base_prediction;
        for tree in &self.trees {
            f += self.shrinkage * tree.eval(row);
        }
        f
    }

    /// Squared training loss after 0, 1, ..., n_trees boosting rounds.
    pub fn staged_train_losses(&self, x: &[f64], y: &[f64], k: usize) -> Vec<f64> {
        let n = y.len();
        let mut f = vec![self.base_prediction; n];
        let mut losses = Vec::with_capacity(self.trees.len() + 1);
        losses.push(mean_loss(&f, y, None, Loss::L2));
        for tree in &self.trees {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += self.shrinkage * tree.eval(&x[i * k..(i + 1) * k]);
            }
            losses.push(mean_loss(&f, y, None, Loss::L2));
        }
        losses
    }
}

struct TreeBuilder<'a> {
    x: &'a [f64],
    k: usize,
    target: &'a [f64],
    weights: Option<&'a [f64]>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    fn weighted_stats(&self, rows: &[usize]) -> (f64, f64, f64) {
        let mut wsum = 0.0;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for &r in rows {
            let w = self.weights.map_or(1.0, |ws| ws[r]);
            wsum += w;
            sum += w * self.target[r];
            sq += w * self.target[r] * self.target[r];
        }
        (wsum, sum, sq)
    }

    /// Best split over all features: exact greedy over sorted feature
    /// values, first feature / lowest threshold winning ties.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let (wsum, sum, sq) = self.weighted_stats(rows);
        let parent_sse = sq - sum * sum / wsum;
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, sse)
        let mut order: Vec<usize> = rows.to_vec();
        for feature in 0..self.k {
            order.sort_by(|&a, &b| {
                self.x[a * self.k + feature]
                    .partial_cmp(&self.x[b * self.k + feature])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut lw = 0.0;
            let mut ls = 0.0;
            let mut lq = 0.0;
            for (pos, &r) in order.iter().enumerate().take(order.len() - 1) {
                let w = self.weights.map_or(1.0, |ws| ws[r]);
                lw += w;
                ls += w * self.target[r];
                lq += w * self.target[r] * self.target[r];
                let here = self.x[r * self.k + feature];
                let next = self.x[order[pos + 1] * self.k + feature];
                if here == next {
                    continue; // can only cut between distinct values
                }
                let left_n = pos + 1;
                let right_n = order.len() - left_n;
                if left_n < self.min_leaf || right_n < self.min_leaf {
                    continue;
                }
                let rw = wsum - lw;
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let rs = sum - ls;
                let rq = sq - lq;
                let sse = (lq - ls * ls / lw) + (rq - rs * rs / rw);
                if sse < best.map_or(parent_sse, |b| b.2) - 1e-12 {
                    best = Some((feature, (here + next) / 2.0, sse));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let (wsum, sum, _) = self.weighted_stats(rows);
        let leaf_value = sum / wsum;
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            self.nodes.push(TreeNode::Leaf { value: leaf_value });
            return self.nodes.len() - 1;
        }
        match self.best_split(rows) {
            None => {
                self.nodes.push(TreeNode::Leaf { value: leaf_value });
                self.nodes.len() - 1
            }
            Some((feature, threshold, _)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| self.x[r * self.k + feature] <= threshold);
                let idx = self.nodes.len();
                self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
                let left = self.build(&left_rows, depth + 1);
                let right = self.build(&right_rows, depth + 1);
                if let TreeNode::Split { left: l, right: r, .. } = &mut self.nodes[idx] {
                    *l = left;
                    *r = right;
                }
                idx
            }
        }
    }
}

pub(crate) fn fit_gbdt_dense(
    x: &[f64],
    n: usize,
    k: usize,
    column_names: &[String],
    truth: &[f64],
    settings: &GbdtSettings,
    sample_weights: Option<&[f64]>,
) -> Result<FuserModel, FuserError> {
    if truth.len() != n {
        return Err(FuserError::LengthMismatch { expected: n, got: truth.len() });
    }
    if truth.iter().any(|t| !t.is_finite()) {
        return Err(FuserError::NonFiniteInput);
    }
    if n == 0 {
        return Err(FuserError::EmptyMatrix);
    }
    settings.validate(n)?;

    let wsum: f64 = sample_weights.map_or(n as f64, |ws| ws.iter().sum());
    let base_prediction = truth
        .iter()
        .enumerate()
        .map(|(i, t)| sample_weights.map_or(1.0, |ws| ws[i]) * t)
        .sum::<f64>()
        / wsum;

    let mut f = vec![base_prediction; n];
    let mut residuals = vec![0.0; n];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(settings.n_trees);
    for _ in 0..settings.n_trees {
        for i in 0..n {
            residuals[i] = truth[i] - f[i];
        }
        let mut builder = TreeBuilder {
            x,
            k,
            target: &residuals,
            weights: sample_weights,
            max_depth: settings.max_depth,
            min_leaf: settings.min_leaf,
            nodes: Vec::new(),
        };
        builder.build(&all_rows, 0);
        let tree = RegressionTree { nodes: builder.nodes };
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += settings.shrinkage * tree.eval(&x[i * k..(i + 1) * k]);
        }
        trees.push(tree);
    }
    let train_loss = mean_loss(&f, truth, sample_weights, Loss::L2);

    Ok(FuserModel {
        method: FuserMethod::Gbdt,
        params: FuserParams::Gbdt(GbdtParams {
            n_trees: settings.n_trees,
            max_depth: settings.max_depth,
            shrinkage: settings.shrinkage,
            min_leaf: settings.min_leaf,
            base_prediction,
            trees,
        }),
        subsystem_names: column_names.to_vec(),
        clamp: false,
        train_meta: TrainMeta {
            loss: Loss::L2,
            epochs_run: settings.n_trees,
            final_train_loss: Some(train_loss),
            final_val_loss: None,
            seed: 0,
            converged: true,
        },
    })
}

/// Boosted trees over subsystem scores.
pub fn fit_gbdt(
    scores: &ScoreMatrix,
    truth: &[f64],
    settings: &GbdtSettings,
) -> Result<FuserModel, FuserError> {
    fit_gbdt_dense(
        scores.values(),
        scores.n_rows(),
        scores.n_cols(),
        scores.subsystem_names(),
        truth,
        settings,
        None,
    )
}

/// Boosted trees over concatenated feature vectors.
pub fn fit_gbdt_on_features(
    features: &FeatureMatrix,
    truth: &[f64],
    settings: &GbdtSettings,
) -> Result<FuserModel, FuserError> {
    fit_gbdt_dense(
        features.values(),
        features.n_rows(),
        features.dim(),
        features.column_names(),
        truth,
        settings,
        None,
    )
}
