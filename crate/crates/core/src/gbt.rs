//! Minimal gradient-boosted regression trees: exact greedy CART splits on
//! squared error, stagewise fitting to residuals, and validation-based
//! early stopping.

use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Stop after this many rounds without validation improvement; `None`
    /// disables early stopping.
    pub early_stop_rounds: Option<usize>,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            learning_rate: 0.05,
            max_depth: 3,
            min_leaf: 20,
            early_stop_rounds: Some(20),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtModel {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
}

/// Per-round RMSE trace from a boosting fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtTrace {
    pub train_rmse: Vec<f64>,
    pub val_rmse: Vec<f64>,
    pub best_round: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn sse(sum: f64, sum_sq: f64, n: f64) -> f64 {
    sum_sq - sum * sum / n
}

/// Exact greedy search over all midpoint thresholds; ties resolve to the
/// lowest feature index, then the lowest threshold.
fn best_split(
    x: &Array2<f64>,
    residuals: &[f64],
    indices: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = indices.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total_sum: f64 = indices.iter().map(|&i| residuals[i]).sum();
    let total_sq: f64 = indices.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let parent_sse = sse(total_sum, total_sq, n as f64);

    let mut best: Option<SplitCandidate> = None;
    for feature in 0..x.ncols() {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| x[[a, feature]].partial_cmp(&x[[b, feature]]).unwrap());

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 0..n - 1 {
            let r = residuals[order[pos]];
            left_sum += r;
            left_sq += r * r;
            let (a, b) = (x[[order[pos], feature]], x[[order[pos + 1], feature]]);
            if a == b {
                continue; // no threshold strictly between equal values
            }
            let left_n = pos + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let gain = parent_sse
                - sse(left_sum, left_sq, left_n as f64)
                - sse(right_sum, right_sq, right_n as f64);
            let threshold = 0.5 * (a + b);
            let better = match &best {
                None => gain > 1e-12,
                Some(b_) => gain > b_.gain + 1e-12,
            };
            if better {
                best = Some(SplitCandidate { feature, threshold, gain });
            }
        }
    }
    best
}

fn grow(
    x: &Array2<f64>,
    residuals: &[f64],
    indices: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let mean = indices.iter().map(|&i| residuals[i]).sum::<f64>() / indices.len() as f64;
    if depth >= max_depth {
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    }
    let Some(split) = best_split(x, residuals, &indices, min_leaf) else {
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.into_iter().partition(|&i| x[[i, split.feature]] <= split.threshold);

    let node = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(x, residuals, left_idx, depth + 1, max_depth, min_leaf, nodes);
    let right = grow(x, residuals, right_idx, depth + 1, max_depth, min_leaf, nodes);
    if let TreeNode::Split { left: l, right: r, .. } = &mut nodes[node] {
        *l = left;
        *r = right;
    }
    node
}

/// Fit a single regression tree to residuals by exact greedy SSE splits.
pub fn fit_tree(
    x: &Array2<f64>,
    residuals: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree> {
    let n = x.nrows();
    if n != residuals.len() {
        return Err(Error::LengthMismatch { left: n, right: residuals.len() });
    }
    if min_leaf == 0 || n < 2 * min_leaf {
        return Err(Error::TooFewSamples { needed: 2 * min_leaf.max(1), got: n });
    }
    let mut nodes = Vec::new();
    grow(x, residuals, (0..n).collect(), 0, max_depth, min_leaf, &mut nodes);
    Ok(RegressionTree { nodes, max_depth, min_leaf })
}

/// Stagewise boosting on squared error with validation early stopping;
/// the returned model is truncated to the best validation round.
pub fn fit_gbt(
    x_train: &Array2<f64>,
    y_train: &[f64],
    x_val: &Array2<f64>,
    y_val: &[f64],
    params: &GbtParams,
) -> Result<(GbtModel, GbtTrace)> {
    if x_train.nrows() != y_train.len() {
        return Err(Error::LengthMismatch { left: x_train.nrows(), right: y_train.len() });
    }
    if x_val.nrows() != y_val.len() {
        return Err(Error::LengthMismatch { left: x_val.nrows(), right: y_val.len() });
    }
    if y_train.is_empty() {
        return Err(Error::EmptySplit { split: "train".into() });
    }

    let base_score = y_train.iter().sum::<f64>() / y_train.len() as f64;
    let mut train_pred = vec![base_score; y_train.len()];
    let mut val_pred = vec![base_score; y_val.len()];
    let mut trees: Vec<RegressionTree> = Vec::new();
    let mut trace = GbtTrace { train_rmse: Vec::new(), val_rmse: Vec::new(), best_round: 0 };

    let rmse = |pred: &[f64], y: &[f64]| -> f64 {
        if y.is_empty() {
            return f64::NAN;
        }
        (pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64).sqrt()
    };

    let mut best_val = rmse(&val_pred, y_val);
    let mut rounds_since_best = 0usize;
    for _ in 0..params.n_trees {
        let residuals: Vec<f64> =
            y_train.iter().zip(&train_pred).map(|(y, p)| y - p).collect();
        let tree = fit_tree(x_train, &residuals, params.max_depth, params.min_leaf)?;
        let stalled = tree.is_single_leaf()
            && matches!(tree.nodes[0], TreeNode::Leaf { value }
                if value.abs() <= 1e-12 * (1.0 + base_score.abs()));
        if stalled {
            break; // residuals already centered; nothing left to fit
        }
        for (i, p) in train_pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x_train.row(i).as_slice().unwrap());
        }
        for (i, p) in val_pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x_val.row(i).as_slice().unwrap());
        }
        trees.push(tree);
        trace.train_rmse.push(rmse(&train_pred, y_train));
        let v = rmse(&val_pred, y_val);
        trace.val_rmse.push(v);

        if v < best_val {
            best_val = v;
            trace.best_round = trees.len();
            rounds_since_best = 0;
        } else {
            rounds_since_best += 1;
            if let Some(stop) = params.early_stop_rounds {
                if rounds_since_best >= stop {
                    break;
                }
            }
        }
    }
    if params.early_stop_rounds.is_some() && !y_val.is_empty() {
        trees.truncate(trace.best_round);
    } else {
        trace.best_round = trees.len();
    }
    Ok((GbtModel { trees, learning_rate: params.learning_rate, base_score }, trace))
}

/// base_score + eta * sum of tree outputs.
pub fn predict_gbt(model: &GbtModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    for tree in &model.trees {
        for node in &tree.nodes {
            if let TreeNode::Split { feature, .. } = node {
                if *feature >= x.ncols() {
                    return Err(Error::ShapeMismatch {
                        expected: format!("> {feature} columns"),
                        got: format!("{} columns", x.ncols()),
                    });
                }
            }
        }
    }
    Ok((0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let row = row.as_slice().unwrap();
            model.base_score
                + model.learning_rate
                    * model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn step_data(n: usize) -> (Array2<f64>, Vec<f64>) {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 {
                i as f64 / n as f64
            } else {
                ((i * 31 + 7) % 17) as f64
            }
        });
        let y: Vec<f64> = (0..n).map(|i| if x[[i, 0]] <= 0.5 { -1.0 } else { 2.0 }).collect();
        (x, y)
    }

    #[test]
    fn constant_residuals_single_leaf() {
        let (x, _) = step_data(40);
        let tree = fit_tree(&x, &vec![3.25; 40], 3, 5).unwrap();
        assert!(tree.is_single_leaf());
        assert_eq!(tree.nodes[0], TreeNode::Leaf { value: 3.25 });
    }

    #[test]
    fn depth_zero_is_mean_leaf() {
        let (x, y) = step_data(40);
        let tree = fit_tree(&x, &y, 0, 5).unwrap();
        assert!(tree.is_single_leaf());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(tree.nodes[0], TreeNode::Leaf { value: mean });
    }

    #[test]
    fn step_split_matches_brute_force_oracle() {
        let (x, y) = step_data(60);
        let tree = fit_tree(&x, &y, 3, 5).unwrap();

        // Brute-force oracle over every (feature, midpoint) candidate.
        let n = y.len();
        let mut best = (f64::INFINITY, 0usize, 0.0_f64);
        for feature in 0..2 {
            let mut vals: Vec<f64> = (0..n).map(|i| x[[i, feature]]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
                for i in 0..n {
                    if x[[i, feature]] <= thr {
                        ls += y[i];
                        ln += 1;
                    } else {
                        rs += y[i];
                        rn += 1;
                    }
                }
                if ln < 5 || rn < 5 {
                    continue;
                }
                let mut err = 0.0;
                for i in 0..n {
                    let mean = if x[[i, feature]] <= thr { ls / ln as f64 } else { rs / rn as f64 };
                    err += (y[i] - mean) * (y[i] - mean);
                }
                if err < best.0 - 1e-12 {
                    best = (err, feature, thr);
                }
            }
        }
        match tree.nodes[0] {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!(feature, best.1);
                assert!((threshold - best.2).abs() < 1e-12);
                assert_eq!(tree.nodes[left], TreeNode::Leaf { value: -1.0 });
                assert_eq!(tree.nodes[right], TreeNode::Leaf { value: 2.0 });
            }
            _ => panic!("expected root split"),
        }
    }

    #[test]
    fn thresholds_are_strict_midpoints() {
        // The midpoint property holds per node, over the samples that
        // reached that node; replay the partition to verify it.
        fn check(tree: &RegressionTree, x: &Array2<f64>, node: usize, indices: Vec<usize>) {
            if let TreeNode::Split { feature, threshold, left, right } = &tree.nodes[node] {
                let mut vals: Vec<f64> = indices.iter().map(|&i| x[[i, *feature]]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let pos = vals.partition_point(|v| v < threshold);
                assert!(pos > 0 && pos < vals.len());
                assert!(vals[pos - 1] < *threshold && *threshold < vals[pos]);
                let mid = 0.5 * (vals[pos - 1] + vals[pos]);
                assert!((mid - threshold).abs() < 1e-12);

                let (li, ri): (Vec<usize>, Vec<usize>) =
                    indices.into_iter().partition(|&i| x[[i, *feature]] <= *threshold);
                check(tree, x, *left, li);
                check(tree, x, *right, ri);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((80, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..80)
            .map(|i| x[[i, 0]].sin() + 0.5 * x[[i, 1]] + rng.sample::<f64, _>(StandardNormal) * 0.1)
            .collect();
        let tree = fit_tree(&x, &y, 3, 5).unwrap();
        check(&tree, &x, 0, (0..80).collect());
    }

    #[test]
    fn too_few_samples_is_error() {
        let (x, y) = step_data(10);
        assert!(matches!(fit_tree(&x, &y, 3, 6), Err(Error::TooFewSamples { .. })));
    }

    fn boosting_fixture(seed: u64, n: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..n)
            .map(|i| {
                (2.0 * x[[i, 0]]).tanh() - 0.7 * x[[i, 1]] * x[[i, 1]]
                    + rng.sample::<f64, _>(StandardNormal) * 0.1
            })
            .collect();
        (x, y)
    }

    #[test]
    fn constant_target_gives_base_score_only() {
        let (x, _) = step_data(50);
        let y = vec![1.7; 50];
        let (model, _) = fit_gbt(&x, &y, &x, &y, &GbtParams::default()).unwrap();
        assert!(model.trees.is_empty());
        assert!((model.base_score - 1.7).abs() < 1e-12);
        let pred = predict_gbt(&model, &x).unwrap();
        assert!(pred.iter().all(|&p| p == model.base_score));
    }

    #[test]
    fn training_rmse_non_increasing() {
        let (x, y) = boosting_fixture(9, 300);
        let (xv, yv) = boosting_fixture(10, 80);
        let params = GbtParams { n_trees: 60, ..GbtParams::default() };
        let (_, trace) = fit_gbt(&x, &y, &xv, &yv, &params).unwrap();
        for w in trace.train_rmse.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "train RMSE rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn interpolation_limit_zeroes_training_residuals() {
        let (x, y) = boosting_fixture(11, 60);
        let params = GbtParams {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 12,
            min_leaf: 1,
            early_stop_rounds: None,
        };
        let (model, _) = fit_gbt(&x, &y, &x, &y, &params).unwrap();
        let pred = predict_gbt(&model, &x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn early_stopping_keeps_best_round() {
        let (x, y) = boosting_fixture(12, 300);
        let (xv, yv) = boosting_fixture(13, 60);
        let params = GbtParams { n_trees: 150, early_stop_rounds: Some(10), ..GbtParams::default() };
        let (model, trace) = fit_gbt(&x, &y, &xv, &yv, &params).unwrap();
        assert_eq!(model.trees.len(), trace.best_round);
        let best = trace.val_rmse[trace.best_round - 1];
        for v in &trace.val_rmse {
            assert!(best <= v + 1e-15);
        }
    }

    #[test]
    fn predict_hand_built_tree() {
        let tree = RegressionTree {
            nodes: vec![
                TreeNode::Split { feature: 1, threshold: 0.0, left: 1, right: 2 },
                TreeNode::Leaf { value: -3.0 },
                TreeNode::Split { feature: 0, threshold: 1.0, left: 3, right: 4 },
                TreeNode::Leaf { value: 5.0 },
                TreeNode::Leaf { value: 7.0 },
            ],
            max_depth: 2,
            min_leaf: 1,
        };
        let model = GbtModel { trees: vec![tree], learning_rate: 0.5, base_score: 1.0 };
        let x = ndarray::array![
            [0.0, -1.0], // left leaf: 1 + 0.5 * -3 = -0.5
            [0.5, 1.0],  // right-left: 1 + 0.5 * 5 = 3.5
            [2.0, 1.0],  // right-right: 1 + 0.5 * 7 = 4.5
        ];
        assert_eq!(predict_gbt(&model, &x).unwrap(), vec![-0.5, 3.5, 4.5]);

        let empty = GbtModel { trees: vec![], learning_rate: 0.5, base_score: 1.0 };
        assert_eq!(predict_gbt(&empty, &x).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn row_order_invariance() {
        let (x, y) = boosting_fixture(14, 120);
        let (model, _) = fit_gbt(&x, &y, &x, &y, &GbtParams::default()).unwrap();
        let pred = predict_gbt(&model, &x).unwrap();
        let perm: Vec<usize> = (0..120).rev().collect();
        let xp = Array2::from_shape_fn((120, 3), |(i, j)| x[[perm[i], j]]);
        let pp = predict_gbt(&model, &xp).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(pp[i], pred[src]);
        }
    }

    #[test]
    fn unused_feature_transform_invariance() {
        // Feature 1 carries no signal; a strictly monotone transform of it
        // must not change the fitted predictions.
        let (x, y) = step_data(80);
        let params = GbtParams { n_trees: 5, min_leaf: 5, ..GbtParams::default() };
        let (m1, _) = fit_gbt(&x, &y, &x, &y, &params).unwrap();
        let p1 = predict_gbt(&m1, &x).unwrap();

        let mut xt = x.clone();
        for i in 0..80 {
            xt[[i, 1]] = (xt[[i, 1]] * 0.3).exp();
        }
        let (m2, _) = fit_gbt(&xt, &y, &xt, &y, &params).unwrap();
        let p2 = predict_gbt(&m2, &xt).unwrap();
        assert_eq!(p1, p2);
    }
}
