use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{presort, RegressionParams, RegressionTree};
use super::Classify;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

/// Softmax gradient boosting: each round fits one second-order regression
/// tree per class to the cross-entropy gradients of that class's log-odds
/// score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GradientBoost<F> {
    learning_rate: F,
    base_scores: Vec<F>,
    /// `rounds[r][k]` is the class-`k` tree of round `r`.
    rounds: Vec<Vec<RegressionTree<F>>>,
}

pub(crate) fn softmax<F: Real>(scores: &[F]) -> Vec<F> {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let exp: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: F = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy of the true classes under softmax(scores).
fn mean_loss<F: Real>(scores: &[Vec<F>], y: &[usize]) -> F {
    let total: F = scores
        .iter()
        .zip(y)
        .map(|(s, &c)| {
            let max = s.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = max + s.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
            lse - s[c]
        })
        .sum();
    total / F::from_count(y.len())
}

impl<F: Real> GradientBoost<F> {
    pub fn fit(params: &BoostParams, x: ArrayView2<F>, y: &[usize], n_classes: usize) -> Self {
        Self::fit_with_history(params, x, y, n_classes).0
    }

    /// Also returns the training loss before the first round and after
    /// every kept round. Boosting stops early once a round would raise the
    /// training loss.
    pub fn fit_with_history(params: &BoostParams, x: ArrayView2<F>, y: &[usize], n_classes: usize) -> (Self, Vec<F>) {
        let n = y.len();
        let mut counts = vec![0usize; n_classes];
        for &c in y {
            counts[c] += 1;
        }
        // log prior, with empty classes pinned far below the rest
        let base_scores: Vec<F> = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    F::lit(-30.0)
                } else {
                    (F::from_count(c) / F::from_count(n)).ln()
                }
            })
            .collect();
        let order = presort(x);
        let tree_params = RegressionParams {
            max_depth: params.max_depth,
            lambda: F::lit(params.lambda),
            min_child_weight: F::lit(params.min_child_weight),
        };
        let lr = F::lit(params.learning_rate);
        let mut scores = vec![base_scores.clone(); n];
        let mut history = vec![mean_loss(&scores, y)];
        let mut rounds = Vec::with_capacity(params.rounds);
        let two = F::lit(2.0);
        let tiny = F::lit(1e-16);
        for _ in 0..params.rounds {
            let probs: Vec<Vec<F>> = scores.iter().map(|s| softmax(s)).collect();
            let trees: Vec<RegressionTree<F>> = (0..n_classes)
                .into_par_iter()
                .map(|k| {
                    let (grad, hess): (Vec<F>, Vec<F>) = probs
                        .iter()
                        .zip(y)
                        .map(|(p, &c)| {
                            let target = if c == k { F::one() } else { F::zero() };
                            (p[k] - target, (two * p[k] * (F::one() - p[k])).max(tiny))
                        })
                        .unzip();
                    RegressionTree::fit(&tree_params, x, &order, &grad, &hess)
                })
                .collect();
            let mut next = scores.clone();
            for (i, s) in next.iter_mut().enumerate() {
                let row = x.row(i);
                let row = row.as_slice().expect("standard layout");
                for (sk, t) in s.iter_mut().zip(&trees) {
                    *sk = *sk + lr * t.predict(row);
                }
            }
            let loss = mean_loss(&next, y);
            if loss > history[history.len() - 1] {
                // converged: the round only adds rounding noise
                break;
            }
            scores = next;
            history.push(loss);
            rounds.push(trees);
        }
        (
            GradientBoost {
                learning_rate: lr,
                base_scores,
                rounds,
            },
            history,
        )
    }

    pub fn decision_scores(&self, row: &[F]) -> Vec<F> {
        let mut s = self.base_scores.clone();
        for trees in &self.rounds {
            for (sk, t) in s.iter_mut().zip(trees) {
                *sk = *sk + self.learning_rate * t.predict(row);
            }
        }
        s
    }

    pub fn predict_proba(&self, row: &[F]) -> Vec<F> {
        softmax(&self.decision_scores(row))
    }
}

impl<F: Real> Classify<F> for GradientBoost<F> {
    fn predict_index(&self, row: &[F]) -> usize {
        super::argmax_lowest(&self.decision_scores(row))
    }
}
