use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::Classify;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

/// Bagged Gini trees with per-split feature subsampling. Tree `t` draws
/// its bootstrap sample and feature subsets from seed `seed + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RandomForest<F> {
    n_classes: usize,
    trees: Vec<DecisionTree<F>>,
}

impl<F: Real> RandomForest<F> {
    pub fn fit(params: &ForestParams, x: ArrayView2<F>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let d = x.ncols();
        let m = params
            .max_features
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
            .min(d);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(m),
        };
        let n = y.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                DecisionTree::fit(&tree_params, x, y, bootstrap, n_classes, &mut rng)
            })
            .collect();
        RandomForest { n_classes, trees }
    }

    pub fn from_trees(trees: Vec<DecisionTree<F>>, n_classes: usize) -> Self {
        RandomForest { n_classes, trees }
    }

    pub fn trees(&self) -> &[DecisionTree<F>] {
        &self.trees
    }
}

impl<F: Real> Classify<F> for RandomForest<F> {
    /// Majority vote; ties go to the smaller class index.
    fn predict_index(&self, row: &[F]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_index(row)] += 1;
        }
        super::argmax_lowest(&votes)
    }
}
