use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Classify;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 15 }
    }
}

/// Brute-force k-nearest-neighbours under Euclidean distance.
///
/// Neighbours are ranked by (distance, label index) and votes are tallied
/// with ties going to the smaller label index, so predictions do not depend
/// on the order of the stored points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Knn<F> {
    k: usize,
    n_classes: usize,
    points: Array2<F>,
    labels: Vec<usize>,
}

impl<F: Real> Knn<F> {
    pub fn fit(params: &KnnParams, x: ArrayView2<F>, y: &[usize], n_classes: usize) -> Self {
        Knn {
            k: params.k.min(y.len()),
            n_classes,
            points: x.to_owned(),
            labels: y.to_vec(),
        }
    }

    /// `(squared distance, label)` of the k nearest points, nearest first.
    pub fn neighbours(&self, row: &[F]) -> Vec<(F, usize)> {
        let mut dist: Vec<(F, usize)> = self
            .points
            .rows()
            .into_iter()
            .zip(&self.labels)
            .map(|(p, &label)| {
                let d = p
                    .iter()
                    .zip(row)
                    .fold(F::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                (d, label)
            })
            .collect();
        let cmp = |a: &(F, usize), b: &(F, usize)| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_by(cmp);
        dist
    }
}

impl<F: Real> Classify<F> for Knn<F> {
    fn predict_index(&self, row: &[F]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for (_, label) in self.neighbours(row) {
            votes[label] += 1;
        }
        super::argmax_lowest(&votes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_nn_recovers_training_labels() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0], [2.5, 2.0]];
        let y = [0, 1, 2, 1, 0];
        let m = Knn::fit(&KnnParams { k: 1 }, x.view(), &y, 3);
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(m.predict_index(row.as_slice().unwrap()), label);
        }
    }

    #[test]
    fn three_point_majority() {
        // query (0,0): distances² 1 (class 1), 4 (class 0), 9 (class 1), 16 (class 0)
        let x = array![[1.0], [-2.0], [3.0], [4.0]];
        let y = [1, 0, 1, 0];
        let m = Knn::fit(&KnnParams { k: 3 }, x.view(), &y, 2);
        let n = m.neighbours(&[0.0]);
        assert_eq!(n, vec![(1.0, 1), (4.0, 0), (9.0, 1)]);
        assert_eq!(m.predict_index(&[0.0]), 1);
    }

    #[test]
    fn distance_ties_prefer_smaller_label() {
        let x = array![[1.0], [-1.0]];
        let m = Knn::fit(&KnnParams { k: 1 }, x.view(), &[1, 0], 2);
        assert_eq!(m.predict_index(&[0.0]), 0);
        let m = Knn::fit(&KnnParams { k: 1 }, x.view(), &[0, 1], 2);
        assert_eq!(m.predict_index(&[0.0]), 0);
    }

    #[test]
    fn vote_ties_prefer_smaller_label() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let m = Knn::fit(&KnnParams { k: 4 }, x.view(), &[2, 1, 2, 1], 3);
        assert_eq!(m.predict_index(&[0.0]), 1);
    }

    #[test]
    fn k_larger_than_training_set() {
        let x = array![[0.0], [1.0], [5.0]];
        let m = Knn::fit(&KnnParams { k: 15 }, x.view(), &[0, 1, 1], 2);
        assert_eq!(m.predict_index(&[0.0]), 1);
    }
}
