use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::Classify;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    /// Lower bound applied to every per-class feature variance.
    pub var_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_floor: 1e-9 }
    }
}

/// Gaussian naive Bayes with maximum-likelihood means and variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GaussianNb<F> {
    log_priors: Vec<F>,
    means: Vec<Vec<F>>,
    variances: Vec<Vec<F>>,
}

impl<F: Real> GaussianNb<F> {
    pub fn fit(params: &NbParams, x: ArrayView2<F>, y: &[usize], n_classes: usize) -> Self {
        let d = x.ncols();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![F::zero(); d]; n_classes];
        for (row, &c) in x.rows().into_iter().zip(y) {
            counts[c] += 1;
            for (m, &v) in means[c].iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            if n > 0 {
                let n = F::from_count(n);
                m.iter_mut().for_each(|v| *v = *v / n);
            }
        }
        let mut variances = vec![vec![F::zero(); d]; n_classes];
        for (row, &c) in x.rows().into_iter().zip(y) {
            for ((s, &v), &m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let floor = F::lit(params.var_floor);
        for (var, &n) in variances.iter_mut().zip(&counts) {
            let n = F::from_count(n.max(1));
            var.iter_mut().for_each(|v| *v = (*v / n).max(floor));
        }
        let total = F::from_count(y.len());
        let log_priors = counts
            .iter()
            .map(|&n| {
                if n == 0 {
                    F::neg_infinity()
                } else {
                    (F::from_count(n) / total).ln()
                }
            })
            .collect();
        GaussianNb {
            log_priors,
            means,
            variances,
        }
    }

    /// Unnormalised log posterior of each class.
    pub fn joint_log_likelihood(&self, row: &[F]) -> Vec<F> {
        let half = F::lit(0.5);
        let two_pi = F::lit(2.0 * std::f64::consts::PI);
        self.log_priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&prior, (means, vars))| {
                let ll: F = row
                    .iter()
                    .zip(means.iter().zip(vars))
                    .map(|(&x, (&m, &v))| -half * (two_pi * v).ln() - (x - m) * (x - m) / (v + v))
                    .sum();
                prior + ll
            })
            .collect()
    }
}

impl<F: Real> Classify<F> for GaussianNb<F> {
    fn predict_index(&self, row: &[F]) -> usize {
        super::argmax_lowest(&self.joint_log_likelihood(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn origin_query_picks_origin_class() {
        // class 0 around 0, class 1 around 10 in every coordinate
        let mut x = Array2::<f64>::zeros((4, 29));
        for j in 0..29 {
            x[[0, j]] = -1.0;
            x[[1, j]] = 1.0;
            x[[2, j]] = 9.0;
            x[[3, j]] = 11.0;
        }
        let m = GaussianNb::fit(&NbParams::default(), x.view(), &[0, 0, 1, 1], 2);
        assert_eq!(m.predict_index(&[0.0; 29]), 0);
        assert_eq!(m.predict_index(&[10.0; 29]), 1);
    }

    /// Closed-form posterior argmax for one feature, computed directly from
    /// the class samples.
    fn closed_form(samples: &[(f64, usize)], q: f64) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for c in 0..2 {
            let xs: Vec<f64> = samples.iter().filter(|s| s.1 == c).map(|s| s.0).collect();
            let n = xs.len() as f64;
            let mu = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            let prior = n / samples.len() as f64;
            let density = (-(q - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            let post = prior * density;
            if post > best.0 {
                best = (post, c);
            }
        }
        best.1
    }

    #[test]
    fn single_feature_matches_closed_form() {
        let samples = [(0.1, 0), (0.4, 0), (0.35, 0), (0.9, 1), (1.4, 1), (0.7, 1), (2.0, 1)];
        let x = Array2::from_shape_vec((7, 1), samples.iter().map(|s| s.0).collect()).unwrap();
        let y: Vec<usize> = samples.iter().map(|s| s.1).collect();
        let m = GaussianNb::fit(&NbParams::default(), x.view(), &y, 2);
        for i in 0..=60 {
            let q = -0.5 + i as f64 * 0.05;
            assert_eq!(m.predict_index(&[q]), closed_form(&samples, q), "q={q}");
        }
    }

    #[test]
    fn variance_floor_applies() {
        let x = array![[1.0], [1.0], [2.0], [3.0]];
        let m = GaussianNb::fit(&NbParams::default(), x.view(), &[0, 0, 1, 1], 2);
        assert_eq!(m.variances[0][0], 1e-9);
        assert_eq!(m.predict_index(&[1.0]), 0);
    }
}
