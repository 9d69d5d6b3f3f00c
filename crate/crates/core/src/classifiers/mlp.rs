use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Classify;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 64,
            batch_size: 32,
            learning_rate: 0.01,
            epochs: 200,
        }
    }
}

/// One hidden ReLU layer followed by a softmax output, trained with
/// mini-batch SGD on mean cross-entropy. Inputs are standardised with the
/// training mean and standard deviation before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Mlp<F> {
    pub shift: Array1<F>,
    pub scale: Array1<F>,
    /// inputs × hidden
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    /// hidden × classes
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

fn xavier<F: Real, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || F::lit(rng.gen_range(-limit..=limit)))
}

fn softmax_rows<F: Real>(z: &mut Array2<F>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: F = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl<F: Real> Mlp<F> {
    pub fn init(n_inputs: usize, hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp {
            shift: Array1::zeros(n_inputs),
            scale: Array1::ones(n_inputs),
            w1: xavier(&mut rng, n_inputs, hidden),
            b1: Array1::zeros(hidden),
            w2: xavier(&mut rng, hidden, n_classes),
            b2: Array1::zeros(n_classes),
        }
    }

    pub fn fit(params: &MlpParams, x: ArrayView2<F>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut net = Mlp::init(x.ncols(), params.hidden, n_classes, seed);
        if x.nrows() > 0 {
            net.shift = x.mean_axis(Axis(0)).expect("non-empty");
            net.scale = x
                .std_axis(Axis(0), F::zero())
                .mapv(|s| if s > F::lit(1e-12) { s } else { F::one() });
        }
        let x = net.standardise(x);
        // independent stream for batch shuffling
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_5EED);
        let lr = F::lit(params.learning_rate);
        let mut order: Vec<usize> = (0..y.len()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
                let (_, g) = net.loss_and_gradients(xb.view(), &yb);
                net.w1.scaled_add(-lr, &g.w1);
                net.b1.scaled_add(-lr, &g.b1);
                net.w2.scaled_add(-lr, &g.w2);
                net.b2.scaled_add(-lr, &g.b2);
            }
        }
        net
    }

    fn standardise(&self, x: ArrayView2<F>) -> Array2<F> {
        (&x - &self.shift) / &self.scale
    }

    fn hidden_pre(&self, x: ArrayView2<F>) -> Array2<F> {
        x.dot(&self.w1) + &self.b1
    }

    /// Class probabilities, one row per input row.
    pub fn predict_proba(&self, x: ArrayView2<F>) -> Array2<F> {
        let a1 = self.hidden_pre(self.standardise(x).view()).mapv(|v| v.max(F::zero()));
        let mut z2 = a1.dot(&self.w2) + &self.b2;
        softmax_rows(&mut z2);
        z2
    }

    /// Mean cross-entropy over an already standardised batch and its
    /// gradient with respect to every weight and bias.
    pub fn loss_and_gradients(&self, x: ArrayView2<F>, y: &[usize]) -> (F, Gradients<F>) {
        let n = F::from_count(y.len());
        let z1 = self.hidden_pre(x);
        let a1 = z1.mapv(|v| v.max(F::zero()));
        let mut p = a1.dot(&self.w2) + &self.b2;
        softmax_rows(&mut p);
        let loss = y
            .iter()
            .enumerate()
            .map(|(i, &c)| -p[[i, c]].max(F::min_positive_value()).ln())
            .sum::<F>()
            / n;
        // dL/dz2 = (p - onehot) / n
        let mut dz2 = p;
        for (i, &c) in y.iter().enumerate() {
            dz2[[i, c]] = dz2[[i, c]] - F::one();
        }
        dz2.mapv_inplace(|v| v / n);
        let w2 = a1.t().dot(&dz2);
        let b2 = dz2.sum_axis(Axis(0));
        let mut dz1 = dz2.dot(&self.w2.t());
        dz1.zip_mut_with(&z1, |d, &z| {
            if z <= F::zero() {
                *d = F::zero();
            }
        });
        let w1 = x.t().dot(&dz1);
        let b1 = dz1.sum_axis(Axis(0));
        (loss, Gradients { w1, b1, w2, b2 })
    }

    pub fn loss(&self, x: ArrayView2<F>, y: &[usize]) -> F {
        self.loss_and_gradients(x, y).0
    }
}

impl<F: Real> Classify<F> for Mlp<F> {
    fn predict_index(&self, row: &[F]) -> usize {
        let x = ArrayView2::from_shape((1, row.len()), row).expect("row shape");
        let z1 = self.hidden_pre(self.standardise(x).view()).mapv(|v| v.max(F::zero()));
        let z2 = z1.dot(&self.w2) + &self.b2;
        let scores: Vec<F> = z2.iter().copied().collect();
        super::argmax_lowest(&scores)
    }
}
