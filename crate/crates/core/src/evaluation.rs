//! Confusion matrices, the accuracy / precision / recall / F1 family and
//! stratified holdout splits.
//!
//! For `l` classes with counts `c[i][j]` (actual `i`, predicted `j`):
//!
//! * accuracy = Σ c[i][i] / Σ c[i][j]
//! * precision_i = c[i][i] / Σ_j c[j][i], recall_i = c[i][i] / Σ_j c[i][j]
//! * f1_i = 2 p r / (p + r)
//! * weighted variants use w_k = (row k total) / (grand total)
//!
//! Zero denominators yield 0: a class never predicted has precision 0, a
//! class absent from the test set has recall 0, and F1 is 0 when
//! precision + recall is 0.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Target};
use crate::scalar::{Real, Scalar};

pub const REPORT_SCHEMA: &str = "demoinfer.eval_report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<String>,
    /// `counts[actual][predicted]`
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(class_labels: Vec<String>) -> Self {
        let l = class_labels.len();
        ConfusionMatrix {
            class_labels,
            counts: vec![vec![0; l]; l],
        }
    }

    pub fn from_indices(class_labels: Vec<String>, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::validation(format!(
                "{} actual labels but {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::zeros(class_labels);
        let l = cm.len();
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= l || p >= l {
                return Err(Error::validation(format!("class index out of range for {l} classes")));
            }
            cm.counts[a][p] += 1;
        }
        Ok(cm)
    }

    pub fn len(&self) -> usize {
        self.class_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_labels.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    /// Reorders classes; `order[k]` is the old index placed at position `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        ConfusionMatrix {
            class_labels: order.iter().map(|&i| self.class_labels[i].clone()).collect(),
            counts: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.counts[i][j]).collect())
                .collect(),
        }
    }
}

/// Counts `actual` vs `predicted` over `class_labels`.
pub fn confusion<L: AsRef<str>>(actual: &[L], predicted: &[L], class_labels: &[L]) -> Result<ConfusionMatrix> {
    let labels: Vec<String> = class_labels.iter().map(|l| l.as_ref().to_owned()).collect();
    let index = |l: &L| {
        labels
            .iter()
            .position(|c| c == l.as_ref())
            .ok_or_else(|| Error::validation(format!("unknown label {:?}", l.as_ref())))
    };
    let a = actual.iter().map(index).collect::<Result<Vec<_>>>()?;
    let p = predicted.iter().map(index).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_indices(labels, &a, &p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<S> {
    pub confusion: ConfusionMatrix,
    pub accuracy: S,
    pub per_class: Vec<ClassMetrics<S>>,
    pub class_weights: Vec<S>,
    pub weighted_precision: S,
    pub weighted_recall: S,
    pub weighted_f1: S,
}

fn ratio<S: Scalar>(num: u64, den: u64) -> S {
    if den == 0 {
        S::zero()
    } else {
        S::from_count(num as usize) / S::from_count(den as usize)
    }
}

pub fn metrics<S: Scalar>(cm: &ConfusionMatrix) -> Result<EvalReport<S>> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::validation("confusion matrix is empty; metrics undefined"));
    }
    let two = S::one() + S::one();
    let per_class: Vec<ClassMetrics<S>> = (0..cm.len())
        .map(|i| {
            let precision: S = ratio(cm.counts[i][i], cm.column_total(i));
            let recall: S = ratio(cm.counts[i][i], cm.row_total(i));
            let sum = precision + recall;
            let f1 = if sum == S::zero() {
                S::zero()
            } else {
                two * precision * recall / sum
            };
            ClassMetrics {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let class_weights: Vec<S> = (0..cm.len()).map(|i| ratio(cm.row_total(i), total)).collect();
    let weighted = |pick: fn(&ClassMetrics<S>) -> S| {
        class_weights
            .iter()
            .zip(&per_class)
            .fold(S::zero(), |acc, (&w, m)| acc + w * pick(m))
    };
    Ok(EvalReport {
        accuracy: ratio(cm.trace(), total),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
        per_class,
        class_weights,
        confusion: cm.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct ReportEnvelope<T> {
    schema: String,
    version: u32,
    report: T,
}

/// Versioned JSON document for one report.
pub fn report_to_json(report: &EvalReport<f64>) -> String {
    serde_json::to_string_pretty(&ReportEnvelope {
        schema: REPORT_SCHEMA.into(),
        version: REPORT_VERSION,
        report,
    })
    .expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<EvalReport<f64>> {
    let env: ReportEnvelope<EvalReport<f64>> =
        serde_json::from_str(text).map_err(|e| Error::format("eval report", e))?;
    if env.schema != REPORT_SCHEMA || env.version != REPORT_VERSION {
        return Err(Error::validation(format!(
            "unsupported report schema {} v{}",
            env.schema, env.version
        )));
    }
    Ok(env.report)
}

/// Mean and sample standard deviation over repeated splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std, n }
    }
}

/// Stratified holdout over class indices. Returns ascending train and test
/// positions. Each class with `n >= 2` members sends `round(ratio * n)`
/// members to train, clamped to `1..=n-1`; smaller classes go entirely to
/// train.
pub fn stratified_split(labels: &[usize], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            log::warn!("class {class} has {} sample(s); all placed in train", members.len());
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let k = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub type TrainTest<F> = (Vec<FeatureVector<F>>, Vec<FeatureVector<F>>);

/// Stratified split of feature vectors on `target`. Vectors are first put
/// in user-id order so the result does not depend on input order.
pub fn split<F: Real>(
    vectors: &[FeatureVector<F>],
    target: Target,
    ratio: f64,
    seed: u64,
) -> Result<TrainTest<F>> {
    let mut sorted: Vec<&FeatureVector<F>> = vectors.iter().collect();
    sorted.sort_by_key(|v| (v.user_id, v.strategy));
    let labels: Vec<usize> = sorted.iter().map(|v| v.labels.class_index(target)).collect();
    let (tr, te) = stratified_split(&labels, ratio, seed)?;
    Ok((
        tr.into_iter().map(|i| sorted[i].clone()).collect(),
        te.into_iter().map(|i| sorted[i].clone()).collect(),
    ))
}
