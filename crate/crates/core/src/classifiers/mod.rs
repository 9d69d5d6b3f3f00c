//! The five classifier families and the serializable [`TrainedModel`]
//! wrapper around them.
//!
//! Models work on class indices `0..n_classes`; [`TrainedModel`] maps them
//! back to label strings. All randomness comes from [`ClassifierSpec::seed`],
//! and parallel sections collect in index order, so a fixed seed yields the
//! same model regardless of the rayon pool size.

mod boost;
mod forest;
mod knn;
mod mlp;
mod naive_bayes;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use boost::{BoostParams, GradientBoost};
pub use forest::{ForestParams, RandomForest};
pub use knn::{Knn, KnnParams};
pub use mlp::{Gradients, Mlp, MlpParams};
pub use naive_bayes::{GaussianNb, NbParams};
pub use tree::{DecisionTree, RegressionTree, TreeParams};

use crate::error::{Error, Result};
use crate::features::{design_matrix, FeatureVector, Target, FEATURE_DIM};
use crate::scalar::Real;

pub const MODEL_FORMAT: &str = "demoinfer-model";
pub const MODEL_VERSION: u32 = 1;

/// Shared prediction interface of the fitted models.
pub trait Classify<F> {
    fn predict_index(&self, row: &[F]) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Nb,
    Rf,
    Mlp,
    Xgb,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Knn,
        ClassifierKind::Nb,
        ClassifierKind::Rf,
        ClassifierKind::Mlp,
        ClassifierKind::Xgb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Nb => "nb",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Xgb => "xgb",
        }
    }

    /// Column heading used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Nb => "NB",
            ClassifierKind::Rf => "RF",
            ClassifierKind::Mlp => "MLP",
            ClassifierKind::Xgb => "XGB",
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown classifier {s:?} (expected knn, nb, rf, mlp or xgb)"))
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters for every kind; the grid carries one of these and each
/// cell picks the record for its classifier.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamSet {
    pub knn: KnnParams,
    pub nb: NbParams,
    pub rf: ForestParams,
    pub mlp: MlpParams,
    pub xgb: BoostParams,
}

impl HyperparamSet {
    pub fn for_kind(&self, kind: ClassifierKind) -> Hyperparams {
        match kind {
            ClassifierKind::Knn => Hyperparams::Knn(self.knn.clone()),
            ClassifierKind::Nb => Hyperparams::Nb(self.nb.clone()),
            ClassifierKind::Rf => Hyperparams::Rf(self.rf.clone()),
            ClassifierKind::Mlp => Hyperparams::Mlp(self.mlp.clone()),
            ClassifierKind::Xgb => Hyperparams::Xgb(self.xgb.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in ClassifierKind::ALL {
            self.for_kind(kind).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Knn(KnnParams),
    Nb(NbParams),
    Rf(ForestParams),
    Mlp(MlpParams),
    Xgb(BoostParams),
}

impl Hyperparams {
    pub fn defaults(kind: ClassifierKind) -> Self {
        HyperparamSet::default().for_kind(kind)
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::Knn(_) => ClassifierKind::Knn,
            Hyperparams::Nb(_) => ClassifierKind::Nb,
            Hyperparams::Rf(_) => ClassifierKind::Rf,
            Hyperparams::Mlp(_) => ClassifierKind::Mlp,
            Hyperparams::Xgb(_) => ClassifierKind::Xgb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!("{}: {what}", self.kind())))
            }
        };
        match self {
            Hyperparams::Knn(p) => check(p.k >= 1, "k must be at least 1"),
            Hyperparams::Nb(p) => check(p.var_floor > 0.0 && p.var_floor.is_finite(), "var_floor must be positive"),
            Hyperparams::Rf(p) => {
                check(p.n_trees >= 1, "n_trees must be at least 1")?;
                check(p.max_depth >= 1, "max_depth must be at least 1")?;
                check(p.min_samples_split >= 2, "min_samples_split must be at least 2")?;
                check(p.max_features != Some(0), "max_features must be at least 1")
            }
            Hyperparams::Mlp(p) => {
                check(p.hidden >= 1, "hidden must be at least 1")?;
                check(p.batch_size >= 1, "batch_size must be at least 1")?;
                check(p.epochs >= 1, "epochs must be at least 1")?;
                check(p.learning_rate > 0.0 && p.learning_rate.is_finite(), "learning_rate must be positive")
            }
            Hyperparams::Xgb(p) => {
                check(p.rounds >= 1, "rounds must be at least 1")?;
                check(p.max_depth >= 1, "max_depth must be at least 1")?;
                check(p.learning_rate > 0.0 && p.learning_rate.is_finite(), "learning_rate must be positive")?;
                check(p.lambda >= 0.0, "lambda must be non-negative")?;
                check(p.min_child_weight >= 0.0, "min_child_weight must be non-negative")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            hyperparams: Hyperparams::defaults(kind),
            seed,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.hyperparams.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
#[serde(bound = "F: Real")]
#[allow(clippy::large_enum_variant)]
pub enum FittedParams<F> {
    Knn(Knn<F>),
    Nb(GaussianNb<F>),
    Rf(RandomForest<F>),
    Mlp(Mlp<F>),
    Xgb(GradientBoost<F>),
}

impl<F: Real> Classify<F> for FittedParams<F> {
    fn predict_index(&self, row: &[F]) -> usize {
        match self {
            FittedParams::Knn(m) => m.predict_index(row),
            FittedParams::Nb(m) => m.predict_index(row),
            FittedParams::Rf(m) => m.predict_index(row),
            FittedParams::Mlp(m) => m.predict_index(row),
            FittedParams::Xgb(m) => m.predict_index(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct TrainedModel<F> {
    pub spec: ClassifierSpec,
    /// Labels seen in training, in canonical target order; model outputs
    /// index into this list.
    pub class_labels: Vec<String>,
    pub feature_dim: usize,
    pub fitted: FittedParams<F>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Real")]
struct ModelEnvelope<F> {
    format: String,
    version: u32,
    scalar: String,
    model: TrainedModel<F>,
}

fn check_finite<F: Real>(x: ArrayView2<F>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation("training features contain NaN or infinite values"))
    }
}

impl<F: Real> TrainedModel<F> {
    /// Fits on a dense matrix with class indices into `class_labels`.
    pub fn fit(spec: &ClassifierSpec, x: ArrayView2<F>, y: &[usize], class_labels: Vec<String>) -> Result<Self> {
        spec.hyperparams.validate()?;
        if x.nrows() == 0 {
            return Err(Error::validation("training set is empty"));
        }
        if x.nrows() != y.len() {
            return Err(Error::validation(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        let n_classes = class_labels.len();
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::validation(format!("label index {bad} out of range")));
        }
        if y.iter().all(|&c| c == y[0]) {
            return Err(Error::validation("training set has a single class"));
        }
        check_finite(x)?;
        let fitted = match &spec.hyperparams {
            Hyperparams::Knn(p) => FittedParams::Knn(Knn::fit(p, x, y, n_classes)),
            Hyperparams::Nb(p) => FittedParams::Nb(GaussianNb::fit(p, x, y, n_classes)),
            Hyperparams::Rf(p) => FittedParams::Rf(RandomForest::fit(p, x, y, n_classes, spec.seed)),
            Hyperparams::Mlp(p) => FittedParams::Mlp(Mlp::fit(p, x, y, n_classes, spec.seed)),
            Hyperparams::Xgb(p) => FittedParams::Xgb(GradientBoost::fit(p, x, y, n_classes)),
        };
        Ok(TrainedModel {
            spec: spec.clone(),
            class_labels,
            feature_dim: x.ncols(),
            fitted,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind()
    }

    pub fn predict_index(&self, row: &[F]) -> Result<usize> {
        if row.len() != self.feature_dim {
            return Err(Error::validation(format!(
                "expected {} features, got {}",
                self.feature_dim,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature vector contains NaN or infinite values"));
        }
        Ok(self.fitted.predict_index(row))
    }

    pub fn predict(&self, row: &[F]) -> Result<&str> {
        Ok(&self.class_labels[self.predict_index(row)?])
    }

    /// Elementwise [`TrainedModel::predict`], output in input order.
    pub fn predict_batch<R: AsRef<[F]> + Sync>(&self, rows: &[R]) -> Result<Vec<&str>> {
        rows.par_iter().map(|r| self.predict(r.as_ref())).collect()
    }

    /// Predicts from the leading `feature_dim` slots of each vector.
    pub fn predict_vectors(&self, vectors: &[FeatureVector<F>]) -> Result<Vec<&str>> {
        if self.feature_dim > FEATURE_DIM {
            return Err(Error::validation("model expects more features than a vector holds"));
        }
        vectors
            .par_iter()
            .map(|v| self.predict(&v.values[..self.feature_dim]))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelEnvelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            scalar: F::NAME.into(),
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: ModelEnvelope<F> = serde_json::from_str(text).map_err(|e| Error::format("model", e))?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::validation(format!(
                "unsupported model format {} v{}",
                env.format, env.version
            )));
        }
        if env.scalar != F::NAME {
            return Err(Error::validation(format!(
                "model was trained with {} scalars, loading as {}",
                env.scalar,
                F::NAME
            )));
        }
        Ok(env.model)
    }
}

/// Trains on the first `dim` feature slots of `train_set` (all 29 for the
/// standard pipeline, 18 for genre-only models).
pub fn train_prefix<F: Real>(
    spec: &ClassifierSpec,
    train_set: &[FeatureVector<F>],
    target: Target,
    dim: usize,
) -> Result<TrainedModel<F>> {
    if dim == 0 || dim > FEATURE_DIM {
        return Err(Error::validation(format!("feature prefix must be 1..={FEATURE_DIM}")));
    }
    let mut sorted: Vec<FeatureVector<F>> = train_set.to_vec();
    sorted.sort_by_key(|v| (v.user_id, v.strategy));
    let (x, canonical) = design_matrix(&sorted, target, 0..dim);
    let all = target.class_labels();
    let mut present: Vec<usize> = canonical.clone();
    present.sort_unstable();
    present.dedup();
    let local: Vec<usize> = canonical
        .iter()
        .map(|c| present.binary_search(c).expect("present label"))
        .collect();
    let labels = present.iter().map(|&c| all[c].to_owned()).collect();
    TrainedModel::fit(spec, x.view(), &local, labels)
}

/// Trains on all feature slots. Input order does not matter: vectors are
/// sorted by user id first.
pub fn train<F: Real>(spec: &ClassifierSpec, train_set: &[FeatureVector<F>], target: Target) -> Result<TrainedModel<F>> {
    train_prefix(spec, train_set, target, FEATURE_DIM)
}

pub(crate) fn argmax_lowest<F: PartialOrd + Copy>(scores: &[F]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
