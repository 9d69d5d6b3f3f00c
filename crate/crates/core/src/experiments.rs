//! The experiment grid: strategies × classifiers × targets, repeated over
//! several split seeds, plus the popularity diagnostics.
//!
//! Every (target, seed) pair gets one stratified split of the users. All
//! strategies and classifiers reuse it, so cells differ only in features
//! and model. Users dropped by a strategy (no popular ratings) simply
//! leave that strategy's train or test side; the counts are kept per run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_prefix, ClassifierKind, ClassifierSpec, HyperparamSet};
use crate::dataset::{load_movielens, AgeBand, AgeCode, Dataset, DatasetSummary, GENRE_COUNT};
use crate::enrichment::{load_enrichment, merge_meta, synth_enrichment, MovieMeta};
use crate::error::{Error, Result};
use crate::evaluation::{confusion, metrics, stratified_split, EvalReport, MeanStd};
use crate::features::{build_strategy, liked_subset, FeatureSet, LabelSet, Strategy, Target, FEATURE_DIM};
use crate::popularity::{
    build_index, frequency_histogram, popular_portion_by_rating_order, write_histogram_csv, write_portion_csv,
    PopularityIndex, PopularityMetric, PopularitySummary,
};

pub const GRID_SCHEMA: &str = "demoinfer.grid";
pub const GRID_VERSION: u32 = 1;

/// Environment variables that override the dataset paths of a config.
pub const ENV_OVERRIDES: [(&str, &str); 5] = [
    ("DEMOINFER_RATINGS", "ratings"),
    ("DEMOINFER_USERS", "users"),
    ("DEMOINFER_MOVIES", "movies"),
    ("DEMOINFER_ENRICHMENT", "enrichment"),
    ("DEMOINFER_OUTPUT_DIR", "output_dir"),
];

fn default_alpha() -> f64 {
    0.05
}

fn default_split_ratio() -> f64 {
    0.8
}

fn default_seeds() -> Vec<u64> {
    vec![42, 43, 44, 45, 46]
}

fn default_synth_seed() -> u64 {
    7
}

fn default_targets() -> Vec<Target> {
    Target::ALL.to_vec()
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Declarative grid description, read from TOML.
///
/// ```toml
/// ratings = "ml-1m/ratings.dat"
/// users = "ml-1m/users.dat"
/// movies = "ml-1m/movies.dat"
/// enrichment = "imdb.csv"     # or leave out and set synth_seed
/// alpha = 0.05
/// popularity_metric = "count"
/// split_ratio = 0.8
/// seeds = [42, 43, 44, 45, 46]
/// targets = ["gender", "age7", "age3"]
/// strategies = ["all", "popular", "liked"]
/// output_dir = "results"
///
/// [hyperparams.knn]
/// k = 15
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ratings: PathBuf,
    pub users: PathBuf,
    pub movies: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<PathBuf>,
    /// Seed for synthetic enrichment, used when `enrichment` is absent.
    #[serde(default = "default_synth_seed")]
    pub synth_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub popularity_metric: PopularityMetric,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub hyperparams: HyperparamSet,
    #[serde(default = "default_targets")]
    pub targets: Vec<Target>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    /// Train on the 18 genre slots only.
    #[serde(default)]
    pub genre_only: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(ratings: impl Into<PathBuf>, users: impl Into<PathBuf>, movies: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            ratings: ratings.into(),
            users: users.into(),
            movies: movies.into(),
            enrichment: None,
            synth_seed: default_synth_seed(),
            alpha: default_alpha(),
            popularity_metric: PopularityMetric::Count,
            split_ratio: default_split_ratio(),
            seeds: default_seeds(),
            hyperparams: HyperparamSet::default(),
            targets: default_targets(),
            strategies: default_strategies(),
            classifiers: default_classifiers(),
            genre_only: false,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory; environment overrides are applied afterwards.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.apply_env(|k| std::env::var_os(k).map(PathBuf::from));
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.ratings);
        fix(&mut self.users);
        fix(&mut self.movies);
        if let Some(e) = self.enrichment.as_mut() {
            fix(e);
        }
        fix(&mut self.output_dir);
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<PathBuf>) {
        for (var, key) in ENV_OVERRIDES {
            if let Some(v) = lookup(var) {
                match key {
                    "ratings" => self.ratings = v,
                    "users" => self.users = v,
                    "movies" => self.movies = v,
                    "enrichment" => self.enrichment = Some(v),
                    _ => self.output_dir = v,
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::validation(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        let nonempty = |n: usize, what: &str| {
            if n == 0 {
                Err(Error::validation(format!("{what} must not be empty")))
            } else {
                Ok(())
            }
        };
        nonempty(self.seeds.len(), "seeds")?;
        nonempty(self.targets.len(), "targets")?;
        nonempty(self.strategies.len(), "strategies")?;
        nonempty(self.classifiers.len(), "classifiers")?;
        self.hyperparams.validate()?;
        let mut paths = vec![&self.ratings, &self.users, &self.movies];
        paths.extend(self.enrichment.as_ref());
        for p in paths {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        Ok(())
    }

    fn feature_slots(&self) -> usize {
        if self.genre_only {
            GENRE_COUNT
        } else {
            FEATURE_DIM
        }
    }

    /// Everything that influences results, as canonical JSON. Paths and
    /// the output location are left out so moving the data does not
    /// invalidate stored cells.
    fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("object");
        for k in ["ratings", "users", "movies", "output_dir"] {
            obj.remove(k);
        }
        if let Some(e) = &self.enrichment {
            obj.insert("enrichment".into(), e.file_name().map(|n| n.to_string_lossy()).into());
        }
        v.to_string()
    }
}

/// Seven-to-three age reduction.
pub fn reduce_age(code: u8) -> Result<AgeBand> {
    AgeCode::new(code).map(AgeCode::band).map_err(Error::validation)
}

/// Data volume behind one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMeta {
    pub strategy: Strategy,
    pub users: usize,
    /// Ratings averaged into the vectors.
    pub support_ratings: usize,
    /// Distinct movies among those ratings.
    pub items: usize,
    pub dropped_users: usize,
    pub dropped_ratings: usize,
    pub excluded_ratings: usize,
}

/// One seed of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub seed: u64,
    pub train_users: usize,
    pub test_users: usize,
    /// Split members with no vector under this strategy.
    pub dropped_train: usize,
    pub dropped_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub accuracy: MeanStd,
    pub weighted_precision: MeanStd,
    pub weighted_f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub strategy: Strategy,
    pub classifier: ClassifierKind,
    pub target: Target,
    /// In configured seed order; the first is the headline run.
    pub runs: Vec<CellRun>,
    /// Over the runs that succeeded; absent if none did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<CellSummary>,
}

impl GridCell {
    pub fn headline(&self) -> Option<&EvalReport<f64>> {
        self.runs.first().and_then(|r| r.report.as_ref())
    }

    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.runs.iter().filter_map(|r| r.error.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub popularity: PopularitySummary,
    pub enrichment_coverage: f64,
    pub strategies: Vec<StrategyMeta>,
    pub cells: Vec<GridCell>,
}

impl ResultGrid {
    pub fn cell(&self, strategy: Strategy, classifier: ClassifierKind, target: Target) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.classifier == classifier && c.target == target)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("grid serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ResultGrid = serde_json::from_str(text).map_err(|e| Error::format("grid", e))?;
        if grid.schema != GRID_SCHEMA || grid.version != GRID_VERSION {
            return Err(Error::validation(format!(
                "unsupported grid schema {} v{}",
                grid.schema, grid.version
            )));
        }
        Ok(grid)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Wall-clock seconds per cell run, kept apart from the grid so the grid
/// itself stays reproducible byte for byte.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub cells: BTreeMap<String, f64>,
}

/// Shared inputs of every cell.
pub struct Prepared {
    pub dataset: Dataset,
    pub meta: Vec<MovieMeta>,
    pub enrichment_coverage: f64,
    pub index: PopularityIndex,
    pub features: BTreeMap<Strategy, Result<FeatureSet<f64>>>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let dataset = load_movielens(&config.ratings, &config.users, &config.movies)?;
    let enrich = match &config.enrichment {
        Some(p) => load_enrichment(p)?,
        None => {
            log::info!("no enrichment file; using synthetic ratings with seed {}", config.synth_seed);
            synth_enrichment(dataset.movies(), config.synth_seed)
        }
    };
    let merged = merge_meta(dataset.movies(), &enrich);
    let enrichment_coverage = merged.coverage();
    let meta = merged.meta;
    let index = build_index(&dataset, config.alpha, config.popularity_metric)?;
    let strategies: BTreeSet<Strategy> = config.strategies.iter().copied().collect();
    let features = strategies
        .into_par_iter()
        .map(|s| (s, build_strategy(&dataset, &meta, s, &index)))
        .collect();
    Ok(Prepared {
        dataset,
        meta,
        enrichment_coverage,
        index,
        features,
    })
}

fn strategy_meta(p: &Prepared, strategy: Strategy, set: &FeatureSet<f64>) -> StrategyMeta {
    let ratings = p.dataset.ratings();
    let items: BTreeSet<u32> = match strategy {
        Strategy::AllItems => ratings.iter().map(|r| r.movie_id).collect(),
        Strategy::AlphaPopular => ratings
            .iter()
            .map(|r| r.movie_id)
            .filter(|&m| p.index.is_popular(m))
            .collect(),
        Strategy::Liked => p
            .dataset
            .ratings_by_user()
            .values()
            .flat_map(|s_u| liked_subset(&p.dataset, s_u))
            .map(|i| ratings[i].movie_id)
            .collect(),
    };
    StrategyMeta {
        strategy,
        users: set.vectors.len(),
        support_ratings: set.support_total(),
        items: items.len(),
        dropped_users: set.dropped_users.len(),
        dropped_ratings: set.dropped_ratings,
        excluded_ratings: set.excluded_ratings,
    }
}

/// Users with at least one rating, ascending, with their labels.
fn population(dataset: &Dataset) -> Vec<(u32, LabelSet)> {
    dataset
        .ratings_by_user()
        .keys()
        .map(|&id| {
            let u = dataset.user(id).expect("rated user exists");
            (id, LabelSet::new(u.gender, u.age))
        })
        .collect()
}

struct SplitSides {
    train: BTreeSet<u32>,
    test: BTreeSet<u32>,
}

fn user_split(pop: &[(u32, LabelSet)], target: Target, ratio: f64, seed: u64) -> Result<SplitSides> {
    let labels: Vec<usize> = pop.iter().map(|(_, l)| l.class_index(target)).collect();
    let (tr, te) = stratified_split(&labels, ratio, seed)?;
    Ok(SplitSides {
        train: tr.into_iter().map(|i| pop[i].0).collect(),
        test: te.into_iter().map(|i| pop[i].0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct RunKey {
    target: Target,
    strategy: Strategy,
    classifier: ClassifierKind,
    seed_pos: usize,
}

impl RunKey {
    fn file_name(&self, seed: u64) -> String {
        format!("{}_{}_{}_{seed}.json", self.strategy, self.classifier, self.target)
    }
}

fn run_cell(
    config: &ExperimentConfig,
    sets: &BTreeMap<Strategy, Result<FeatureSet<f64>>>,
    split: &Result<SplitSides>,
    key: RunKey,
) -> CellRun {
    let seed = config.seeds[key.seed_pos];
    let mut run = CellRun {
        seed,
        train_users: 0,
        test_users: 0,
        dropped_train: 0,
        dropped_test: 0,
        report: None,
        error: None,
    };
    let outcome = (|| -> Result<EvalReport<f64>> {
        let set = sets[&key.strategy].as_ref().map_err(|e| Error::validation(e.to_string()))?;
        let sides = split.as_ref().map_err(|e| Error::validation(e.to_string()))?;
        let train: Vec<_> = set
            .vectors
            .iter()
            .filter(|v| sides.train.contains(&v.user_id))
            .cloned()
            .collect();
        let test: Vec<_> = set
            .vectors
            .iter()
            .filter(|v| sides.test.contains(&v.user_id))
            .cloned()
            .collect();
        run.train_users = train.len();
        run.test_users = test.len();
        run.dropped_train = sides.train.len() - train.len();
        run.dropped_test = sides.test.len() - test.len();
        let spec = ClassifierSpec {
            hyperparams: config.hyperparams.for_kind(key.classifier),
            seed,
        };
        let model = train_prefix(&spec, &train, key.target, config.feature_slots())?;
        let predicted = model.predict_vectors(&test)?;
        let actual: Vec<&str> = test.iter().map(|v| v.labels.label(key.target)).collect();
        let cm = confusion(&actual, &predicted, key.target.class_labels())?;
        metrics(&cm)
    })();
    match outcome {
        Ok(r) => run.report = Some(r),
        Err(e) => {
            log::warn!(
                "cell {}/{}/{} seed {seed} failed: {e}",
                key.strategy,
                key.classifier,
                key.target
            );
            run.error = Some(e.to_string());
        }
    }
    run
}

fn summarize(runs: &[CellRun]) -> Option<CellSummary> {
    let reports: Vec<&EvalReport<f64>> = runs.iter().filter_map(|r| r.report.as_ref()).collect();
    if reports.is_empty() {
        return None;
    }
    let of = |f: fn(&EvalReport<f64>) -> f64| MeanStd::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    Some(CellSummary {
        accuracy: of(|r| r.accuracy),
        weighted_precision: of(|r| r.weighted_precision),
        weighted_f1: of(|r| r.weighted_f1),
    })
}

/// Stored cell runs are reused only if `cells/config.json` matches.
fn open_cell_store(dir: &Path, fingerprint: &str) -> Result<()> {
    let stamp = dir.join("config.json");
    let current = fs::read_to_string(&stamp).ok();
    if current.as_deref() != Some(fingerprint) {
        if dir.exists() {
            log::info!("configuration changed; discarding stored cells in {}", dir.display());
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(&stamp, fingerprint).map_err(|e| Error::io(&stamp, e))?;
    }
    Ok(())
}

fn load_stored(path: &Path) -> Option<CellRun> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs (or resumes) the whole grid and writes every artifact to
/// `config.output_dir`. `threads` caps the worker pool; results do not
/// depend on it.
pub fn run_grid(config: &ExperimentConfig, threads: Option<usize>) -> Result<ResultGrid> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::validation("threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    pool.install(|| run_grid_in_pool(config))
}

fn run_grid_in_pool(config: &ExperimentConfig) -> Result<ResultGrid> {
    let started = Instant::now();
    let prepared = prepare(config)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cell_dir = out.join("cells");
    open_cell_store(&cell_dir, &config.fingerprint())?;

    let pop = population(&prepared.dataset);
    let targets: BTreeSet<Target> = config.targets.iter().copied().collect();
    let mut splits: BTreeMap<(Target, usize), Result<SplitSides>> = BTreeMap::new();
    for &t in &targets {
        for (pos, &seed) in config.seeds.iter().enumerate() {
            splits.insert((t, pos), user_split(&pop, t, config.split_ratio, seed));
        }
    }

    let strategies: BTreeSet<Strategy> = config.strategies.iter().copied().collect();
    let classifiers: BTreeSet<ClassifierKind> = config.classifiers.iter().copied().collect();
    let mut keys = Vec::new();
    for &target in &targets {
        for &strategy in &strategies {
            for &classifier in &classifiers {
                for seed_pos in 0..config.seeds.len() {
                    keys.push(RunKey {
                        target,
                        strategy,
                        classifier,
                        seed_pos,
                    });
                }
            }
        }
    }

    let results: Vec<(RunKey, CellRun, Option<f64>)> = keys
        .par_iter()
        .map(|&key| {
            let seed = config.seeds[key.seed_pos];
            let path = cell_dir.join(key.file_name(seed));
            if let Some(run) = load_stored(&path) {
                return Ok((key, run, None));
            }
            let t0 = Instant::now();
            let run = run_cell(config, &prepared.features, &splits[&(key.target, key.seed_pos)], key);
            let secs = t0.elapsed().as_secs_f64();
            let text = serde_json::to_string(&run).expect("run serializes");
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok((key, run, Some(secs)))
        })
        .collect::<Result<_>>()?;

    let mut timings = Timings::default();
    let mut cells: Vec<GridCell> = Vec::new();
    for (key, run, secs) in results {
        if let Some(s) = secs {
            timings.cells.insert(key.file_name(run.seed), s);
        }
        match cells.last_mut() {
            Some(c) if c.strategy == key.strategy && c.classifier == key.classifier && c.target == key.target => {
                c.runs.push(run)
            }
            _ => cells.push(GridCell {
                strategy: key.strategy,
                classifier: key.classifier,
                target: key.target,
                runs: vec![run],
                summary: None,
            }),
        }
    }
    for c in &mut cells {
        c.summary = summarize(&c.runs);
    }

    let strategy_rows = prepared
        .features
        .iter()
        .filter_map(|(&s, set)| set.as_ref().ok().map(|set| strategy_meta(&prepared, s, set)))
        .collect();
    let grid = ResultGrid {
        schema: GRID_SCHEMA.into(),
        version: GRID_VERSION,
        config: config.clone(),
        dataset: prepared.dataset.summary(),
        popularity: prepared.index.summary(),
        enrichment_coverage: prepared.enrichment_coverage,
        strategies: strategy_rows,
        cells,
    };

    write_file(&out.join("grid.json"), &grid.to_json())?;
    for &target in &targets {
        for metric in TableMetric::ALL {
            let table = render_table(&grid, metric, target);
            write_file(&out.join(format!("table_{metric}_{target}.csv")), &table.to_csv())?;
        }
    }
    write_histogram_csv(&frequency_histogram(&prepared.dataset), out.join("fig1_histogram.csv"))?;
    write_portion_csv(
        &popular_portion_by_rating_order(&prepared.dataset, &prepared.index),
        out.join("fig2_portion.csv"),
    )?;
    timings.total_seconds = started.elapsed().as_secs_f64();
    write_file(
        &out.join("timings.json"),
        &serde_json::to_string_pretty(&timings).expect("timings serialize"),
    )?;
    Ok(grid)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMetric {
    Accuracy,
    WeightedPrecision,
    WeightedF1,
}

impl TableMetric {
    pub const ALL: [TableMetric; 3] = [
        TableMetric::Accuracy,
        TableMetric::WeightedPrecision,
        TableMetric::WeightedF1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableMetric::Accuracy => "accuracy",
            TableMetric::WeightedPrecision => "weighted_precision",
            TableMetric::WeightedF1 => "weighted_f1",
        }
    }

    fn pick(self, s: &CellSummary) -> MeanStd {
        match self {
            TableMetric::Accuracy => s.accuracy,
            TableMetric::WeightedPrecision => s.weighted_precision,
            TableMetric::WeightedF1 => s.weighted_f1,
        }
    }
}

impl FromStr for TableMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TableMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (expected accuracy, weighted_precision or weighted_f1)"))
    }
}

impl std::fmt::Display for TableMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strategy rows × classifier columns for one target and metric. Values
/// are means over seeds; `None` marks a missing or failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metric: TableMetric,
    pub target: Target,
    pub classifiers: Vec<ClassifierKind>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub strategy: Strategy,
    pub label: String,
    pub values: Vec<Option<MeanStd>>,
}

fn row_label(grid: &ResultGrid, strategy: Strategy) -> String {
    let name = match strategy {
        Strategy::AllItems => "All items",
        Strategy::AlphaPopular => "Popular items",
        Strategy::Liked => "Liked items",
    };
    match grid.strategies.iter().find(|m| m.strategy == strategy) {
        Some(m) => format!("{name}: {} ratings {} items", m.support_ratings, m.items),
        None => name.to_owned(),
    }
}

pub fn render_table(grid: &ResultGrid, metric: TableMetric, target: Target) -> Table {
    let strategies: BTreeSet<Strategy> = grid.config.strategies.iter().copied().collect();
    let classifiers: Vec<ClassifierKind> = grid
        .config
        .classifiers
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = strategies
        .into_iter()
        .map(|s| TableRow {
            strategy: s,
            label: row_label(grid, s),
            values: classifiers
                .iter()
                .map(|&k| grid.cell(s, k, target).and_then(|c| c.summary.as_ref()).map(|x| metric.pick(x)))
                .collect(),
        })
        .collect();
    Table {
        metric,
        target,
        classifiers,
        rows,
    }
}

/// All requested targets, one table each.
pub fn render_tables(grid: &ResultGrid, metric: TableMetric) -> Vec<Table> {
    grid.config
        .targets
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|t| render_table(grid, metric, t))
        .collect()
}

pub const MISSING: &str = "—";

impl Table {
    /// Fixed-width text with two decimals, as in the published tables.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(7);
        let mut s = String::new();
        let _ = writeln!(s, "{} ({})", self.metric, self.target);
        let _ = write!(s, "{:<width$}", "Methods");
        for k in &self.classifiers {
            let _ = write!(s, " {:>6}", k.display_name());
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<width$}", row.label);
            for v in &row.values {
                let cell = v.map_or_else(|| MISSING.to_owned(), |m| format!("{:.2}", m.mean));
                let _ = write!(s, " {cell:>6}");
            }
            s.push('\n');
        }
        s
    }

    /// `strategy,<classifier>...,<classifier>_std...` at full precision;
    /// missing cells are written as the dash placeholder.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy");
        for k in &self.classifiers {
            let _ = write!(s, ",{k}");
        }
        for k in &self.classifiers {
            let _ = write!(s, ",{k}_std");
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(row.strategy.as_str());
            for v in &row.values {
                let _ = write!(s, ",{}", v.map_or_else(|| MISSING.to_owned(), |m| m.mean.to_string()));
            }
            for v in &row.values {
                let _ = write!(s, ",{}", v.map_or_else(|| MISSING.to_owned(), |m| m.std.to_string()));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{write_movielens, SynthConfig};

    #[test]
    fn age_reduction_partitions_codes() {
        assert_eq!(reduce_age(25).unwrap(), AgeBand::Young);
        assert_eq!(reduce_age(45).unwrap(), AgeBand::Adult);
        assert_eq!(reduce_age(56).unwrap(), AgeBand::Old);
        let mut groups: BTreeMap<AgeBand, Vec<u8>> = BTreeMap::new();
        for c in crate::dataset::AGE_CODES {
            groups.entry(reduce_age(c).unwrap()).or_default().push(c);
        }
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[&AgeBand::Young], vec![1, 18, 25]);
        assert_eq!(groups[&AgeBand::Adult], vec![35, 45]);
        assert_eq!(groups[&AgeBand::Old], vec![50, 56]);
        assert!(reduce_age(30).is_err());
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg = ExperimentConfig::from_toml("ratings='r'\nusers='u'\nmovies='m'\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new("r", "u", "m"));
        assert_eq!(cfg.seeds, vec![42, 43, 44, 45, 46]);
        assert!(ExperimentConfig::from_toml("ratings='r'\nusers='u'\nmovies='m'\nbogus=1\n").is_err());
        let cfg = ExperimentConfig::from_toml("ratings='r'\nusers='u'\nmovies='m'\n[hyperparams.knn]\nk=5\n").unwrap();
        assert_eq!(cfg.hyperparams.knn.k, 5);
    }

    #[test]
    fn env_overrides_paths() {
        let mut cfg = ExperimentConfig::new("r", "u", "m");
        cfg.apply_env(|k| (k == "DEMOINFER_RATINGS").then(|| PathBuf::from("/data/r.dat")));
        assert_eq!(cfg.ratings, PathBuf::from("/data/r.dat"));
        assert_eq!(cfg.users, PathBuf::from("u"));
    }

    #[test]
    fn validation_catches_ranges_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        write_movielens(dir.path(), &SynthConfig::tiny(1).generate()).unwrap();
        let mut cfg = ExperimentConfig::new(
            dir.path().join("ratings.dat"),
            dir.path().join("users.dat"),
            dir.path().join("movies.dat"),
        );
        cfg.validate().unwrap();
        cfg.alpha = 1.5;
        assert_eq!(cfg.validate().unwrap_err().kind(), crate::ErrorKind::Validation);
        cfg.alpha = 0.05;
        cfg.movies = dir.path().join("nope.dat");
        assert_eq!(cfg.validate().unwrap_err().kind(), crate::ErrorKind::Io);
    }

    fn small_config(dir: &Path) -> ExperimentConfig {
        write_movielens(dir, &SynthConfig::small(3).generate()).unwrap();
        let mut cfg = ExperimentConfig::new(dir.join("ratings.dat"), dir.join("users.dat"), dir.join("movies.dat"));
        cfg.seeds = vec![1, 2];
        cfg.hyperparams.rf.n_trees = 10;
        cfg.hyperparams.mlp.epochs = 20;
        cfg.hyperparams.xgb.rounds = 20;
        cfg.output_dir = dir.join("out");
        cfg
    }

    #[test]
    fn grid_conserves_ratings_and_renders() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let grid = run_grid(&cfg, Some(2)).unwrap();
        assert_eq!(grid.cells.len(), 3 * 5 * 3);
        let total = grid.dataset.ratings;
        for m in &grid.strategies {
            match m.strategy {
                Strategy::AllItems => assert_eq!(m.support_ratings, total),
                _ => assert_eq!(m.support_ratings + m.excluded_ratings + m.dropped_ratings, total),
            }
        }
        for c in &grid.cells {
            assert_eq!(c.runs.len(), 2);
            assert!(c.summary.is_some(), "{c:?}");
        }
        let tables = render_tables(&grid, TableMetric::Accuracy);
        assert_eq!(tables.len(), 3);
        for t in &tables {
            assert_eq!(t.rows.len(), 3);
            assert!(t.rows.iter().all(|r| r.values.len() == 5 && r.values.iter().all(Option::is_some)));
            // text shows the CSV numbers rounded to two places
            let csv = t.to_csv();
            let text = t.to_text();
            for (line, row) in csv.lines().skip(1).zip(&t.rows) {
                let nums: Vec<f64> = line.split(',').skip(1).take(5).map(|x| x.parse().unwrap()).collect();
                let text_line = text.lines().find(|l| l.starts_with(&row.label)).unwrap();
                let shown: Vec<String> = text_line[row.label.len()..].split_whitespace().map(String::from).collect();
                let rounded: Vec<String> = nums.iter().map(|v| format!("{v:.2}")).collect();
                assert_eq!(shown, rounded);
            }
        }
        for f in ["grid.json", "table_accuracy_gender.csv", "table_weighted_f1_age3.csv", "fig1_histogram.csv", "fig2_portion.csv"] {
            assert!(cfg.output_dir.join(f).exists(), "{f}");
        }
        assert_eq!(ResultGrid::load(cfg.output_dir.join("grid.json")).unwrap(), grid);
    }

    #[test]
    fn grid_resumes_from_stored_cells() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.targets = vec![Target::Gender];
        cfg.classifiers = vec![ClassifierKind::Nb, ClassifierKind::Knn];
        let first = run_grid(&cfg, Some(1)).unwrap().to_json();
        let stored = cfg.output_dir.join("cells").join("all_nb_gender_1.json");
        assert!(stored.exists());
        let second = run_grid(&cfg, Some(3)).unwrap().to_json();
        assert_eq!(first, second);
        // a changed config discards stored cells
        cfg.split_ratio = 0.7;
        let third = run_grid(&cfg, Some(1)).unwrap();
        assert_eq!(third.config.split_ratio, 0.7);
        assert_ne!(third.to_json(), first);
    }

    #[test]
    fn failed_cell_renders_as_dash() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.targets = vec![Target::Gender];
        cfg.classifiers = vec![ClassifierKind::Nb];
        cfg.seeds = vec![1];
        let mut grid = run_grid(&cfg, None).unwrap();
        let c = &mut grid.cells[0];
        c.runs[0].report = None;
        c.runs[0].error = Some("boom".into());
        c.summary = summarize(&c.runs);
        let t = render_table(&grid, TableMetric::Accuracy, Target::Gender);
        assert_eq!(t.rows[0].values[0], None);
        assert!(t.to_text().contains(MISSING));
        assert!(t.to_csv().lines().nth(1).unwrap().contains(MISSING));
    }

    #[test]
    fn tiny_dataset_completes_with_failures_recorded() {
        let dir = tempfile::tempdir().unwrap();
        write_movielens(dir.path(), &SynthConfig::tiny(5).generate()).unwrap();
        let mut cfg = ExperimentConfig::new(
            dir.path().join("ratings.dat"),
            dir.path().join("users.dat"),
            dir.path().join("movies.dat"),
        );
        cfg.seeds = vec![1];
        cfg.output_dir = dir.path().join("out");
        let grid = run_grid(&cfg, Some(1)).unwrap();
        assert_eq!(grid.cells.len(), 45);
        assert!(grid.cells.iter().flat_map(|c| c.errors()).count() > 0);
    }
}
