//! `demoinfer` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or arguments, 2 when a
//! file cannot be read or written. Logs and errors go to stderr; stdout
//! carries only the requested data.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use demoinfer_core::classifiers::{train_prefix, ClassifierKind, ClassifierSpec, Hyperparams};
use demoinfer_core::dataset::{load_movielens, Dataset, GENRE_COUNT};
use demoinfer_core::enrichment::{load_enrichment, merge_meta, synth_enrichment, write_enrichment, EnrichmentMap};
use demoinfer_core::evaluation::{confusion, metrics, report_to_json, split, EvalReport};
use demoinfer_core::experiments::{render_table, render_tables, run_grid, ExperimentConfig, ResultGrid, TableMetric};
use demoinfer_core::features::{build_strategy, export_features, import_features, Strategy, Target, FEATURE_DIM};
use demoinfer_core::popularity::{
    build_index, build_index_by_threshold, frequency_histogram, popular_portion_by_rating_order, write_histogram_csv,
    write_portion_csv, PopularityIndex, PopularityMetric,
};
use demoinfer_core::{Error, ErrorKind, FeatureVectorF64, TrainedModelF64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "demoinfer", version, about = "Infer age and gender from movie ratings")]
pub struct Cli {
    /// Print results and errors as JSON
    #[arg(long, global = true)]
    pub json: bool,

    /// Cap on worker threads
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate the three MovieLens files
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Also write canonical CSV copies here
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Validate an enrichment sidecar, or synthesize one from --seed
    Enrich {
        /// movies.dat
        #[arg(long, value_name = "PATH")]
        movies: PathBuf,
        #[command(flatten)]
        enrich: EnrichArgs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Popular-set statistics and the long-tail diagnostics
    Popularity {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        pop: PopularityArgs,
        /// Use a rating-count threshold instead of --alpha
        #[arg(long, value_name = "N")]
        min_count: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Build per-user feature vectors for one strategy
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        enrich: EnrichArgs,
        #[command(flatten)]
        pop: PopularityArgs,
        #[arg(long, value_name = "all|popular|liked")]
        strategy: Strategy,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train a classifier on the train side of a stratified split
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "knn|nb|rf|mlp|xgb")]
        classifier: ClassifierKind,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score a trained model on the test side of the same split
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        /// model.json written by `train`
        #[arg(long = "model", value_name = "PATH")]
        model_path: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run the full experiment grid described by a config file
    Grid {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Replace the config's seed list (repeatable)
        #[arg(long, value_name = "N")]
        seed: Vec<u64>,
        /// Replace the config's output directory
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Render result tables from a grid.json
    Report {
        #[arg(long, value_name = "PATH")]
        grid: PathBuf,
        #[arg(long, value_name = "accuracy|weighted_precision|weighted_f1", default_value = "accuracy")]
        metric: TableMetric,
        /// Only this target
        #[arg(long, value_name = "gender|age7|age3")]
        target: Option<Target>,
        /// CSV instead of aligned text
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// ratings.dat
    #[arg(long, value_name = "PATH")]
    pub ratings: PathBuf,
    /// users.dat
    #[arg(long, value_name = "PATH")]
    pub users: PathBuf,
    /// movies.dat
    #[arg(long, value_name = "PATH")]
    pub movies: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnrichArgs {
    /// MPAA and parental-guide CSV; synthesized from --seed when absent
    #[arg(long, value_name = "PATH")]
    pub enrichment: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PopularityArgs {
    #[arg(long, value_name = "F", default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_name = "count|mean_score", default_value = "count")]
    pub popularity_metric: PopularityMetric,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Feature CSV written by `features`
    #[arg(long, value_name = "PATH")]
    pub features: PathBuf,
    #[arg(long, value_name = "gender|age7|age3")]
    pub target: Target,
    #[arg(long, value_name = "F", default_value_t = 0.8)]
    pub split_ratio: f64,
    #[arg(long, value_name = "N", default_value_t = 42)]
    pub seed: u64,
    /// Use the 18 genre slots only
    #[arg(long)]
    pub genre_only: bool,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Validation => EXIT_VALIDATION,
            };
            if cli.json {
                let kind = if code == EXIT_IO { "io" } else { "validation" };
                let body = json!({ "error": { "kind": kind, "message": e.to_string(), "exit_code": code } });
                let _ = writeln!(stderr, "{body}");
            } else {
                let _ = writeln!(stderr, "error: {e}");
            }
            code
        }
    }
}

type Res<T = ()> = demoinfer_core::Result<T>;

fn emit(out: &mut dyn Write, text: &str) -> Res {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Res {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Res {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn load(data: &DataArgs) -> Res<Dataset> {
    load_movielens(&data.ratings, &data.users, &data.movies)
}

fn enrichment(enrich: &EnrichArgs, dataset_movies: &[demoinfer_core::dataset::MovieRecord]) -> Res<EnrichmentMap> {
    match &enrich.enrichment {
        Some(p) => load_enrichment(p),
        None => {
            log::info!("no enrichment file; synthesizing with seed {}", enrich.seed);
            Ok(synth_enrichment(dataset_movies, enrich.seed))
        }
    }
}

fn popularity(dataset: &Dataset, pop: &PopularityArgs) -> Res<PopularityIndex> {
    build_index(dataset, pop.alpha, pop.popularity_metric)
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Res {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        // Fails only if a pool already exists, e.g. when called twice in
        // one process; the existing pool is then used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Ingest { data, out } => {
            let ds = load(data)?;
            if let Some(dir) = out {
                ds.write_canonical(dir)?;
            }
            let s = ds.summary();
            let text = if cli.json {
                pretty(&serde_json::to_value(s).expect("summary"))
            } else {
                format!(
                    "users {}\nmovies {}\nratings {}\nrated_movies {}\nusers_without_ratings {}\n",
                    s.users, s.movies, s.ratings, s.rated_movies, s.users_without_ratings
                )
            };
            emit(stdout, &text)
        }
        Command::Enrich { movies, enrich, out } => {
            let movies = demoinfer_core::dataset::parse_movies(movies)?;
            let map = enrichment(enrich, &movies)?;
            let merged = merge_meta(&movies, &map);
            if let Some(dir) = out {
                create_dir(dir)?;
                write_enrichment(&map, dir.join("enrichment.csv"))?;
            }
            let v = json!({
                "movies": movies.len(),
                "enriched": map.len(),
                "coverage": merged.coverage(),
                "synthetic": enrich.enrichment.is_none(),
            });
            let text = if cli.json {
                pretty(&v)
            } else {
                format!(
                    "movies {}\nenriched {}\ncoverage {:.4}\n",
                    movies.len(),
                    map.len(),
                    merged.coverage()
                )
            };
            emit(stdout, &text)
        }
        Command::Popularity {
            data,
            pop,
            min_count,
            out,
        } => {
            let ds = load(data)?;
            let index = match min_count {
                Some(n) => build_index_by_threshold(&ds, *n)?,
                None => popularity(&ds, pop)?,
            };
            if let Some(dir) = out {
                create_dir(dir)?;
                write_histogram_csv(&frequency_histogram(&ds), dir.join("fig1_histogram.csv"))?;
                write_portion_csv(&popular_portion_by_rating_order(&ds, &index), dir.join("fig2_portion.csv"))?;
                let mut list = String::from("rank,movie_id,count\n");
                for (i, id) in index.ranked_movie_ids.iter().enumerate() {
                    if index.is_popular(*id) {
                        list.push_str(&format!("{},{},{}\n", i + 1, id, index.counts[id]));
                    }
                }
                write_file(&dir.join("popular.csv"), &list)?;
            }
            let s = index.summary();
            let text = if cli.json {
                pretty(&serde_json::to_value(s).expect("summary"))
            } else {
                format!(
                    "metric {}\nalpha {}\nrated_movies {}\npopular_movies {}\npopular_ratings {}\ntotal_ratings {}\ncoverage {:.4}\n",
                    s.metric, s.alpha, s.rated_movies, s.popular_movies, s.popular_ratings, s.total_ratings, s.coverage
                )
            };
            emit(stdout, &text)
        }
        Command::Features {
            data,
            enrich,
            pop,
            strategy,
            out,
        } => {
            let ds = load(data)?;
            let map = enrichment(enrich, ds.movies())?;
            let meta = merge_meta(ds.movies(), &map).meta;
            let index = popularity(&ds, pop)?;
            let set = build_strategy::<f64>(&ds, &meta, *strategy, &index)?;
            create_dir(out)?;
            let path = out.join(format!("features_{strategy}.csv"));
            export_features(&set.vectors, &path)?;
            let v = json!({
                "strategy": strategy,
                "users": set.vectors.len(),
                "support_ratings": set.support_total(),
                "dropped_users": set.dropped_users.len(),
                "dropped_ratings": set.dropped_ratings,
                "excluded_ratings": set.excluded_ratings,
                "path": path,
            });
            let text = if cli.json {
                pretty(&v)
            } else {
                format!(
                    "strategy {strategy}\nusers {}\nsupport_ratings {}\ndropped_users {}\nwrote {}\n",
                    set.vectors.len(),
                    set.support_total(),
                    set.dropped_users.len(),
                    path.display()
                )
            };
            emit(stdout, &text)
        }
        Command::Train { model, classifier, out } => {
            let (train, _) = split_features(model)?;
            let spec = ClassifierSpec {
                hyperparams: Hyperparams::defaults(*classifier),
                seed: model.seed,
            };
            let dim = if model.genre_only { GENRE_COUNT } else { FEATURE_DIM };
            let trained = train_prefix(&spec, &train, model.target, dim)?;
            create_dir(out)?;
            let path = out.join("model.json");
            write_file(&path, &trained.to_json())?;
            let v = json!({
                "classifier": classifier,
                "target": model.target,
                "train_users": train.len(),
                "classes": trained.class_labels,
                "path": path,
            });
            let text = if cli.json {
                pretty(&v)
            } else {
                format!(
                    "classifier {classifier}\ntarget {}\ntrain_users {}\nwrote {}\n",
                    model.target,
                    train.len(),
                    path.display()
                )
            };
            emit(stdout, &text)
        }
        Command::Evaluate { model, model_path, out } => {
            let text = fs::read_to_string(model_path).map_err(|e| Error::io(model_path, e))?;
            let trained = TrainedModelF64::from_json(&text)?;
            let (_, test) = split_features(model)?;
            let report = evaluate(&trained, &test, model.target)?;
            if let Some(dir) = out {
                create_dir(dir)?;
                write_file(&dir.join("report.json"), &report_to_json(&report))?;
            }
            let text = if cli.json {
                let mut s = report_to_json(&report);
                s.push('\n');
                s
            } else {
                report_text(&report)
            };
            emit(stdout, &text)
        }
        Command::Grid { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if !seed.is_empty() {
                cfg.seeds = seed.clone();
            }
            if let Some(dir) = out {
                cfg.output_dir = dir.clone();
            }
            let grid = run_grid(&cfg, cli.threads)?;
            let text = if cli.json {
                grid.to_json()
            } else {
                render_tables(&grid, TableMetric::Accuracy)
                    .iter()
                    .map(|t| t.to_text())
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            emit(stdout, &text)
        }
        Command::Report {
            grid,
            metric,
            target,
            csv,
        } => {
            let grid = ResultGrid::load(grid)?;
            let tables = match target {
                Some(t) => vec![render_table(&grid, *metric, *t)],
                None => render_tables(&grid, *metric),
            };
            let text = tables
                .iter()
                .map(|t| if *csv { t.to_csv() } else { t.to_text() })
                .collect::<Vec<_>>()
                .join("\n");
            emit(stdout, &text)
        }
    }
}

fn split_features(args: &ModelArgs) -> Res<(Vec<FeatureVectorF64>, Vec<FeatureVectorF64>)> {
    let vectors: Vec<FeatureVectorF64> = import_features(&args.features)?;
    if vectors.is_empty() {
        return Err(Error::validation("feature file has no rows"));
    }
    split(&vectors, args.target, args.split_ratio, args.seed)
}

fn evaluate(model: &TrainedModelF64, test: &[FeatureVectorF64], target: Target) -> Res<EvalReport<f64>> {
    let predicted = model.predict_vectors(test)?;
    let actual: Vec<&str> = test.iter().map(|v| v.labels.label(target)).collect();
    let cm = confusion(&actual, &predicted, target.class_labels())?;
    metrics(&cm)
}

fn report_text(r: &EvalReport<f64>) -> String {
    let mut s = format!(
        "accuracy {:.4}\nweighted_precision {:.4}\nweighted_recall {:.4}\nweighted_f1 {:.4}\n",
        r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1
    );
    s.push_str("class precision recall f1 weight\n");
    for (i, label) in r.confusion.class_labels.iter().enumerate() {
        let m = &r.per_class[i];
        s.push_str(&format!(
            "{label} {:.4} {:.4} {:.4} {:.4}\n",
            m.precision, m.recall, m.f1, r.class_weights[i]
        ));
    }
    s
}
