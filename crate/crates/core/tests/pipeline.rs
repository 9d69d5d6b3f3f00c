use demoinfer_core::classifiers::{train, ClassifierKind, ClassifierSpec, TrainedModel};
use demoinfer_core::dataset::{load_movielens_dir, parse_ratings_lenient, Dataset};
use demoinfer_core::enrichment::{merge_meta, synth_enrichment, MovieMeta};
use demoinfer_core::evaluation::{confusion, metrics, split};
use demoinfer_core::features::{build_strategy, features_from_csv, features_to_csv, FeatureSet, Strategy, Target};
use demoinfer_core::fixtures::{write_movielens, SynthConfig};
use demoinfer_core::popularity::{build_index, PopularityMetric};
use demoinfer_core::{EvalReportExact, FeatureVectorF64, TrainedModelF64};

fn setup(seed: u64) -> (Dataset, Vec<MovieMeta>) {
    let ds = SynthConfig::small(seed).generate().dataset().unwrap();
    let meta = merge_meta(ds.movies(), &synth_enrichment(ds.movies(), seed)).meta;
    (ds, meta)
}

fn features<F: demoinfer_core::scalar::Real>(ds: &Dataset, meta: &[MovieMeta], s: Strategy) -> FeatureSet<F> {
    let index = build_index(ds, 0.05, PopularityMetric::Count).unwrap();
    build_strategy(ds, meta, s, &index).unwrap()
}

fn small_spec(kind: ClassifierKind, seed: u64) -> ClassifierSpec {
    let mut spec = ClassifierSpec::new(kind, seed);
    match &mut spec.hyperparams {
        demoinfer_core::classifiers::Hyperparams::Rf(p) => p.n_trees = 20,
        demoinfer_core::classifiers::Hyperparams::Mlp(p) => p.epochs = 30,
        demoinfer_core::classifiers::Hyperparams::Xgb(p) => p.rounds = 30,
        _ => {}
    }
    spec
}

#[test]
fn canonical_round_trip_preserves_dataset() {
    let (ds, _) = setup(1);
    let dir = tempfile::tempdir().unwrap();
    ds.write_canonical(dir.path()).unwrap();
    assert_eq!(Dataset::read_canonical(dir.path()).unwrap(), ds);
}

#[test]
fn lenient_parsing_accounts_for_every_line() {
    let text = b"1::2::5::100\nbad line\n1::3::9::100\n\n2::2::4::7\n";
    let parsed = parse_ratings_lenient(text);
    assert_eq!(parsed.lines, 4);
    assert_eq!(parsed.records.len() + parsed.rejected.len(), parsed.lines);
    assert_eq!(parsed.records.len(), 2);
}

#[test]
fn fixture_files_load_like_the_generator() {
    let data = SynthConfig::small(4).generate();
    let dir = tempfile::tempdir().unwrap();
    write_movielens(dir.path(), &data).unwrap();
    assert_eq!(load_movielens_dir(dir.path()).unwrap(), data.dataset().unwrap());
}

#[test]
fn single_and_double_precision_features_agree() {
    let (ds, meta) = setup(2);
    for s in Strategy::ALL {
        let a = features::<f64>(&ds, &meta, s);
        let b = features::<f32>(&ds, &meta, s);
        assert_eq!(a.vectors.len(), b.vectors.len());
        for (x, y) in a.vectors.iter().zip(&b.vectors) {
            for (p, q) in x.values.iter().zip(&y.values) {
                assert!((p - f64::from(*q)).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn feature_csv_round_trip() {
    let (ds, meta) = setup(3);
    let set = features::<f64>(&ds, &meta, Strategy::Liked);
    let text = features_to_csv(&set.vectors);
    let back: Vec<FeatureVectorF64> = features_from_csv(&text).unwrap();
    assert_eq!(back, set.vectors);
}

fn fit_in_pool(
    threads: usize,
    kind: ClassifierKind,
    train_set: &[FeatureVectorF64],
    test_set: &[FeatureVectorF64],
) -> (String, Vec<String>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let m = train(&small_spec(kind, 11), train_set, Target::Age3).unwrap();
        let p = m.predict_vectors(test_set).unwrap().into_iter().map(String::from).collect();
        (m.to_json(), p)
    })
}

#[test]
fn models_do_not_depend_on_pool_size() {
    let (ds, meta) = setup(5);
    let set = features::<f64>(&ds, &meta, Strategy::AllItems);
    let (tr, te) = split(&set.vectors, Target::Age3, 0.8, 42).unwrap();
    for kind in ClassifierKind::ALL {
        let a = fit_in_pool(1, kind, &tr, &te);
        let b = fit_in_pool(4, kind, &tr, &te);
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn saved_models_predict_identically() {
    let (ds, meta) = setup(6);
    let set = features::<f64>(&ds, &meta, Strategy::AlphaPopular);
    let (tr, te) = split(&set.vectors, Target::Gender, 0.8, 1).unwrap();
    for kind in ClassifierKind::ALL {
        let m = train(&small_spec(kind, 3), &tr, Target::Gender).unwrap();
        let back = TrainedModelF64::from_json(&m.to_json()).unwrap();
        assert_eq!(m.predict_vectors(&te).unwrap(), back.predict_vectors(&te).unwrap());
        assert!(TrainedModel::<f32>::from_json(&m.to_json()).is_err());
    }
}

#[test]
fn exact_and_float_reports_agree() {
    let (ds, meta) = setup(8);
    let set = features::<f64>(&ds, &meta, Strategy::AllItems);
    let (tr, te) = split(&set.vectors, Target::Age7, 0.75, 9).unwrap();
    let m = train(&small_spec(ClassifierKind::Nb, 0), &tr, Target::Age7).unwrap();
    let predicted = m.predict_vectors(&te).unwrap();
    let actual: Vec<&str> = te.iter().map(|v| v.labels.label(Target::Age7)).collect();
    let cm = confusion(&actual, &predicted, Target::Age7.class_labels()).unwrap();
    assert_eq!(cm.total() as usize, te.len());
    let exact: EvalReportExact = metrics(&cm).unwrap();
    let float = metrics::<f64>(&cm).unwrap();
    let to_f = |r: demoinfer_core::Exact| *r.numer() as f64 / *r.denom() as f64;
    assert!((to_f(exact.accuracy) - float.accuracy).abs() < 1e-12);
    assert!((to_f(exact.weighted_f1) - float.weighted_f1).abs() < 1e-12);
    assert!((to_f(exact.weighted_precision) - float.weighted_precision).abs() < 1e-12);
}
