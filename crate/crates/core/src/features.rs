//! Per-user feature vectors.
//!
//! Every vector has 29 slots: 18 genre fractions, 6 MPAA fractions and 5
//! parental-guide averages, each averaged over a strategy-specific subset
//! of the user's rated movies:
//!
//! * `all`: every rated movie (S_u);
//! * `popular`: rated movies in the popular set (S_u ∩ P_α);
//! * `liked`: movies rated at or above the user's own mean rating (L_u).
//!
//! The age category is carried in [`LabelSet`] and never fed to models.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AgeBand, AgeCode, Dataset, Gender, AGE_CODES, GENRE_COUNT};
use crate::enrichment::{MovieMeta, MPAA_COUNT, PARENTAL_COUNT};
use crate::error::{Error, Result};
use crate::popularity::PopularityIndex;
use crate::scalar::Real;

pub const FEATURE_DIM: usize = GENRE_COUNT + MPAA_COUNT + PARENTAL_COUNT;
pub const MPAA_OFFSET: usize = GENRE_COUNT;
pub const PARENTAL_OFFSET: usize = GENRE_COUNT + MPAA_COUNT;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "genre_action",
    "genre_adventure",
    "genre_animation",
    "genre_childrens",
    "genre_comedy",
    "genre_crime",
    "genre_documentary",
    "genre_drama",
    "genre_fantasy",
    "genre_film_noir",
    "genre_horror",
    "genre_musical",
    "genre_mystery",
    "genre_romance",
    "genre_sci_fi",
    "genre_thriller",
    "genre_war",
    "genre_western",
    "mpaa_g",
    "mpaa_pg",
    "mpaa_pg13",
    "mpaa_r",
    "mpaa_nc17",
    "mpaa_unrated",
    "pg_sex",
    "pg_violence",
    "pg_profanity",
    "pg_alcohol",
    "pg_frightening",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "all")]
    AllItems,
    #[serde(rename = "popular")]
    AlphaPopular,
    #[serde(rename = "liked")]
    Liked,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::AllItems, Strategy::AlphaPopular, Strategy::Liked];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::AllItems => "all",
            Strategy::AlphaPopular => "popular",
            Strategy::Liked => "liked",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected all, popular or liked)"))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a classifier is asked to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Gender,
    Age7,
    Age3,
}

const AGE7_LABELS: [&str; 7] = ["1", "18", "25", "35", "45", "50", "56"];

impl Target {
    pub const ALL: [Target; 3] = [Target::Gender, Target::Age7, Target::Age3];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Gender => "gender",
            Target::Age7 => "age7",
            Target::Age3 => "age3",
        }
    }

    /// Canonical class order for this target.
    pub fn class_labels(self) -> &'static [&'static str] {
        match self {
            Target::Gender => &["F", "M"],
            Target::Age7 => &AGE7_LABELS,
            Target::Age3 => &["young", "adult", "old"],
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Target::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown target {s:?} (expected gender, age7 or age3)"))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub gender: Gender,
    pub age7: AgeCode,
    pub age3: AgeBand,
}

impl LabelSet {
    pub fn new(gender: Gender, age7: AgeCode) -> Self {
        LabelSet {
            gender,
            age7,
            age3: age7.band(),
        }
    }

    pub fn label(&self, target: Target) -> &'static str {
        target.class_labels()[self.class_index(target)]
    }

    /// Position of this sample's label in [`Target::class_labels`].
    pub fn class_index(&self, target: Target) -> usize {
        match target {
            Target::Gender => self.gender as usize,
            Target::Age7 => AGE_CODES
                .iter()
                .position(|&c| c == self.age7.get())
                .expect("validated age code"),
            Target::Age3 => self.age3 as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct FeatureVector<F> {
    pub user_id: u32,
    pub strategy: Strategy,
    pub values: [F; FEATURE_DIM],
    /// Number of ratings averaged into `values`.
    pub support_count: usize,
    pub labels: LabelSet,
}

impl<F: Real> FeatureVector<F> {
    pub fn genres(&self) -> &[F] {
        &self.values[..MPAA_OFFSET]
    }

    pub fn mpaa(&self) -> &[F] {
        &self.values[MPAA_OFFSET..PARENTAL_OFFSET]
    }

    pub fn parental(&self) -> &[F] {
        &self.values[PARENTAL_OFFSET..]
    }
}

/// Vectors for one strategy plus the users that could not be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<F> {
    pub strategy: Strategy,
    /// Ascending user id.
    pub vectors: Vec<FeatureVector<F>>,
    /// Users whose selected subset was empty.
    pub dropped_users: Vec<u32>,
    /// Ratings of retained users that fell outside the selected subsets.
    pub excluded_ratings: usize,
    /// All ratings of dropped users.
    pub dropped_ratings: usize,
}

impl<F> FeatureSet<F> {
    pub fn support_total(&self) -> usize {
        self.vectors.iter().map(|v| v.support_count).sum()
    }
}

/// Movie attributes converted once to the working scalar type.
struct MetaTable<F> {
    rows: BTreeMap<u32, [F; FEATURE_DIM]>,
}

impl<F: Real> MetaTable<F> {
    fn new(meta: &[MovieMeta]) -> Self {
        let rows = meta
            .iter()
            .map(|m| {
                let mut row = [F::zero(); FEATURE_DIM];
                for (slot, &on) in row.iter_mut().zip(m.genres.0.iter()) {
                    if on {
                        *slot = F::one();
                    }
                }
                row[MPAA_OFFSET + m.mpaa.slot()] = F::one();
                for (j, &p) in m.parental.iter().enumerate() {
                    row[PARENTAL_OFFSET + j] = F::lit(p);
                }
                (m.movie_id, row)
            })
            .collect();
        MetaTable { rows }
    }
}

fn build<F: Real>(
    dataset: &Dataset,
    meta: &[MovieMeta],
    strategy: Strategy,
    keep: impl Fn(&[usize]) -> Vec<usize>,
) -> Result<FeatureSet<F>> {
    let table = MetaTable::<F>::new(meta);
    let ratings = dataset.ratings();
    let mut set = FeatureSet {
        strategy,
        vectors: Vec::new(),
        dropped_users: Vec::new(),
        excluded_ratings: 0,
        dropped_ratings: 0,
    };
    for (user_id, s_u) in dataset.ratings_by_user() {
        let subset = keep(&s_u);
        if subset.is_empty() {
            set.dropped_users.push(user_id);
            set.dropped_ratings += s_u.len();
            continue;
        }
        set.excluded_ratings += s_u.len() - subset.len();
        let mut sums = [F::zero(); FEATURE_DIM];
        for &i in &subset {
            let movie_id = ratings[i].movie_id;
            let row = table.rows.get(&movie_id).ok_or_else(|| {
                Error::validation(format!("no movie metadata for rated movie {movie_id}"))
            })?;
            for (s, &x) in sums.iter_mut().zip(row) {
                *s = *s + x;
            }
        }
        let n = F::from_count(subset.len());
        let user = dataset.user(user_id).expect("assembled dataset has every rating's user");
        set.vectors.push(FeatureVector {
            user_id,
            strategy,
            values: sums.map(|s| s / n),
            support_count: subset.len(),
            labels: LabelSet::new(user.gender, user.age),
        });
    }
    let skipped = dataset.summary().users_without_ratings;
    if skipped > 0 {
        log::warn!("{strategy}: {skipped} users without ratings skipped");
    }
    if !set.dropped_users.is_empty() {
        log::warn!(
            "{strategy}: {} users dropped (empty support, {} ratings)",
            set.dropped_users.len(),
            set.dropped_ratings
        );
    }
    Ok(set)
}

/// X(u): averages over every movie the user rated.
pub fn build_all_items<F: Real>(dataset: &Dataset, meta: &[MovieMeta]) -> Result<FeatureSet<F>> {
    build(dataset, meta, Strategy::AllItems, |s_u| s_u.to_vec())
}

/// Y(u): averages over the user's rated movies that are in the popular set.
/// Users with no popular ratings are dropped.
pub fn build_alpha_popular<F: Real>(
    dataset: &Dataset,
    meta: &[MovieMeta],
    index: &PopularityIndex,
) -> Result<FeatureSet<F>> {
    let ratings = dataset.ratings();
    build(dataset, meta, Strategy::AlphaPopular, |s_u| {
        s_u.iter()
            .copied()
            .filter(|&i| index.is_popular(ratings[i].movie_id))
            .collect()
    })
}

/// Ratings of one user that are at or above that user's mean rating.
/// Compared exactly as `r * |S_u| >= sum(r)`.
pub fn liked_subset(dataset: &Dataset, s_u: &[usize]) -> Vec<usize> {
    let ratings = dataset.ratings();
    let total: u64 = s_u.iter().map(|&i| u64::from(ratings[i].rating)).sum();
    let n = s_u.len() as u64;
    s_u.iter()
        .copied()
        .filter(|&i| u64::from(ratings[i].rating) * n >= total)
        .collect()
}

/// Z(u): averages over the liked set L_u.
pub fn build_liked<F: Real>(dataset: &Dataset, meta: &[MovieMeta]) -> Result<FeatureSet<F>> {
    build(dataset, meta, Strategy::Liked, |s_u| liked_subset(dataset, s_u))
}

pub fn build_strategy<F: Real>(
    dataset: &Dataset,
    meta: &[MovieMeta],
    strategy: Strategy,
    index: &PopularityIndex,
) -> Result<FeatureSet<F>> {
    match strategy {
        Strategy::AllItems => build_all_items(dataset, meta),
        Strategy::AlphaPopular => build_alpha_popular(dataset, meta, index),
        Strategy::Liked => build_liked(dataset, meta),
    }
}

pub fn csv_header() -> Vec<&'static str> {
    let mut h = vec!["user_id", "strategy"];
    h.extend(FEATURE_NAMES);
    h.extend(["support_count", "gender", "age7", "age3"]);
    h
}

/// Writes vectors sorted by `(user_id, strategy)`. Values use the shortest
/// representation that parses back to the same number.
pub fn export_features<F: Real>(vectors: &[FeatureVector<F>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, features_to_csv(vectors)).map_err(|e| Error::io(path, e))
}

pub fn features_to_csv<F: Real>(vectors: &[FeatureVector<F>]) -> String {
    let mut sorted: Vec<&FeatureVector<F>> = vectors.iter().collect();
    sorted.sort_by_key(|v| (v.user_id, v.strategy));
    let mut out = csv_header().join(",");
    out.push('\n');
    for v in sorted {
        let mut row = vec![v.user_id.to_string(), v.strategy.to_string()];
        row.extend(v.values.iter().map(|x| x.to_string()));
        row.push(v.support_count.to_string());
        row.push(v.labels.gender.to_string());
        row.push(v.labels.age7.to_string());
        row.push(v.labels.age3.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn import_features<F: Real>(path: impl AsRef<Path>) -> Result<Vec<FeatureVector<F>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    features_from_csv(&text)
}

pub fn features_from_csv<F: Real>(text: &str) -> Result<Vec<FeatureVector<F>>> {
    let mut lines = text.lines().enumerate();
    let header = csv_header().join(",");
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing or unexpected feature CSV header".into(),
            })
        }
    }
    let width = FEATURE_DIM + 6;
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let line_no = i + 1;
            let bad = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != width {
                return Err(bad(format!("expected {width} columns, found {}", f.len())));
            }
            let mut values = [F::zero(); FEATURE_DIM];
            for (slot, raw) in values.iter_mut().zip(&f[2..2 + FEATURE_DIM]) {
                *slot = raw
                    .parse()
                    .map_err(|_| bad(format!("not a number: {raw:?}")))?;
            }
            let tail = &f[2 + FEATURE_DIM..];
            let age7: u8 = tail[2].parse().map_err(|_| bad(format!("bad age7 {:?}", tail[2])))?;
            let labels = LabelSet::new(
                tail[1].parse().map_err(bad)?,
                AgeCode::new(age7).map_err(bad)?,
            );
            let age3: AgeBand = tail[3].parse().map_err(bad)?;
            if age3 != labels.age3 {
                return Err(bad(format!("age3 {age3} inconsistent with age7 {age7}")));
            }
            Ok(FeatureVector {
                user_id: f[0].parse().map_err(|_| bad(format!("bad user_id {:?}", f[0])))?,
                strategy: f[1].parse().map_err(bad)?,
                values,
                support_count: tail[0]
                    .parse()
                    .map_err(|_| bad(format!("bad support_count {:?}", tail[0])))?,
                labels,
            })
        })
        .collect()
}

/// Row-major matrix of the selected feature slots, plus the class index of
/// each vector under `target`.
pub fn design_matrix<F: Real>(
    vectors: &[FeatureVector<F>],
    target: Target,
    slots: std::ops::Range<usize>,
) -> (ndarray::Array2<F>, Vec<usize>) {
    let width = slots.len();
    let mut x = ndarray::Array2::zeros((vectors.len(), width));
    for (mut row, v) in x.rows_mut().into_iter().zip(vectors) {
        for (dst, &src) in row.iter_mut().zip(&v.values[slots.clone()]) {
            *dst = src;
        }
    }
    let y = vectors.iter().map(|v| v.labels.class_index(target)).collect();
    (x, y)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::{assemble_dataset, GenreFlags, MovieRecord, RatingEvent, UserRecord};
    use crate::enrichment::Mpaa;
    use crate::popularity::{build_index, PopularityMetric};

    pub(crate) fn meta(movie_id: u32, genres: &[&str], mpaa: Mpaa, parental: [f64; 5]) -> MovieMeta {
        MovieMeta {
            movie_id,
            genres: GenreFlags::from_names(genres.iter().copied()).unwrap(),
            mpaa,
            parental,
        }
    }

    fn ds(users: &[(u32, Gender, u8)], metas: &[MovieMeta], ratings: &[(u32, u32, u8)]) -> Dataset {
        let users = users
            .iter()
            .map(|&(user_id, gender, age)| UserRecord {
                user_id,
                gender,
                age: AgeCode::new(age).unwrap(),
                occupation: 0,
                zip: String::new(),
            })
            .collect();
        let movies = metas
            .iter()
            .map(|m| MovieRecord {
                movie_id: m.movie_id,
                title: String::new(),
                genres: m.genres,
            })
            .collect();
        let ratings = ratings
            .iter()
            .enumerate()
            .map(|(t, &(user_id, movie_id, rating))| RatingEvent {
                user_id,
                movie_id,
                rating,
                timestamp: t as i64,
            })
            .collect();
        assemble_dataset(users, movies, ratings).unwrap()
    }

    fn slot(name: &str) -> usize {
        FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn single_movie_user() {
        let m = [meta(1, &["Comedy"], Mpaa::G, [0.0, 1.0, 0.0, 0.0, 2.0])];
        let d = ds(&[(1, Gender::F, 18)], &m, &[(1, 1, 4)]);
        let set = build_all_items::<f64>(&d, &m).unwrap();
        let v = &set.vectors[0];
        let mut expect = [0.0; FEATURE_DIM];
        expect[slot("genre_comedy")] = 1.0;
        expect[slot("mpaa_g")] = 1.0;
        expect[PARENTAL_OFFSET..].copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 2.0]);
        assert_eq!(v.values, expect);
        assert_eq!(v.support_count, 1);
        assert_eq!(v.labels.age3, AgeBand::Young);
    }

    #[test]
    fn two_movie_mean() {
        let m = [
            meta(1, &["Comedy"], Mpaa::G, [0.0; 5]),
            meta(2, &["Drama"], Mpaa::R, [2.0, 0.0, 0.0, 0.0, 0.0]),
        ];
        let d = ds(&[(1, Gender::M, 35)], &m, &[(1, 1, 5), (1, 2, 1)]);
        let v = &build_all_items::<f64>(&d, &m).unwrap().vectors[0];
        assert_eq!(v.values[slot("genre_comedy")], 0.5);
        assert_eq!(v.values[slot("genre_drama")], 0.5);
        assert_eq!(v.values[slot("mpaa_g")], 0.5);
        assert_eq!(v.values[slot("mpaa_r")], 0.5);
        assert_eq!(v.values[slot("pg_sex")], 1.0);

        // liked: mean 3, only the 5-rated comedy qualifies
        let z = &build_liked::<f64>(&d, &m).unwrap().vectors[0];
        assert_eq!(z.support_count, 1);
        assert_eq!(z.values[slot("genre_comedy")], 1.0);
        assert_eq!(z.values[slot("genre_drama")], 0.0);
    }

    #[test]
    fn constant_ratings_make_liked_equal_all() {
        let m = [
            meta(1, &["Comedy"], Mpaa::G, [0.0; 5]),
            meta(2, &["Drama", "War"], Mpaa::Pg13, [1.0, 3.0, 0.0, 0.0, 1.5]),
            meta(3, &["Horror"], Mpaa::R, [0.5; 5]),
        ];
        let d = ds(&[(1, Gender::M, 45), (2, Gender::F, 56)], &m, &[(1, 1, 3), (1, 2, 3), (2, 3, 4), (2, 1, 4)]);
        let x = build_all_items::<f64>(&d, &m).unwrap();
        let mut z = build_liked::<f64>(&d, &m).unwrap();
        for v in &mut z.vectors {
            v.strategy = Strategy::AllItems;
        }
        assert_eq!(x.vectors, z.vectors);
    }

    #[test]
    fn popular_subset_and_drops() {
        // movie 1 rated by both users -> popular at alpha=1/3
        let m = [
            meta(1, &["Comedy"], Mpaa::G, [0.0; 5]),
            meta(2, &["Drama"], Mpaa::R, [0.0; 5]),
            meta(3, &["Horror"], Mpaa::R, [0.0; 5]),
        ];
        let d = ds(
            &[(1, Gender::M, 25), (2, Gender::F, 25), (3, Gender::F, 1)],
            &m,
            &[(1, 1, 3), (2, 1, 4), (2, 2, 5), (3, 3, 2)],
        );
        let idx = build_index(&d, 1.0 / 3.0, PopularityMetric::Count).unwrap();
        let y = build_alpha_popular::<f64>(&d, &m, &idx).unwrap();
        let x = build_all_items::<f64>(&d, &m).unwrap();
        assert_eq!(y.dropped_users, vec![3]);
        assert_eq!(y.dropped_ratings, 1);
        assert_eq!(y.excluded_ratings, 1);
        assert_eq!(y.support_total() + y.excluded_ratings + y.dropped_ratings, 4);
        // user 1 only rated popular movies: identical values
        assert_eq!(y.vectors[0].values, x.vectors[0].values);
        assert_eq!(y.vectors[1].support_count, 1);
    }

    #[test]
    fn missing_meta_is_an_error() {
        let m = [meta(1, &["Comedy"], Mpaa::G, [0.0; 5])];
        let d = ds(&[(1, Gender::F, 18)], &m, &[(1, 1, 4)]);
        assert!(build_all_items::<f64>(&d, &[]).is_err());
    }

    #[test]
    fn csv_roundtrip_and_determinism() {
        let m = [
            meta(1, &["Comedy"], Mpaa::G, [0.0, 1.0, 0.0, 0.0, 2.0]),
            meta(2, &["Drama", "Sci-Fi"], Mpaa::Nc17, [3.0, 0.25, 0.0, 1.0, 2.0]),
            meta(3, &["Western"], Mpaa::Unrated, [0.0; 5]),
        ];
        let d = ds(
            &[(2, Gender::F, 50), (1, Gender::M, 18)],
            &m,
            &[(2, 1, 4), (2, 2, 2), (2, 3, 1), (1, 3, 5), (1, 2, 5)],
        );
        let set = build_all_items::<f64>(&d, &m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        export_features(&set.vectors, &p).unwrap();
        let first = fs::read(&p).unwrap();
        let mut reversed = set.vectors.clone();
        reversed.reverse();
        export_features(&reversed, &p).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        let back = import_features::<f64>(&p).unwrap();
        assert_eq!(back.len(), set.vectors.len());
        for (a, b) in back.iter().zip(&set.vectors) {
            assert_eq!((a.user_id, a.strategy, a.support_count, a.labels), (b.user_id, b.strategy, b.support_count, b.labels));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        assert_eq!(features_to_csv::<f64>(&[]), format!("{}\n", csv_header().join(",")));
    }

    #[test]
    fn label_indices_follow_canonical_order() {
        let l = LabelSet::new(Gender::M, AgeCode::new(45).unwrap());
        assert_eq!(l.label(Target::Gender), "M");
        assert_eq!(l.label(Target::Age7), "45");
        assert_eq!(l.label(Target::Age3), "adult");
        assert_eq!(l.class_index(Target::Age7), 4);
    }
}
