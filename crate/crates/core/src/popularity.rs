//! Item popularity: the ranked movie list, the α-popular head and the
//! long-tail diagnostics (rank/frequency curve and the share of each
//! user's k-th rating that lands on a popular movie).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// How movies are ordered before taking the popular head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityMetric {
    /// Number of ratings received.
    #[default]
    Count,
    /// Mean rating value.
    MeanScore,
}

impl PopularityMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            PopularityMetric::Count => "count",
            PopularityMetric::MeanScore => "mean_score",
        }
    }
}

impl FromStr for PopularityMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "count" => Ok(PopularityMetric::Count),
            "mean_score" => Ok(PopularityMetric::MeanScore),
            other => Err(format!("unknown popularity metric {other:?}")),
        }
    }
}

impl fmt::Display for PopularityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityIndex {
    /// Rated movies, most popular first; ties by ascending movie id.
    pub ranked_movie_ids: Vec<u32>,
    pub counts: BTreeMap<u32, usize>,
    pub alpha: f64,
    pub metric: PopularityMetric,
    pub popular_set: BTreeSet<u32>,
}

impl PopularityIndex {
    pub fn is_popular(&self, movie_id: u32) -> bool {
        self.popular_set.contains(&movie_id)
    }

    pub fn total_ratings(&self) -> usize {
        self.counts.values().sum()
    }

    /// Ratings landing on popular movies.
    pub fn popular_ratings(&self) -> usize {
        self.popular_set.iter().map(|id| self.counts[id]).sum()
    }

    /// Share of all ratings that land on popular movies.
    pub fn coverage(&self) -> f64 {
        let total = self.total_ratings();
        if total == 0 {
            0.0
        } else {
            self.popular_ratings() as f64 / total as f64
        }
    }

    pub fn summary(&self) -> PopularitySummary {
        PopularitySummary {
            metric: self.metric,
            alpha: self.alpha,
            rated_movies: self.ranked_movie_ids.len(),
            popular_movies: self.popular_set.len(),
            popular_ratings: self.popular_ratings(),
            total_ratings: self.total_ratings(),
            coverage: self.coverage(),
            min_popular_count: self.popular_set.iter().map(|id| self.counts[id]).min(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularitySummary {
    pub metric: PopularityMetric,
    pub alpha: f64,
    pub rated_movies: usize,
    pub popular_movies: usize,
    pub popular_ratings: usize,
    pub total_ratings: usize,
    pub coverage: f64,
    pub min_popular_count: Option<usize>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("alpha must be in (0, 1], got {alpha}")))
    }
}

/// Rated movies in popularity order. For `MeanScore` the means are compared
/// exactly via cross-multiplied integer sums.
fn rank(dataset: &Dataset, metric: PopularityMetric) -> (Vec<u32>, BTreeMap<u32, usize>) {
    let mut stats: BTreeMap<u32, (usize, u64)> = BTreeMap::new();
    for r in dataset.ratings() {
        let e = stats.entry(r.movie_id).or_insert((0, 0));
        e.0 += 1;
        e.1 += u64::from(r.rating);
    }
    let mut ranked: Vec<u32> = stats.keys().copied().collect();
    ranked.sort_by(|a, b| {
        let (ca, sa) = stats[a];
        let (cb, sb) = stats[b];
        let by_metric = match metric {
            PopularityMetric::Count => cb.cmp(&ca),
            PopularityMetric::MeanScore => (u128::from(sb) * ca as u128).cmp(&(u128::from(sa) * cb as u128)),
        };
        by_metric.then(a.cmp(b))
    });
    let counts = stats.into_iter().map(|(id, (c, _))| (id, c)).collect();
    (ranked, counts)
}

/// Popular set = first `ceil(alpha * rated movies)` movies of the ranking.
pub fn build_index(dataset: &Dataset, alpha: f64, metric: PopularityMetric) -> Result<PopularityIndex> {
    check_alpha(alpha)?;
    let (ranked, counts) = rank(dataset, metric);
    if ranked.is_empty() {
        return Err(Error::validation("no rated movies"));
    }
    // Guard against 0.05 * 3706 = 185.30000000000001 style rounding.
    let size = ((alpha * ranked.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let size = size.min(ranked.len());
    let popular_set = ranked[..size].iter().copied().collect();
    Ok(PopularityIndex {
        ranked_movie_ids: ranked,
        counts,
        alpha,
        metric,
        popular_set,
    })
}

/// Popular set = movies with at least `min_count` ratings. `alpha` is set to
/// the resulting fraction of rated movies.
pub fn build_index_by_threshold(dataset: &Dataset, min_count: usize) -> Result<PopularityIndex> {
    if min_count < 1 {
        return Err(Error::validation("min_count must be at least 1"));
    }
    let (ranked, counts) = rank(dataset, PopularityMetric::Count);
    let popular_set: BTreeSet<u32> = ranked
        .iter()
        .copied()
        .filter(|id| counts[id] >= min_count)
        .collect();
    if popular_set.is_empty() {
        log::warn!("no movie has {min_count} or more ratings; popular set is empty");
    }
    let alpha = if ranked.is_empty() {
        0.0
    } else {
        popular_set.len() as f64 / ranked.len() as f64
    };
    Ok(PopularityIndex {
        ranked_movie_ids: ranked,
        counts,
        alpha,
        metric: PopularityMetric::Count,
        popular_set,
    })
}

/// `(rank, count)` pairs, rank 1-based, counts non-increasing.
pub fn frequency_histogram(dataset: &Dataset) -> Vec<(usize, usize)> {
    let mut counts: Vec<usize> = dataset.rating_counts().into_values().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.into_iter().enumerate().map(|(i, c)| (i + 1, c)).collect()
}

/// For each chronological position `k` (1-based), the fraction of users
/// with at least `k` ratings whose k-th rating is on a popular movie.
/// Ratings of one user are ordered by timestamp, ties by input order.
pub fn popular_portion_by_rating_order(dataset: &Dataset, index: &PopularityIndex) -> Vec<(usize, f64)> {
    let ratings = dataset.ratings();
    let mut hits: Vec<usize> = Vec::new();
    let mut reach: Vec<usize> = Vec::new();
    for (_, mut idx) in dataset.ratings_by_user() {
        idx.sort_by(|&a, &b| match ratings[a].timestamp.cmp(&ratings[b].timestamp) {
            Ordering::Equal => a.cmp(&b),
            o => o,
        });
        if idx.len() > reach.len() {
            reach.resize(idx.len(), 0);
            hits.resize(idx.len(), 0);
        }
        for (k, &i) in idx.iter().enumerate() {
            reach[k] += 1;
            if index.is_popular(ratings[i].movie_id) {
                hits[k] += 1;
            }
        }
    }
    hits.into_iter()
        .zip(reach)
        .enumerate()
        .map(|(k, (h, n))| (k + 1, h as f64 / n as f64))
        .collect()
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_histogram_csv(hist: &[(usize, usize)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("rank,count\n");
    for (rank, count) in hist {
        out.push_str(&format!("{rank},{count}\n"));
    }
    create(path)?
        .write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn write_portion_csv(portion: &[(usize, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("k,portion\n");
    for (k, p) in portion {
        out.push_str(&format!("{k},{p}\n"));
    }
    create(path)?
        .write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
