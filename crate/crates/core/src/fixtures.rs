//! Seeded synthetic data in MovieLens-1M layout.
//!
//! Movie popularity follows a Zipf-like curve so the long tail exists, and
//! each user's genre taste is shifted by gender and age so the genre
//! features carry real demographic signal.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    assemble_dataset, AgeCode, Dataset, Gender, GenreFlags, MovieRecord, RatingEvent, UserRecord, AGE_CODES,
    GENRES, GENRE_COUNT,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub movies: usize,
    pub min_ratings: usize,
    pub max_ratings: usize,
    /// Size of the demographic taste shift; 0 gives labels unrelated to
    /// ratings.
    pub signal: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Three users, a handful of movies.
    pub fn tiny(seed: u64) -> Self {
        SynthConfig {
            users: 3,
            movies: 12,
            min_ratings: 3,
            max_ratings: 6,
            signal: 1.0,
            seed,
        }
    }

    pub fn small(seed: u64) -> Self {
        SynthConfig {
            users: 240,
            movies: 300,
            min_ratings: 20,
            max_ratings: 60,
            signal: 1.5,
            seed,
        }
    }

    pub fn generate(&self) -> SynthData {
        generate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub users: Vec<UserRecord>,
    pub movies: Vec<MovieRecord>,
    pub ratings: Vec<RatingEvent>,
}

impl SynthData {
    pub fn dataset(&self) -> Result<Dataset> {
        assemble_dataset(self.users.clone(), self.movies.clone(), self.ratings.clone())
    }
}

fn genre(name: &str) -> usize {
    GENRES.iter().position(|g| *g == name).expect("known genre")
}

/// Additive taste for each genre given the demographics.
fn taste(gender: Gender, age: u8, signal: f64, rng: &mut ChaCha8Rng) -> [f64; GENRE_COUNT] {
    let mut t = [0.0; GENRE_COUNT];
    for v in t.iter_mut() {
        *v = rng.gen_range(-0.3..0.3);
    }
    let boys = ["Action", "Sci-Fi", "War", "Thriller", "Adventure"];
    let girls = ["Romance", "Drama", "Musical", "Children's", "Comedy"];
    let (up, down) = match gender {
        Gender::M => (boys, girls),
        Gender::F => (girls, boys),
    };
    for g in up {
        t[genre(g)] += signal;
    }
    for g in down {
        t[genre(g)] -= signal / 2.0;
    }
    // 0 for the youngest code, 1 for the oldest
    let old = AGE_CODES.iter().position(|&c| c == age).expect("valid code") as f64 / 6.0;
    for g in ["Animation", "Children's", "Horror", "Comedy"] {
        t[genre(g)] += signal * (0.5 - old);
    }
    for g in ["Film-Noir", "Western", "Documentary", "War", "Drama"] {
        t[genre(g)] += signal * (old - 0.5);
    }
    t
}

fn generate(cfg: &SynthConfig) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let movies: Vec<MovieRecord> = (1..=cfg.movies as u32)
        .map(|id| {
            let n = rng.gen_range(1..=3);
            let mut flags = [false; GENRE_COUNT];
            for g in rand::seq::index::sample(&mut rng, GENRE_COUNT, n) {
                flags[g] = true;
            }
            MovieRecord {
                movie_id: id,
                title: format!("Movie {id} ({})", 1930 + id % 70),
                genres: GenreFlags(flags),
            }
        })
        .collect();

    let mut rank: Vec<usize> = (0..cfg.movies).collect();
    rank.shuffle(&mut rng);
    let popularity: Vec<f64> = rank.iter().map(|&r| 1.0 / (r as f64 + 1.0).powf(0.9)).collect();

    let age_weights = [2.0, 18.0, 35.0, 20.0, 9.0, 8.0, 6.0];
    let mut users = Vec::with_capacity(cfg.users);
    let mut ratings = Vec::new();
    for uid in 1..=cfg.users as u32 {
        let gender = if rng.gen_bool(0.7) { Gender::M } else { Gender::F };
        let age = {
            let total: f64 = age_weights.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            let mut pick = AGE_CODES[6];
            for (code, w) in AGE_CODES.iter().zip(age_weights) {
                if x < w {
                    pick = *code;
                    break;
                }
                x -= w;
            }
            pick
        };
        users.push(UserRecord {
            user_id: uid,
            gender,
            age: AgeCode::new(age).expect("valid code"),
            occupation: rng.gen_range(0..=20),
            zip: format!("{:05}", rng.gen_range(0..100_000)),
        });

        let t = taste(gender, age, cfg.signal, &mut rng);
        let affinity: Vec<f64> = movies
            .iter()
            .map(|m| {
                let (sum, n) = m
                    .genres
                    .0
                    .iter()
                    .zip(t)
                    .filter(|(on, _)| **on)
                    .fold((0.0, 0.0), |(s, n), (_, v)| (s + v, n + 1.0));
                sum / n
            })
            .collect();
        let count = rng.gen_range(cfg.min_ratings..=cfg.max_ratings).min(cfg.movies);
        let ids: Vec<usize> = (0..cfg.movies).collect();
        let chosen: Vec<usize> = ids
            .choose_multiple_weighted(&mut rng, count, |&j| popularity[j] * affinity[j].exp())
            .expect("positive weights")
            .copied()
            .collect();
        let mut ts: i64 = 956_703_932 + rng.gen_range(0..20_000_000);
        for j in chosen {
            ts += rng.gen_range(0..5_000);
            let score = 3.2 + affinity[j] + rng.gen_range(-1.2..1.2);
            ratings.push(RatingEvent {
                user_id: uid,
                movie_id: movies[j].movie_id,
                rating: score.round().clamp(1.0, 5.0) as u8,
                timestamp: ts,
            });
        }
    }
    SynthData {
        users,
        movies,
        ratings,
    }
}

/// Writes `ratings.dat`, `users.dat` and `movies.dat` in `::` format.
pub fn write_movielens(dir: impl AsRef<Path>, data: &SynthData) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut r = String::new();
    for e in &data.ratings {
        let _ = writeln!(r, "{}::{}::{}::{}", e.user_id, e.movie_id, e.rating, e.timestamp);
    }
    let mut u = String::new();
    for x in &data.users {
        let _ = writeln!(u, "{}::{}::{}::{}::{}", x.user_id, x.gender, x.age, x.occupation, x.zip);
    }
    let mut m = String::new();
    for x in &data.movies {
        let genres: Vec<&str> = x.genres.names().collect();
        let _ = writeln!(m, "{}::{}::{}", x.movie_id, x.title, genres.join("|"));
    }
    for (name, text) in [("ratings.dat", r), ("users.dat", u), ("movies.dat", m)] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
