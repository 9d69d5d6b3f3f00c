//! MPAA and parental-guide attributes for movies.
//!
//! The attributes come from a local CSV sidecar:
//!
//! ```text
//! movie_id,mpaa,pg_sex,pg_violence,pg_profanity,pg_alcohol,pg_frightening
//! 1,G,0,1,0,0,1
//! ```
//!
//! `mpaa` is one of `G`, `PG`, `PG-13`, `R`, `NC-17`, `UNRATED`; each `pg_*`
//! score is a real in `[0, 3]` (none=0, mild=1, moderate=2, severe=3 when
//! transcribed from parental-guide pages). Movies without a row default to
//! `UNRATED` with an all-zero parental vector.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{GenreFlags, MovieRecord};
use crate::error::{Error, Result};

pub const MPAA_COUNT: usize = 6;
pub const PARENTAL_COUNT: usize = 5;
pub const PARENTAL_MAX: f64 = 3.0;

pub const ENRICHMENT_HEADER: [&str; 7] = [
    "movie_id",
    "mpaa",
    "pg_sex",
    "pg_violence",
    "pg_profanity",
    "pg_alcohol",
    "pg_frightening",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mpaa {
    #[serde(rename = "G")]
    G,
    #[serde(rename = "PG")]
    Pg,
    #[serde(rename = "PG-13")]
    Pg13,
    #[serde(rename = "R")]
    R,
    #[serde(rename = "NC-17")]
    Nc17,
    #[serde(rename = "UNRATED")]
    Unrated,
}

impl Mpaa {
    /// Slot order of the 6-vector.
    pub const ALL: [Mpaa; MPAA_COUNT] = [Mpaa::G, Mpaa::Pg, Mpaa::Pg13, Mpaa::R, Mpaa::Nc17, Mpaa::Unrated];

    pub fn as_str(self) -> &'static str {
        match self {
            Mpaa::G => "G",
            Mpaa::Pg => "PG",
            Mpaa::Pg13 => "PG-13",
            Mpaa::R => "R",
            Mpaa::Nc17 => "NC-17",
            Mpaa::Unrated => "UNRATED",
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }

    /// One-hot encoding.
    pub fn flags(self) -> [bool; MPAA_COUNT] {
        let mut v = [false; MPAA_COUNT];
        v[self.slot()] = true;
        v
    }
}

impl FromStr for Mpaa {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mpaa::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown MPAA category {s:?}"))
    }
}

impl fmt::Display for Mpaa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovieEnrichment {
    pub movie_id: u32,
    pub mpaa: Mpaa,
    /// Sex & nudity, violence & gore, profanity, alcohol/drugs/smoking,
    /// frightening & intense scenes; each in `[0, 3]`.
    pub parental: [f64; PARENTAL_COUNT],
}

impl MovieEnrichment {
    pub fn new(movie_id: u32, mpaa: Mpaa, parental: [f64; PARENTAL_COUNT]) -> Result<Self> {
        if let Some(bad) = parental.iter().find(|p| !(0.0..=PARENTAL_MAX).contains(*p)) {
            return Err(Error::validation(format!(
                "movie {movie_id}: parental score {bad} outside [0,3]"
            )));
        }
        Ok(MovieEnrichment {
            movie_id,
            mpaa,
            parental,
        })
    }
}

pub type EnrichmentMap = BTreeMap<u32, MovieEnrichment>;

/// Everything known about a movie that feeds the feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovieMeta {
    pub movie_id: u32,
    pub genres: GenreFlags,
    pub mpaa: Mpaa,
    pub parental: [f64; PARENTAL_COUNT],
}

pub fn parse_enrichment_row(line: usize, fields: &[&str]) -> Result<MovieEnrichment> {
    let invalid = |message: String| Error::InvalidRecord { line, message };
    if fields.len() != ENRICHMENT_HEADER.len() {
        return Err(Error::Parse {
            line,
            message: format!("expected 7 columns, found {}", fields.len()),
        });
    }
    let movie_id: u32 = fields[0].trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("movie_id is not an integer: {:?}", fields[0]),
    })?;
    if movie_id == 0 {
        return Err(invalid("movie_id must be positive".into()));
    }
    let mpaa: Mpaa = fields[1].trim().parse().map_err(invalid)?;
    let mut parental = [0.0; PARENTAL_COUNT];
    for (slot, raw) in parental.iter_mut().zip(&fields[2..]) {
        let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("score is not a number: {raw:?}"),
        })?;
        if !(0.0..=PARENTAL_MAX).contains(&v) {
            return Err(invalid(format!("score {v} out of range [0,3]")));
        }
        *slot = v;
    }
    Ok(MovieEnrichment {
        movie_id,
        mpaa,
        parental,
    })
}

pub fn load_enrichment(path: impl AsRef<Path>) -> Result<EnrichmentMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_enrichment(&bytes)
}

pub fn parse_enrichment(bytes: &[u8]) -> Result<EnrichmentMap> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| Error::format("csv", e))?;
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    if header != ENRICHMENT_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                ENRICHMENT_HEADER.join(","),
                header.join(",")
            ),
        });
    }
    let mut map = EnrichmentMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format("csv", e))?;
        let fields: Vec<&str> = rec.iter().collect();
        let row = parse_enrichment_row(line, &fields)?;
        if map.insert(row.movie_id, row).is_some() {
            return Err(Error::InvalidRecord {
                line,
                message: format!("duplicate movie_id {}", row.movie_id),
            });
        }
    }
    Ok(map)
}

/// Writes a sidecar in the format accepted by [`load_enrichment`], rows in
/// ascending movie id.
pub fn write_enrichment(map: &EnrichmentMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format("csv", e))?;
    w.write_record(ENRICHMENT_HEADER)
        .map_err(|e| Error::format("csv", e))?;
    for e in map.values() {
        let mut row = vec![e.movie_id.to_string(), e.mpaa.to_string()];
        row.extend(e.parental.iter().map(|p| p.to_string()));
        w.write_record(&row).map_err(|e| Error::format("csv", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedMeta {
    /// One entry per input movie, input order.
    pub meta: Vec<MovieMeta>,
    pub covered: usize,
}

impl MergedMeta {
    /// Fraction of movies that had an enrichment row. An empty movie list
    /// counts as fully covered.
    pub fn coverage(&self) -> f64 {
        if self.meta.is_empty() {
            1.0
        } else {
            self.covered as f64 / self.meta.len() as f64
        }
    }

    pub fn by_id(&self) -> BTreeMap<u32, MovieMeta> {
        self.meta.iter().map(|m| (m.movie_id, *m)).collect()
    }
}

pub fn merge_meta(movies: &[MovieRecord], enrich: &EnrichmentMap) -> MergedMeta {
    let mut covered = 0;
    let meta = movies
        .iter()
        .map(|m| {
            let (mpaa, parental) = match enrich.get(&m.movie_id) {
                Some(e) => {
                    covered += 1;
                    (e.mpaa, e.parental)
                }
                None => (Mpaa::Unrated, [0.0; PARENTAL_COUNT]),
            };
            MovieMeta {
                movie_id: m.movie_id,
                genres: m.genres,
                mpaa,
                parental,
            }
        })
        .collect();
    let merged = MergedMeta { meta, covered };
    log::info!(
        "enrichment coverage: {}/{} movies ({:.3})",
        merged.covered,
        merged.meta.len(),
        merged.coverage()
    );
    merged
}

/// Category weights for synthetic MPAA draws, in [`Mpaa::ALL`] order.
const SYNTH_MPAA_WEIGHTS: [u32; MPAA_COUNT] = [5, 15, 25, 40, 2, 13];

fn movie_seed(seed: u64, movie_id: u32) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (u64::from(movie_id)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stand-in for a real sidecar: each movie's row depends only
/// on `(movie_id, seed)`.
pub fn synth_enrichment(movies: &[MovieRecord], seed: u64) -> EnrichmentMap {
    let total: u32 = SYNTH_MPAA_WEIGHTS.iter().sum();
    movies
        .iter()
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(movie_seed(seed, m.movie_id));
            let mut draw = rng.gen_range(0..total);
            let mut mpaa = Mpaa::Unrated;
            for (cat, &w) in Mpaa::ALL.iter().zip(&SYNTH_MPAA_WEIGHTS) {
                if draw < w {
                    mpaa = *cat;
                    break;
                }
                draw -= w;
            }
            let mut parental = [0.0; PARENTAL_COUNT];
            for p in &mut parental {
                *p = f64::from(rng.gen_range(0u8..=3));
            }
            (
                m.movie_id,
                MovieEnrichment {
                    movie_id: m.movie_id,
                    mpaa,
                    parental,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn movies(n: u32) -> Vec<MovieRecord> {
        (1..=n)
            .map(|id| MovieRecord {
                movie_id: id,
                title: format!("m{id}"),
                genres: GenreFlags::from_names(["Drama"]).unwrap(),
            })
            .collect()
    }

    fn sidecar(rows: &str) -> String {
        format!("{}\n{rows}", ENRICHMENT_HEADER.join(","))
    }

    #[test]
    fn loads_rows() {
        let map = parse_enrichment(sidecar("1,G,0,1,0,0,1\n2,NC-17,3,2.5,0,0,0\n").as_bytes()).unwrap();
        assert_eq!(map[&1].mpaa, Mpaa::G);
        assert_eq!(map[&1].mpaa.flags(), [true, false, false, false, false, false]);
        assert_eq!(map[&1].parental, [0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(map[&2].mpaa.flags(), [false, false, false, false, true, false]);
        assert_eq!(map[&2].parental[1], 2.5);
    }

    #[test]
    fn rejects_bad_rows() {
        let err = parse_enrichment(sidecar("1,PG,0,0,0,0,4\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
        let err = parse_enrichment(sidecar("1,PG,0,0,0,0,0\n1,R,0,0,0,0,0\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(parse_enrichment(sidecar("1,X,0,0,0,0,0\n").as_bytes()).is_err());
        assert!(parse_enrichment(b"id,mpaa\n1,G\n").is_err());
        assert!(MovieEnrichment::new(1, Mpaa::R, [0.0, 0.0, -1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn merge_defaults_and_coverage() {
        let ms = movies(2);
        let mut map = EnrichmentMap::new();
        map.insert(1, MovieEnrichment::new(1, Mpaa::R, [1.0, 2.0, 3.0, 0.0, 1.0]).unwrap());
        let merged = merge_meta(&ms, &map);
        assert_eq!(merged.meta.len(), 2);
        assert_eq!(merged.coverage(), 0.5);
        assert_eq!(merged.meta[1].mpaa, Mpaa::Unrated);
        assert_eq!(merged.meta[1].mpaa.slot(), 5);
        assert_eq!(merged.meta[1].parental, [0.0; 5]);

        let ms = movies(3);
        let full = synth_enrichment(&ms, 1);
        assert_eq!(merge_meta(&ms, &full).coverage(), 1.0);
    }

    #[test]
    fn synth_is_deterministic_and_valid() {
        let ms = movies(200);
        let a = synth_enrichment(&ms, 7);
        assert_eq!(a, synth_enrichment(&ms, 7));
        let b = synth_enrichment(&ms, 8);
        assert_ne!(a, b);
        for e in a.values() {
            assert!(MovieEnrichment::new(e.movie_id, e.mpaa, e.parental).is_ok());
            assert!(e.parental.iter().all(|p| p.fract() == 0.0));
        }
        // per-movie rows do not depend on which other movies are present
        let sub = synth_enrichment(&ms[50..60], 7);
        for (id, e) in &sub {
            assert_eq!(a[id], *e);
        }
    }

    #[test]
    fn sidecar_roundtrip() {
        let ms = movies(20);
        let map = synth_enrichment(&ms, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enrich.csv");
        write_enrichment(&map, &path).unwrap();
        assert_eq!(load_enrichment(&path).unwrap(), map);
    }
}
