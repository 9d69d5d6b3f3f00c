//! MovieLens-1M ingestion.
//!
//! The three `::`-delimited files (`ratings.dat`, `users.dat`,
//! `movies.dat`) are parsed into typed records and assembled into a
//! [`Dataset`] with referential integrity checked. A dataset can be dumped
//! to (and reloaded from) a directory of UTF-8 CSV files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GENRE_COUNT: usize = 18;

/// Genre tokens in slot order.
pub const GENRES: [&str; GENRE_COUNT] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

pub const AGE_CODES: [u8; 7] = [1, 18, 25, 35, 45, 50, 56];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the seven MovieLens age codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AgeCode(u8);

impl AgeCode {
    pub fn new(code: u8) -> Result<Self, String> {
        if AGE_CODES.contains(&code) {
            Ok(AgeCode(code))
        } else {
            Err(format!("unknown age code {code}"))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn band(self) -> AgeBand {
        match self.0 {
            1 | 18 | 25 => AgeBand::Young,
            35 | 45 => AgeBand::Adult,
            _ => AgeBand::Old,
        }
    }
}

impl TryFrom<u8> for AgeCode {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, String> {
        AgeCode::new(code)
    }
}

impl From<AgeCode> for u8 {
    fn from(code: AgeCode) -> u8 {
        code.0
    }
}

impl fmt::Display for AgeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Three-way age reduction: {1,18,25} young, {35,45} adult, {50,56} old.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeBand {
    Young,
    Adult,
    Old,
}

impl AgeBand {
    pub const ALL: [AgeBand; 3] = [AgeBand::Young, AgeBand::Adult, AgeBand::Old];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Young => "young",
            AgeBand::Adult => "adult",
            AgeBand::Old => "old",
        }
    }
}

impl FromStr for AgeBand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        AgeBand::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown age band {s:?}"))
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: u32,
    pub gender: Gender,
    pub age: AgeCode,
    pub occupation: u32,
    pub zip: String,
}

/// Binary genre membership in [`GENRES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenreFlags(pub [bool; GENRE_COUNT]);

impl GenreFlags {
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self, String> {
        let mut flags = [false; GENRE_COUNT];
        for name in names {
            let slot = GENRES
                .iter()
                .position(|g| *g == name)
                .ok_or_else(|| format!("unknown genre {name:?}"))?;
            flags[slot] = true;
        }
        Ok(GenreFlags(flags))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        GENRES
            .iter()
            .zip(self.0.iter())
            .filter(|(_, &on)| on)
            .map(|(g, _)| *g)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&on| on).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title: String,
    pub genres: GenreFlags,
}

/// Records parsed in lenient mode plus the lines that were rejected.
#[derive(Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejected: Vec<Error>,
    /// Non-blank input lines seen.
    pub lines: usize,
}

/// Splits raw bytes into lines, decoding each as UTF-8 and falling back to
/// Latin-1 for lines that are not valid UTF-8. Yields 1-based line numbers;
/// blank lines are skipped.
fn decoded_lines(bytes: &[u8]) -> impl Iterator<Item = (usize, String)> + '_ {
    bytes.split(|&b| b == b'\n').enumerate().filter_map(|(i, raw)| {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.iter().all(|b| b.is_ascii_whitespace()) {
            return None;
        }
        let text = match std::str::from_utf8(raw) {
            Ok(s) => s.to_owned(),
            Err(_) => raw.iter().map(|&b| b as char).collect(),
        };
        Some((i + 1, text))
    })
}

fn parse_all<T>(bytes: &[u8], parse: impl Fn(usize, &str) -> Result<T>) -> Parsed<T> {
    let mut out = Parsed {
        records: Vec::new(),
        rejected: Vec::new(),
        lines: 0,
    };
    for (line_no, line) in decoded_lines(bytes) {
        out.lines += 1;
        match parse(line_no, &line) {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.rejected.push(e),
        }
    }
    out
}

fn parse_strict<T>(bytes: &[u8], parse: impl Fn(usize, &str) -> Result<T>) -> Result<Vec<T>> {
    decoded_lines(bytes)
        .map(|(line_no, line)| parse(line_no, &line))
        .collect()
}

fn fields<'a, const N: usize>(line_no: usize, line: &'a str, layout: &str) -> Result<[&'a str; N]> {
    let parts: Vec<&str> = line.split("::").collect();
    parts.try_into().map_err(|parts: Vec<&str>| Error::Parse {
        line: line_no,
        message: format!("expected {N} fields ({layout}), found {}", parts.len()),
    })
}

fn number<T: FromStr>(line_no: usize, field: &str, name: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("{name} is not a valid integer: {field:?}"),
    })
}

fn positive_id(line_no: usize, field: &str, name: &str) -> Result<u32> {
    let id: u32 = number(line_no, field, name)?;
    if id == 0 {
        return Err(Error::InvalidRecord {
            line: line_no,
            message: format!("{name} must be positive"),
        });
    }
    Ok(id)
}

pub fn parse_rating_line(line_no: usize, line: &str) -> Result<RatingEvent> {
    let [user, movie, rating, ts] = fields::<4>(line_no, line, "UserID::MovieID::Rating::Timestamp")?;
    let rating: u8 = number(line_no, rating, "rating")?;
    if !(1..=5).contains(&rating) {
        return Err(Error::InvalidRecord {
            line: line_no,
            message: format!("rating {rating} out of range [1,5]"),
        });
    }
    Ok(RatingEvent {
        user_id: positive_id(line_no, user, "user id")?,
        movie_id: positive_id(line_no, movie, "movie id")?,
        rating,
        timestamp: number(line_no, ts, "timestamp")?,
    })
}

pub fn parse_user_line(line_no: usize, line: &str) -> Result<UserRecord> {
    let [user, gender, age, occupation, zip] =
        fields::<5>(line_no, line, "UserID::Gender::Age::Occupation::Zip-code")?;
    let invalid = |message| Error::InvalidRecord {
        line: line_no,
        message,
    };
    Ok(UserRecord {
        user_id: positive_id(line_no, user, "user id")?,
        gender: gender.trim().parse().map_err(invalid)?,
        age: AgeCode::new(number(line_no, age, "age")?).map_err(invalid)?,
        occupation: number(line_no, occupation, "occupation")?,
        zip: zip.to_owned(),
    })
}

pub fn parse_movie_line(line_no: usize, line: &str) -> Result<MovieRecord> {
    let [movie, title, genres] = fields::<3>(line_no, line, "MovieID::Title::Genres")?;
    let genres = GenreFlags::from_names(genres.trim().split('|')).map_err(|message| {
        Error::InvalidRecord {
            line: line_no,
            message,
        }
    })?;
    if genres.count() == 0 {
        return Err(Error::InvalidRecord {
            line: line_no,
            message: "movie has no genre".into(),
        });
    }
    Ok(MovieRecord {
        movie_id: positive_id(line_no, movie, "movie id")?,
        title: title.to_owned(),
        genres,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn parse_ratings(path: impl AsRef<Path>) -> Result<Vec<RatingEvent>> {
    parse_ratings_bytes(&read(path.as_ref())?)
}

pub fn parse_users(path: impl AsRef<Path>) -> Result<Vec<UserRecord>> {
    parse_users_bytes(&read(path.as_ref())?)
}

pub fn parse_movies(path: impl AsRef<Path>) -> Result<Vec<MovieRecord>> {
    parse_movies_bytes(&read(path.as_ref())?)
}

pub fn parse_ratings_bytes(bytes: &[u8]) -> Result<Vec<RatingEvent>> {
    parse_strict(bytes, parse_rating_line)
}

pub fn parse_users_bytes(bytes: &[u8]) -> Result<Vec<UserRecord>> {
    parse_strict(bytes, parse_user_line)
}

pub fn parse_movies_bytes(bytes: &[u8]) -> Result<Vec<MovieRecord>> {
    parse_strict(bytes, parse_movie_line)
}

/// Like [`parse_ratings_bytes`] but keeps going past bad lines.
pub fn parse_ratings_lenient(bytes: &[u8]) -> Parsed<RatingEvent> {
    parse_all(bytes, parse_rating_line)
}

pub fn parse_users_lenient(bytes: &[u8]) -> Parsed<UserRecord> {
    parse_all(bytes, parse_user_line)
}

pub fn parse_movies_lenient(bytes: &[u8]) -> Parsed<MovieRecord> {
    parse_all(bytes, parse_movie_line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub movies: usize,
    pub ratings: usize,
    pub rated_movies: usize,
    pub users_without_ratings: usize,
}

/// Validated users, movies and ratings.
///
/// Every rating references a known user and movie and each (user, movie)
/// pair occurs at most once. Tables keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    users: Vec<UserRecord>,
    movies: Vec<MovieRecord>,
    ratings: Vec<RatingEvent>,
    user_pos: HashMap<u32, usize>,
    movie_pos: HashMap<u32, usize>,
}

impl Dataset {
    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn movies(&self) -> &[MovieRecord] {
        &self.movies
    }

    pub fn ratings(&self) -> &[RatingEvent] {
        &self.ratings
    }

    pub fn user(&self, user_id: u32) -> Option<&UserRecord> {
        self.user_pos.get(&user_id).map(|&i| &self.users[i])
    }

    pub fn movie(&self, movie_id: u32) -> Option<&MovieRecord> {
        self.movie_pos.get(&movie_id).map(|&i| &self.movies[i])
    }

    /// Indices into [`Dataset::ratings`] grouped per user (S_u), in input
    /// order, keyed by ascending user id. Users without ratings are absent.
    pub fn ratings_by_user(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut by_user: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.ratings.iter().enumerate() {
            by_user.entry(r.user_id).or_default().push(i);
        }
        by_user
    }

    /// Number of ratings per rated movie.
    pub fn rating_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.ratings {
            *counts.entry(r.movie_id).or_insert(0) += 1;
        }
        counts
    }

    pub fn summary(&self) -> DatasetSummary {
        let rated_users: HashSet<u32> = self.ratings.iter().map(|r| r.user_id).collect();
        DatasetSummary {
            users: self.users.len(),
            movies: self.movies.len(),
            ratings: self.ratings.len(),
            rated_movies: self.rating_counts().len(),
            users_without_ratings: self.users.len() - rated_users.len(),
        }
    }

    /// Writes `users.csv`, `movies.csv` and `ratings.csv` into `dir`.
    ///
    /// Headers: `user_id,gender,age,occupation,zip`,
    /// `movie_id,title,genres` (genres pipe-separated) and
    /// `user_id,movie_id,rating,timestamp`.
    pub fn write_canonical(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut w = csv_writer(&dir.join("users.csv"))?;
        write_row(&mut w, &["user_id", "gender", "age", "occupation", "zip"])?;
        for u in &self.users {
            write_row(
                &mut w,
                &[
                    &u.user_id.to_string(),
                    u.gender.as_str(),
                    &u.age.to_string(),
                    &u.occupation.to_string(),
                    &u.zip,
                ],
            )?;
        }
        flush(w, &dir.join("users.csv"))?;

        let mut w = csv_writer(&dir.join("movies.csv"))?;
        write_row(&mut w, &["movie_id", "title", "genres"])?;
        for m in &self.movies {
            let genres: Vec<&str> = m.genres.names().collect();
            write_row(&mut w, &[&m.movie_id.to_string(), &m.title, &genres.join("|")])?;
        }
        flush(w, &dir.join("movies.csv"))?;

        let mut w = csv_writer(&dir.join("ratings.csv"))?;
        write_row(&mut w, &["user_id", "movie_id", "rating", "timestamp"])?;
        for r in &self.ratings {
            write_row(
                &mut w,
                &[
                    &r.user_id.to_string(),
                    &r.movie_id.to_string(),
                    &r.rating.to_string(),
                    &r.timestamp.to_string(),
                ],
            )?;
        }
        flush(w, &dir.join("ratings.csv"))
    }

    /// Reloads a directory written by [`Dataset::write_canonical`].
    pub fn read_canonical(dir: impl AsRef<Path>) -> Result<Dataset> {
        let dir = dir.as_ref();
        let users = read_csv_records(&dir.join("users.csv"), 5, |line, f| {
            parse_user_line(line, &f.join("::"))
        })?;
        let movies = read_csv_records(&dir.join("movies.csv"), 3, |line, f| {
            parse_movie_line(line, &f.join("::"))
        })?;
        let ratings = read_csv_records(&dir.join("ratings.csv"), 4, |line, f| {
            parse_rating_line(line, &f.join("::"))
        })?;
        assemble_dataset(users, movies, ratings)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format("csv", e))
}

fn write_row(w: &mut csv::Writer<fs::File>, row: &[&str]) -> Result<()> {
    w.write_record(row).map_err(|e| Error::format("csv", e))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv_records<T>(
    path: &Path,
    width: usize,
    parse: impl Fn(usize, &[&str]) -> Result<T>,
) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("csv", e))?;
        let fields: Vec<&str> = rec.iter().collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected {width} columns, found {}", fields.len()),
            });
        }
        out.push(parse(i + 2, &fields)?);
    }
    Ok(out)
}

/// Checks referential integrity and builds the lookup indexes.
pub fn assemble_dataset(
    users: Vec<UserRecord>,
    movies: Vec<MovieRecord>,
    ratings: Vec<RatingEvent>,
) -> Result<Dataset> {
    if ratings.is_empty() {
        return Err(Error::validation("no ratings"));
    }
    let mut user_pos = HashMap::with_capacity(users.len());
    for (i, u) in users.iter().enumerate() {
        if user_pos.insert(u.user_id, i).is_some() {
            return Err(Error::validation(format!("duplicate user id {}", u.user_id)));
        }
    }
    let mut movie_pos = HashMap::with_capacity(movies.len());
    for (i, m) in movies.iter().enumerate() {
        if movie_pos.insert(m.movie_id, i).is_some() {
            return Err(Error::validation(format!("duplicate movie id {}", m.movie_id)));
        }
    }
    let mut seen = HashSet::with_capacity(ratings.len());
    for (i, r) in ratings.iter().enumerate() {
        if !user_pos.contains_key(&r.user_id) {
            return Err(Error::validation(format!(
                "rating #{} references unknown user {}",
                i + 1,
                r.user_id
            )));
        }
        if !movie_pos.contains_key(&r.movie_id) {
            return Err(Error::validation(format!(
                "rating #{} references unknown movie {}",
                i + 1,
                r.movie_id
            )));
        }
        if !seen.insert((r.user_id, r.movie_id)) {
            return Err(Error::validation(format!(
                "duplicate rating for user {} and movie {}",
                r.user_id, r.movie_id
            )));
        }
    }
    let dataset = Dataset {
        users,
        movies,
        ratings,
        user_pos,
        movie_pos,
    };
    let summary = dataset.summary();
    log::info!(
        "dataset: {} users, {} movies ({} rated), {} ratings",
        summary.users,
        summary.movies,
        summary.rated_movies,
        summary.ratings
    );
    if summary.users_without_ratings > 0 {
        log::warn!("{} users have no ratings", summary.users_without_ratings);
    }
    Ok(dataset)
}

/// Parses and assembles the three ML-1M files.
pub fn load_movielens(
    ratings: impl AsRef<Path>,
    users: impl AsRef<Path>,
    movies: impl AsRef<Path>,
) -> Result<Dataset> {
    let users = parse_users(users)?;
    let movies = parse_movies(movies)?;
    let ratings = parse_ratings(ratings)?;
    assemble_dataset(users, movies, ratings)
}

/// Loads `ratings.dat`, `users.dat` and `movies.dat` from one directory.
pub fn load_movielens_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    load_movielens(
        dir.join("ratings.dat"),
        dir.join("users.dat"),
        dir.join("movies.dat"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_lines() {
        assert_eq!(
            parse_rating_line(1, "1::1193::5::978300760").unwrap(),
            RatingEvent {
                user_id: 1,
                movie_id: 1193,
                rating: 5,
                timestamp: 978300760
            }
        );
        assert_eq!(
            parse_rating_line(1, "7::42::3::0").unwrap(),
            RatingEvent {
                user_id: 7,
                movie_id: 42,
                rating: 3,
                timestamp: 0
            }
        );
        let err = parse_rating_line(3, "1::2::9::5").unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("out of range"));
        assert!(matches!(
            parse_rating_line(4, "1::2::3").unwrap_err(),
            Error::Parse { line: 4, .. }
        ));
        assert!(parse_rating_line(1, "0::2::3::4").is_err());
    }

    #[test]
    fn user_lines() {
        let u = parse_user_line(1, "1::F::1::10::48067").unwrap();
        assert_eq!((u.user_id, u.gender, u.age.get()), (1, Gender::F, 1));
        assert_eq!((u.occupation, u.zip.as_str()), (10, "48067"));
        let u = parse_user_line(1, "9::M::56::0::00000").unwrap();
        assert_eq!((u.gender, u.age.get()), (Gender::M, 56));
        let err = parse_user_line(1, "9::X::25::0::00000").unwrap_err();
        assert!(err.to_string().contains("unknown gender"));
        let err = parse_user_line(1, "9::M::30::0::00000").unwrap_err();
        assert!(err.to_string().contains("age code"));
    }

    #[test]
    fn movie_lines() {
        let m = parse_movie_line(1, "1::Toy Story (1995)::Animation|Children's|Comedy").unwrap();
        assert_eq!(m.title, "Toy Story (1995)");
        let on: Vec<usize> = (0..GENRE_COUNT).filter(|&i| m.genres.0[i]).collect();
        assert_eq!(on, vec![2, 3, 4]);

        let m = parse_movie_line(1, "5::X::Western").unwrap();
        assert_eq!(m.genres.count(), 1);
        assert!(m.genres.0[17]);

        let err = parse_movie_line(1, "5::X::Komedy").unwrap_err();
        assert!(err.to_string().contains("\"Komedy\""), "{err}");
    }

    #[test]
    fn latin1_titles_decode() {
        let mut bytes = b"3::Caf".to_vec();
        bytes.push(0xE9); // é in Latin-1, invalid as UTF-8
        bytes.extend_from_slice(b" (1999)::Drama\n");
        let movies = parse_movies_bytes(&bytes).unwrap();
        assert_eq!(movies[0].title, "Café (1999)");
    }

    #[test]
    fn lenient_parse_accounts_for_every_line() {
        let input = b"1::1::5::1\n1::2::7::1\nbad\n\n2::1::3::4\r\n";
        let parsed = parse_ratings_lenient(input);
        assert_eq!(parsed.lines, 4);
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.rejected.len(), 2);
        assert!(parse_ratings_bytes(input).is_err());
    }

    fn tiny() -> (Vec<UserRecord>, Vec<MovieRecord>, Vec<RatingEvent>) {
        let users = parse_users_bytes(b"1::F::1::10::48067\n2::M::25::3::12345\n").unwrap();
        let movies = parse_movies_bytes(b"10::A, the (1990)::Comedy\n20::B::Drama|War\n").unwrap();
        let ratings = parse_ratings_bytes(b"1::10::5::3\n1::20::2::1\n2::10::4::7\n").unwrap();
        (users, movies, ratings)
    }

    #[test]
    fn assemble_counts_and_integrity() {
        let (users, movies, ratings) = tiny();
        let ds = assemble_dataset(users.clone(), movies.clone(), ratings.clone()).unwrap();
        let s = ds.summary();
        assert_eq!((s.users, s.movies, s.ratings), (2, 2, 3));

        assert!(assemble_dataset(users.clone(), movies.clone(), vec![])
            .unwrap_err()
            .to_string()
            .contains("no ratings"));

        let mut dangling = ratings.clone();
        dangling.push(RatingEvent {
            user_id: 3,
            movie_id: 10,
            rating: 1,
            timestamp: 0,
        });
        assert!(assemble_dataset(users.clone(), movies.clone(), dangling).is_err());

        let mut dup = ratings;
        dup.push(dup[0]);
        assert!(assemble_dataset(users, movies, dup).is_err());
    }

    #[test]
    fn ratings_grouped_in_input_order() {
        let (users, movies, ratings) = tiny();
        let ds = assemble_dataset(users, movies, ratings).unwrap();
        let groups = ds.ratings_by_user();
        assert_eq!(groups[&1], vec![0, 1]);
        assert_eq!(groups[&2], vec![2]);
    }

    #[test]
    fn canonical_roundtrip() {
        let (users, movies, ratings) = tiny();
        let ds = assemble_dataset(users, movies, ratings).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.write_canonical(dir.path()).unwrap();
        let header = fs::read_to_string(dir.path().join("ratings.csv")).unwrap();
        assert!(header.starts_with("user_id,movie_id,rating,timestamp\n"));
        let back = Dataset::read_canonical(dir.path()).unwrap();
        assert_eq!(back, ds);
    }
}
