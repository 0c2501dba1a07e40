//! Reader for the `UserID::MovieID::Rating::Timestamp` ratings layout.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    /// Dense user index.
    pub user: u32,
    /// Dense movie index.
    pub movie: u32,
    pub value: f64,
}

/// Observed ratings with users and movies re-indexed densely in ascending
/// order of their original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    pub user_ids: Vec<u32>,
    pub movie_ids: Vec<u32>,
    pub ratings: Vec<Rating>,
}

impl RatingsTable {
    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_movies(&self) -> usize {
        self.movie_ids.len()
    }

    fn from_raw(raw: Vec<(u32, u32, f64)>) -> Self {
        let user_ids: Vec<u32> = raw.iter().map(|r| r.0).collect::<BTreeSet<_>>().into_iter().collect();
        let movie_ids: Vec<u32> = raw.iter().map(|r| r.1).collect::<BTreeSet<_>>().into_iter().collect();
        let dense = |ids: &[u32], id: u32| ids.binary_search(&id).expect("id collected above") as u32;
        let ratings = raw
            .iter()
            .map(|&(u, m, value)| Rating {
                user: dense(&user_ids, u),
                movie: dense(&movie_ids, m),
                value,
            })
            .collect();
        Self {
            user_ids,
            movie_ids,
            ratings,
        }
    }

    /// Keeps the first `max_users` users and `max_movies` movies by original
    /// id, then drops anyone left without ratings.
    pub fn subsample(&self, max_users: Option<usize>, max_movies: Option<usize>) -> Self {
        let mu = max_users.unwrap_or(usize::MAX);
        let mm = max_movies.unwrap_or(usize::MAX);
        let raw = self
            .ratings
            .iter()
            .filter(|r| (r.user as usize) < mu && (r.movie as usize) < mm)
            .map(|r| (self.user_ids[r.user as usize], self.movie_ids[r.movie as usize], r.value))
            .collect();
        Self::from_raw(raw)
    }
}

pub fn parse_ratings(text: &str, origin: &Path) -> Result<RatingsTable> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 `::`-separated fields, got {}", fields.len())));
        }
        let user = fields[0].parse::<u32>().map_err(|e| err(format!("user id: {e}")))?;
        let movie = fields[1].parse::<u32>().map_err(|e| err(format!("movie id: {e}")))?;
        let value = fields[2].parse::<f64>().map_err(|e| err(format!("rating: {e}")))?;
        if !value.is_finite() {
            return Err(err(format!("rating is not finite: {value}")));
        }
        fields[3].parse::<u64>().map_err(|e| err(format!("timestamp: {e}")))?;
        raw.push((user, movie, value));
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput(origin.to_path_buf()));
    }
    Ok(RatingsTable::from_raw(raw))
}

pub fn ingest_ratings(path: &Path) -> Result<RatingsTable> {
    let bytes = fs::read(path)?;
    // ml-1m ships as latin-1; only the numeric fields matter here
    let text = String::from_utf8_lossy(&bytes);
    parse_ratings(&text, path)
}
